//! Built-in search spaces: the DNS request fields, the packet-classifier
//! 5-tuple, and parameterized all-binary toy spaces.

use super::{FieldSpec, PacketSchema};
use crate::{Error, Result};

fn bit_fields(prefix: &str, count: usize) -> Vec<FieldSpec> {
    (0..count)
        .map(|i| FieldSpec::new(format!("{prefix}{i}"), 2))
        .collect()
}

/// DNS request schema: 16 id bits, opcode (6 candidates), seven 1-bit flags,
/// 4 rcode bits, rdatatype (43 candidates), rdataclass (4 candidates), edns,
/// dnssec, 16 payload bits, and url (10 candidates). Bit-valued fields are
/// modeled as independent binary fields.
pub fn dns_schema() -> PacketSchema {
    let rdatatype = [
        "1", "28", "18", "42", "257", "60", "59", "37", "5", "49", "32769", "39", "48", "43",
        "55", "45", "25", "36", "29", "15", "35", "2", "47", "50", "51", "61", "12", "46", "17",
        "24", "6", "33", "44", "32768", "249", "52", "250", "16", "256", "255", "252", "251",
        "41",
    ];
    let urls = [
        "berkeley.edu",
        "energy.gov",
        "chase.com",
        "aetna.com",
        "google.com",
        "Nairaland.com",
        "Alibaba.com",
        "Cambridge.org",
        "Alarabiya.net",
        "Bnamericas.com",
    ];
    let mut fields = Vec::new();
    fields.extend(bit_fields("id", 16));
    fields.push(FieldSpec::with_labels("opcode", ["0", "1", "2", "3", "4", "5"]));
    for flag in ["aa", "tc", "rd", "ra", "z", "ad", "cd"] {
        fields.push(FieldSpec::new(flag, 2));
    }
    fields.extend(bit_fields("rcode", 4));
    fields.push(FieldSpec::with_labels("rdatatype", rdatatype));
    fields.push(FieldSpec::with_labels("rdataclass", ["1", "3", "4", "255"]));
    fields.push(FieldSpec::new("edns", 2));
    fields.push(FieldSpec::new("dnssec", 2));
    fields.extend(bit_fields("payload", 16));
    fields.push(FieldSpec::with_labels("url", urls));
    PacketSchema::new(fields).expect("dns schema is valid")
}

/// Packet-classification 5-tuple: source/destination IP (32 bits each),
/// source/destination port (16 bits each), protocol (7 bits) — 103 binary
/// fields, 2^103 packets.
pub fn five_tuple_schema() -> PacketSchema {
    let mut fields = Vec::new();
    fields.extend(bit_fields("src_ip", 32));
    fields.extend(bit_fields("dst_ip", 32));
    fields.extend(bit_fields("src_port", 16));
    fields.extend(bit_fields("dst_port", 16));
    fields.extend(bit_fields("protocol", 7));
    PacketSchema::new(fields).expect("five-tuple schema is valid")
}

/// All-binary toy space with `bits` fields, used for enumerable desk-scale
/// experiments.
pub fn toy_schema(bits: usize) -> PacketSchema {
    PacketSchema::new(bit_fields("b", bits)).expect("toy schema is valid")
}

/// Resolves a built-in schema name: `dns`, `fivetuple`, or `toy-<bits>`.
pub fn builtin_schema(name: &str) -> Result<PacketSchema> {
    match name {
        "dns" => Ok(dns_schema()),
        "fivetuple" => Ok(five_tuple_schema()),
        other => {
            if let Some(bits) = other.strip_prefix("toy-") {
                let bits: usize = bits.parse().map_err(|_| {
                    Error::InvalidConfig(format!("bad toy schema name '{other}'"))
                })?;
                if bits == 0 {
                    return Err(Error::InvalidConfig("toy schema needs >= 1 bit".into()));
                }
                Ok(toy_schema(bits))
            } else {
                Err(Error::InvalidConfig(format!(
                    "unknown built-in schema '{other}' (expected dns, fivetuple, or toy-<bits>)"
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dns_schema_shape() {
        let s = dns_schema();
        assert_eq!(s.field_count(), 16 + 1 + 7 + 4 + 1 + 1 + 1 + 1 + 16 + 1);
        assert_eq!(s.encoded_width(), 32 + 6 + 14 + 8 + 43 + 4 + 2 + 2 + 32 + 10);
    }

    #[test]
    fn five_tuple_has_103_bits() {
        let s = five_tuple_schema();
        assert_eq!(s.field_count(), 103);
        assert!(s.fields().iter().all(|f| f.cardinality == 2));
    }

    #[test]
    fn builtin_lookup() {
        assert!(builtin_schema("dns").is_ok());
        assert!(builtin_schema("fivetuple").is_ok());
        assert_eq!(builtin_schema("toy-12").unwrap().field_count(), 12);
        assert!(builtin_schema("toy-0").is_err());
        assert!(builtin_schema("nope").is_err());
    }
}
