//! Packet search spaces: ordered categorical fields, one-hot encoding, and
//! uniform sampling.
//!
//! A schema is an ordered list of fields, each with a cardinality >= 2 and
//! optional human-readable value labels. A packet assigns one category index
//! per field. Networks consume packets as concatenated one-hot blocks and
//! produce per-field probability blocks that decode back by argmax.

mod builtin;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::io_err;
use crate::{Error, Result};

pub use builtin::{builtin_schema, dns_schema, five_tuple_schema, toy_schema};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub cardinality: usize,
    /// Optional candidate-value labels, one per category.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl FieldSpec {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        FieldSpec {
            name: name.into(),
            cardinality,
            labels: None,
        }
    }

    pub fn with_labels(
        name: impl Into<String>,
        labels: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        FieldSpec {
            name: name.into(),
            cardinality: labels.len(),
            labels: Some(labels),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.cardinality < 2 {
            return Err(Error::InvalidSchema(format!(
                "field '{}' has cardinality {}, need >= 2",
                self.name, self.cardinality
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.cardinality {
                return Err(Error::InvalidSchema(format!(
                    "field '{}' has {} labels for cardinality {}",
                    self.name,
                    labels.len(),
                    self.cardinality
                )));
            }
            let mut seen = BTreeMap::new();
            for l in labels {
                if seen.insert(l.as_str(), ()).is_some() {
                    return Err(Error::InvalidSchema(format!(
                        "field '{}' has duplicate label '{l}'",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// An ordered, immutable sequence of categorical fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile", into = "SchemaFile")]
pub struct PacketSchema {
    fields: Vec<FieldSpec>,
    #[serde(skip)]
    encoded_width: usize,
}

/// On-disk TOML shape: `[[fields]]` entries in order.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaFile {
    fields: Vec<FieldSpec>,
}

impl TryFrom<SchemaFile> for PacketSchema {
    type Error = Error;
    fn try_from(f: SchemaFile) -> Result<Self> {
        PacketSchema::new(f.fields)
    }
}

impl From<PacketSchema> for SchemaFile {
    fn from(s: PacketSchema) -> Self {
        SchemaFile { fields: s.fields }
    }
}

impl PacketSchema {
    pub fn new(fields: Vec<FieldSpec>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidSchema("schema has no fields".into()));
        }
        for f in &fields {
            f.validate()?;
        }
        let encoded_width = fields.iter().map(|f| f.cardinality).sum();
        Ok(PacketSchema {
            fields,
            encoded_width,
        })
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    pub fn field_count(&self) -> usize {
        self.fields.len()
    }

    /// Sum of cardinalities: the width of encoded packets and of generator
    /// output blocks.
    pub fn encoded_width(&self) -> usize {
        self.encoded_width
    }

    /// Per-field cardinalities, e.g. for grouped-softmax output heads.
    pub fn group_widths(&self) -> Vec<usize> {
        self.fields.iter().map(|f| f.cardinality).collect()
    }

    /// Exact number of distinct packets (product of cardinalities).
    pub fn search_space_size(&self) -> BigUint {
        let mut size = BigUint::from(1u32);
        for f in &self.fields {
            size *= BigUint::from(f.cardinality);
        }
        size
    }

    pub fn validate_packet(&self, packet: &Packet) -> Result<()> {
        if packet.values().len() != self.fields.len() {
            return Err(Error::InvalidSchema(format!(
                "packet has {} fields, schema has {}",
                packet.values().len(),
                self.fields.len()
            )));
        }
        for (i, (&v, f)) in packet.values().iter().zip(&self.fields).enumerate() {
            if v >= f.cardinality {
                return Err(Error::InvalidSchema(format!(
                    "field {i} ('{}') index {v} out of range 0..{}",
                    f.name, f.cardinality
                )));
            }
        }
        Ok(())
    }

    /// Concatenated one-hot blocks: width `encoded_width`, exactly one 1.0
    /// per field block.
    pub fn encode(&self, packet: &Packet) -> Result<Vec<f64>> {
        self.validate_packet(packet)?;
        let mut out = vec![0.0; self.encoded_width];
        let mut offset = 0;
        for (&v, f) in packet.values().iter().zip(&self.fields) {
            out[offset + v] = 1.0;
            offset += f.cardinality;
        }
        Ok(out)
    }

    /// Per-field argmax of a soft vector; ties break to the lowest index.
    pub fn decode(&self, soft: &[f64]) -> Result<Packet> {
        if soft.len() != self.encoded_width {
            return Err(Error::DimensionMismatch(format!(
                "vector width {} != encoded width {}",
                soft.len(),
                self.encoded_width
            )));
        }
        if soft.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("decode input".into()));
        }
        let mut values = Vec::with_capacity(self.fields.len());
        let mut offset = 0;
        for f in &self.fields {
            let block = &soft[offset..offset + f.cardinality];
            let mut best = 0;
            for (i, &v) in block.iter().enumerate() {
                if v > block[best] {
                    best = i;
                }
            }
            values.push(best);
            offset += f.cardinality;
        }
        Ok(Packet::new(values))
    }

    /// One packet with every field drawn independently and uniformly.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Packet {
        let values = self
            .fields
            .iter()
            .map(|f| rng.random_range(0..f.cardinality))
            .collect();
        Packet::new(values)
    }

    /// Iterates over every packet of the space in odometer order (last
    /// field fastest). Only sensible for small spaces.
    pub fn enumerate(&self) -> PacketIter<'_> {
        PacketIter {
            schema: self,
            next: Some(vec![0; self.fields.len()]),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidSchema(format!("schema parse: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml_string()).map_err(|e| io_err(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.display().to_string()));
        }
        let text = fs::read_to_string(path).map_err(|e| io_err(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }
}

/// Odometer iterator over a whole search space.
pub struct PacketIter<'a> {
    schema: &'a PacketSchema,
    next: Option<Vec<usize>>,
}

impl Iterator for PacketIter<'_> {
    type Item = Packet;

    fn next(&mut self) -> Option<Packet> {
        let values = self.next.take()?;
        let packet = Packet::new(values.clone());
        let mut values = values;
        let mut pos = values.len();
        let mut wrapped = true;
        while pos > 0 {
            pos -= 1;
            values[pos] += 1;
            if values[pos] < self.schema.fields[pos].cardinality {
                wrapped = false;
                break;
            }
            values[pos] = 0;
        }
        if !wrapped {
            self.next = Some(values);
        }
        Some(packet)
    }
}

/// One concrete point of the search space: a category index per field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Packet {
    values: Vec<usize>,
}

impl Packet {
    pub fn new(values: Vec<usize>) -> Self {
        Packet { values }
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    /// Comma-separated category indices, the line format of packet files.
    pub fn to_line(&self) -> String {
        self.values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let values = line
            .trim()
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidSchema(format!("bad packet index '{tok}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Packet::new(values))
    }
}

impl fmt::Display for Packet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_line())
    }
}

/// Writes packets one per line in index form.
pub fn write_packets(path: &Path, packets: &[Packet]) -> Result<()> {
    let mut out = String::new();
    for p in packets {
        out.push_str(&p.to_line());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path.display().to_string(), e))
}

pub fn read_packets(path: &Path) -> Result<Vec<Packet>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path.display().to_string(), e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(Packet::from_line)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary_schema(n: usize) -> PacketSchema {
        toy_schema(n)
    }

    #[test]
    fn single_binary_field_encodes_one_hot() {
        let schema = binary_schema(1);
        let enc = schema.encode(&Packet::new(vec![1])).unwrap();
        assert_eq!(enc, vec![0.0, 1.0]);
    }

    #[test]
    fn dns_id_group_is_sixteen_one_hot_blocks() {
        let schema = dns_schema();
        // The first 16 fields are the id bits, each a 2-wide block.
        let id_fields: Vec<_> = schema.fields().iter().take(16).collect();
        assert!(id_fields.iter().all(|f| f.cardinality == 2));
        assert!(id_fields.iter().all(|f| f.name.starts_with("id")));
        let packet = schema.sample_uniform(&mut ChaCha8Rng::seed_from_u64(1));
        let enc = schema.encode(&packet).unwrap();
        for (i, block) in enc[..32].chunks(2).enumerate() {
            let ones = block.iter().filter(|&&v| v == 1.0).count();
            assert_eq!(ones, 1, "id bit {i}");
        }
    }

    #[test]
    fn decode_argmax_and_tie_break() {
        let schema = binary_schema(1);
        assert_eq!(schema.decode(&[0.9, 0.1]).unwrap().values(), &[0]);
        // Tie breaks to the lowest index.
        assert_eq!(schema.decode(&[0.5, 0.5]).unwrap().values(), &[0]);
    }

    #[test]
    fn decode_rejects_bad_width_and_nan() {
        let schema = binary_schema(2);
        assert!(schema.decode(&[0.1, 0.2, 0.3]).is_err());
        assert!(schema.decode(&[0.1, f64::NAN, 0.2, 0.3]).is_err());
    }

    #[test]
    fn roundtrip_on_random_packets() {
        let schema = dns_schema();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let p = schema.sample_uniform(&mut rng);
            let enc = schema.encode(&p).unwrap();
            assert_eq!(schema.decode(&enc).unwrap(), p);
        }
    }

    #[test]
    fn cardinality_below_two_is_rejected() {
        let err = PacketSchema::new(vec![FieldSpec::new("x", 1)]);
        assert!(err.is_err());
    }

    #[test]
    fn uniform_sampling_is_seed_deterministic_and_near_half() {
        let schema = binary_schema(1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ones = 0usize;
        let n = 100_000;
        for _ in 0..n {
            ones += schema.sample_uniform(&mut rng).values()[0];
        }
        let freq = ones as f64 / n as f64;
        assert!((0.49..=0.51).contains(&freq), "freq {freq}");

        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(schema.sample_uniform(&mut a), schema.sample_uniform(&mut b));
        }
    }

    #[test]
    fn search_space_sizes_match_known_values() {
        assert_eq!(binary_schema(1).search_space_size(), BigUint::from(2u32));
        assert_eq!(
            five_tuple_schema().search_space_size(),
            BigUint::from(2u32).pow(103)
        );
        // Product of the shipped DNS cardinalities:
        // 2^45 * 6 * 43 * 4 * 10 = 363,102,719,956,746,240 (~3.63e17).
        assert_eq!(
            dns_schema().search_space_size(),
            BigUint::parse_bytes(b"363102719956746240", 10).unwrap()
        );
    }

    #[test]
    fn toml_roundtrip_preserves_fields() {
        let schema = PacketSchema::new(vec![
            FieldSpec::new("a", 3),
            FieldSpec::with_labels("b", ["x", "y"]),
        ])
        .unwrap();
        let text = schema.to_toml_string();
        let back = PacketSchema::from_toml_str(&text).unwrap();
        assert_eq!(schema, back);
        assert_eq!(back.encoded_width(), 5);
    }

    #[test]
    fn packet_line_roundtrip() {
        let p = Packet::new(vec![0, 42, 3]);
        assert_eq!(Packet::from_line(&p.to_line()).unwrap(), p);
        assert!(Packet::from_line("1,x,3").is_err());
    }

    #[test]
    fn uniform_marginals_pass_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        // Schema mixing cardinalities; 1e5 draws; chi-square per field at
        // 0.999 confidence.
        let schema = PacketSchema::new(vec![
            FieldSpec::new("bit", 2),
            FieldSpec::new("six", 6),
            FieldSpec::new("ten", 10),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12345);
        let n = 100_000usize;
        let mut counts: Vec<Vec<usize>> = schema
            .fields()
            .iter()
            .map(|f| vec![0; f.cardinality])
            .collect();
        for _ in 0..n {
            let p = schema.sample_uniform(&mut rng);
            for (c, &v) in counts.iter_mut().zip(p.values()) {
                c[v] += 1;
            }
        }
        for (f, c) in schema.fields().iter().zip(&counts) {
            let expected = n as f64 / f.cardinality as f64;
            let stat: f64 = c
                .iter()
                .map(|&obs| {
                    let d = obs as f64 - expected;
                    d * d / expected
                })
                .sum();
            let dist = ChiSquared::new((f.cardinality - 1) as f64).unwrap();
            let critical = dist.inverse_cdf(0.999);
            assert!(
                stat < critical,
                "field '{}': chi2 {stat} >= critical {critical}",
                f.name
            );
        }
    }
}
