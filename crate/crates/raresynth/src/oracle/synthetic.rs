//! Enumerable stand-ins for real black-box targets.

use serde::{Deserialize, Serialize};

use super::ScoreFunction;
use crate::schema::{Packet, PacketSchema};
use crate::{Error, Result};

/// Amplification-style target: a conjunctive gate on a field prefix opens a
/// high-score region whose magnitude grows with the remaining fields.
///
/// `score = 1 + gain * [first k fields == 1] * (1 + ones(rest) / m)` where
/// `m` is the number of remaining fields and `ones` counts fields with
/// category index 1. Under uniform sampling over binary fields the rare
/// fraction at any threshold inside the gated band is `2^-k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticAmplifier {
    prefix_len: usize,
    gain: f64,
    field_count: usize,
}

impl SyntheticAmplifier {
    pub fn new(schema: &PacketSchema, prefix_len: usize, gain: f64) -> Result<Self> {
        if prefix_len == 0 || prefix_len >= schema.field_count() {
            return Err(Error::InvalidConfig(format!(
                "amplifier prefix length {prefix_len} must be in 1..{}",
                schema.field_count()
            )));
        }
        for f in schema.fields().iter().take(prefix_len) {
            if f.cardinality != 2 {
                return Err(Error::InvalidConfig(format!(
                    "amplifier gate field '{}' must be binary",
                    f.name
                )));
            }
        }
        if !(gain > 0.0) {
            return Err(Error::InvalidConfig("amplifier gain must be positive".into()));
        }
        Ok(SyntheticAmplifier {
            prefix_len,
            gain,
            field_count: schema.field_count(),
        })
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }
}

impl ScoreFunction for SyntheticAmplifier {
    fn score(&self, packet: &Packet) -> Result<f64> {
        let values = packet.values();
        if values.len() != self.field_count {
            return Err(Error::InvalidSchema(format!(
                "packet has {} fields, amplifier expects {}",
                values.len(),
                self.field_count
            )));
        }
        let gated = values[..self.prefix_len].iter().all(|&v| v == 1);
        if !gated {
            return Ok(1.0);
        }
        let rest = &values[self.prefix_len..];
        let m = rest.len() as f64;
        let ones = rest.iter().filter(|&&v| v == 1).count() as f64;
        Ok(1.0 + self.gain * (1.0 + ones / m))
    }
}

/// Latency-style target with a multi-plateau structure: the score is
/// `4^c` where `c` counts leading 3-field chunks whose fields are all at
/// category index 1. Plateaus sit at 1, 4, 16, 64, ... with non-smooth
/// jumps between them; a trailing partial chunk is ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticLatency {
    field_count: usize,
}

const LATENCY_CHUNK: usize = 3;

impl SyntheticLatency {
    pub fn new(schema: &PacketSchema) -> Result<Self> {
        if schema.field_count() < LATENCY_CHUNK {
            return Err(Error::InvalidConfig(format!(
                "latency target needs at least {LATENCY_CHUNK} fields"
            )));
        }
        Ok(SyntheticLatency {
            field_count: schema.field_count(),
        })
    }
}

impl ScoreFunction for SyntheticLatency {
    fn score(&self, packet: &Packet) -> Result<f64> {
        let values = packet.values();
        if values.len() != self.field_count {
            return Err(Error::InvalidSchema(format!(
                "packet has {} fields, latency target expects {}",
                values.len(),
                self.field_count
            )));
        }
        let mut chunks = 0usize;
        for chunk in values.chunks_exact(LATENCY_CHUNK) {
            if chunk.iter().all(|&v| v == 1) {
                chunks += 1;
            } else {
                break;
            }
        }
        Ok(4f64.powi(chunks as i32))
    }
}

/// Which synthetic target to build; the CLI-facing selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetKind {
    SyntheticAmp { prefix_len: usize, gain: f64 },
    SyntheticLatency,
}

impl TargetKind {
    pub fn build(&self, schema: &PacketSchema) -> Result<Box<dyn ScoreFunction>> {
        match *self {
            TargetKind::SyntheticAmp { prefix_len, gain } => Ok(Box::new(
                SyntheticAmplifier::new(schema, prefix_len, gain)?,
            )),
            TargetKind::SyntheticLatency => Ok(Box::new(SyntheticLatency::new(schema)?)),
        }
    }
}
