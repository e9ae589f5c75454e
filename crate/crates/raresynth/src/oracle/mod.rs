//! The black-box boundary: deterministic score functions standing in for a
//! target system, threshold labeling, strict budget accounting, and
//! exhaustive ground-truth enumeration for small spaces.

mod synthetic;

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Mutex;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::io_err;
use crate::schema::{Packet, PacketSchema};
use crate::{Error, Result};

pub use synthetic::{SyntheticAmplifier, SyntheticLatency, TargetKind};

/// Default exhaustive-enumeration cap: 2^24 packets.
pub const ENUMERATION_CAP: u64 = 1 << 24;

/// A deterministic mapping from packets to real-valued scores (e.g. the
/// response/request size ratio of a protocol server). The same packet must
/// always yield the same score.
pub trait ScoreFunction: Send + Sync {
    fn score(&self, packet: &Packet) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Rare,
    Common,
}

impl Label {
    /// Threshold rule: a score at or above `t` is rare.
    pub fn from_score(score: f64, t: f64) -> Label {
        if score >= t {
            Label::Rare
        } else {
            Label::Common
        }
    }

    /// Class index used for condition one-hots and classifier outputs:
    /// rare = 0, common = 1.
    pub fn class_index(self) -> usize {
        match self {
            Label::Rare => 0,
            Label::Common => 1,
        }
    }

    pub fn is_rare(self) -> bool {
        self == Label::Rare
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Rare => write!(f, "rare"),
            Label::Common => write!(f, "common"),
        }
    }
}

struct OracleInner {
    spent: usize,
    cache: HashMap<Packet, (f64, Label)>,
    transcript: Option<fs::File>,
}

/// Budgeted labeling boundary around a score function.
///
/// Each *distinct* packet charges the budget exactly once; repeated queries
/// are answered from the cache for free. `label` is linearizable: the oracle
/// can be shared across threads and budget accounting behaves as if
/// serialized.
pub struct BudgetedOracle {
    score_fn: Box<dyn ScoreFunction>,
    threshold: f64,
    budget: usize,
    inner: Mutex<OracleInner>,
}

impl BudgetedOracle {
    pub fn new(score_fn: Box<dyn ScoreFunction>, threshold: f64, budget: usize) -> Self {
        BudgetedOracle {
            score_fn,
            threshold,
            budget,
            inner: Mutex::new(OracleInner {
                spent: 0,
                cache: HashMap::new(),
                transcript: None,
            }),
        }
    }

    /// Appends every subsequent label call to a transcript file, one line per
    /// call: `packet<TAB>score<TAB>label<TAB>spent_after`.
    pub fn with_transcript(self, path: &Path) -> Result<Self> {
        let file = fs::File::create(path).map_err(|e| io_err(path.display().to_string(), e))?;
        self.inner.lock().unwrap().transcript = Some(file);
        Ok(self)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn spent(&self) -> usize {
        self.inner.lock().unwrap().spent
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.spent()
    }

    /// Scores and labels a packet, charging the budget if it has not been
    /// seen before. Fails with `BudgetExhausted` when a new distinct packet
    /// arrives after the budget is spent.
    pub fn label(&self, packet: &Packet) -> Result<(f64, Label)> {
        let mut inner = self.inner.lock().unwrap();
        if let Some(&(score, label)) = inner.cache.get(packet) {
            let spent = inner.spent;
            Self::log_line(&mut inner, packet, score, label, spent)?;
            return Ok((score, label));
        }
        if inner.spent >= self.budget {
            return Err(Error::BudgetExhausted {
                spent: inner.spent,
                budget: self.budget,
            });
        }
        let score = self.score_fn.score(packet)?;
        if !score.is_finite() {
            return Err(Error::NonFinite(format!("score of packet {packet}")));
        }
        let label = Label::from_score(score, self.threshold);
        inner.spent += 1;
        inner.cache.insert(packet.clone(), (score, label));
        let spent = inner.spent;
        Self::log_line(&mut inner, packet, score, label, spent)?;
        Ok((score, label))
    }

    /// Returns a cached result without charging or scoring. Used where a
    /// true label may be reused freely (e.g. loss weighting of samples that
    /// happen to be labeled already).
    pub fn peek(&self, packet: &Packet) -> Option<(f64, Label)> {
        self.inner.lock().unwrap().cache.get(packet).copied()
    }

    /// Whether at least `n` more distinct packets can be labeled.
    pub fn can_afford(&self, n: usize) -> bool {
        self.remaining() >= n
    }

    fn log_line(
        inner: &mut OracleInner,
        packet: &Packet,
        score: f64,
        label: Label,
        spent: usize,
    ) -> Result<()> {
        if let Some(file) = inner.transcript.as_mut() {
            writeln!(file, "{packet}\t{score}\t{label}\t{spent}")
                .map_err(|e| io_err("oracle transcript", e))?;
        }
        Ok(())
    }
}

/// Exhaustive enumeration output: the exact rare set, its score multiset,
/// and the exact rare fraction.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub rare_packets: Vec<Packet>,
    pub rare_scores: Vec<f64>,
    pub alpha: f64,
    pub total: u64,
}

/// Enumerates the entire search space (must be within `cap` packets) and
/// scores every packet directly, bypassing any budget.
pub fn enumerate_ground_truth(
    schema: &PacketSchema,
    score_fn: &dyn ScoreFunction,
    threshold: f64,
    cap: u64,
) -> Result<GroundTruth> {
    let size = schema.search_space_size();
    if size > BigUint::from(cap) {
        return Err(Error::SpaceTooLarge {
            size: size.to_string(),
            cap: cap.to_string(),
        });
    }
    let total: u64 = size.try_into().expect("size fits after cap check");
    let mut rare_packets = Vec::new();
    let mut rare_scores = Vec::new();
    let mut values = vec![0usize; schema.field_count()];
    loop {
        let packet = Packet::new(values.clone());
        let score = score_fn.score(&packet)?;
        if score >= threshold {
            rare_packets.push(packet);
            rare_scores.push(score);
        }
        // Odometer increment over the field indices.
        let mut pos = values.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            values[pos] += 1;
            if values[pos] < schema.fields()[pos].cardinality {
                break;
            }
            values[pos] = 0;
        }
        if values.iter().all(|&v| v == 0) {
            break;
        }
    }
    let alpha = rare_packets.len() as f64 / total as f64;
    Ok(GroundTruth {
        rare_packets,
        rare_scores,
        alpha,
        total,
    })
}
