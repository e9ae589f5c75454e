//! Training pipeline for synthesizing inputs from the rare class of a
//! black-box system under a labeling budget.
//!
//! The pieces: a packet-field search space ([`schema`]), budgeted black-box
//! scoring oracles ([`oracle`]), a semi-supervised conditional GAN trainer
//! with staged least-confidence labeling and class-weighted losses
//! ([`trainer`]), score-distribution metrics ([`eval`]), and a small dense
//! network engine underneath ([`nn`]).

mod error;

pub mod nn;
pub mod oracle;
pub mod schema;

pub use error::{Error, Result};
