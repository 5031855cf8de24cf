//! Cardinality sketches in the random-oracle model.
//!
//! * [`sketch`]: base-`q` PCSA and LogLog with offset smoothing, the
//!   martingale wrapper, and the `FSKT` file format.
//! * [`estimate`]: likelihoods, MLE, harmonic and geometric estimators.
//! * [`fishmonger`]: arithmetic-coded e-PCSA under a hard space budget.
//! * [`info`]: entropy and Fisher information of sketch families.
//! * [`harness`]: Monte-Carlo experiments and the HyperBitBit demo.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
pub mod estimate;
pub mod fishmonger;
pub mod harness;
pub mod info;
pub mod oracle;
pub mod sketch;

pub use error::SketchError;
pub use oracle::{ElementId, OracleSeed};
pub use sketch::{LlSketch, MartingaleSketch, OffsetMode, PcsaSketch, SketchParams};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;
