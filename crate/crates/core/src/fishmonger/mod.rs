//! Fishmonger: base-`e` PCSA with uniform offsets, stored as the maximum
//! likelihood estimate plus an arithmetic code of the bit matrix against the
//! model law at that estimate, inside a hard space budget.

pub mod coder;
mod format;
mod quant;
mod sketch;

pub use coder::BitString;
pub use format::{HEADER_BITS, MAGIC, VERSION};
pub use quant::{mantissa_bits, QuantizedEstimate};
pub use sketch::{decode, encode, FishmongerSketch, InsertOutcome};

use std::f64::consts::{E, LN_2};

use crate::info::h0;
use crate::sketch::{OffsetMode, SketchParams};
use crate::SketchError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FishmongerParams {
    pub m: u32,
    /// `log2` of the universe size.
    pub u_bits: u32,
    /// Relative entropy slack in the budget.
    pub delta: f64,
}

impl FishmongerParams {
    pub const DEFAULT_U_BITS: u32 = 64;
    pub const DEFAULT_DELTA: f64 = 0.05;

    pub fn new(m: u32) -> Result<Self, SketchError> {
        Self::with(m, Self::DEFAULT_U_BITS, Self::DEFAULT_DELTA)
    }

    pub fn with(m: u32, u_bits: u32, delta: f64) -> Result<Self, SketchError> {
        let p = Self { m, u_bits, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SketchError> {
        if self.m == 0 {
            return Err(SketchError::InvalidParams("m must be at least 1".into()));
        }
        // The quantizer's 8-bit exponent has to reach e^(W+1).
        if !(1..=120).contains(&self.u_bits) {
            return Err(SketchError::InvalidParams(format!(
                "U_bits must be in 1..=120, got {}",
                self.u_bits
            )));
        }
        if self.m as u64 * self.u_bits as u64 > 1 << 31 {
            return Err(SketchError::InvalidParams(
                "m * U_bits must not exceed 2^31".into(),
            ));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(SketchError::InvalidParams(format!(
                "delta must be a non-negative number, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    /// `W = ceil(ln 2^U_bits)`.
    pub fn width(&self) -> u32 {
        (self.u_bits as f64 * LN_2 - 1e-9).ceil().max(1.0) as u32
    }

    /// `m' = m U_bits`, the quantization resolution.
    pub fn m_prime(&self) -> f64 {
        self.m as f64 * self.u_bits as f64
    }

    pub fn mantissa_bits(&self) -> u8 {
        mantissa_bits(self.m, self.u_bits)
    }

    /// Bits charged for the stored estimate.
    pub fn estimate_bits(&self) -> u64 {
        self.mantissa_bits() as u64 + 8
    }

    /// The additive slack `ceil(2 sqrt(m ln m)) + ceil(log2 U_bits)^2 + 64`.
    pub fn slack_bits(&self) -> u64 {
        let m = self.m as f64;
        let log_u = (self.u_bits as f64).log2().ceil() as u64;
        (2.0 * (m * m.ln()).sqrt()).ceil() as u64 + log_u * log_u + 64
    }

    /// Bound on stored estimate plus payload:
    /// `ceil((1 + delta) m H_0) + slack_bits`.
    pub fn budget_bits(&self) -> u64 {
        ((1.0 + self.delta) * self.m as f64 * h0()).ceil() as u64 + self.slack_bits()
    }

    /// The underlying e-PCSA shape.
    pub fn sketch_params(&self) -> SketchParams {
        SketchParams::with_width(E, self.m, self.width(), OffsetMode::Uniform)
            .expect("validated fishmonger params")
    }
}
