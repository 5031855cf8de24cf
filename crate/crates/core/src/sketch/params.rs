use std::fmt;
use std::str::FromStr;

use crate::oracle::{label, OracleSeed};
use crate::SketchError;

/// How the `m` copies are offset against each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetMode {
    /// Every copy sees the full stream (`r_i = 0`).
    None,
    /// `r_i = i / m`.
    Uniform,
    /// `r_i` drawn once from the sketch seed, uniform in `[0, 1)`.
    Random,
}

impl OffsetMode {
    pub fn code(self) -> u8 {
        match self {
            OffsetMode::None => 0,
            OffsetMode::Uniform => 1,
            OffsetMode::Random => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(OffsetMode::None),
            1 => Some(OffsetMode::Uniform),
            2 => Some(OffsetMode::Random),
            _ => None,
        }
    }
}

impl fmt::Display for OffsetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OffsetMode::None => "none",
            OffsetMode::Uniform => "uniform",
            OffsetMode::Random => "random",
        })
    }
}

impl FromStr for OffsetMode {
    type Err = SketchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(OffsetMode::None),
            "uniform" => Ok(OffsetMode::Uniform),
            "random" => Ok(OffsetMode::Random),
            other => Err(SketchError::InvalidParams(format!(
                "unknown offset mode `{other}`"
            ))),
        }
    }
}

/// Shape of a base-`q` sketch: `m` offset copies, each truncated at `w` columns
/// (PCSA) or register value `w` (LogLog).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SketchParams {
    pub q: f64,
    pub m: u32,
    pub w: u32,
    pub offsets: OffsetMode,
}

/// `ceil(log_q 2^64)`, the number of columns needed to cover a 64-bit universe.
pub fn default_width(q: f64) -> u32 {
    let w = 64.0 * std::f64::consts::LN_2 / q.ln();
    (w - 1e-9).ceil().max(1.0) as u32
}

impl SketchParams {
    pub fn new(q: f64, m: u32, offsets: OffsetMode) -> Result<Self, SketchError> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(SketchError::InvalidParams(format!(
                "base q must be > 1, got {q}"
            )));
        }
        Self::with_width(q, m, default_width(q), offsets)
    }

    pub fn with_width(q: f64, m: u32, w: u32, offsets: OffsetMode) -> Result<Self, SketchError> {
        let params = Self { q, m, w, offsets };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), SketchError> {
        if !(self.q > 1.0) || !self.q.is_finite() {
            return Err(SketchError::InvalidParams(format!(
                "base q must be > 1, got {}",
                self.q
            )));
        }
        if self.m == 0 {
            return Err(SketchError::InvalidParams("m must be at least 1".into()));
        }
        if self.w == 0 || self.w > u16::MAX as u32 {
            return Err(SketchError::InvalidParams(format!(
                "width {} out of range",
                self.w
            )));
        }
        Ok(())
    }

    /// Offset vector `r_0..r_{m-1}`. Random offsets depend on the seed.
    pub fn offsets(&self, seed: &OracleSeed) -> Vec<f64> {
        let m = self.m as usize;
        match self.offsets {
            OffsetMode::None => vec![0.0; m],
            OffsetMode::Uniform => (0..m).map(|i| i as f64 / m as f64).collect(),
            // uniform() is in (0,1], so 1 - u lands in [0,1).
            OffsetMode::Random => (0..m)
                .map(|i| 1.0 - seed.uniform(i as u64, label::OFFSET, 0))
                .collect(),
        }
    }
}
