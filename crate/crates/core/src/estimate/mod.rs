//! Cardinality estimators.
//!
//! Likelihoods treat the state as a draw from the Poissonized model, where
//! PCSA cells and LogLog registers are independent.

mod calibrate;
mod ll;
mod pcsa;

pub use calibrate::{
    calibrate_alpha, raw_estimates, AlphaTable, RawEstimator, ALPHA_LAMBDA_REF, ALPHA_TRIALS,
};
pub use ll::{ll_estimate_geometric, ll_estimate_harmonic, ll_log_likelihood, ll_mle};
pub use pcsa::{pcsa_log_likelihood, pcsa_mle, pcsa_mle_from};

use std::fmt;
use std::str::FromStr;

use crate::sketch::SketchParams;
use crate::SketchError;

/// Probabilities inside logarithms are clamped to this range.
pub const PROB_FLOOR: f64 = 1e-300;
pub const PROB_CEIL: f64 = 1.0 - 1e-16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mle,
    Harmonic,
    Geometric,
    Martingale,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mle => "mle",
            Method::Harmonic => "harmonic",
            Method::Geometric => "geometric",
            Method::Martingale => "martingale",
        })
    }
}

impl FromStr for Method {
    type Err = SketchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "mle" => Method::Mle,
            "harmonic" => Method::Harmonic,
            "geometric" => Method::Geometric,
            "martingale" => Method::Martingale,
            other => {
                return Err(SketchError::InvalidParams(format!(
                    "unknown estimator `{other}`"
                )))
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub lambda_hat: f64,
    pub method: Method,
    /// The state is saturated and `lambda_hat` is the sentinel `q^{W+1}`.
    pub saturated: bool,
}

impl Estimate {
    pub fn new(lambda_hat: f64, method: Method) -> Self {
        Self {
            lambda_hat,
            method,
            saturated: false,
        }
    }
}

/// Search bracket `[1/(m W), q^{W+1}]` for maximum-likelihood estimation. The
/// upper end doubles as the saturation sentinel.
pub fn mle_bracket(params: &SketchParams) -> (f64, f64) {
    (
        1.0 / (params.m as f64 * params.w as f64),
        saturation_cap(params),
    )
}

pub fn saturation_cap(params: &SketchParams) -> f64 {
    params.q.powf(params.w as f64 + 1.0)
}

#[inline]
pub(crate) fn clamped_ln(ln_p: f64) -> f64 {
    ln_p.clamp(PROB_FLOOR.ln(), PROB_CEIL.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in [
            Method::Mle,
            Method::Harmonic,
            Method::Geometric,
            Method::Martingale,
        ] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("bisection".parse::<Method>().is_err());
    }
}
