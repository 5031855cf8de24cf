//! Experimental calibration of the harmonic and geometric constants.

use std::path::Path;

use super::{ll_estimate_geometric, ll_estimate_harmonic};
use crate::harness::exec::map_trials;
use crate::oracle::{label, OracleSeed};
use crate::sketch::{LlModel, OffsetMode};
use crate::SketchError;

/// Reference cardinality for cached constants.
pub const ALPHA_LAMBDA_REF: f64 = 1_048_576.0;
pub const ALPHA_TRIALS: u64 = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RawEstimator {
    Harmonic,
    Geometric,
}

/// Uncalibrated (`alpha = 1`) estimates from `trials` independent states at
/// cardinality `lambda`, each drawn from the exact law of `lambda` distinct
/// insertions.
pub fn raw_estimates(
    model: &LlModel,
    estimator: RawEstimator,
    lambda: f64,
    trials: u64,
    seed: u64,
) -> Vec<f64> {
    let root = OracleSeed::new(seed);
    map_trials(trials, |t| {
        let state = model.sample_state(lambda, false, &root.derive(label::TRIAL, t));
        match estimator {
            RawEstimator::Harmonic => ll_estimate_harmonic(&state, model, 1.0).lambda_hat,
            RawEstimator::Geometric => ll_estimate_geometric(&state, model, 1.0).lambda_hat,
        }
    })
}

/// The constant that makes the trial mean of the estimator equal `lambda_ref`.
pub fn calibrate_alpha(
    model: &LlModel,
    estimator: RawEstimator,
    lambda_ref: f64,
    trials: u64,
    seed: u64,
) -> Result<f64, SketchError> {
    if trials < 100 {
        return Err(SketchError::InvalidParams(format!(
            "calibration needs at least 100 trials, got {trials}"
        )));
    }
    let raw = raw_estimates(model, estimator, lambda_ref, trials, seed);
    Ok(alpha_from_raw(&raw, lambda_ref))
}

pub(crate) fn alpha_from_raw(raw: &[f64], lambda_ref: f64) -> f64 {
    lambda_ref * raw.len() as f64 / raw.iter().sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
struct AlphaRow {
    q: f64,
    m: u32,
    offset_mode: OffsetMode,
    alpha: f64,
}

/// Cache of harmonic-mean constants keyed by `(q, m, offset mode)`, stored as
/// `alpha.csv`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AlphaTable {
    rows: Vec<AlphaRow>,
}

impl AlphaTable {
    pub fn load(path: &Path) -> Result<Self, SketchError> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
        let rows = reader
            .deserialize()
            .collect::<Result<Vec<AlphaRow>, _>>()
            .map_err(csv_err)?;
        Ok(Self { rows })
    }

    pub fn save(&self, path: &Path) -> Result<(), SketchError> {
        let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
        for row in &self.rows {
            writer.serialize(row).map_err(csv_err)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn get(&self, q: f64, m: u32, offset_mode: OffsetMode) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.m == m && r.offset_mode == offset_mode && (r.q - q).abs() <= 1e-12 * q)
            .map(|r| r.alpha)
    }

    pub fn insert(&mut self, q: f64, m: u32, offset_mode: OffsetMode, alpha: f64) {
        self.rows.retain(|r| {
            !(r.m == m && r.offset_mode == offset_mode && (r.q - q).abs() <= 1e-12 * q)
        });
        self.rows.push(AlphaRow {
            q,
            m,
            offset_mode,
            alpha,
        });
    }

    /// Cached constant for the model's shape, calibrating and storing it on a
    /// miss.
    pub fn get_or_calibrate(&mut self, model: &LlModel, seed: u64) -> f64 {
        let p = model.params();
        if let Some(alpha) = self.get(p.q, p.m, p.offsets) {
            return alpha;
        }
        let alpha = calibrate_alpha(
            model,
            RawEstimator::Harmonic,
            ALPHA_LAMBDA_REF,
            ALPHA_TRIALS,
            seed,
        )
        .expect("trial count is above the minimum");
        self.insert(p.q, p.m, p.offsets, alpha);
        alpha
    }
}

fn csv_err(e: csv::Error) -> SketchError {
    SketchError::InvalidParams(format!("alpha table: {e}"))
}
