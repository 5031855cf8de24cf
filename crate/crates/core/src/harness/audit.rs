//! Space and accuracy audit of Fishmonger streams.

use std::sync::Arc;

use crate::fishmonger::{FishmongerParams, FishmongerSketch, InsertOutcome, HEADER_BITS};
use crate::harness::exec::map_trials;
use crate::harness::stats::{mean, std_dev};
use crate::harness::study::trial_seed;
use crate::oracle::OracleSeed;
use crate::sketch::PcsaModel;
use crate::SketchError;

#[derive(Clone, Copy, Debug)]
pub struct AuditConfig {
    pub params: FishmongerParams,
    pub lambda_max: u64,
    pub trials: u64,
    pub seed: u64,
    /// Re-encode after every change and check the exact size, instead of
    /// relying on the size certificate between checkpoints.
    pub eager: bool,
}

/// Sizes at one power-of-two cardinality, over trials.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Checkpoint {
    pub lambda: u64,
    pub mean_payload_bits: f64,
    pub max_size_bits: u64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct AuditReport {
    pub m: u32,
    pub lambda_max: u64,
    pub trials: u64,
    pub budget_bits: u64,
    pub header_bits: u64,
    /// Largest `size_bits` observed at any audited point.
    pub max_size_bits: u64,
    /// Whether every audited point had payload plus estimate within budget.
    pub within_budget: bool,
    pub reverts: u64,
    /// Relative standard deviation of the final estimate.
    pub std_error: f64,
    pub mean_ratio: f64,
    /// Final payload bits per row, averaged over trials.
    pub payload_bits_per_row: f64,
    /// Final payload bits times relative variance.
    pub bits_times_variance: f64,
    pub checkpoints: Vec<Checkpoint>,
}

struct TrialLog {
    sizes: Vec<(u64, u64)>,
    max_size: u64,
    within_budget: bool,
    reverts: u64,
    ratio: f64,
    payload: u64,
}

fn run_trial(cfg: &AuditConfig, model: &Arc<PcsaModel>, t: u64) -> TrialLog {
    let p = cfg.params;
    let mut fs = FishmongerSketch::with_model(p, model.clone(), trial_seed(cfg.seed, t));
    fs.set_audit(cfg.eager);
    let limit = p.budget_bits() + HEADER_BITS;
    let mut log = TrialLog {
        sizes: Vec::new(),
        max_size: fs.size_bits(),
        within_budget: true,
        reverts: 0,
        ratio: 0.0,
        payload: 0,
    };
    let mut next_checkpoint = 1u64;
    for e in 0..cfg.lambda_max {
        let outcome = fs.insert(e);
        if cfg.eager && outcome != InsertOutcome::Unchanged {
            let size = fs.size_bits();
            log.max_size = log.max_size.max(size);
            log.within_budget &= size <= limit;
        }
        let n = e + 1;
        if n == next_checkpoint || n == cfg.lambda_max {
            let size = fs.size_bits();
            log.max_size = log.max_size.max(size);
            log.within_budget &= size <= limit;
            if n == next_checkpoint {
                log.sizes.push((fs.payload_bits(), size));
                next_checkpoint *= 2;
            }
        }
    }
    log.reverts = fs.revert_count();
    log.ratio = fs.estimate().lambda_hat / cfg.lambda_max as f64;
    log.payload = fs.payload_bits();
    log
}

/// Streams `lambda_max` distinct elements into `trials` independent sketches,
/// auditing size at every power-of-two cardinality (and at every change in
/// eager mode).
pub fn run_fishmonger_audit(cfg: &AuditConfig) -> Result<AuditReport, SketchError> {
    cfg.params.validate()?;
    if cfg.params.m < 64 {
        return Err(SketchError::InvalidParams("the audit needs m >= 64".into()));
    }
    if cfg.trials == 0 || cfg.lambda_max == 0 {
        return Err(SketchError::InvalidParams(
            "audit needs at least one trial and one element".into(),
        ));
    }
    let model = Arc::new(PcsaModel::new(
        cfg.params.sketch_params(),
        &OracleSeed::new(0),
    )?);
    let logs = map_trials(cfg.trials, |t| run_trial(cfg, &model, t));
    let ratios: Vec<f64> = logs.iter().map(|l| l.ratio).collect();
    let payloads: Vec<f64> = logs.iter().map(|l| l.payload as f64).collect();
    let std_error = std_dev(&ratios);
    let checkpoints = (0..logs[0].sizes.len())
        .map(|k| Checkpoint {
            lambda: 1 << k,
            mean_payload_bits: mean(&logs.iter().map(|l| l.sizes[k].0 as f64).collect::<Vec<_>>()),
            max_size_bits: logs.iter().map(|l| l.sizes[k].1).max().unwrap(),
        })
        .collect();
    let mean_payload = mean(&payloads);
    Ok(AuditReport {
        m: cfg.params.m,
        lambda_max: cfg.lambda_max,
        trials: cfg.trials,
        budget_bits: cfg.params.budget_bits(),
        header_bits: HEADER_BITS,
        max_size_bits: logs.iter().map(|l| l.max_size).max().unwrap(),
        within_budget: logs.iter().all(|l| l.within_budget),
        reverts: logs.iter().map(|l| l.reverts).sum(),
        std_error,
        mean_ratio: mean(&ratios),
        payload_bits_per_row: mean_payload / cfg.params.m as f64,
        bits_times_variance: mean_payload * std_error * std_error,
        checkpoints,
    })
}
