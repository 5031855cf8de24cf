//! Monte-Carlo error studies: the distribution of `lambda_hat / lambda` over
//! independent trials at a list of cardinalities.

use crate::estimate::{
    calibrate_alpha, ll_estimate_geometric, ll_estimate_harmonic, ll_mle, pcsa_mle, AlphaTable,
    Method, RawEstimator, ALPHA_LAMBDA_REF, ALPHA_TRIALS,
};
use crate::harness::exec::map_trials;
use crate::harness::stats::{mean, quantile_sorted, sorted, std_dev, QUANTILE_LEVELS};
use crate::oracle::{label, OracleSeed};
use crate::sketch::{
    AnySketch, LlModel, LlState, OffsetMode, PcsaModel, PcsaState, SketchKind, SketchParams,
};
use crate::SketchError;

/// How trial states are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyMode {
    /// Insert elements one by one; every cardinality is a checkpoint of the
    /// same stream.
    Stream,
    /// Draw each state directly from its exact law at each cardinality.
    Sampled,
}

#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub kind: SketchKind,
    pub q: f64,
    pub m: u32,
    pub offsets: OffsetMode,
    pub lambdas: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub estimator: Method,
    pub poissonize: bool,
    pub mode: StudyMode,
    /// Constant for the harmonic or geometric LogLog estimator. Calibrated
    /// when absent.
    pub constant: Option<f64>,
}

impl TrialConfig {
    pub fn new(kind: SketchKind, q: f64, m: u32, offsets: OffsetMode, lambdas: Vec<f64>) -> Self {
        Self {
            kind,
            q,
            m,
            offsets,
            lambdas,
            trials: 1000,
            seed: 0,
            estimator: match kind {
                SketchKind::MartingalePcsa | SketchKind::MartingaleLl => Method::Martingale,
                _ => Method::Mle,
            },
            poissonize: false,
            mode: StudyMode::Stream,
            constant: None,
        }
    }

    pub fn params(&self) -> Result<SketchParams, SketchError> {
        SketchParams::new(self.q, self.m, self.offsets)
    }

    pub fn validate(&self) -> Result<(), SketchError> {
        self.params()?;
        if self.trials == 0 {
            return Err(SketchError::InvalidParams(
                "trials must be at least 1".into(),
            ));
        }
        if self.lambdas.is_empty() {
            return Err(SketchError::InvalidParams("no cardinalities given".into()));
        }
        if self.lambdas.iter().any(|&l| !(l >= 0.0 && l.is_finite()))
            || self.lambdas.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(SketchError::InvalidParams(
                "cardinalities must be non-negative and increasing".into(),
            ));
        }
        let ok = matches!(
            (self.kind, self.estimator),
            (SketchKind::Pcsa, Method::Mle)
                | (
                    SketchKind::Ll,
                    Method::Mle | Method::Harmonic | Method::Geometric
                )
                | (
                    SketchKind::MartingalePcsa | SketchKind::MartingaleLl,
                    Method::Martingale
                )
        );
        if !ok {
            return Err(SketchError::InvalidParams(format!(
                "estimator {:?} does not apply to {} sketches",
                self.estimator, self.kind
            )));
        }
        if self.mode == StudyMode::Sampled
            && matches!(
                self.kind,
                SketchKind::MartingalePcsa | SketchKind::MartingaleLl
            )
        {
            return Err(SketchError::InvalidParams(
                "martingale sketches need stream mode".into(),
            ));
        }
        Ok(())
    }
}

/// Statistics at one cardinality. Ratios are `lambda_hat / lambda`, or plain
/// `lambda_hat` at `lambda = 0`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct TrialResult {
    pub lambda: f64,
    pub mean_estimate: f64,
    /// Relative standard deviation of the estimate.
    pub std_error: f64,
    /// At [`QUANTILE_LEVELS`].
    pub quantiles: Vec<f64>,
    pub mean_size_bits: f64,
}

impl TrialResult {
    pub fn from_ratios(lambda: f64, ratios: &[f64], size_bits: f64) -> Self {
        let scale = if lambda > 0.0 { lambda } else { 1.0 };
        let s = sorted(ratios);
        Self {
            lambda,
            mean_estimate: mean(ratios) * scale,
            std_error: std_dev(ratios),
            quantiles: QUANTILE_LEVELS
                .iter()
                .map(|&l| quantile_sorted(&s, l))
                .collect(),
            mean_size_bits: size_bits,
        }
    }

    /// `(statistic, value)` pairs in a fixed order.
    pub fn statistics(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("mean_estimate".to_string(), self.mean_estimate),
            ("std_error".to_string(), self.std_error),
        ];
        for (l, v) in QUANTILE_LEVELS.iter().zip(&self.quantiles) {
            out.push((format!("q{:02}", (l * 100.0).round() as u32), *v));
        }
        out.push(("mean_size_bits".to_string(), self.mean_size_bits));
        out
    }
}

/// Bits of the uncompressed state.
pub fn state_bits(kind: SketchKind, params: &SketchParams) -> u64 {
    let m = params.m as u64;
    let base = match kind {
        SketchKind::Pcsa | SketchKind::MartingalePcsa => m * params.w as u64,
        SketchKind::Ll | SketchKind::MartingaleLl => m * (32 - params.w.leading_zeros()) as u64,
    };
    match kind {
        SketchKind::MartingalePcsa | SketchKind::MartingaleLl => base + 64,
        _ => base,
    }
}

/// The estimator constant used for a LogLog study, calibrated if not given.
fn ll_constant(cfg: &TrialConfig, params: SketchParams) -> Result<f64, SketchError> {
    if let Some(c) = cfg.constant {
        return Ok(c);
    }
    let model = LlModel::new(params, &OracleSeed::new(cfg.seed))?;
    match cfg.estimator {
        Method::Harmonic => Ok(AlphaTable::default().get_or_calibrate(&model, cfg.seed)),
        Method::Geometric => calibrate_alpha(
            &model,
            RawEstimator::Geometric,
            ALPHA_LAMBDA_REF,
            ALPHA_TRIALS,
            cfg.seed,
        ),
        _ => Ok(1.0),
    }
}

fn estimate_pcsa(state: &PcsaState, model: &PcsaModel) -> f64 {
    pcsa_mle(state, model).lambda_hat
}

fn estimate_ll(state: &LlState, model: &LlModel, estimator: Method, constant: f64) -> f64 {
    match estimator {
        Method::Harmonic => ll_estimate_harmonic(state, model, constant).lambda_hat,
        Method::Geometric => ll_estimate_geometric(state, model, constant).lambda_hat,
        _ => ll_mle(state, model).lambda_hat,
    }
}

fn estimate_any(sketch: &AnySketch, estimator: Method, constant: f64) -> f64 {
    match sketch {
        AnySketch::Pcsa(s) => estimate_pcsa(s.state(), s.model()),
        AnySketch::Ll(s) => estimate_ll(s.state(), s.model(), estimator, constant),
        AnySketch::MartingalePcsa(s) => s.estimate(),
        AnySketch::MartingaleLl(s) => s.estimate(),
    }
}

/// Per-trial seed.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    OracleSeed::new(seed).derive(label::TRIAL, trial).seed()
}

/// Ratios `lambda_hat / lambda` per cardinality (outer) and trial (inner).
pub fn run_error_study_raw(cfg: &TrialConfig) -> Result<Vec<Vec<f64>>, SketchError> {
    cfg.validate()?;
    let params = cfg.params()?;
    let constant = match cfg.kind {
        SketchKind::Ll => ll_constant(cfg, params)?,
        _ => 1.0,
    };
    let per_trial: Vec<Vec<f64>> = match cfg.mode {
        StudyMode::Stream => {
            let targets: Vec<u64> = cfg.lambdas.iter().map(|&l| l.round() as u64).collect();
            map_trials(cfg.trials, |t| {
                let mut sketch = AnySketch::new(cfg.kind, params, trial_seed(cfg.seed, t))
                    .expect("validated params");
                let mut next = 0u64;
                targets
                    .iter()
                    .map(|&target| {
                        while next < target {
                            if cfg.poissonize {
                                sketch.insert_poissonized(next);
                            } else {
                                sketch.insert(next);
                            }
                            next += 1;
                        }
                        estimate_any(&sketch, cfg.estimator, constant)
                    })
                    .collect()
            })
        }
        StudyMode::Sampled => {
            let trials = map_trials(cfg.trials, |t| {
                let root = OracleSeed::new(trial_seed(cfg.seed, t));
                sample_trial(cfg, params, &root, constant)
            });
            trials.into_iter().collect::<Result<_, _>>()?
        }
    };
    Ok((0..cfg.lambdas.len())
        .map(|k| {
            let scale = if cfg.lambdas[k] > 0.0 {
                cfg.lambdas[k]
            } else {
                1.0
            };
            per_trial.iter().map(|v| v[k] / scale).collect()
        })
        .collect())
}

fn sample_trial(
    cfg: &TrialConfig,
    params: SketchParams,
    root: &OracleSeed,
    constant: f64,
) -> Result<Vec<f64>, SketchError> {
    let draw = |k: usize| root.derive(label::SAMPLER, k as u64);
    Ok(match cfg.kind {
        SketchKind::Pcsa => {
            let model = PcsaModel::new(params, root)?;
            cfg.lambdas
                .iter()
                .enumerate()
                .map(|(k, &l)| {
                    estimate_pcsa(&model.sample_state(l, cfg.poissonize, &draw(k)), &model)
                })
                .collect()
        }
        _ => {
            let model = LlModel::new(params, root)?;
            cfg.lambdas
                .iter()
                .enumerate()
                .map(|(k, &l)| {
                    let s = model.sample_state(l, cfg.poissonize, &draw(k));
                    estimate_ll(&s, &model, cfg.estimator, constant)
                })
                .collect()
        }
    })
}

/// Mean, relative standard error and quantiles of `lambda_hat / lambda` at
/// each cardinality of `cfg.lambdas`.
pub fn run_error_study(cfg: &TrialConfig) -> Result<Vec<TrialResult>, SketchError> {
    let raw = run_error_study_raw(cfg)?;
    let bits = state_bits(cfg.kind, &cfg.params()?) as f64;
    Ok(cfg
        .lambdas
        .iter()
        .zip(&raw)
        .map(|(&l, r)| TrialResult::from_ratios(l, r, bits))
        .collect())
}

/// `2^lo .. 2^hi` with `per_octave` points per doubling.
pub fn octave_grid(lo: f64, hi: f64, per_octave: u32) -> Vec<f64> {
    let n = ((hi - lo) * per_octave as f64).round() as u32;
    (0..=n)
        .map(|k| 2f64.powf(lo + k as f64 / per_octave as f64))
        .collect()
}
