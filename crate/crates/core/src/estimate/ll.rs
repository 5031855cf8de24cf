use std::f64::consts::LOG2_E;

use super::{clamped_ln, mle_bracket, Estimate, Method};
use crate::sketch::{LlModel, LlState};
use crate::SketchError;

/// `ln P(S = s)` for one register whose Poisson rate is `mu = lambda a_i`,
/// with `P(S <= k) = e^{-mu q^-(k+1)}` below the cap `W`.
fn register_ln_prob(mu: f64, s: u16, q: f64, w: u32) -> f64 {
    let s = s as u32;
    if s >= w {
        return clamped_ln((-(-mu * q.powf(-(w as f64))).exp_m1()).ln());
    }
    let x = mu * q.powf(-(s as f64 + 1.0));
    if s == 0 {
        return clamped_ln(-x);
    }
    clamped_ln(-x + (-(-x * (q - 1.0)).exp_m1()).ln())
}

/// `log2 P(S | lambda)` under the Poissonized register laws.
pub fn ll_log_likelihood(
    state: &LlState,
    model: &LlModel,
    lambda: f64,
) -> Result<f64, SketchError> {
    if !(lambda > 0.0) {
        return Err(SketchError::NonPositiveLambda(lambda));
    }
    let params = model.params();
    let ln_l: f64 = state
        .registers()
        .iter()
        .enumerate()
        .map(|(i, &s)| register_ln_prob(lambda * model.keep_prob(i), s, params.q, params.w))
        .sum();
    Ok(ln_l * LOG2_E)
}

/// Maximum-likelihood estimate by a coarse scan over `log lambda` followed by
/// golden-section refinement around the best scan point.
pub fn ll_mle(state: &LlState, model: &LlModel) -> Estimate {
    let params = model.params();
    let (lo, hi) = mle_bracket(params);
    if state.is_empty() {
        return Estimate::new(0.0, Method::Mle);
    }
    if state.registers().iter().all(|&s| s as u32 >= params.w) {
        return Estimate {
            lambda_hat: hi,
            method: Method::Mle,
            saturated: true,
        };
    }
    let f = |x: f64| ll_log_likelihood(state, model, x.exp()).unwrap();
    let (a, b) = (lo.ln(), hi.ln());
    let n = 400;
    let step = (b - a) / n as f64;
    let best = (0..=n)
        .map(|g| a + step * g as f64)
        .max_by(|&x, &y| f(x).total_cmp(&f(y)))
        .unwrap();
    let (mut a, mut b) = ((best - step).max(lo.ln()), (best + step).min(hi.ln()));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    Estimate::new((0.5 * (a + b)).exp(), Method::Mle)
}

/// `alpha m / sum_i q^{-S(i) - r_i}`.
pub fn ll_estimate_harmonic(state: &LlState, model: &LlModel, alpha: f64) -> Estimate {
    let q = model.params().q;
    let denom: f64 = state
        .registers()
        .iter()
        .zip(model.offsets())
        .map(|(&s, &r)| q.powf(-(s as f64) - r))
        .sum();
    Estimate::new(alpha * state.len() as f64 / denom, Method::Harmonic)
}

/// `constant m q^{mean S}`.
pub fn ll_estimate_geometric(state: &LlState, model: &LlModel, constant: f64) -> Estimate {
    let q = model.params().q;
    let m = state.len() as f64;
    let mean = state.registers().iter().map(|&s| s as f64).sum::<f64>() / m;
    Estimate::new(constant * m * q.powf(mean), Method::Geometric)
}
