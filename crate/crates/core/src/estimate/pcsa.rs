use std::f64::consts::LOG2_E;

use super::{clamped_ln, mle_bracket, Estimate, Method};
use crate::sketch::{PcsaModel, PcsaState};
use crate::SketchError;

/// `log2 P(S | lambda)` with `P(bit = 0) = e^{-lambda p}`.
pub fn pcsa_log_likelihood(
    state: &PcsaState,
    model: &PcsaModel,
    lambda: f64,
) -> Result<f64, SketchError> {
    if !(lambda > 0.0) {
        return Err(SketchError::NonPositiveLambda(lambda));
    }
    let mut ln_l = 0.0;
    for (i, j, bit) in state.cells() {
        let t = lambda * model.p(i, j);
        ln_l += clamped_ln(if bit { (-(-t).exp_m1()).ln() } else { -t });
    }
    Ok(ln_l * LOG2_E)
}

/// `d/d lambda ln P(S | lambda)` and its derivative, given the zero-cell mass.
fn score(state: &PcsaState, model: &PcsaModel, zero_mass: f64, lambda: f64) -> (f64, f64) {
    let (mut d, mut dd) = (-zero_mass, 0.0);
    for j in 0..state.cols() {
        if state.column_ones(j) == 0 {
            continue;
        }
        for i in 0..state.rows() {
            if !state.get(i, j) {
                continue;
            }
            let p = model.p(i, j);
            let t = lambda * p;
            if t > 40.0 {
                continue;
            }
            let em1 = t.exp_m1();
            d += p / em1;
            dd -= p * p * (em1 + 1.0) / (em1 * em1);
        }
    }
    (d, dd)
}

/// Maximum-likelihood estimate of `lambda`.
pub fn pcsa_mle(state: &PcsaState, model: &PcsaModel) -> Estimate {
    pcsa_mle_from(state, model, None)
}

/// Maximum-likelihood estimate, started from `hint` when given.
///
/// The score is convex and strictly decreasing in `lambda`, so a Newton
/// iteration safeguarded by a shrinking bracket converges from anywhere.
pub fn pcsa_mle_from(state: &PcsaState, model: &PcsaModel, hint: Option<f64>) -> Estimate {
    let params = model.params();
    let (lo, hi) = mle_bracket(params);
    let ones = state.count_ones();
    if ones == 0 {
        return Estimate::new(0.0, Method::Mle);
    }
    if ones == params.m as u64 * params.w as u64 {
        return Estimate {
            lambda_hat: hi,
            method: Method::Mle,
            saturated: true,
        };
    }
    let zero_mass: f64 = state
        .cells()
        .filter(|&(_, _, b)| !b)
        .map(|(i, j, _)| model.p(i, j))
        .sum();
    let f = |l: f64| score(state, model, zero_mass, l);
    if f(lo).0 <= 0.0 {
        return Estimate::new(lo, Method::Mle);
    }
    if f(hi).0 >= 0.0 {
        return Estimate::new(hi, Method::Mle);
    }
    let start = hint.unwrap_or(ones as f64);
    Estimate::new(safeguarded_newton(f, lo, hi, start), Method::Mle)
}

/// Root of a decreasing function with `f(lo) > 0 > f(hi)`.
pub(crate) fn safeguarded_newton(
    f: impl Fn(f64) -> (f64, f64),
    lo: f64,
    hi: f64,
    start: f64,
) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut x = if start > a && start < b {
        start
    } else {
        (a * b).sqrt()
    };
    for _ in 0..500 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            a = x;
        } else {
            b = x;
        }
        let mut next = x - fx / dfx;
        if !(next > a && next < b) {
            next = (a * b).sqrt();
        }
        if (next - x).abs() <= 1e-13 * x || b - a <= 1e-13 * a {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::OracleSeed;
    use crate::sketch::{OffsetMode, SketchParams};
    use std::f64::consts::E;

    fn model(q: f64, m: u32, w: u32) -> PcsaModel {
        let params = SketchParams::with_width(q, m, w, OffsetMode::Uniform).unwrap();
        PcsaModel::new(params, &OracleSeed::new(0)).unwrap()
    }

    #[test]
    fn likelihood_values() {
        let m1 = model(E, 1, 1);
        let one = PcsaState::from_fn(1, 1, |_, _| true);
        let v = pcsa_log_likelihood(&one, &m1, 1.0).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp()).log2()).abs() < 1e-15);
        assert!((v + 0.66173).abs() < 1e-5);
        let empty = PcsaState::empty(4, 8);
        let m = model(E, 4, 8);
        assert!(pcsa_log_likelihood(&empty, &m, 1e-9).unwrap().abs() < 1e-7);
        assert!(pcsa_log_likelihood(&empty, &m, 0.0).is_err());
    }

    #[test]
    fn empty_and_saturated() {
        let m = model(E, 1, 1);
        assert_eq!(pcsa_mle(&PcsaState::empty(1, 1), &m).lambda_hat, 0.0);
        let sat = pcsa_mle(&PcsaState::from_fn(1, 1, |_, _| true), &m);
        assert!(sat.saturated);
        assert_eq!(sat.lambda_hat, E * E);
    }

    /// Argmax of `f` over a geometric grid of `n` points on `[lo, hi]`.
    fn grid_argmax(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        (0..n)
            .map(|g| lo * (hi / lo).powf(g as f64 / (n - 1) as f64))
            .map(|l| (f(l), l))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1
    }

    #[test]
    fn mle_matches_dense_grid_argmax() {
        let m = model(E, 16, 32);
        let root = OracleSeed::new(123);
        let (lo, hi) = mle_bracket(m.params());
        for s in 0..50u64 {
            let lambda = 10f64.powf(1.0 + 5.0 * root.uniform(s, 0, 0));
            let state = m.sample_state(lambda, true, &root.derive(1, s));
            let mle = pcsa_mle(&state, &m).lambda_hat;
            let ll = |l: f64| pcsa_log_likelihood(&state, &m, l).unwrap();
            let coarse = grid_argmax(&ll, lo, hi, 4000);
            let best_l = grid_argmax(&ll, coarse * 0.97, coarse * 1.03, 10_000);
            assert!(
                (mle / best_l - 1.0).abs() < 1e-3,
                "state {s}: {mle} vs grid {best_l}"
            );
            for l in [0.5 * mle, 0.9 * mle, 1.1 * mle, 2.0 * mle] {
                let at = pcsa_log_likelihood(&state, &m, l).unwrap();
                assert!(pcsa_log_likelihood(&state, &m, mle).unwrap() >= at);
            }
        }
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let m = model(E, 64, 45);
        let state = m.sample_state(5e4, false, &OracleSeed::new(9));
        let cold = pcsa_mle(&state, &m).lambda_hat;
        for hint in [1.0, 4e4, 5e4, 1e9] {
            let warm = pcsa_mle_from(&state, &m, Some(hint)).lambda_hat;
            assert!((warm / cold - 1.0).abs() < 1e-11);
        }
    }
}
