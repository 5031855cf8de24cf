//! Entropy and Fisher information of the PCSA and LogLog families.
//!
//! Per-cell quantities are functions of `t = lambda * p`:
//! `hdot(t)` is the entropy (bits) of a cell that is empty with probability
//! `e^-t`, and `idot(t)` its normalized Fisher information `lambda^2 I`.

pub mod quad;

use std::f64::consts::{LN_2, PI};

use crate::SketchError;
use quad::integrate;

/// Truncation point of the series; the tails are added in closed form.
const SERIES_TERMS: u32 = 10_000;

fn check_positive(name: &str, x: f64) -> Result<(), SketchError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(SketchError::InvalidParams(format!(
            "{name} must be positive, got {x}"
        )))
    }
}

fn check_base(q: f64) -> Result<(), SketchError> {
    if q > 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(SketchError::InvalidParams(format!(
            "base q must be > 1, got {q}"
        )))
    }
}

/// Entropy in bits of `Bernoulli(e^-t)`. Requires `t > 0`.
pub fn hdot(t: f64) -> Result<f64, SketchError> {
    check_positive("t", t)?;
    Ok(h_dot(t))
}

/// `t^2 / (e^t - 1)`. Requires `t > 0`.
pub fn idot(t: f64) -> Result<f64, SketchError> {
    check_positive("t", t)?;
    Ok(i_dot(t))
}

pub(crate) fn h_dot(t: f64) -> f64 {
    let e = (-t).exp();
    let one_minus = -(-t).exp_m1();
    let ln_one_minus = if t > LN_2 {
        (-e).ln_1p()
    } else {
        one_minus.ln()
    };
    (t * e - one_minus * ln_one_minus) / LN_2
}

pub(crate) fn i_dot(t: f64) -> f64 {
    if t > 1400.0 {
        return 0.0;
    }
    t * t / t.exp_m1()
}

/// `H_0 = 1/ln 2 + sum_{k>=1} (1/k) log2(1 + 1/k)`, the per-period entropy of
/// base-`e` PCSA.
pub fn h0() -> f64 {
    let f = |x: f64| (1.0 / x).ln_1p() / x;
    let df = |x: f64| -(1.0 / x).ln_1p() / (x * x) - 1.0 / (x * x * (x + 1.0));
    let head: f64 = (1..SERIES_TERMS).rev().map(|k| f(k as f64)).sum();
    let k = SERIES_TERMS as f64;
    // integral_K^inf f = -Li2(-1/K).
    let integral: f64 = (1..12)
        .map(|n| {
            let n = n as f64;
            -(-1.0f64 / k).powf(n) / (n * n)
        })
        .sum();
    let tail = integral + f(k) / 2.0 - df(k) / 12.0;
    1.0 / LN_2 + (head + tail) / LN_2
}

/// `I_0 = zeta(2) = pi^2 / 6`.
pub fn i0() -> f64 {
    PI * PI / 6.0
}

/// `phi(q) = (1 - 1/q)/ln 2 + sum_{k>=1} (1/k) log2((k + a + 1)/(k + a))`
/// with `a = 1/(q - 1)`: the per-period entropy of base-`q` LogLog times `ln q`.
pub fn phi(q: f64) -> Result<f64, SketchError> {
    check_base(q)?;
    let a = 1.0 / (q - 1.0);
    let f = |x: f64| (1.0 / (x + a)).ln_1p() / x;
    let df = |x: f64| {
        let g = (1.0 / (x + a)).ln_1p();
        let dg = 1.0 / (x + a + 1.0) - 1.0 / (x + a);
        dg / x - g / (x * x)
    };
    let head: f64 = (1..SERIES_TERMS).rev().map(|k| f(k as f64)).sum();
    let k = SERIES_TERMS as f64;
    // integral_K^inf f(x) dx with t = 1/x.
    let integral = integrate(
        |t| {
            if t <= 0.0 {
                1.0
            } else {
                (t / (1.0 + a * t)).ln_1p() / t
            }
        },
        0.0,
        1.0 / k,
        1e-18,
    );
    let tail = integral + f(k) / 2.0 - df(k) / 12.0;
    Ok((1.0 - 1.0 / q) / LN_2 + (head + tail) / LN_2)
}

/// `rho(q) = sum_{k>=0} (k + q/(q-1))^-2`: the per-period normalized
/// information of base-`q` LogLog times `ln q`.
pub fn rho(q: f64) -> Result<f64, SketchError> {
    check_base(q)?;
    let s = q / (q - 1.0);
    let head: f64 = (0..SERIES_TERMS)
        .rev()
        .map(|k| (k as f64 + s).powi(-2))
        .sum();
    let x = SERIES_TERMS as f64 + s;
    let tail = 1.0 / x + 1.0 / (2.0 * x * x) + 1.0 / (6.0 * x.powi(3)) - 1.0 / (30.0 * x.powi(5));
    Ok(head + tail)
}

/// `-psi log2 psi` and `(d psi / d r)^2 / psi` for the LogLog cell
/// `psi = e^-x - e^-qx`, `x = e^r`.
fn ll_cell(q: f64, x: f64) -> (f64, f64) {
    let ln_psi = -x + (-(-(q - 1.0) * x).exp_m1()).ln();
    let psi = ln_psi.exp();
    if psi <= 0.0 {
        return (0.0, 0.0);
    }
    let h = -psi * ln_psi / LN_2;
    let dpsi = x * (-x).exp() * (q * (-(q - 1.0) * x).exp() - 1.0);
    (h, dpsi * dpsi / psi)
}

/// `phi(q)` by quadrature of its defining integral over `r`.
pub fn phi_by_quadrature(q: f64) -> Result<f64, SketchError> {
    check_base(q)?;
    Ok(integrate(|r| ll_cell(q, r.exp()).0, -60.0, 40.0, 1e-12))
}

/// `rho(q)` by quadrature of its defining integral over `r`.
pub fn rho_by_quadrature(q: f64) -> Result<f64, SketchError> {
    check_base(q)?;
    Ok(integrate(|r| ll_cell(q, r.exp()).1, -60.0, 40.0, 1e-12))
}

/// `integral of hdot(e^x) dx` over the real line.
pub fn h0_by_quadrature() -> f64 {
    integrate(|x| h_dot(x.exp()), -40.0, 40.0, 1e-12)
}

/// `integral of idot(e^x) dx` over the real line.
pub fn i0_by_quadrature() -> f64 {
    integrate(|x| i_dot(x.exp()), -40.0, 40.0, 1e-12)
}

/// Average entropy, average normalized information and their ratio.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct FishReport {
    pub h_avg: f64,
    pub i_avg: f64,
    pub fish: f64,
}

impl FishReport {
    fn new(h_avg: f64, i_avg: f64) -> Self {
        Self {
            h_avg,
            i_avg,
            fish: h_avg / i_avg,
        }
    }
}

pub fn fish_pcsa(q: f64) -> Result<FishReport, SketchError> {
    check_base(q)?;
    Ok(FishReport::new(h0() / q.ln(), i0() / q.ln()))
}

pub fn fish_ll(q: f64) -> Result<FishReport, SketchError> {
    Ok(FishReport::new(phi(q)? / q.ln(), rho(q)? / q.ln()))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub entropy_bits: f64,
    pub norm_info: f64,
}

/// Terms below this are dropped; both tails decay at least geometrically.
const TERM_EPS: f64 = 1e-17;

/// Sums `cell(x_k)` over `x_k = lambda q^-k`, `k` in `Z`.
fn sum_over_levels(q: f64, lambda: f64, cell: impl Fn(f64) -> (f64, f64)) -> (f64, f64) {
    let k0 = (lambda.ln() / q.ln()).floor();
    let at = |k: f64| cell(lambda * q.powf(-k));
    let (mut h, mut i) = at(k0);
    // Upward: x shrinks towards 0.
    let mut k = k0 + 1.0;
    loop {
        let (dh, di) = at(k);
        h += dh;
        i += di;
        if dh.max(di) < TERM_EPS && lambda * q.powf(-k) < 1.0 {
            break;
        }
        k += 1.0;
    }
    // Downward: x grows, terms die off doubly exponentially.
    let mut k = k0 - 1.0;
    loop {
        let (dh, di) = at(k);
        h += dh;
        i += di;
        if dh.max(di) < TERM_EPS && lambda * q.powf(-k) > 1.0 {
            break;
        }
        k -= 1.0;
    }
    (h, i)
}

/// Entropy and normalized information of one base-`q` PCSA row at `lambda`.
pub fn pcsa_curves(q: f64, lambda: f64) -> Result<CurvePoint, SketchError> {
    check_base(q)?;
    check_positive("lambda", lambda)?;
    let (h, i) = sum_over_levels(q, lambda, |t| (h_dot(t), i_dot(t)));
    Ok(CurvePoint {
        lambda,
        entropy_bits: h,
        norm_info: i,
    })
}

/// Entropy and normalized information of one base-`q` LogLog register.
pub fn ll_curves(q: f64, lambda: f64) -> Result<CurvePoint, SketchError> {
    check_base(q)?;
    check_positive("lambda", lambda)?;
    let (h, i) = sum_over_levels(q, lambda, |x| ll_cell(q, x));
    Ok(CurvePoint {
        lambda,
        entropy_bits: h,
        norm_info: i,
    })
}

/// Average of a curve over one multiplicative period `[lambda, q lambda)`.
pub fn period_average(q: f64, curve: impl Fn(f64) -> f64) -> f64 {
    integrate(|u| curve(q.powf(u)), 0.0, 1.0, 1e-11)
}

/// Minimum of a curve over one period, by dense scan and golden-section polish.
pub fn period_minimum(q: f64, curve: impl Fn(f64) -> f64, samples: usize) -> f64 {
    let at = |u: f64| curve(q.powf(u));
    let step = 1.0 / samples as f64;
    let best = (0..samples)
        .map(|s| s as f64 * step)
        .min_by(|&a, &b| at(a).total_cmp(&at(b)))
        .unwrap();
    let (mut a, mut b) = (best - step, best + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if at(c) < at(d) {
            b = d;
        } else {
            a = c;
        }
    }
    at(0.5 * (a + b)).min(at(best))
}

/// Outcome of the numerical lemma checks.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct LemmaReport {
    pub h0_series: f64,
    pub h0_integral: f64,
    pub i0_exact: f64,
    pub i0_integral: f64,
    pub grid_points: usize,
    /// Grid steps where `hdot / idot` failed to decrease.
    pub monotonicity_violations: usize,
    /// Grid points violating `t e^-t <= ln2 hdot(t) <= 2 sqrt t`.
    pub hdot_bound_violations: usize,
    /// Grid points violating `idot(t) <= 4 e^{-t/2}`.
    pub idot_bound_violations: usize,
}

impl LemmaReport {
    pub fn integral_error(&self) -> f64 {
        (self.h0_series - self.h0_integral)
            .abs()
            .max((self.i0_exact - self.i0_integral).abs())
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.integral_error() < tol
            && self.monotonicity_violations == 0
            && self.hdot_bound_violations == 0
            && self.idot_bound_violations == 0
    }
}

/// Checks the integral identities, the monotonicity of `hdot / idot`, and the
/// envelope bounds on a log-spaced grid over `[1e-6, 50]`.
pub fn verify_lemmas() -> LemmaReport {
    let n = 10_000usize;
    let (lo, hi) = (1e-6f64.ln(), 50f64.ln());
    let grid: Vec<f64> = (0..n)
        .map(|s| (lo + (hi - lo) * s as f64 / (n - 1) as f64).exp())
        .collect();
    let ratios: Vec<f64> = grid.iter().map(|&t| h_dot(t) / i_dot(t)).collect();
    let monotonicity_violations = ratios.windows(2).filter(|w| w[1] >= w[0]).count();
    let hdot_bound_violations = grid
        .iter()
        .filter(|&&t| {
            let he = h_dot(t) * LN_2;
            !(t * (-t).exp() <= he && he <= 2.0 * t.sqrt())
        })
        .count();
    let idot_bound_violations = grid
        .iter()
        .filter(|&&t| i_dot(t) > 4.0 * (-t / 2.0).exp())
        .count();
    LemmaReport {
        h0_series: h0(),
        h0_integral: h0_by_quadrature(),
        i0_exact: i0(),
        i0_integral: i0_by_quadrature(),
        grid_points: n,
        monotonicity_violations,
        hdot_bound_violations,
        idot_bound_violations,
    }
}
