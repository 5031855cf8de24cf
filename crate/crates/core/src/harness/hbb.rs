//! HyperBitBit and the two equal-cardinality sequences that separate its
//! output distributions.
//!
//! An element hashes to `(j, k)`, `j` uniform in `0..64` and `k >= 1` with
//! `P(k) = 2^-k` (clamped at 62). It sets `S0(j)` when `k >= L + 2` and `S1(j)`
//! when `k >= L + 3`, so column `S0` holds level `L + 1` of a LogLog bitmap,
//! whose cells are hit with probability `2^-(L+1)`, matching the `2^(L + 5.4)`
//! scale of the estimator. When `S0` reaches weight 32 the sketch shifts:
//! `L += 1`, `S0 = S1`, `S1 = 0`.

use crate::harness::exec::map_trials;
use crate::harness::stats::{ks_statistic, mean};
use crate::harness::study::trial_seed;
use crate::oracle::{label, ElementId, OracleSeed};
use crate::SketchError;

const K_MAX: u32 = 62;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct HyperBitBit {
    pub l: u32,
    pub s0: u64,
    pub s1: u64,
}

/// `(j, k)` for `element`.
pub fn hbb_hash(seed: &OracleSeed, element: ElementId) -> (u32, u32) {
    let key = seed.element(element);
    let j = (key.bits(label::HBB, 0) & 63) as u32;
    let k = (key.bits(label::HBB, 1).trailing_zeros() + 1).min(K_MAX);
    (j, k)
}

impl HyperBitBit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn weight(&self) -> u32 {
        self.s0.count_ones()
    }

    /// Applies a hashed element; returns whether the state changed.
    pub fn insert_hash(&mut self, j: u32, k: u32) -> bool {
        let before = *self;
        if k >= self.l + 2 {
            self.s0 |= 1 << j;
        }
        if k >= self.l + 3 {
            self.s1 |= 1 << j;
        }
        while self.s0.count_ones() >= 32 {
            self.l += 1;
            self.s0 = self.s1;
            self.s1 = 0;
        }
        *self != before
    }

    pub fn insert(&mut self, seed: &OracleSeed, element: ElementId) -> bool {
        let (j, k) = hbb_hash(seed, element);
        self.insert_hash(j, k)
    }

    /// `2^(L + 5.4 + HW(S0)/32)`.
    pub fn estimate(&self) -> f64 {
        2f64.powf(self.l as f64 + 5.4 + self.weight() as f64 / 32.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceKind {
    /// `1, 2, ..., lambda`.
    Lo,
    /// `1,2, 1,2,3, 1,2,3,4, ..., 1..lambda`.
    Hi,
}

/// The sequence itself, for small `lambda`.
pub fn gen_sequence(kind: SequenceKind, lambda: u64) -> Vec<ElementId> {
    match kind {
        SequenceKind::Lo => (1..=lambda).collect(),
        SequenceKind::Hi if lambda < 2 => (1..=lambda).collect(),
        SequenceKind::Hi => (2..=lambda).flat_map(|n| 1..=n).collect(),
    }
}

/// Outcome of feeding one sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequenceRun {
    pub state: HyperBitBit,
    /// Distinct elements seen when the state first equalled the target.
    pub reached_at: Option<u64>,
}

/// Stop condition `(L, HW(S0))`.
pub type Target = (u32, u32);

fn hit(state: &HyperBitBit, target: Option<Target>) -> bool {
    target.is_some_and(|(l, w)| state.l == l && state.weight() == w)
}

fn past(state: &HyperBitBit, target: Option<Target>) -> bool {
    target.is_some_and(|(l, _)| state.l > l)
}

/// Feeds a sequence of cardinality `lambda`. With a target, stops as soon as
/// it is reached or overshot.
pub fn run_sequence(
    kind: SequenceKind,
    lambda: u64,
    seed: &OracleSeed,
    target: Option<Target>,
) -> SequenceRun {
    match kind {
        SequenceKind::Lo => run_lo(lambda, seed, target),
        SequenceKind::Hi => run_hi(lambda, seed, target),
    }
}

fn run_lo(lambda: u64, seed: &OracleSeed, target: Option<Target>) -> SequenceRun {
    let mut state = HyperBitBit::new();
    for e in 1..=lambda {
        if state.insert(seed, e) {
            if hit(&state, target) {
                return SequenceRun {
                    state,
                    reached_at: Some(e),
                };
            }
            if past(&state, target) {
                break;
            }
        }
    }
    SequenceRun {
        state,
        reached_at: None,
    }
}

/// Exact simulation of the prefix sequence without replaying every prefix.
///
/// An element with `k < L + 2` can never act again, since `L` only grows, so
/// a pass over old elements only visits the remaining active ones. A pass in
/// which nothing changes leaves the state fixed under every old element, and
/// until the next change each later pass reduces to its new element.
fn run_hi(lambda: u64, seed: &OracleSeed, target: Option<Target>) -> SequenceRun {
    let mut state = HyperBitBit::new();
    let mut active: Vec<(u32, u32)> = Vec::new();
    let mut stable = true;
    let mut seen = 0u64;
    let first = lambda.min(2);
    for n in first..=lambda {
        let mut changed = false;
        if !stable {
            active.retain(|&(_, k)| k >= state.l + 2);
            for &(j, k) in &active {
                if state.insert_hash(j, k) {
                    changed = true;
                    if hit(&state, target) {
                        return SequenceRun {
                            state,
                            reached_at: Some(seen),
                        };
                    }
                    if past(&state, target) {
                        return SequenceRun {
                            state,
                            reached_at: None,
                        };
                    }
                }
            }
        }
        for e in seen + 1..=n {
            let (j, k) = hbb_hash(seed, e);
            if k >= state.l + 2 {
                active.push((j, k));
            }
            if state.insert_hash(j, k) {
                changed = true;
                if hit(&state, target) {
                    return SequenceRun {
                        state,
                        reached_at: Some(e),
                    };
                }
                if past(&state, target) {
                    return SequenceRun {
                        state,
                        reached_at: None,
                    };
                }
            }
        }
        seen = n;
        stable = !changed;
    }
    SequenceRun {
        state,
        reached_at: None,
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SequenceStats {
    pub estimates: Vec<f64>,
    pub levels: Vec<u32>,
    /// Termination cardinalities of runs that reached the target.
    pub reached: Vec<u64>,
}

impl SequenceStats {
    pub fn fraction(&self, pred: impl Fn(f64) -> bool) -> f64 {
        self.estimates.iter().filter(|&&x| pred(x)).count() as f64 / self.estimates.len() as f64
    }

    pub fn mean_reached(&self) -> Option<f64> {
        if self.reached.is_empty() {
            None
        } else {
            Some(mean(
                &self.reached.iter().map(|&r| r as f64).collect::<Vec<_>>(),
            ))
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct HbbReport {
    pub lambda: u64,
    pub trials: u64,
    pub target: Option<Target>,
    pub hi: SequenceStats,
    pub lo: SequenceStats,
    /// Fraction of `Hi` estimates at least `1.2 lambda`.
    pub hi_fraction_high: f64,
    /// Fraction of `Lo` estimates at most `0.8 lambda`.
    pub lo_fraction_low: f64,
    /// Two-sample KS statistic between the `L` values of the two sequences.
    pub ks_levels: f64,
}

impl HbbReport {
    /// Counts of `lambda_hat / lambda` in `bins` equal bins over `[lo, hi)`,
    /// as `(bin_start, hi_count, lo_count)`.
    pub fn histogram(&self, lo: f64, hi: f64, bins: usize) -> Vec<(f64, u64, u64)> {
        let width = (hi - lo) / bins as f64;
        let count = |xs: &[f64], b: usize| {
            xs.iter()
                .map(|x| ((x / self.lambda as f64 - lo) / width).floor())
                .filter(|&k| k == b as f64)
                .count() as u64
        };
        (0..bins)
            .map(|b| {
                (
                    lo + b as f64 * width,
                    count(&self.hi.estimates, b),
                    count(&self.lo.estimates, b),
                )
            })
            .collect()
    }
}

fn collect(
    kind: SequenceKind,
    lambda: u64,
    trials: u64,
    seed: u64,
    target: Option<Target>,
) -> SequenceStats {
    let runs = map_trials(trials, |t| {
        run_sequence(kind, lambda, &OracleSeed::new(trial_seed(seed, t)), target)
    });
    SequenceStats {
        estimates: runs.iter().map(|r| r.state.estimate()).collect(),
        levels: runs.iter().map(|r| r.state.l).collect(),
        reached: runs.iter().filter_map(|r| r.reached_at).collect(),
    }
}

/// Runs both sequences `trials` times. Each trial uses the same hash for both
/// sequences. With a target, `lambda` is the cap on the cardinality.
pub fn run_hbb_demo(
    lambda: u64,
    trials: u64,
    seed: u64,
    target: Option<Target>,
) -> Result<HbbReport, SketchError> {
    if lambda == 0 || trials == 0 {
        return Err(SketchError::InvalidParams(
            "lambda and trials must be positive".into(),
        ));
    }
    let hi = collect(SequenceKind::Hi, lambda, trials, seed, target);
    let lo = collect(SequenceKind::Lo, lambda, trials, seed, target);
    let lam = lambda as f64;
    let as_f64 = |v: &[u32]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
    Ok(HbbReport {
        lambda,
        trials,
        target,
        hi_fraction_high: hi.fraction(|x| x >= 1.2 * lam),
        lo_fraction_low: lo.fraction(|x| x <= 0.8 * lam),
        ks_levels: ks_statistic(&as_f64(&hi.levels), &as_f64(&lo.levels)),
        hi,
        lo,
    })
}

/// Parses `L=12,HW=31`.
pub fn parse_target(s: &str) -> Result<Target, SketchError> {
    let bad = || SketchError::InvalidParams(format!("expected L=<int>,HW=<int>, got `{s}`"));
    let mut l = None;
    let mut w = None;
    for part in s.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(bad)?;
        let v: u32 = value.trim().parse().map_err(|_| bad())?;
        match key.trim() {
            "L" => l = Some(v),
            "HW" => w = Some(v),
            _ => return Err(bad()),
        }
    }
    match (l, w) {
        (Some(l), Some(w)) if w < 32 => Ok((l, w)),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_application() {
        let mut s = HyperBitBit::new();
        assert!(!s.insert_hash(5, 1));
        assert!(s.insert_hash(5, 2));
        assert_eq!((s.s0, s.s1), (1 << 5, 0));
        assert!(s.insert_hash(7, 3));
        assert_eq!((s.s0, s.s1), ((1 << 5) | (1 << 7), 1 << 7));
        assert!(!s.insert_hash(7, 3));
    }

    #[test]
    fn rotation_restores_invariant() {
        let mut s = HyperBitBit::new();
        for j in 0..31 {
            s.insert_hash(j, if j < 10 { 3 } else { 2 });
        }
        assert_eq!((s.l, s.weight()), (0, 31));
        s.insert_hash(40, 2);
        assert_eq!(s.l, 1);
        assert_eq!(s.weight(), 10);
        assert_eq!(s.s1, 0);
    }

    #[test]
    fn estimate_values() {
        let s = HyperBitBit::new();
        assert!((s.estimate() - 42.224253144732614).abs() < 1e-9);
        let t = HyperBitBit { l: 1, ..s };
        assert!((t.estimate() / s.estimate() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sequences() {
        assert_eq!(gen_sequence(SequenceKind::Lo, 3), vec![1, 2, 3]);
        assert_eq!(gen_sequence(SequenceKind::Hi, 3), vec![1, 2, 1, 2, 3]);
        assert_eq!(gen_sequence(SequenceKind::Hi, 1), vec![1]);
        for kind in [SequenceKind::Lo, SequenceKind::Hi] {
            let mut v = gen_sequence(kind, 40);
            v.sort();
            v.dedup();
            assert_eq!(v.len(), 40);
        }
    }

    #[test]
    fn duplicate_before_rotation_is_noop() {
        let seed = OracleSeed::new(3);
        let mut s = HyperBitBit::new();
        s.insert(&seed, 9);
        let before = s;
        assert!(!s.insert(&seed, 9));
        assert_eq!(s, before);
    }

    /// Naive replay of the explicit sequence.
    fn replay(
        kind: SequenceKind,
        lambda: u64,
        seed: &OracleSeed,
        target: Option<Target>,
    ) -> SequenceRun {
        let mut state = HyperBitBit::new();
        let mut distinct = 0u64;
        for e in gen_sequence(kind, lambda) {
            distinct = distinct.max(e);
            if state.insert(seed, e) {
                if hit(&state, target) {
                    return SequenceRun {
                        state,
                        reached_at: Some(distinct),
                    };
                }
                if past(&state, target) {
                    return SequenceRun {
                        state,
                        reached_at: None,
                    };
                }
            }
        }
        SequenceRun {
            state,
            reached_at: None,
        }
    }

    #[test]
    fn fast_simulation_equals_replay() {
        for t in 0..30u64 {
            let seed = OracleSeed::new(t);
            for lambda in [1, 2, 3, 17, 600, 2500] {
                for kind in [SequenceKind::Lo, SequenceKind::Hi] {
                    assert_eq!(
                        run_sequence(kind, lambda, &seed, None),
                        replay(kind, lambda, &seed, None),
                        "seed {t}, lambda {lambda}, {kind:?}"
                    );
                }
            }
            for kind in [SequenceKind::Lo, SequenceKind::Hi] {
                let target = Some((4, 20));
                assert_eq!(
                    run_sequence(kind, 2500, &seed, target),
                    replay(kind, 2500, &seed, target)
                );
            }
        }
    }

    #[test]
    fn hash_law() {
        let seed = OracleSeed::new(1);
        let n = 200_000u64;
        let mut ks = [0u64; 4];
        let mut js = [0u64; 64];
        for e in 0..n {
            let (j, k) = hbb_hash(&seed, e);
            js[j as usize] += 1;
            if k <= 4 {
                ks[k as usize - 1] += 1;
            }
        }
        for (i, &c) in ks.iter().enumerate() {
            let p = 2f64.powi(-(i as i32 + 1));
            let se = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((c as f64 - n as f64 * p).abs() < 5.0 * se);
        }
        let e = n as f64 / 64.0;
        assert!(js.iter().all(|&c| (c as f64 - e).abs() < 5.0 * e.sqrt()));
    }

    #[test]
    fn demo_report_well_formed_and_deterministic() {
        let r = run_hbb_demo(10_000, 1, 4, None).unwrap();
        assert_eq!(r.hi.estimates.len(), 1);
        assert!(r.hi_fraction_high == 0.0 || r.hi_fraction_high == 1.0);
        let a = run_hbb_demo(20_000, 50, 4, None).unwrap();
        assert_eq!(a, run_hbb_demo(20_000, 50, 4, None).unwrap());
        let h = a.histogram(0.0, 3.0, 30);
        assert_eq!(h.iter().map(|b| b.1).sum::<u64>(), 50);
        assert!(run_hbb_demo(0, 5, 0, None).is_err());
    }

    #[test]
    fn targets() {
        assert_eq!(parse_target("L=12,HW=31").unwrap(), (12, 31));
        assert_eq!(parse_target(" HW=3 , L=2 ").unwrap(), (2, 3));
        assert!(parse_target("L=12").is_err());
        assert!(parse_target("L=1,HW=32").is_err());
        assert!(parse_target("x").is_err());
    }
}
