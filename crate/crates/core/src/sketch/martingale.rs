//! Martingale (HIP) wrapper: a running estimate that grows by `1/p` each time
//! the inner state changes, where `p` is the change probability just before
//! the insertion.

use crate::oracle::ElementId;
use crate::sketch::{Sketch, StayLog};

/// Recompute the stay log exactly once it has shrunk by this factor since the
/// last exact evaluation, bounding cancellation error in the running sum.
const REFRESH_RATIO: f64 = 1.0 / 1024.0;

#[derive(Clone, Debug)]
pub struct MartingaleSketch<S> {
    inner: S,
    estimate: f64,
    stay: StayLog,
    anchor: f64,
}

impl<S: Sketch> MartingaleSketch<S> {
    pub fn new(inner: S) -> Self {
        Self::from_parts(inner, 0.0)
    }

    pub fn from_parts(inner: S, estimate: f64) -> Self {
        let stay = inner.stay_log();
        Self {
            anchor: stay.finite.abs(),
            inner,
            estimate,
            stay,
        }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    /// Change probability of the current state.
    pub fn transition_probability(&self) -> f64 {
        self.stay.change_probability()
    }

    pub fn insert(&mut self, element: ElementId) -> bool {
        let p = self.stay.change_probability();
        if !self.inner.insert_tracked(element, &mut self.stay) {
            return false;
        }
        assert!(p > 0.0, "state changed with zero transition probability");
        self.estimate += 1.0 / p;
        if self.stay.certain == 0 && self.stay.finite.abs() < self.anchor * REFRESH_RATIO {
            self.stay = self.inner.stay_log();
            self.anchor = self.stay.finite.abs();
        }
        true
    }
}

impl<S: Sketch> MartingaleSketch<S> {
    pub fn insert_poissonized(&mut self, element: ElementId) -> bool {
        let seed = self.inner.seed();
        let mut changed = false;
        for copy in seed.poisson_copies(element) {
            changed |= self.insert(copy);
        }
        changed
    }
}

impl<S: Sketch + PartialEq> PartialEq for MartingaleSketch<S> {
    fn eq(&self, other: &Self) -> bool {
        self.inner == other.inner && self.estimate == other.estimate
    }
}
