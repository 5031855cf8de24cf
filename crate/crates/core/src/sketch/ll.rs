//! Base-`q` LogLog with offsets.
//!
//! Register `i` sees an element with probability `a_i = q^-r_i`; a kept
//! element proposes a value `c` with `P(c >= k) = q^-k`, clamped at `W`. So the
//! per-element candidate satisfies `P(c_i >= k) = a_i q^-k` for `k >= 1`.
//!
//! The candidate vector is drawn top-down. One uniform fixes
//! `K = max_i c_i`; when `K` does not exceed the smallest register the element
//! cannot change anything and we stop there. Otherwise the full vector is drawn
//! from its law conditioned on the maximum, so the result is the same function
//! of the element either way.

use std::sync::Arc;

use crate::oracle::{label, ElementId, ElementKey, OracleSeed};
use crate::sketch::params::SketchParams;
use crate::SketchError;

/// `m` registers with values in `[0, W]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LlState {
    registers: Vec<u16>,
    hist: Vec<u32>,
    min: u16,
}

impl LlState {
    pub fn empty(m: u32, w: u32) -> Self {
        let mut hist = vec![0; w as usize + 1];
        hist[0] = m;
        Self {
            registers: vec![0; m as usize],
            hist,
            min: 0,
        }
    }

    pub fn from_registers(registers: Vec<u16>, w: u32) -> Result<Self, SketchError> {
        let mut state = Self::empty(registers.len() as u32, w);
        for (i, &r) in registers.iter().enumerate() {
            if r as u32 > w {
                return Err(SketchError::InvalidParams(format!(
                    "register {r} exceeds width {w}"
                )));
            }
            state.raise(i, r);
        }
        Ok(state)
    }

    pub fn registers(&self) -> &[u16] {
        &self.registers
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.iter().all(|&r| r == 0)
    }

    pub fn width(&self) -> u32 {
        self.hist.len() as u32 - 1
    }

    pub fn min_register(&self) -> u16 {
        self.min
    }

    /// `register[i] = max(register[i], value)`; returns whether it grew.
    #[inline]
    pub fn raise(&mut self, i: usize, value: u16) -> bool {
        let old = self.registers[i];
        if value <= old {
            return false;
        }
        self.registers[i] = value;
        self.hist[old as usize] -= 1;
        self.hist[value as usize] += 1;
        while self.hist[self.min as usize] == 0 {
            self.min += 1;
        }
        true
    }

    pub fn union_with(&mut self, other: &LlState) {
        assert_eq!(self.hist.len(), other.hist.len(), "shape mismatch");
        for (i, &v) in other.registers.iter().enumerate() {
            self.raise(i, v);
        }
    }
}

/// Per-shape tables for the top-down candidate draw.
#[derive(Debug)]
pub struct LlModel {
    params: SketchParams,
    offsets: Vec<f64>,
    keep: Vec<f64>,
    /// `q^-k` for `k = 0..=W`.
    qpow: Vec<f64>,
    /// `P(K >= k)` for `k = 0..=W`.
    top_tail: Vec<f64>,
    /// `pi[k*m + i] = P(c_i = k | c_i <= k)`.
    pi: Vec<f64>,
    /// `max_i pi[k*m + i]`.
    level_pmax: Vec<f64>,
    /// `P(first i' with c_i' = k is <= i | some c = k, all <= k)`.
    first_cdf: Vec<f64>,
}

impl LlModel {
    pub fn new(params: SketchParams, seed: &OracleSeed) -> Result<Self, SketchError> {
        params.validate()?;
        let offsets = params.offsets(seed);
        Ok(Self::with_offsets(params, offsets))
    }

    pub fn with_offsets(params: SketchParams, offsets: Vec<f64>) -> Self {
        let (m, w) = (params.m as usize, params.w as usize);
        let q = params.q;
        let keep: Vec<f64> = offsets.iter().map(|&r| q.powf(-r)).collect();
        let qpow: Vec<f64> = (0..=w).map(|k| q.powf(-(k as f64))).collect();
        let tail = |i: usize, k: usize| -> f64 {
            match k {
                0 => 1.0,
                k if k > w => 0.0,
                k => keep[i] * qpow[k],
            }
        };
        let mut top_tail = vec![1.0; w + 1];
        let mut pi = vec![0.0; (w + 1) * m];
        let mut level_pmax = vec![0.0f64; w + 1];
        let mut first_cdf = vec![1.0; (w + 1) * m];
        for k in 1..=w {
            let row = k * m;
            let mut log_miss = 0.0f64;
            for i in 0..m {
                let (g, g_next) = (tail(i, k), tail(i, k + 1));
                let p = ((g - g_next) / (1.0 - g_next)).min(1.0);
                pi[row + i] = p;
                level_pmax[k] = level_pmax[k].max(p);
                log_miss += (-p).ln_1p();
                first_cdf[row + i] = -log_miss.exp_m1();
            }
            let log_none: f64 = (0..m).map(|i| (-tail(i, k)).ln_1p()).sum();
            top_tail[k] = -log_none.exp_m1();
            let hit = -log_miss.exp_m1();
            for c in &mut first_cdf[row..row + m] {
                *c = (*c / hit).min(1.0);
            }
            first_cdf[row + m - 1] = 1.0;
        }
        Self {
            params,
            offsets,
            keep,
            qpow,
            top_tail,
            pi,
            level_pmax,
            first_cdf,
        }
    }

    pub fn params(&self) -> &SketchParams {
        &self.params
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `a_i = q^-r_i`, the probability register `i` sees an element.
    pub fn keep_prob(&self, i: usize) -> f64 {
        self.keep[i]
    }

    /// `K = max_i c_i` for the element.
    #[inline]
    pub fn top_level(&self, key: &ElementKey) -> u16 {
        let v = key.uniform(label::LL_KEEP, 0);
        (self.top_tail.partition_point(|&t| t >= v) - 1) as u16
    }

    /// Calls `f(i, c_i)` for every register with `c_i > floor`, given that
    /// the maximum is `top`. Levels are drawn from the top down; each register
    /// not yet placed lands on level `k` with probability `P(c_i = k | c_i <= k)`.
    pub fn for_each_candidate(
        &self,
        key: &ElementKey,
        top: u16,
        floor: u16,
        mut f: impl FnMut(usize, u16),
    ) {
        let m = self.params.m as usize;
        let mut placed: Vec<usize> = Vec::new();
        let mut fresh: Vec<usize> = Vec::new();
        for k in (floor as usize + 1..=top as usize).rev() {
            let row = &self.pi[k * m..(k + 1) * m];
            let stream = (k as u64) << 32;
            let mut pos = if k == top as usize {
                // The top level holds at least one register.
                let cdf = &self.first_cdf[k * m..(k + 1) * m];
                let u = key.uniform(label::LL_FIRST, k as u64);
                let first = cdf.partition_point(|&c| c < u).min(m - 1);
                fresh.push(first);
                first as i64
            } else {
                -1
            };
            let pmax = self.level_pmax[k];
            let log_miss = (-pmax).ln_1p();
            let mut step = 0u64;
            loop {
                let skip = if pmax >= 1.0 {
                    0.0
                } else {
                    (key.uniform(label::LL_VALUE, stream | (2 * step)).ln() / log_miss).floor()
                };
                if skip >= (m as i64 - pos - 1) as f64 {
                    break;
                }
                pos += 1 + skip as i64;
                let i = pos as usize;
                let a = key.uniform(label::LL_VALUE, stream | (2 * step + 1));
                if a * pmax <= row[i] && placed.binary_search(&i).is_err() {
                    fresh.push(i);
                }
                step += 1;
            }
            for &i in &fresh {
                f(i, k as u16);
            }
            placed.append(&mut fresh);
            placed.sort_unstable();
        }
    }

    /// The element's full candidate vector.
    pub fn candidates(&self, key: &ElementKey) -> Vec<u16> {
        let mut out = vec![0u16; self.params.m as usize];
        self.for_each_candidate(key, self.top_level(key), 0, |i, c| out[i] = c);
        out
    }

    /// Probability that an unseen element raises register `i` from `value`.
    #[inline]
    pub fn change_prob(&self, i: usize, value: u16) -> f64 {
        if value as u32 >= self.params.w {
            0.0
        } else {
            self.keep[i] * self.qpow[value as usize + 1]
        }
    }

    pub fn transition_probability(&self, state: &LlState) -> f64 {
        let log_stay: f64 = state
            .registers()
            .iter()
            .enumerate()
            .map(|(i, &s)| (-self.change_prob(i, s)).ln_1p())
            .sum();
        -log_stay.exp_m1()
    }
}

/// A LogLog sketch bound to its seed.
#[derive(Clone, Debug)]
pub struct LlSketch {
    model: Arc<LlModel>,
    seed: OracleSeed,
    state: LlState,
}

impl LlSketch {
    pub fn new(params: SketchParams, seed: u64) -> Result<Self, SketchError> {
        let seed = OracleSeed::new(seed);
        let model = Arc::new(LlModel::new(params, &seed)?);
        Ok(Self::with_model(model, seed))
    }

    pub fn with_model(model: Arc<LlModel>, seed: OracleSeed) -> Self {
        let state = LlState::empty(model.params.m, model.params.w);
        Self { model, seed, state }
    }

    pub fn from_state(
        params: SketchParams,
        seed: u64,
        state: LlState,
    ) -> Result<Self, SketchError> {
        let mut sketch = Self::new(params, seed)?;
        if state.len() != params.m as usize || state.width() != params.w {
            return Err(SketchError::InvalidParams(
                "state shape does not match params".into(),
            ));
        }
        sketch.state = state;
        Ok(sketch)
    }

    pub fn params(&self) -> &SketchParams {
        &self.model.params
    }

    pub fn model(&self) -> &Arc<LlModel> {
        &self.model
    }

    pub fn seed(&self) -> OracleSeed {
        self.seed
    }

    pub fn state(&self) -> &LlState {
        &self.state
    }

    pub fn insert(&mut self, element: ElementId) -> bool {
        self.insert_with(element, |_, _, _| {})
    }

    /// Inserts `element`, reporting `(register, old, new)` for each raise.
    pub fn insert_with(
        &mut self,
        element: ElementId,
        mut on_raise: impl FnMut(usize, u16, u16),
    ) -> bool {
        let key = self.seed.element(element);
        let top = self.model.top_level(&key);
        let floor = self.state.min_register();
        if top <= floor {
            return false;
        }
        let state = &mut self.state;
        let mut changed = false;
        self.model.for_each_candidate(&key, top, floor, |i, c| {
            let old = state.registers[i];
            if state.raise(i, c) {
                changed = true;
                on_raise(i, old, c);
            }
        });
        changed
    }

    pub fn insert_poissonized(&mut self, element: ElementId) -> bool {
        let seed = self.seed;
        let mut changed = false;
        for copy in seed.poisson_copies(element) {
            changed |= self.insert(copy);
        }
        changed
    }

    pub fn transition_probability(&self) -> f64 {
        self.model.transition_probability(&self.state)
    }

    pub fn merge(&mut self, other: &Self) -> Result<(), SketchError> {
        if self.params() != other.params() {
            return Err(SketchError::ParamsMismatch);
        }
        if self.seed != other.seed {
            return Err(SketchError::SeedMismatch);
        }
        self.state.union_with(&other.state);
        Ok(())
    }

    pub fn merged(&self, other: &Self) -> Result<Self, SketchError> {
        let mut out = self.clone();
        out.merge(other)?;
        Ok(out)
    }
}

impl PartialEq for LlSketch {
    fn eq(&self, other: &Self) -> bool {
        self.params() == other.params() && self.seed == other.seed && self.state == other.state
    }
}
