//! Base-`q` PCSA: an `m x W` bit matrix where an element sets cell `(i, j)`
//! with probability `q^-(j + r_i)`.
//!
//! An element's hit matrix `Z` is generated top-down so that insertion only
//! pays for the columns that still contain zeros:
//!
//! 1. one draw picks `J`, the highest column containing a hit, from the exact
//!    law of the maximum of the independent column indicators;
//! 2. columns below `J` are independent coins with their own hit probability;
//! 3. inside a hit column, one draw picks the first hit row from the
//!    conditional law, and later rows are found by thinning a Bernoulli
//!    process at the column's largest cell probability.
//!
//! Every draw is indexed by `(element, label, position)` only, so `Z` is a
//! fixed function of the element and the cells are independent
//! `Bernoulli(p_ij)`. Skipping full columns never changes the result.

use std::sync::Arc;

use crate::oracle::{label, ElementId, ElementKey, OracleSeed};
use crate::sketch::params::SketchParams;
use crate::SketchError;

/// The bit matrix. Rows are copies, columns are levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PcsaState {
    m: u32,
    w: u32,
    words_per_row: usize,
    bits: Vec<u64>,
    col_ones: Vec<u32>,
    first_open: u32,
}

impl PcsaState {
    pub fn empty(m: u32, w: u32) -> Self {
        let words_per_row = (w as usize).div_ceil(64);
        Self {
            m,
            w,
            words_per_row,
            bits: vec![0; words_per_row * m as usize],
            col_ones: vec![0; w as usize],
            first_open: 0,
        }
    }

    pub fn rows(&self) -> u32 {
        self.m
    }

    pub fn cols(&self) -> u32 {
        self.w
    }

    #[inline]
    pub fn get(&self, i: u32, j: u32) -> bool {
        let word = self.bits[i as usize * self.words_per_row + (j as usize >> 6)];
        (word >> (j & 63)) & 1 == 1
    }

    /// Sets `(i, j)`; returns whether the bit was previously zero.
    #[inline]
    pub fn set(&mut self, i: u32, j: u32) -> bool {
        let idx = i as usize * self.words_per_row + (j as usize >> 6);
        let mask = 1u64 << (j & 63);
        if self.bits[idx] & mask != 0 {
            return false;
        }
        self.bits[idx] |= mask;
        self.col_ones[j as usize] += 1;
        while self.first_open < self.w && self.col_ones[self.first_open as usize] == self.m {
            self.first_open += 1;
        }
        true
    }

    /// Clears `(i, j)`. Only used to undo a rejected insertion.
    pub(crate) fn clear(&mut self, i: u32, j: u32) {
        let idx = i as usize * self.words_per_row + (j as usize >> 6);
        let mask = 1u64 << (j & 63);
        if self.bits[idx] & mask == 0 {
            return;
        }
        self.bits[idx] &= !mask;
        self.col_ones[j as usize] -= 1;
        self.first_open = self.first_open.min(j);
    }

    /// Lowest column that still has a zero (`W` when saturated).
    pub fn first_open_column(&self) -> u32 {
        self.first_open
    }

    pub fn count_ones(&self) -> u64 {
        self.col_ones.iter().map(|&c| c as u64).sum()
    }

    pub fn column_ones(&self, j: u32) -> u32 {
        self.col_ones[j as usize]
    }

    pub fn is_empty(&self) -> bool {
        self.count_ones() == 0
    }

    pub fn is_saturated(&self) -> bool {
        self.first_open == self.w
    }

    /// Component-wise OR.
    pub fn union_with(&mut self, other: &PcsaState) {
        assert_eq!((self.m, self.w), (other.m, other.w), "shape mismatch");
        for i in 0..self.m {
            for j in 0..self.w {
                if other.get(i, j) {
                    self.set(i, j);
                }
            }
        }
    }

    /// Row-major iteration over all cells.
    pub fn cells(&self) -> impl Iterator<Item = (u32, u32, bool)> + '_ {
        (0..self.m).flat_map(move |i| (0..self.w).map(move |j| (i, j, self.get(i, j))))
    }

    pub fn from_fn(m: u32, w: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut s = Self::empty(m, w);
        for i in 0..m {
            for j in 0..w {
                if f(i, j) {
                    s.set(i, j);
                }
            }
        }
        s
    }
}

/// Per-shape tables: cell probabilities and the conditional laws used by the
/// top-down hit generator.
#[derive(Debug)]
pub struct PcsaModel {
    params: SketchParams,
    offsets: Vec<f64>,
    /// `p_ij`, row-major.
    prob: Vec<f64>,
    /// `P(column j has a hit)`.
    col_hit: Vec<f64>,
    /// `P(highest hit column >= j)`, non-increasing.
    top_tail: Vec<f64>,
    col_pmax: Vec<f64>,
    /// Column-major `P(first hit row <= i | column hit)`.
    first_cdf: Vec<f64>,
}

impl PcsaModel {
    pub fn new(params: SketchParams, seed: &OracleSeed) -> Result<Self, SketchError> {
        params.validate()?;
        let offsets = params.offsets(seed);
        Ok(Self::with_offsets(params, offsets))
    }

    pub fn with_offsets(params: SketchParams, offsets: Vec<f64>) -> Self {
        let (m, w) = (params.m as usize, params.w as usize);
        assert_eq!(offsets.len(), m);
        let mut prob = vec![0.0; m * w];
        for i in 0..m {
            for j in 0..w {
                prob[i * w + j] = params.q.powf(-(j as f64 + offsets[i])).min(1.0);
            }
        }
        let mut col_hit = vec![0.0; w];
        let mut col_log_miss = vec![0.0; w];
        let mut col_pmax = vec![0.0f64; w];
        let mut first_cdf = vec![0.0; m * w];
        for j in 0..w {
            let mut log_miss = 0.0f64;
            for i in 0..m {
                let p = prob[i * w + j];
                log_miss += (-p).ln_1p();
                col_pmax[j] = col_pmax[j].max(p);
                first_cdf[j * m + i] = -log_miss.exp_m1();
            }
            let hit = -log_miss.exp_m1();
            col_hit[j] = hit;
            col_log_miss[j] = log_miss;
            for c in &mut first_cdf[j * m..(j + 1) * m] {
                *c = (*c / hit).min(1.0);
            }
            first_cdf[j * m + m - 1] = 1.0;
        }
        let mut top_tail = vec![0.0; w];
        let mut acc = 0.0f64;
        for j in (0..w).rev() {
            acc += col_log_miss[j];
            top_tail[j] = -acc.exp_m1();
        }
        Self {
            params,
            offsets,
            prob,
            col_hit,
            top_tail,
            col_pmax,
            first_cdf,
        }
    }

    pub fn params(&self) -> &SketchParams {
        &self.params
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `q^-(j + r_i)`.
    #[inline]
    pub fn p(&self, i: u32, j: u32) -> f64 {
        self.prob[i as usize * self.params.w as usize + j as usize]
    }

    pub fn bit_prob(&self, i: u32, j: u32) -> Result<f64, SketchError> {
        if i >= self.params.m || j >= self.params.w {
            return Err(SketchError::IndexOutOfRange { i, j });
        }
        Ok(self.p(i, j))
    }

    /// Calls `f(i, j)` for every cell of the element's hit matrix in columns
    /// `from..W`.
    pub fn for_each_hit(&self, key: &ElementKey, from: u32, mut f: impl FnMut(u32, u32)) {
        let from = from as usize;
        let w = self.params.w as usize;
        if from >= w {
            return;
        }
        let v = key.uniform(label::PCSA_TOP, 0);
        if v > self.top_tail[from] {
            return;
        }
        let top = from + self.top_tail[from..].partition_point(|&c| c >= v) - 1;
        for j in from..top {
            if key.uniform(label::PCSA_COLUMN, j as u64) <= self.col_hit[j] {
                self.column_hits(key, j, &mut f);
            }
        }
        self.column_hits(key, top, &mut f);
    }

    /// Hits in column `j`, conditioned on the column having at least one.
    fn column_hits(&self, key: &ElementKey, j: usize, f: &mut impl FnMut(u32, u32)) {
        let m = self.params.m as usize;
        let w = self.params.w as usize;
        let cdf = &self.first_cdf[j * m..(j + 1) * m];
        let u = key.uniform(label::PCSA_FIRST, j as u64);
        let first = cdf.partition_point(|&c| c < u).min(m - 1);
        f(first as u32, j as u32);

        let pmax = self.col_pmax[j];
        let log_miss = (-pmax).ln_1p();
        let mut pos = first;
        let mut step = 0u64;
        let stream = (j as u64) << 32;
        loop {
            let skip = if pmax >= 1.0 {
                0.0
            } else {
                (key.uniform(label::PCSA_CELL, stream | (2 * step)).ln() / log_miss).floor()
            };
            if skip >= (m - pos - 1) as f64 {
                break;
            }
            pos += 1 + skip as usize;
            let a = key.uniform(label::PCSA_CELL, stream | (2 * step + 1));
            if a * pmax <= self.prob[pos * w + j] {
                f(pos as u32, j as u32);
            }
            step += 1;
        }
    }

    /// The element's full hit matrix, as a list of cells.
    pub fn element_cells(&self, key: &ElementKey) -> Vec<(u32, u32)> {
        let mut cells = Vec::new();
        self.for_each_hit(key, 0, |i, j| cells.push((i, j)));
        cells
    }

    /// Probability that an unseen element changes `state`.
    pub fn transition_probability(&self, state: &PcsaState) -> f64 {
        let mut log_stay = 0.0f64;
        for j in state.first_open_column()..self.params.w {
            if state.column_ones(j) == self.params.m {
                continue;
            }
            for i in 0..self.params.m {
                if !state.get(i, j) {
                    log_stay += (-self.p(i, j)).ln_1p();
                }
            }
        }
        -log_stay.exp_m1()
    }
}

/// A PCSA sketch bound to its seed.
#[derive(Clone, Debug)]
pub struct PcsaSketch {
    model: Arc<PcsaModel>,
    seed: OracleSeed,
    state: PcsaState,
}

impl PcsaSketch {
    pub fn new(params: SketchParams, seed: u64) -> Result<Self, SketchError> {
        let seed = OracleSeed::new(seed);
        let model = Arc::new(PcsaModel::new(params, &seed)?);
        Ok(Self::with_model(model, seed))
    }

    /// Shares precomputed tables. The model's offsets must be the ones
    /// `params.offsets(seed)` produces.
    pub fn with_model(model: Arc<PcsaModel>, seed: OracleSeed) -> Self {
        let state = PcsaState::empty(model.params.m, model.params.w);
        Self { model, seed, state }
    }

    pub fn from_state(
        params: SketchParams,
        seed: u64,
        state: PcsaState,
    ) -> Result<Self, SketchError> {
        let mut sketch = Self::new(params, seed)?;
        if (state.rows(), state.cols()) != (params.m, params.w) {
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

    pub fn model(&self) -> &Arc<PcsaModel> {
        &self.model
    }

    pub fn seed(&self) -> OracleSeed {
        self.seed
    }

    pub fn state(&self) -> &PcsaState {
        &self.state
    }

    pub(crate) fn state_mut(&mut self) -> &mut PcsaState {
        &mut self.state
    }

    pub fn bit_prob(&self, i: u32, j: u32) -> Result<f64, SketchError> {
        self.model.bit_prob(i, j)
    }

    /// Inserts `element`; returns whether the state changed.
    pub fn insert(&mut self, element: ElementId) -> bool {
        self.insert_with(element, |_, _| {})
    }

    /// Inserts `element`, reporting each newly set cell.
    pub fn insert_with(&mut self, element: ElementId, mut on_set: impl FnMut(u32, u32)) -> bool {
        let key = self.seed.element(element);
        let state = &mut self.state;
        let mut changed = false;
        self.model
            .for_each_hit(&key, state.first_open_column(), |i, j| {
                if state.set(i, j) {
                    changed = true;
                    on_set(i, j);
                }
            });
        changed
    }

    /// Poissonized insertion: the element is replaced by `Poisson(1)` copies.
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

    fn check_compatible(&self, other: &Self) -> Result<(), SketchError> {
        if self.params() != other.params() {
            return Err(SketchError::ParamsMismatch);
        }
        if self.seed != other.seed {
            return Err(SketchError::SeedMismatch);
        }
        Ok(())
    }

    /// In-place union.
    pub fn merge(&mut self, other: &Self) -> Result<(), SketchError> {
        self.check_compatible(other)?;
        self.state.union_with(&other.state);
        Ok(())
    }

    pub fn merged(&self, other: &Self) -> Result<Self, SketchError> {
        let mut out = self.clone();
        out.merge(other)?;
        Ok(out)
    }
}

impl PartialEq for PcsaSketch {
    fn eq(&self, other: &Self) -> bool {
        self.params() == other.params() && self.seed == other.seed && self.state == other.state
    }
}
