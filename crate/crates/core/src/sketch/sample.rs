//! Direct samplers for the state reached after `lambda` distinct insertions.
//!
//! Every cell (PCSA) and every register (LogLog) receives independent
//! per-element draws, so after `lambda` distinct elements the state
//! components are independent with closed-form marginals:
//! `P(bit = 0) = (1 - p)^lambda` and `P(S <= k) = (1 - a q^-(k+1))^lambda`.
//! Under Poissonization the powers become `e^{-lambda p}` and
//! `e^{-lambda a q^-(k+1)}`.

use crate::oracle::{label, OracleSeed};
use crate::sketch::{LlModel, LlState, PcsaModel, PcsaState};

/// `log P(a component is untouched by lambda elements)` given its
/// per-element hit probability `p`.
#[inline]
fn log_untouched(p: f64, lambda: f64, poissonized: bool) -> f64 {
    if poissonized {
        -lambda * p
    } else if p >= 1.0 {
        if lambda > 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    } else {
        lambda * (-p).ln_1p()
    }
}

impl PcsaModel {
    pub fn sample_state(&self, lambda: f64, poissonized: bool, seed: &OracleSeed) -> PcsaState {
        let (m, w) = (self.params().m, self.params().w);
        PcsaState::from_fn(m, w, |i, j| {
            let zero = log_untouched(self.p(i, j), lambda, poissonized).exp();
            seed.uniform(i as u64, label::SAMPLER, j as u64) > zero
        })
    }
}

impl LlModel {
    pub fn sample_state(&self, lambda: f64, poissonized: bool, seed: &OracleSeed) -> LlState {
        let (m, w) = (self.params().m as usize, self.params().w);
        let regs = (0..m)
            .map(|i| {
                let u = seed.uniform(i as u64, label::SAMPLER, 0);
                // Smallest k with P(S <= k) >= u.
                let mut k = 0u16;
                while (k as u32) < w
                    && log_untouched(self.change_prob(i, k), lambda, poissonized).exp() < u
                {
                    k += 1;
                }
                k
            })
            .collect();
        LlState::from_registers(regs, w).expect("sampled registers are within the width")
    }
}
