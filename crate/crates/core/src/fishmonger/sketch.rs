use std::cell::OnceCell;
use std::f64::consts::LOG2_E;
use std::sync::Arc;

use super::coder::{fixed_prob, BitString, Decoder, Encoder};
use super::quant::QuantizedEstimate;
use super::{FishmongerParams, HEADER_BITS};
use crate::estimate::{mle_bracket, pcsa_mle_from, Estimate, Method};
use crate::oracle::{ElementId, OracleSeed};
use crate::sketch::{PcsaModel, PcsaSketch, PcsaState};
use crate::SketchError;

/// Arithmetic code of `state` with `P(bit (i, j) = 0) = e^{-lambda p_ij}`,
/// cells in row-major order.
pub fn encode(state: &PcsaState, lambda_tilde: f64, model: &PcsaModel) -> BitString {
    let mut enc = Encoder::new();
    for (i, j, bit) in state.cells() {
        enc.encode(bit, fixed_prob((-lambda_tilde * model.p(i, j)).exp()));
    }
    enc.finish()
}

/// Inverse of [`encode`] for the same `lambda_tilde` and model.
pub fn decode(bits: &BitString, lambda_tilde: f64, model: &PcsaModel) -> PcsaState {
    let params = model.params();
    let mut dec = Decoder::new(bits);
    PcsaState::from_fn(params.m, params.w, |i, j| {
        dec.decode(fixed_prob((-lambda_tilde * model.p(i, j)).exp()))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Unchanged,
    Committed,
    /// The new state did not fit the budget and was rolled back.
    Reverted,
}

/// The stored form of the current state.
#[derive(Clone, Debug)]
struct Stored {
    lambda_hat: f64,
    lambda_tilde: QuantizedEstimate,
    payload: BitString,
}

/// Upper bound on the code length of the current state, maintained between
/// materializations.
///
/// `ln_l` is `ln P(S | lambda_ref)` without clamping. Since the estimate
/// maximizes the likelihood, `-log2 P(S | lambda_hat) <= -ln_l log2 e`, and
/// rounding the estimate up by at most `1/m'` costs at most
/// `log2 e * ones / m'` more bits.
#[derive(Clone, Copy, Debug)]
struct Certificate {
    lambda_ref: f64,
    ln_l: f64,
    ones: u64,
}

impl Certificate {
    fn at(state: &PcsaState, model: &PcsaModel, lambda: f64) -> Self {
        let mut ln_l = 0.0;
        if lambda > 0.0 {
            for (i, j, bit) in state.cells() {
                let t = lambda * model.p(i, j);
                ln_l += if bit { (-(-t).exp_m1()).ln() } else { -t };
            }
        }
        Self {
            lambda_ref: lambda,
            ln_l,
            ones: state.count_ones(),
        }
    }
}

/// A Fishmonger sketch. The decoded state is kept in memory next to the
/// stored form; the budget applies to the stored form.
#[derive(Clone, Debug)]
pub struct FishmongerSketch {
    params: FishmongerParams,
    inner: PcsaSketch,
    revert_count: u64,
    materializations: u64,
    audit: bool,
    cert: Certificate,
    stored: OnceCell<Stored>,
}

impl FishmongerSketch {
    pub fn new(params: FishmongerParams, seed: u64) -> Result<Self, SketchError> {
        params.validate()?;
        let inner = PcsaSketch::new(params.sketch_params(), seed)?;
        Ok(Self::from_inner(params, inner))
    }

    /// Shares the model tables of another sketch with the same parameters.
    pub fn with_model(params: FishmongerParams, model: Arc<PcsaModel>, seed: u64) -> Self {
        assert_eq!(*model.params(), params.sketch_params());
        Self::from_inner(params, PcsaSketch::with_model(model, OracleSeed::new(seed)))
    }

    fn from_inner(params: FishmongerParams, inner: PcsaSketch) -> Self {
        let mut s = Self {
            params,
            inner,
            revert_count: 0,
            materializations: 0,
            audit: false,
            cert: Certificate {
                lambda_ref: 0.0,
                ln_l: 0.0,
                ones: 0,
            },
            stored: OnceCell::new(),
        };
        let stored = s.materialize(None);
        s.cert = Certificate::at(s.inner.state(), s.inner.model(), stored.lambda_hat);
        let _ = s.stored.set(stored);
        s
    }

    /// Rebuilds a sketch around a decoded state. Fails if the state does not
    /// fit the budget.
    pub(crate) fn from_state(
        params: FishmongerParams,
        seed: u64,
        state: PcsaState,
    ) -> Result<Self, SketchError> {
        let inner = PcsaSketch::from_state(params.sketch_params(), seed, state)?;
        let s = Self::from_inner(params, inner);
        let bits = s.payload_bits() + params.estimate_bits();
        if bits > params.budget_bits() {
            return Err(SketchError::BudgetExceeded {
                bits,
                budget: params.budget_bits(),
            });
        }
        Ok(s)
    }

    /// In audit mode every change is re-encoded immediately instead of being
    /// accepted on the strength of the size certificate.
    pub fn set_audit(&mut self, audit: bool) {
        self.audit = audit;
    }

    pub fn params(&self) -> &FishmongerParams {
        &self.params
    }

    pub fn seed(&self) -> OracleSeed {
        self.inner.seed()
    }

    pub fn model(&self) -> &Arc<PcsaModel> {
        self.inner.model()
    }

    /// The decoded bit matrix.
    pub fn state(&self) -> &PcsaState {
        self.inner.state()
    }

    pub fn revert_count(&self) -> u64 {
        self.revert_count
    }

    /// Number of full re-encodings performed so far.
    pub fn materializations(&self) -> u64 {
        self.materializations
    }

    fn materialize(&mut self, hint: Option<f64>) -> Stored {
        self.materializations += 1;
        compute_stored(&self.params, self.inner.state(), self.inner.model(), hint)
    }

    fn stored(&self) -> &Stored {
        self.stored.get_or_init(|| {
            let hint = Some(self.cert.lambda_ref).filter(|&l| l > 0.0);
            compute_stored(&self.params, self.inner.state(), self.inner.model(), hint)
        })
    }

    pub fn lambda_hat(&self) -> f64 {
        self.stored().lambda_hat
    }

    pub fn lambda_tilde(&self) -> QuantizedEstimate {
        self.stored().lambda_tilde
    }

    pub fn payload(&self) -> &BitString {
        &self.stored().payload
    }

    pub fn payload_bits(&self) -> u64 {
        self.payload().len() as u64
    }

    /// Payload, stored estimate and fixed header, in bits.
    pub fn size_bits(&self) -> u64 {
        self.payload_bits() + self.params.estimate_bits() + HEADER_BITS
    }

    pub fn budget_bits(&self) -> u64 {
        self.params.budget_bits()
    }

    /// The stored estimate `lambda_tilde`.
    pub fn estimate(&self) -> Estimate {
        let st = self.stored();
        Estimate {
            lambda_hat: st.lambda_tilde.value(),
            method: Method::Mle,
            saturated: self.inner.state().is_saturated(),
        }
    }

    /// Upper bound on the payload size of the current state, if the
    /// certificate applies.
    fn certified_payload_bound(&self) -> Option<f64> {
        let (lo, hi) = mle_bracket(self.inner.params());
        let c = &self.cert;
        // Away from the bracket ends the estimate is an interior maximum.
        if !(c.lambda_ref > lo && c.lambda_ref < hi * (-4f64).exp()) {
            return None;
        }
        let sp = self.inner.params();
        Some(
            -c.ln_l * LOG2_E
                + LOG2_E * c.ones as f64 / self.params.m_prime()
                + 2.0
                + (sp.m as f64 * sp.w as f64) * 2f64.powi(-20),
        )
    }

    pub fn insert(&mut self, element: ElementId) -> InsertOutcome {
        let mut flips = Vec::new();
        if !self.inner.insert_with(element, |i, j| flips.push((i, j))) {
            return InsertOutcome::Unchanged;
        }
        let budget = (self.params.budget_bits() - self.params.estimate_bits()) as f64;
        let before = self.cert;
        if self.cert.lambda_ref > 0.0 {
            let model = self.inner.model();
            for &(i, j) in &flips {
                let t = self.cert.lambda_ref * model.p(i, j);
                self.cert.ln_l += (-(-t).exp_m1()).ln() + t;
            }
        }
        self.cert.ones += flips.len() as u64;
        if !self.audit {
            if let Some(bound) = self.certified_payload_bound() {
                if bound <= budget {
                    self.stored = OnceCell::new();
                    return InsertOutcome::Committed;
                }
            }
        }
        let hint = Some(before.lambda_ref).filter(|&l| l > 0.0);
        let stored = self.materialize(hint);
        if stored.payload.len() as f64 > budget {
            let state = self.inner.state_mut();
            for &(i, j) in &flips {
                state.clear(i, j);
            }
            self.cert = before;
            self.revert_count += 1;
            return InsertOutcome::Reverted;
        }
        self.cert = Certificate::at(self.inner.state(), self.inner.model(), stored.lambda_hat);
        self.stored = OnceCell::from(stored);
        InsertOutcome::Committed
    }

    /// Union of the two decoded states, re-estimated and re-encoded.
    pub fn merged(&self, other: &Self) -> Result<Self, SketchError> {
        if self.params != other.params {
            return Err(SketchError::ParamsMismatch);
        }
        if self.seed() != other.seed() {
            return Err(SketchError::SeedMismatch);
        }
        let mut state = self.state().clone();
        state.union_with(other.state());
        let mut out = Self::from_state(self.params, self.seed().seed(), state)?;
        out.audit = self.audit;
        Ok(out)
    }

    pub(crate) fn stored_parts(&self) -> (QuantizedEstimate, &BitString) {
        let st = self.stored();
        (st.lambda_tilde, &st.payload)
    }
}

fn compute_stored(
    params: &FishmongerParams,
    state: &PcsaState,
    model: &PcsaModel,
    hint: Option<f64>,
) -> Stored {
    let lambda_hat = pcsa_mle_from(state, model, hint).lambda_hat;
    let lambda_tilde = QuantizedEstimate::round_up(lambda_hat, params.mantissa_bits());
    let payload = encode(state, lambda_tilde.value(), model);
    Stored {
        lambda_hat,
        lambda_tilde,
        payload,
    }
}

impl PartialEq for FishmongerSketch {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.inner == other.inner
    }
}
