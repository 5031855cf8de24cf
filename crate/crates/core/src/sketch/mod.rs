//! Sketch state machines.

pub mod format;
pub mod ll;
pub mod martingale;
pub mod params;
pub mod pcsa;
pub mod sample;

pub use format::{AnySketch, SketchKind};
pub use ll::{LlModel, LlSketch, LlState};
pub use martingale::MartingaleSketch;
pub use params::{default_width, OffsetMode, SketchParams};
pub use pcsa::{PcsaModel, PcsaSketch, PcsaState};

use crate::oracle::{ElementId, OracleSeed};

/// `log P(an unseen element leaves the state unchanged)`, split into a finite
/// part and a count of certain-hit cells (whose factor is zero).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StayLog {
    pub finite: f64,
    pub certain: u32,
}

impl StayLog {
    /// Probability that an unseen element changes the state.
    pub fn change_probability(&self) -> f64 {
        if self.certain > 0 {
            1.0
        } else {
            -self.finite.exp_m1()
        }
    }

    fn remove_factor(&mut self, p: f64) {
        if p >= 1.0 {
            self.certain -= 1;
        } else {
            self.finite -= (-p).ln_1p();
        }
    }

    fn add_factor(&mut self, p: f64) {
        if p >= 1.0 {
            self.certain += 1;
        } else {
            self.finite += (-p).ln_1p();
        }
    }
}

/// Common interface of the mergeable sketches.
pub trait Sketch: Clone + Send + Sync {
    fn params(&self) -> &SketchParams;
    fn seed(&self) -> OracleSeed;
    fn kind(&self) -> SketchKind;
    /// Inserts `element`; returns whether the state changed.
    fn insert(&mut self, element: ElementId) -> bool;
    /// Inserts `element`, keeping `stay` in step with the state.
    fn insert_tracked(&mut self, element: ElementId, stay: &mut StayLog) -> bool;
    /// Exact `StayLog` of the current state.
    fn stay_log(&self) -> StayLog;
    fn transition_probability(&self) -> f64 {
        self.stay_log().change_probability()
    }
}

impl Sketch for PcsaSketch {
    fn params(&self) -> &SketchParams {
        PcsaSketch::params(self)
    }

    fn seed(&self) -> OracleSeed {
        PcsaSketch::seed(self)
    }

    fn kind(&self) -> SketchKind {
        SketchKind::Pcsa
    }

    fn insert(&mut self, element: ElementId) -> bool {
        PcsaSketch::insert(self, element)
    }

    fn insert_tracked(&mut self, element: ElementId, stay: &mut StayLog) -> bool {
        let model = self.model().clone();
        self.insert_with(element, |i, j| stay.remove_factor(model.p(i, j)))
    }

    fn stay_log(&self) -> StayLog {
        let (model, state) = (self.model(), self.state());
        let mut stay = StayLog::default();
        for j in state.first_open_column()..state.cols() {
            for i in 0..state.rows() {
                if !state.get(i, j) {
                    stay.add_factor(model.p(i, j));
                }
            }
        }
        stay
    }
}

impl Sketch for LlSketch {
    fn params(&self) -> &SketchParams {
        LlSketch::params(self)
    }

    fn seed(&self) -> OracleSeed {
        LlSketch::seed(self)
    }

    fn kind(&self) -> SketchKind {
        SketchKind::Ll
    }

    fn insert(&mut self, element: ElementId) -> bool {
        LlSketch::insert(self, element)
    }

    fn insert_tracked(&mut self, element: ElementId, stay: &mut StayLog) -> bool {
        let model = self.model().clone();
        self.insert_with(element, |i, old, new| {
            stay.remove_factor(model.change_prob(i, old));
            stay.add_factor(model.change_prob(i, new));
        })
    }

    fn stay_log(&self) -> StayLog {
        let model = self.model();
        let mut stay = StayLog::default();
        for (i, &s) in self.state().registers().iter().enumerate() {
            stay.add_factor(model.change_prob(i, s));
        }
        stay
    }
}
