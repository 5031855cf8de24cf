//! Deterministic stand-in for the random oracle.
//!
//! Every random quantity a sketch consumes is a pure function of
//! `(seed, element, label, index)`. The tuple is folded through a 64-bit
//! finalizer so that runs are reproducible across platforms and threads.

/// Universe element. The universe is `[0, 2^64)`.
pub type ElementId = u64;

/// Purpose labels. Each use-site owns one so that no two roles share randomness.
pub mod label {
    /// PCSA: highest column touched by the element.
    pub const PCSA_TOP: u32 = 0;
    /// PCSA: per-column "any cell hit" coins.
    pub const PCSA_COLUMN: u32 = 10;
    /// PCSA: first hit row inside a column.
    pub const PCSA_FIRST: u32 = 11;
    /// PCSA: thinned candidate rows after the first hit.
    pub const PCSA_CELL: u32 = 12;
    /// LL: keep-coin / top level of the element.
    pub const LL_KEEP: u32 = 1;
    /// LL: thinned candidate registers on each level.
    pub const LL_VALUE: u32 = 2;
    /// LL: first register on the top level.
    pub const LL_FIRST: u32 = 13;
    /// Poisson multiplicity of an element.
    pub const POISSON: u32 = 3;
    /// Random offsets, drawn once per sketch row.
    pub const OFFSET: u32 = 4;
    /// HyperBitBit `(j, k)` hash.
    pub const HBB: u32 = 5;
    /// Sub-elements generated in Poissonized insertion.
    pub const POISSON_COPY: u32 = 6;
    /// Per-trial sub-seeds in the harness.
    pub const TRIAL: u32 = 7;
    /// Direct state samplers.
    pub const SAMPLER: u32 = 8;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// The murmur3/splitmix finalizer: a bijection on `u64` with full avalanche.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Maps 64 random bits to a double in `(0, 1]` with 53 bits of precision.
#[inline]
pub fn to_unit(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Keyed oracle. Cheap to copy; holds only the mixed seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct OracleSeed {
    seed: u64,
    key: u64,
}

impl OracleSeed {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            key: mix64(seed ^ 0x6a09_e667_f3bc_c909),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Per-element key. Callers that need many draws for one element compute
    /// this once and then use [`ElementKey::uniform`].
    #[inline]
    pub fn element(&self, element: ElementId) -> ElementKey {
        ElementKey(mix64(self.key ^ mix64(element.wrapping_add(GOLDEN))))
    }

    /// A uniform draw in `(0, 1]`.
    #[inline]
    pub fn uniform(&self, element: ElementId, label: u32, index: u64) -> f64 {
        self.element(element).uniform(label, index)
    }

    /// Raw 64 random bits for the tuple.
    #[inline]
    pub fn bits(&self, element: ElementId, label: u32, index: u64) -> u64 {
        self.element(element).bits(label, index)
    }

    /// `Poisson(1)` multiplicity of `element`, by inversion of the CDF with a
    /// single uniform.
    pub fn poisson_multiplicity(&self, element: ElementId) -> u32 {
        self.element(element).poisson_multiplicity()
    }

    /// Sub-elements standing in for the `Poisson(1)` copies of `element`.
    pub fn poisson_copies(&self, element: ElementId) -> impl Iterator<Item = ElementId> + '_ {
        let key = self.element(element);
        (1..=key.poisson_multiplicity() as u64).map(move |c| key.bits(label::POISSON_COPY, c))
    }

    /// Independent sub-seed, used for one trial of an experiment.
    pub fn derive(&self, label: u32, index: u64) -> OracleSeed {
        OracleSeed::new(self.bits(index, label, 0))
    }
}

/// Oracle output for one element; draws are indexed by `(label, index)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ElementKey(u64);

impl ElementKey {
    #[inline]
    pub fn bits(&self, label: u32, index: u64) -> u64 {
        let stream = ((label as u64) << 40) ^ index;
        mix64(self.0 ^ mix64(stream.wrapping_mul(GOLDEN).wrapping_add(label as u64 + 1)))
    }

    #[inline]
    pub fn uniform(&self, label: u32, index: u64) -> f64 {
        to_unit(self.bits(label, index))
    }

    pub fn poisson_multiplicity(&self) -> u32 {
        poisson1_inverse(self.uniform(label::POISSON, 0))
    }
}

/// Smallest `k` with `P(X <= k) >= u` for `X ~ Poisson(1)`.
pub fn poisson1_inverse(u: f64) -> u32 {
    let mut pmf = (-1.0f64).exp();
    let mut cdf = pmf;
    let mut k = 0u32;
    // The CDF reaches 1 - 2^-53 near k = 18; the cap only guards u == 1.
    while cdf < u && k < 40 {
        k += 1;
        pmf /= k as f64;
        cdf += pmf;
    }
    k
}
