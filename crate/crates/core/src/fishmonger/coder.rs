//! Binary arithmetic coder with 62-bit integer state.
//!
//! Intervals are kept above a quarter of the coding range by the usual
//! E1/E2/E3 rescalings, with straddling (E3) steps deferred as pending bits,
//! so no carry ever propagates into emitted output. Probabilities are 64-bit
//! fixed point, clamped to `[2^-30, 1 - 2^-30]`.
//!
//! The stream is terminated with the shortest suffix that identifies the
//! final interval, and trailing zero bits are dropped: the decoder reads
//! zeros past the end. A message of model probability `P` costs at most
//! `-log2 P + 2` bits.

const PRECISION: u32 = 62;
const TOP: u64 = 1 << PRECISION;
const HALF: u64 = TOP >> 1;
const QUARTER: u64 = TOP >> 2;
const PROB_ONE: u128 = 1 << 64;
/// `2^-30` in 64-bit fixed point.
const PROB_FLOOR: u64 = 1 << 34;

/// Converts `P(bit = 0)` to clamped fixed point.
#[inline]
pub fn fixed_prob(p0: f64) -> u64 {
    let x = (p0 * PROB_ONE as f64) as u128;
    x.clamp(PROB_FLOOR as u128, PROB_ONE - PROB_FLOOR as u128) as u64
}

/// Growable MSB-first bit string.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bytes(bytes: Vec<u8>, len: usize) -> Option<Self> {
        if len > bytes.len() * 8 || bytes.len() != len.div_ceil(8) {
            return None;
        }
        let mut s = Self { bytes, len };
        // Canonical form: bits past `len` are zero.
        if !len.is_multiple_of(8) {
            let last = s.bytes.len() - 1;
            s.bytes[last] &= 0xffu8 << (8 - len % 8);
        }
        Some(s)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.len / 8] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    /// Bit `n`, or zero past the end.
    #[inline]
    pub fn get(&self, n: usize) -> bool {
        n < self.len && self.bytes[n / 8] & (0x80 >> (n % 8)) != 0
    }

    fn trim_trailing_zeros(&mut self) {
        while self.len > 0 && !self.get(self.len - 1) {
            self.len -= 1;
        }
        self.bytes.truncate(self.len.div_ceil(8));
    }
}

pub struct Encoder {
    low: u64,
    high: u64,
    pending: u64,
    out: BitString,
}

impl Default for Encoder {
    fn default() -> Self {
        Self::new()
    }
}

impl Encoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            high: TOP - 1,
            pending: 0,
            out: BitString::new(),
        }
    }

    fn emit(&mut self, bit: bool) {
        self.out.push(bit);
        for _ in 0..self.pending {
            self.out.push(!bit);
        }
        self.pending = 0;
    }

    /// Codes `bit` where `p0` is `P(bit = 0)` from [`fixed_prob`].
    #[inline]
    pub fn encode(&mut self, bit: bool, p0: u64) {
        let range = self.high - self.low + 1;
        let split = ((range as u128 * p0 as u128) >> 64) as u64;
        if bit {
            self.low += split;
        } else {
            self.high = self.low + split - 1;
        }
        loop {
            if self.high < HALF {
                self.emit(false);
            } else if self.low >= HALF {
                self.emit(true);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < HALF + QUARTER {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
        }
    }

    pub fn finish(mut self) -> BitString {
        // Shortest k such that some k-bit prefix, zero-extended, lies in
        // [low, high].
        for k in 1..=PRECISION {
            let unit = 1u64 << (PRECISION - k);
            let v = self.low.div_ceil(unit) * unit;
            if v <= self.high {
                self.emit(v & HALF != 0);
                for b in 1..k {
                    self.out.push(v & (HALF >> b) != 0);
                }
                break;
            }
        }
        self.out.trim_trailing_zeros();
        self.out
    }
}

pub struct Decoder<'a> {
    low: u64,
    high: u64,
    value: u64,
    next: usize,
    input: &'a BitString,
}

impl<'a> Decoder<'a> {
    pub fn new(input: &'a BitString) -> Self {
        let mut value = 0u64;
        for n in 0..PRECISION as usize {
            value = (value << 1) | input.get(n) as u64;
        }
        Self {
            low: 0,
            high: TOP - 1,
            value,
            next: PRECISION as usize,
            input,
        }
    }

    #[inline]
    pub fn decode(&mut self, p0: u64) -> bool {
        let range = self.high - self.low + 1;
        let split = ((range as u128 * p0 as u128) >> 64) as u64;
        let bit = self.value - self.low >= split;
        if bit {
            self.low += split;
        } else {
            self.high = self.low + split - 1;
        }
        loop {
            if self.high < HALF {
            } else if self.low >= HALF {
                self.low -= HALF;
                self.high -= HALF;
                self.value -= HALF;
            } else if self.low >= QUARTER && self.high < HALF + QUARTER {
                self.low -= QUARTER;
                self.high -= QUARTER;
                self.value -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.value = (self.value << 1) | self.input.get(self.next) as u64;
            self.next += 1;
        }
        bit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::OracleSeed;

    fn cost(bits: &[bool], probs: &[f64]) -> f64 {
        bits.iter()
            .zip(probs)
            .map(|(&b, &p)| {
                let q = p.clamp(2f64.powi(-30), 1.0 - 2f64.powi(-30));
                -(if b { 1.0 - q } else { q }).log2()
            })
            .sum()
    }

    fn round_trip(bits: &[bool], probs: &[f64]) -> BitString {
        let mut enc = Encoder::new();
        for (&b, &p) in bits.iter().zip(probs) {
            enc.encode(b, fixed_prob(p));
        }
        let out = enc.finish();
        let mut dec = Decoder::new(&out);
        for (n, (&b, &p)) in bits.iter().zip(probs).enumerate() {
            assert_eq!(dec.decode(fixed_prob(p)), b, "bit {n}");
        }
        out
    }

    #[test]
    fn empty_message_is_empty() {
        assert!(Encoder::new().finish().is_empty());
    }

    #[test]
    fn random_messages_round_trip_within_two_bits() {
        let o = OracleSeed::new(1);
        for t in 0..300u64 {
            let n = 1 + (o.uniform(t, 0, 0) * 3000.0) as usize;
            let skew = o.uniform(t, 1, 0);
            let probs: Vec<f64> = (0..n)
                .map(|k| o.uniform(t, 2, k as u64).powf(4.0 * skew))
                .collect();
            let bits: Vec<bool> = (0..n)
                .map(|k| o.uniform(t, 3, k as u64) > probs[k])
                .collect();
            let out = round_trip(&bits, &probs);
            assert!(out.len() as f64 <= cost(&bits, &probs) + 2.0, "trial {t}");
        }
    }

    #[test]
    fn extreme_probabilities() {
        let probs = vec![1.0; 500]
            .into_iter()
            .chain(vec![0.0; 500])
            .collect::<Vec<_>>();
        let bits: Vec<bool> = (0..1000).map(|k| k >= 500).collect();
        let out = round_trip(&bits, &probs);
        assert!(out.len() <= 2);
        // Every bit against its model.
        let bits: Vec<bool> = (0..1000).map(|k| k < 500).collect();
        let out = round_trip(&bits, &probs);
        assert!(out.len() as f64 <= 30.0 * 1000.0 + 2.0);
    }

    #[test]
    fn bitstring_canonical_form() {
        let mut s = BitString::new();
        for b in [true, false, true, true, false, false, false, false, true] {
            s.push(b);
        }
        let t = BitString::from_bytes(s.as_bytes().to_vec(), s.len()).unwrap();
        assert_eq!(s, t);
        assert!(BitString::from_bytes(vec![0xff], 3).unwrap().as_bytes() == [0xe0]);
        assert!(BitString::from_bytes(vec![0, 0], 3).is_none());
        assert!(!s.get(100));
    }
}
