//! Floating-point quantization of the stored estimate.

/// Exponent bias. Stored exponent zero is reserved for the value 0.
const BIAS: i32 = 128;

/// `(1 + mantissa / 2^bits) 2^(exponent - 128)`, or 0 when `exponent == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuantizedEstimate {
    pub mantissa: u32,
    pub exponent: u8,
    pub bits: u8,
}

impl QuantizedEstimate {
    pub const fn zero(bits: u8) -> Self {
        Self {
            mantissa: 0,
            exponent: 0,
            bits,
        }
    }

    /// Smallest representable value `>= lambda`. `lambda` must be 0 or lie
    /// in `[2^-127, 2^127)`.
    pub fn round_up(lambda: f64, bits: u8) -> Self {
        assert!(bits <= 31, "mantissa width {bits} exceeds 31 bits");
        if lambda == 0.0 {
            return Self::zero(bits);
        }
        assert!(lambda.is_finite() && lambda > 0.0);
        let mut e = lambda.log2().floor() as i32;
        // log2 can be off by one ulp near powers of two.
        if 2f64.powi(e) > lambda {
            e -= 1;
        } else if 2f64.powi(e + 1) <= lambda {
            e += 1;
        }
        let frac = lambda / 2f64.powi(e);
        // Exact: frac - 1 has at most 52 significant bits.
        let mut mantissa = ((frac - 1.0) * 2f64.powi(bits as i32)).ceil() as u64;
        if mantissa == 1 << bits {
            mantissa = 0;
            e += 1;
        }
        let exponent = e + BIAS;
        assert!(
            (1..=255).contains(&exponent),
            "estimate {lambda} outside the quantizer range"
        );
        Self {
            mantissa: mantissa as u32,
            exponent: exponent as u8,
            bits,
        }
    }

    pub fn value(&self) -> f64 {
        if self.exponent == 0 {
            return 0.0;
        }
        (1.0 + self.mantissa as f64 / 2f64.powi(self.bits as i32))
            * 2f64.powi(self.exponent as i32 - BIAS)
    }

    /// Bits charged for storing this estimate.
    pub fn size_bits(&self) -> u64 {
        self.bits as u64 + 8
    }
}

/// Mantissa width `ceil(log2(m U_bits))`.
pub fn mantissa_bits(m: u32, u_bits: u32) -> u8 {
    let m_prime = m as u64 * u_bits as u64;
    (64 - (m_prime - 1).leading_zeros()).max(1) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::OracleSeed;

    #[test]
    fn widths() {
        assert_eq!(mantissa_bits(256, 64), 14);
        assert_eq!(mantissa_bits(1024, 64), 16);
        assert_eq!(mantissa_bits(3, 64), 8);
        assert_eq!(mantissa_bits(1, 1), 1);
    }

    #[test]
    fn zero_and_powers_of_two() {
        let z = QuantizedEstimate::round_up(0.0, 14);
        assert_eq!(z.value(), 0.0);
        for e in -30..60 {
            let x = 2f64.powi(e);
            assert_eq!(QuantizedEstimate::round_up(x, 14).value(), x);
        }
    }

    #[test]
    fn rounds_up_within_one_part_in_m_prime() {
        let o = OracleSeed::new(5);
        for (m, u) in [(256u32, 64u32), (1024, 64), (7, 32)] {
            let bits = mantissa_bits(m, u);
            let m_prime = (m * u) as f64;
            for k in 0..20_000u64 {
                let x = 2f64.powf(-30.0 + 95.0 * o.uniform(k, m, 0));
                let v = QuantizedEstimate::round_up(x, bits).value();
                assert!(v >= x && v <= x * (1.0 + 1.0 / m_prime), "{x} -> {v}");
            }
        }
    }

    #[test]
    fn carry_into_exponent() {
        let x = 2.0 - 1e-12;
        let q = QuantizedEstimate::round_up(x, 8);
        assert_eq!(q.value(), 2.0);
        assert_eq!(q.mantissa, 0);
    }
}
