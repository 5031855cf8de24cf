//! The `FMGR` binary format.
//!
//! ```text
//! "FMGR" | version u8 | m u32 | U_bits u8 | delta f64 | seed u64
//! mantissa u32 | exponent u8 | payload length u32 (bits) | payload | crc32 u32
//! ```
//!
//! Integers are little-endian; the payload is MSB-first, zero-padded to a
//! byte. The CRC covers every preceding byte.

use super::coder::BitString;
use super::quant::QuantizedEstimate;
use super::sketch::{decode, encode, FishmongerSketch};
use super::FishmongerParams;
use crate::SketchError;

pub const MAGIC: &[u8; 4] = b"FMGR";
pub const VERSION: u8 = 1;

const FIXED_LEN: usize = 4 + 1 + 4 + 1 + 8 + 8;
const ESTIMATE_LEN: usize = 4 + 1;

/// Size of the fixed fields (everything except the estimate and payload), in
/// bits.
pub const HEADER_BITS: u64 = ((FIXED_LEN + 4 + 4) * 8) as u64;

impl FishmongerSketch {
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = self.params();
        let (qe, payload) = self.stored_parts();
        let mut out = Vec::with_capacity(FIXED_LEN + ESTIMATE_LEN + 8 + payload.as_bytes().len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&p.m.to_le_bytes());
        out.push(p.u_bits as u8);
        out.extend_from_slice(&p.delta.to_le_bytes());
        out.extend_from_slice(&self.seed().seed().to_le_bytes());
        out.extend_from_slice(&qe.mantissa.to_le_bytes());
        out.push(qe.exponent);
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(payload.as_bytes());
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SketchError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(SketchError::BadMagic);
        }
        let head = FIXED_LEN + ESTIMATE_LEN + 4;
        if bytes.len() < head + 4 {
            return Err(SketchError::Truncated);
        }
        if bytes[4] != VERSION {
            return Err(SketchError::UnsupportedVersion(bytes[4]));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let payload_bits = u32_at(FIXED_LEN + ESTIMATE_LEN) as usize;
        let end = head + payload_bits.div_ceil(8);
        if bytes.len() < end + 4 {
            return Err(SketchError::Truncated);
        }
        if crc32fast::hash(&bytes[..end]) != u32_at(end) {
            return Err(SketchError::Checksum);
        }
        if bytes.len() != end + 4 {
            return Err(SketchError::InvalidParams("trailing bytes".into()));
        }
        let params =
            FishmongerParams::with(u32_at(5), bytes[9] as u32, f64::from_bits(u64_at(10)))?;
        let seed = u64_at(18);
        let qe = QuantizedEstimate {
            mantissa: u32_at(FIXED_LEN),
            exponent: bytes[FIXED_LEN + 4],
            bits: params.mantissa_bits(),
        };
        if qe.mantissa as u64 >= 1 << qe.bits {
            return Err(SketchError::InvalidParams("mantissa out of range".into()));
        }
        let payload = BitString::from_bytes(bytes[head..end].to_vec(), payload_bits)
            .ok_or(SketchError::Truncated)?;
        let sketch_params = params.sketch_params();
        let model = crate::sketch::PcsaModel::new(sketch_params, &crate::OracleSeed::new(seed))?;
        let state = decode(&payload, qe.value(), &model);
        // The stored form is canonical: it must be exactly what the sketch
        // would write for the decoded state.
        if encode(&state, qe.value(), &model) != payload {
            return Err(SketchError::InvalidParams(
                "payload is not the canonical encoding of its state".into(),
            ));
        }
        let sketch = FishmongerSketch::from_state(params, seed, state)?;
        if sketch.lambda_tilde() != qe {
            return Err(SketchError::InvalidParams(
                "stored estimate does not match the decoded state".into(),
            ));
        }
        Ok(sketch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FishmongerSketch {
        let mut fs = FishmongerSketch::new(FishmongerParams::new(64).unwrap(), 11).unwrap();
        for e in 0..5000u64 {
            fs.insert(e);
        }
        fs
    }

    #[test]
    fn round_trip() {
        let fs = sample();
        let bytes = fs.to_bytes();
        let back = FishmongerSketch::from_bytes(&bytes).unwrap();
        assert_eq!(back, fs);
        assert_eq!(back.estimate(), fs.estimate());
        assert_eq!(back.to_bytes(), bytes);
        let empty = FishmongerSketch::new(FishmongerParams::new(8).unwrap(), 0).unwrap();
        let back = FishmongerSketch::from_bytes(&empty.to_bytes()).unwrap();
        assert!(back.state().is_empty());
    }

    #[test]
    fn header_size_matches_layout() {
        let fs = sample();
        let bytes = fs.to_bytes();
        let payload_bytes = fs.payload().as_bytes().len();
        assert_eq!(
            (bytes.len() - payload_bytes - ESTIMATE_LEN) as u64 * 8,
            HEADER_BITS
        );
    }

    #[test]
    fn rejects_malformed() {
        let bytes = sample().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            FishmongerSketch::from_bytes(&bad),
            Err(SketchError::BadMagic)
        ));
        assert!(matches!(
            FishmongerSketch::from_bytes(&bytes[..bytes.len() - 3]),
            Err(SketchError::Truncated)
        ));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            FishmongerSketch::from_bytes(&bad),
            Err(SketchError::UnsupportedVersion(9))
        ));
        // A wrong estimate decodes to a different state; the CRC catches it.
        let mut bad = bytes.clone();
        bad[FIXED_LEN] ^= 1;
        assert!(matches!(
            FishmongerSketch::from_bytes(&bad),
            Err(SketchError::Checksum)
        ));
        let mut bad = bytes.clone();
        bad.push(0);
        assert!(FishmongerSketch::from_bytes(&bad).is_err());
    }

    #[test]
    fn wrong_estimate_does_not_reproduce_state() {
        let fs = sample();
        let wrong = fs.lambda_tilde().value() * 1.5;
        let decoded = decode(fs.payload(), wrong, fs.model());
        assert_ne!(&decoded, fs.state());
    }
}
