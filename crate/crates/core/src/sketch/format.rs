//! The `FSKT` binary format.
//!
//! ```text
//! "FSKT" | version u8 | kind u8 | q f64 | m u32 | W u32 | offsets u8 | seed u64
//! payload | [estimate f64, martingale kinds only] | crc32 u32
//! ```
//!
//! All integers little-endian. The PCSA payload is the `m x W` matrix,
//! row-major, LSB-first, padded to a byte; the LogLog payload is `m` `u16`
//! registers. The CRC covers every preceding byte.

use std::fmt;
use std::str::FromStr;

use crate::estimate::{ll_mle, pcsa_mle, Estimate, Method};
use crate::oracle::{ElementId, OracleSeed};
use crate::sketch::{
    LlSketch, LlState, MartingaleSketch, OffsetMode, PcsaSketch, PcsaState, SketchParams,
};
use crate::SketchError;

pub const MAGIC: &[u8; 4] = b"FSKT";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 4 + 1 + 1 + 8 + 4 + 4 + 1 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SketchKind {
    Pcsa,
    Ll,
    MartingalePcsa,
    MartingaleLl,
}

impl SketchKind {
    pub fn code(self) -> u8 {
        match self {
            SketchKind::Pcsa => 0,
            SketchKind::Ll => 1,
            SketchKind::MartingalePcsa => 2,
            SketchKind::MartingaleLl => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, SketchError> {
        Ok(match code {
            0 => SketchKind::Pcsa,
            1 => SketchKind::Ll,
            2 => SketchKind::MartingalePcsa,
            3 => SketchKind::MartingaleLl,
            other => return Err(SketchError::UnknownKind(other)),
        })
    }
}

impl fmt::Display for SketchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SketchKind::Pcsa => "pcsa",
            SketchKind::Ll => "ll",
            SketchKind::MartingalePcsa => "martingale-pcsa",
            SketchKind::MartingaleLl => "martingale-ll",
        })
    }
}

impl FromStr for SketchKind {
    type Err = SketchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "pcsa" => SketchKind::Pcsa,
            "ll" => SketchKind::Ll,
            "martingale-pcsa" => SketchKind::MartingalePcsa,
            "martingale-ll" => SketchKind::MartingaleLl,
            other => {
                return Err(SketchError::InvalidParams(format!(
                    "unknown sketch kind `{other}`"
                )))
            }
        })
    }
}

/// Any sketch that can live in an `FSKT` file.
#[derive(Clone, Debug, PartialEq)]
pub enum AnySketch {
    Pcsa(PcsaSketch),
    Ll(LlSketch),
    MartingalePcsa(MartingaleSketch<PcsaSketch>),
    MartingaleLl(MartingaleSketch<LlSketch>),
}

impl AnySketch {
    pub fn new(kind: SketchKind, params: SketchParams, seed: u64) -> Result<Self, SketchError> {
        Ok(match kind {
            SketchKind::Pcsa => AnySketch::Pcsa(PcsaSketch::new(params, seed)?),
            SketchKind::Ll => AnySketch::Ll(LlSketch::new(params, seed)?),
            SketchKind::MartingalePcsa => {
                AnySketch::MartingalePcsa(MartingaleSketch::new(PcsaSketch::new(params, seed)?))
            }
            SketchKind::MartingaleLl => {
                AnySketch::MartingaleLl(MartingaleSketch::new(LlSketch::new(params, seed)?))
            }
        })
    }

    pub fn kind(&self) -> SketchKind {
        match self {
            AnySketch::Pcsa(_) => SketchKind::Pcsa,
            AnySketch::Ll(_) => SketchKind::Ll,
            AnySketch::MartingalePcsa(_) => SketchKind::MartingalePcsa,
            AnySketch::MartingaleLl(_) => SketchKind::MartingaleLl,
        }
    }

    pub fn params(&self) -> &SketchParams {
        match self {
            AnySketch::Pcsa(s) => s.params(),
            AnySketch::Ll(s) => s.params(),
            AnySketch::MartingalePcsa(s) => s.inner().params(),
            AnySketch::MartingaleLl(s) => s.inner().params(),
        }
    }

    pub fn seed(&self) -> OracleSeed {
        match self {
            AnySketch::Pcsa(s) => s.seed(),
            AnySketch::Ll(s) => s.seed(),
            AnySketch::MartingalePcsa(s) => s.inner().seed(),
            AnySketch::MartingaleLl(s) => s.inner().seed(),
        }
    }

    pub fn insert(&mut self, element: ElementId) -> bool {
        match self {
            AnySketch::Pcsa(s) => s.insert(element),
            AnySketch::Ll(s) => s.insert(element),
            AnySketch::MartingalePcsa(s) => s.insert(element),
            AnySketch::MartingaleLl(s) => s.insert(element),
        }
    }

    pub fn insert_poissonized(&mut self, element: ElementId) -> bool {
        match self {
            AnySketch::Pcsa(s) => s.insert_poissonized(element),
            AnySketch::Ll(s) => s.insert_poissonized(element),
            AnySketch::MartingalePcsa(s) => s.insert_poissonized(element),
            AnySketch::MartingaleLl(s) => s.insert_poissonized(element),
        }
    }

    /// Maximum likelihood for plain sketches, the running estimate for
    /// martingale ones.
    pub fn estimate(&self) -> Estimate {
        match self {
            AnySketch::Pcsa(s) => pcsa_mle(s.state(), s.model()),
            AnySketch::Ll(s) => ll_mle(s.state(), s.model()),
            AnySketch::MartingalePcsa(s) => Estimate::new(s.estimate(), Method::Martingale),
            AnySketch::MartingaleLl(s) => Estimate::new(s.estimate(), Method::Martingale),
        }
    }

    /// Union. Martingale sketches depend on insertion order and do not merge.
    pub fn merge(&mut self, other: &AnySketch) -> Result<(), SketchError> {
        match (self, other) {
            (AnySketch::Pcsa(a), AnySketch::Pcsa(b)) => a.merge(b),
            (AnySketch::Ll(a), AnySketch::Ll(b)) => a.merge(b),
            (AnySketch::MartingalePcsa(_), _) | (AnySketch::MartingaleLl(_), _) => Err(
                SketchError::InvalidParams("martingale sketches cannot be merged".into()),
            ),
            _ => Err(SketchError::KindMismatch),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let params = self.params();
        let mut out = Vec::with_capacity(HEADER_LEN + 64);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.kind().code());
        out.extend_from_slice(&params.q.to_le_bytes());
        out.extend_from_slice(&params.m.to_le_bytes());
        out.extend_from_slice(&params.w.to_le_bytes());
        out.push(params.offsets.code());
        out.extend_from_slice(&self.seed().seed().to_le_bytes());
        match self {
            AnySketch::Pcsa(s) => write_pcsa(&mut out, s.state()),
            AnySketch::Ll(s) => write_ll(&mut out, s.state()),
            AnySketch::MartingalePcsa(s) => {
                write_pcsa(&mut out, s.inner().state());
                out.extend_from_slice(&s.estimate().to_le_bytes());
            }
            AnySketch::MartingaleLl(s) => {
                write_ll(&mut out, s.inner().state());
                out.extend_from_slice(&s.estimate().to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SketchError> {
        if bytes.len() < 4 {
            return Err(SketchError::Truncated);
        }
        if &bytes[..4] != MAGIC {
            return Err(SketchError::BadMagic);
        }
        if bytes.len() < HEADER_LEN + 4 {
            return Err(SketchError::Truncated);
        }
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        let mut r = Reader { buf: &body[4..] };
        let version = r.u8()?;
        if version != VERSION {
            return Err(SketchError::UnsupportedVersion(version));
        }
        let kind = SketchKind::from_code(r.u8()?)?;
        if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().unwrap()) {
            return Err(SketchError::Checksum);
        }
        let q = r.f64()?;
        let m = r.u32()?;
        let w = r.u32()?;
        let offsets = OffsetMode::from_code(r.u8()?)
            .ok_or_else(|| SketchError::InvalidParams("unknown offset mode".into()))?;
        let seed = r.u64()?;
        let params = SketchParams::with_width(q, m, w, offsets)?;
        let sketch = match kind {
            SketchKind::Pcsa => AnySketch::Pcsa(PcsaSketch::from_state(
                params,
                seed,
                read_pcsa(&mut r, m, w)?,
            )?),
            SketchKind::Ll => {
                AnySketch::Ll(LlSketch::from_state(params, seed, read_ll(&mut r, m, w)?)?)
            }
            SketchKind::MartingalePcsa => {
                let inner = PcsaSketch::from_state(params, seed, read_pcsa(&mut r, m, w)?)?;
                AnySketch::MartingalePcsa(MartingaleSketch::from_parts(inner, r.f64()?))
            }
            SketchKind::MartingaleLl => {
                let inner = LlSketch::from_state(params, seed, read_ll(&mut r, m, w)?)?;
                AnySketch::MartingaleLl(MartingaleSketch::from_parts(inner, r.f64()?))
            }
        };
        if !r.buf.is_empty() {
            return Err(SketchError::InvalidParams(
                "trailing bytes after payload".into(),
            ));
        }
        Ok(sketch)
    }
}

fn write_pcsa(out: &mut Vec<u8>, state: &PcsaState) {
    let total = state.rows() as usize * state.cols() as usize;
    let start = out.len();
    out.resize(start + total.div_ceil(8), 0);
    for (n, (_, _, bit)) in state.cells().enumerate() {
        if bit {
            out[start + n / 8] |= 1 << (n % 8);
        }
    }
}

fn read_pcsa(r: &mut Reader<'_>, m: u32, w: u32) -> Result<PcsaState, SketchError> {
    let total = m as usize * w as usize;
    let bytes = r.take(total.div_ceil(8))?;
    Ok(PcsaState::from_fn(m, w, |i, j| {
        let n = i as usize * w as usize + j as usize;
        bytes[n / 8] >> (n % 8) & 1 == 1
    }))
}

fn write_ll(out: &mut Vec<u8>, state: &LlState) {
    for &r in state.registers() {
        out.extend_from_slice(&r.to_le_bytes());
    }
}

fn read_ll(r: &mut Reader<'_>, m: u32, w: u32) -> Result<LlState, SketchError> {
    let bytes = r.take(2 * m as usize)?;
    let regs = bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    LlState::from_registers(regs, w)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SketchError> {
        if self.buf.len() < n {
            return Err(SketchError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, SketchError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, SketchError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, SketchError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, SketchError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
