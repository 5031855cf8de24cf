//! Merging serialized sketches.

use std::path::Path;

use crate::fishmonger::{self, FishmongerSketch};
use crate::sketch::{format, AnySketch};
use crate::SketchError;

/// A sketch file of either format.
#[derive(Clone, Debug)]
pub enum SketchFile {
    Plain(AnySketch),
    Fishmonger(FishmongerSketch),
}

impl SketchFile {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SketchError> {
        if bytes.starts_with(fishmonger::MAGIC) {
            Ok(SketchFile::Fishmonger(FishmongerSketch::from_bytes(bytes)?))
        } else if bytes.starts_with(format::MAGIC) {
            Ok(SketchFile::Plain(AnySketch::from_bytes(bytes)?))
        } else {
            Err(SketchError::BadMagic)
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            SketchFile::Plain(s) => s.to_bytes(),
            SketchFile::Fishmonger(s) => s.to_bytes(),
        }
    }

    pub fn merge(&mut self, other: &SketchFile) -> Result<(), SketchError> {
        match (self, other) {
            (SketchFile::Plain(a), SketchFile::Plain(b)) => a.merge(b),
            (SketchFile::Fishmonger(a), SketchFile::Fishmonger(b)) => {
                *a = a.merged(b)?;
                Ok(())
            }
            _ => Err(SketchError::KindMismatch),
        }
    }
}

/// Folds the union over the sketches stored in `paths`.
pub fn merge_files<P: AsRef<Path>>(paths: &[P]) -> Result<SketchFile, SketchError> {
    let (first, rest) = paths
        .split_first()
        .ok_or_else(|| SketchError::InvalidParams("no input files".into()))?;
    let mut acc = SketchFile::from_bytes(&std::fs::read(first)?)?;
    for p in rest {
        acc.merge(&SketchFile::from_bytes(&std::fs::read(p)?)?)?;
    }
    Ok(acc)
}
