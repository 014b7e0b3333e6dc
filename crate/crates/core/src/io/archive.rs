use std::collections::HashSet;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{FeConfig, FeKind, FeModel, Tensor};

pub const ARCHIVE_MAGIC: [u8; 4] = *b"RFE1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the payload.
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveHeader {
    pub format_version: u32,
    pub kind: FeKind,
    pub config: FeConfig,
    pub tensors: Vec<TensorEntry>,
}

/// `RFE1`, header length (u32 LE), JSON header, then f32 LE tensors.
pub fn encode_archive(model: &FeModel) -> Result<Vec<u8>> {
    let mut offset = 0u64;
    let tensors = model
        .params
        .iter()
        .map(|(name, t)| {
            let e = TensorEntry {
                name: name.clone(),
                shape: t.shape.clone(),
                offset,
            };
            offset += 4 * t.len() as u64;
            e
        })
        .collect();
    let header = ArchiveHeader {
        format_version: FORMAT_VERSION,
        kind: model.kind(),
        config: model.config.clone(),
        tensors,
    };
    let text = serde_json::to_vec(&header).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let header_len = u32::try_from(text.len()).map_err(|_| Error::InvalidConfig("header too large".into()))?;
    let mut out = Vec::with_capacity(8 + text.len() + offset as usize);
    out.extend_from_slice(&ARCHIVE_MAGIC);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&text);
    for t in model.params.values() {
        for &v in &t.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

fn is_projection(name: &str) -> bool {
    name.starts_with("projection.")
}

/// Parses and validates an archive. Projection tensors are dropped when
/// the config echo disables the projection.
pub fn decode_archive(bytes: &[u8]) -> Result<FeModel> {
    if bytes.len() < 8 {
        return Err(Error::TruncatedPayload {
            needed: 8,
            have: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if found != ARCHIVE_MAGIC {
        return Err(Error::MagicMismatch {
            expected: ARCHIVE_MAGIC,
            found,
        });
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let payload_start = 8 + header_len;
    if bytes.len() < payload_start {
        return Err(Error::TruncatedPayload {
            needed: payload_start,
            have: bytes.len(),
        });
    }
    let header: ArchiveHeader = serde_json::from_slice(&bytes[8..payload_start])
        .map_err(|e| Error::CorruptFile(format!("archive header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedFormat(format!(
            "archive format version {}",
            header.format_version
        )));
    }
    if header.kind != header.config.kind() {
        return Err(Error::ShapeMismatch(format!(
            "header kind {:?} disagrees with config kind {:?}",
            header.kind,
            header.config.kind()
        )));
    }
    let payload = &bytes[payload_start..];

    let mut names = HashSet::new();
    let mut spans = Vec::with_capacity(header.tensors.len());
    for e in &header.tensors {
        if !names.insert(e.name.as_str()) {
            return Err(Error::CorruptFile(format!("duplicate tensor {}", e.name)));
        }
        let count = e
            .shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::CorruptFile(format!("{}: shape overflows", e.name)))?;
        let start = usize::try_from(e.offset).map_err(|_| Error::CorruptFile("offset overflows".into()))?;
        let end = count
            .checked_mul(4)
            .and_then(|n| n.checked_add(start))
            .ok_or_else(|| Error::CorruptFile(format!("{}: extent overflows", e.name)))?;
        if start % 4 != 0 {
            return Err(Error::CorruptFile(format!("{}: misaligned offset {start}", e.name)));
        }
        if end > payload.len() {
            return Err(Error::TruncatedPayload {
                needed: payload_start + end,
                have: bytes.len(),
            });
        }
        spans.push((start, end));
    }
    let mut sorted = spans.clone();
    sorted.sort_unstable();
    let mut covered = 0;
    for &(start, end) in &sorted {
        if start < covered {
            return Err(Error::CorruptFile("overlapping tensor data".into()));
        }
        if start > covered {
            return Err(Error::CorruptFile(format!("unreferenced payload bytes at {covered}")));
        }
        covered = end;
    }
    if covered != payload.len() {
        return Err(Error::CorruptFile(format!(
            "{} trailing payload bytes",
            payload.len() - covered
        )));
    }

    let keep_projection = match &header.config {
        FeConfig::W2v(c) => c.include_projection,
        FeConfig::Sc(_) => true,
    };
    let mut params = IndexMap::new();
    for (e, &(start, end)) in header.tensors.iter().zip(&spans) {
        if !keep_projection && is_projection(&e.name) {
            continue;
        }
        let data = payload[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        params.insert(e.name.clone(), Tensor::new(e.shape.clone(), data)?);
    }
    FeModel::from_parts(header.config, params)
}

pub fn save_weights(model: &FeModel, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, encode_archive(model)?)?)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<FeModel> {
    decode_archive(&std::fs::read(path)?)
}
