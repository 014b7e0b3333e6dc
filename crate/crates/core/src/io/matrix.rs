use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const FEATURE_MAGIC: [u8; 4] = *b"RFM1";

/// A matrix read back from CSV along with its header metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMatrix {
    pub values: Array2<f64>,
    pub shift_ms: f64,
    pub labels: Vec<String>,
    /// Extra `key=value` pairs from the header line, in file order.
    pub meta: Vec<(String, String)>,
}

/// Writes `# rows=R cols=C shift_ms=S [k=v ...]`, a column label line,
/// then one comma-separated row per line at 9 significant digits.
pub fn write_matrix_csv(
    values: &Array2<f64>,
    shift_ms: f64,
    labels: Option<&[String]>,
    meta: &[(&str, String)],
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, format_matrix_csv(values, shift_ms, labels, meta)?)?;
    Ok(())
}

pub(crate) fn format_matrix_csv(
    values: &Array2<f64>,
    shift_ms: f64,
    labels: Option<&[String]>,
    meta: &[(&str, String)],
) -> Result<String> {
    let (rows, cols) = values.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix);
    }
    if let Some(l) = labels {
        if l.len() != cols {
            return Err(Error::ShapeMismatch(format!("{} labels for {cols} columns", l.len())));
        }
    }
    let mut s = format!("# rows={rows} cols={cols} shift_ms={shift_ms}");
    for (k, v) in meta {
        s.push_str(&format!(" {k}={v}"));
    }
    s.push('\n');
    let default_labels: Vec<String>;
    let labels = match labels {
        Some(l) => l,
        None => {
            default_labels = (0..cols).map(|c| format!("d{c}")).collect();
            &default_labels
        }
    };
    s.push_str(&labels.join(","));
    s.push('\n');
    for row in values.outer_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    Ok(s)
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<CsvMatrix> {
    parse_matrix_csv(&std::fs::read_to_string(path)?)
}

pub(crate) fn parse_matrix_csv(text: &str) -> Result<CsvMatrix> {
    let corrupt = |m: String| Error::CorruptFile(m);
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| corrupt("missing '# rows=' header".into()))?;
    let (mut rows, mut cols, mut shift) = (None, None, None);
    let mut meta = Vec::new();
    for kv in header.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| corrupt(format!("bad header field {kv}")))?;
        match k {
            "rows" => rows = v.parse::<usize>().ok(),
            "cols" => cols = v.parse::<usize>().ok(),
            "shift_ms" => shift = v.parse::<f64>().ok(),
            _ => meta.push((k.to_string(), v.to_string())),
        }
    }
    let (rows, cols, shift_ms) = match (rows, cols, shift) {
        (Some(r), Some(c), Some(s)) => (r, c, s),
        _ => return Err(corrupt("header needs rows, cols and shift_ms".into())),
    };
    let labels: Vec<String> = lines
        .next()
        .ok_or_else(|| corrupt("missing label line".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    if labels.len() != cols {
        return Err(corrupt(format!("{} labels for {cols} columns", labels.len())));
    }
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for line in lines {
        let before = data.len();
        for cell in line.split(',') {
            data.push(cell.trim().parse::<f64>().map_err(|e| corrupt(format!("{cell:?}: {e}")))?);
        }
        if data.len() - before != cols {
            return Err(corrupt(format!("row {seen} has {} cells", data.len() - before)));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(corrupt(format!("header declares {rows} rows, found {seen}")));
    }
    let values = Array2::from_shape_vec((rows, cols), data).expect("counted cells");
    Ok(CsvMatrix {
        values,
        shift_ms,
        labels,
        meta,
    })
}

/// `RFM1`, rows (u32), cols (u32), shift in ms (f32), then f32 row-major,
/// all little-endian.
pub fn encode_feature_binary(feat: &FeatureMatrix) -> Result<Vec<u8>> {
    let (rows, cols) = feat.values.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix);
    }
    let dim = |n: usize| u32::try_from(n).map_err(|_| Error::ShapeMismatch(format!("{n} exceeds u32")));
    let mut out = Vec::with_capacity(16 + 4 * rows * cols);
    out.extend_from_slice(&FEATURE_MAGIC);
    out.extend_from_slice(&dim(rows)?.to_le_bytes());
    out.extend_from_slice(&dim(cols)?.to_le_bytes());
    out.extend_from_slice(&(feat.frame_shift_ms as f32).to_le_bytes());
    for v in feat.values.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_feature_binary(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < 16 {
        return Err(Error::TruncatedPayload {
            needed: 16,
            have: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if found != FEATURE_MAGIC {
        return Err(Error::MagicMismatch {
            expected: FEATURE_MAGIC,
            found,
        });
    }
    let word = |at: usize| <[u8; 4]>::try_from(&bytes[at..at + 4]).expect("4 bytes");
    let rows = u32::from_le_bytes(word(4)) as usize;
    let cols = u32::from_le_bytes(word(8)) as usize;
    let shift = f32::from_le_bytes(word(12)) as f64;
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix);
    }
    let needed = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(16))
        .ok_or_else(|| Error::CorruptFile("dimensions overflow".into()))?;
    if bytes.len() < needed {
        return Err(Error::TruncatedPayload {
            needed,
            have: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::CorruptFile(format!("{} trailing bytes", bytes.len() - needed)));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let values = Array2::from_shape_vec((rows, cols), data).expect("sized payload");
    Ok(FeatureMatrix::new(values, shift))
}

pub fn write_feature_binary(feat: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, encode_feature_binary(feat)?)?)
}

pub fn read_feature_binary(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    decode_feature_binary(&std::fs::read(path)?)
}
