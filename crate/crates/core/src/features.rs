use ndarray::Array2;

use crate::error::{Error, Result};

/// Frames × dimensions output of every front-end.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub frame_shift_ms: f64,
    pub dim_labels: Option<Vec<String>>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>, frame_shift_ms: f64) -> Self {
        Self {
            values,
            frame_shift_ms,
            dim_labels: None,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.values.ncols()
    }
}

/// Per-utterance, per-dimension mean/variance normalization.
///
/// Constant dimensions become all zeros.
pub fn feature_normalize(feat: &FeatureMatrix) -> Result<FeatureMatrix> {
    let n = feat.n_frames();
    if n < 2 {
        return Err(Error::TooFewFrames(n));
    }
    let mut values = feat.values.clone();
    for mut col in values.columns_mut() {
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            col.fill(0.0);
            continue;
        }
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let inv_std = 1.0 / var.sqrt();
        col.mapv_inplace(|v| (v - mean) * inv_std);
    }
    Ok(FeatureMatrix {
        values,
        frame_shift_ms: feat.frame_shift_ms,
        dim_labels: feat.dim_labels.clone(),
    })
}
