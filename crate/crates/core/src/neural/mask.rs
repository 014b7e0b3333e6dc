use serde::{Deserialize, Serialize};

use super::model::FeModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    /// Highest peak-to-average ratio first (narrow bandpass filters).
    Sharp,
    /// Lowest ratio first (wideband filters).
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskSpec {
    pub mode: MaskMode,
    pub count: usize,
}

/// Indices of the first-layer filters selected by `spec`, given a ranking
/// sorted by peak-to-average ratio, highest first.
pub fn select_filters(spec: MaskSpec, ranking: &[usize], filters: usize) -> Result<Vec<usize>> {
    if spec.count > filters {
        return Err(Error::BadCount {
            count: spec.count,
            filters,
        });
    }
    let mut seen = vec![false; filters];
    for &i in ranking {
        if i >= filters || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidConfig(format!(
                "ranking is not a permutation of {filters} filters"
            )));
        }
    }
    if ranking.len() != filters {
        return Err(Error::InvalidConfig(format!(
            "ranking covers {} of {filters} filters",
            ranking.len()
        )));
    }
    Ok(match spec.mode {
        MaskMode::Sharp => ranking[..spec.count].to_vec(),
        MaskMode::Soft => ranking[filters - spec.count..].to_vec(),
    })
}

/// Copy of `model` with the selected first-layer kernels zeroed. The
/// convolution has no bias, so masked channels output exactly 0.
pub fn mask_filters(model: &FeModel, spec: MaskSpec, ranking: &[usize]) -> Result<FeModel> {
    let name = model.first_layer_name();
    let taps = model.params[name].shape[2];
    let filters = model.params[name].shape[0];
    let selected = select_filters(spec, ranking, filters)?;
    let mut out = model.clone();
    let weights = &mut out.params[name].data;
    for f in selected {
        weights[f * taps..(f + 1) * taps].fill(0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sharp_takes_prefix_soft_takes_suffix() {
        let ranking = [3, 0, 2, 1];
        let sharp = MaskSpec { mode: MaskMode::Sharp, count: 2 };
        let soft = MaskSpec { mode: MaskMode::Soft, count: 1 };
        assert_eq!(select_filters(sharp, &ranking, 4).unwrap(), [3, 0]);
        assert_eq!(select_filters(soft, &ranking, 4).unwrap(), [1]);
    }

    #[test]
    fn rejects_bad_counts_and_rankings() {
        let spec = MaskSpec { mode: MaskMode::Sharp, count: 5 };
        assert!(matches!(select_filters(spec, &[0, 1, 2, 3], 4), Err(Error::BadCount { count: 5, filters: 4 })));
        let spec = MaskSpec { mode: MaskMode::Sharp, count: 1 };
        assert!(matches!(select_filters(spec, &[0, 1, 1, 3], 4), Err(Error::InvalidConfig(_))));
        assert!(matches!(select_filters(spec, &[0, 1], 4), Err(Error::InvalidConfig(_))));
    }
}
