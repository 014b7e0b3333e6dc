use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    None,
    /// One group per channel: statistics over time.
    Group,
    /// Statistics over channels per frame.
    Layer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Gelu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub norm: NormKind,
    pub activation: Activation,
    pub pointwise: bool,
}

impl ConvLayerSpec {
    fn conv(kernel: usize, stride: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            kernel,
            stride,
            in_channels,
            out_channels,
            norm: NormKind::None,
            activation: Activation::Gelu,
            pointwise: false,
        }
    }

    fn pointwise(channels: usize) -> Self {
        Self {
            pointwise: true,
            ..Self::conv(1, 1, channels, channels)
        }
    }
}

/// A wav2vec 2.0 style convolutional feature encoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStackConfig {
    pub layers: Vec<ConvLayerSpec>,
    pub final_layer_norm: bool,
    pub projection_dim: Option<usize>,
    pub include_projection: bool,
}

pub const DEFAULT_PROJECTION_DIM: usize = 768;

impl ConvStackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.layers.is_empty() {
            return bad("no layers".into());
        }
        if self.layers[0].in_channels != 1 {
            return bad("first layer must read one input channel".into());
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.kernel == 0 || l.stride == 0 || l.in_channels == 0 || l.out_channels == 0 {
                return bad(format!("layer {i} has a zero dimension"));
            }
            if l.pointwise && (l.kernel != 1 || l.stride != 1) {
                return bad(format!("pointwise layer {i} must have kernel 1 and stride 1"));
            }
            if i > 0 && self.layers[i - 1].out_channels != l.in_channels {
                return bad(format!("layer {i} input channels do not chain"));
            }
        }
        if self.projection_dim == Some(0) {
            return bad("projection dimension 0".into());
        }
        Ok(())
    }

    pub fn output_channels(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_channels)
    }

    pub fn projection_dim(&self) -> usize {
        self.projection_dim.unwrap_or(DEFAULT_PROJECTION_DIM)
    }

    pub fn output_dim(&self) -> usize {
        if self.include_projection {
            self.projection_dim()
        } else {
            self.output_channels()
        }
    }

    /// Builds a stack from kernels, strides and per-layer widths. Group norm
    /// on the first layer, GELU everywhere, final layer norm and projection.
    pub fn from_layers(kernels: &[usize], strides: &[usize], dims: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(kernels.len());
        let mut c_in = 1;
        for ((&k, &s), &d) in kernels.iter().zip(strides).zip(dims) {
            layers.push(ConvLayerSpec::conv(k, s, c_in, d));
            c_in = d;
        }
        layers[0].norm = NormKind::Group;
        Self {
            layers,
            final_layer_norm: true,
            projection_dim: Some(DEFAULT_PROJECTION_DIM),
            include_projection: true,
        }
    }

    /// Inserts a pointwise layer of matching width after every layer but the first.
    pub fn with_pointwise_layers(mut self) -> Self {
        let mut layers = Vec::with_capacity(self.layers.len() * 2);
        for (i, l) in self.layers.into_iter().enumerate() {
            let width = l.out_channels;
            layers.push(l);
            if i > 0 {
                layers.push(ConvLayerSpec::pointwise(width));
            }
        }
        self.layers = layers;
        self
    }
}

/// Supervised-convolutional features: a learned filterbank followed by
/// shared multi-resolution temporal integration filters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScConfig {
    pub fb_size: usize,
    pub fb_stride: usize,
    pub fb_channels: usize,
    pub n_integration: usize,
    pub int_size: usize,
    pub int_stride: usize,
    pub output_dim: usize,
}

impl Default for ScConfig {
    fn default() -> Self {
        Self {
            fb_size: 160,
            fb_stride: 10,
            fb_channels: 150,
            n_integration: 5,
            int_size: 40,
            int_stride: 16,
            output_dim: 750,
        }
    }
}

impl ScConfig {
    pub fn with_channels(fb_channels: usize) -> Self {
        let base = Self::default();
        Self {
            fb_channels,
            output_dim: fb_channels * base.n_integration,
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.fb_size,
            self.fb_stride,
            self.fb_channels,
            self.n_integration,
            self.int_size,
            self.int_stride,
        ];
        if dims.contains(&0) {
            return Err(Error::InvalidConfig("SC configuration has a zero dimension".into()));
        }
        if self.output_dim != self.fb_channels * self.n_integration {
            return Err(Error::InvalidConfig(format!(
                "output_dim {} != {} channels x {} integration filters",
                self.output_dim, self.fb_channels, self.n_integration
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeConfig {
    W2v(ConvStackConfig),
    Sc(ScConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeKind {
    W2v,
    Sc,
}

impl FeConfig {
    pub fn kind(&self) -> FeKind {
        match self {
            FeConfig::W2v(_) => FeKind::W2v,
            FeConfig::Sc(_) => FeKind::Sc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FeConfig::W2v(c) => c.validate(),
            FeConfig::Sc(c) => c.validate(),
        }
    }

    /// `(kernel, stride)` of every layer that moves along time.
    pub fn time_layers(&self) -> Vec<(usize, usize)> {
        match self {
            FeConfig::W2v(c) => c.layers.iter().map(|l| (l.kernel, l.stride)).collect(),
            FeConfig::Sc(c) => vec![(c.fb_size, c.fb_stride), (c.int_size, c.int_stride)],
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FeConfig::W2v(c) => c.output_dim(),
            FeConfig::Sc(c) => c.output_dim,
        }
    }
}

const K6: [usize; 6] = [10, 3, 3, 3, 3, 2];
const S6: [usize; 6] = [5, 2, 2, 2, 2, 2];

/// Every wav2vec 2.0 preset name accepted by [`preset_config`].
pub const W2V_PRESETS: &[&str] = &[
    "w2v7",
    "w2v6@1024",
    "w2v6@512",
    "w2v6@256",
    "w2v6@128",
    "w2v6@64",
    "w2v5@512",
    "w2v5@64",
    "w2v4@512",
    "w2v4@64",
    "w2v3@512",
    "w2v3@64",
    "w2v2@512",
    "w2v2@64",
    "w2v6-prog64-512",
    "w2v6-prog128-1024",
    "w2v11-prog128-1024",
    "w2v1",
];

/// Width/depth variants of the wav2vec 2.0 feature encoder.
pub fn preset_config(name: &str) -> Result<ConvStackConfig> {
    let unknown = || Error::UnknownPreset(name.to_string());
    let uniform = |k: &[usize], s: &[usize], d: usize| ConvStackConfig::from_layers(k, s, &vec![d; k.len()]);
    let cfg = match name {
        "w2v7" => uniform(&[10, 3, 3, 3, 3, 2, 2], &[5, 2, 2, 2, 2, 2, 2], 512),
        "w2v1" => uniform(&[320], &[160], 512),
        "w2v6-prog64-512" => ConvStackConfig::from_layers(&K6, &S6, &progressive(64)),
        "w2v6-prog128-1024" => ConvStackConfig::from_layers(&K6, &S6, &progressive(128)),
        "w2v11-prog128-1024" => ConvStackConfig::from_layers(&K6, &S6, &progressive(128)).with_pointwise_layers(),
        _ => {
            let (depth, dim) = name
                .strip_prefix("w2v")
                .and_then(|rest| rest.split_once('@'))
                .ok_or_else(unknown)?;
            let dim: usize = dim.parse().map_err(|_| unknown())?;
            let (kernels, strides, dims): (&[usize], &[usize], &[usize]) = match depth {
                "6" => (&K6, &S6, &[64, 128, 256, 512, 1024]),
                "5" => (&[10, 6, 3, 3, 3], &[5, 4, 2, 2, 2], &[64, 512]),
                "4" => (&[10, 6, 6, 3], &[5, 4, 4, 2], &[64, 512]),
                "3" => (&[20, 6, 6], &[10, 4, 4], &[64, 512]),
                "2" => (&[32, 20], &[16, 10], &[64, 512]),
                _ => return Err(unknown()),
            };
            if !dims.contains(&dim) {
                return Err(unknown());
            }
            uniform(kernels, strides, dim)
        }
    };
    Ok(cfg)
}

/// First width `base`, doubled after each odd-indexed (1-based) layer.
fn progressive(base: usize) -> [usize; 6] {
    [base, 2 * base, 2 * base, 4 * base, 4 * base, 8 * base]
}

/// Resolves any trainable front-end preset: the wav2vec 2.0 variants plus
/// `sc` (150 channels) and `sc-small` (16 channels).
pub fn model_preset(name: &str) -> Result<FeConfig> {
    match name {
        "sc" => Ok(FeConfig::Sc(ScConfig::default())),
        "sc-small" => Ok(FeConfig::Sc(ScConfig::with_channels(16))),
        _ => preset_config(name).map(FeConfig::W2v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernels(c: &ConvStackConfig) -> Vec<usize> {
        c.layers.iter().map(|l| l.kernel).collect()
    }

    fn strides(c: &ConvStackConfig) -> Vec<usize> {
        c.layers.iter().map(|l| l.stride).collect()
    }

    #[test]
    fn base_encoder() {
        let c = preset_config("w2v7").unwrap();
        assert_eq!(kernels(&c), [10, 3, 3, 3, 3, 2, 2]);
        assert_eq!(strides(&c), [5, 2, 2, 2, 2, 2, 2]);
        assert!(c.layers.iter().all(|l| l.out_channels == 512));
        assert_eq!(c.layers[0].norm, NormKind::Group);
        assert!(c.layers[1..].iter().all(|l| l.norm == NormKind::None));
        c.validate().unwrap();
    }

    #[test]
    fn shallow_variants() {
        let c = preset_config("w2v3@512").unwrap();
        assert_eq!(kernels(&c), [20, 6, 6]);
        assert_eq!(strides(&c), [10, 4, 4]);
        let c = preset_config("w2v1").unwrap();
        assert_eq!((kernels(&c), strides(&c)), (vec![320], vec![160]));
        let c = preset_config("w2v2@64").unwrap();
        assert_eq!((kernels(&c), strides(&c)), (vec![32, 20], vec![16, 10]));
    }

    #[test]
    fn progressive_widths() {
        let c = preset_config("w2v6-prog64-512").unwrap();
        let dims: Vec<usize> = c.layers.iter().map(|l| l.out_channels).collect();
        assert_eq!(dims, [64, 128, 128, 256, 256, 512]);
        let c = preset_config("w2v11-prog128-1024").unwrap();
        assert_eq!(c.layers.len(), 11);
        let pw: Vec<usize> = c.layers.iter().filter(|l| l.pointwise).map(|l| l.out_channels).collect();
        assert_eq!(pw, [256, 256, 512, 512, 1024]);
        assert!(!c.layers[1].pointwise && c.layers[2].pointwise);
        c.validate().unwrap();
    }

    #[test]
    fn every_listed_preset_resolves() {
        for name in W2V_PRESETS {
            preset_config(name).unwrap().validate().unwrap();
        }
        for bad in ["w2v6@96", "w2v5@256", "w2v8@512", "w2v6", "mel", "w2v6@x"] {
            assert!(matches!(preset_config(bad), Err(Error::UnknownPreset(_))), "{bad}");
        }
    }

    #[test]
    fn validation_catches_broken_chains() {
        let mut c = preset_config("w2v3@64").unwrap();
        c.layers[1].in_channels = 32;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let mut c = preset_config("w2v11-prog128-1024").unwrap();
        c.layers[2].kernel = 3;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let sc = ScConfig {
            output_dim: 700,
            ..ScConfig::default()
        };
        assert!(matches!(sc.validate(), Err(Error::InvalidConfig(_))));
    }
}
