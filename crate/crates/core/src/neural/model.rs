use indexmap::IndexMap;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ConvStackConfig, FeConfig, FeKind, NormKind, ScConfig};
use crate::dsp::FilterBank;
use crate::error::{Error, Result};
use crate::SAMPLE_RATE;

/// Row-major tensor of learnable values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} holds {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(shape[0], rest)`; vectors become column matrices.
    pub fn as_matrix(&self) -> Array2<f64> {
        let rows = self.shape.first().copied().unwrap_or(1);
        let cols = self.data.len().checked_div(rows).unwrap_or(0);
        Array2::from_shape_vec((rows, cols), self.data.clone()).expect("consistent tensor")
    }

    pub fn set_from_matrix(&mut self, m: &Array2<f64>) {
        debug_assert_eq!(m.len(), self.data.len());
        self.data.clear();
        self.data.extend(m.iter().copied());
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Uniform(f64),
    /// `[0, bound)`
    NonNegative(f64),
    Ones,
    Zeros,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

fn spec(name: impl Into<String>, shape: Vec<usize>, init: Init) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        shape,
        init,
    }
}

fn fan_in_bound(fan_in: usize) -> Init {
    Init::Uniform((1.0 / fan_in as f64).sqrt())
}

/// Names, shapes and initializers of every learnable tensor, in archive order.
pub fn param_specs(config: &FeConfig) -> Vec<ParamSpec> {
    match config {
        FeConfig::W2v(c) => w2v_specs(c),
        FeConfig::Sc(c) => sc_specs(c),
    }
}

fn w2v_specs(c: &ConvStackConfig) -> Vec<ParamSpec> {
    let mut out = Vec::new();
    for (i, l) in c.layers.iter().enumerate() {
        out.push(spec(
            format!("conv.{i}.weight"),
            vec![l.out_channels, l.in_channels, l.kernel],
            fan_in_bound(l.in_channels * l.kernel),
        ));
        if l.norm != NormKind::None {
            out.push(spec(format!("conv.{i}.norm.weight"), vec![l.out_channels], Init::Ones));
            out.push(spec(format!("conv.{i}.norm.bias"), vec![l.out_channels], Init::Zeros));
        }
    }
    let width = c.output_channels();
    if c.final_layer_norm {
        out.push(spec("layer_norm.weight", vec![width], Init::Ones));
        out.push(spec("layer_norm.bias", vec![width], Init::Zeros));
    }
    if c.include_projection {
        let d = c.projection_dim();
        out.push(spec("projection.weight", vec![d, width], fan_in_bound(width)));
        out.push(spec("projection.bias", vec![d], fan_in_bound(width)));
    }
    out
}

fn sc_specs(c: &ScConfig) -> Vec<ParamSpec> {
    vec![
        spec("filterbank.weight", vec![c.fb_channels, 1, c.fb_size], fan_in_bound(c.fb_size)),
        spec(
            "integration.weight",
            vec![c.n_integration, 1, c.int_size],
            Init::NonNegative((1.0 / c.int_size as f64).sqrt()),
        ),
        spec("output.scale", vec![c.output_dim], Init::Ones),
        spec("output.offset", vec![c.output_dim], Init::Zeros),
    ]
}

/// Learnable scalars implied by a configuration, without allocating them.
pub fn count_params_for(config: &FeConfig) -> usize {
    param_specs(config)
        .iter()
        .map(|s| s.shape.iter().product::<usize>())
        .sum()
}

/// A front-end with its configuration and named parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FeModel {
    pub config: FeConfig,
    pub params: IndexMap<String, Tensor>,
}

impl FeModel {
    /// Assembles a model, checking every tensor against the configuration.
    pub fn from_parts(config: FeConfig, mut params: IndexMap<String, Tensor>) -> Result<Self> {
        config.validate()?;
        let mut ordered = IndexMap::new();
        for s in param_specs(&config) {
            let t = params
                .shift_remove(&s.name)
                .ok_or_else(|| Error::ShapeMismatch(format!("missing tensor {}", s.name)))?;
            if t.shape != s.shape {
                return Err(Error::ShapeMismatch(format!(
                    "{}: config implies {:?}, tensor has {:?}",
                    s.name, s.shape, t.shape
                )));
            }
            ordered.insert(s.name, t);
        }
        if let Some(extra) = params.keys().next() {
            return Err(Error::ShapeMismatch(format!("unexpected tensor {extra}")));
        }
        Ok(Self {
            config,
            params: ordered,
        })
    }

    pub fn kind(&self) -> FeKind {
        self.config.kind()
    }

    pub fn param(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::ShapeMismatch(format!("missing tensor {name}")))
    }

    /// The first convolution as a bank of single-channel kernels.
    pub fn first_layer(&self) -> FilterBank {
        let name = self.first_layer_name();
        let t = &self.params[name];
        let stride = self.config.time_layers()[0].1;
        FilterBank {
            kernels: Array2::from_shape_vec((t.shape[0], t.shape[2]), t.data.clone())
                .expect("first layer reads one channel"),
            stride,
        }
    }

    pub fn first_layer_name(&self) -> &'static str {
        match self.kind() {
            FeKind::W2v => "conv.0.weight",
            FeKind::Sc => "filterbank.weight",
        }
    }

    pub fn frame_shift_ms(&self) -> f64 {
        audit_geometry(self).frame_shift_ms
    }
}

/// Deterministic initialization: conv and projection weights uniform in
/// `±sqrt(1 / fan_in)`, norm scales 1 and offsets 0. SC integration
/// filters start as low-pass integrators, uniform in `[0, sqrt(1 / 40))`. Values are rounded to
/// 32-bit precision so archives reproduce them exactly.
pub fn init_model(config: FeConfig, seed: u64) -> Result<FeModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = IndexMap::new();
    for s in param_specs(&config) {
        let n: usize = s.shape.iter().product();
        let data = match s.init {
            Init::Ones => vec![1.0; n],
            Init::Zeros => vec![0.0; n],
            Init::Uniform(bound) => (0..n)
                .map(|_| rng.gen_range(-bound..bound) as f32 as f64)
                .collect(),
            Init::NonNegative(bound) => (0..n).map(|_| rng.gen_range(0.0..bound) as f32 as f64).collect(),
        };
        params.insert(s.name, Tensor { shape: s.shape, data });
    }
    Ok(FeModel { config, params })
}

pub fn count_params(model: &FeModel) -> usize {
    model.params.values().map(Tensor::len).sum()
}

/// Receptive field and frame shift at 16 kHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub receptive_field_samples: usize,
    pub receptive_field_ms: f64,
    pub frame_shift_samples: usize,
    pub frame_shift_ms: f64,
}

pub fn geometry_of(layers: &[(usize, usize)]) -> Geometry {
    let mut rf = 1;
    let mut jump = 1;
    for &(k, s) in layers {
        rf += (k - 1) * jump;
        jump *= s;
    }
    let ms = |samples: usize| samples as f64 * 1000.0 / SAMPLE_RATE as f64;
    Geometry {
        receptive_field_samples: rf,
        receptive_field_ms: ms(rf),
        frame_shift_samples: jump,
        frame_shift_ms: ms(jump),
    }
}

pub fn audit_geometry(model: &FeModel) -> Geometry {
    geometry_of(&model.config.time_layers())
}

/// Output frames for `len` input samples, by composing `floor((L - k) / s) + 1`.
pub fn frame_count(layers: &[(usize, usize)], len: usize) -> usize {
    let mut l = len;
    for &(k, s) in layers {
        if l < k {
            return 0;
        }
        l = (l - k) / s + 1;
    }
    l
}

/// Human-readable rounding used for parameter tables: `4.1M`, `108k`.
pub fn round_count(n: usize) -> String {
    if n >= 1_000_000 {
        format!("{:.1}M", n as f64 / 1e6)
    } else if n >= 1_000 {
        format!("{}k", (n as f64 / 1e3).round() as usize)
    } else {
        n.to_string()
    }
}
