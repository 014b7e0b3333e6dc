use ndarray::Array2;

use super::config::{Activation, ConvStackConfig, FeConfig, FeKind, NormKind, ScConfig};
use super::model::{audit_geometry, frame_count, FeModel};
use crate::autodiff::{Graph, Var};
use crate::dsp::NormalizedWaveform;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::LOG_FLOOR;

/// Parameter leaves of one recorded forward pass, in `model.params` order.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub vars: Vec<Var>,
}

/// Records the front-end on `g`. Returns the `(dims, frames)` output and
/// the parameter leaves (trainable when `trainable` is set).
pub fn record_forward(
    model: &FeModel,
    g: &mut Graph,
    samples: &[f64],
    trainable: bool,
) -> Result<(Var, BoundParams)> {
    let layers = model.config.time_layers();
    if frame_count(&layers, samples.len()) == 0 {
        return Err(Error::InputTooShort {
            needed: audit_geometry(model).receptive_field_samples,
            got: samples.len(),
        });
    }
    let vars: Vec<Var> = model
        .params
        .values()
        .map(|t| {
            if trainable {
                g.param(t.as_matrix())
            } else {
                g.constant(t.as_matrix())
            }
        })
        .collect();
    let lookup = |name: &str| -> Result<Var> {
        model
            .params
            .get_index_of(name)
            .map(|i| vars[i])
            .ok_or_else(|| Error::ShapeMismatch(format!("missing tensor {name}")))
    };
    let x = g.constant(Array2::from_shape_vec((1, samples.len()), samples.to_vec()).expect("row"));
    let out = match &model.config {
        FeConfig::W2v(c) => w2v_graph(c, g, x, &lookup)?,
        FeConfig::Sc(c) => sc_graph(c, g, x, &lookup)?,
    };
    Ok((out, BoundParams { vars }))
}

fn w2v_graph(
    c: &ConvStackConfig,
    g: &mut Graph,
    mut x: Var,
    p: &dyn Fn(&str) -> Result<Var>,
) -> Result<Var> {
    for (i, l) in c.layers.iter().enumerate() {
        x = g.conv1d(x, p(&format!("conv.{i}.weight"))?, l.kernel, l.stride)?;
        match l.norm {
            NormKind::None => {}
            NormKind::Group => {
                x = g.group_norm(x, p(&format!("conv.{i}.norm.weight"))?, p(&format!("conv.{i}.norm.bias"))?)?
            }
            NormKind::Layer => {
                x = g.layer_norm(x, p(&format!("conv.{i}.norm.weight"))?, p(&format!("conv.{i}.norm.bias"))?)?
            }
        }
        if l.activation == Activation::Gelu {
            x = g.gelu(x);
        }
    }
    if c.final_layer_norm {
        x = g.layer_norm(x, p("layer_norm.weight")?, p("layer_norm.bias")?)?;
    }
    if c.include_projection {
        x = g.linear(x, p("projection.weight")?, Some(p("projection.bias")?))?;
    }
    Ok(x)
}

fn sc_graph(c: &ScConfig, g: &mut Graph, x: Var, p: &dyn Fn(&str) -> Result<Var>) -> Result<Var> {
    let bank = g.conv1d(x, p("filterbank.weight")?, c.fb_size, c.fb_stride)?;
    let rect = g.abs(bank);
    let integrated = g.shared_conv(rect, p("integration.weight")?, c.int_size, c.int_stride)?;
    // Learned integration filters may go negative; rectify again before the log.
    let mag = g.abs(integrated);
    let logs = g.log10(mag, LOG_FLOOR);
    g.row_affine(logs, p("output.scale")?, p("output.offset")?)
}

fn to_features(model: &FeModel, out: Array2<f64>) -> FeatureMatrix {
    FeatureMatrix::new(out.reversed_axes().as_standard_layout().to_owned(), model.frame_shift_ms())
}

fn expect_kind(model: &FeModel, kind: FeKind) -> Result<()> {
    if model.kind() != kind {
        return Err(Error::InvalidConfig(format!(
            "expected a {kind:?} model, got {:?}",
            model.kind()
        )));
    }
    Ok(())
}

/// Inference through any trainable front-end.
pub fn forward(model: &FeModel, wav: &NormalizedWaveform) -> Result<FeatureMatrix> {
    let mut g = Graph::new();
    let (out, _) = record_forward(model, &mut g, wav.samples(), false)?;
    Ok(to_features(model, g.into_value(out)))
}

/// wav2vec 2.0 feature encoder: conv → (group norm on layer 1) → GELU per
/// layer, then layer norm and the optional projection.
pub fn w2v_forward(model: &FeModel, wav: &NormalizedWaveform) -> Result<FeatureMatrix> {
    expect_kind(model, FeKind::W2v)?;
    forward(model, wav)
}

/// SC features: filterbank, rectification, shared integration filters,
/// log compression and a learned per-dimension scale and offset.
pub fn sc_forward(model: &FeModel, wav: &NormalizedWaveform) -> Result<FeatureMatrix> {
    expect_kind(model, FeKind::Sc)?;
    forward(model, wav)
}

/// Output of the first convolution alone, `(filters, frames)`.
pub fn filterbank_output(model: &FeModel, wav: &NormalizedWaveform) -> Result<Array2<f64>> {
    let (kernel, stride) = model.config.time_layers()[0];
    let mut g = Graph::new();
    let x = g.constant(Array2::from_shape_vec((1, wav.len()), wav.samples().to_vec()).expect("row"));
    let w = g.constant(model.param(model.first_layer_name())?.as_matrix());
    let y = g.conv1d(x, w, kernel, stride)?;
    Ok(g.into_value(y))
}
