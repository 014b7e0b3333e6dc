//! Learnable front-ends: the wav2vec 2.0 convolutional feature encoder in
//! all of its width/depth variants, and SC features.

mod config;
mod forward;
mod mask;
mod model;

pub use config::{
    model_preset, preset_config, Activation, ConvLayerSpec, ConvStackConfig, FeConfig, FeKind, NormKind,
    ScConfig, DEFAULT_PROJECTION_DIM, W2V_PRESETS,
};
pub use forward::{filterbank_output, forward, record_forward, sc_forward, w2v_forward, BoundParams};
pub use mask::{mask_filters, select_filters, MaskMode, MaskSpec};
pub use model::{
    audit_geometry, count_params, count_params_for, frame_count, geometry_of, init_model, param_specs,
    round_count, FeModel, Geometry, Init, ParamSpec, Tensor,
};
