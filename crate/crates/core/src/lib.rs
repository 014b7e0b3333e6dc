//! Raw-waveform feature extraction for speech recognition.
//!
//! Four front-ends share one crate: hand-designed log Mel and Gammatone
//! features, the convolutional feature encoder of wav2vec 2.0 (with all of
//! its width/depth variants) and supervised-convolutional (SC) features.
//! Around them sit filter analysis (frequency responses, sine probing,
//! peak-to-average masking), a small reverse-mode differentiation engine
//! used to train the learnable front-ends, and the on-disk formats.

pub mod analysis;
pub mod autodiff;
pub mod dsp;
pub mod error;
pub mod features;
pub mod fixed;
pub mod io;
pub mod neural;
pub mod train;

pub use error::{Error, Result};
pub use features::FeatureMatrix;

/// Sample rate of every pipeline in this crate.
pub const SAMPLE_RATE: u32 = 16_000;

/// Floor added before every logarithm of a possibly-zero energy.
pub const LOG_FLOOR: f64 = 1e-10;
