use std::io;

/// Errors produced anywhere in the front-end stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input needs at least 2 samples")]
    EmptyInput,
    #[error("signal has zero variance")]
    ZeroVariance,
    #[error("input too short: need {needed} samples, got {got}")]
    InputTooShort { needed: usize, got: usize },
    #[error("kernel of {taps} taps does not fit in n_fft={n_fft}")]
    KernelTooLong { taps: usize, n_fft: usize },
    #[error("n_fft={0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("bad frequency range: {0}")]
    BadFrequencyRange(String),
    #[error("bad output dimension {out_dim} for input of length {len}")]
    BadDim { out_dim: usize, len: usize },
    #[error("bad range: {0}")]
    BadRange(String),
    #[error("frequency must be positive, got {0} Hz")]
    BadFrequency(f64),
    #[error("frequency {freq} Hz is at or above Nyquist ({nyquist} Hz)")]
    AliasedFrequency { freq: f64, nyquist: f64 },
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("mask count {count} outside [0, {filters}]")]
    BadCount { count: usize, filters: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("loss was not recorded on this graph or is not a scalar")]
    NoGraph,
    #[error("finite-difference epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("front-end frame shift is {0} ms, distillation needs 10 ms")]
    FrameMismatch(f64),
    #[error("row {0} has an all-zero response")]
    ZeroRow(usize),
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    MagicMismatch { expected: [u8; 4], found: [u8; 4] },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("payload truncated: need {needed} bytes, have {have}")]
    TruncatedPayload { needed: usize, have: usize },
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
