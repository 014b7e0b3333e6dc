//! Signal-processing primitives shared by every front-end and analysis.

use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SAMPLE_RATE;

/// Mono PCM audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::CorruptFile("non-finite sample".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A waveform with zero mean and unit (population) variance.
///
/// Only [`normalize_waveform`] produces one, except for
/// [`NormalizedWaveform::bypass_normalization`] which exists for probing
/// networks with constructed inputs such as silence.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedWaveform(Waveform);

impl NormalizedWaveform {
    pub fn bypass_normalization(wav: Waveform) -> Self {
        Self(wav)
    }

    pub fn samples(&self) -> &[f64] {
        &self.0.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.0.sample_rate
    }

    pub fn len(&self) -> usize {
        self.0.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.samples.is_empty()
    }

    pub fn into_inner(self) -> Waveform {
        self.0
    }
}

/// Magnitudes (or powers) over `n_fft/2 + 1` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
    pub bin_width_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Periodic Hann.
    Hann,
    /// Symmetric Hamming.
    Hamming,
    Rectangular,
}

pub fn window(kind: WindowKind, len: usize) -> Vec<f64> {
    match kind {
        WindowKind::Hann => (0..len)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
            .collect(),
        WindowKind::Hamming => {
            let denom = (len.max(2) - 1) as f64;
            (0..len)
                .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
                .collect()
        }
        WindowKind::Rectangular => vec![1.0; len],
    }
}

/// Removes the mean and scales to unit population variance.
pub fn normalize_waveform(wav: &Waveform) -> Result<NormalizedWaveform> {
    let x = &wav.samples;
    if x.len() < 2 {
        return Err(Error::EmptyInput);
    }
    if x.iter().all(|&s| s == x[0]) {
        return Err(Error::ZeroVariance);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::ZeroVariance);
    }
    let inv_std = 1.0 / var.sqrt();
    let samples = x.iter().map(|s| (s - mean) * inv_std).collect();
    Ok(NormalizedWaveform(Waveform {
        samples,
        sample_rate: wav.sample_rate,
    }))
}

/// `|DFT|` of the zero-padded kernel over `n_fft/2 + 1` bins at 16 kHz.
pub fn dft_magnitude(kernel: &[f64], n_fft: usize) -> Result<Spectrum> {
    let mut planner = FftPlanner::new();
    dft_magnitude_with(&mut planner, kernel, n_fft)
}

pub(crate) fn dft_magnitude_with(
    planner: &mut FftPlanner<f64>,
    kernel: &[f64],
    n_fft: usize,
) -> Result<Spectrum> {
    check_n_fft(n_fft)?;
    if kernel.len() > n_fft {
        return Err(Error::KernelTooLong {
            taps: kernel.len(),
            n_fft,
        });
    }
    let spectrum = real_fft(planner, kernel, n_fft);
    Ok(Spectrum {
        magnitudes: spectrum[..n_fft / 2 + 1].iter().map(|c| c.norm()).collect(),
        bin_width_hz: SAMPLE_RATE as f64 / n_fft as f64,
    })
}

fn check_n_fft(n_fft: usize) -> Result<()> {
    if n_fft == 0 || !n_fft.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n_fft));
    }
    Ok(())
}

/// Full complex FFT of `x` zero-padded to `n`.
pub(crate) fn real_fft(planner: &mut FftPlanner<f64>, x: &[f64], n: usize) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    buf
}

/// Squared-magnitude STFT over fully covered windows.
///
/// The FFT size is the next power of two at or above `win_samples`.
pub fn stft_power(
    wav: &NormalizedWaveform,
    win_samples: usize,
    hop_samples: usize,
    kind: WindowKind,
) -> Result<Vec<Spectrum>> {
    if win_samples == 0 || hop_samples == 0 {
        return Err(Error::BadRange("window and hop must be positive".into()));
    }
    let x = wav.samples();
    if x.len() < win_samples {
        return Err(Error::InputTooShort {
            needed: win_samples,
            got: x.len(),
        });
    }
    let n_fft = win_samples.next_power_of_two();
    let n_frames = (x.len() - win_samples) / hop_samples + 1;
    let win = window(kind, win_samples);
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let bin_width_hz = wav.sample_rate() as f64 / n_fft as f64;
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let frames = (0..n_frames)
        .map(|f| {
            let seg = &x[f * hop_samples..f * hop_samples + win_samples];
            for (i, slot) in buf.iter_mut().enumerate() {
                let v = if i < win_samples { seg[i] * win[i] } else { 0.0 };
                *slot = Complex::new(v, 0.0);
            }
            fft.process(&mut buf);
            Spectrum {
                magnitudes: buf[..n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect(),
                bin_width_hz,
            }
        })
        .collect();
    Ok(frames)
}

/// Triangular filters spaced uniformly on the Mel scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MelMatrix {
    /// `(n_fft/2 + 1) × n_mels`
    pub weights: Array2<f64>,
    pub mel_centers_hz: Vec<f64>,
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

pub fn mel_matrix(
    n_fft: usize,
    n_mels: usize,
    f_min: f64,
    f_max: f64,
    sample_rate: u32,
) -> Result<MelMatrix> {
    check_n_fft(n_fft)?;
    let nyquist = sample_rate as f64 / 2.0;
    if !(f_min >= 0.0 && f_min < f_max && f_max <= nyquist) || n_mels == 0 {
        return Err(Error::BadFrequencyRange(format!(
            "need 0 <= f_min < f_max <= {nyquist}, got {f_min}..{f_max} with {n_mels} bands"
        )));
    }
    let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let n_bins = n_fft / 2 + 1;
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let mut weights = Array2::zeros((n_bins, n_mels));
    for m in 0..n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        for b in 0..n_bins {
            let f = b as f64 * bin_hz;
            let w = if f > left && f <= center {
                (f - left) / (center - left)
            } else if f > center && f < right {
                (right - f) / (right - center)
            } else {
                0.0
            };
            weights[[b, m]] = w;
        }
    }
    Ok(MelMatrix {
        weights,
        mel_centers_hz: edges[1..=n_mels].to_vec(),
    })
}

/// Orthonormal DCT-II truncated to `out_dim` coefficients.
pub fn dct_ii(x: &[f64], out_dim: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if out_dim > n || n == 0 {
        return Err(Error::BadDim { out_dim, len: n });
    }
    // Even extension of length 2n: V_k = 2 e^{iπk/2n} Σ x_j cos(πk(2j+1)/2n)
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .chain(x.iter().rev())
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(2 * n).process(&mut buf);
    let (s0, s) = ((1.0 / n as f64).sqrt(), (2.0 / n as f64).sqrt());
    Ok((0..out_dim)
        .map(|k| {
            let twiddle = Complex::from_polar(1.0, -PI * k as f64 / (2 * n) as f64);
            let c = 0.5 * (twiddle * buf[k]).re;
            c * if k == 0 { s0 } else { s }
        })
        .collect())
}

/// Inverse of the full-length orthonormal DCT-II (a DCT-III).
pub fn inverse_dct_ii(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    let (s0, s) = ((1.0 / n as f64).sqrt(), (2.0 / n as f64).sqrt());
    (0..n)
        .map(|j| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let scale = if k == 0 { s0 } else { s };
                    scale * c * (PI * k as f64 * (2 * j + 1) as f64 / (2 * n) as f64).cos()
                })
                .sum()
        })
        .collect()
}

/// Equivalent rectangular bandwidth in Hz.
pub fn erb_hz(f: f64) -> f64 {
    24.7 * (4.37 * f / 1000.0 + 1.0)
}

pub fn hz_to_erb_rate(f: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * f).log10()
}

pub fn erb_rate_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 0.00437
}

/// Rows are filter kernels; `stride` is the hop when the bank is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub kernels: Array2<f64>,
    pub stride: usize,
}

impl FilterBank {
    pub fn n_filters(&self) -> usize {
        self.kernels.nrows()
    }

    pub fn taps(&self) -> usize {
        self.kernels.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammatoneBank {
    pub bank: FilterBank,
    pub center_hz: Vec<f64>,
}

/// Sampled gammatone impulse responses with ERB-rate spaced center frequencies.
///
/// Each row is `t^(order-1) exp(-2π b t) cos(2π fc t)` with
/// `b = 1.019 ERB(fc)`, scaled to unit gain at `fc`.
pub fn gammatone_kernels(
    n_channels: usize,
    taps: usize,
    fc_range: (f64, f64),
    order: u32,
) -> Result<GammatoneBank> {
    let (lo, hi) = fc_range;
    let nyquist = SAMPLE_RATE as f64 / 2.0;
    if !(lo > 0.0 && lo < hi && hi < nyquist) || n_channels == 0 || taps == 0 || order == 0 {
        return Err(Error::BadRange(format!(
            "gammatone bank {n_channels}x{taps} over {lo}..{hi} Hz, order {order}"
        )));
    }
    let (e_lo, e_hi) = (hz_to_erb_rate(lo), hz_to_erb_rate(hi));
    let center_hz: Vec<f64> = (0..n_channels)
        .map(|i| {
            if n_channels == 1 {
                lo
            } else {
                erb_rate_to_hz(e_lo + (e_hi - e_lo) * i as f64 / (n_channels - 1) as f64)
            }
        })
        .collect();
    let sr = SAMPLE_RATE as f64;
    let mut kernels = Array2::zeros((n_channels, taps));
    for (c, &fc) in center_hz.iter().enumerate() {
        let b = 1.019 * erb_hz(fc);
        let mut row = kernels.row_mut(c);
        for (n, v) in row.iter_mut().enumerate() {
            let t = n as f64 / sr;
            *v = t.powi(order as i32 - 1) * (-2.0 * PI * b * t).exp() * (2.0 * PI * fc * t).cos();
        }
        let w = 2.0 * PI * fc / sr;
        let (re, im) = row.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, &v)| {
            (re + v * (w * n as f64).cos(), im - v * (w * n as f64).sin())
        });
        let gain = re.hypot(im);
        row.mapv_inplace(|v| v / gain);
    }
    Ok(GammatoneBank {
        bank: FilterBank { kernels, stride: 1 },
        center_hz,
    })
}

/// `amplitude · sin(2π f n / sr)` for `round(duration · sr)` samples.
pub fn synthesize_sine(freq: f64, duration_s: f64, sample_rate: u32, amplitude: f64) -> Result<Waveform> {
    if !(freq > 0.0) {
        return Err(Error::BadFrequency(freq));
    }
    let nyquist = sample_rate as f64 / 2.0;
    if freq >= nyquist {
        return Err(Error::AliasedFrequency { freq, nyquist });
    }
    if !(duration_s > 0.0) {
        return Err(Error::BadRange(format!("duration {duration_s} s")));
    }
    let n = (duration_s * sample_rate as f64).round().max(1.0) as usize;
    let samples = (0..n)
        .map(|i| amplitude * (2.0 * PI * freq * i as f64 / sample_rate as f64).sin())
        .collect();
    Waveform::new(samples, sample_rate)
}
