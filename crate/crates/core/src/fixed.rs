//! Hand-designed front-ends: log Mel filterbank and Gammatone features.

use std::sync::OnceLock;

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dsp::{
    dct_ii, gammatone_kernels, mel_matrix, normalize_waveform, stft_power, window, GammatoneBank,
    MelMatrix, NormalizedWaveform, Waveform, WindowKind,
};
use crate::error::{Error, Result};
use crate::features::{feature_normalize, FeatureMatrix};
use crate::LOG_FLOOR;

pub const WIN_SAMPLES: usize = 400;
pub const HOP_SAMPLES: usize = 160;
pub const N_MELS: usize = 80;
pub const N_FFT: usize = 512;
pub const GAMMATONE_CHANNELS: usize = 50;
pub const GAMMATONE_TAPS: usize = 640;
pub const GAMMATONE_FC_RANGE: (f64, f64) = (100.0, 7500.0);
pub const PRE_EMPHASIS: f64 = 0.97;
const FRAME_SHIFT_MS: f64 = 10.0;

pub fn default_mel_matrix() -> &'static MelMatrix {
    static MEL: OnceLock<MelMatrix> = OnceLock::new();
    MEL.get_or_init(|| mel_matrix(N_FFT, N_MELS, 0.0, 8000.0, crate::SAMPLE_RATE).expect("valid mel range"))
}

pub fn default_gammatone_bank() -> &'static GammatoneBank {
    static BANK: OnceLock<GammatoneBank> = OnceLock::new();
    BANK.get_or_init(|| {
        gammatone_kernels(GAMMATONE_CHANNELS, GAMMATONE_TAPS, GAMMATONE_FC_RANGE, 4)
            .expect("valid gammatone range")
    })
}

/// Log10 Mel energies before utterance normalization.
pub fn logmel_bands(wav: &NormalizedWaveform) -> Result<FeatureMatrix> {
    let frames = stft_power(wav, WIN_SAMPLES, HOP_SAMPLES, WindowKind::Hann)?;
    let mel = default_mel_matrix();
    let mut values = Array2::zeros((frames.len(), N_MELS));
    for (f, spec) in frames.iter().enumerate() {
        let power = ndarray::ArrayView1::from(&spec.magnitudes);
        let energies = power.dot(&mel.weights);
        for (m, e) in energies.iter().enumerate() {
            values[[f, m]] = (e + LOG_FLOOR).log10();
        }
    }
    Ok(FeatureMatrix::new(values, FRAME_SHIFT_MS))
}

/// 80-dim log Mel features at a 10 ms shift.
pub fn logmel_extract(wav: &Waveform) -> Result<FeatureMatrix> {
    if wav.len() < WIN_SAMPLES {
        return Err(Error::InputTooShort {
            needed: WIN_SAMPLES,
            got: wav.len(),
        });
    }
    let norm = normalize_waveform(wav)?;
    feature_normalize(&logmel_bands(&norm)?)
}

pub fn pre_emphasis(x: &[f64], coeff: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut prev = 0.0;
    for &v in x {
        out.push(v - coeff * prev);
        prev = v;
    }
    out
}

/// Minimum input length for Gammatone features.
pub const GAMMATONE_MIN_SAMPLES: usize = GAMMATONE_TAPS + WIN_SAMPLES - 1;

/// Compressed channel envelopes (frames × 50) before the DCT.
///
/// Pre-emphasis, gammatone filtering (valid convolution), rectification,
/// Hann-window integration and 10th-root compression.
pub fn gammatone_envelopes(wav: &NormalizedWaveform) -> Result<FeatureMatrix> {
    let x = wav.samples();
    if x.len() < GAMMATONE_MIN_SAMPLES {
        return Err(Error::InputTooShort {
            needed: GAMMATONE_MIN_SAMPLES,
            got: x.len(),
        });
    }
    let emph = pre_emphasis(x, PRE_EMPHASIS);
    let bank = &default_gammatone_bank().bank;
    let conv_len = emph.len() - GAMMATONE_TAPS + 1;
    let n_frames = (conv_len - WIN_SAMPLES) / HOP_SAMPLES + 1;
    let n = (emph.len() + GAMMATONE_TAPS - 1).next_power_of_two();

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut xf: Vec<Complex<f64>> = emph.iter().map(|&v| Complex::new(v, 0.0)).collect();
    xf.resize(n, Complex::new(0.0, 0.0));
    fwd.process(&mut xf);

    let hann = window(WindowKind::Hann, WIN_SAMPLES);
    let scale = 1.0 / n as f64;
    let columns: Vec<Vec<f64>> = (0..bank.kernels.nrows())
        .into_par_iter()
        .map(|r| {
            let h = bank.kernels.row(r);
            let mut buf: Vec<Complex<f64>> = h.iter().map(|&v| Complex::new(v, 0.0)).collect();
            buf.resize(n, Complex::new(0.0, 0.0));
            fwd.process(&mut buf);
            for (b, xv) in buf.iter_mut().zip(&xf) {
                *b *= xv;
            }
            inv.process(&mut buf);
            let rect: Vec<f64> = buf[GAMMATONE_TAPS - 1..GAMMATONE_TAPS - 1 + conv_len]
                .iter()
                .map(|c| (c.re * scale).abs())
                .collect();
            (0..n_frames)
                .map(|f| {
                    let seg = &rect[f * HOP_SAMPLES..f * HOP_SAMPLES + WIN_SAMPLES];
                    let e: f64 = seg.iter().zip(&hann).map(|(a, w)| a * w).sum();
                    e.powf(0.1)
                })
                .collect()
        })
        .collect();

    let mut values = Array2::zeros((n_frames, GAMMATONE_CHANNELS));
    for (c, col) in columns.iter().enumerate() {
        for (f, v) in col.iter().enumerate() {
            values[[f, c]] = *v;
        }
    }
    Ok(FeatureMatrix::new(values, FRAME_SHIFT_MS))
}

/// 50-dim Gammatone features at a 10 ms shift.
pub fn gammatone_extract(wav: &Waveform) -> Result<FeatureMatrix> {
    if wav.len() < GAMMATONE_MIN_SAMPLES {
        return Err(Error::InputTooShort {
            needed: GAMMATONE_MIN_SAMPLES,
            got: wav.len(),
        });
    }
    let norm = normalize_waveform(wav)?;
    let env = gammatone_envelopes(&norm)?;
    let mut values = Array2::zeros(env.values.dim());
    for (f, row) in env.values.outer_iter().enumerate() {
        let coeffs = dct_ii(row.as_slice().expect("standard layout"), GAMMATONE_CHANNELS)?;
        for (d, c) in coeffs.into_iter().enumerate() {
            values[[f, d]] = c;
        }
    }
    feature_normalize(&FeatureMatrix::new(values, FRAME_SHIFT_MS))
}

/// Frame count of [`gammatone_extract`] for an input of `len` samples.
pub fn gammatone_frames(len: usize) -> Option<usize> {
    let conv_len = len.checked_sub(GAMMATONE_TAPS - 1)?;
    Some(conv_len.checked_sub(WIN_SAMPLES)? / HOP_SAMPLES + 1)
}
