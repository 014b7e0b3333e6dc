//! Filter diagnostics: first-layer frequency responses, sort orders,
//! peak-to-average ranking for masking, and sine probing of whole networks.

use std::cmp::Ordering;

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::dsp::{dft_magnitude_with, normalize_waveform, synthesize_sine, FilterBank};
use crate::error::{Error, Result};
use crate::fixed::{gammatone_envelopes, logmel_bands};
use crate::neural::{forward, FeModel};
use crate::SAMPLE_RATE;

pub const RESPONSE_N_FFT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowStats {
    pub peak_bin: usize,
    pub peak_value: f64,
    pub lower_cutoff_hz: f64,
    pub upper_cutoff_hz: f64,
    /// `None` for an all-zero row.
    pub peak_to_average: Option<f64>,
}

/// Linear magnitude responses (filters × bins) with per-row statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub magnitudes: Array2<f64>,
    pub bin_hz: f64,
    pub stats: Vec<RowStats>,
}

impl FrequencyResponse {
    /// Rows reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            magnitudes: self.magnitudes.select(ndarray::Axis(0), perm),
            bin_hz: self.bin_hz,
            stats: perm.iter().map(|&i| self.stats[i]).collect(),
        }
    }

    /// `20 log10(|H| + 1e-10)`.
    pub fn to_db(&self) -> Array2<f64> {
        self.magnitudes.mapv(|m| 20.0 * (m + crate::LOG_FLOOR).log10())
    }
}

fn row_stats(mags: &[f64], bin_hz: f64) -> RowStats {
    let (peak_bin, peak_value) = mags
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let threshold = peak_value / std::f64::consts::SQRT_2;
    let lower = mags.iter().position(|&m| m >= threshold).unwrap_or(0);
    let upper = mags.iter().rposition(|&m| m >= threshold).unwrap_or(mags.len() - 1);
    let mean = mags.iter().sum::<f64>() / mags.len() as f64;
    RowStats {
        peak_bin,
        peak_value,
        lower_cutoff_hz: lower as f64 * bin_hz,
        upper_cutoff_hz: upper as f64 * bin_hz,
        peak_to_average: (peak_value > 0.0).then(|| peak_value / mean),
    }
}

/// Magnitude response of every kernel. Cutoffs are the outermost bins at or
/// above `peak / sqrt(2)`.
pub fn frequency_response(fb: &FilterBank, n_fft: usize) -> Result<FrequencyResponse> {
    let n_bins = n_fft / 2 + 1;
    let mut planner = FftPlanner::new();
    let mut magnitudes = Array2::zeros((fb.n_filters(), n_bins));
    let mut bin_hz = SAMPLE_RATE as f64 / n_fft as f64;
    for (i, kernel) in fb.kernels.outer_iter().enumerate() {
        let spec = dft_magnitude_with(&mut planner, &kernel.to_vec(), n_fft)?;
        bin_hz = spec.bin_width_hz;
        magnitudes.row_mut(i).assign(&ndarray::ArrayView1::from(&spec.magnitudes));
    }
    let stats = magnitudes
        .outer_iter()
        .map(|r| row_stats(r.as_slice().expect("standard layout"), bin_hz))
        .collect();
    Ok(FrequencyResponse {
        magnitudes,
        bin_hz,
        stats,
    })
}

/// Permutation ordering rows by peak bin, then upper cutoff, then lower
/// cutoff, ascending. Ties keep their original order.
pub fn sort_filters(fr: &FrequencyResponse) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fr.stats.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&fr.stats[a], &fr.stats[b]);
        sa.peak_bin
            .cmp(&sb.peak_bin)
            .then(sa.upper_cutoff_hz.total_cmp(&sb.upper_cutoff_hz))
            .then(sa.lower_cutoff_hz.total_cmp(&sb.lower_cutoff_hz))
    });
    order
}

/// `max / mean` of a row's linear magnitudes.
pub fn peak_to_average(fr: &FrequencyResponse, row: usize) -> Result<f64> {
    let stats = fr
        .stats
        .get(row)
        .ok_or_else(|| Error::BadRange(format!("row {row} of {}", fr.stats.len())))?;
    stats.peak_to_average.ok_or(Error::ZeroRow(row))
}

/// Rows by peak-to-average ratio, highest first; all-zero rows last.
pub fn rank_by_peak_to_average(fr: &FrequencyResponse) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fr.stats.len()).collect();
    order.sort_by(|&a, &b| match (fr.stats[a].peak_to_average, fr.stats[b].peak_to_average) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    });
    order
}

/// Masking order of a model's first-layer filters: sharp filters form the
/// prefix, soft filters the suffix.
pub fn ranking_for_masking(model: &FeModel) -> Result<Vec<usize>> {
    let fr = frequency_response(&model.first_layer(), RESPONSE_N_FFT)?;
    Ok(rank_by_peak_to_average(&fr))
}

/// What a sine probe is run through.
#[derive(Debug, Clone, Copy)]
pub enum ProbeTarget<'a> {
    Model(&'a FeModel),
    /// Compressed gammatone channel envelopes, before the DCT.
    GammatoneBank,
    /// Log Mel band energies, before utterance normalization.
    LogMelBank,
}

/// Mean absolute activation per output channel for each probe frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResponse {
    /// probe frequencies × output channels
    pub matrix: Array2<f64>,
    pub freqs_hz: Vec<f64>,
    /// Per frequency: max over channels divided by the channel mean
    /// (0 when the row is all zero).
    pub peak_to_mean: Vec<f64>,
}

pub fn default_probe_grid() -> Vec<f64> {
    (1..=159).map(|i| 50.0 * i as f64).collect()
}

/// `lo, lo + step, ..` up to and including `hi`.
pub fn probe_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && lo <= hi) {
        return Err(Error::BadRange(format!("grid {lo}:{hi}:{step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

fn probe_one(target: ProbeTarget, freq: f64, duration_s: f64) -> Result<Vec<f64>> {
    let wav = normalize_waveform(&synthesize_sine(freq, duration_s, SAMPLE_RATE, 1.0)?)?;
    let feats = match target {
        ProbeTarget::Model(m) => forward(m, &wav)?,
        ProbeTarget::GammatoneBank => gammatone_envelopes(&wav)?,
        ProbeTarget::LogMelBank => logmel_bands(&wav)?,
    };
    let n = feats.n_frames();
    let frames = if n > 2 {
        feats.values.slice(ndarray::s![1..n - 1, ..])
    } else {
        feats.values.view()
    };
    let count = frames.nrows() as f64;
    Ok(frames
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>() / count)
        .collect())
}

/// Runs one synthesized sine per frequency through `target`. The first and
/// last frames are dropped to avoid edge effects.
pub fn sine_probe(target: ProbeTarget, freqs: &[f64], duration_s: f64) -> Result<ProbeResponse> {
    let nyquist = SAMPLE_RATE as f64 / 2.0;
    if let Some(&f) = freqs.iter().find(|&&f| !(f > 0.0 && f < nyquist)) {
        return Err(Error::AliasedFrequency { freq: f, nyquist });
    }
    if freqs.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let rows: Vec<Vec<f64>> = freqs
        .par_iter()
        .map(|&f| probe_one(target, f, duration_s))
        .collect::<Result<_>>()?;
    let cols = rows[0].len();
    let mut matrix = Array2::zeros((rows.len(), cols));
    for (i, r) in rows.iter().enumerate() {
        matrix.row_mut(i).assign(&ndarray::ArrayView1::from(r));
    }
    let peak_to_mean = rows
        .iter()
        .map(|r| {
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            let max = r.iter().copied().fold(0.0, f64::max);
            if mean > 0.0 {
                max / mean
            } else {
                0.0
            }
        })
        .collect();
    Ok(ProbeResponse {
        matrix,
        freqs_hz: freqs.to_vec(),
        peak_to_mean,
    })
}
