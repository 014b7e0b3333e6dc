#![allow(dead_code)]

use std::f64::consts::PI;

/// O(n²) DFT of `x` zero-padded to `n_fft`, all bins.
pub fn naive_dft(x: &[f64], n_fft: usize) -> Vec<(f64, f64)> {
    (0..n_fft)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, v)| {
                let ang = -2.0 * PI * ((k * n) % n_fft) as f64 / n_fft as f64;
                (re + v * ang.cos(), im + v * ang.sin())
            })
        })
        .collect()
}

pub fn naive_magnitudes(x: &[f64], n_fft: usize) -> Vec<f64> {
    naive_dft(x, n_fft)[..n_fft / 2 + 1].iter().map(|(r, i)| r.hypot(*i)).collect()
}

/// Orthonormal DCT-II by direct summation.
pub fn naive_dct(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(j, v)| v * (PI * k as f64 * (2.0 * j as f64 + 1.0) / (2.0 * n)).cos())
                .sum();
            s * if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() }
        })
        .collect()
}

/// Relative agreement with a floor tied to the largest value in the vector.
pub fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-6 * b.abs() + 1e-12 * scale
}

pub fn peak(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
