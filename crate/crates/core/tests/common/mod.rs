//! Brute-force reference evaluators shared by the integration tests.
#![allow(dead_code)]

pub mod structural;

use std::f64::consts::PI;

use num_complex::Complex64;
use wise_core::WaveformMatrix;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Deterministic irregular unimodular 4x16 waveform.
pub fn fixed_waveform() -> WaveformMatrix {
    WaveformMatrix::from_phases(4, 16, |m, k| {
        let (m, k) = (m as f64, k as f64);
        0.37 * (m + 1.0) * k * k + 0.5 * m + 0.11 * k
    })
}

pub fn brute_beampattern(s: &WaveformMatrix, theta_deg: f64, ratio: f64) -> f64 {
    let sin = theta_deg.to_radians().sin();
    let mut total = 0.0;
    for n in 0..s.code_length() {
        let mut z = Complex64::new(0.0, 0.0);
        for i in 0..s.num_tx() {
            let a = Complex64::from_polar(1.0, 2.0 * PI * ratio * i as f64 * sin);
            z += a.conj() * s.get(i, n);
        }
        total += z.norm_sqr();
    }
    total / s.code_length() as f64
}

pub fn brute_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| (0..n).map(|c| x[c] * Complex64::from_polar(1.0, -2.0 * PI * (k * c) as f64 / n as f64)).sum())
        .collect()
}

/// Index `l + N - 1` holds `sum_n a[n] conj(b[n - l])`.
pub fn brute_correlation(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len() as isize;
    (-(n - 1)..n)
        .map(|l| {
            (0..n)
                .filter(|&k| (0..n).contains(&(k - l)))
                .map(|k| a[k as usize] * b[(k - l) as usize].conj())
                .sum()
        })
        .collect()
}
