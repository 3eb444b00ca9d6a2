//! DFT machinery and the spectral mask.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::waveform::WaveformMatrix;

/// Sorted, de-duplicated stopband DFT bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopbandBins {
    pub code_length: usize,
    pub bins: Vec<usize>,
}

impl StopbandBins {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.bins.binary_search(&k).is_ok()
    }
}

/// Union over stopbands of the inclusive bin range
/// `[round(N u1), round(N u2)]`, rounding half away from zero. Bin `N`
/// (normalized frequency 1) wraps to bin 0.
pub fn stopband_bins(n: usize, stopbands: &[(f64, f64)]) -> StopbandBins {
    let nf = n as f64;
    let mut bins: Vec<usize> = stopbands
        .iter()
        .flat_map(|&(u1, u2)| {
            let lo = (nf * u1).round() as usize;
            let hi = (nf * u2).round() as usize;
            (lo..=hi).map(move |k| k % n.max(1))
        })
        .collect();
    bins.sort_unstable();
    bins.dedup();
    StopbandBins { code_length: n, bins }
}

/// Rows of the DFT matrix at the stopband bins: row `k` is
/// `[1, e^{-j 2 pi k / N}, ..., e^{-j 2 pi k (N-1) / N}]`.
#[derive(Debug, Clone)]
pub struct SelectorMatrix {
    pub bins: StopbandBins,
    pub g: DMatrix<Complex64>,
}

impl SelectorMatrix {
    pub fn num_bins(&self) -> usize {
        self.g.nrows()
    }

    /// `G s~` for one fast-time sequence.
    pub fn apply(&self, seq: &DVector<Complex64>) -> DVector<Complex64> {
        &self.g * seq
    }
}

pub fn build_selector(bins: &StopbandBins) -> SelectorMatrix {
    let n = bins.code_length;
    let g = DMatrix::from_fn(bins.len(), n, |r, c| {
        let k = bins.bins[r];
        // reduce k*c mod N first to keep the phase argument small
        let idx = (k * c) % n;
        Complex64::from_polar(1.0, -2.0 * PI * idx as f64 / n as f64)
    });
    SelectorMatrix { bins: bins.clone(), g }
}

/// `|F s~|` over all `N` bins.
pub fn spectrum_magnitudes(seq: &[Complex64]) -> Vec<f64> {
    spectrum(seq).iter().map(|z| z.norm()).collect()
}

/// Forward DFT with the `e^{-j 2 pi k n / N}` kernel.
pub fn spectrum(seq: &[Complex64]) -> Vec<Complex64> {
    if seq.is_empty() {
        return Vec::new();
    }
    let mut buf = seq.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// `max_{m, k} (|G s~_m|_k - gamma)_+`; zero iff the mask holds.
pub fn mask_excess(s: &WaveformMatrix, selector: &SelectorMatrix, gamma: f64) -> f64 {
    if selector.num_bins() == 0 {
        return 0.0;
    }
    let prod = &selector.g * s.as_matrix().transpose();
    prod.iter().map(|z| (z.norm() - gamma).max(0.0)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub antenna: usize,
    pub bin: usize,
    pub normalized_frequency: f64,
    pub magnitude: f64,
    /// `20 log10(magnitude)`, floored at -300 dB.
    pub magnitude_db: f64,
    pub in_stopband: bool,
    pub gamma: f64,
}

pub fn spectrum_table(s: &WaveformMatrix, bins: &StopbandBins, gamma: f64) -> Vec<SpectrumRow> {
    let n = s.code_length();
    let mut rows = Vec::with_capacity(s.num_tx() * n);
    for m in 0..s.num_tx() {
        let seq: Vec<Complex64> = s.sequence(m).iter().cloned().collect();
        for (k, mag) in spectrum_magnitudes(&seq).into_iter().enumerate() {
            rows.push(SpectrumRow {
                antenna: m,
                bin: k,
                normalized_frequency: k as f64 / n as f64,
                magnitude: mag,
                magnitude_db: crate::metrics::db20(mag, 1.0),
                in_stopband: bins.contains(k),
                gamma,
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refwave::random_unimodular;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bins_for_single_band() {
        assert_eq!(stopband_bins(8, &[(0.25, 0.5)]).bins, vec![2, 3, 4]);
        assert!(stopband_bins(8, &[]).is_empty());
    }

    #[test]
    fn bins_for_reference_stopbands() {
        let b = stopband_bins(64, &[(0.3, 0.35), (0.4, 0.45), (0.7, 0.8)]);
        let expected: Vec<usize> = (19..=22).chain(26..=29).chain(45..=51).collect();
        assert_eq!(b.bins, expected);
        let swapped = stopband_bins(64, &[(0.7, 0.8), (0.3, 0.35), (0.4, 0.45)]);
        assert_eq!(swapped, b);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        // 8 * 0.3125 = 2.5 -> 3
        assert_eq!(stopband_bins(8, &[(0.3125, 0.4)]).bins, vec![3]);
        // normalized frequency 1 wraps onto bin 0
        assert_eq!(stopband_bins(8, &[(0.9, 1.0)]).bins, vec![0, 7]);
    }

    #[test]
    fn selector_rows() {
        let g = build_selector(&stopband_bins(4, &[(0.25, 0.25)]));
        let expected = [c(1., 0.), c(0., -1.), c(-1., 0.), c(0., 1.)];
        for (z, e) in g.g.row(0).iter().zip(expected) {
            assert!((z - e).norm() < 1e-15);
        }
        let g0 = build_selector(&StopbandBins { code_length: 4, bins: vec![0] });
        assert!(g0.g.iter().all(|z| (z - c(1., 0.)).norm() < 1e-15));
    }

    #[test]
    fn spectrum_simple_cases() {
        let mags = spectrum_magnitudes(&[c(1., 0.); 4]);
        let expected = [4.0, 0.0, 0.0, 0.0];
        assert!(mags.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12));
        let mut impulse = vec![c(0., 0.); 8];
        impulse[0] = c(1., 0.);
        assert!(spectrum_magnitudes(&impulse).iter().all(|m| (m - 1.0).abs() < 1e-15));
    }

    #[test]
    fn mask_excess_cases() {
        let s = random_unimodular(2, 8, 1);
        let empty = build_selector(&stopband_bins(8, &[]));
        assert_eq!(mask_excess(&s, &empty, 0.1), 0.0);

        // a row matched to stopband bin 3 sums coherently to N
        let sel = build_selector(&StopbandBins { code_length: 8, bins: vec![3] });
        let matched = WaveformMatrix::from_fn(2, 8, |_, n| sel.g[(0, n)].conj());
        assert!((mask_excess(&matched, &sel, 0.1) - (8.0 - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn unimodular_energy_is_n_squared() {
        let s = random_unimodular(1, 32, 4);
        let seq: Vec<Complex64> = s.sequence(0).iter().cloned().collect();
        let energy: f64 = spectrum_magnitudes(&seq).iter().map(|m| m * m).sum();
        assert!((energy - 1024.0).abs() < 1e-9);
    }
}
