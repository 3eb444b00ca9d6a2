//! Waveform quality metrics: aperiodic correlation levels, similarity
//! distance, constant-modulus deviation and the summary bundle written by
//! the CLI.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WiseError};
use crate::scenario::Scenario;
use crate::spatial::{beampattern, beamwidth_ratio, spatial_islr, AngleMatrixSet};
use crate::spectral::{mask_excess, SelectorMatrix};
use crate::waveform::WaveformMatrix;

/// Lower clip for every dB quantity.
pub const DB_FLOOR: f64 = -300.0;

pub fn db10(value: f64, reference: f64) -> f64 {
    let ratio = value / reference;
    if ratio > 0.0 && ratio.is_finite() {
        (10.0 * ratio.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

pub fn db20(value: f64, reference: f64) -> f64 {
    let ratio = value / reference;
    if ratio > 0.0 && ratio.is_finite() {
        (20.0 * ratio.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Aperiodic cross-correlation `r(l) = sum_n a[n] conj(b[n - l])` for lags
/// `-(N-1)..=(N-1)`; index `l + N - 1` of the output holds lag `l`.
pub fn cross_correlation(a: &[Complex64], b: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.len() != b.len() {
        return Err(WiseError::Dimension { expected: format!("length {}", a.len()), got: format!("length {}", b.len()) });
    }
    let n = a.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let len = (2 * n - 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut fa = vec![Complex64::new(0.0, 0.0); len];
    let mut fb = fa.clone();
    fa[..n].copy_from_slice(a);
    fb[..n].copy_from_slice(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y.conj()).collect();
    inv.process(&mut prod);
    let scale = 1.0 / len as f64;
    // lag l sits at index l mod len
    Ok((0..2 * n - 1)
        .map(|i| {
            let lag = i as isize - (n as isize - 1);
            prod[lag.rem_euclid(len as isize) as usize] * scale
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub m1: usize,
    pub m2: usize,
    pub lag: isize,
    pub level_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub rows: Vec<CorrelationRow>,
    /// Largest autocorrelation sidelobe (nonzero lag), dB relative to N.
    pub peak_auto_sidelobe_db: f64,
    /// Largest cross-correlation between distinct antennas, dB relative to N.
    pub peak_cross_db: f64,
}

/// `20 log10(|r(l)| / N)` for every ordered antenna pair and lag.
pub fn correlation_level_db(s: &WaveformMatrix) -> CorrelationReport {
    let n = s.code_length();
    let m = s.num_tx();
    let seqs: Vec<Vec<Complex64>> = (0..m).map(|i| s.sequence(i).iter().cloned().collect()).collect();
    let mut rows = Vec::with_capacity(m * m * (2 * n).saturating_sub(1));
    let mut peak_auto = DB_FLOOR;
    let mut peak_cross = DB_FLOOR;
    for m1 in 0..m {
        for m2 in 0..m {
            let r = cross_correlation(&seqs[m1], &seqs[m2]).expect("equal lengths");
            for (i, z) in r.iter().enumerate() {
                let lag = i as isize - (n as isize - 1);
                let level_db = db20(z.norm(), n as f64);
                if m1 == m2 {
                    if lag != 0 {
                        peak_auto = peak_auto.max(level_db);
                    }
                } else {
                    peak_cross = peak_cross.max(level_db);
                }
                rows.push(CorrelationRow { m1, m2, lag, level_db });
            }
        }
    }
    CorrelationReport { rows, peak_auto_sidelobe_db: peak_auto, peak_cross_db: peak_cross }
}

/// `||S - S0||_F / sqrt(MN)`.
pub fn similarity_distance(s: &WaveformMatrix, s0: &WaveformMatrix) -> Result<f64> {
    s.check_shape(s0.num_tx(), s0.code_length())?;
    let mn = (s.num_tx() * s.code_length()) as f64;
    Ok(s.frobenius_distance(s0) / mn.sqrt())
}

/// `max |s_mn| - min |s_mn|`.
pub fn constant_modulus_deviation(s: &WaveformMatrix) -> f64 {
    let mods = s.as_matrix().iter().map(|z| z.norm());
    let (lo, hi) = mods.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamwidthEntry {
    pub theta_deg: f64,
    pub ratio: f64,
}

/// Summary of one waveform against its scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub spatial_islr: f64,
    pub islr_db: f64,
    pub mask_excess: f64,
    pub beamwidth_ratios: Vec<BeamwidthEntry>,
    /// Grid angle of the beampattern maximum.
    pub peak_angle_deg: f64,
    pub similarity_distance: f64,
    pub cm_deviation: f64,
    pub peak_auto_sidelobe_db: f64,
    pub peak_cross_db: f64,
}

pub fn compute_metrics(
    s: &WaveformMatrix,
    scenario: &Scenario,
    ams: &AngleMatrixSet,
    selector: &SelectorMatrix,
) -> Result<MetricBundle> {
    let ratio = scenario.array.spacing_ratio;
    let islr = spatial_islr(s, ams)?;
    let beamwidth_ratios = ams
        .desired_angles()
        .into_iter()
        .map(|t| Ok(BeamwidthEntry { theta_deg: t, ratio: beamwidth_ratio(s, t, ams.peak_deg, ratio)? }))
        .collect::<Result<Vec<_>>>()?;
    let mut peak_angle_deg = f64::NAN;
    let mut peak_power = f64::NEG_INFINITY;
    for t in scenario.angles.grid() {
        let p = beampattern(s, t, ratio)?;
        if p > peak_power {
            peak_power = p;
            peak_angle_deg = t;
        }
    }
    let corr = correlation_level_db(s);
    Ok(MetricBundle {
        spatial_islr: islr,
        islr_db: db10(islr, 1.0),
        mask_excess: mask_excess(s, selector, scenario.mask.gamma),
        beamwidth_ratios,
        peak_angle_deg,
        similarity_distance: similarity_distance(s, &scenario.similarity.s0)?,
        cm_deviation: constant_modulus_deviation(s),
        peak_auto_sidelobe_db: corr.peak_auto_sidelobe_db,
        peak_cross_db: corr.peak_cross_db,
    })
}
