//! Uniform linear array model: steering vectors, transmit beampattern,
//! aggregate angle matrices and spatial ISLR.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, WiseError};
use crate::scenario::Scenario;
use crate::waveform::WaveformMatrix;

/// Denominators below this are treated as zero.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// `a(theta)[m] = exp(j 2 pi (d / lambda) m sin(theta))`, `theta` in degrees.
pub fn steering_vector(theta_deg: f64, num_tx: usize, spacing_ratio: f64) -> Result<DVector<Complex64>> {
    if !(-90.0..=90.0).contains(&theta_deg) {
        return Err(WiseError::AngleDomain(theta_deg));
    }
    let phase_step = 2.0 * PI * spacing_ratio * theta_deg.to_radians().sin();
    Ok(DVector::from_fn(num_tx, |m, _| Complex64::from_polar(1.0, phase_step * m as f64)))
}

/// Rank-one `a(theta) a(theta)^H`.
pub fn angle_matrix(theta_deg: f64, num_tx: usize, spacing_ratio: f64) -> Result<DMatrix<Complex64>> {
    let a = steering_vector(theta_deg, num_tx, spacing_ratio)?;
    Ok(&a * a.adjoint())
}

/// Real part of `x^H A x`.
pub fn quad_form(a: &DMatrix<Complex64>, x: &DVector<Complex64>) -> f64 {
    x.dotc(&(a * x)).re
}

/// Sum of `s_n^H A s_n` over every column of `s`.
pub fn sum_quad_form(a: &DMatrix<Complex64>, s: &WaveformMatrix) -> f64 {
    let prod = a * s.as_matrix();
    s.as_matrix()
        .iter()
        .zip(prod.iter())
        .map(|(x, ax)| (x.conj() * ax).re)
        .sum()
}

/// `P(S, theta) = (1/N) sum_n |a(theta)^H s_n|^2`.
pub fn beampattern(s: &WaveformMatrix, theta_deg: f64, spacing_ratio: f64) -> Result<f64> {
    let a = steering_vector(theta_deg, s.num_tx(), spacing_ratio)?;
    let n = s.code_length();
    if n == 0 {
        return Err(WiseError::Dimension { expected: "N >= 1 columns".into(), got: "0".into() });
    }
    let proj = a.adjoint() * s.as_matrix();
    Ok(proj.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64)
}

/// Aggregate and per-angle quadratic-form matrices of a scenario.
#[derive(Debug, Clone)]
pub struct AngleMatrixSet {
    pub num_tx: usize,
    pub code_length: usize,
    pub spacing_ratio: f64,
    /// `(1/N) sum_{theta in undesired} A(theta)`.
    pub a_u: DMatrix<Complex64>,
    /// `(1/N) sum_{theta in desired} A(theta)`.
    pub a_d: DMatrix<Complex64>,
    /// Un-normalized `A(theta)` for each desired grid angle.
    pub desired: Vec<(f64, DMatrix<Complex64>)>,
    /// Un-normalized `A(theta0)`.
    pub peak: DMatrix<Complex64>,
    pub peak_deg: f64,
    pub undesired_angles: Vec<f64>,
}

impl AngleMatrixSet {
    /// Number of desired grid angles.
    pub fn k_d(&self) -> usize {
        self.desired.len()
    }

    pub fn desired_angles(&self) -> Vec<f64> {
        self.desired.iter().map(|(t, _)| *t).collect()
    }

    /// Upper bound `K_d M^2` on the summed desired-angle power.
    pub fn power_bound(&self) -> f64 {
        (self.k_d() * self.num_tx * self.num_tx) as f64
    }
}

pub fn build_angle_matrices(s: &Scenario) -> Result<AngleMatrixSet> {
    let m = s.num_tx();
    let n = s.code_length();
    let ratio = s.array.spacing_ratio;
    let desired = s.angles.desired_angles();
    let undesired = s.angles.undesired_angles();
    if desired.is_empty() {
        return Err(WiseError::Config("desired angle set is empty".into()));
    }
    if undesired.is_empty() {
        return Err(WiseError::Config("undesired angle set is empty".into()));
    }
    let scale = 1.0 / n as f64;
    let mut a_u = DMatrix::zeros(m, m);
    for &t in &undesired {
        a_u += angle_matrix(t, m, ratio)?;
    }
    let mut a_d = DMatrix::zeros(m, m);
    let mut per_desired = Vec::with_capacity(desired.len());
    for &t in &desired {
        let a = angle_matrix(t, m, ratio)?;
        a_d += &a;
        per_desired.push((t, a));
    }
    Ok(AngleMatrixSet {
        num_tx: m,
        code_length: n,
        spacing_ratio: ratio,
        a_u: a_u * Complex64::from(scale),
        a_d: a_d * Complex64::from(scale),
        desired: per_desired,
        peak: angle_matrix(s.angles.peak_deg, m, ratio)?,
        peak_deg: s.angles.peak_deg,
        undesired_angles: undesired,
    })
}

/// `f(S) = sum_n s_n^H A_u s_n / sum_n s_n^H A_d s_n`.
pub fn spatial_islr(s: &WaveformMatrix, ams: &AngleMatrixSet) -> Result<f64> {
    if s.num_tx() != ams.num_tx {
        return Err(WiseError::Dimension {
            expected: format!("{} rows", ams.num_tx),
            got: format!("{} rows", s.num_tx()),
        });
    }
    let num = sum_quad_form(&ams.a_u, s);
    let den = sum_quad_form(&ams.a_d, s);
    if den <= DEGENERATE_TOL {
        return Err(WiseError::Degenerate(format!("desired-angle power {den:e} is zero")));
    }
    Ok(num / den)
}

/// `P(S, theta_d) / P(S, theta0)`; the 3 dB constraint holds iff this lies
/// in `[0.5, 1]`.
pub fn beamwidth_ratio(s: &WaveformMatrix, theta_d: f64, theta0: f64, spacing_ratio: f64) -> Result<f64> {
    let p0 = beampattern(s, theta0, spacing_ratio)?;
    if p0 <= DEGENERATE_TOL {
        return Err(WiseError::Degenerate(format!("zero power at peak angle {theta0}")));
    }
    Ok(beampattern(s, theta_d, spacing_ratio)? / p0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeampatternRow {
    pub theta_deg: f64,
    pub power_linear: f64,
    /// `10 log10(P / max P)`, floored at -300 dB.
    pub power_db: f64,
}

pub fn beampattern_table(s: &WaveformMatrix, angles: &[f64], spacing_ratio: f64) -> Result<Vec<BeampatternRow>> {
    let powers = angles
        .iter()
        .map(|&t| beampattern(s, t, spacing_ratio))
        .collect::<Result<Vec<_>>>()?;
    let peak = powers.iter().cloned().fold(0.0, f64::max);
    Ok(angles
        .iter()
        .zip(powers)
        .map(|(&theta_deg, p)| BeampatternRow {
            theta_deg,
            power_linear: p,
            power_db: crate::metrics::db10(p, peak),
        })
        .collect())
}
