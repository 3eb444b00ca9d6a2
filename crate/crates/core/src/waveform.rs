//! The transmitted code matrix.
//!
//! Rows are the per-antenna fast-time sequences, columns are the space
//! snapshots seen by the array at one time sample.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, WiseError};

/// Complex `M x N` waveform matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformMatrix(DMatrix<Complex64>);

impl WaveformMatrix {
    pub fn new(inner: DMatrix<Complex64>) -> Self {
        Self(inner)
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self(DMatrix::zeros(m, n))
    }

    pub fn from_fn(m: usize, n: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self(DMatrix::from_fn(m, n, f))
    }

    /// Unimodular matrix from a phase function (radians).
    pub fn from_phases(m: usize, n: usize, mut phase: impl FnMut(usize, usize) -> f64) -> Self {
        Self::from_fn(m, n, |r, c| Complex64::from_polar(1.0, phase(r, c)))
    }

    pub fn num_tx(&self) -> usize {
        self.0.nrows()
    }

    pub fn code_length(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.0[(m, n)]
    }

    /// Space snapshot `n` (column).
    pub fn snapshot(&self, n: usize) -> DVector<Complex64> {
        self.0.column(n).into_owned()
    }

    /// Fast-time sequence of antenna `m` (row, as a column vector).
    pub fn sequence(&self, m: usize) -> DVector<Complex64> {
        self.0.row(m).transpose()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self(self.0.map(|z| z * c))
    }

    /// Entrywise projection onto the unit circle; zero entries map to 1.
    pub fn project_unimodular(&self) -> Self {
        Self(self.0.map(|z| {
            let r = z.norm();
            if r > 0.0 {
                z / r
            } else {
                Complex64::new(1.0, 0.0)
            }
        }))
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        (&self.0 - &other.0).norm()
    }

    pub fn check_shape(&self, m: usize, n: usize) -> Result<()> {
        if self.num_tx() != m || self.code_length() != n {
            return Err(WiseError::Dimension {
                expected: format!("{m}x{n}"),
                got: format!("{}x{}", self.num_tx(), self.code_length()),
            });
        }
        Ok(())
    }

    /// Largest deviation of any entry modulus from one.
    pub fn max_modulus_error(&self) -> f64 {
        self.0.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

impl From<DMatrix<Complex64>> for WaveformMatrix {
    fn from(m: DMatrix<Complex64>) -> Self {
        Self(m)
    }
}
