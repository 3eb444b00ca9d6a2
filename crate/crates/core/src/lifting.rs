//! Lifted slices `Q_n = [[1, s_n^H], [s_n, X_n]]`, Hermitian
//! eigendecomposition, the complex-to-real PSD embedding and rank-one
//! diagnostics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Result, WiseError};

/// Allowed `max |H - H^H|` relative to `max(1, max |H|)`.
pub const HERMITIAN_TOL: f64 = 1e-10;

fn max_abs(h: &DMatrix<Complex64>) -> f64 {
    h.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitian_asymmetry(h: &DMatrix<Complex64>) -> f64 {
    if !h.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(h - h.adjoint()))
}

pub fn check_hermitian(h: &DMatrix<Complex64>) -> Result<()> {
    let asym = hermitian_asymmetry(h);
    if asym > HERMITIAN_TOL * max_abs(h).max(1.0) {
        return Err(WiseError::NotHermitian(asym));
    }
    Ok(())
}

/// `(H + H^H) / 2`.
pub fn symmetrize(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (h + h.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector
/// columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

pub fn eig_hermitian(h: &DMatrix<Complex64>) -> Result<HermitianEigen> {
    check_hermitian(h)?;
    Ok(eig_symmetrized(h))
}

/// Eigendecomposition of `(H + H^H) / 2` without the Hermitian check.
pub fn eig_symmetrized(h: &DMatrix<Complex64>) -> HermitianEigen {
    let eig = SymmetricEigen::new(symmetrize(h));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    // stable: ties keep the factorization's index order
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(h.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// `[[Re H, -Im H], [Im H, Re H]]`.
pub fn complex_to_real_psd(h: &DMatrix<Complex64>) -> DMatrix<f64> {
    let k = h.nrows();
    DMatrix::from_fn(2 * k, 2 * k, |r, c| {
        let z = h[(r % k, c % k)];
        match (r < k, c < k) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Eigenvectors of the `k - 1` smallest eigenvalues of a `k x k` Hermitian
/// matrix, as columns.
pub fn smallest_m_eigvecs(q: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = eig_symmetrized(q);
    let k = q.nrows();
    eig.vectors.columns(0, k.saturating_sub(1)).into_owned()
}

/// One time sample of the lifted problem.
#[derive(Debug, Clone)]
pub struct LiftedSlice {
    pub s: DVector<Complex64>,
    pub x: DMatrix<Complex64>,
    pub q: DMatrix<Complex64>,
}

pub fn lift(s: &DVector<Complex64>, x: &DMatrix<Complex64>) -> Result<LiftedSlice> {
    let m = s.len();
    if x.nrows() != m || x.ncols() != m {
        return Err(WiseError::Dimension {
            expected: format!("{m}x{m}"),
            got: format!("{}x{}", x.nrows(), x.ncols()),
        });
    }
    check_hermitian(x)?;
    let mut q = DMatrix::zeros(m + 1, m + 1);
    q[(0, 0)] = Complex64::new(1.0, 0.0);
    for i in 0..m {
        q[(i + 1, 0)] = s[i];
        q[(0, i + 1)] = s[i].conj();
    }
    q.view_mut((1, 1), (m, m)).copy_from(x);
    Ok(LiftedSlice { s: s.clone(), x: x.clone(), q })
}

impl LiftedSlice {
    /// Eigenvalues of `X` in descending order.
    pub fn x_eigenvalues(&self) -> Vec<f64> {
        let mut v = eig_symmetrized(&self.x).values;
        v.reverse();
        v
    }

    /// `||s s^H - X||_F`.
    pub fn lifting_gap(&self) -> f64 {
        (&self.s * self.s.adjoint() - &self.x).norm()
    }

    /// Second largest eigenvalue of `Q`.
    pub fn q_second_largest(&self) -> f64 {
        let v = eig_symmetrized(&self.q).values;
        v[v.len() - 2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankDiagnostics {
    /// `max_n xi_{n,2} / min_n xi_{n,1}`.
    pub xi: f64,
    /// `max_n ||s_n s_n^H - X_n||_F`.
    pub gap: f64,
}

pub fn rank_diagnostics(slices: &[LiftedSlice]) -> Result<RankDiagnostics> {
    let mut max_second = 0.0f64;
    let mut min_first = f64::INFINITY;
    let mut gap = 0.0f64;
    for (n, slice) in slices.iter().enumerate() {
        let eig = slice.x_eigenvalues();
        let first = eig[0];
        if first.is_nan() || first <= 0.0 {
            return Err(WiseError::Degenerate(format!("slice {n}: leading eigenvalue {first:e} is not positive")));
        }
        let second = eig.get(1).copied().unwrap_or(0.0).max(0.0);
        max_second = max_second.max(second);
        min_first = min_first.min(first);
        gap = gap.max(slice.lifting_gap());
    }
    if slices.is_empty() {
        return Ok(RankDiagnostics { xi: 0.0, gap: 0.0 });
    }
    Ok(RankDiagnostics { xi: max_second / min_first, gap })
}

/// Zero test for entries in the unimodular projection.
const ZERO_ENTRY: f64 = 1e-12;

/// Principal eigenvector scaled by `sqrt(lambda_1)`, projected entrywise
/// onto the unit circle (zero entries become 1), with the global phase
/// chosen so entry 0 is real positive.
pub fn extract_rank_one(x: &DMatrix<Complex64>) -> DVector<Complex64> {
    let eig = eig_symmetrized(x);
    let k = x.nrows();
    let lambda = eig.values[k - 1].max(0.0);
    let u = eig.vectors.column(k - 1) * Complex64::from(lambda.sqrt());
    let scale = u.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let projected = u.map(|z| {
        let r = z.norm();
        if r > ZERO_ENTRY * scale {
            z / r
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
    let phase = projected[0].conj();
    projected * phase
}
