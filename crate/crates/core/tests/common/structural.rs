//! Structural identities checked on random instances.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use wise_core::lifting::{complex_to_real_psd, eig_hermitian, eig_symmetrized, lift};
use wise_core::metrics::cross_correlation;
use wise_core::spectral::spectrum;

pub type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn cvec(parts: &[(f64, f64)]) -> DVector<Complex64> {
    DVector::from_iterator(parts.len(), parts.iter().map(|&(re, im)| Complex64::new(re, im)))
}

pub fn cmat(k: usize, c: usize, parts: &[(f64, f64)]) -> DMatrix<Complex64> {
    DMatrix::from_iterator(k, c, parts.iter().map(|&(re, im)| Complex64::new(re, im)))
}

/// `Q = [[1, s^H], [s, s s^H + w w^H]]` has rank one exactly when `w = 0`,
/// and the lifting gap detects it.
pub fn guttman_rank(s: &DVector<Complex64>, w: Option<&DVector<Complex64>>) -> Check {
    let mut x = s * s.adjoint();
    if let Some(w) = w {
        x += w * w.adjoint();
    }
    let slice = lift(s, &x).map_err(|e| e.to_string())?;
    let vals = eig_symmetrized(&slice.q).values;
    let top = vals[vals.len() - 1];
    let rank_one = vals[vals.len() - 2] <= 1e-10 * top;
    let gap_small = slice.lifting_gap() < 1e-8;
    ensure(rank_one == gap_small, || {
        format!("rank-one {rank_one} but gap {:.3e} (second eig {:.3e})", slice.lifting_gap(), vals[vals.len() - 2])
    })?;
    ensure(rank_one == w.is_none(), || format!("rank-one {rank_one} with w present {}", w.is_some()))
}

/// Eigenvalues of `V^H Q V` interlace those of `Q` for orthonormal `V` with
/// one column fewer than `Q`.
pub fn interlacing(raw_q: &DMatrix<Complex64>, raw_v: &DMatrix<Complex64>) -> Check {
    let q = raw_q * raw_q.adjoint();
    let v = raw_v.clone().qr().q();
    let v = v.columns(0, q.nrows() - 1).into_owned();
    let rho = eig_symmetrized(&q).values;
    let nu = eig_symmetrized(&(v.adjoint() * &q * &v)).values;
    let tol = 1e-10 * rho.last().unwrap().abs().max(1.0);
    for i in 0..nu.len() {
        ensure(rho[i] <= nu[i] + tol && nu[i] <= rho[i + 1] + tol, || {
            format!("index {i}: rho {:?} nu {:?}", rho, nu)
        })?;
    }
    Ok(())
}

/// The real embedding carries each eigenvalue of `H` twice.
pub fn embedding_doubling(raw: &DMatrix<Complex64>) -> Check {
    let h = raw + raw.adjoint();
    let lam = eig_hermitian(&h).map_err(|e| e.to_string())?.values;
    let r = complex_to_real_psd(&h);
    ensure((&r - r.transpose()).norm() == 0.0, || "embedding not symmetric".into())?;
    let mut mu: Vec<f64> = r.symmetric_eigen().eigenvalues.iter().cloned().collect();
    mu.sort_by(f64::total_cmp);
    let tol = 1e-10 * lam.iter().map(|v| v.abs()).fold(1.0, f64::max);
    for (i, l) in lam.iter().enumerate() {
        ensure((mu[2 * i] - l).abs() <= tol && (mu[2 * i + 1] - l).abs() <= tol, || {
            format!("complex {lam:?} vs real {mu:?}")
        })?;
    }
    Ok(())
}

/// `sum |F x|^2 = N sum |x|^2`.
pub fn dft_unitarity(x: &[Complex64]) -> Check {
    let n = x.len() as f64;
    let time: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    let freq: f64 = spectrum(x).iter().map(|z| z.norm_sqr()).sum();
    ensure((freq - n * time).abs() <= 1e-10 * (n * time).max(1e-300), || format!("{freq} vs {}", n * time))
}

/// `r_ab(l) = conj(r_ba(-l))`.
pub fn correlation_symmetry(a: &[Complex64], b: &[Complex64]) -> Check {
    let rab = cross_correlation(a, b).map_err(|e| e.to_string())?;
    let rba = cross_correlation(b, a).map_err(|e| e.to_string())?;
    let len = rab.len();
    let scale = rab.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    for i in 0..len {
        let d = (rab[i] - rba[len - 1 - i].conj()).norm();
        ensure(d <= 1e-10 * scale, || format!("index {i}: {} vs {}", rab[i], rba[len - 1 - i].conj()))?;
    }
    Ok(())
}
