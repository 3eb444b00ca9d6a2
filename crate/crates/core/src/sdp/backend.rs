//! Conic solver contract and the Clarabel interior-point backend.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT, PowerConeT,
    SecondOrderConeT, SolverStatus, SupportedConeT, ZeroConeT,
};
use log::debug;
use nalgebra::DMatrix;
use num_complex::Complex64;

use super::problem::{Cone, ConicProblem, Family};
use crate::error::{Result, WiseError};
use crate::lifting::symmetrize;
use crate::waveform::WaveformMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub seconds: f64,
    /// Largest independently evaluated cone violation.
    pub max_constraint_residual: f64,
    pub worst_family: Option<Family>,
    /// Tolerance the accepted solve ran at.
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub s: WaveformMatrix,
    pub xs: Vec<DMatrix<Complex64>>,
    pub b: Vec<f64>,
    pub objective: f64,
    pub raw: Vec<f64>,
    pub stats: SolveStats,
}

/// Anything that can minimize a linear objective over products of zero,
/// nonnegative, second-order, power and PSD cones.
pub trait ConicSolver: Send + Sync {
    /// Raw primal vector and status for one attempt at tolerance `tol`.
    fn solve_raw(&self, p: &ConicProblem, tol: f64) -> RawSolve;
}

#[derive(Debug, Clone)]
pub struct RawSolve {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub stats: SolveStats,
}

/// Interior-point backend built on Clarabel.
#[derive(Debug, Clone)]
pub struct ClarabelSolver {
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        Self { max_iter: 400, verbose: false }
    }
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;

impl ConicSolver for ClarabelSolver {
    fn solve_raw(&self, p: &ConicProblem, tol: f64) -> RawSolve {
        let start = Instant::now();
        let nvars = p.num_vars();
        let nrows = p.num_rows();

        // Clarabel form: A x + s = b, s in K. Our rows read a.x + c in K,
        // so A = -a and b = c; PSD off-diagonals carry a sqrt(2) factor.
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut rhs = Vec::with_capacity(nrows);
        let mut cones: Vec<SupportedConeT<f64>> = Vec::with_capacity(p.blocks.len());
        let mut r = 0;
        for block in &p.blocks {
            let scales: Vec<f64> = match block.cone {
                Cone::Psd { order } => (0..order).flat_map(|c| (0..=c).map(move |i| if i == c { 1.0 } else { SQRT_2 })).collect(),
                _ => vec![1.0; block.rows.len()],
            };
            for (row, scale) in block.rows.iter().zip(scales) {
                for &(j, v) in &row.terms {
                    triplets.push((r, j, -v * scale));
                }
                rhs.push(row.constant * scale);
                r += 1;
            }
            cones.push(match block.cone {
                Cone::Zero => ZeroConeT(block.rows.len()),
                Cone::NonNeg => NonnegativeConeT(block.rows.len()),
                Cone::SecondOrder => SecondOrderConeT(block.rows.len()),
                Cone::Psd { order } => PSDTriangleConeT(order),
                Cone::Power { alpha } => PowerConeT(alpha),
            });
        }
        let a = csc_from_triplets(nrows, nvars, triplets);
        let pmat = CscMatrix::<f64>::zeros((nvars, nvars));

        let settings = DefaultSettingsBuilder::default()
            .verbose(self.verbose)
            .max_iter(self.max_iter)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .tol_ktratio(tol.max(1e-10))
            .build()
            .expect("valid solver settings");

        let mut solver = match DefaultSolver::new(&pmat, &p.objective, &a, &rhs, &cones, settings) {
            Ok(s) => s,
            Err(e) => {
                debug!("clarabel setup failed: {e:?}");
                return RawSolve {
                    status: SolveStatus::NumericalFailure,
                    x: vec![0.0; nvars],
                    stats: SolveStats { tolerance: tol, ..Default::default() },
                };
            }
        };
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::NearOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            // an unbounded linear objective means the assembly is wrong, not the scenario
            _ => SolveStatus::NumericalFailure,
        };
        let info = &solver.info;
        RawSolve {
            status,
            x: sol.x.clone(),
            stats: SolveStats {
                iterations: sol.iterations,
                primal_residual: sol.r_prim,
                dual_residual: sol.r_dual,
                duality_gap: info.gap_abs,
                seconds: start.elapsed().as_secs_f64(),
                max_constraint_residual: 0.0,
                worst_family: None,
                tolerance: tol,
            },
        }
    }
}

fn csc_from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    t.sort_unstable_by_key(|&(r, c, _)| (c, r));
    let mut colptr = vec![0usize; ncols + 1];
    let mut rowval = Vec::with_capacity(t.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(t.len());
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in t {
        if last == Some((r, c)) {
            *nzval.last_mut().expect("previous entry") += v;
            continue;
        }
        rowval.push(r);
        nzval.push(v);
        colptr[c + 1] += 1;
        last = Some((r, c));
    }
    for c in 0..ncols {
        colptr[c + 1] += colptr[c];
    }
    CscMatrix::new(nrows, ncols, colptr, rowval, nzval)
}

/// Relaxation factor applied to the tolerance on the retry after a
/// numerical failure.
pub const RETRY_RELAXATION: f64 = 100.0;

/// Solve `p` with `backend`, retrying once at a relaxed tolerance, and map
/// the primal vector back to `(S, X_n, b_n)`.
pub fn solve_with(backend: &dyn ConicSolver, p: &ConicProblem, tol: f64) -> Result<ConicSolution> {
    let mut attempt = backend.solve_raw(p, tol);
    if attempt.status == SolveStatus::NumericalFailure {
        debug!("numerical failure at tol {tol:e}; retrying relaxed");
        let retry = backend.solve_raw(p, tol * RETRY_RELAXATION);
        attempt = match retry.status {
            SolveStatus::Optimal => RawSolve { status: SolveStatus::NearOptimal, ..retry },
            _ => retry,
        };
    }
    let (family, residual) = p.max_residual(&attempt.x);
    attempt.stats.max_constraint_residual = residual;
    attempt.stats.worst_family = Some(family);
    match attempt.status {
        SolveStatus::Infeasible => {
            return Err(WiseError::Infeasible { family: family.to_string(), residual });
        }
        SolveStatus::NumericalFailure => {
            return Err(WiseError::NumericalFailure(format!(
                "no solution after relaxed retry (largest residual {residual:e} in {family})"
            )));
        }
        SolveStatus::Optimal | SolveStatus::NearOptimal => {}
    }
    let (s, xs, b) = p.layout.reconstruct(&attempt.x);
    Ok(ConicSolution {
        status: attempt.status,
        s,
        xs: xs.iter().map(symmetrize).collect(),
        b,
        objective: p.objective_value(&attempt.x),
        raw: attempt.x,
        stats: attempt.stats,
    })
}

/// Solve with the default Clarabel backend.
pub fn solve(p: &ConicProblem, tol: f64) -> Result<ConicSolution> {
    solve_with(&ClarabelSolver::default(), p, tol)
}
