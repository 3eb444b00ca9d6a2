//! The iterative rank-one driver.
//!
//! Each iteration solves the lifted SDP with the slack constraint
//! `b_n I - V_n^H Q_n V_n >= 0` built from the previous iterate, then
//! re-derives `V_n` (eigenvectors of the `M` smallest eigenvalues of
//! `Q_n`) and `b_n` (second largest eigenvalue of `Q_n`). The loop ends when
//! the eigenvalue-ratio statistic `xi` drops below `e1` and/or the lifting
//! gap drops below `e2`, depending on the termination mode.

use std::io::Write;
use std::time::Instant;

use log::{debug, info, warn};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WiseError};
use crate::lifting::{eig_symmetrized, lift, rank_diagnostics, LiftedSlice, RankDiagnostics};
use crate::metrics::{compute_metrics, MetricBundle};
use crate::scenario::{Scenario, TerminationMode};
use crate::sdp::{assemble_iteration, solve_with, ClarabelSolver, ConicSolution, ConicSolver};
use crate::spatial::{build_angle_matrices, AngleMatrixSet};
use crate::spectral::{build_selector, stopband_bins, SelectorMatrix};
use crate::waveform::WaveformMatrix;

/// Scenario with its precomputed angle matrices and spectral selector.
pub struct Problem {
    pub scenario: Scenario,
    pub ams: AngleMatrixSet,
    pub selector: SelectorMatrix,
    solver: Box<dyn ConicSolver>,
}

impl Problem {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Self::with_solver(scenario, Box::new(ClarabelSolver::default()))
    }

    pub fn with_solver(scenario: &Scenario, solver: Box<dyn ConicSolver>) -> Result<Self> {
        scenario.validate().map_err(WiseError::Invalid)?;
        let ams = build_angle_matrices(scenario)?;
        let bins = stopband_bins(scenario.code_length(), &scenario.mask.stopbands);
        Ok(Self { scenario: scenario.clone(), ams, selector: build_selector(&bins), solver })
    }

    fn tol(&self) -> f64 {
        self.scenario.solver.solver_feas_tol
    }

    fn solve(&self, v_prev: Option<&[DMatrix<Complex64>]>, b_prev: Option<&[f64]>) -> Result<ConicSolution> {
        let p = assemble_iteration(&self.scenario, &self.ams, &self.selector, v_prev, b_prev)?;
        solve_with(self.solver.as_ref(), &p, self.tol())
    }

    /// `sum_n tr(A X_n)`.
    pub fn lifted_form(&self, a: &DMatrix<Complex64>, xs: &[DMatrix<Complex64>]) -> f64 {
        xs.iter().map(|x| (a * x).trace().re).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    #[serde(rename = "iter")]
    pub index: usize,
    pub xi: f64,
    pub gap: f64,
    pub sum_b: f64,
    /// `sum_n tr(A_u X_n)`.
    pub objective: f64,
    /// Largest independently evaluated constraint violation of the solve.
    pub residual: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Xi,
    Gap,
    Both,
    MaxIters,
    Infeasible,
    /// Single relaxed solve followed by rounding (baseline).
    Rounded,
}

impl TerminationReason {
    pub fn is_converged(self) -> bool {
        matches!(self, Self::Xi | Self::Gap | Self::Both)
    }
}

/// State after an accepted solve.
#[derive(Debug, Clone)]
pub struct WiseState {
    pub iteration: usize,
    pub s: WaveformMatrix,
    pub slices: Vec<LiftedSlice>,
    /// Eigenvectors of the `M` smallest eigenvalues of each `Q_n`.
    pub v: Vec<DMatrix<Complex64>>,
    /// Second largest eigenvalue of each `Q_n`.
    pub b: Vec<f64>,
    /// Slack values returned by the solver (empty for the relaxed solve).
    pub b_solver: Vec<f64>,
    pub diagnostics: RankDiagnostics,
    pub objective: f64,
    pub residual: f64,
    pub seconds: f64,
}

impl WiseState {
    pub fn xs(&self) -> Vec<DMatrix<Complex64>> {
        self.slices.iter().map(|s| s.x.clone()).collect()
    }

    pub fn record(&self) -> IterationRecord {
        IterationRecord {
            index: self.iteration,
            xi: self.diagnostics.xi,
            gap: self.diagnostics.gap,
            sum_b: self.b.iter().sum(),
            objective: self.objective,
            residual: self.residual,
            seconds: self.seconds,
        }
    }
}

fn state_from_solution(problem: &Problem, sol: ConicSolution, iteration: usize, seconds: f64) -> Result<WiseState> {
    let n = problem.scenario.code_length();
    let slices = (0..n)
        .into_par_iter()
        .map(|k| lift(&sol.s.snapshot(k), &sol.xs[k]))
        .collect::<Result<Vec<_>>>()?;
    let (v, b): (Vec<_>, Vec<_>) = slices
        .par_iter()
        .map(|slice| {
            let eig = eig_symmetrized(&slice.q);
            let k = eig.values.len();
            (eig.vectors.columns(0, k - 1).into_owned(), eig.values[k - 2].max(0.0))
        })
        .unzip();
    let diagnostics = rank_diagnostics(&slices)?;
    let objective = problem.lifted_form(&problem.ams.a_u, &sol.xs);
    Ok(WiseState {
        iteration,
        s: sol.s,
        slices,
        v,
        b,
        b_solver: sol.b,
        diagnostics,
        objective,
        residual: sol.stats.max_constraint_residual,
        seconds,
    })
}

/// Relaxed solve without the slack constraints; seeds `V_n` and `b_n`.
pub fn initialize(problem: &Problem) -> Result<WiseState> {
    let start = Instant::now();
    let sol = problem.solve(None, None)?;
    state_from_solution(problem, sol, 0, start.elapsed().as_secs_f64())
}

/// One solve of the slack-constrained problem followed by the eigenvector
/// and bound updates.
pub fn iterate(problem: &Problem, state: &WiseState) -> Result<WiseState> {
    let start = Instant::now();
    let sol = problem.solve(Some(&state.v), Some(&state.b))?;
    state_from_solution(problem, sol, state.iteration + 1, start.elapsed().as_secs_f64())
}

/// Termination test for the configured mode, `None` to keep iterating.
pub fn termination(diag: &RankDiagnostics, e1: f64, e2: f64, mode: TerminationMode) -> Option<TerminationReason> {
    let xi_ok = diag.xi < e1;
    let gap_ok = diag.gap < e2;
    match (mode, xi_ok, gap_ok) {
        (_, true, true) => Some(TerminationReason::Both),
        (TerminationMode::Either, true, false) => Some(TerminationReason::Xi),
        (TerminationMode::Either, false, true) => Some(TerminationReason::Gap),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Final unimodular waveform.
    pub s_star: WaveformMatrix,
    /// Waveform before the unimodular projection.
    pub s_raw: WaveformMatrix,
    /// `||S* - S_raw||_F`.
    pub projection_delta: f64,
    pub converged: bool,
    pub reason: TerminationReason,
    pub termination_mode: TerminationMode,
    pub history: Vec<IterationRecord>,
    /// `b_n` after every accepted solve, starting with the relaxed solve.
    pub b_history: Vec<Vec<f64>>,
    /// Rank statistics of the relaxed solve.
    pub initial_diagnostics: RankDiagnostics,
    /// `sum_n tr(A_u X_n)` of the relaxed solve.
    pub relaxed_objective: f64,
    /// `sum tr(A_u X_n) / sum tr(A_d X_n)` of the relaxed solve.
    pub relaxed_lifted_islr: f64,
    /// `sum tr(A_u X_n) / sum tr(A_d X_n)` at the final accepted iterate.
    pub lifted_islr: f64,
    /// Final accepted lifted slices.
    pub final_slices: Vec<LiftedSlice>,
    pub metrics: MetricBundle,
    /// Set when the run stopped on a solver failure.
    pub failure: Option<String>,
}

impl RunResult {
    /// `relaxed_objective / (K_d M^2)`: no feasible unimodular waveform has
    /// a smaller spatial ISLR.
    pub fn islr_lower_bound(&self, ams: &AngleMatrixSet) -> f64 {
        self.relaxed_objective / ams.power_bound()
    }
}

fn lifted_islr(problem: &Problem, state: &WiseState) -> f64 {
    state.objective / problem.lifted_form(&problem.ams.a_d, &state.xs())
}

/// Rank statistics, lifted objective and lifted ISLR of the relaxed solve.
pub(crate) fn relaxed_summary(problem: &Problem, state: &WiseState) -> (RankDiagnostics, f64, f64) {
    (state.diagnostics, state.objective, lifted_islr(problem, state))
}

/// Per-run records collected by a driver.
pub(crate) struct Trace {
    pub history: Vec<IterationRecord>,
    pub b_history: Vec<Vec<f64>>,
    pub initial: (RankDiagnostics, f64, f64),
    pub failure: Option<String>,
}

pub(crate) fn finish(
    problem: &Problem,
    state: &WiseState,
    s_star: WaveformMatrix,
    reason: TerminationReason,
    trace: Trace,
) -> Result<RunResult> {
    let Trace { history, b_history, initial, failure } = trace;
    let metrics = compute_metrics(&s_star, &problem.scenario, &problem.ams, &problem.selector)?;
    Ok(RunResult {
        projection_delta: s_star.frobenius_distance(&state.s),
        s_raw: state.s.clone(),
        s_star,
        converged: reason.is_converged(),
        reason,
        termination_mode: problem.scenario.solver.termination_mode,
        history,
        b_history,
        initial_diagnostics: initial.0,
        relaxed_objective: initial.1,
        relaxed_lifted_islr: initial.2,
        lifted_islr: lifted_islr(problem, state),
        final_slices: state.slices.clone(),
        metrics,
        failure,
    })
}

/// Run the full iteration on a prepared problem.
pub fn run_problem(problem: &Problem) -> Result<RunResult> {
    let params = &problem.scenario.solver;
    let mut state = initialize(problem)?;
    info!(
        "relaxed solve: xi = {:.3e}, gap = {:.3e}, sum b = {:.3e}",
        state.diagnostics.xi,
        state.diagnostics.gap,
        state.b.iter().sum::<f64>()
    );
    let initial = relaxed_summary(problem, &state);
    let mut history = vec![state.record()];
    let mut b_history = vec![state.b.clone()];
    let mut failure = None;

    let reason = loop {
        if let Some(reason) = termination(&state.diagnostics, params.e1, params.e2, params.termination_mode) {
            break reason;
        }
        if state.iteration >= params.max_iters {
            break TerminationReason::MaxIters;
        }
        match iterate(problem, &state) {
            Ok(next) => {
                debug!(
                    "iter {}: xi = {:.3e}, gap = {:.3e}, sum b = {:.3e}, obj = {:.6e}",
                    next.iteration,
                    next.diagnostics.xi,
                    next.diagnostics.gap,
                    next.b.iter().sum::<f64>(),
                    next.objective
                );
                history.push(next.record());
                b_history.push(next.b.clone());
                state = next;
            }
            Err(e @ (WiseError::Infeasible { .. } | WiseError::NumericalFailure(_))) => {
                warn!("iteration {} failed: {e}; keeping iterate {}", state.iteration + 1, state.iteration);
                failure = Some(e.to_string());
                break TerminationReason::Infeasible;
            }
            Err(e) => return Err(e),
        }
    };
    info!("stopped after {} iterations: {reason:?}", state.iteration);
    let s_star = state.s.project_unimodular();
    finish(problem, &state, s_star, reason, Trace { history, b_history, initial, failure })
}

pub fn run(scenario: &Scenario) -> Result<RunResult> {
    run_problem(&Problem::new(scenario)?)
}

/// History as CSV: `iter,xi,gap,sum_b,objective,residual,seconds`.
pub fn write_history_csv<W: Write>(w: W, history: &[IterationRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for rec in history {
        writer.serialize(rec).map_err(|e| WiseError::Io(std::io::Error::other(e)))?;
    }
    writer.flush()?;
    Ok(())
}
