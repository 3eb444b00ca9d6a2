//! Semidefinite relaxation followed by per-snapshot rank-one rounding.

use std::time::Instant;

use num_complex::Complex64;

use crate::error::Result;
use crate::lifting::extract_rank_one;
use crate::scenario::Scenario;
use crate::wise::{finish, relaxed_summary, Trace, initialize, Problem, RunResult, TerminationReason};
use crate::waveform::WaveformMatrix;

/// Solve the relaxation once, then take the principal eigenvector of each
/// `X_n` projected to unit modulus. Each column's phase is rotated so its
/// inner product with the relaxed column is real and nonnegative.
pub fn sdr_round_problem(problem: &Problem) -> Result<RunResult> {
    let start = Instant::now();
    let state = initialize(problem)?;
    let m = problem.scenario.num_tx();
    let n = problem.scenario.code_length();
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let u = extract_rank_one(&state.slices[k].x);
        let relaxed = state.s.snapshot(k);
        let ip: Complex64 = u.iter().zip(relaxed.iter()).map(|(a, b)| a.conj() * b).sum();
        let rot = if ip.norm() > 1e-12 { ip / ip.norm() } else { Complex64::new(1.0, 0.0) };
        cols.push(u * rot);
    }
    let s = WaveformMatrix::from_fn(m, n, |i, k| cols[k][i]);
    let mut record = state.record();
    record.seconds = start.elapsed().as_secs_f64();
    let initial = relaxed_summary(problem, &state);
    let trace = Trace { history: vec![record], b_history: vec![state.b.clone()], initial, failure: None };
    finish(problem, &state, s, TerminationReason::Rounded, trace)
}

pub fn sdr_round(scenario: &Scenario) -> Result<RunResult> {
    sdr_round_problem(&Problem::new(scenario)?)
}
