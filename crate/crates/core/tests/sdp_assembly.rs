//! Assembly structure and solver checks for the per-iteration conic program.

use nalgebra::DMatrix;
use num_complex::Complex64;

use wise_core::lifting::{eig_symmetrized, smallest_m_eigvecs};
use wise_core::metrics::similarity_distance;
use wise_core::scenario::{parse_scenario, Scenario};
use wise_core::sdp::{assemble_iteration, solve, Family};
use wise_core::spatial::{angle_matrix, build_angle_matrices, AngleMatrixSet};
use wise_core::spectral::{build_selector, stopband_bins, SelectorMatrix};
use wise_core::wise::{initialize, Problem};
use wise_core::WiseError;

const TOL: f64 = 1e-8;

fn prepared(s: &Scenario) -> (AngleMatrixSet, SelectorMatrix) {
    let ams = build_angle_matrices(s).unwrap();
    let bins = stopband_bins(s.code_length(), &s.mask.stopbands);
    (ams, build_selector(&bins))
}

fn tiny() -> Scenario {
    parse_scenario(
        r#"
        m = 2
        n = 3
        grid_step_deg = 15.0
        theta_d = [0.0, 0.0]
        theta0 = 0.0
        stopbands = []
        "#,
    )
    .unwrap()
}

fn identity_slack(s: &Scenario) -> (Vec<DMatrix<Complex64>>, Vec<f64>) {
    let m = s.num_tx();
    let v = DMatrix::<Complex64>::identity(m + 1, m);
    (vec![v; s.code_length()], vec![1.0; s.code_length()])
}

#[test]
fn block_counts_with_previous_eigenvectors() {
    let s = tiny();
    let (ams, sel) = prepared(&s);
    let (v, b) = identity_slack(&s);
    let p = assemble_iteration(&s, &ams, &sel, Some(&v), Some(&b)).unwrap();
    let n = s.code_length();
    assert_eq!(p.psd_block_count(), 3 * n);
    assert_eq!(p.blocks_of(Family::Similarity).count(), 1);
    assert_eq!(p.row_count(Family::UnitDiagonal), s.num_tx() * n);
    assert_eq!(p.row_count(Family::QCorner), n);
    assert_eq!(p.row_count(Family::Spectral), 0);
    assert_eq!(p.row_count(Family::SlackBounds), 2 * n);
    assert_eq!(p.blocks_of(Family::SlackPsd).count(), n);
}

#[test]
fn relaxed_problem_drops_slack_blocks() {
    let s = tiny();
    let (ams, sel) = prepared(&s);
    let p = assemble_iteration(&s, &ams, &sel, None, None).unwrap();
    assert_eq!(p.psd_block_count(), 2 * s.code_length());
    assert_eq!(p.row_count(Family::SlackBounds), 0);
    assert_eq!(p.blocks_of(Family::SlackPsd).count(), 0);
    assert!(p.layout.slack(0).is_none());
}

#[test]
fn beam_rows_per_desired_angle() {
    let s = Scenario::desk();
    let (ams, sel) = prepared(&s);
    let p = assemble_iteration(&s, &ams, &sel, None, None).unwrap();
    // the peak angle's own rows are identically zero and skipped
    let k = ams.k_d() - 1;
    assert_eq!(p.row_count(Family::BeamUpper), k);
    assert_eq!(p.row_count(Family::BeamLower), k);
    assert_eq!(p.row_count(Family::PowerBound), 1);
    assert_eq!(p.blocks_of(Family::Spectral).count(), s.num_tx() * sel.num_bins());
}

#[test]
fn similarity_radius_scales_with_size() {
    let s = Scenario::desk();
    let (ams, sel) = prepared(&s);
    let p = assemble_iteration(&s, &ams, &sel, None, None).unwrap();
    let block = p.blocks_of(Family::Similarity).next().unwrap();
    let expected = s.similarity.delta * ((s.num_tx() * s.code_length()) as f64).sqrt();
    assert!((block.rows[0].constant - expected).abs() < 1e-12);
    assert_eq!(block.rows.len(), 1 + 2 * s.num_tx() * s.code_length());
}

#[test]
fn mismatched_slack_inputs_rejected() {
    let s = tiny();
    let (ams, sel) = prepared(&s);
    let (v, b) = identity_slack(&s);
    let short = &b[..1];
    assert!(matches!(assemble_iteration(&s, &ams, &sel, Some(&v), Some(short)), Err(WiseError::Slack(_))));
    assert!(matches!(assemble_iteration(&s, &ams, &sel, Some(&v), None), Err(WiseError::Slack(_))));
    assert!(matches!(assemble_iteration(&s, &ams, &sel, None, Some(&b)), Err(WiseError::Slack(_))));
}

#[test]
fn dump_lists_all_sections() {
    let s = tiny();
    let (ams, sel) = prepared(&s);
    let p = assemble_iteration(&s, &ams, &sel, None, None).unwrap();
    let mut buf = Vec::new();
    p.dump(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    for section in ["VARIABLES", "OBJECTIVE", "CONES", "MATRIX", "CONSTANTS"] {
        assert!(text.lines().any(|l| l.starts_with(section)), "missing {section}");
    }
    assert!(text.contains(&format!("VARIABLES {}", p.num_vars())));
}

#[test]
fn orthogonal_angle_sets_reach_zero_objective() {
    let s = parse_scenario(
        r#"
        m = 2
        n = 1
        grid_step_deg = 90.0
        theta_d = [90.0, 90.0]
        theta_u = [[0.0, 0.0]]
        theta0 = 90.0
        stopbands = []
        "#,
    )
    .unwrap();
    let (ams, sel) = prepared(&s);
    let p = assemble_iteration(&s, &ams, &sel, None, None).unwrap();
    let sol = solve(&p, TOL).unwrap();
    assert!(sol.objective.abs() < 1e-6, "objective {}", sol.objective);
}

#[test]
fn desk_relaxed_solution_is_feasible_under_independent_checks() {
    let s = Scenario::desk();
    let (ams, sel) = prepared(&s);
    let p = assemble_iteration(&s, &ams, &sel, None, None).unwrap();
    let sol = solve(&p, TOL).unwrap();
    let check_tol = 1e-6;

    let mut desired_energy = 0.0;
    for x in &sol.xs {
        let eig = x.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&v| v >= -check_tol));
        for i in 0..s.num_tx() {
            assert!((x[(i, i)].re - 1.0).abs() < check_tol);
        }
        desired_energy += (&ams.a_d * x).trace().re;
    }
    assert!(desired_energy <= ams.power_bound() + check_tol);

    let lifted = |theta: f64| -> f64 {
        let a = angle_matrix(theta, s.num_tx(), s.array.spacing_ratio).unwrap();
        sol.xs.iter().map(|x| (&a * x).trace().re).sum()
    };
    let peak = lifted(s.angles.peak_deg);
    for theta in s.angles.desired_angles() {
        let r = lifted(theta) / peak;
        assert!((0.5 - check_tol..=1.0 + check_tol).contains(&r), "ratio {r} at {theta}");
    }

    for m in 0..s.num_tx() {
        let g = sel.apply(&sol.s.sequence(m));
        assert!(g.iter().all(|z| z.norm() <= s.mask.gamma + check_tol));
    }
    let d = similarity_distance(&sol.s, &s.similarity.s0).unwrap();
    assert!(d <= s.similarity.delta + check_tol);
    assert!(sol.stats.max_constraint_residual <= 10.0 * TOL);
}

#[test]
fn objective_stable_across_tolerances() {
    let s = Scenario::desk();
    let (ams, sel) = prepared(&s);
    let p = assemble_iteration(&s, &ams, &sel, None, None).unwrap();
    let tight = solve(&p, 1e-8).unwrap();
    let loose = solve(&p, 1e-6).unwrap();
    assert!((tight.objective - loose.objective).abs() <= 10.0 * 1e-6, "{} vs {}", tight.objective, loose.objective);
}

#[test]
fn initial_eigenvectors_are_orthonormal() {
    let problem = Problem::new(&Scenario::desk()).unwrap();
    let state = initialize(&problem).unwrap();
    let m = problem.scenario.num_tx();
    for ((v, slice), b) in state.v.iter().zip(&state.slices).zip(&state.b) {
        assert!((v.adjoint() * v - DMatrix::<Complex64>::identity(m, m)).norm() < 1e-8);
        assert_eq!(*v, smallest_m_eigvecs(&slice.q));
        assert!((b - slice.q_second_largest().max(0.0)).abs() < 1e-12);
        let top = eig_symmetrized(&(v.adjoint() * &slice.q * v)).values[m - 1];
        assert!(top <= b + 1e-9, "{top} > {b}");
    }
}
