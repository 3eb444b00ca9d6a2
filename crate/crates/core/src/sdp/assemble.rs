//! Builds one iteration of the lifted waveform problem as a [`ConicProblem`].

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::problem::{AffineRow, Cone, ConeBlock, ConicProblem, Family, VarLayout};
use crate::error::{Result, WiseError};
use crate::scenario::{PNorm, Scenario};
use crate::spatial::AngleMatrixSet;
use crate::spectral::SelectorMatrix;

/// Hermitian matrix affine in the decision vector:
/// `constant + sum_j x_j * basis_j`.
#[derive(Debug, Clone)]
pub struct HermitianAffine {
    pub constant: DMatrix<Complex64>,
    pub terms: Vec<(usize, DMatrix<Complex64>)>,
}

impl HermitianAffine {
    fn order(&self) -> usize {
        self.constant.nrows()
    }

    /// `V^H (.) V` applied to every component.
    fn congruence(&self, v: &DMatrix<Complex64>) -> Self {
        let vh = v.adjoint();
        Self {
            constant: &vh * &self.constant * v,
            terms: self.terms.iter().map(|(j, h)| (*j, &vh * h * v)).collect(),
        }
    }

    fn scale(mut self, c: f64) -> Self {
        let c = Complex64::new(c, 0.0);
        self.constant *= c;
        for (_, h) in &mut self.terms {
            *h *= c;
        }
        self
    }

    /// Rows of the real embedding `[[Re H, -Im H], [Im H, Re H]]`, upper
    /// triangle in column-major order.
    pub fn embedded_rows(&self) -> Vec<AffineRow> {
        let k = self.order();
        let entry = |h: &DMatrix<Complex64>, r: usize, c: usize| -> f64 {
            let z = h[(r % k, c % k)];
            match (r < k, c < k) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        };
        let mut rows = Vec::with_capacity(k * (2 * k + 1));
        for c in 0..2 * k {
            for r in 0..=c {
                let terms = self
                    .terms
                    .iter()
                    .filter_map(|(j, h)| {
                        let v = entry(h, r, c);
                        (v != 0.0).then_some((*j, v))
                    })
                    .collect();
                rows.push(AffineRow { terms, constant: entry(&self.constant, r, c) });
            }
        }
        rows
    }

    pub fn evaluate(&self, x: &[f64]) -> DMatrix<Complex64> {
        let mut out = self.constant.clone();
        for (j, h) in &self.terms {
            out += h * Complex64::new(x[*j], 0.0);
        }
        out
    }
}

fn unit(k: usize, r: usize, c: usize, z: Complex64) -> DMatrix<Complex64> {
    let mut h = DMatrix::zeros(k, k);
    h[(r, c)] += z;
    h
}

/// Hermitian basis for `X_n` placed at offset `off` in a `k x k` matrix.
fn x_terms(layout: &VarLayout, n: usize, k: usize, off: usize) -> Vec<(usize, DMatrix<Complex64>)> {
    let m = layout.num_tx;
    let one = Complex64::new(1.0, 0.0);
    let j = Complex64::new(0.0, 1.0);
    let mut terms = Vec::with_capacity(m * m);
    for i in 0..m {
        terms.push((layout.x_diag(n, i), unit(k, off + i, off + i, one)));
        for l in i + 1..m {
            let (a, b) = (off + i, off + l);
            terms.push((layout.x_re(n, i, l), unit(k, a, b, one) + unit(k, b, a, one)));
            terms.push((layout.x_im(n, i, l), unit(k, a, b, j) - unit(k, b, a, j)));
        }
    }
    terms
}

pub fn x_affine(layout: &VarLayout, n: usize) -> HermitianAffine {
    let m = layout.num_tx;
    HermitianAffine { constant: DMatrix::zeros(m, m), terms: x_terms(layout, n, m, 0) }
}

/// `Q_n = [[q_n, s_n^H], [s_n, X_n]]`.
pub fn q_affine(layout: &VarLayout, n: usize) -> HermitianAffine {
    let m = layout.num_tx;
    let k = m + 1;
    let one = Complex64::new(1.0, 0.0);
    let j = Complex64::new(0.0, 1.0);
    let mut terms = vec![(layout.q_corner(n), unit(k, 0, 0, one))];
    for i in 0..m {
        terms.push((layout.s_re(i, n), unit(k, i + 1, 0, one) + unit(k, 0, i + 1, one)));
        terms.push((layout.s_im(i, n), unit(k, i + 1, 0, j) - unit(k, 0, i + 1, j)));
    }
    terms.extend(x_terms(layout, n, k, 1));
    HermitianAffine { constant: DMatrix::zeros(k, k), terms }
}

/// Coefficients of `tr(A X_n)` on the parameters of `X_n`.
pub fn trace_terms(a: &DMatrix<Complex64>, layout: &VarLayout, n: usize) -> Vec<(usize, f64)> {
    let m = layout.num_tx;
    let mut t = Vec::with_capacity(m * m);
    for i in 0..m {
        t.push((layout.x_diag(n, i), a[(i, i)].re));
        for l in i + 1..m {
            t.push((layout.x_re(n, i, l), 2.0 * a[(i, l)].re));
            t.push((layout.x_im(n, i, l), 2.0 * a[(i, l)].im));
        }
    }
    t
}

/// `sum_n tr(A X_n)` as an affine row with `constant`.
fn summed_trace(a: &DMatrix<Complex64>, layout: &VarLayout, constant: f64) -> AffineRow {
    let terms = (0..layout.code_length).flat_map(|n| trace_terms(a, layout, n)).collect();
    AffineRow { terms, constant }
}

/// Merge duplicate variable indices and drop exact zeros.
fn compact(row: AffineRow) -> AffineRow {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (j, c) in row.terms {
        *acc.entry(j).or_insert(0.0) += c;
    }
    AffineRow { terms: acc.into_iter().filter(|(_, c)| *c != 0.0).collect(), constant: row.constant }
}

/// Assemble one iteration.
///
/// Without `v_prev`/`b_prev` this is the relaxed initialization problem:
/// the slack variables, their PSD blocks and their bounds are absent.
pub fn assemble_iteration(
    scenario: &Scenario,
    ams: &AngleMatrixSet,
    selector: &SelectorMatrix,
    v_prev: Option<&[DMatrix<Complex64>]>,
    b_prev: Option<&[f64]>,
) -> Result<ConicProblem> {
    let m = scenario.num_tx();
    let n = scenario.code_length();
    let slack = match (v_prev, b_prev) {
        (None, None) => None,
        (Some(v), Some(b)) => {
            if v.len() != n || b.len() != n {
                return Err(WiseError::Slack(format!(
                    "expected {n} slack entries, got {} eigenvector sets and {} bounds",
                    v.len(),
                    b.len()
                )));
            }
            if let Some(bad) = v.iter().find(|v| v.nrows() != m + 1 || v.ncols() != m) {
                return Err(WiseError::Slack(format!(
                    "eigenvector set is {}x{}, expected {}x{m}",
                    bad.nrows(),
                    bad.ncols(),
                    m + 1
                )));
            }
            Some((v, b))
        }
        _ => return Err(WiseError::Slack("eigenvectors and bounds must be given together".into())),
    };
    if ams.num_tx != m {
        return Err(WiseError::Dimension { expected: format!("{m} antennas"), got: format!("{}", ams.num_tx) });
    }
    if selector.g.ncols() != n && selector.num_bins() > 0 {
        return Err(WiseError::Dimension { expected: format!("{n} selector columns"), got: format!("{}", selector.g.ncols()) });
    }

    let mut layout = VarLayout::new(m, n, slack.is_some());
    let num_bins = selector.num_bins();
    let pnorm = match scenario.mask.pnorm {
        PNorm::Finite(p) if num_bins > 0 => {
            // t and r per (antenna, bin)
            layout.num_aux = 2 * m * num_bins;
            Some(p)
        }
        _ => None,
    };

    let mut objective = vec![0.0; layout.num_vars()];
    for k in 0..n {
        for (j, c) in trace_terms(&ams.a_u, &layout, k) {
            objective[j] += c;
        }
        if let Some(j) = layout.slack(k) {
            objective[j] += scenario.solver.eta;
        }
    }

    let mut blocks = Vec::new();

    blocks.push(ConeBlock {
        family: Family::PowerBound,
        cone: Cone::NonNeg,
        rows: vec![summed_trace(&(-&ams.a_d), &layout, ams.power_bound())],
    });

    for (theta, a_theta) in &ams.desired {
        if (theta - ams.peak_deg).abs() < 1e-9 {
            // both rows vanish identically at the peak angle
            continue;
        }
        blocks.push(ConeBlock {
            family: Family::BeamUpper,
            cone: Cone::NonNeg,
            rows: vec![compact(summed_trace(&(&ams.peak - a_theta), &layout, 0.0))],
        });
        let two = Complex64::new(2.0, 0.0);
        blocks.push(ConeBlock {
            family: Family::BeamLower,
            cone: Cone::NonNeg,
            rows: vec![compact(summed_trace(&(a_theta * two - &ams.peak), &layout, 0.0))],
        });
    }

    blocks.push(ConeBlock {
        family: Family::UnitDiagonal,
        cone: Cone::Zero,
        rows: (0..n)
            .flat_map(|k| (0..m).map(move |i| (k, i)))
            .map(|(k, i)| AffineRow { terms: vec![(layout.x_diag(k, i), 1.0)], constant: -1.0 })
            .collect(),
    });
    blocks.push(ConeBlock {
        family: Family::QCorner,
        cone: Cone::Zero,
        rows: (0..n).map(|k| AffineRow { terms: vec![(layout.q_corner(k), 1.0)], constant: -1.0 }).collect(),
    });

    spectral_blocks(scenario, selector, &layout, pnorm, &mut blocks);

    // similarity ball ||S - S0||_F <= delta sqrt(MN)
    let s0 = &scenario.similarity.s0;
    let mut sim_rows = vec![AffineRow::constant(scenario.similarity.delta * ((m * n) as f64).sqrt())];
    for k in 0..n {
        for i in 0..m {
            let z = s0.get(i, k);
            sim_rows.push(AffineRow { terms: vec![(layout.s_re(i, k), 1.0)], constant: -z.re });
            sim_rows.push(AffineRow { terms: vec![(layout.s_im(i, k), 1.0)], constant: -z.im });
        }
    }
    blocks.push(ConeBlock { family: Family::Similarity, cone: Cone::SecondOrder, rows: sim_rows });

    for k in 0..n {
        blocks.push(ConeBlock {
            family: Family::XPsd,
            cone: Cone::Psd { order: 2 * m },
            rows: x_affine(&layout, k).embedded_rows(),
        });
        blocks.push(ConeBlock {
            family: Family::QPsd,
            cone: Cone::Psd { order: 2 * (m + 1) },
            rows: q_affine(&layout, k).embedded_rows(),
        });
    }

    if let Some((vs, bs)) = slack {
        for (k, v) in vs.iter().enumerate() {
            let bvar = layout.slack(k).expect("slack layout");
            // b_n I - V^H Q_n V
            let mut h = q_affine(&layout, k).congruence(v).scale(-1.0);
            h.terms.push((bvar, DMatrix::identity(m, m)));
            blocks.push(ConeBlock {
                family: Family::SlackPsd,
                cone: Cone::Psd { order: 2 * m },
                rows: h.embedded_rows(),
            });
        }
        let mut rows = Vec::with_capacity(2 * n);
        for (k, &b) in bs.iter().enumerate() {
            let bvar = layout.slack(k).expect("slack layout");
            rows.push(AffineRow { terms: vec![(bvar, 1.0)], constant: 0.0 });
            rows.push(AffineRow { terms: vec![(bvar, -1.0)], constant: b });
        }
        blocks.push(ConeBlock { family: Family::SlackBounds, cone: Cone::NonNeg, rows });
    }

    Ok(ConicProblem { layout, objective, blocks })
}

/// Real and imaginary rows of `<g_k, s~_m>`.
fn bin_rows(selector: &SelectorMatrix, layout: &VarLayout, m: usize, bin: usize) -> (AffineRow, AffineRow) {
    let n = layout.code_length;
    let mut re = Vec::with_capacity(2 * n);
    let mut im = Vec::with_capacity(2 * n);
    for k in 0..n {
        let g = selector.g[(bin, k)];
        re.push((layout.s_re(m, k), g.re));
        re.push((layout.s_im(m, k), -g.im));
        im.push((layout.s_re(m, k), g.im));
        im.push((layout.s_im(m, k), g.re));
    }
    (
        compact(AffineRow { terms: re, constant: 0.0 }),
        compact(AffineRow { terms: im, constant: 0.0 }),
    )
}

fn spectral_blocks(
    scenario: &Scenario,
    selector: &SelectorMatrix,
    layout: &VarLayout,
    pnorm: Option<u32>,
    blocks: &mut Vec<ConeBlock>,
) {
    let gamma = scenario.mask.gamma;
    let num_bins = selector.num_bins();
    for m in 0..layout.num_tx {
        match pnorm {
            None => {
                for bin in 0..num_bins {
                    let (re, im) = bin_rows(selector, layout, m, bin);
                    blocks.push(ConeBlock {
                        family: Family::Spectral,
                        cone: Cone::SecondOrder,
                        rows: vec![AffineRow::constant(gamma), re, im],
                    });
                }
            }
            Some(p) => {
                // ||t||_p <= gamma via t_k <= r_k^(1/p) gamma^(1-1/p), sum r_k <= gamma
                let alpha = 1.0 / p as f64;
                let mut budget = AffineRow::constant(gamma);
                for bin in 0..num_bins {
                    let t = layout.aux(2 * (m * num_bins + bin));
                    let r = t + 1;
                    let (re, im) = bin_rows(selector, layout, m, bin);
                    blocks.push(ConeBlock {
                        family: Family::Spectral,
                        cone: Cone::SecondOrder,
                        rows: vec![AffineRow { terms: vec![(t, 1.0)], constant: 0.0 }, re, im],
                    });
                    blocks.push(ConeBlock {
                        family: Family::Spectral,
                        cone: Cone::Power { alpha },
                        rows: vec![
                            AffineRow { terms: vec![(r, 1.0)], constant: 0.0 },
                            AffineRow::constant(gamma),
                            AffineRow { terms: vec![(t, 1.0)], constant: 0.0 },
                        ],
                    });
                    budget.terms.push((r, -1.0));
                }
                blocks.push(ConeBlock { family: Family::Spectral, cone: Cone::NonNeg, rows: vec![budget] });
            }
        }
    }
}
