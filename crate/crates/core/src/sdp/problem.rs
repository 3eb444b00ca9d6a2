//! Solver-agnostic conic program: real variables, a linear objective and a
//! list of cone blocks whose rows are affine in the variables.

use std::fmt;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::waveform::WaveformMatrix;

/// Constraint family of a cone block, used for residual reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    PowerBound,
    BeamUpper,
    BeamLower,
    UnitDiagonal,
    QCorner,
    Spectral,
    Similarity,
    XPsd,
    QPsd,
    SlackPsd,
    SlackBounds,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::PowerBound => "power_bound",
            Family::BeamUpper => "beam_upper",
            Family::BeamLower => "beam_lower",
            Family::UnitDiagonal => "unit_diagonal",
            Family::QCorner => "q_corner",
            Family::Spectral => "spectral",
            Family::Similarity => "similarity",
            Family::XPsd => "x_psd",
            Family::QPsd => "q_psd",
            Family::SlackPsd => "slack_psd",
            Family::SlackBounds => "slack_bounds",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cone {
    /// Every row equals zero.
    Zero,
    /// Every row is nonnegative.
    NonNeg,
    /// `row_0 >= ||row_1..||_2`.
    SecondOrder,
    /// Rows are the upper triangle (column-major, unscaled) of a symmetric
    /// matrix of the given order, which must be PSD.
    Psd { order: usize },
    /// Three rows `(x, y, z)` with `x^alpha y^(1-alpha) >= |z|`, `x, y >= 0`.
    Power { alpha: f64 },
}

impl fmt::Display for Cone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cone::Zero => write!(f, "zero"),
            Cone::NonNeg => write!(f, "nonneg"),
            Cone::SecondOrder => write!(f, "soc"),
            Cone::Psd { order } => write!(f, "psd({order})"),
            Cone::Power { alpha } => write!(f, "power({alpha})"),
        }
    }
}

/// `sum_j coef_j x_j + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineRow {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineRow {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * x[j]).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone)]
pub struct ConeBlock {
    pub family: Family,
    pub cone: Cone,
    pub rows: Vec<AffineRow>,
}

/// Index map between the real decision vector and `(S, X_n, b_n)`.
///
/// Layout: `Re/Im S` interleaved per entry (column-major), then `M^2`
/// Hermitian parameters per `X_n` (diagonal, then `(re, im)` of each upper
/// off-diagonal pair in row-major order), then one `Q_n` corner per slice,
/// then the slack bounds `b_n` (if present), then auxiliary variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub num_tx: usize,
    pub code_length: usize,
    pub has_slack: bool,
    pub num_aux: usize,
}

impl VarLayout {
    pub fn new(num_tx: usize, code_length: usize, has_slack: bool) -> Self {
        Self { num_tx, code_length, has_slack, num_aux: 0 }
    }

    fn x_base(&self) -> usize {
        2 * self.num_tx * self.code_length
    }

    fn x_block(&self) -> usize {
        self.num_tx * self.num_tx
    }

    fn corner_base(&self) -> usize {
        self.x_base() + self.code_length * self.x_block()
    }

    fn slack_base(&self) -> usize {
        self.corner_base() + self.code_length
    }

    fn aux_base(&self) -> usize {
        self.slack_base() + if self.has_slack { self.code_length } else { 0 }
    }

    pub fn num_vars(&self) -> usize {
        self.aux_base() + self.num_aux
    }

    pub fn s_re(&self, m: usize, n: usize) -> usize {
        2 * (n * self.num_tx + m)
    }

    pub fn s_im(&self, m: usize, n: usize) -> usize {
        self.s_re(m, n) + 1
    }

    pub fn x_diag(&self, n: usize, i: usize) -> usize {
        self.x_base() + n * self.x_block() + i
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        let m = self.num_tx;
        // pairs (0,1),(0,2),..,(0,m-1),(1,2),..
        i * (2 * m - i - 1) / 2 + (j - i - 1)
    }

    pub fn x_re(&self, n: usize, i: usize, j: usize) -> usize {
        self.x_base() + n * self.x_block() + self.num_tx + 2 * self.pair_index(i, j)
    }

    pub fn x_im(&self, n: usize, i: usize, j: usize) -> usize {
        self.x_re(n, i, j) + 1
    }

    pub fn q_corner(&self, n: usize) -> usize {
        self.corner_base() + n
    }

    pub fn slack(&self, n: usize) -> Option<usize> {
        self.has_slack.then(|| self.slack_base() + n)
    }

    pub fn aux(&self, k: usize) -> usize {
        debug_assert!(k < self.num_aux);
        self.aux_base() + k
    }

    pub fn var_name(&self, idx: usize) -> String {
        let m = self.num_tx;
        if idx < self.x_base() {
            let entry = idx / 2;
            let part = if idx.is_multiple_of(2) { "re" } else { "im" };
            return format!("s[{},{}].{part}", entry % m, entry / m);
        }
        if idx < self.corner_base() {
            let local = idx - self.x_base();
            let n = local / self.x_block();
            let p = local % self.x_block();
            if p < m {
                return format!("x{n}[{p},{p}]");
            }
            let pair = (p - m) / 2;
            let part = if (p - m).is_multiple_of(2) { "re" } else { "im" };
            let (mut i, mut rem) = (0, pair);
            while rem >= m - i - 1 {
                rem -= m - i - 1;
                i += 1;
            }
            return format!("x{n}[{i},{}].{part}", i + 1 + rem);
        }
        if idx < self.slack_base() {
            return format!("q{}[0,0]", idx - self.corner_base());
        }
        if idx < self.aux_base() {
            return format!("b{}", idx - self.slack_base());
        }
        format!("aux{}", idx - self.aux_base())
    }

    /// Pack `(S, X_n, b_n)` into a decision vector; auxiliaries are zero.
    pub fn vectorize(&self, s: &WaveformMatrix, xs: &[DMatrix<Complex64>], b: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.num_vars()];
        for n in 0..self.code_length {
            for m in 0..self.num_tx {
                let z = s.get(m, n);
                v[self.s_re(m, n)] = z.re;
                v[self.s_im(m, n)] = z.im;
            }
            let x = &xs[n];
            for i in 0..self.num_tx {
                v[self.x_diag(n, i)] = x[(i, i)].re;
                for j in i + 1..self.num_tx {
                    v[self.x_re(n, i, j)] = x[(i, j)].re;
                    v[self.x_im(n, i, j)] = x[(i, j)].im;
                }
            }
            v[self.q_corner(n)] = 1.0;
            if let Some(k) = self.slack(n) {
                v[k] = b[n];
            }
        }
        v
    }

    /// Inverse of [`vectorize`](Self::vectorize).
    pub fn reconstruct(&self, v: &[f64]) -> (WaveformMatrix, Vec<DMatrix<Complex64>>, Vec<f64>) {
        let (m, n) = (self.num_tx, self.code_length);
        let s = WaveformMatrix::from_fn(m, n, |r, c| Complex64::new(v[self.s_re(r, c)], v[self.s_im(r, c)]));
        let xs = (0..n)
            .map(|k| {
                let mut x = DMatrix::zeros(m, m);
                for i in 0..m {
                    x[(i, i)] = Complex64::new(v[self.x_diag(k, i)], 0.0);
                    for j in i + 1..m {
                        let z = Complex64::new(v[self.x_re(k, i, j)], v[self.x_im(k, i, j)]);
                        x[(i, j)] = z;
                        x[(j, i)] = z.conj();
                    }
                }
                x
            })
            .collect();
        let b = (0..n).filter_map(|k| self.slack(k).map(|i| v[i])).collect();
        (s, xs, b)
    }
}

#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub layout: VarLayout,
    pub objective: Vec<f64>,
    pub blocks: Vec<ConeBlock>,
}

impl ConicProblem {
    pub fn num_vars(&self) -> usize {
        self.layout.num_vars()
    }

    pub fn num_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.rows.len()).sum()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn blocks_of(&self, family: Family) -> impl Iterator<Item = &ConeBlock> {
        self.blocks.iter().filter(move |b| b.family == family)
    }

    pub fn psd_block_count(&self) -> usize {
        self.blocks.iter().filter(|b| matches!(b.cone, Cone::Psd { .. })).count()
    }

    /// Number of scalar rows in blocks of `family`.
    pub fn row_count(&self, family: Family) -> usize {
        self.blocks_of(family).map(|b| b.rows.len()).sum()
    }

    /// Largest cone violation per family at `x`, sorted by family.
    pub fn residuals(&self, x: &[f64]) -> Vec<(Family, f64)> {
        let mut out: Vec<(Family, f64)> = Vec::new();
        for block in &self.blocks {
            let r = cone_violation(block, x);
            match out.iter_mut().find(|(f, _)| *f == block.family) {
                Some(entry) => entry.1 = entry.1.max(r),
                None => out.push((block.family, r)),
            }
        }
        out.sort_by_key(|(f, _)| *f);
        out
    }

    pub fn max_residual(&self, x: &[f64]) -> (Family, f64) {
        self.residuals(x)
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((Family::PowerBound, 0.0))
    }

    /// Plain-text dump: variable list, cone list, triplet-form constraint
    /// matrix and constants. Each row `r` reads `sum_c A[r,c] x[c] + h[r]`
    /// and the rows of a cone block must lie in its cone.
    pub fn dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "VARIABLES {}", self.num_vars())?;
        for j in 0..self.num_vars() {
            writeln!(w, "{j} {}", self.layout.var_name(j))?;
        }
        let nz: Vec<_> = self.objective.iter().enumerate().filter(|(_, c)| **c != 0.0).collect();
        writeln!(w, "OBJECTIVE {}", nz.len())?;
        for (j, c) in nz {
            writeln!(w, "{j} {c:e}")?;
        }
        writeln!(w, "CONES {}", self.blocks.len())?;
        let mut offset = 0;
        for (k, b) in self.blocks.iter().enumerate() {
            writeln!(w, "{k} {} {} rows={} offset={offset}", b.family, b.cone, b.rows.len())?;
            offset += b.rows.len();
        }
        let triplets: usize = self.blocks.iter().flat_map(|b| &b.rows).map(|r| r.terms.len()).sum();
        writeln!(w, "MATRIX {} {} {triplets}", self.num_rows(), self.num_vars())?;
        let rows = self.blocks.iter().flat_map(|b| &b.rows);
        for (r, row) in rows.clone().enumerate() {
            for &(c, v) in &row.terms {
                writeln!(w, "{r} {c} {v:e}")?;
            }
        }
        writeln!(w, "CONSTANTS {}", self.num_rows())?;
        for (r, row) in rows.enumerate() {
            writeln!(w, "{r} {:e}", row.constant)?;
        }
        Ok(())
    }
}

/// Symmetric matrix from upper-triangle column-major rows.
pub fn unpack_upper(order: usize, vals: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(order, order);
    let mut idx = 0;
    for c in 0..order {
        for r in 0..=c {
            m[(r, c)] = vals[idx];
            m[(c, r)] = vals[idx];
            idx += 1;
        }
    }
    m
}

fn cone_violation(block: &ConeBlock, x: &[f64]) -> f64 {
    let vals: Vec<f64> = block.rows.iter().map(|r| r.eval(x)).collect();
    match block.cone {
        Cone::Zero => vals.iter().map(|v| v.abs()).fold(0.0, f64::max),
        Cone::NonNeg => vals.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max),
        Cone::SecondOrder => {
            let tail = DVector::from_column_slice(&vals[1..]).norm();
            (tail - vals[0]).max(0.0)
        }
        Cone::Psd { order } => {
            let m = unpack_upper(order, &vals);
            let min = m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
            (-min).max(0.0)
        }
        Cone::Power { alpha } => {
            let (a, b, z) = (vals[0], vals[1], vals[2]);
            let neg = (-a).max(0.0).max((-b).max(0.0));
            let bound = a.max(0.0).powf(alpha) * b.max(0.0).powf(1.0 - alpha);
            neg.max((z.abs() - bound).max(0.0))
        }
    }
}
