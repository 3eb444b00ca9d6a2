//! Experiment description: array geometry, angle sets, spectral mask,
//! similarity reference and solver parameters.
//!
//! Scenarios are read from a flat TOML document. Only `m`, `n` and
//! `theta_d` are required; everything else falls back to the defaults of the
//! full-size scenario (5 degree grid, stopbands at 0.3-0.35, 0.4-0.45 and
//! 0.7-0.8, `gamma = 0.01 sqrt(N)`, `eta = 0.1`, `e1 = 1e-5`, `e2 = 1e-4`).

// Validation uses `!(x > 0.0)` so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::SQRT_2;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WiseError};
use crate::refwave::{generate_reference_in, ReferenceSpec};
use crate::waveform::WaveformMatrix;

/// Slack used when testing grid membership and interval endpoints.
const ANGLE_EPS: f64 = 1e-9;
/// Modulus tolerance for the similarity reference.
const REFERENCE_MODULUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    pub num_tx: usize,
    /// Element spacing over wavelength, `d / lambda`.
    pub spacing_ratio: f64,
    pub code_length: usize,
}

/// Closed angular interval in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AngleInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lo - ANGLE_EPS && theta <= self.hi + ANGLE_EPS
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UndesiredRegion {
    /// Every grid angle outside the desired interval.
    Complement,
    Intervals(Vec<AngleInterval>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleSets {
    pub grid_step_deg: f64,
    pub desired: AngleInterval,
    pub undesired: UndesiredRegion,
    /// Angle where the beampattern peak is required.
    pub peak_deg: f64,
}

impl AngleSets {
    /// Uniform grid over [-90, 90] degrees.
    pub fn grid(&self) -> Vec<f64> {
        angle_grid(self.grid_step_deg)
    }

    pub fn desired_angles(&self) -> Vec<f64> {
        self.grid().into_iter().filter(|t| self.desired.contains(*t)).collect()
    }

    pub fn undesired_angles(&self) -> Vec<f64> {
        let grid = self.grid();
        match &self.undesired {
            UndesiredRegion::Complement => grid.into_iter().filter(|t| !self.desired.contains(*t)).collect(),
            UndesiredRegion::Intervals(ivs) => grid
                .into_iter()
                .filter(|t| ivs.iter().any(|iv| iv.contains(*t)))
                .collect(),
        }
    }
}

/// Angle grid `-90 + k * step` for `k = 0..=floor(180 / step)`.
pub fn angle_grid(step_deg: f64) -> Vec<f64> {
    if !(step_deg > 0.0) {
        return Vec::new();
    }
    let count = (180.0 / step_deg + ANGLE_EPS).floor() as usize + 1;
    (0..count).map(|k| -90.0 + k as f64 * step_deg).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PNorm {
    Finite(u32),
    /// Exact per-bin modulus bound.
    Infinity,
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PNorm::Finite(p) => write!(f, "{p}"),
            PNorm::Infinity => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMaskSpec {
    /// Normalized-frequency stopbands `(u1, u2)`.
    pub stopbands: Vec<(f64, f64)>,
    /// Absolute bound on the stopband spectrum magnitude.
    pub gamma: f64,
    pub pnorm: PNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilaritySpec {
    pub reference: ReferenceSpec,
    pub s0: WaveformMatrix,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminationMode {
    /// Stop when either the eigenvalue ratio or the lifting gap is small.
    Either,
    /// Stop only when both are small.
    Both,
}

impl fmt::Display for TerminationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminationMode::Either => write!(f, "either"),
            TerminationMode::Both => write!(f, "both"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Weight of the slack penalty in the per-iteration objective.
    pub eta: f64,
    /// Threshold on the eigenvalue-ratio statistic.
    pub e1: f64,
    /// Threshold on the lifting gap.
    pub e2: f64,
    pub max_iters: usize,
    pub solver_feas_tol: f64,
    pub termination_mode: TerminationMode,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            eta: 0.1,
            e1: 1e-5,
            e2: 1e-4,
            max_iters: 500,
            solver_feas_tol: 1e-8,
            termination_mode: TerminationMode::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub array: ArrayConfig,
    pub angles: AngleSets,
    pub mask: SpectralMaskSpec,
    pub similarity: SimilaritySpec,
    pub solver: SolverParams,
}

pub fn default_stopbands() -> Vec<(f64, f64)> {
    vec![(0.3, 0.35), (0.4, 0.45), (0.7, 0.8)]
}

pub fn auto_gamma(n: usize) -> f64 {
    0.01 * (n as f64).sqrt()
}

impl Scenario {
    /// Full-size experiment: M = 8, N = 64, 5 degree grid, mainlobe
    /// [-55, -35] peaked at -45.
    pub fn full_size() -> Self {
        Self::build(
            ArrayConfig { num_tx: 8, spacing_ratio: 0.5, code_length: 64 },
            AngleSets {
                grid_step_deg: 5.0,
                desired: AngleInterval::new(-55.0, -35.0),
                undesired: UndesiredRegion::Intervals(vec![
                    AngleInterval::new(-90.0, -60.0),
                    AngleInterval::new(-30.0, 90.0),
                ]),
                peak_deg: -45.0,
            },
            default_stopbands(),
        )
    }

    /// Reduced experiment used by the acceptance suite: M = 4, N = 16,
    /// 15 degree grid, mainlobe [-60, -30] peaked at -45.
    pub fn desk() -> Self {
        Self::build(
            ArrayConfig { num_tx: 4, spacing_ratio: 0.5, code_length: 16 },
            AngleSets {
                grid_step_deg: 15.0,
                desired: AngleInterval::new(-60.0, -30.0),
                undesired: UndesiredRegion::Complement,
                peak_deg: -45.0,
            },
            vec![(0.3, 0.35), (0.5, 0.55)],
        )
    }

    fn build(array: ArrayConfig, angles: AngleSets, stopbands: Vec<(f64, f64)>) -> Self {
        let (m, n) = (array.num_tx, array.code_length);
        let reference = ReferenceSpec::ChirpFamily;
        let s0 = generate_reference_in(&reference, m, n, None).expect("chirp reference");
        Self {
            mask: SpectralMaskSpec { stopbands, gamma: auto_gamma(n), pnorm: PNorm::Infinity },
            similarity: SimilaritySpec { reference, s0, delta: SQRT_2 },
            solver: SolverParams::default(),
            array,
            angles,
        }
    }

    pub fn num_tx(&self) -> usize {
        self.array.num_tx
    }

    pub fn code_length(&self) -> usize {
        self.array.code_length
    }

    /// Same scenario with a different similarity radius.
    pub fn with_delta(&self, delta: f64) -> Self {
        let mut s = self.clone();
        s.similarity.delta = delta;
        s
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let v = validate_scenario(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    pub fn to_toml(&self) -> String {
        let file = ScenarioFile::from(self);
        toml::to_string(&file).expect("scenario serializes")
    }
}

/// Every violated invariant, named by field and rule. Empty means valid.
pub fn validate_scenario(s: &Scenario) -> Vec<String> {
    let mut v = Vec::new();
    let a = &s.array;
    if a.num_tx < 2 {
        v.push(format!("m: need at least 2 transmitters (got {})", a.num_tx));
    }
    if a.code_length < 1 {
        v.push("n: code length must be positive".into());
    }
    if !(a.spacing_ratio > 0.0) {
        v.push(format!("spacing_ratio: must be positive (got {})", a.spacing_ratio));
    }

    let ang = &s.angles;
    if !(ang.grid_step_deg > 0.0) || ang.grid_step_deg > 180.0 {
        v.push(format!("grid_step_deg: must lie in (0, 180] (got {})", ang.grid_step_deg));
    }
    let mut intervals = vec![("theta_d", ang.desired)];
    if let UndesiredRegion::Intervals(ivs) = &ang.undesired {
        intervals.extend(ivs.iter().map(|iv| ("theta_u", *iv)));
    }
    for (name, iv) in &intervals {
        if !(iv.lo <= iv.hi) {
            v.push(format!("{name}: interval [{}, {}] has lo > hi", iv.lo, iv.hi));
        }
        if iv.lo < -90.0 - ANGLE_EPS || iv.hi > 90.0 + ANGLE_EPS {
            v.push(format!("{name}: interval [{}, {}] leaves [-90, 90]", iv.lo, iv.hi));
        }
    }
    if ang.grid_step_deg > 0.0 {
        let desired = ang.desired_angles();
        let undesired = ang.undesired_angles();
        if desired.is_empty() {
            v.push("theta_d: no grid angle falls in the desired interval".into());
        }
        if undesired.is_empty() {
            v.push("theta_u: no grid angle falls in the undesired set".into());
        }
        if desired.iter().any(|d| undesired.iter().any(|u| (d - u).abs() < ANGLE_EPS)) {
            v.push("theta_u: desired and undesired angle sets intersect".into());
        }
        if !desired.iter().any(|d| (d - ang.peak_deg).abs() < ANGLE_EPS) {
            v.push(format!("theta0: {} is not a desired grid angle", ang.peak_deg));
        }
    }

    let mask = &s.mask;
    for &(u1, u2) in &mask.stopbands {
        if !(0.0 <= u1 && u1 < u2 && u2 <= 1.0) {
            v.push(format!("stopbands: ({u1}, {u2}) violates 0 <= u1 < u2 <= 1"));
        }
    }
    let mut sorted = mask.stopbands.clone();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    if sorted.windows(2).any(|w| w[1].0 < w[0].1) {
        v.push("stopbands: stopbands overlap".into());
    }
    if !(mask.gamma > 0.0) {
        v.push(format!("gamma: must be positive (got {})", mask.gamma));
    }
    if mask.pnorm == PNorm::Finite(0) {
        v.push("p: must be a positive integer or inf".into());
    }

    let sim = &s.similarity;
    if !(sim.delta >= 0.0) {
        v.push(format!("delta: must be nonnegative (got {})", sim.delta));
    } else if sim.delta > SQRT_2 + 1e-12 {
        v.push(format!("delta: δ exceeds √2 (got {})", sim.delta));
    }
    if sim.s0.num_tx() != a.num_tx || sim.s0.code_length() != a.code_length {
        v.push(format!(
            "reference: S0 is {}x{}, expected {}x{}",
            sim.s0.num_tx(),
            sim.s0.code_length(),
            a.num_tx,
            a.code_length
        ));
    }
    if sim.s0.max_modulus_error() > REFERENCE_MODULUS_TOL {
        v.push("reference: S0 entries are not unit modulus".into());
    }

    let p = &s.solver;
    for (name, value) in [("eta", p.eta), ("e1", p.e1), ("e2", p.e2), ("solver_tol", p.solver_feas_tol)] {
        if !(value > 0.0) {
            v.push(format!("{name}: must be strictly positive (got {value})"));
        }
    }
    if p.max_iters < 1 {
        v.push("max_iters: must be at least 1".into());
    }
    v
}

/// Parse a scenario document, resolving a file reference against the
/// current directory.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    parse_scenario_in(text, None)
}

/// Read and parse a scenario file; a relative reference path is resolved
/// against the file's directory.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario_in(&text, path.parent())
}

pub fn parse_scenario_in(text: &str, base_dir: Option<&Path>) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let location = e.span().map(|span| {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}")
        });
        WiseError::Parse { message: e.message().to_string(), location }
    })?;
    let scenario = file.into_scenario(base_dir)?;
    let violations = validate_scenario(&scenario);
    if !violations.is_empty() {
        return Err(WiseError::Invalid(violations));
    }
    Ok(scenario)
}

// ---------------------------------------------------------------------------
// On-disk representation

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum NumOrWord {
    Num(f64),
    Word(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum UndesiredField {
    Word(String),
    Intervals(Vec<[f64; 2]>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    m: usize,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    spacing_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_step_deg: Option<f64>,
    theta_d: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_u: Option<UndesiredField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stopbands: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<NumOrWord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<NumOrWord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    termination_mode: Option<TerminationMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
}

fn key_error(key: &str, message: String) -> WiseError {
    WiseError::Parse { message, location: Some(format!("key `{key}`")) }
}

impl ScenarioFile {
    fn into_scenario(self, base_dir: Option<&Path>) -> Result<Scenario> {
        let defaults = SolverParams::default();
        let grid_step_deg = self.grid_step_deg.unwrap_or(5.0);
        let desired = AngleInterval::new(self.theta_d[0], self.theta_d[1]);

        let undesired = match self.theta_u {
            None => UndesiredRegion::Complement,
            Some(UndesiredField::Word(w)) if w == "complement" => UndesiredRegion::Complement,
            Some(UndesiredField::Word(w)) => {
                return Err(key_error("theta_u", format!("expected interval list or \"complement\", got {w:?}")))
            }
            Some(UndesiredField::Intervals(ivs)) => {
                UndesiredRegion::Intervals(ivs.iter().map(|iv| AngleInterval::new(iv[0], iv[1])).collect())
            }
        };

        // default peak: desired grid angle nearest the interval centre
        let peak_deg = match self.theta0 {
            Some(t) => t,
            None => {
                let centre = 0.5 * (desired.lo + desired.hi);
                angle_grid(grid_step_deg)
                    .into_iter()
                    .filter(|t| desired.contains(*t))
                    .min_by(|a, b| (a - centre).abs().total_cmp(&(b - centre).abs()))
                    .unwrap_or(centre)
            }
        };

        let gamma = match self.gamma {
            None => auto_gamma(self.n),
            Some(NumOrWord::Num(g)) => g,
            Some(NumOrWord::Word(w)) if w == "auto" => auto_gamma(self.n),
            Some(NumOrWord::Word(w)) => return Err(key_error("gamma", format!("expected number or \"auto\", got {w:?}"))),
        };

        let pnorm = match self.p {
            None => PNorm::Infinity,
            Some(NumOrWord::Word(w)) if w == "inf" => PNorm::Infinity,
            Some(NumOrWord::Num(p)) if p >= 1.0 && p.fract() == 0.0 && p <= u32::MAX as f64 => PNorm::Finite(p as u32),
            Some(other) => return Err(key_error("p", format!("expected positive integer or \"inf\", got {other:?}"))),
        };

        let reference: ReferenceSpec = match self.reference {
            Some(r) => r.parse()?,
            None => ReferenceSpec::ChirpFamily,
        };
        let s0 = generate_reference_in(&reference, self.m, self.n, base_dir)?;

        Ok(Scenario {
            array: ArrayConfig {
                num_tx: self.m,
                spacing_ratio: self.spacing_ratio.unwrap_or(0.5),
                code_length: self.n,
            },
            angles: AngleSets { grid_step_deg, desired, undesired, peak_deg },
            mask: SpectralMaskSpec {
                stopbands: self
                    .stopbands
                    .map(|v| v.iter().map(|p| (p[0], p[1])).collect())
                    .unwrap_or_else(default_stopbands),
                gamma,
                pnorm,
            },
            similarity: SimilaritySpec { reference, s0, delta: self.delta.unwrap_or(SQRT_2) },
            solver: SolverParams {
                eta: self.eta.unwrap_or(defaults.eta),
                e1: self.e1.unwrap_or(defaults.e1),
                e2: self.e2.unwrap_or(defaults.e2),
                max_iters: self.max_iters.unwrap_or(defaults.max_iters),
                solver_feas_tol: self.solver_tol.unwrap_or(defaults.solver_feas_tol),
                termination_mode: self.termination_mode.unwrap_or(defaults.termination_mode),
            },
        })
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        Self {
            m: s.array.num_tx,
            n: s.array.code_length,
            spacing_ratio: Some(s.array.spacing_ratio),
            grid_step_deg: Some(s.angles.grid_step_deg),
            theta_d: [s.angles.desired.lo, s.angles.desired.hi],
            theta_u: Some(match &s.angles.undesired {
                UndesiredRegion::Complement => UndesiredField::Word("complement".into()),
                UndesiredRegion::Intervals(ivs) => UndesiredField::Intervals(ivs.iter().map(|iv| [iv.lo, iv.hi]).collect()),
            }),
            theta0: Some(s.angles.peak_deg),
            stopbands: Some(s.mask.stopbands.iter().map(|&(a, b)| [a, b]).collect()),
            gamma: Some(NumOrWord::Num(s.mask.gamma)),
            delta: Some(s.similarity.delta),
            eta: Some(s.solver.eta),
            p: Some(match s.mask.pnorm {
                PNorm::Infinity => NumOrWord::Word("inf".into()),
                PNorm::Finite(p) => NumOrWord::Num(p as f64),
            }),
            e1: Some(s.solver.e1),
            e2: Some(s.solver.e2),
            max_iters: Some(s.solver.max_iters),
            solver_tol: Some(s.solver.solver_feas_tol),
            termination_mode: Some(s.solver.termination_mode),
            reference: Some(s.similarity.reference.to_string()),
        }
    }
}
