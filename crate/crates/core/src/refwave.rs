//! Reference waveforms for the similarity constraint.
//!
//! The default is a family of cyclically staggered quadratic-phase (chirp)
//! sequences. Seeded random-phase sets and externally produced matrices
//! loaded from CSV are also supported.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, WiseError};
use crate::waveform::WaveformMatrix;

/// Modulus tolerance accepted when loading a reference from file.
pub const FILE_MODULUS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ReferenceSpec {
    #[default]
    ChirpFamily,
    RandomUnimodular { seed: u64 },
    File(PathBuf),
}

impl FromStr for ReferenceSpec {
    type Err = WiseError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "chirp" {
            return Ok(ReferenceSpec::ChirpFamily);
        }
        if let Some(seed) = s.strip_prefix("random:") {
            let seed = seed.trim().parse::<u64>().map_err(|e| WiseError::Parse {
                message: format!("bad random reference seed {seed:?}: {e}"),
                location: Some("key `reference`".into()),
            })?;
            return Ok(ReferenceSpec::RandomUnimodular { seed });
        }
        if s.is_empty() {
            return Err(WiseError::Parse {
                message: "empty reference".into(),
                location: Some("key `reference`".into()),
            });
        }
        Ok(ReferenceSpec::File(PathBuf::from(s)))
    }
}

impl fmt::Display for ReferenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceSpec::ChirpFamily => write!(f, "chirp"),
            ReferenceSpec::RandomUnimodular { seed } => write!(f, "random:{seed}"),
            ReferenceSpec::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Produce the `m x n` reference matrix described by `spec`.
///
/// Relative file paths are resolved against the current directory; use
/// [`generate_reference_in`] to resolve them against a config directory.
pub fn generate_reference(spec: &ReferenceSpec, m: usize, n: usize) -> Result<WaveformMatrix> {
    generate_reference_in(spec, m, n, None)
}

pub fn generate_reference_in(
    spec: &ReferenceSpec,
    m: usize,
    n: usize,
    base_dir: Option<&Path>,
) -> Result<WaveformMatrix> {
    match spec {
        ReferenceSpec::ChirpFamily => Ok(chirp_family(m, n)),
        ReferenceSpec::RandomUnimodular { seed } => Ok(random_unimodular(m, n, *seed)),
        ReferenceSpec::File(path) => {
            let resolved = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path.clone(),
            };
            let s0 = read_waveform_csv(&resolved)?;
            s0.check_shape(m, n)
                .map_err(|e| WiseError::Reference(format!("{}: {e}", resolved.display())))?;
            Ok(s0)
        }
    }
}

/// Row `m`, sample `k` carries phase `pi (k + m N / M)^2 / N`.
pub fn chirp_family(m: usize, n: usize) -> WaveformMatrix {
    let nf = n as f64;
    let stagger = nf / m as f64;
    WaveformMatrix::from_phases(m, n, |row, k| {
        let t = k as f64 + row as f64 * stagger;
        PI * t * t / nf
    })
}

pub fn random_unimodular(m: usize, n: usize, seed: u64) -> WaveformMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // column-major fill order of from_fn is fixed, so the draw order is too
    WaveformMatrix::from_phases(m, n, |_, _| rng.gen_range(0.0..2.0 * PI))
}

/// Read a waveform from CSV: one header line, then one row per antenna with
/// `2N` columns alternating real and imaginary parts.
pub fn read_waveform_csv(path: &Path) -> Result<WaveformMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| WiseError::Reference(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| WiseError::Reference(e.to_string()))?;
        if record.len() % 2 != 0 || record.is_empty() {
            return Err(WiseError::Reference(format!(
                "row {} has {} columns, expected an even count",
                line + 1,
                record.len()
            )));
        }
        let values = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| WiseError::Reference(format!("row {}: {e}", line + 1)))?;
        let row: Vec<Complex64> = values
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(WiseError::Reference("no data rows".into()));
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(WiseError::Reference("ragged rows".into()));
    }
    for (m, row) in rows.iter().enumerate() {
        for (k, z) in row.iter().enumerate() {
            if (z.norm() - 1.0).abs() > FILE_MODULUS_TOL {
                return Err(WiseError::Reference(format!(
                    "entry ({m},{k}) has modulus {} (not unimodular)",
                    z.norm()
                )));
            }
        }
    }
    let s = WaveformMatrix::from_fn(rows.len(), n, |m, k| rows[m][k]);
    Ok(s.project_unimodular())
}

pub fn write_waveform_csv(path: &Path, s: &WaveformMatrix) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| WiseError::Reference(e.to_string()))?;
    let header: Vec<String> = (0..s.code_length())
        .flat_map(|k| [format!("re_{k}"), format!("im_{k}")])
        .collect();
    writer
        .write_record(&header)
        .map_err(|e| WiseError::Reference(e.to_string()))?;
    for m in 0..s.num_tx() {
        let row: Vec<String> = (0..s.code_length())
            .flat_map(|k| {
                let z = s.get(m, k);
                [format!("{:e}", z.re), format!("{:e}", z.im)]
            })
            .collect();
        writer
            .write_record(&row)
            .map_err(|e| WiseError::Reference(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}
