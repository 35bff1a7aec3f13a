//! On-disk formats: covariance-matrix CSV, state-generation and tolerance
//! TOML, homodyne sample CSV and direction lists.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gausteer_core::homodyne::{HomodyneSampleSet, MeasurementDirection};
use gausteer_core::sdp::SdpSettings;
use gausteer_core::states::{
    ghz_cm, random_cm, random_nonsteerable_cm, squeezed_vacuum_cm, thermal_cm, GhzParams, RandomCmConfig,
};
use gausteer_core::{CovarianceMatrix, Partition, Tolerances};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Parses the `# modes=N` header followed by `2N` comma-separated rows.
pub fn parse_cm(text: &str) -> std::result::Result<CovarianceMatrix, String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or("empty file")?;
    let modes: usize = header
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|h| h.strip_prefix("modes="))
        .ok_or_else(|| format!("expected `# modes=N` header, found `{header}`"))?
        .trim()
        .parse()
        .map_err(|e| format!("bad mode count: {e}"))?;
    if modes == 0 {
        return Err("mode count must be positive".into());
    }
    let dim = 2 * modes;
    let mut entries = Vec::with_capacity(dim * dim);
    let mut rows = 0;
    for line in lines.filter(|l| !l.starts_with('#')) {
        let row = line
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("row {}: {e}", rows + 1)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if row.len() != dim {
            return Err(format!("row {} has {} entries, expected {dim}", rows + 1, row.len()));
        }
        entries.extend(row);
        rows += 1;
    }
    if rows != dim {
        return Err(format!("found {rows} rows, expected {dim}"));
    }
    CovarianceMatrix::new(DMatrix::from_row_slice(dim, dim, &entries)).map_err(|e| e.to_string())
}

pub fn format_cm(gamma: &CovarianceMatrix) -> String {
    let m = gamma.entries();
    let mut out = format!("# modes={}\n", gamma.modes());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn read_cm(path: &Path) -> Result<CovarianceMatrix> {
    parse_cm(&read_text(path)?).map_err(|e| CliError::parse(path, e))
}

pub fn write_cm(path: &Path, gamma: &CovarianceMatrix) -> Result<()> {
    write_text(path, &format_cm(gamma))
}

/// `N_A:N_B`.
pub fn parse_partition(s: &str) -> std::result::Result<Partition, String> {
    let (a, b) = s.split_once(':').ok_or("expected N_A:N_B")?;
    let a: usize = a.trim().parse().map_err(|e| format!("N_A: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("N_B: {e}"))?;
    Partition::new(a, b).map_err(|e| e.to_string())
}

fn default_nu_max() -> f64 {
    5.0
}

fn default_r_max() -> f64 {
    2.0
}

/// Which state to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GenConfig {
    Svs { r: f64 },
    Thermal { nus: Vec<f64> },
    Ghz { a: f64 },
    Random {
        modes: usize,
        #[serde(default = "default_nu_max")]
        nu_max: f64,
        #[serde(default = "default_r_max")]
        r_max: f64,
    },
    Nonsteerable { n_alice: usize, n_bob: usize },
}

impl GenConfig {
    pub fn build(&self, seed: u64) -> Result<CovarianceMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match self {
            Self::Svs { r } => squeezed_vacuum_cm(*r)?,
            Self::Thermal { nus } => thermal_cm(nus)?,
            Self::Ghz { a } => ghz_cm(&GhzParams::new(*a)?)?,
            Self::Random { modes, nu_max, r_max } => {
                random_cm(&RandomCmConfig { n_modes: *modes, nu_max: *nu_max, r_max: *r_max, seed }, &mut rng)?
            }
            Self::Nonsteerable { n_alice, n_bob } => {
                random_nonsteerable_cm(&Partition::new(*n_alice, *n_bob)?, &mut rng)?
            }
        })
    }
}

pub fn read_gen_config(path: &Path) -> Result<GenConfig> {
    toml::from_str(&read_text(path)?).map_err(|e| CliError::parse(path, e))
}

/// `[tolerances]` and `[solver]` tables, both optional.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceFile {
    pub tolerances: Tolerances,
    pub solver: SdpSettings,
}

pub fn read_tolerances(path: &Path) -> Result<ToleranceFile> {
    toml::from_str(&read_text(path)?).map_err(|e| CliError::parse(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRow {
    direction_index: usize,
    outcome: f64,
}

pub fn write_samples(path: &Path, sets: &[HomodyneSampleSet]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::parse(path, e))?;
    for set in sets {
        for &outcome in &set.samples {
            w.serialize(SampleRow { direction_index: set.direction_index, outcome })
                .map_err(|e| CliError::parse(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Groups rows by direction index, ascending.
pub fn read_samples(path: &Path) -> Result<Vec<HomodyneSampleSet>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::parse(path, e))?;
    let mut sets: Vec<HomodyneSampleSet> = Vec::new();
    for row in r.deserialize::<SampleRow>() {
        let row = row.map_err(|e| CliError::parse(path, e))?;
        match sets.iter_mut().find(|s| s.direction_index == row.direction_index) {
            Some(set) => set.samples.push(row.outcome),
            None => sets.push(HomodyneSampleSet { direction_index: row.direction_index, samples: vec![row.outcome] }),
        }
    }
    sets.sort_by_key(|s| s.direction_index);
    Ok(sets)
}

/// `[θ, φ, φ₁]` for two modes, `[θ, φ, φ₁, ψ, φ₂]` for three.
pub fn direction_tuple(d: &MeasurementDirection) -> Vec<f64> {
    let mut t = vec![d.theta, d.phi, d.varphi1];
    if let (Some(psi), Some(varphi2)) = (d.psi, d.varphi2) {
        t.extend([psi, varphi2]);
    }
    t
}

pub fn direction_from_tuple(t: &[f64]) -> std::result::Result<MeasurementDirection, String> {
    let d = match *t {
        [theta, phi, v1] => MeasurementDirection::two_mode(theta, phi, v1),
        [theta, phi, v1, psi, v2] => MeasurementDirection::three_mode(theta, phi, v1, psi, v2),
        _ => return Err(format!("angle tuple of length {}", t.len())),
    };
    d.validate().map_err(|e| e.to_string())?;
    Ok(d)
}

pub fn directions_json(dirs: &[MeasurementDirection]) -> String {
    let tuples: Vec<Vec<f64>> = dirs.iter().map(direction_tuple).collect();
    serde_json::to_string_pretty(&tuples).expect("plain numbers serialize")
}

pub fn read_directions(path: &Path) -> Result<Vec<MeasurementDirection>> {
    let tuples: Vec<Vec<f64>> = serde_json::from_str(&read_text(path)?).map_err(|e| CliError::parse(path, e))?;
    tuples.iter().map(|t| direction_from_tuple(t).map_err(|e| CliError::parse(path, e))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cm_text_round_trip() {
        let gamma = squeezed_vacuum_cm(0.37).unwrap();
        let back = parse_cm(&format_cm(&gamma)).unwrap();
        assert_eq!(back.entries(), gamma.entries());
    }

    #[test]
    fn cm_parse_errors() {
        assert!(parse_cm("").is_err());
        assert!(parse_cm("1,0\n0,1\n").unwrap_err().contains("header"));
        assert!(parse_cm("# modes=1\n1,0\n").unwrap_err().contains("rows"));
        assert!(parse_cm("# modes=1\n1,0,0\n0,1\n").unwrap_err().contains("entries"));
        assert!(parse_cm("# modes=1\n1,x\n0,1\n").is_err());
        assert!(parse_cm("# modes=1\n0.1,0\n0,0.1\n").is_ok());
        assert!(parse_cm("# modes=1\n1,0.5\n0,1\n").is_err());
    }

    #[test]
    fn partition_strings() {
        assert_eq!(parse_partition("1:2").unwrap(), Partition::new(1, 2).unwrap());
        assert!(parse_partition("12").is_err());
        assert!(parse_partition("0:2").is_err());
    }

    #[test]
    fn gen_configs_parse() {
        let g: GenConfig = toml::from_str("family = \"svs\"\nr = 0.5").unwrap();
        assert_eq!(g, GenConfig::Svs { r: 0.5 });
        let g: GenConfig = toml::from_str("family = \"random\"\nmodes = 3").unwrap();
        assert_eq!(g, GenConfig::Random { modes: 3, nu_max: 5.0, r_max: 2.0 });
        assert!(toml::from_str::<GenConfig>("family = \"svs\"\nr = 0.5\nq = 1").is_err());
        assert_eq!(g.build(3).unwrap(), g.build(3).unwrap());
    }

    #[test]
    fn tolerance_tables_are_optional() {
        let t: ToleranceFile = toml::from_str("[tolerances]\ndetection = 1e-6").unwrap();
        assert_eq!(t.tolerances.detection, 1e-6);
        assert_eq!(t.tolerances.psd_floor, Tolerances::default().psd_floor);
        assert_eq!(t.solver, SdpSettings::default());
        assert!(toml::from_str::<ToleranceFile>("[solvr]\nx = 1").is_err());
    }

    #[test]
    fn direction_tuples() {
        let d = MeasurementDirection::three_mode(0.1, 0.2, 0.3, 0.4, 0.5);
        assert_eq!(direction_from_tuple(&direction_tuple(&d)).unwrap(), d);
        assert!(direction_from_tuple(&[0.1, 0.2]).is_err());
        assert!(direction_from_tuple(&[4.0, 0.2, 0.3]).is_err());
    }
}
