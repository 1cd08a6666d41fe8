//! JSON run configuration.

use std::path::{Path, PathBuf};

use riccati_core::problem::{make_laplacian_problem, make_toeplitz_problem, random_stable_problem, ToeplitzOptions};
use riccati_core::shifts::{AdaptiveMode, PenzlMode, PenzlOptions};
use riccati_core::CareProblem;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::mtx;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// 2D Laplacian on an `m x m` grid.
    Laplacian { m: usize },
    Toeplitz {
        n: usize,
        #[serde(default)]
        normalize_b: bool,
    },
    Random { n: usize, p: usize, q: usize, seed: u64 },
    /// MatrixMarket files; relative paths resolve against the config file.
    Files {
        a: PathBuf,
        b: PathBuf,
        c: PathBuf,
        #[serde(default)]
        e: Option<PathBuf>,
    },
}

impl ProblemSpec {
    pub fn build(&self, base: &Path) -> CliResult<CareProblem> {
        Ok(match self {
            ProblemSpec::Laplacian { m } => make_laplacian_problem(*m)?,
            ProblemSpec::Toeplitz { n, normalize_b } => {
                make_toeplitz_problem(*n, ToeplitzOptions { normalize_b: *normalize_b, raw_sign: false })?
            }
            ProblemSpec::Random { n, p, q, seed } => random_stable_problem(*n, *p, *q, *seed)?,
            ProblemSpec::Files { a, b, c, e } => {
                let at = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
                mtx::load_problem(&at(a), &at(b), &at(c), e.as_ref().map(at).as_deref())?
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Ilrsi,
    Rksm,
    DenseFixedPoint,
    DenseExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RitzKind {
    Plain,
    Stabilized,
}

impl From<RitzKind> for AdaptiveMode {
    fn from(k: RitzKind) -> Self {
        match k {
            RitzKind::Plain => AdaptiveMode::Plain,
            RitzKind::Stabilized => AdaptiveMode::Stabilized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PenzlModeSpec {
    #[serde(rename = "on_A")]
    OnA,
    #[serde(rename = "on_H")]
    OnH,
}

fn default_m() -> usize {
    10
}
fn default_m1() -> usize {
    20
}
fn default_m2() -> usize {
    10
}
fn default_mode() -> PenzlModeSpec {
    PenzlModeSpec::OnA
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenzlSpec {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_m1")]
    pub m1: usize,
    #[serde(default = "default_m2")]
    pub m2: usize,
    #[serde(default = "default_mode")]
    pub mode: PenzlModeSpec,
}

impl From<PenzlSpec> for PenzlOptions {
    fn from(s: PenzlSpec) -> Self {
        PenzlOptions {
            m: s.m,
            m1: s.m1,
            m2: s.m2,
            mode: match s.mode {
                PenzlModeSpec::OnA => PenzlMode::OnA,
                PenzlModeSpec::OnH => PenzlMode::OnH,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ShiftSpec {
    Penzl(PenzlSpec),
    /// Poles chosen during the run (RKSM only).
    Adaptive(RitzKind),
    /// JSON list of `[re, im]` pairs.
    File(PathBuf),
    /// Poles of an adaptive RKSM run on the same problem with the same `max_iter`.
    RksmPoles(RitzKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_history")]
    pub history: PathBuf,
    #[serde(default = "default_summary")]
    pub summary: PathBuf,
    #[serde(default = "default_shifts")]
    pub shifts: PathBuf,
    /// Writes `factor_w.mtx` and `factor_d.mtx` with `X ~ W D W^*`.
    #[serde(default)]
    pub factors: bool,
}

fn default_history() -> PathBuf {
    "history.csv".into()
}
fn default_summary() -> PathBuf {
    "summary.json".into()
}
fn default_shifts() -> PathBuf {
    "shifts.json".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { history: default_history(), summary: default_summary(), shifts: default_shifts(), factors: false }
    }
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    100
}
fn default_truncation_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Series name in merged comparison output.
    #[serde(default)]
    pub label: Option<String>,
    pub problem: ProblemSpec,
    pub solver: SolverKind,
    #[serde(default)]
    pub shifts: Option<ShiftSpec>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_truncation_tol")]
    pub truncation_tol: f64,
    #[serde(default)]
    pub output: OutputSpec,
    /// Recorded in the summary; generators take their own seed.
    #[serde(default)]
    pub seed: u64,
    /// Fills the `seconds` column; off keeps output byte-identical across runs.
    #[serde(default)]
    pub timing: bool,
    /// Directory of the config file, for relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |field: &str, why: &str| Err(CliError::Config(format!("field `{field}`: {why}")));
        if !(self.tol > 0.0) {
            return bad("tol", "must be positive");
        }
        if !(self.truncation_tol > 0.0 && self.truncation_tol < 1.0) {
            return bad("truncation_tol", "must lie in (0, 1)");
        }
        match (self.solver, &self.shifts) {
            (SolverKind::DenseExact, _) => {}
            (_, None) => return bad("shifts", "required for this solver"),
            (SolverKind::Ilrsi | SolverKind::DenseFixedPoint, Some(ShiftSpec::Adaptive(_))) => {
                return bad("shifts", "adaptive poles need the rksm solver; use rksm_poles instead")
            }
            (SolverKind::Rksm, Some(ShiftSpec::RksmPoles(_))) => {
                return bad("shifts", "use adaptive directly with the rksm solver")
            }
            _ => {}
        }
        Ok(())
    }

    pub fn label(&self, fallback: &str) -> String {
        self.label.clone().unwrap_or_else(|| fallback.to_string())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let c = RunConfig::from_json(
            r#"{"problem": {"generator": "laplacian", "m": 4}, "solver": "ilrsi", "shifts": {"penzl": {"m": 4}}}"#,
            Path::new("."),
        )
        .unwrap();
        assert_eq!(c.tol, 1e-8);
        assert_eq!(c.shifts, Some(ShiftSpec::Penzl(PenzlSpec { m: 4, m1: 20, m2: 10, mode: PenzlModeSpec::OnA })));
        assert!(!c.timing);
    }

    #[test]
    fn negative_tol_names_the_field() {
        let err = RunConfig::from_json(
            r#"{"problem": {"generator": "laplacian", "m": 4}, "solver": "dense_exact", "tol": -1}"#,
            Path::new("."),
        )
        .unwrap_err();
        assert!(err.to_string().contains("`tol`"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"problem": {"generator": "laplacian", "m": 4}, "solver": "dense_exact", "colour": 1}"#,
            r#"{"problem": {"generator": "laplacian", "m": 4, "k": 2}, "solver": "dense_exact"}"#,
            r#"{"problem": {"generator": "laplacian", "m": 4}, "solver": "ilrsi", "shifts": {"penzl": {"mm": 2}}}"#,
        ] {
            assert!(RunConfig::from_json(text, Path::new(".")).is_err(), "{text}");
        }
    }

    #[test]
    fn adaptive_requires_rksm() {
        let text = r#"{"problem": {"generator": "laplacian", "m": 4}, "solver": "ilrsi", "shifts": {"adaptive": "plain"}}"#;
        assert!(RunConfig::from_json(text, Path::new(".")).is_err());
    }
}
