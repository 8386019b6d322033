//! Scenario files.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Output directory; overridden by `--out`.
    pub output: Option<PathBuf>,
    pub space: SpaceSpec,
    pub potential: PotentialSpec,
    pub flow: FlowSpec,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    pub sweep: Option<SweepSpec>,
    /// Directory of the scenario file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum SpaceSpec {
    Interval { a: f64, b: f64, points: usize },
    Circle { points: usize, radius: f64 },
    Graph { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// `scale·(x - center)²`
    Quadratic,
    /// `scale·((x - center)² - 1)²`
    DoubleWell,
    /// `scale·cos(frequency·x)`
    Cosine,
    /// Per-point table from a CSV file.
    File,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: Formula,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub frequency: f64,
    /// `V = +∞` outside `[lo, hi]`.
    pub support: Option<[f64; 2]>,
    pub path: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub tau: f64,
    pub horizon: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub ricci_lower_bound: f64,
    #[serde(default = "default_solver_tolerance")]
    pub solver_tolerance: f64,
    #[serde(default)]
    pub seed: u64,
    /// Starting points by coordinate (nearest grid point).
    #[serde(default)]
    pub starts: Vec<f64>,
    /// Starting points by index.
    #[serde(default)]
    pub start_indices: Vec<usize>,
    /// Initial measure: atom coordinates, or indices, and weights.
    #[serde(default)]
    pub atoms: Vec<f64>,
    #[serde(default)]
    pub atom_indices: Vec<usize>,
    #[serde(default)]
    pub weights: Vec<f64>,
    /// Regularization indices for `Sₙ` flows.
    #[serde(default)]
    pub n_list: Vec<f64>,
}

fn default_solver_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    EviDifferential,
    EviIntegral,
    Contraction,
    Dissipation,
    Monotonicity,
    VarianceDecay,
    DiracPreservation,
    Additivity,
    Pushforward,
    ReparamContraction,
    Convexity,
    RegularizationLimit,
}

impl CheckName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::EviDifferential => "evi_differential",
            Self::EviIntegral => "evi_integral",
            Self::Contraction => "contraction",
            Self::Dissipation => "dissipation",
            Self::Monotonicity => "monotonicity",
            Self::VarianceDecay => "variance_decay",
            Self::DiracPreservation => "dirac_preservation",
            Self::Additivity => "additivity",
            Self::Pushforward => "pushforward",
            Self::ReparamContraction => "reparam_contraction",
            Self::Convexity => "convexity",
            Self::RegularizationLimit => "regularization_limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    #[default]
    Half,
    Full,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub name: CheckName,
    pub tolerance: f64,
    /// Overrides the flow's κ for this check.
    pub kappa: Option<f64>,
    #[serde(default)]
    pub scaling: Scaling,
    /// Number of evenly spread observation points (all points if absent).
    pub observation_points: Option<usize>,
    /// Grid stride for integral time pairs.
    pub stride: Option<usize>,
    /// Comparison point of the integral check, by coordinate.
    pub reference: Option<f64>,
    /// Level `a` of the reparametrization check.
    pub level: Option<f64>,
    /// Sample budget of the convexity check.
    pub budget: Option<usize>,
    pub slope_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub tau_list: Vec<f64>,
    /// Grid spacings; intervals and circles only.
    #[serde(default)]
    pub h_list: Vec<f64>,
    pub monotone: Option<MonotoneSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    StrictlyDecreasing,
    NonIncreasing,
}

/// Assertion on one column of a sweep table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotoneSpec {
    pub column: String,
    pub order: Order,
    /// Each entry may exceed its predecessor by this fraction.
    #[serde(default)]
    pub relative_slack: f64,
}

pub fn parse_scenario_str(text: &str) -> CliResult<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        CliError::Parse {
            line,
            message: e.message().to_owned(),
        }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn parse_scenario(path: impl AsRef<Path>) -> CliResult<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let mut scenario = parse_scenario_str(&text)?;
    scenario.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(scenario)
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Scenario {
    pub fn validate(&self) -> CliResult<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(bad(format!("scenario name {:?} is not a plain file name", self.name)));
        }
        let f = &self.flow;
        if !(f.tau > 0.0) || !(f.horizon > 0.0) {
            return Err(bad("flow.tau and flow.horizon must be positive"));
        }
        if !(f.solver_tolerance > 0.0) {
            return Err(bad("flow.solver_tolerance must be positive"));
        }
        if !f.atoms.is_empty() && !f.atom_indices.is_empty() {
            return Err(bad("give flow.atoms or flow.atom_indices, not both"));
        }
        let atoms = f.atoms.len().max(f.atom_indices.len());
        if atoms != f.weights.len() {
            return Err(bad(format!("{atoms} atoms but {} weights", f.weights.len())));
        }
        if f.n_list.iter().any(|n| !(*n > 0.0)) {
            return Err(bad("flow.n_list entries must be positive"));
        }
        if self.potential.kind == Formula::File && self.potential.path.is_none() {
            return Err(bad("potential kind \"file\" needs a path"));
        }
        for c in &self.checks {
            if !(c.tolerance >= 0.0) {
                return Err(bad(format!("check {}: tolerance must be nonnegative", c.name.as_str())));
            }
        }
        if let Some(s) = &self.sweep {
            if let Some(m) = &s.monotone {
                if !(m.relative_slack >= 0.0) {
                    return Err(bad("sweep.monotone.relative_slack must be nonnegative"));
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_owned()
        } else {
            self.base_dir.join(path)
        }
    }
}
