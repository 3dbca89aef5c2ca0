//! Experiment configuration: TOML schema, loading and validation.

use std::fs;
use std::path::{Path, PathBuf};

use drmdp::ambiguity::DiscreteModelDistribution;
use drmdp::mdp::{TabularMdp, TransitionModel};
use drmdp::{GroundNorm, Policy};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sandwich,
    Approx,
    Oos,
    RobustVi,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Sandwich => "sandwich",
            ExperimentKind::Approx => "approx",
            ExperimentKind::Oos => "oos",
            ExperimentKind::RobustVi => "robust-vi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// JSON-lines output; standard output when absent.
    pub output: Option<PathBuf>,
    /// CSV projection of α-sweeps.
    pub csv: Option<PathBuf>,
    pub mdp: MdpSpec,
    #[serde(default)]
    pub ambiguity: AmbiguityConfig,
    #[serde(default)]
    pub models: Option<ModelsConfig>,
    /// Evaluated policy, one action per state; all zeros when absent.
    pub policy: Option<Vec<usize>>,
    /// States reported; all states when absent.
    pub states: Option<Vec<usize>>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub lambda: LambdaConfig,
    pub features: Option<FeaturesConfig>,
    pub oos: Option<OosSection>,
    pub robust_vi: Option<RobustViConfig>,
}

/// MDP specification; `rewards[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSpec {
    pub states: usize,
    pub actions: usize,
    pub rewards: Vec<Vec<f64>>,
    pub discount: f64,
    /// Defaults to `max |r(s,a)|`.
    pub r_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbiguityConfig {
    #[serde(default = "default_norm")]
    pub norm: GroundNorm,
    /// Radii swept by the sandwich and approximation experiments.
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
}

impl Default for AmbiguityConfig {
    fn default() -> Self {
        Self {
            norm: default_norm(),
            alphas: default_alphas(),
        }
    }
}

fn default_norm() -> GroundNorm {
    GroundNorm::L1Product
}

fn default_alphas() -> Vec<f64> {
    vec![0.0, 0.01, 0.05, 0.1, 0.5]
}

/// Source of the empirical atoms: exactly one of the three fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsConfig {
    /// `atoms[i][s][a][s']`.
    pub atoms: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    /// Episode CSV (`episode,s,a,s_next`), one estimate per episode.
    pub episodes_csv: Option<PathBuf>,
    /// Number of random models drawn from `seed`.
    pub random: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Grid resolution `1/steps` on each policy row.
    #[serde(default = "default_steps")]
    pub steps: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { steps: default_steps() }
    }
}

fn default_steps() -> usize {
    20
}

/// Multiplier search: a fixed grid, or golden-section search (default).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaConfig {
    pub grid: Option<Vec<f64>>,
    pub upper: Option<f64>,
    #[serde(default)]
    pub extra: Vec<f64>,
    /// Replaces `L` in the regularized value only.
    pub l_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesConfig {
    /// `phi[s]` is the feature vector of state `s`.
    pub phi: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OosSection {
    pub epsilon: f64,
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default = "default_c2")]
    pub c2: f64,
    pub n_episodes: usize,
    pub episode_len: usize,
    pub trials: usize,
    #[serde(default = "default_scale")]
    pub radius_scale: f64,
    /// Same radius at every state, bypassing the schedule.
    pub radius_override: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Generating distribution: `atoms[j][s][a][s']` with `weights[j]`.
    pub true_atoms: Vec<Vec<Vec<Vec<f64>>>>,
    pub true_weights: Vec<f64>,
}

fn default_c0() -> f64 {
    2.0
}

fn default_c1() -> f64 {
    2.0
}

fn default_c2() -> f64 {
    0.5
}

fn default_scale() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustViConfig {
    /// Radius of every row ball around the center.
    pub radius: f64,
    /// Index of the empirical atom used as center.
    #[serde(default)]
    pub center: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

/// Parsed configuration together with the raw bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub raw: Vec<u8>,
    pub base_dir: PathBuf,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let raw = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(raw.clone()).map_err(|_| CliError::Config("config is not valid UTF-8".into()))?;
    let config = parse_config(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, raw, base_dir })
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {reason}"))
}

/// Rejects `[s][a][s']` nests whose shape differs from the MDP.
fn check_model_shape(field: &str, rows: &[Vec<Vec<f64>>], s: usize, a: usize) -> Result<(), CliError> {
    if rows.len() != s || rows.iter().any(|r| r.len() != a || r.iter().any(|x| x.len() != s)) {
        return Err(invalid(field, format!("expected a {s} × {a} × {s} transition tensor")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Structural and range checks naming the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.mdp;
        if m.states == 0 {
            return Err(invalid("mdp.states", "must be positive"));
        }
        if m.actions == 0 {
            return Err(invalid("mdp.actions", "must be positive"));
        }
        if !(m.discount >= 0.0 && m.discount < 1.0) {
            return Err(invalid("mdp.discount", format!("must lie in [0, 1), got {}", m.discount)));
        }
        if m.rewards.len() != m.states || m.rewards.iter().any(|r| r.len() != m.actions) {
            return Err(invalid("mdp.rewards", format!("expected {} rows of {} rewards", m.states, m.actions)));
        }
        if let Some(r) = m.r_max {
            if !(r > 0.0) {
                return Err(invalid("mdp.r_max", "must be positive"));
            }
        }
        if self.ambiguity.alphas.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(invalid("ambiguity.alphas", "radii must be finite and nonnegative"));
        }
        if self.ambiguity.alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("ambiguity.alphas", "radii must be strictly increasing"));
        }
        if let Some(p) = &self.policy {
            if p.len() != m.states {
                return Err(invalid("policy", format!("expected {} actions", m.states)));
            }
            if let Some(a) = p.iter().find(|a| **a >= m.actions) {
                return Err(invalid("policy", format!("action {a} out of range for {} actions", m.actions)));
            }
        }
        if let Some(st) = &self.states {
            if let Some(s) = st.iter().find(|s| **s >= m.states) {
                return Err(invalid("states", format!("state {s} out of range for {} states", m.states)));
            }
        }
        if self.oracle.steps == 0 {
            return Err(invalid("oracle.steps", "must be positive"));
        }
        if let Some(g) = &self.lambda.grid {
            if g.is_empty() {
                return Err(invalid("lambda.grid", "must not be empty"));
            }
            if g.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
                return Err(invalid("lambda.grid", "multipliers must be finite and nonnegative"));
            }
            if g.windows(2).any(|w| w[1] < w[0]) {
                return Err(invalid("lambda.grid", "must be sorted ascending"));
            }
        }
        if let Some(models) = &self.models {
            let sources =
                models.atoms.is_some() as u8 + models.episodes_csv.is_some() as u8 + models.random.is_some() as u8;
            if sources != 1 {
                return Err(invalid("models", "set exactly one of `atoms`, `episodes_csv`, `random`"));
            }
            if let Some(atoms) = &models.atoms {
                if atoms.is_empty() {
                    return Err(invalid("models.atoms", "at least one model required"));
                }
                for (i, a) in atoms.iter().enumerate() {
                    check_model_shape(&format!("models.atoms[{i}]"), a, m.states, m.actions)?;
                }
            }
            if models.random == Some(0) {
                return Err(invalid("models.random", "must be positive"));
            }
        }
        let needs_models = !matches!(self.kind, ExperimentKind::Oos);
        if needs_models && self.models.is_none() {
            return Err(invalid("models", format!("required by the {} experiment", self.kind.name())));
        }
        match self.kind {
            ExperimentKind::Approx => {
                let f = self
                    .features
                    .as_ref()
                    .ok_or_else(|| invalid("features", "required by the approx experiment"))?;
                if f.phi.len() != m.states || f.phi.iter().any(|r| r.len() != f.phi[0].len()) || f.phi[0].is_empty() {
                    return Err(invalid("features.phi", format!("expected {} rows of equal positive length", m.states)));
                }
            }
            ExperimentKind::Oos => {
                let o = self.oos.as_ref().ok_or_else(|| invalid("oos", "required by the oos experiment"))?;
                if o.trials == 0 {
                    return Err(invalid("oos.trials", "must be at least 1"));
                }
                if o.n_episodes == 0 {
                    return Err(invalid("oos.n_episodes", "must be at least 1"));
                }
                if !(o.epsilon > 0.0 && o.epsilon < 1.0) {
                    return Err(invalid("oos.epsilon", format!("must lie in (0, 1), got {}", o.epsilon)));
                }
                if o.true_atoms.is_empty() || o.true_atoms.len() != o.true_weights.len() {
                    return Err(invalid("oos.true_weights", "one weight per true atom required"));
                }
                for (i, a) in o.true_atoms.iter().enumerate() {
                    check_model_shape(&format!("oos.true_atoms[{i}]"), a, m.states, m.actions)?;
                }
                if !(o.tol > 0.0) {
                    return Err(invalid("oos.tol", "must be positive"));
                }
            }
            ExperimentKind::RobustVi => {
                let r = self
                    .robust_vi
                    .as_ref()
                    .ok_or_else(|| invalid("robust_vi", "required by the robust-vi experiment"))?;
                if !(r.radius >= 0.0) {
                    return Err(invalid("robust_vi.radius", "must be nonnegative"));
                }
                if !(r.tol > 0.0) {
                    return Err(invalid("robust_vi.tol", "must be positive"));
                }
            }
            ExperimentKind::Sandwich => {}
        }
        Ok(())
    }

    pub fn build_mdp(&self) -> Result<TabularMdp<f64>, CliError> {
        let m = &self.mdp;
        let rewards: Vec<f64> = m.rewards.iter().flatten().copied().collect();
        let r_max = m
            .r_max
            .unwrap_or_else(|| rewards.iter().fold(0.0f64, |acc, r| acc.max(r.abs())).max(f64::MIN_POSITIVE));
        TabularMdp::new(m.states, m.actions, rewards, m.discount, r_max).map_err(|e| CliError::solver("mdp-core", e))
    }

    pub fn policy(&self) -> Policy {
        Policy(self.policy.clone().unwrap_or_else(|| vec![0; self.mdp.states]))
    }

    pub fn reported_states(&self) -> Vec<usize> {
        self.states.clone().unwrap_or_else(|| (0..self.mdp.states).collect())
    }

    pub fn true_distribution(&self) -> Result<DiscreteModelDistribution<f64>, CliError> {
        let o = self.oos.as_ref().ok_or_else(|| invalid("oos", "missing"))?;
        let atoms = o
            .true_atoms
            .iter()
            .map(|a| TransitionModel::from_rows(a))
            .collect::<drmdp::Result<Vec<_>>>()
            .map_err(|e| CliError::solver("mdp-core", e))?;
        DiscreteModelDistribution::new(atoms, o.true_weights.clone()).map_err(|e| CliError::solver("ambiguity", e))
    }
}
