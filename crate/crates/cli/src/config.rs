//! Configuration types for the subcommands. Unknown keys are rejected so a
//! typo in a config file fails loudly instead of silently using a default.

use serde::{Deserialize, Serialize};

fn default_n() -> usize {
    1000
}
fn default_seed() -> u64 {
    0x5eed
}
fn default_alpha() -> f64 {
    0.5
}
fn default_horizon() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FracopsConfig {
    pub alphas: Vec<f64>,
    pub n: usize,
    pub horizon: f64,
    pub export_csv: bool,
}

impl Default for FracopsConfig {
    fn default() -> Self {
        Self {
            alphas: vec![0.2, 0.3, 0.5, 0.8],
            n: 2000,
            horizon: default_horizon(),
            export_csv: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    pub n: usize,
    pub pairs: usize,
    pub seed: u64,
    pub horizon: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            n: 500,
            pairs: 200,
            seed: default_seed(),
            horizon: default_horizon(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyStep {
    /// `rest`, `up`, or `down`.
    pub kind: String,
    pub fraction: f64,
}

impl Default for PolicyStep {
    fn default() -> Self {
        Self {
            kind: "rest".into(),
            fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CharacteristicsConfig {
    pub fixture: String,
    pub alpha: f64,
    pub n: usize,
    pub horizon: f64,
    pub s: Vec<f64>,
    pub z0: f64,
    pub policy: Vec<PolicyStep>,
    pub seed: u64,
    /// Node index where the history ends; the history itself is a seeded
    /// bounded-generator path.
    pub start_index: usize,
}

impl Default for CharacteristicsConfig {
    fn default() -> Self {
        Self {
            fixture: "drift".into(),
            alpha: default_alpha(),
            n: default_n(),
            horizon: default_horizon(),
            s: vec![1.0],
            z0: 0.0,
            policy: vec![
                PolicyStep {
                    kind: "up".into(),
                    fraction: 0.5,
                },
                PolicyStep {
                    kind: "rest".into(),
                    fraction: 0.0,
                },
            ],
            seed: default_seed(),
            start_index: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovCheckConfig {
    pub alpha: f64,
    /// Target dissipation rate; the Lipschitz constant is a quarter of it.
    pub lambda: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
}

impl Default for LyapunovCheckConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            lambda: 0.2,
            horizon: default_horizon(),
            radius: 2.0,
            n: 500,
            seed: default_seed(),
            samples: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    pub intervals: usize,
    pub directions: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            intervals: 3,
            directions: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValueConfig {
    pub fixture: String,
    pub alpha: f64,
    pub n: usize,
    pub horizon: f64,
    pub seed: u64,
    pub start_index: usize,
    pub s_list: Vec<Vec<f64>>,
    pub budget: BudgetConfig,
}

impl Default for ValueConfig {
    fn default() -> Self {
        Self {
            fixture: "drift".into(),
            alpha: default_alpha(),
            n: 240,
            horizon: default_horizon(),
            seed: default_seed(),
            start_index: 60,
            s_list: vec![vec![-1.0], vec![0.0], vec![1.0]],
            budget: BudgetConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub fixture: String,
    /// `forecast`, `state-readout`, or `constant`.
    pub candidate: String,
    pub constant_value: f64,
    pub alpha: f64,
    pub n: usize,
    pub horizon: f64,
    pub seed: u64,
    pub start_index: usize,
    pub t1_index: usize,
    pub s: Vec<f64>,
    pub eps: f64,
    pub budget: BudgetConfig,
    /// `upper`, `lower`, or `both`.
    pub side: String,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            fixture: "drift".into(),
            candidate: "forecast".into(),
            constant_value: 0.0,
            alpha: default_alpha(),
            n: 240,
            horizon: default_horizon(),
            seed: default_seed(),
            start_index: 60,
            t1_index: 180,
            s: vec![1.0],
            eps: 1e-3,
            budget: BudgetConfig::default(),
            side: "both".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WitnessConfig {
    pub fixture: String,
    pub alpha: f64,
    pub n: usize,
    pub horizon: f64,
    pub radius: f64,
    pub lambda_h: f64,
    /// Fraction of the derived perturbation cap used as eps.
    pub eps_fraction: f64,
    pub seed: u64,
    pub sweeps: usize,
    pub start_index: usize,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        Self {
            fixture: "nonlinear".into(),
            alpha: default_alpha(),
            n: 200,
            horizon: default_horizon(),
            radius: 2.0,
            lambda_h: 0.05,
            eps_fraction: 0.5,
            seed: default_seed(),
            sweeps: 10,
            start_index: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// `fraccalc`, `metric`, `lyapunov`, `minimax`, or `all`.
    pub suite: String,
    pub n: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            suite: "all".into(),
            n: 400,
            seed: default_seed(),
        }
    }
}

/// Loads a config from an optional file, applying CLI overrides afterwards.
pub fn load<T: serde::de::DeserializeOwned + Default>(
    path: Option<&std::path::Path>,
) -> Result<T, String> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", p.display()))
        }
    }
}
