use serde::{Deserialize, Serialize};

use fbsde_core::losses::LossKind;

use crate::error::{CliError, Result};

/// Full experiment description. Parsing is strict: unknown keys are
/// rejected so config typos cannot silently change an experiment. Every
/// field has a default, and the effective (fully defaulted) config is
/// echoed into each command's metadata sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker threads for batch parallelism; 0 = auto.
    pub threads: usize,
    pub problem: ProblemConfig,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub eval: EvalConfig,
    pub sweep: SweepConfig,
    pub landscape: LandscapeConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            problem: ProblemConfig::default(),
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            optimizer: OptimizerConfig::default(),
            eval: EvalConfig::default(),
            sweep: SweepConfig::default(),
            landscape: LandscapeConfig::default(),
            verify: VerifyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    /// hjb | bsb | bz | lqr1d
    pub name: String,
    pub dim: usize,
    pub sigma: Option<f64>,
    pub rate: Option<f64>,
    pub dcoef: Option<f64>,
    pub horizon: Option<f64>,
    pub x0: Option<Vec<f64>>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self { name: "bsb".into(), dim: 1, sigma: None, rate: None, dcoef: None, horizon: None, x0: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// feature_linear | scaled_exact
    pub family: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { family: "feature_linear".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub kind: LossKind,
    pub skip: usize,
    pub n_steps: usize,
    pub batch: usize,
    pub boundary_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { kind: LossKind::HeunBsde, skip: 1, n_steps: 50, batch: 64, boundary_weight: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub total_iters: u64,
    /// (iteration threshold, learning rate) pairs; each rate applies while
    /// iteration < threshold.
    pub schedule: Vec<(u64, f64)>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// RL2 snapshot period during training (0 = none).
    pub snapshot_every: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            total_iters: 20_000,
            schedule: vec![(10_000, 1e-3), (15_000, 1e-4), (20_000, 1e-5)],
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            snapshot_every: 1_000,
        }
    }
}

impl OptimizerConfig {
    pub fn to_adam(&self, seed: u64) -> fbsde_core::optimizer::AdamConfig {
        fbsde_core::optimizer::AdamConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            schedule: self.schedule.clone(),
            total_iters: self.total_iters,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub n_paths: usize,
    /// Evaluation grid steps; defaults to the loss grid when absent.
    pub n_steps: Option<usize>,
    pub hjb_mc_samples: usize,
    pub hjb_mc_seed: u64,
    pub include_terminal: bool,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_paths: 5,
            n_steps: None,
            hjb_mc_samples: 100_000,
            hjb_mc_seed: 424242,
            include_terminal: false,
            seed: 9999,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub kinds: Vec<LossKind>,
    pub k_list: Vec<usize>,
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kinds: vec![LossKind::EmBsde, LossKind::HeunBsde],
            k_list: vec![1, 5, 10, 25, 50],
            n_list: vec![50],
            seeds: vec![0, 1, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandscapeConfig {
    pub theta_min: f64,
    pub theta_max: f64,
    pub points: usize,
    pub em_tau: Vec<f64>,
    pub heun_tau: Vec<f64>,
    pub n_paths: usize,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            theta_min: 0.5,
            theta_max: 1.5,
            points: 101,
            em_tau: vec![1e-1, 1e-2, 1e-3],
            heun_tau: vec![5e-1, 1e-1, 5e-2],
            n_paths: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub quadform_samples: usize,
    pub tau_scaling_samples: usize,
    pub identity_paths: usize,
    pub identity_steps: usize,
    pub decomposition_paths: usize,
    /// EM bias plateau must match the analytic value within this relative
    /// tolerance.
    pub em_bias_rel_tol: f64,
    /// Heun loss at the finest tau must be below this fraction of the EM
    /// plateau.
    pub heun_frac_of_em: f64,
    /// Optional injected quadratic-form matrix (row-major). Lets a config
    /// exercise the symmetric-matrix precondition; an asymmetric matrix
    /// surfaces as a named failed check.
    pub q_override: Option<Vec<Vec<f64>>>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            quadform_samples: 1_000_000,
            tau_scaling_samples: 1_000_000,
            identity_paths: 1_000,
            identity_steps: 400,
            decomposition_paths: 10_000,
            em_bias_rel_tol: 0.10,
            heun_frac_of_em: 0.05,
            q_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        match self.problem.name.as_str() {
            "hjb" | "bsb" | "bz" | "lqr1d" => {}
            other => return Err(CliError::Config(format!("unknown problem '{other}'"))),
        }
        match self.model.family.as_str() {
            "feature_linear" | "scaled_exact" => {}
            other => return Err(CliError::Config(format!("unknown model family '{other}'"))),
        }
        if self.problem.dim == 0 {
            return Err(CliError::Config("problem.dim must be >= 1".into()));
        }
        if self.loss.n_steps == 0 || self.loss.batch == 0 {
            return Err(CliError::Config("loss.n_steps and loss.batch must be >= 1".into()));
        }
        if self.loss.skip == 0 || self.loss.skip > self.loss.n_steps {
            return Err(CliError::Config("loss.skip must lie in 1..=n_steps".into()));
        }
        if let Some(x0) = &self.problem.x0 {
            if x0.len() != self.problem.dim {
                return Err(CliError::Config("problem.x0 length must equal dim".into()));
            }
        }
        if self.landscape.points < 2 || self.landscape.theta_max <= self.landscape.theta_min {
            return Err(CliError::Config("landscape grid is degenerate".into()));
        }
        Ok(())
    }
}
