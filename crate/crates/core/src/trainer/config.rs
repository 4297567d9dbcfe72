use serde::{Deserialize, Serialize};

use crate::options::DEFAULT_ENUMERATION_CAP;
use crate::{Error, Result};

/// How the safety constraint enters the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Multipliers follow projected dual ascent.
    Lagrangian,
    /// Both multipliers pinned to the scenario's `lambda_safe`.
    FixedPenalty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub episodes_per_iter: usize,
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Dual step size.
    pub lr_lambda: f64,
    /// Budget on the mean episode safety return.
    pub tolerance: f64,
    pub lambda_init: f64,
    pub constraint: ConstraintMode,
    pub high_hidden: Vec<usize>,
    pub low_hidden: Vec<usize>,
    pub termination_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub normalize_advantages: bool,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub enumeration_cap: usize,
    /// Initial pre-squash log standard deviation of the power head.
    pub log_std_init: f64,
    pub seed: u64,
    /// Write `wall_ms = 0` so metric files are reproducible byte for byte.
    pub deterministic_metrics: bool,
    /// Checkpoint period in iterations; 0 disables periodic checkpoints.
    pub ckpt_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 20_000,
            episodes_per_iter: 10,
            clip_eps: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            batch_size: 128,
            epochs: 4,
            lr_actor: 3e-4,
            lr_critic: 1e-3,
            lr_lambda: 0.01,
            tolerance: 0.025,
            lambda_init: 0.0,
            constraint: ConstraintMode::Lagrangian,
            high_hidden: vec![128, 128],
            low_hidden: vec![64, 64],
            termination_hidden: vec![64, 64],
            critic_hidden: vec![128, 128],
            normalize_advantages: true,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            log_std_init: 0.25f64.ln(),
            seed: 0,
            deterministic_metrics: false,
            ckpt_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad(format!("clip_eps {} not in (0, 1)", self.clip_eps));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gamma and gae_lambda must lie in (0, 1]".into());
        }
        if self.episodes_per_iter == 0 || self.batch_size == 0 || self.epochs == 0 {
            return bad("episodes_per_iter, batch_size and epochs must be positive".into());
        }
        if self.lr_actor < 0.0 || self.lr_critic < 0.0 || self.lr_lambda < 0.0 || self.lambda_init < 0.0 {
            return bad("learning rates and lambda_init must be non-negative".into());
        }
        if self.tolerance < 0.0 || self.entropy_coef < 0.0 || !(self.max_grad_norm > 0.0) {
            return bad("tolerance, entropy_coef must be >= 0 and max_grad_norm > 0".into());
        }
        for (name, h) in [
            ("high_hidden", &self.high_hidden),
            ("low_hidden", &self.low_hidden),
            ("termination_hidden", &self.termination_hidden),
            ("critic_hidden", &self.critic_hidden),
        ] {
            if h.contains(&0) {
                return bad(format!("{name} has a zero-width layer"));
            }
        }
        Ok(())
    }
}
