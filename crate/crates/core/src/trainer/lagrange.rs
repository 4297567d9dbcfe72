use serde::{Deserialize, Serialize};

/// Multipliers for the high and low level plus the dual step settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangeState {
    pub lambda_high: f64,
    pub lambda_low: f64,
    pub tolerance: f64,
    pub lr: f64,
}

/// Projected dual ascent: `max(0, lambda + lr (j_safe - tolerance))`.
pub fn dual_step(lambda: f64, lr: f64, j_safe: f64, tolerance: f64) -> f64 {
    (lambda + lr * (j_safe - tolerance)).max(0.0)
}

impl LagrangeState {
    pub fn new(lambda_init: f64, tolerance: f64, lr: f64) -> Self {
        LagrangeState {
            lambda_high: lambda_init,
            lambda_low: lambda_init,
            tolerance,
            lr,
        }
    }

    /// Updates both multipliers from the estimated safety returns.
    pub fn update(&self, j_safe_high: f64, j_safe_low: f64) -> LagrangeState {
        LagrangeState {
            lambda_high: dual_step(self.lambda_high, self.lr, j_safe_high, self.tolerance),
            lambda_low: dual_step(self.lambda_low, self.lr, j_safe_low, self.tolerance),
            ..*self
        }
    }
}
