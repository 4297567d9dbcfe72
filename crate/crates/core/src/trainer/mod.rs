//! Primal-dual training of the two-level fleet agent.
//!
//! Each iteration collects complete episodes with the current stochastic
//! policy, forms undiscounted returns and GAE advantages for both the reward
//! and the safety-cost streams, subtracts the multiplier-weighted safety
//! advantage, and takes clipped-surrogate steps for the allocation policy
//! (through both the option scores and the termination network), the shared
//! power actor, and the two critics. The multipliers then move by projected
//! dual ascent on the mean episode safety return.

mod advantage;
mod buffer;
mod config;
mod lagrange;
mod objectives;
mod policy;
mod train;

pub use advantage::{adjusted_advantages, compute_returns, gae_advantages, normalize};
pub use buffer::{collect_episode, collect_rollouts, episode_rng, Episode, RolloutBuffer, StepRecord};
pub use config::{ConstraintMode, TrainConfig};
pub use lagrange::{dual_step, LagrangeState};
pub use objectives::{
    clipped_surrogate, critic_objectives, high_objective, low_objective, CriticGrads, HighGrads, LowGrads,
    SurrogateStats,
};
pub use policy::{Candidates, DacPolicy, HighDecision, PolicyNets, PowerDecision};
pub use train::{build_targets, IterationMetrics, MetricsWriter, Targets, Trainer};
