//! Reference controllers and the evaluation loop: the perfect-information
//! dynamic-programming optimum, the forecast-then-plan baseline and greedy
//! evaluation of any controller over seeded episodes.

mod eval;
mod forecast;
mod oracle;

pub use eval::{
    eval_rng, evaluate, run_episode, trace_episode, Controller, EpisodeActor, EpisodeRecord, EvalReport, IdleController,
};
pub use forecast::{ForecastBaseline, ForecastConfig, ForecastModel, OpenLoopActor, OracleController};
pub use oracle::{
    dp_oracle, oracle_actions, oracle_for_scenario, status_schedule, DeterministicInstance, EnergyGrid, OracleAction,
    OracleConfig, OracleSolution,
};
