//! Electric-bus fleet simulator.
//!
//! Buses alternate between layover at the terminal, where an allocated
//! charger lets them charge or feed power back, and stochastic trips that
//! drain the battery. Each step yields the operational reward (negated
//! charging, degradation and switching cost) and a safety cost measuring the
//! energy shortfall below the battery floor.

mod dynamics;
mod encode;
mod sim;
mod state;
mod trace_dump;

pub use dynamics::{
    charging_cost, degradation_cost, feasible_power_range, grid_split, operational_cost, safety_cost, status_changed,
    switching_cost, terminal_power, termination_prob, CostBreakdown,
};
pub use encode::{encode_global, encode_local, global_dim, local_dim};
pub use sim::{FleetEnv, StepOutcome};
pub use state::{Allocation, EbLocalState, GlobalState, PowerRange};
pub use trace_dump::{TraceRow, TraceWriter};
