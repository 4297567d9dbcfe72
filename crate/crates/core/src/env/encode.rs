//! Network input features.

use super::state::{Allocation, GlobalState};
use crate::config::Scenario;

/// Per-bus features: energy fraction, status, previous status, scaled
/// `tau`, previous charger bit.
const LOCAL_FIELDS: usize = 5;

pub fn global_dim(fleet_size: usize, history_window: usize) -> usize {
    LOCAL_FIELDS * fleet_size + shared_dim(history_window)
}

pub fn local_dim(fleet_size: usize, history_window: usize) -> usize {
    LOCAL_FIELDS + shared_dim(history_window) + 2 * fleet_size
}

fn shared_dim(history_window: usize) -> usize {
    2 * (history_window + 1) + 1
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn push_bus(out: &mut Vec<f64>, state: &GlobalState, m: usize, sc: &Scenario) {
    let l = &state.locals[m];
    let horizon = sc.steps() as f64;
    out.push(l.energy_kwh / sc.params.e_bat);
    out.push(bit(l.layover));
    out.push(bit(l.prev_layover));
    out.push(l.tau as f64 / horizon);
    out.push(bit(l.prev_alloc));
}

fn push_shared(out: &mut Vec<f64>, state: &GlobalState, sc: &Scenario) {
    out.extend(state.pv_history.iter().map(|v| v / sc.pv_scale));
    out.extend(state.price_history.iter().map(|v| v / sc.price_scale));
    out.push(state.t as f64 / sc.steps() as f64);
}

/// Centralized view: every bus followed by the shared windows and clock.
pub fn encode_global(state: &GlobalState, sc: &Scenario) -> Vec<f64> {
    let m = state.fleet_size();
    let mut out = Vec::with_capacity(global_dim(m, sc.timebase.history_window));
    for i in 0..m {
        push_bus(&mut out, state, i, sc);
    }
    push_shared(&mut out, state, sc);
    out
}

/// Agent view: own fields, shared windows, the allocation and a one-hot id.
pub fn encode_local(state: &GlobalState, m: usize, alloc: &Allocation, sc: &Scenario) -> Vec<f64> {
    let n = state.fleet_size();
    let mut out = Vec::with_capacity(local_dim(n, sc.timebase.history_window));
    push_bus(&mut out, state, m, sc);
    push_shared(&mut out, state, sc);
    out.extend(alloc.as_f64());
    out.extend((0..n).map(|i| bit(i == m)));
    out
}
