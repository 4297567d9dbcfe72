//! Pure per-step physics and cost terms.

use serde::{Deserialize, Serialize};

use super::state::{Allocation, EbLocalState, GlobalState, PowerRange};
use crate::config::SystemParams;
use crate::data::TravelPmf;

/// Admissible power for one bus given its charger bit.
///
/// A bus at the terminal with a charger may charge or discharge within both
/// the converter limits and the energy window `[soc_min, soc_max]`. Without
/// a charger it idles. On route it can only drain, never below empty.
///
/// When the energy window lies entirely above the converter window (a bus
/// that arrived below the floor), the range collapses to full charging
/// power; the opposite case collapses to full discharge.
pub fn feasible_power_range(local: &EbLocalState, alloc_bit: bool, params: &SystemParams) -> PowerRange {
    let dt = params.dt_hours;
    let e = local.energy_kwh;
    if local.layover {
        if !alloc_bit {
            return PowerRange::point(0.0);
        }
        let e_lo = (params.energy_floor() - e) / dt;
        let e_hi = (params.energy_ceiling() - e) / dt;
        let lo = (-params.p_dis_max).max(e_lo);
        let hi = params.p_ch_max.min(e_hi);
        if lo <= hi {
            PowerRange { lo, hi }
        } else if e_lo > params.p_ch_max {
            PowerRange::point(params.p_ch_max)
        } else {
            PowerRange::point(-params.p_dis_max)
        }
    } else {
        let lo = (-params.p_dis_max).max(-e / dt).min(0.0);
        PowerRange { lo, hi: 0.0 }
    }
}

/// Splits net demand into grid purchase and sale, kW.
pub fn grid_split(total_power: f64, pv: f64) -> (f64, f64) {
    let net = total_power - pv;
    if net >= 0.0 {
        (net, 0.0)
    } else {
        (0.0, -net)
    }
}

pub fn charging_cost(price: f64, p_buy: f64, p_sell: f64, params: &SystemParams) -> f64 {
    price * (p_buy - params.sell_discount * p_sell) * params.dt_hours
}

pub fn degradation_cost(power: f64, layover: bool, params: &SystemParams) -> f64 {
    if !layover {
        return 0.0;
    }
    params.zeta_b * (params.bk_slope / 100.0).abs() * (power / params.e_bat).abs()
}

pub fn switching_cost(prev_alloc: bool, alloc: bool, layover: bool, params: &SystemParams) -> f64 {
    if prev_alloc && !alloc && layover {
        params.zeta_s
    } else {
        0.0
    }
}

/// Cost terms of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub charging: f64,
    pub degradation: Vec<f64>,
    pub switching: Vec<f64>,
    pub p_buy: f64,
    pub p_sell: f64,
}

impl CostBreakdown {
    /// Total operational cost `c_ch + sum(c_bat) + sum(c_sw)`, in that order.
    pub fn total(&self) -> f64 {
        self.charging + self.degradation.iter().sum::<f64>() + self.switching.iter().sum::<f64>()
    }

    /// The operational reward, the negated total.
    pub fn reward(&self) -> f64 {
        -self.total()
    }
}

/// Net power drawn at the terminal: the sum over buses in layover. Buses
/// on route draw from their own battery, not from the station.
pub fn terminal_power(state: &GlobalState, powers: &[f64]) -> f64 {
    state
        .locals
        .iter()
        .zip(powers)
        .filter(|(l, _)| l.layover)
        .map(|(_, p)| p)
        .sum()
}

pub fn operational_cost(
    state: &GlobalState,
    alloc: &Allocation,
    powers: &[f64],
    params: &SystemParams,
) -> CostBreakdown {
    let (p_buy, p_sell) = grid_split(terminal_power(state, powers), state.pv());
    let charging = charging_cost(state.price(), p_buy, p_sell, params);
    let mut degradation = Vec::with_capacity(powers.len());
    let mut switching = Vec::with_capacity(powers.len());
    for (m, l) in state.locals.iter().enumerate() {
        degradation.push(degradation_cost(powers[m], l.layover, params));
        switching.push(switching_cost(l.prev_alloc, alloc.get(m), l.layover, params));
    }
    CostBreakdown {
        charging,
        degradation,
        switching,
        p_buy,
        p_sell,
    }
}

/// Total kWh below the floor across the fleet.
pub fn safety_cost(state: &GlobalState, params: &SystemParams) -> f64 {
    let floor = params.energy_floor();
    state.locals.iter().map(|l| (floor - l.energy_kwh).max(0.0)).sum()
}

/// Probability that the current layover or trip ends this step.
///
/// Layover ends exactly when `tau` reaches zero. On route the probability is
/// `P(T = tau) / prod_{x < tau} (1 - P(T = x))` clamped to `[0, 1]`, and 1
/// once `tau` passes the end of the travel-time support.
pub fn termination_prob(local: &EbLocalState, pmf: &TravelPmf) -> f64 {
    if local.layover {
        return if local.tau == 0 { 1.0 } else { 0.0 };
    }
    let tau = local.tau;
    if tau > pmf.max_steps() {
        return 1.0;
    }
    let num = pmf.prob(tau);
    if num == 0.0 {
        return 0.0;
    }
    let den: f64 = (0..tau).map(|x| 1.0 - pmf.prob(x)).product();
    if den <= 0.0 {
        return 1.0;
    }
    (num / den).clamp(0.0, 1.0)
}

/// Forced option termination: some bus arrived or departed between states.
pub fn status_changed(prev: &GlobalState, next: &GlobalState) -> bool {
    prev.locals
        .iter()
        .zip(&next.locals)
        .any(|(a, b)| a.layover != b.layover)
}
