//! Perfect-information optimum by dynamic programming.
//!
//! Battery energy is discretized on a uniform grid over `[0, soc_max E_bat]`
//! and snapped to the nearest grid point after every transition; charging
//! powers come from a finite level set. Backward induction runs over the
//! states reachable from the initial energies, with the battery floor as a
//! hard constraint at every step including the last.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{Scenario, SystemParams};
use crate::data::{travel_pmf, Timetable};
use crate::env::{
    charging_cost, degradation_cost, feasible_power_range, grid_split, switching_cost, Allocation, CostBreakdown,
    EbLocalState,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Candidate charging powers, kW; must contain 0.
    pub power_levels: Vec<f64>,
    /// Grid points over `[0, soc_max E_bat]`.
    pub energy_bins: usize,
    pub max_horizon: usize,
    /// Upper bound on state-action pairs examined per step.
    pub max_stage_work: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            power_levels: vec![-120.0, -60.0, 0.0, 60.0, 120.0],
            energy_bins: 241,
            max_horizon: 288,
            max_stage_work: 10_000_000,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        if !self.power_levels.contains(&0.0) {
            return Err(Error::Config("oracle power levels must include 0".into()));
        }
        if let Some(p) = self
            .power_levels
            .iter()
            .find(|p| !p.is_finite() || **p < -params.p_dis_max || **p > params.p_ch_max)
        {
            return Err(Error::Config(format!(
                "oracle power level {p} outside converter limits"
            )));
        }
        if self.energy_bins < 2 {
            return Err(Error::Config("oracle needs at least 2 energy bins".into()));
        }
        Ok(())
    }
}

/// Fully known day: prices, PV, per-step bus status and drain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicInstance {
    pub params: SystemParams,
    pub price: Vec<f64>,
    pub pv: Vec<f64>,
    /// `layover[t][m]`.
    pub layover: Vec<Vec<bool>>,
    /// Requested drain of bus `m` at step `t` while on route, kW.
    pub drain_kw: Vec<Vec<f64>>,
    pub initial_energy: Vec<f64>,
}

/// Per-step status of every bus when trip `k` of bus `m` takes exactly
/// `travel[m][k]` steps. A trip of `k` steps keeps the bus on route for
/// `k` steps; a return at or after the next departure leaves the following
/// step.
pub fn status_schedule(timetable: &Timetable, travel: &[Vec<usize>], horizon: usize) -> Vec<Vec<bool>> {
    let m_count = timetable.fleet_size();
    let mut out = vec![vec![true; m_count]; horizon];
    for m in 0..m_count {
        let trips = timetable.rotation(m).len();
        let mut t = 0;
        let mut k = 0;
        let mut depart = timetable.departure(m, 0).max(1);
        while k < trips && t < horizon {
            while t < depart.min(horizon) {
                out[t][m] = true;
                t += 1;
            }
            let back = (t + travel[m][k]).min(horizon);
            while t < back {
                out[t][m] = false;
                t += 1;
            }
            k += 1;
            depart = timetable.departure(m, k).max(t + 1);
        }
    }
    out
}

impl DeterministicInstance {
    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn horizon(&self) -> usize {
        self.price.len()
    }

    pub fn fleet_size(&self) -> usize {
        self.initial_energy.len()
    }

    /// The scenario with mean travel times, midpoint drain and the prices and
    /// PV of `day`.
    pub fn from_scenario(scenario: &Scenario, day: usize, energies: &[f64]) -> Result<Self> {
        let model = scenario.travel.point_mass();
        let tt = &scenario.timetable;
        let travel = (0..tt.fleet_size())
            .map(|m| {
                tt.rotation(m)
                    .iter()
                    .map(|trip| travel_pmf(&model, trip.departure_step).map(|p| p.mean().round() as usize))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let steps = scenario.steps();
        let price = (0..steps).map(|t| scenario.price_at(day, t as isize)).collect();
        let pv = (0..steps).map(|t| scenario.pv_at(day, t as isize)).collect();
        Self::from_parts(scenario, price, pv, &travel, energies)
    }

    pub fn from_parts(
        scenario: &Scenario,
        price: Vec<f64>,
        pv: Vec<f64>,
        travel: &[Vec<usize>],
        energies: &[f64],
    ) -> Result<Self> {
        let steps = scenario.steps();
        let [lo, hi] = scenario.config.consumption_kw;
        let inst = DeterministicInstance {
            params: scenario.params,
            price,
            pv,
            layover: status_schedule(&scenario.timetable, travel, steps),
            drain_kw: vec![vec![0.5 * (lo + hi); scenario.fleet_size()]; steps],
            initial_energy: energies.to_vec(),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.horizon();
        let m = self.fleet_size();
        let p = &self.params;
        if t == 0 || m == 0 {
            return Err(Error::Config("empty instance".into()));
        }
        if p.fleet_size != m {
            return Err(Error::Dimension {
                expected: p.fleet_size,
                got: m,
            });
        }
        if self.pv.len() != t
            || self.layover.len() != t
            || self.drain_kw.len() != t
            || self.layover.iter().any(|r| r.len() != m)
            || self.drain_kw.iter().any(|r| r.len() != m)
        {
            return Err(Error::Config("instance arrays have inconsistent shapes".into()));
        }
        if p.chargers == 0 || p.chargers > m {
            return Err(Error::Config(format!("{} chargers for {m} buses", p.chargers)));
        }
        Ok(())
    }

    fn local(&self, t: usize, m: usize, energy: f64) -> EbLocalState {
        let b = self.layover[t][m];
        EbLocalState {
            energy_kwh: energy,
            layover: b,
            prev_layover: b,
            tau: 0,
            prev_alloc: false,
            trip: 0,
        }
    }

    /// Power of bus `m` when it holds no charger: idle at the terminal,
    /// the drain (limited by the remaining energy) on route.
    pub fn passive_power(&self, t: usize, m: usize, energy: f64) -> f64 {
        let range = feasible_power_range(&self.local(t, m, energy), false, self.params());
        if self.layover[t][m] {
            0.0
        } else {
            range.clamp(-self.drain_kw[t][m])
        }
    }

    /// Cost terms of applying `powers` under `alloc` at step `t`.
    pub fn costs(&self, t: usize, prev_alloc: &Allocation, alloc: &Allocation, powers: &[f64]) -> CostBreakdown {
        let p = self.params();
        let terminal: f64 = (0..self.fleet_size())
            .filter(|&m| self.layover[t][m])
            .map(|m| powers[m])
            .sum();
        let (p_buy, p_sell) = grid_split(terminal, self.pv[t]);
        CostBreakdown {
            charging: charging_cost(self.price[t], p_buy, p_sell, p),
            degradation: (0..self.fleet_size())
                .map(|m| degradation_cost(powers[m], self.layover[t][m], p))
                .collect(),
            switching: (0..self.fleet_size())
                .map(|m| switching_cost(prev_alloc.get(m), alloc.get(m), self.layover[t][m], p))
                .collect(),
            p_buy,
            p_sell,
        }
    }

    /// Allocations available at step `t`, smallest first.
    pub fn allocations(&self, t: usize) -> Vec<Allocation> {
        let m = self.fleet_size();
        let laying: Vec<usize> = (0..m).filter(|&i| self.layover[t][i]).collect();
        let n = self.params().chargers;
        let mut out = Vec::new();
        for mask in 0u64..(1u64 << laying.len()) {
            if (mask.count_ones() as usize) <= n {
                let on: Vec<usize> = (0..laying.len())
                    .filter(|j| mask & (1 << j) != 0)
                    .map(|j| laying[j])
                    .collect();
                out.push(Allocation::from_indices(m, &on));
            }
        }
        out.sort_by(|a, b| a.count().cmp(&b.count()).then_with(|| a.indices().cmp(&b.indices())));
        out
    }
}

/// Energy grid shared by the oracle and its tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyGrid {
    pub bins: usize,
    pub width: f64,
}

impl EnergyGrid {
    pub fn new(params: &SystemParams, bins: usize) -> Self {
        EnergyGrid {
            bins,
            width: params.energy_ceiling() / (bins - 1) as f64,
        }
    }

    pub fn energy(&self, idx: u16) -> f64 {
        idx as f64 * self.width
    }

    pub fn snap(&self, energy: f64) -> u16 {
        (energy / self.width).round().clamp(0.0, (self.bins - 1) as f64) as u16
    }
}

/// One candidate decision at a DP state.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleAction {
    pub alloc_index: usize,
    pub alloc: Allocation,
    pub powers: Vec<f64>,
    pub next: Vec<u16>,
    pub reward: f64,
}

/// Every decision at `(t, bins, prev)` in tie-break order (total absolute
/// power, allocation index, power tuple) with its successor, or `None` as
/// successor when it breaks the floor.
pub fn oracle_actions(
    inst: &DeterministicInstance,
    cfg: &OracleConfig,
    grid: &EnergyGrid,
    t: usize,
    bins: &[u16],
    prev: &Allocation,
) -> Vec<(OracleAction, bool)> {
    let p = inst.params();
    let floor = p.energy_floor();
    let m_count = inst.fleet_size();
    let energies: Vec<f64> = bins.iter().map(|&b| grid.energy(b)).collect();
    let mut out = Vec::new();
    for (ai, alloc) in inst.allocations(t).into_iter().enumerate() {
        let choices: Vec<Vec<f64>> = (0..m_count)
            .map(|m| {
                if alloc.get(m) {
                    let r = feasible_power_range(&inst.local(t, m, energies[m]), true, p);
                    cfg.power_levels.iter().copied().filter(|&l| r.contains(l)).collect()
                } else {
                    vec![inst.passive_power(t, m, energies[m])]
                }
            })
            .collect();
        if choices.iter().any(Vec::is_empty) {
            continue;
        }
        let mut idx = vec![0usize; m_count];
        loop {
            let powers: Vec<f64> = (0..m_count).map(|m| choices[m][idx[m]]).collect();
            let next: Vec<u16> = (0..m_count)
                .map(|m| grid.snap(energies[m] + powers[m] * p.dt_hours))
                .collect();
            let ok = next.iter().all(|&b| grid.energy(b) >= floor - 1e-9);
            let reward = inst.costs(t, prev, &alloc, &powers).reward();
            out.push((
                OracleAction {
                    alloc_index: ai,
                    alloc: alloc.clone(),
                    powers,
                    next,
                    reward,
                },
                ok,
            ));
            let mut k = 0;
            loop {
                if k == m_count {
                    break;
                }
                idx[k] += 1;
                if idx[k] < choices[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == m_count {
                break;
            }
        }
    }
    let key = |a: &OracleAction| a.powers.iter().map(|p| p.abs()).sum::<f64>();
    out.sort_by(|(a, _), (b, _)| {
        key(a)
            .total_cmp(&key(b))
            .then(a.alloc_index.cmp(&b.alloc_index))
            .then_with(|| {
                a.powers
                    .iter()
                    .zip(&b.powers)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    out
}

/// Optimal schedule and its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub optimal_return: f64,
    pub allocations: Vec<Allocation>,
    pub powers: Vec<Vec<f64>>,
    /// Grid energies along the schedule, `T + 1` rows.
    pub energies: Vec<Vec<f64>>,
    /// Reachable states per step, for diagnostics.
    pub states_per_step: Vec<usize>,
}

type StateKey = (Vec<u16>, Allocation);

/// Maximizes the total operational reward of `inst` subject to the floor.
pub fn dp_oracle(inst: &DeterministicInstance, cfg: &OracleConfig) -> Result<OracleSolution> {
    inst.validate()?;
    let p = *inst.params();
    cfg.validate(&p)?;
    let horizon = inst.horizon();
    if horizon > cfg.max_horizon {
        return Err(Error::Config(format!(
            "horizon {horizon} above oracle cap {}",
            cfg.max_horizon
        )));
    }
    let grid = EnergyGrid::new(&p, cfg.energy_bins);
    let start: Vec<u16> = inst.initial_energy.iter().map(|&e| grid.snap(e)).collect();
    if start.iter().any(|&b| grid.energy(b) < p.energy_floor() - 1e-9) {
        return Err(Error::Infeasible("initial energy below the floor".into()));
    }
    let s0: StateKey = (start, Allocation::zeros(inst.fleet_size()));

    // forward reachability
    let mut layers: Vec<Vec<StateKey>> = vec![vec![s0.clone()]];
    for t in 0..horizon {
        let mut seen: HashMap<StateKey, ()> = HashMap::new();
        let mut next_layer = Vec::new();
        let mut work = 0u64;
        for (bins, prev) in &layers[t] {
            for (a, ok) in oracle_actions(inst, cfg, &grid, t, bins, prev) {
                work += 1;
                if !ok {
                    continue;
                }
                let key = (a.next, a.alloc);
                if seen.insert(key.clone(), ()).is_none() {
                    next_layer.push(key);
                }
            }
        }
        if work > cfg.max_stage_work {
            return Err(Error::Config(format!(
                "step {t} needs {work} state-action evaluations, above {}",
                cfg.max_stage_work
            )));
        }
        if next_layer.is_empty() {
            return Err(Error::Infeasible(format!(
                "no schedule keeps every bus above the floor past step {t}"
            )));
        }
        layers.push(next_layer);
    }

    // backward induction
    let mut value: Vec<HashMap<StateKey, f64>> = vec![HashMap::new(); horizon + 1];
    for s in &layers[horizon] {
        value[horizon].insert(s.clone(), 0.0);
    }
    for t in (0..horizon).rev() {
        let mut vt = HashMap::with_capacity(layers[t].len());
        for s in &layers[t] {
            let mut best = f64::NEG_INFINITY;
            for (a, ok) in oracle_actions(inst, cfg, &grid, t, &s.0, &s.1) {
                if !ok {
                    continue;
                }
                let v = a.reward + value[t + 1][&(a.next, a.alloc)];
                if v > best {
                    best = v;
                }
            }
            vt.insert(s.clone(), best);
        }
        value[t] = vt;
    }
    let optimal = value[0][&s0];
    if optimal == f64::NEG_INFINITY {
        return Err(Error::Infeasible("no schedule keeps every bus above the floor".into()));
    }

    // forward reconstruction with the same tie-break
    let mut s = s0;
    let mut sol = OracleSolution {
        optimal_return: optimal,
        allocations: Vec::with_capacity(horizon),
        powers: Vec::with_capacity(horizon),
        energies: vec![s.0.iter().map(|&b| grid.energy(b)).collect()],
        states_per_step: layers.iter().map(Vec::len).collect(),
    };
    for t in 0..horizon {
        let mut best: Option<OracleAction> = None;
        let mut best_v = f64::NEG_INFINITY;
        for (a, ok) in oracle_actions(inst, cfg, &grid, t, &s.0, &s.1) {
            if !ok {
                continue;
            }
            let v = a.reward + value[t + 1][&(a.next.clone(), a.alloc.clone())];
            if v > best_v {
                best_v = v;
                best = Some(a);
            }
        }
        let a = best.expect("finite value has a maximizer");
        sol.energies.push(a.next.iter().map(|&b| grid.energy(b)).collect());
        sol.allocations.push(a.alloc.clone());
        sol.powers.push(a.powers.clone());
        s = (a.next, a.alloc);
    }
    Ok(sol)
}

/// Convenience: the oracle on `scenario`'s mean-travel day `day`.
pub fn oracle_for_scenario(
    scenario: &Arc<Scenario>,
    day: usize,
    energies: &[f64],
    cfg: &OracleConfig,
) -> Result<(DeterministicInstance, OracleSolution)> {
    let inst = DeterministicInstance::from_scenario(scenario, day, energies)?;
    let sol = dp_oracle(&inst, cfg)?;
    Ok((inst, sol))
}
