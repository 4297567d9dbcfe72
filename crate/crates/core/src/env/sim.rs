use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dynamics::{feasible_power_range, operational_cost, safety_cost, termination_prob, CostBreakdown};
use super::state::{Allocation, EbLocalState, GlobalState, PowerRange};
use crate::config::{Scenario, SystemParams};
use crate::data::{travel_pmf, TravelPmf};
use crate::{Error, Result};

/// Relative slack accepted on controlled powers before they are rejected.
const POWER_TOL: f64 = 1e-9;

/// Result of advancing the fleet by one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_state: GlobalState,
    pub reward: f64,
    /// Shortfall below the floor in the pre-transition state, kWh.
    pub safety_cost: f64,
    pub costs: CostBreakdown,
    /// Power applied to each bus, kW.
    pub powers: Vec<f64>,
    /// Some bus arrived or departed.
    pub forced_termination: bool,
}

/// Stochastic fleet simulator over one scenario.
///
/// The environment itself is immutable; episodes are threaded through
/// [`GlobalState`] values, so one instance can serve many workers.
#[derive(Debug, Clone)]
pub struct FleetEnv {
    scenario: Arc<Scenario>,
    /// Travel-time pmf per bus and trip.
    pmfs: Vec<Vec<TravelPmf>>,
}

impl FleetEnv {
    pub fn new(scenario: Arc<Scenario>) -> Result<Self> {
        let tt = &scenario.timetable;
        let pmfs = (0..tt.fleet_size())
            .map(|m| {
                tt.rotation(m)
                    .iter()
                    .map(|trip| travel_pmf(&scenario.travel, trip.departure_step))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FleetEnv { scenario, pmfs })
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn params(&self) -> &SystemParams {
        &self.scenario.params
    }

    pub fn fleet_size(&self) -> usize {
        self.scenario.params.fleet_size
    }

    pub fn horizon(&self) -> usize {
        self.scenario.timebase.steps_per_day
    }

    /// Travel-time distribution of trip `k` of bus `m`.
    pub fn pmf(&self, m: usize, k: usize) -> Option<&TravelPmf> {
        self.pmfs[m].get(k)
    }

    /// Starts an episode on a random trace day with random initial energy.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> GlobalState {
        let days = self.scenario.num_days();
        let day = if days > 1 { rng.random_range(0..days) } else { 0 };
        self.reset_on_day(day, rng)
    }

    pub fn reset_on_day<R: Rng + ?Sized>(&self, day: usize, rng: &mut R) -> GlobalState {
        let b = &self.scenario.config.battery;
        let e_bat = self.params().e_bat;
        let (lo, hi) = (b.initial_soc_range[0] * e_bat, b.initial_soc_range[1] * e_bat);
        let energies: Vec<f64> = (0..self.fleet_size())
            .map(|_| if lo < hi { rng.random_range(lo..=hi) } else { lo })
            .collect();
        self.initial_state(day, &energies)
    }

    /// Start-of-day state with the given battery energies.
    pub fn initial_state(&self, day: usize, energies: &[f64]) -> GlobalState {
        let tt = &self.scenario.timetable;
        let locals = energies
            .iter()
            .enumerate()
            .map(|(m, &e)| EbLocalState {
                energy_kwh: e,
                layover: true,
                prev_layover: true,
                tau: tt.departure(m, 0).saturating_sub(1),
                prev_alloc: false,
                trip: 0,
            })
            .collect();
        let h = self.scenario.timebase.history_window as isize;
        GlobalState {
            locals,
            pv_history: (-h..=0).map(|t| self.scenario.pv_at(day, t)).collect(),
            price_history: (-h..=0).map(|t| self.scenario.price_at(day, t)).collect(),
            t: 0,
            day,
        }
    }

    pub fn is_terminal(&self, state: &GlobalState) -> bool {
        state.t >= self.horizon()
    }

    pub fn power_range(&self, state: &GlobalState, m: usize, alloc_bit: bool) -> PowerRange {
        feasible_power_range(&state.locals[m], alloc_bit, self.params())
    }

    /// Termination probability of bus `m`'s current period. A bus whose
    /// rotation is finished stays at the terminal.
    pub fn termination_prob(&self, state: &GlobalState, m: usize) -> f64 {
        let l = &state.locals[m];
        if l.layover {
            if l.trip >= self.pmfs[m].len() || l.tau > 0 {
                0.0
            } else {
                1.0
            }
        } else {
            termination_prob(l, &self.pmfs[m][l.trip])
        }
    }

    /// Advances one step.
    ///
    /// `controlled` holds one power per bus; entries of buses without a
    /// charger are ignored and replaced by idle (terminal) or a random drain
    /// (on route).
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &GlobalState,
        alloc: &Allocation,
        controlled: &[f64],
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let m_count = self.fleet_size();
        let params = self.params();
        if self.is_terminal(state) {
            return Err(Error::Contract(format!("step called at terminal t={}", state.t)));
        }
        if controlled.len() != m_count {
            return Err(Error::Dimension {
                expected: m_count,
                got: controlled.len(),
            });
        }
        if !alloc.is_feasible(state, params.chargers) {
            return Err(Error::Contract(format!(
                "allocation {alloc} infeasible at t={}",
                state.t
            )));
        }
        let [c_lo, c_hi] = self.scenario.config.consumption_kw;
        let mut powers = Vec::with_capacity(m_count);
        for (m, l) in state.locals.iter().enumerate() {
            let range = feasible_power_range(l, alloc.get(m), params);
            let p = if alloc.get(m) {
                let p = controlled[m];
                let tol = POWER_TOL * (1.0 + p.abs());
                if !p.is_finite() || p < range.lo - tol || p > range.hi + tol {
                    return Err(Error::Contract(format!(
                        "power {p} for bus {m} outside [{}, {}] at t={}",
                        range.lo, range.hi, state.t
                    )));
                }
                range.clamp(p)
            } else if l.layover {
                0.0
            } else {
                let drain = if c_lo < c_hi {
                    rng.random_range(c_lo..=c_hi)
                } else {
                    c_lo
                };
                range.clamp(-drain)
            };
            powers.push(p);
        }
        let costs = operational_cost(state, alloc, &powers, params);
        let safety = safety_cost(state, params);

        let t_next = state.t + 1;
        let tt = &self.scenario.timetable;
        let ceiling = params.energy_ceiling();
        let mut forced = false;
        let mut locals = Vec::with_capacity(m_count);
        for (m, l) in state.locals.iter().enumerate() {
            let xi = self.termination_prob(state, m);
            let u: f64 = rng.random();
            let flip = u < xi;
            let layover = l.layover != flip;
            forced |= flip;
            let (tau, trip) = match (l.layover, layover) {
                (true, true) => (l.tau.saturating_sub(1), l.trip),
                (true, false) | (false, false) => (l.tau + 1, l.trip),
                (false, true) => {
                    let k = l.trip + 1;
                    // a late return departs on the following step
                    (tt.departure(m, k).saturating_sub(t_next + 1), k)
                }
            };
            locals.push(EbLocalState {
                energy_kwh: (l.energy_kwh + powers[m] * params.dt_hours).clamp(0.0, ceiling),
                layover,
                prev_layover: l.layover,
                tau,
                prev_alloc: alloc.get(m),
                trip,
            });
        }
        let mut pv_history = state.pv_history[1..].to_vec();
        pv_history.push(self.scenario.pv_at(state.day, t_next as isize));
        let mut price_history = state.price_history[1..].to_vec();
        price_history.push(self.scenario.price_at(state.day, t_next as isize));

        Ok(StepOutcome {
            next_state: GlobalState {
                locals,
                pv_history,
                price_history,
                t: t_next,
                day: state.day,
            },
            reward: costs.reward(),
            safety_cost: safety,
            costs,
            powers,
            forced_termination: forced,
        })
    }
}
