//! Forecast-based planning baseline.
//!
//! Prices are replaced by their training-day means over a few fixed
//! intra-day intervals, PV by its per-step mean and travel times by the
//! rounded mean of each trip's distribution. The resulting deterministic day
//! is solved by the dynamic-programming planner and the schedule is executed
//! open loop: allocations are restricted to the buses actually present and
//! powers are clipped to the realized feasible ranges.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::eval::{Controller, EpisodeActor};
use super::oracle::{dp_oracle, DeterministicInstance, OracleConfig, OracleSolution};
use crate::config::Scenario;
use crate::data::travel_pmf;
use crate::env::{feasible_power_range, Allocation, GlobalState};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastConfig {
    /// Interval boundaries in hours of the day, starting at 0 and ending at 24.
    pub price_breaks_hours: Vec<f64>,
    /// Days of the traces used for fitting; all when absent.
    pub training_days: Option<usize>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            price_breaks_hours: vec![0.0, 6.0, 9.0, 14.0, 17.0, 21.0, 24.0],
            training_days: None,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        let b = &self.price_breaks_hours;
        if b.len() < 2 || b[0] != 0.0 || *b.last().unwrap() != 24.0 || b.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("price breaks must rise strictly from 0 to 24".into()));
        }
        if self.training_days == Some(0) {
            return Err(Error::Config("forecast needs at least one training day".into()));
        }
        Ok(())
    }
}

/// Point forecast of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub price: Vec<f64>,
    pub pv: Vec<f64>,
    /// Planned duration in steps of trip `k` of bus `m`.
    pub travel: Vec<Vec<usize>>,
}

impl ForecastModel {
    pub fn fit(scenario: &Scenario, cfg: &ForecastConfig) -> Result<Self> {
        cfg.validate()?;
        let steps = scenario.steps();
        let days = cfg.training_days.unwrap_or(usize::MAX).min(scenario.num_days());
        let minutes = scenario.timebase.step_minutes as f64;
        let interval_of = |t: usize| {
            let hour = t as f64 * minutes / 60.0;
            cfg.price_breaks_hours
                .windows(2)
                .position(|w| hour >= w[0] && hour < w[1])
                .unwrap_or(cfg.price_breaks_hours.len() - 2)
        };
        let k = cfg.price_breaks_hours.len() - 1;
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for d in 0..days {
            for t in 0..steps {
                let i = interval_of(t);
                sums[i] += scenario.price_at(d, t as isize);
                counts[i] += 1;
            }
        }
        let means: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        let price = (0..steps).map(|t| means[interval_of(t)]).collect();
        let pv = (0..steps)
            .map(|t| (0..days).map(|d| scenario.pv_at(d, t as isize)).sum::<f64>() / days as f64)
            .collect();
        let tt = &scenario.timetable;
        let travel = (0..tt.fleet_size())
            .map(|m| {
                tt.rotation(m)
                    .iter()
                    .map(|trip| {
                        let pmf = travel_pmf(&scenario.travel, trip.departure_step)?;
                        Ok((pmf.mean().round() as usize).max(1))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ForecastModel { price, pv, travel })
    }

    pub fn instance(&self, scenario: &Scenario, energies: &[f64]) -> Result<DeterministicInstance> {
        DeterministicInstance::from_parts(scenario, self.price.clone(), self.pv.clone(), &self.travel, energies)
    }
}

/// Executes a fixed schedule against whatever the day brings.
#[derive(Debug, Clone)]
pub struct OpenLoopActor {
    plan: Arc<OracleSolution>,
    params: crate::config::SystemParams,
}

impl OpenLoopActor {
    pub fn new(plan: Arc<OracleSolution>, params: crate::config::SystemParams) -> Self {
        OpenLoopActor { plan, params }
    }
}

impl EpisodeActor for OpenLoopActor {
    fn act(&mut self, state: &GlobalState, _forced: bool, _rng: &mut dyn RngCore) -> Result<(Allocation, Vec<f64>)> {
        let m_count = state.fleet_size();
        let mut alloc = Allocation::zeros(m_count);
        let mut powers = vec![0.0; m_count];
        if let Some(planned) = self.plan.allocations.get(state.t) {
            for m in 0..m_count {
                if planned.get(m) && state.locals[m].layover {
                    alloc.set(m, true);
                    let range = feasible_power_range(&state.locals[m], true, &self.params);
                    powers[m] = range.clamp(self.plan.powers[state.t][m]);
                }
            }
        }
        Ok((alloc, powers))
    }
}

/// Plans on the forecast once per distinct start-of-day energy vector.
pub struct ForecastBaseline {
    scenario: Arc<Scenario>,
    model: ForecastModel,
    oracle: OracleConfig,
    plans: Mutex<HashMap<Vec<u64>, Arc<OracleSolution>>>,
}

impl ForecastBaseline {
    pub fn new(scenario: Arc<Scenario>, forecast: &ForecastConfig, oracle: OracleConfig) -> Result<Self> {
        let model = ForecastModel::fit(&scenario, forecast)?;
        oracle.validate(&scenario.params)?;
        Ok(ForecastBaseline {
            scenario,
            model,
            oracle,
            plans: Mutex::new(HashMap::new()),
        })
    }

    pub fn model(&self) -> &ForecastModel {
        &self.model
    }

    pub fn plan(&self, energies: &[f64]) -> Result<Arc<OracleSolution>> {
        let key: Vec<u64> = energies.iter().map(|e| e.to_bits()).collect();
        if let Some(p) = self.plans.lock().expect("plan cache").get(&key) {
            return Ok(p.clone());
        }
        let inst = self.model.instance(&self.scenario, energies)?;
        let plan = Arc::new(dp_oracle(&inst, &self.oracle)?);
        self.plans.lock().expect("plan cache").insert(key, plan.clone());
        Ok(plan)
    }
}

impl Controller for ForecastBaseline {
    fn start<'a>(&'a self, initial: &GlobalState) -> Result<Box<dyn EpisodeActor + 'a>> {
        let energies: Vec<f64> = initial.locals.iter().map(|l| l.energy_kwh).collect();
        Ok(Box::new(OpenLoopActor::new(
            self.plan(&energies)?,
            self.scenario.params,
        )))
    }
}

/// Executes the perfect-information plan of each episode's day.
pub struct OracleController {
    scenario: Arc<Scenario>,
    oracle: OracleConfig,
}

impl OracleController {
    pub fn new(scenario: Arc<Scenario>, oracle: OracleConfig) -> Result<Self> {
        oracle.validate(&scenario.params)?;
        Ok(OracleController { scenario, oracle })
    }
}

impl Controller for OracleController {
    fn start<'a>(&'a self, initial: &GlobalState) -> Result<Box<dyn EpisodeActor + 'a>> {
        let energies: Vec<f64> = initial.locals.iter().map(|l| l.energy_kwh).collect();
        let inst = DeterministicInstance::from_scenario(&self.scenario, initial.day, &energies)?;
        let plan = Arc::new(dp_oracle(&inst, &self.oracle)?);
        Ok(Box::new(OpenLoopActor::new(plan, self.scenario.params)))
    }
}
