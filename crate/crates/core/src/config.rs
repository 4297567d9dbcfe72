//! Scenario and experiment files.
//!
//! One TOML document describes an experiment: the scenario (fleet, battery,
//! cost weights, traces, timetable) plus training, oracle, forecast and
//! evaluation settings. `schema_version` must equal [`SCHEMA_VERSION`].

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::baselines::{ForecastConfig, OracleConfig};
use crate::data::{
    build_timetable, load_trace, synthetic_price, synthetic_pv, PriceTrace, PvTrace, SyntheticPrice, SyntheticPv,
    Timebase, Timetable, TimetableSpec, Trace, TraceKind, TravelTimeModel,
};
use crate::trainer::TrainConfig;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    pub fleet_size: usize,
    pub charger_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryConfig {
    pub capacity_kwh: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub p_ch_max_kw: f64,
    pub p_dis_max_kw: f64,
    /// Initial SoC drawn uniformly from this fraction range.
    pub initial_soc_range: [f64; 2],
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            capacity_kwh: 240.0,
            soc_min: 0.2,
            soc_max: 1.0,
            p_ch_max_kw: 120.0,
            p_dis_max_kw: 120.0,
            initial_soc_range: [0.6, 0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostConfig {
    pub sell_discount: f64,
    pub zeta_b: f64,
    pub zeta_s: f64,
    /// Slope of the linearized battery life curve.
    pub bk_slope: f64,
    /// Fixed penalty weight used by the penalty-shaped baseline.
    pub lambda_safe: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            sell_discount: 0.8,
            zeta_b: 0.1,
            zeta_s: 0.1,
            bk_slope: -100.0,
            lambda_safe: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TravelConfig {
    pub peak_mean_min: f64,
    pub peak_sd_min: f64,
    pub offpeak_mean_min: f64,
    pub offpeak_sd_min: f64,
    /// Peak windows as `[start_hour, end_hour)`.
    pub peak_hours: Vec<[f64; 2]>,
    pub min_steps: usize,
    pub max_steps: usize,
}

impl Default for TravelConfig {
    fn default() -> Self {
        TravelConfig {
            peak_mean_min: 50.0,
            peak_sd_min: 8.0,
            offpeak_mean_min: 40.0,
            offpeak_sd_min: 8.0,
            peak_hours: vec![[7.0, 9.0], [17.0, 19.0]],
            min_steps: 1,
            max_steps: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum PriceSource {
    Csv { path: PathBuf },
    Synthetic(SyntheticPrice),
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum PvSource {
    Csv { path: PathBuf },
    Synthetic(SyntheticPv),
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub timebase: Timebase,
    pub fleet: FleetConfig,
    #[serde(default)]
    pub battery: BatteryConfig,
    #[serde(default)]
    pub costs: CostConfig,
    /// Drain band of an operating bus, kW.
    #[serde(default = "default_consumption")]
    pub consumption_kw: [f64; 2],
    #[serde(default)]
    pub travel: TravelConfig,
    pub price: PriceSource,
    pub pv: PvSource,
    pub timetable: TimetableSpec,
    #[serde(default)]
    pub seed: u64,
}

fn default_consumption() -> [f64; 2] {
    [20.0, 40.0]
}

/// Physical and cost constants in the units the simulator uses (kW, kWh, h).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub fleet_size: usize,
    pub chargers: usize,
    pub e_bat: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub p_ch_max: f64,
    pub p_dis_max: f64,
    pub dt_hours: f64,
    pub sell_discount: f64,
    pub zeta_b: f64,
    pub zeta_s: f64,
    pub bk_slope: f64,
}

impl SystemParams {
    /// Battery floor `soc_min * e_bat`, kWh.
    pub fn energy_floor(&self) -> f64 {
        self.soc_min * self.e_bat
    }

    pub fn energy_ceiling(&self) -> f64 {
        self.soc_max * self.e_bat
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.timebase.validate()?;
        let FleetConfig {
            fleet_size: m,
            charger_count: n,
        } = self.fleet;
        if m == 0 || n == 0 || n >= m {
            return Err(Error::Config(format!(
                "need 0 < chargers < buses, got {n} chargers for {m} buses"
            )));
        }
        let b = &self.battery;
        if !(b.capacity_kwh > 0.0) {
            return Err(Error::Config("battery capacity must be positive".into()));
        }
        if !(0.0 <= b.soc_min && b.soc_min < b.soc_max && b.soc_max <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= soc_min < soc_max <= 1, got [{}, {}]",
                b.soc_min, b.soc_max
            )));
        }
        if !(b.p_ch_max_kw > 0.0 && b.p_dis_max_kw > 0.0) {
            return Err(Error::Config("charge/discharge limits must be positive".into()));
        }
        let [lo, hi] = b.initial_soc_range;
        if !(0.0 <= lo && lo <= hi && hi <= b.soc_max) {
            return Err(Error::Config(format!("initial_soc_range [{lo}, {hi}] invalid")));
        }
        let c = &self.costs;
        if !(0.0 < c.sell_discount && c.sell_discount < 1.0) {
            return Err(Error::Config(format!(
                "sell_discount {} not in (0, 1)",
                c.sell_discount
            )));
        }
        if c.zeta_b < 0.0 || c.zeta_s < 0.0 || c.lambda_safe < 0.0 {
            return Err(Error::Config("cost weights must be non-negative".into()));
        }
        let [clo, chi] = self.consumption_kw;
        if !(0.0 <= clo && clo <= chi) {
            return Err(Error::Config(format!("consumption band [{clo}, {chi}] invalid")));
        }
        self.travel_model().validate()?;
        Ok(())
    }

    pub fn params(&self) -> SystemParams {
        SystemParams {
            fleet_size: self.fleet.fleet_size,
            chargers: self.fleet.charger_count,
            e_bat: self.battery.capacity_kwh,
            soc_min: self.battery.soc_min,
            soc_max: self.battery.soc_max,
            p_ch_max: self.battery.p_ch_max_kw,
            p_dis_max: self.battery.p_dis_max_kw,
            dt_hours: self.timebase.dt_hours(),
            sell_discount: self.costs.sell_discount,
            zeta_b: self.costs.zeta_b,
            zeta_s: self.costs.zeta_s,
            bk_slope: self.costs.bk_slope,
        }
    }

    pub fn travel_model(&self) -> TravelTimeModel {
        let t = &self.travel;
        TravelTimeModel {
            peak_mean: t.peak_mean_min,
            peak_sd: t.peak_sd_min,
            offpeak_mean: t.offpeak_mean_min,
            offpeak_sd: t.offpeak_sd_min,
            peak_windows: t
                .peak_hours
                .iter()
                .map(|[a, b]| (self.timebase.step_of_hour(*a), self.timebase.step_of_hour(*b)))
                .collect(),
            min_steps: t.min_steps,
            max_steps: t.max_steps,
            step_minutes: self.timebase.step_minutes,
        }
    }

    /// Loads traces and builds the timetable. Relative CSV paths resolve
    /// against `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<Scenario> {
        self.validate()?;
        let tb = self.timebase;
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let price = match &self.price {
            PriceSource::Csv { path } => PriceTrace(load_trace(resolve(path), TraceKind::Price, &tb)?),
            PriceSource::Synthetic(s) => synthetic_price(s, &tb)?,
            PriceSource::Constant { value } => PriceTrace(Trace::constant(*value, &tb, 1)?),
        };
        let pv = match &self.pv {
            PvSource::Csv { path } => PvTrace::new(load_trace(resolve(path), TraceKind::Pv, &tb)?)?,
            PvSource::Synthetic(s) => synthetic_pv(s, &tb)?,
            PvSource::Constant { value } => PvTrace::new(Trace::constant(*value, &tb, 1)?)?,
        };
        let timetable = build_timetable(&self.timetable, self.fleet.fleet_size, tb.steps_per_day)?;
        Scenario::new(self.clone(), price, pv, timetable)
    }
}

/// A fully loaded scenario, immutable and shareable across workers.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub timebase: Timebase,
    pub params: SystemParams,
    pub price: PriceTrace,
    pub pv: PvTrace,
    pub timetable: Timetable,
    pub travel: TravelTimeModel,
    /// Normalizers for the observation encoders.
    pub price_scale: f64,
    pub pv_scale: f64,
}

impl Scenario {
    pub fn new(config: ScenarioConfig, price: PriceTrace, pv: PvTrace, timetable: Timetable) -> Result<Self> {
        config.validate()?;
        let tb = config.timebase;
        for (name, tr) in [("price", &price.0), ("pv", &pv.0)] {
            if tr.steps_per_day() != tb.steps_per_day {
                return Err(Error::Config(format!("{name} trace is on a different step grid")));
            }
        }
        if price.0.num_days() != pv.0.num_days() && price.0.num_days() != 1 && pv.0.num_days() != 1 {
            return Err(Error::Config(format!(
                "price has {} days, pv has {}; need equal counts or a single day",
                price.0.num_days(),
                pv.0.num_days()
            )));
        }
        if timetable.fleet_size() != config.fleet.fleet_size {
            return Err(Error::Config("timetable fleet size mismatch".into()));
        }
        let price_scale = price.0.max_abs().max(1e-6);
        let pv_scale = pv.0.max_abs().max(1.0);
        Ok(Scenario {
            params: config.params(),
            travel: config.travel_model(),
            timebase: tb,
            config,
            price,
            pv,
            timetable,
            price_scale,
            pv_scale,
        })
    }

    pub fn into_shared(self) -> Arc<Scenario> {
        Arc::new(self)
    }

    /// Number of distinct days episodes can be drawn from.
    pub fn num_days(&self) -> usize {
        self.price.0.num_days().max(self.pv.0.num_days())
    }

    pub fn price_at(&self, day: usize, t: isize) -> f64 {
        let d = day % self.price.0.num_days();
        self.price.0.at(d, t)
    }

    pub fn pv_at(&self, day: usize, t: isize) -> f64 {
        let d = day % self.pv.0.num_days();
        self.pv.0.at(d, t)
    }

    pub fn fleet_size(&self) -> usize {
        self.params.fleet_size
    }

    pub fn steps(&self) -> usize {
        self.timebase.steps_per_day
    }

    /// Same scenario with zero travel-time spread, a point consumption band
    /// at its midpoint and only day `day` of each trace.
    pub fn deterministic_variant(&self, day: usize) -> Result<Scenario> {
        let mut config = self.config.clone();
        config.travel.peak_sd_min = 0.0;
        config.travel.offpeak_sd_min = 0.0;
        let mid = 0.5 * (config.consumption_kw[0] + config.consumption_kw[1]);
        config.consumption_kw = [mid, mid];
        let steps = self.steps();
        let price = PriceTrace(Trace::new(
            (0..steps).map(|t| self.price_at(day, t as isize)).collect(),
            steps,
        )?);
        let pv = PvTrace::new(Trace::new(
            (0..steps).map(|t| self.pv_at(day, t as isize)).collect(),
            steps,
        )?)?;
        Scenario::new(config, price, pv, self.timetable.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seed: u64,
    /// Number of evaluation episodes dumped as per-step CSV traces.
    pub trace_episodes: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 500,
            seed: 1_000_003,
            trace_episodes: 1,
        }
    }
}

/// Top-level experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub forecast: ForecastConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(format!("schema error: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.train.validate()?;
        self.oracle.validate(&self.scenario.params())?;
        self.forecast.validate()?;
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Built-in scenarios used by tests, examples and the acceptance suite.
pub mod presets {
    use super::*;

    /// Six buses, three chargers, 10-minute steps, headway timetable on two
    /// opposing loops, the typical-day price and PV profiles.
    pub fn six_bus() -> ScenarioConfig {
        ScenarioConfig {
            timebase: Timebase::default(),
            fleet: FleetConfig {
                fleet_size: 6,
                charger_count: 3,
            },
            battery: BatteryConfig::default(),
            costs: CostConfig::default(),
            consumption_kw: default_consumption(),
            travel: TravelConfig::default(),
            price: PriceSource::Synthetic(SyntheticPrice::default()),
            pv: PvSource::Synthetic(SyntheticPv {
                peak_kw: 42.92,
                ..SyntheticPv::default()
            }),
            timetable: TimetableSpec::Headway {
                first: 36,
                headway: 3,
                last: 126,
                routes: 2,
            },
            seed: 0,
        }
    }

    /// Two buses sharing one charger on an hourly grid (`T = 24`).
    ///
    /// Trips take roughly 100 minutes (one to three steps) and drain
    /// 20-40 kW, so each bus needs mid-day recharging to stay above the
    /// floor. `stochastic_traces` switches price and PV to a 30-day noisy
    /// generator; otherwise both are the deterministic typical day.
    pub fn micro(stochastic_traces: bool) -> ScenarioConfig {
        let (price, pv) = if stochastic_traces {
            (
                PriceSource::Synthetic(SyntheticPrice {
                    days: 30,
                    noise: 0.15,
                    seed: 11,
                    ..SyntheticPrice::default()
                }),
                PvSource::Synthetic(SyntheticPv {
                    days: 30,
                    peak_kw: 60.0,
                    noise: 0.3,
                    seed: 12,
                    ..SyntheticPv::default()
                }),
            )
        } else {
            (
                PriceSource::Synthetic(SyntheticPrice::default()),
                PvSource::Synthetic(SyntheticPv {
                    peak_kw: 60.0,
                    ..SyntheticPv::default()
                }),
            )
        };
        ScenarioConfig {
            timebase: Timebase {
                steps_per_day: 24,
                step_minutes: 60,
                history_window: 4,
            },
            fleet: FleetConfig {
                fleet_size: 2,
                charger_count: 1,
            },
            battery: BatteryConfig {
                initial_soc_range: [0.5, 0.5],
                ..BatteryConfig::default()
            },
            costs: CostConfig::default(),
            consumption_kw: default_consumption(),
            travel: TravelConfig {
                peak_mean_min: 100.0,
                peak_sd_min: 25.0,
                offpeak_mean_min: 100.0,
                offpeak_sd_min: 25.0,
                peak_hours: vec![],
                min_steps: 1,
                max_steps: 4,
            },
            price,
            pv,
            timetable: TimetableSpec::Explicit {
                departures: vec![vec![6, 12, 18], vec![8, 14, 20]],
                routes: 2,
            },
            seed: 0,
        }
    }

    /// `micro` shrunk to `T = 12` two-hour steps.
    pub fn micro_t12() -> ScenarioConfig {
        let mut cfg = micro(false);
        cfg.timebase = Timebase {
            steps_per_day: 12,
            step_minutes: 120,
            history_window: 2,
        };
        cfg.travel = TravelConfig {
            peak_mean_min: 170.0,
            peak_sd_min: 50.0,
            offpeak_mean_min: 170.0,
            offpeak_sd_min: 50.0,
            peak_hours: vec![],
            min_steps: 1,
            max_steps: 3,
        };
        cfg.timetable = TimetableSpec::Explicit {
            departures: vec![vec![3, 7], vec![4, 8]],
            routes: 2,
        };
        cfg
    }

    pub fn experiment(scenario: ScenarioConfig) -> ExperimentConfig {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            scenario,
            train: TrainConfig::default(),
            oracle: OracleConfig::default(),
            forecast: ForecastConfig::default(),
            eval: EvalConfig::default(),
        }
    }

    /// Training settings for the two-bus scenarios: narrower allocation
    /// actor and critics with faster learning rates, so a 2 000-iteration
    /// budget is enough to converge.
    pub fn micro_train() -> TrainConfig {
        TrainConfig {
            high_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            lr_actor: 2e-3,
            lr_critic: 3e-3,
            ..TrainConfig::default()
        }
    }

    /// [`experiment`] with [`micro_train`] settings.
    pub fn small_experiment(scenario: ScenarioConfig) -> ExperimentConfig {
        ExperimentConfig {
            train: micro_train(),
            ..experiment(scenario)
        }
    }
}
