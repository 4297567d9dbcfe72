use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Two-regime normal model of trip duration (peak / off-peak), discretized
/// onto the step grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeModel {
    pub peak_mean: f64,
    pub peak_sd: f64,
    pub offpeak_mean: f64,
    pub offpeak_sd: f64,
    /// Half-open step ranges `[start, end)` of peak traffic.
    pub peak_windows: Vec<(usize, usize)>,
    pub min_steps: usize,
    pub max_steps: usize,
    pub step_minutes: usize,
}

impl TravelTimeModel {
    /// Peak N(50, 8) during 07-09 and 17-19, off-peak N(40, 8), bounds
    /// `[1, 12]` steps.
    pub fn standard(step_minutes: usize) -> Self {
        let per_hour = 60 / step_minutes.max(1);
        TravelTimeModel {
            peak_mean: 50.0,
            peak_sd: 8.0,
            offpeak_mean: 40.0,
            offpeak_sd: 8.0,
            peak_windows: vec![(7 * per_hour, 9 * per_hour), (17 * per_hour, 19 * per_hour)],
            min_steps: 1,
            max_steps: 12,
            step_minutes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_steps < 1 || self.max_steps < self.min_steps {
            return Err(Error::Config(format!(
                "travel bounds [{}, {}] invalid (need 1 <= min <= max)",
                self.min_steps, self.max_steps
            )));
        }
        if self.step_minutes == 0 {
            return Err(Error::Config("travel step_minutes must be positive".into()));
        }
        for (m, s) in [(self.peak_mean, self.peak_sd), (self.offpeak_mean, self.offpeak_sd)] {
            if !m.is_finite() || !s.is_finite() || s < 0.0 {
                return Err(Error::Config(format!("bad travel normal N({m}, {s})")));
            }
        }
        Ok(())
    }

    pub fn is_peak(&self, departure_step: usize) -> bool {
        self.peak_windows.iter().any(|&(a, b)| (a..b).contains(&departure_step))
    }

    fn params(&self, departure_step: usize) -> (f64, f64) {
        if self.is_peak(departure_step) {
            (self.peak_mean, self.peak_sd)
        } else {
            (self.offpeak_mean, self.offpeak_sd)
        }
    }

    /// Same model with zero spread; used to build deterministic instances.
    pub fn point_mass(&self) -> Self {
        TravelTimeModel {
            peak_sd: 0.0,
            offpeak_sd: 0.0,
            ..self.clone()
        }
    }
}

/// Discrete distribution of trip duration in steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelPmf {
    min_steps: usize,
    probs: Vec<f64>,
}

impl TravelPmf {
    pub fn from_probs(min_steps: usize, probs: Vec<f64>) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || total <= 0.0 {
            return Err(Error::Config("travel pmf needs non-negative mass".into()));
        }
        Ok(TravelPmf {
            min_steps,
            probs: probs.into_iter().map(|p| p / total).collect(),
        })
    }

    /// `Pr(T = steps)`; zero outside the support.
    pub fn prob(&self, steps: usize) -> f64 {
        steps
            .checked_sub(self.min_steps)
            .and_then(|i| self.probs.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn min_steps(&self) -> usize {
        self.min_steps
    }

    pub fn max_steps(&self) -> usize {
        self.min_steps + self.probs.len() - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, p)| (self.min_steps + i, *p))
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(k, p)| k as f64 * p).sum()
    }

    /// Inverse-CDF draw; consumes exactly one uniform from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in self.iter() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        // rounding left u above the accumulated mass
        self.iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(k, _)| k)
            .last()
            .unwrap_or(self.min_steps)
    }
}

fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

/// Discretizes the duration of a trip departing at `departure_step`.
///
/// Step count `k` collects the normal mass on `[(k - 1/2) dt, (k + 1/2) dt)`
/// minutes; the result is truncated to `[min_steps, max_steps]` and
/// renormalized.
pub fn travel_pmf(model: &TravelTimeModel, departure_step: usize) -> Result<TravelPmf> {
    model.validate()?;
    let (mean, sd) = model.params(departure_step);
    let dt = model.step_minutes as f64;
    let n = model.max_steps - model.min_steps + 1;
    let mut probs = vec![0.0; n];
    if sd < 1e-9 {
        let k = (mean / dt).round();
        if k < model.min_steps as f64 || k > model.max_steps as f64 {
            return Err(Error::Config(format!(
                "point-mass travel time {mean} min falls outside [{}, {}] steps",
                model.min_steps, model.max_steps
            )));
        }
        probs[k as usize - model.min_steps] = 1.0;
    } else {
        for (i, p) in probs.iter_mut().enumerate() {
            let k = (model.min_steps + i) as f64;
            *p = normal_cdf((k + 0.5) * dt, mean, sd) - normal_cdf((k - 0.5) * dt, mean, sd);
        }
    }
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Config(format!(
            "N({mean}, {sd}) has no mass inside [{}, {}] steps",
            model.min_steps, model.max_steps
        )));
    }
    TravelPmf::from_probs(model.min_steps, probs)
}

pub fn sample_travel_steps<R: Rng + ?Sized>(
    model: &TravelTimeModel,
    departure_step: usize,
    rng: &mut R,
) -> Result<usize> {
    Ok(travel_pmf(model, departure_step)?.sample(rng))
}
