use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MINUTES_PER_DAY: usize = 1440;

/// Division of a day into equal steps plus the length of the observed
/// price/PV history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timebase {
    pub steps_per_day: usize,
    pub step_minutes: usize,
    /// Number of past steps kept besides the current one (window is `h + 1`).
    pub history_window: usize,
}

impl Timebase {
    pub fn new(steps_per_day: usize, step_minutes: usize, history_window: usize) -> Result<Self> {
        let tb = Timebase {
            steps_per_day,
            step_minutes,
            history_window,
        };
        tb.validate()?;
        Ok(tb)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_day == 0 || self.steps_per_day * self.step_minutes != MINUTES_PER_DAY {
            return Err(Error::Config(format!(
                "steps_per_day ({}) x step_minutes ({}) must equal {MINUTES_PER_DAY}",
                self.steps_per_day, self.step_minutes
            )));
        }
        if self.history_window < 1 {
            return Err(Error::Config("history_window must be >= 1".into()));
        }
        Ok(())
    }

    /// Step length in hours; all kW x h arithmetic uses this.
    pub fn dt_hours(&self) -> f64 {
        self.step_minutes as f64 / 60.0
    }

    pub fn window_len(&self) -> usize {
        self.history_window + 1
    }

    /// First step at or after `hour` (fractional hours allowed).
    pub fn step_of_hour(&self, hour: f64) -> usize {
        ((hour * 60.0) / self.step_minutes as f64).round() as usize
    }
}

impl Default for Timebase {
    fn default() -> Self {
        Timebase {
            steps_per_day: 144,
            step_minutes: 10,
            history_window: 4,
        }
    }
}
