use std::fmt;

use serde::{Deserialize, Serialize};

/// Per-bus slice of the simulator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbLocalState {
    pub energy_kwh: f64,
    /// `true` while at the terminal (layover), `false` on route.
    pub layover: bool,
    pub prev_layover: bool,
    /// Steps until departure during layover; steps since departure on route.
    pub tau: usize,
    pub prev_alloc: bool,
    /// Index into the bus rotation: the next trip during layover, the
    /// running trip on route. Equals the rotation length once all trips
    /// are done.
    pub trip: usize,
}

/// Fleet state plus shared trace windows and the clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalState {
    pub locals: Vec<EbLocalState>,
    /// PV output for steps `t-h ..= t`, oldest first.
    pub pv_history: Vec<f64>,
    pub price_history: Vec<f64>,
    pub t: usize,
    /// Trace day the episode was drawn from.
    pub day: usize,
}

impl GlobalState {
    pub fn fleet_size(&self) -> usize {
        self.locals.len()
    }

    pub fn price(&self) -> f64 {
        *self.price_history.last().expect("non-empty window")
    }

    pub fn pv(&self) -> f64 {
        *self.pv_history.last().expect("non-empty window")
    }

    /// Indices of buses at the terminal.
    pub fn laying(&self) -> Vec<usize> {
        self.locals
            .iter()
            .enumerate()
            .filter(|(_, l)| l.layover)
            .map(|(m, _)| m)
            .collect()
    }

    pub fn prev_allocation(&self) -> Allocation {
        Allocation::from_bits(self.locals.iter().map(|l| l.prev_alloc).collect())
    }
}

/// Charger assignment over the fleet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Allocation {
    bits: Vec<bool>,
}

impl Allocation {
    pub fn zeros(fleet_size: usize) -> Self {
        Allocation {
            bits: vec![false; fleet_size],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Allocation { bits }
    }

    pub fn from_indices(fleet_size: usize, on: &[usize]) -> Self {
        let mut a = Allocation::zeros(fleet_size);
        for &m in on {
            a.bits[m] = true;
        }
        a
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, m: usize) -> bool {
        self.bits[m]
    }

    pub fn set(&mut self, m: usize, on: bool) {
        self.bits[m] = on;
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&m| self.bits[m]).collect()
    }

    pub fn as_f64(&self) -> impl Iterator<Item = f64> + '_ {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 })
    }

    /// Feasible under `chargers` for the given state.
    pub fn is_feasible(&self, state: &GlobalState, chargers: usize) -> bool {
        self.bits.len() == state.fleet_size()
            && self.count() <= chargers
            && self.bits.iter().zip(&state.locals).all(|(&on, l)| !on || l.layover)
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Closed interval of admissible power, kW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRange {
    pub lo: f64,
    pub hi: f64,
}

impl PowerRange {
    pub fn point(p: f64) -> Self {
        PowerRange { lo: p, hi: p }
    }

    pub fn is_singleton(&self) -> bool {
        self.lo >= self.hi
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.lo && p <= self.hi
    }

    pub fn clamp(&self, p: f64) -> f64 {
        p.max(self.lo).min(self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}
