//! Per-step CSV dump of an episode.

use std::io::Write;

use serde::Serialize;

use super::sim::StepOutcome;
use super::state::{Allocation, GlobalState};
use crate::Result;

/// One bus at one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub m: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "B")]
    pub layover: u8,
    pub tau: usize,
    pub omega: u8,
    pub p: f64,
    pub price: f64,
    pub pv: f64,
    #[serde(rename = "P_buy")]
    pub p_buy: f64,
    #[serde(rename = "P_sell")]
    pub p_sell: f64,
    pub c_ch: f64,
    pub c_bat: f64,
    pub c_sw: f64,
    pub c_safe: f64,
}

impl TraceRow {
    /// Rows for the transition out of `state`.
    pub fn from_step(state: &GlobalState, alloc: &Allocation, out: &StepOutcome) -> Vec<TraceRow> {
        state
            .locals
            .iter()
            .enumerate()
            .map(|(m, l)| TraceRow {
                t: state.t,
                m,
                energy: l.energy_kwh,
                layover: l.layover as u8,
                tau: l.tau,
                omega: alloc.get(m) as u8,
                p: out.powers[m],
                price: state.price(),
                pv: state.pv(),
                p_buy: out.costs.p_buy,
                p_sell: out.costs.p_sell,
                c_ch: out.costs.charging,
                c_bat: out.costs.degradation[m],
                c_sw: out.costs.switching[m],
                c_safe: out.safety_cost,
            })
            .collect()
    }
}

pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(w: W) -> Self {
        TraceWriter {
            inner: csv::Writer::from_writer(w),
        }
    }

    pub fn write_step(&mut self, state: &GlobalState, alloc: &Allocation, out: &StepOutcome) -> Result<()> {
        for row in TraceRow::from_step(state, alloc, out) {
            self.inner
                .serialize(row)
                .map_err(|e| crate::Error::Domain(format!("trace write failed: {e}")))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner
            .flush()
            .map_err(|e| crate::Error::Domain(format!("trace flush failed: {e}")))?;
        self.inner
            .into_inner()
            .map_err(|e| crate::Error::Domain(format!("trace flush failed: {e}")))
    }
}
