//! Input data: the step grid, price and PV traces, travel-time model and
//! per-bus trip rotations.

mod timebase;
mod timetable;
mod trace;
mod travel;

pub use timebase::Timebase;
pub use timetable::{build_timetable, headway_departures, Timetable, TimetableSpec, TripSpec};
pub use trace::{
    load_trace, synthetic_price, synthetic_pv, PriceTrace, PvTrace, SyntheticPrice, SyntheticPv, Trace, TraceKind,
};
pub use travel::{sample_travel_steps, travel_pmf, TravelPmf, TravelTimeModel};
