use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripSpec {
    pub trip_id: usize,
    pub route_id: usize,
    pub departure_step: usize,
}

/// How the timetable is described in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TimetableSpec {
    /// Departure steps per bus; routes alternate 0, 1, ... within a rotation.
    Explicit {
        departures: Vec<Vec<usize>>,
        #[serde(default = "default_routes")]
        routes: usize,
    },
    /// Departures every `headway` steps from `first` to `last` inclusive,
    /// alternating over `routes` loops and handed to buses round-robin.
    Headway {
        first: usize,
        headway: usize,
        last: usize,
        #[serde(default = "default_routes")]
        routes: usize,
    },
}

fn default_routes() -> usize {
    2
}

/// Departure steps of the headway generator as `(step, route)` pairs.
pub fn headway_departures(first: usize, headway: usize, last: usize, routes: usize) -> Vec<(usize, usize)> {
    let routes = routes.max(1);
    (0..)
        .map(|j| (first + j * headway.max(1), j % routes))
        .take_while(|(d, _)| *d <= last)
        .collect()
}

/// Per-bus ordered trip rotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Timetable {
    rotations: Vec<Vec<TripSpec>>,
    steps_per_day: usize,
}

impl Timetable {
    pub fn rotation(&self, bus: usize) -> &[TripSpec] {
        &self.rotations[bus]
    }

    pub fn fleet_size(&self) -> usize {
        self.rotations.len()
    }

    pub fn num_trips(&self) -> usize {
        self.rotations.iter().map(Vec::len).sum()
    }

    /// Scheduled departure of the `k`-th trip of `bus`; past the last trip
    /// the bus stays until the end of the day, reported as `steps_per_day`.
    pub fn departure(&self, bus: usize, k: usize) -> usize {
        self.rotations[bus]
            .get(k)
            .map(|t| t.departure_step)
            .unwrap_or(self.steps_per_day)
    }

    pub fn trip(&self, bus: usize, k: usize) -> Option<&TripSpec> {
        self.rotations[bus].get(k)
    }

    /// Index of the first trip of `bus` departing at or after `t`.
    pub fn next_trip(&self, bus: usize, t: usize) -> usize {
        self.rotations[bus].partition_point(|trip| trip.departure_step < t)
    }
}

/// Validates and materializes per-bus rotations.
pub fn build_timetable(spec: &TimetableSpec, fleet_size: usize, steps_per_day: usize) -> Result<Timetable> {
    let per_bus: Vec<Vec<(usize, usize)>> = match spec {
        TimetableSpec::Explicit { departures, routes } => {
            if departures.len() != fleet_size {
                return Err(Error::Config(format!(
                    "timetable lists {} buses, fleet has {fleet_size}",
                    departures.len()
                )));
            }
            departures
                .iter()
                .map(|ds| ds.iter().enumerate().map(|(i, d)| (*d, i % (*routes).max(1))).collect())
                .collect()
        }
        TimetableSpec::Headway {
            first,
            headway,
            last,
            routes,
        } => {
            if *headway == 0 {
                return Err(Error::Config("headway must be positive".into()));
            }
            let mut per_bus = vec![Vec::new(); fleet_size];
            for (j, dep) in headway_departures(*first, *headway, *last, *routes)
                .into_iter()
                .enumerate()
            {
                per_bus[j % fleet_size.max(1)].push(dep);
            }
            per_bus
        }
    };

    for (m, deps) in per_bus.iter().enumerate() {
        if deps.is_empty() {
            return Err(Error::Config(format!("bus {m} has no trips")));
        }
        for w in deps.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Config(format!(
                    "bus {m}: departures {} and {} are not strictly increasing",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some((d, _)) = deps.iter().find(|(d, _)| *d >= steps_per_day) {
            return Err(Error::Config(format!("bus {m}: departure {d} outside the day")));
        }
    }

    // trip ids in global departure order, ties broken by bus
    let mut all: Vec<(usize, usize, usize)> = per_bus
        .iter()
        .enumerate()
        .flat_map(|(m, deps)| deps.iter().enumerate().map(move |(i, (d, _))| (*d, m, i)))
        .collect();
    all.sort_unstable();
    let mut rotations: Vec<Vec<TripSpec>> = per_bus
        .iter()
        .map(|deps| {
            deps.iter()
                .map(|(d, r)| TripSpec {
                    trip_id: 0,
                    route_id: *r,
                    departure_step: *d,
                })
                .collect()
        })
        .collect();
    for (id, (_, m, i)) in all.into_iter().enumerate() {
        rotations[m][i].trip_id = id;
    }
    Ok(Timetable {
        rotations,
        steps_per_day,
    })
}
