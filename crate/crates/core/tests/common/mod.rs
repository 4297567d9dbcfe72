//! Helpers shared by integration tests.
#![allow(dead_code)]

use ebcsl::baselines::{DeterministicInstance, EnergyGrid, OracleConfig};
use ebcsl::config::{presets, SystemParams};
use ebcsl::env::{feasible_power_range, Allocation, EbLocalState};
use rand::Rng;

pub fn params(fleet: usize, chargers: usize, dt: f64) -> SystemParams {
    let mut p = presets::six_bus().params();
    p.fleet_size = fleet;
    p.chargers = chargers;
    p.dt_hours = dt;
    p
}

/// One-bus instance: two layover steps at prices 0.05 and 0.01, then one
/// step on route draining 120 kW for 10 minutes.
pub fn worked_example() -> DeterministicInstance {
    DeterministicInstance {
        params: params(1, 1, 1.0 / 6.0),
        price: vec![0.05, 0.01, 0.05],
        pv: vec![0.0; 3],
        layover: vec![vec![true], vec![true], vec![false]],
        drain_kw: vec![vec![0.0], vec![0.0], vec![120.0]],
        initial_energy: vec![48.0],
    }
}

/// Random instance with at most 5^4 action sequences.
pub fn random_instance<R: Rng>(rng: &mut R) -> (DeterministicInstance, OracleConfig) {
    let two = rng.random_bool(0.5);
    let (m_count, levels) = if two {
        (2, vec![0.0, 120.0])
    } else {
        (1, vec![-60.0, 0.0, 60.0, 120.0])
    };
    let horizon = 4;
    let dt = [1.0 / 6.0, 0.25, 0.5][rng.random_range(0..3)];
    let layover: Vec<Vec<bool>> = (0..horizon)
        .map(|_| (0..m_count).map(|_| rng.random_bool(0.7)).collect())
        .collect();
    let inst = DeterministicInstance {
        params: params(m_count, 1, dt),
        price: (0..horizon).map(|_| rng.random_range(-0.02..0.2)).collect(),
        pv: (0..horizon).map(|_| rng.random_range(0.0..80.0)).collect(),
        drain_kw: (0..horizon)
            .map(|_| (0..m_count).map(|_| rng.random_range(10.0..60.0)).collect())
            .collect(),
        layover,
        initial_energy: (0..m_count).map(|_| rng.random_range(50.0..230.0)).collect(),
    };
    let cfg = OracleConfig {
        power_levels: levels,
        energy_bins: [25, 49, 241][rng.random_range(0..3)],
        ..OracleConfig::default()
    };
    (inst, cfg)
}

/// Best total reward over every action sequence, enumerated directly.
pub fn exhaustive(inst: &DeterministicInstance, cfg: &OracleConfig) -> (f64, usize) {
    let p = inst.params;
    let grid = EnergyGrid::new(&p, cfg.energy_bins);
    let m_count = inst.fleet_size();
    let mut count = 0;
    fn rec(
        inst: &DeterministicInstance,
        cfg: &OracleConfig,
        grid: &EnergyGrid,
        t: usize,
        bins: Vec<u16>,
        prev: Allocation,
        count: &mut usize,
    ) -> f64 {
        if t == inst.horizon() {
            *count += 1;
            return 0.0;
        }
        let p = inst.params;
        let m_count = inst.fleet_size();
        let energies: Vec<f64> = bins.iter().map(|&b| grid.energy(b)).collect();
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << m_count) {
            let alloc = Allocation::from_bits((0..m_count).map(|m| mask & (1 << m) != 0).collect());
            if alloc.count() > p.chargers || (0..m_count).any(|m| alloc.get(m) && !inst.layover[t][m]) {
                continue;
            }
            let options: Vec<Vec<f64>> = (0..m_count)
                .map(|m| {
                    let local = EbLocalState {
                        energy_kwh: energies[m],
                        layover: inst.layover[t][m],
                        prev_layover: inst.layover[t][m],
                        tau: 0,
                        prev_alloc: false,
                        trip: 0,
                    };
                    let r = feasible_power_range(&local, alloc.get(m), &p);
                    if alloc.get(m) {
                        cfg.power_levels.iter().copied().filter(|&l| r.contains(l)).collect()
                    } else if inst.layover[t][m] {
                        vec![0.0]
                    } else {
                        vec![r.clamp(-inst.drain_kw[t][m])]
                    }
                })
                .collect();
            let total: usize = options.iter().map(Vec::len).product();
            for mut code in 0..total {
                let mut powers = vec![0.0; m_count];
                for m in 0..m_count {
                    powers[m] = options[m][code % options[m].len()];
                    code /= options[m].len();
                }
                let next: Vec<u16> = (0..m_count)
                    .map(|m| grid.snap(energies[m] + powers[m] * p.dt_hours))
                    .collect();
                if next.iter().any(|&b| grid.energy(b) < p.energy_floor() - 1e-9) {
                    continue;
                }
                let r = inst.costs(t, &prev, &alloc, &powers).reward();
                let v = r + rec(inst, cfg, grid, t + 1, next, alloc.clone(), count);
                if v > best {
                    best = v;
                }
            }
        }
        best
    }
    let start: Vec<u16> = inst.initial_energy.iter().map(|&e| grid.snap(e)).collect();
    let v = rec(inst, cfg, &grid, 0, start, Allocation::zeros(m_count), &mut count);
    (v, count)
}
