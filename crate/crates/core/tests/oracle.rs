use std::sync::Arc;

mod common;

use common::{exhaustive, random_instance, worked_example};
use ebcsl::baselines::{dp_oracle, status_schedule, DeterministicInstance, OracleConfig};
use ebcsl::config::presets;
use ebcsl::data::travel_pmf;
use ebcsl::env::{Allocation, FleetEnv};
use ebcsl::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn worked_example_charges_in_the_cheap_step() {
    let cfg = OracleConfig {
        power_levels: vec![0.0, 120.0],
        ..OracleConfig::default()
    };
    let sol = dp_oracle(&worked_example(), &cfg).unwrap();
    assert!((sol.optimal_return + 0.25).abs() < 1e-12, "{}", sol.optimal_return);
    assert_eq!(sol.powers[0], vec![0.0]);
    assert_eq!(sol.powers[1], vec![120.0]);
    assert!((sol.energies[3][0] - 48.0).abs() < 1e-9);
}

#[test]
fn floor_violation_is_infeasible() {
    let mut inst = worked_example();
    inst.price.truncate(1);
    inst.pv.truncate(1);
    inst.layover = vec![vec![false]];
    inst.drain_kw = vec![vec![120.0]];
    let cfg = OracleConfig::default();
    assert!(matches!(dp_oracle(&inst, &cfg), Err(Error::Infeasible(_))));
    inst.initial_energy = vec![40.0];
    assert!(matches!(dp_oracle(&inst, &cfg), Err(Error::Infeasible(_))));
}

#[test]
fn dp_matches_exhaustive_search_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 30 {
        attempts += 1;
        assert!(attempts < 500, "too few feasible random instances");
        let (inst, cfg) = random_instance(&mut rng);
        let (best, sequences) = exhaustive(&inst, &cfg);
        assert!(sequences <= 625, "{sequences}");
        match dp_oracle(&inst, &cfg) {
            Ok(sol) => {
                assert_eq!(
                    sol.optimal_return.to_bits(),
                    best.to_bits(),
                    "{} vs {best}",
                    sol.optimal_return
                );
                checked += 1;
            }
            Err(Error::Infeasible(_)) => assert_eq!(best, f64::NEG_INFINITY),
            Err(e) => panic!("{e}"),
        }
    }
}
#[test]
fn status_schedule_matches_the_simulator_with_mean_travel() {
    for cfg in [presets::micro(false), presets::micro_t12(), presets::six_bus()] {
        let sc = cfg.resolve(std::path::Path::new(".")).unwrap();
        let det = Arc::new(sc.deterministic_variant(0).unwrap());
        let env = FleetEnv::new(det.clone()).unwrap();
        let m_count = det.fleet_size();
        let energies = vec![det.params.energy_ceiling(); m_count];
        let mut state = env.initial_state(0, &energies);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut simulated = Vec::new();
        while !env.is_terminal(&state) {
            simulated.push(state.locals.iter().map(|l| l.layover).collect::<Vec<_>>());
            let out = env
                .step(&state, &Allocation::zeros(m_count), &vec![0.0; m_count], &mut rng)
                .unwrap();
            state = out.next_state;
        }
        let model = det.travel.point_mass();
        let travel: Vec<Vec<usize>> = (0..m_count)
            .map(|m| {
                det.timetable
                    .rotation(m)
                    .iter()
                    .map(|trip| travel_pmf(&model, trip.departure_step).unwrap().mean().round() as usize)
                    .collect()
            })
            .collect();
        assert_eq!(status_schedule(&det.timetable, &travel, det.steps()), simulated);
        let inst = DeterministicInstance::from_scenario(&sc, 0, &energies).unwrap();
        assert_eq!(inst.layover, simulated);
    }
}

#[test]
fn solution_replays_in_the_simulator() {
    let sc = presets::micro(false).resolve(std::path::Path::new(".")).unwrap();
    let sc = Arc::new(sc);
    let det = Arc::new(sc.deterministic_variant(0).unwrap());
    let energies = vec![120.0, 120.0];
    let inst = DeterministicInstance::from_scenario(&sc, 0, &energies).unwrap();
    let sol = dp_oracle(&inst, &OracleConfig::default()).unwrap();
    let env = FleetEnv::new(det).unwrap();
    let mut state = env.initial_state(0, &energies);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut total = 0.0;
    for t in 0..inst.horizon() {
        let out = env.step(&state, &sol.allocations[t], &sol.powers[t], &mut rng).unwrap();
        assert_eq!(out.safety_cost, 0.0);
        total += out.reward;
        state = out.next_state;
    }
    assert!(
        (total - sol.optimal_return).abs() < 1e-9 * (1.0 + total.abs()),
        "{total} vs {}",
        sol.optimal_return
    );
}
