//! Episode evaluation shared by learned policies and baselines.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Allocation, FleetEnv, GlobalState, TraceWriter};
use crate::options::HierarchicalPolicy;
use crate::trainer::DacPolicy;
use crate::Result;

/// Decides allocations and powers for one episode.
pub trait EpisodeActor {
    /// Allocation and per-bus powers at `state`; `forced` marks a status
    /// change on the incoming transition (always set at `t = 0`).
    fn act(&mut self, state: &GlobalState, forced: bool, rng: &mut dyn RngCore) -> Result<(Allocation, Vec<f64>)>;
}

/// Something that can be run on episodes.
pub trait Controller: Sync {
    fn start<'a>(&'a self, initial: &GlobalState) -> Result<Box<dyn EpisodeActor + 'a>>;
}

struct PolicyActor<'a, P>(&'a P);

impl<P: HierarchicalPolicy> EpisodeActor for PolicyActor<'_, P> {
    fn act(&mut self, state: &GlobalState, forced: bool, rng: &mut dyn RngCore) -> Result<(Allocation, Vec<f64>)> {
        let alloc = self.0.sample_high(state, forced, rng)?;
        let powers = self.0.low_powers(state, &alloc, rng)?;
        Ok((alloc, powers))
    }
}

impl Controller for DacPolicy {
    fn start<'a>(&'a self, _initial: &GlobalState) -> Result<Box<dyn EpisodeActor + 'a>> {
        Ok(Box::new(PolicyActor(self)))
    }
}

/// Never allocates a charger.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdleController;

impl EpisodeActor for IdleController {
    fn act(&mut self, state: &GlobalState, _forced: bool, _rng: &mut dyn RngCore) -> Result<(Allocation, Vec<f64>)> {
        let m = state.fleet_size();
        Ok((Allocation::zeros(m), vec![0.0; m]))
    }
}

impl Controller for IdleController {
    fn start<'a>(&'a self, _initial: &GlobalState) -> Result<Box<dyn EpisodeActor + 'a>> {
        Ok(Box::new(IdleController))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub day: usize,
    pub operational_return: f64,
    pub safety_return: f64,
    /// Steps with positive safety cost.
    pub violating_steps: usize,
}

impl EpisodeRecord {
    pub fn violated(&self) -> bool {
        self.violating_steps > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub avg_operational_return: f64,
    pub avg_safety_return: f64,
    /// Fraction of episodes with at least one violating step.
    pub safety_violation_rate: f64,
    pub records: Vec<EpisodeRecord>,
}

impl EvalReport {
    pub fn from_records(records: Vec<EpisodeRecord>) -> Self {
        let n = records.len().max(1) as f64;
        EvalReport {
            episodes: records.len(),
            avg_operational_return: records.iter().map(|r| r.operational_return).sum::<f64>() / n,
            avg_safety_return: records.iter().map(|r| r.safety_return).sum::<f64>() / n,
            safety_violation_rate: records.iter().filter(|r| r.violated()).count() as f64 / n,
            records,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Random stream of evaluation episode `episode`.
pub fn eval_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode);
    rng
}

/// Runs one episode, optionally writing its per-step trace.
pub fn run_episode<W: Write>(
    env: &FleetEnv,
    controller: &dyn Controller,
    episode: usize,
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut TraceWriter<W>>,
) -> Result<EpisodeRecord> {
    let mut state = env.reset(rng);
    let mut actor = controller.start(&state)?;
    let mut record = EpisodeRecord {
        episode,
        day: state.day,
        operational_return: 0.0,
        safety_return: 0.0,
        violating_steps: 0,
    };
    let mut forced = true;
    while !env.is_terminal(&state) {
        let (alloc, powers) = actor.act(&state, forced, rng)?;
        let out = env.step(&state, &alloc, &powers, rng)?;
        if let Some(w) = trace.as_deref_mut() {
            w.write_step(&state, &alloc, &out)?;
        }
        record.operational_return += out.reward;
        record.safety_return += out.safety_cost;
        if out.safety_cost > 0.0 {
            record.violating_steps += 1;
        }
        forced = out.forced_termination;
        state = out.next_state;
    }
    Ok(record)
}

/// Evaluates `controller` on `episodes` seeded episodes in parallel; the
/// report does not depend on the thread count.
pub fn evaluate(env: &FleetEnv, controller: &dyn Controller, episodes: usize, seed: u64) -> Result<EvalReport> {
    let records = (0..episodes)
        .into_par_iter()
        .map(|e| run_episode::<std::io::Sink>(env, controller, e, &mut eval_rng(seed, e as u64), None))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_records(records))
}

/// Writes the trace of evaluation episode `episode` as it was run by
/// [`evaluate`].
pub fn trace_episode<W: Write>(
    env: &FleetEnv,
    controller: &dyn Controller,
    episode: usize,
    seed: u64,
    out: W,
) -> Result<EpisodeRecord> {
    let mut w = TraceWriter::new(out);
    let rec = run_episode(
        env,
        controller,
        episode,
        &mut eval_rng(seed, episode as u64),
        Some(&mut w),
    )?;
    w.finish()?;
    Ok(rec)
}
