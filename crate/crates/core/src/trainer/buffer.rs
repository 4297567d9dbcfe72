use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::policy::{Candidates, DacPolicy, PolicyNets, PowerDecision};
use crate::env::{encode_global, Allocation, FleetEnv, GlobalState};
use crate::Result;

/// One transition as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub state: GlobalState,
    pub global: Vec<f64>,
    /// Global features followed by the allocation bits.
    pub critic_input: Vec<f64>,
    pub alloc: Allocation,
    pub prev_alloc: Allocation,
    /// Termination was overridden to 1 (episode start or status change).
    pub forced: bool,
    pub candidates: Candidates,
    pub beta: f64,
    pub log_prob_high: f64,
    /// Buses whose power came from the low-level head.
    pub agents: Vec<PowerDecision>,
    pub reward: f64,
    pub safety_cost: f64,
    /// Critic values at `(state, alloc)`.
    pub value_r: f64,
    pub value_c: f64,
    /// Critic values averaged over the high-level policy.
    pub value_high_r: f64,
    pub value_high_c: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Episode {
    pub steps: Vec<StepRecord>,
}

impl Episode {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.safety_cost).collect()
    }

    pub fn total_return(&self) -> f64 {
        self.rewards().iter().sum()
    }

    pub fn total_safety(&self) -> f64 {
        self.costs().iter().sum()
    }
}

/// Complete episodes of one iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBuffer {
    pub episodes: Vec<Episode>,
}

impl RolloutBuffer {
    pub fn rows(&self) -> usize {
        self.episodes.iter().map(|e| e.steps.len()).sum()
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.episodes.iter().flat_map(|e| e.steps.iter())
    }
}

/// Runs one episode with a stochastic policy.
pub fn collect_episode(env: &FleetEnv, policy: &DacPolicy, rng: &mut ChaCha8Rng) -> Result<Episode> {
    let nets: &PolicyNets = &policy.nets;
    let sc = env.scenario();
    let mut state = env.reset(rng);
    let mut forced = true;
    let mut steps = Vec::with_capacity(env.horizon());
    while !env.is_terminal(&state) {
        let global = encode_global(&state, sc);
        let high = policy.decide_high(&state, &global, forced, rng)?;
        let (powers, agents) = policy.decide_low(&state, &high.alloc, rng)?;
        let critic_input = PolicyNets::critic_input(&global, &high.alloc);
        let value_r = nets.critic_r.forward(&critic_input)?[0];
        let value_c = nets.critic_c.forward(&critic_input)?[0];
        let (value_high_r, value_high_c) = match (&high.candidates, &high.probs) {
            (Candidates::Enumerated(support), Some(probs)) => {
                let (mut vr, mut vc) = (0.0, 0.0);
                for (a, &p) in support.iter().zip(probs) {
                    if p == 0.0 {
                        continue;
                    }
                    let (r, c) = if *a == high.alloc {
                        (value_r, value_c)
                    } else {
                        nets.values(&global, a)?
                    };
                    vr += p * r;
                    vc += p * c;
                }
                (vr, vc)
            }
            _ => (value_r, value_c),
        };
        let out = env.step(&state, &high.alloc, &powers, rng)?;
        let prev_alloc = state.prev_allocation();
        let next = out.next_state;
        steps.push(StepRecord {
            state,
            global,
            critic_input,
            alloc: high.alloc,
            prev_alloc,
            forced,
            candidates: high.candidates,
            beta: high.beta,
            log_prob_high: high.log_prob,
            agents,
            reward: out.reward,
            safety_cost: out.safety_cost,
            value_r,
            value_c,
            value_high_r,
            value_high_c,
        });
        forced = out.forced_termination;
        state = next;
    }
    Ok(Episode { steps })
}

/// Random stream for episode `episode` of iteration `iteration`.
pub fn episode_rng(seed: u64, iteration: u64, episode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((iteration << 20) | episode);
    rng
}

/// Collects `episodes` episodes in parallel; the result does not depend on
/// the thread count.
pub fn collect_rollouts(
    env: &FleetEnv,
    policy: &DacPolicy,
    episodes: usize,
    seed: u64,
    iteration: u64,
) -> Result<RolloutBuffer> {
    let episodes = (0..episodes as u64)
        .into_par_iter()
        .map(|e| collect_episode(env, policy, &mut episode_rng(seed, iteration, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RolloutBuffer { episodes })
}
