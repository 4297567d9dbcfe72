use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, RngCore};

use super::config::TrainConfig;
use crate::config::Scenario;
use crate::env::{encode_global, encode_local, feasible_power_range, global_dim, local_dim, Allocation, GlobalState};
use crate::nn::{
    allocation_mode, allocation_output_dim, enumeration_log_probs, gaussian_mode, gaussian_sample_logprob,
    mlp_from_bytes, mlp_to_bytes, sequential_log_prob, sigmoid, Mlp, OptionSet,
};
use crate::options::{compose_high_policy, option_space, HierarchicalPolicy, HighPolicyDistribution};
use crate::{Error, Result};

const BUNDLE_MAGIC: &[u8; 4] = b"EBPB";
const BUNDLE_VERSION: u32 = 1;

/// The five networks of the two-level agent.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNets {
    /// Policy over options: global features to allocation scores.
    pub high: Mlp,
    /// Termination logit of the running option.
    pub termination: Mlp,
    /// Shared per-bus power actor: local features to the pre-squash mean.
    pub low: Mlp,
    /// Reward and safety-cost critics on global features plus allocation.
    pub critic_r: Mlp,
    pub critic_c: Mlp,
    /// State-independent log standard deviation of the power head.
    pub log_std: f64,
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

impl PolicyNets {
    pub fn new<R: Rng + ?Sized>(scenario: &Scenario, cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        let m = scenario.fleet_size();
        let h = scenario.timebase.history_window;
        let g = global_dim(m, h);
        let l = local_dim(m, h);
        Ok(PolicyNets {
            high: Mlp::new(
                &sizes(g, &cfg.high_hidden, allocation_output_dim(m, scenario.params.chargers)),
                0.01,
                rng,
            )?,
            termination: Mlp::new(&sizes(g, &cfg.termination_hidden, 1), 0.01, rng)?,
            low: Mlp::new(&sizes(l, &cfg.low_hidden, 1), 0.01, rng)?,
            critic_r: Mlp::new(&sizes(g + m, &cfg.critic_hidden, 1), 1.0, rng)?,
            critic_c: Mlp::new(&sizes(g + m, &cfg.critic_hidden, 1), 1.0, rng)?,
            log_std: cfg.log_std_init,
        })
    }

    /// Checks that the networks fit `scenario`'s feature sizes.
    pub fn check_fits(&self, scenario: &Scenario) -> Result<()> {
        let m = scenario.fleet_size();
        let h = scenario.timebase.history_window;
        let g = global_dim(m, h);
        let want = [
            (self.high.input_dim(), g),
            (
                self.high.output_dim(),
                allocation_output_dim(m, scenario.params.chargers),
            ),
            (self.termination.input_dim(), g),
            (self.low.input_dim(), local_dim(m, h)),
            (self.critic_r.input_dim(), g + m),
            (self.critic_c.input_dim(), g + m),
        ];
        for (got, expected) in want {
            if got != expected {
                return Err(Error::Dimension { expected, got });
            }
        }
        Ok(())
    }

    pub fn critic_input(global: &[f64], alloc: &Allocation) -> Vec<f64> {
        let mut x = global.to_vec();
        x.extend(alloc.as_f64());
        x
    }

    /// Reward and cost critic values at `(state, alloc)`.
    pub fn values(&self, global: &[f64], alloc: &Allocation) -> Result<(f64, f64)> {
        let x = Self::critic_input(global, alloc);
        Ok((self.critic_r.forward(&x)?[0], self.critic_c.forward(&x)?[0]))
    }

    pub fn write_bundle<W: Write>(&self, lambdas: (f64, f64), w: &mut W) -> Result<()> {
        let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
        w.write_all(BUNDLE_MAGIC).map_err(io)?;
        w.write_all(&BUNDLE_VERSION.to_le_bytes()).map_err(io)?;
        for net in [&self.high, &self.termination, &self.low, &self.critic_r, &self.critic_c] {
            let b = mlp_to_bytes(net);
            w.write_all(&(b.len() as u64).to_le_bytes()).map_err(io)?;
            w.write_all(&b).map_err(io)?;
        }
        for v in [self.log_std, lambdas.0, lambdas.1] {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }

    /// Reads networks and the `(lambda_high, lambda_low)` pair.
    pub fn read_bundle<R: Read>(r: &mut R) -> Result<(PolicyNets, (f64, f64))> {
        let mut all = Vec::new();
        r.read_to_end(&mut all).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut cur = all.as_slice();
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(Error::Checkpoint("truncated policy bundle".into()));
            }
            let (a, b) = cur.split_at(n);
            cur = b;
            Ok(a)
        };
        if take(4)? != BUNDLE_MAGIC {
            return Err(Error::Checkpoint("bad policy bundle magic".into()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != BUNDLE_VERSION {
            return Err(Error::Checkpoint(format!("unsupported bundle version {version}")));
        }
        let mut nets = Vec::with_capacity(5);
        for _ in 0..5 {
            let len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
            nets.push(mlp_from_bytes(take(len)?)?);
        }
        let mut f = || -> Result<f64> { Ok(f64::from_le_bytes(take(8)?.try_into().unwrap())) };
        let (log_std, lh, ll) = (f()?, f()?, f()?);
        if !cur.is_empty() {
            return Err(Error::Checkpoint("trailing bytes in policy bundle".into()));
        }
        let mut it = nets.into_iter();
        let mut next = || it.next().unwrap();
        Ok((
            PolicyNets {
                high: next(),
                termination: next(),
                low: next(),
                critic_r: next(),
                critic_c: next(),
                log_std,
            },
            (lh, ll),
        ))
    }

    pub fn save(&self, lambdas: (f64, f64), path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_bundle(lambdas, &mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(PolicyNets, (f64, f64))> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_bundle(&mut bytes.as_slice())
    }
}

/// Candidate set the allocation was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub enum Candidates {
    Enumerated(Vec<Allocation>),
    /// Buses at the terminal; sequential picking beyond the enumeration cap.
    Sequential(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighDecision {
    pub alloc: Allocation,
    pub log_prob: f64,
    pub beta: f64,
    pub candidates: Candidates,
    /// `pi_H` over the candidates when enumerated.
    pub probs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerDecision {
    pub m: usize,
    pub local: Vec<f64>,
    pub z: f64,
    pub log_prob: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Decision rules of a frozen [`PolicyNets`] on one scenario.
#[derive(Debug, Clone)]
pub struct DacPolicy {
    pub nets: Arc<PolicyNets>,
    pub scenario: Arc<Scenario>,
    pub enumeration_cap: usize,
    /// Use distribution modes instead of sampling.
    pub greedy: bool,
}

impl DacPolicy {
    pub fn new(nets: Arc<PolicyNets>, scenario: Arc<Scenario>, enumeration_cap: usize, greedy: bool) -> Self {
        DacPolicy {
            nets,
            scenario,
            enumeration_cap,
            greedy,
        }
    }

    /// Termination probability of the running option; 1 when forced.
    pub fn beta(&self, global: &[f64], forced: bool) -> Result<f64> {
        if forced {
            return Ok(1.0);
        }
        Ok(sigmoid(self.nets.termination.forward(global)?[0]))
    }

    pub fn decide_high(
        &self,
        state: &GlobalState,
        global: &[f64],
        forced: bool,
        rng: &mut dyn RngCore,
    ) -> Result<HighDecision> {
        let outputs = self.nets.high.forward(global)?;
        let beta = self.beta(global, forced)?;
        let prev = state.prev_allocation();
        let chargers = self.scenario.params.chargers;
        let laying = state.laying();
        if laying.len() <= self.enumeration_cap {
            let support = option_space(state, chargers, self.enumeration_cap)?;
            let mu: Vec<f64> = enumeration_log_probs(&outputs, &support)
                .iter()
                .map(|l| l.exp())
                .collect();
            let pi = compose_high_policy(&support, &mu, beta, &prev)?;
            let i = if self.greedy { pi.argmax() } else { pi.sample(rng) };
            return Ok(HighDecision {
                alloc: support[i].clone(),
                log_prob: pi.probs[i].ln(),
                beta,
                candidates: Candidates::Enumerated(support),
                probs: Some(pi.probs),
            });
        }
        let set = OptionSet::Sequential {
            laying: &laying,
            chargers,
            fleet_size: state.fleet_size(),
        };
        let prev_ok = prev.is_feasible(state, chargers);
        let pi_of = |a: &Allocation| -> Result<f64> {
            let mu = sequential_log_prob(&outputs, &laying, chargers, &a.indices())?.exp();
            let keep = if prev_ok && *a == prev { 1.0 - beta } else { 0.0 };
            Ok(keep + beta * mu)
        };
        let alloc = if self.greedy {
            let fresh = allocation_mode(&outputs, set)?;
            if prev_ok && pi_of(&prev)? >= pi_of(&fresh)? {
                prev.clone()
            } else {
                fresh
            }
        } else if prev_ok && rng.random::<f64>() < 1.0 - beta {
            prev.clone()
        } else {
            crate::nn::allocation_sample_logprob(&outputs, set, rng)?.0
        };
        Ok(HighDecision {
            log_prob: pi_of(&alloc)?.ln(),
            alloc,
            beta,
            candidates: Candidates::Sequential(laying),
            probs: None,
        })
    }

    /// Powers for every bus (zero where the simulator decides) and the
    /// sampled decisions of the buses with a non-degenerate range.
    pub fn decide_low(
        &self,
        state: &GlobalState,
        alloc: &Allocation,
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, Vec<PowerDecision>)> {
        let params = &self.scenario.params;
        let mut powers = vec![0.0; state.fleet_size()];
        let mut agents = Vec::new();
        for m in alloc.indices() {
            let range = feasible_power_range(&state.locals[m], true, params);
            if range.is_singleton() {
                powers[m] = range.lo;
                continue;
            }
            let local = encode_local(state, m, alloc, &self.scenario);
            let mean = self.nets.low.forward(&local)?[0];
            if self.greedy {
                powers[m] = gaussian_mode(mean, range.lo, range.hi);
                continue;
            }
            let s = gaussian_sample_logprob(mean, self.nets.log_std, range.lo, range.hi, rng)?;
            powers[m] = s.action;
            agents.push(PowerDecision {
                m,
                local,
                z: s.z,
                log_prob: s.log_prob,
                lo: range.lo,
                hi: range.hi,
            });
        }
        Ok((powers, agents))
    }
}

impl HierarchicalPolicy for DacPolicy {
    fn high_distribution(&self, state: &GlobalState, forced: bool) -> Result<HighPolicyDistribution> {
        let global = encode_global(state, &self.scenario);
        let outputs = self.nets.high.forward(&global)?;
        let support = option_space(state, self.scenario.params.chargers, self.enumeration_cap)?;
        let mu: Vec<f64> = enumeration_log_probs(&outputs, &support)
            .iter()
            .map(|l| l.exp())
            .collect();
        let beta = self.beta(&global, forced)?;
        let pi = compose_high_policy(&support, &mu, beta, &state.prev_allocation())?;
        if self.greedy {
            let i = pi.argmax();
            let mut probs = vec![0.0; pi.probs.len()];
            probs[i] = 1.0;
            return Ok(HighPolicyDistribution { support, probs });
        }
        Ok(pi)
    }

    fn sample_high(&self, state: &GlobalState, forced: bool, rng: &mut dyn RngCore) -> Result<Allocation> {
        let global = encode_global(state, &self.scenario);
        Ok(self.decide_high(state, &global, forced, rng)?.alloc)
    }

    fn low_powers(&self, state: &GlobalState, alloc: &Allocation, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Ok(self.decide_low(state, alloc, rng)?.0)
    }
}
