//! Charger allocations as options.
//!
//! An allocation persists across steps until its termination fires. The
//! termination is forced whenever a bus arrives or departs, otherwise it is
//! a learned probability `beta`. The high-level policy mixes "keep the
//! previous allocation" with a fresh draw from the policy over options.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::env::{status_changed, Allocation, FleetEnv, GlobalState};
use crate::{Error, Result};

pub const DEFAULT_ENUMERATION_CAP: usize = 12;

/// Everything the high level needs to know about the running option.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionContext {
    pub prev_option: Allocation,
    pub beta: f64,
    pub laying: Vec<usize>,
}

/// A distribution over feasible allocations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighPolicyDistribution {
    pub support: Vec<Allocation>,
    pub probs: Vec<f64>,
}

impl HighPolicyDistribution {
    pub fn prob_of(&self, alloc: &Allocation) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .filter(|(a, _)| *a == alloc)
            .map(|(_, p)| *p)
            .sum()
    }

    /// Inverse-CDF draw using one uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Every allocation of at most `chargers` buses among those at the terminal.
///
/// Ordered by the number of chargers used, then lexicographically by bus
/// index, so the all-zero allocation comes first.
pub fn option_space(state: &GlobalState, chargers: usize, cap: usize) -> Result<Vec<Allocation>> {
    let laying = state.laying();
    if laying.len() > cap {
        return Err(Error::EnumerationCap {
            laying: laying.len(),
            cap,
        });
    }
    let m = state.fleet_size();
    let mut out = Vec::new();
    for k in 0..=chargers.min(laying.len()) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let on: Vec<usize> = idx.iter().map(|&i| laying[i]).collect();
            out.push(Allocation::from_indices(m, &on));
            // advance to the next k-combination
            let mut i = k;
            while i > 0 && idx[i - 1] == laying.len() - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// True when some bus changed status between consecutive states.
pub fn forced_termination(prev: &GlobalState, state: &GlobalState) -> bool {
    status_changed(prev, state)
}

/// `pi_H(w) = (1 - beta) 1[w = prev] + beta mu(w)` over `support`.
pub fn compose_high_policy(
    support: &[Allocation],
    mu: &[f64],
    beta: f64,
    prev_option: &Allocation,
) -> Result<HighPolicyDistribution> {
    if support.len() != mu.len() {
        return Err(Error::Dimension {
            expected: support.len(),
            got: mu.len(),
        });
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Contract(format!("beta {beta} outside [0, 1]")));
    }
    let prev_idx = support.iter().position(|a| a == prev_option);
    if beta < 1.0 && prev_idx.is_none() {
        return Err(Error::Contract(format!(
            "previous option {prev_option} infeasible but beta = {beta} < 1"
        )));
    }
    let mut probs: Vec<f64> = mu.iter().map(|p| beta * p).collect();
    if let Some(i) = prev_idx {
        probs[i] += 1.0 - beta;
    }
    Ok(HighPolicyDistribution {
        support: support.to_vec(),
        probs,
    })
}

/// A frozen two-level policy, as needed to roll out episodes.
pub trait HierarchicalPolicy {
    /// High-level distribution at `state`; `forced` is set when the
    /// transition into `state` changed some bus status.
    fn high_distribution(&self, state: &GlobalState, forced: bool) -> Result<HighPolicyDistribution>;

    /// Draws the allocation to run at `state`.
    fn sample_high(&self, state: &GlobalState, forced: bool, rng: &mut dyn RngCore) -> Result<Allocation> {
        let d = self.high_distribution(state, forced)?;
        let i = d.sample(rng);
        Ok(d.support[i].clone())
    }

    /// Powers for the buses holding a charger under `alloc`; other entries
    /// are ignored by the simulator.
    fn low_powers(&self, state: &GlobalState, alloc: &Allocation, rng: &mut dyn RngCore) -> Result<Vec<f64>>;
}

/// Mean and standard error of a Monte-Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Two estimates of the same value and their combined standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub std_error: f64,
}

impl IdentityCheck {
    pub fn within(&self, sigmas: f64) -> bool {
        (self.lhs - self.rhs).abs() <= sigmas * self.std_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueBridge {
    pub reward: IdentityCheck,
    pub cost: IdentityCheck,
}

#[derive(Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn estimate(&self) -> Estimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        Estimate {
            mean: self.mean,
            std_error: (var / self.n as f64).sqrt(),
        }
    }
}

/// Undiscounted reward and safety-cost sums of one rollout from `state`.
/// The first allocation is `first` if given, otherwise drawn from the high
/// level.
pub fn rollout_returns(
    env: &FleetEnv,
    policy: &dyn HierarchicalPolicy,
    state: &GlobalState,
    forced: bool,
    first: Option<&Allocation>,
    rng: &mut dyn RngCore,
) -> Result<(f64, f64)> {
    let mut s = state.clone();
    let mut forced = forced;
    let mut first = first.cloned();
    let (mut ret, mut cost) = (0.0, 0.0);
    while !env.is_terminal(&s) {
        let alloc = match first.take() {
            Some(a) => a,
            None => policy.sample_high(&s, forced, rng)?,
        };
        let p = policy.low_powers(&s, &alloc, rng)?;
        let out = env.step(&s, &alloc, &p, rng)?;
        ret += out.reward;
        cost += out.safety_cost;
        forced = out.forced_termination;
        s = out.next_state;
    }
    Ok((ret, cost))
}

/// Monte-Carlo check that the high-level values at `state` equal the
/// `pi_H`-weighted low-level values, for both reward and safety cost.
///
/// The left side averages `num_rollouts` episodes that draw the first
/// allocation from `pi_H`; the right side estimates each low-level value
/// with `num_rollouts` episodes started from that allocation.
pub fn high_value_from_low(
    env: &FleetEnv,
    policy: &dyn HierarchicalPolicy,
    state: &GlobalState,
    forced: bool,
    num_rollouts: usize,
    rng: &mut dyn RngCore,
) -> Result<ValueBridge> {
    if num_rollouts < 100 {
        return Err(Error::Contract(format!(
            "need at least 100 rollouts, got {num_rollouts}"
        )));
    }
    let (mut hr, mut hc) = (Welford::default(), Welford::default());
    for _ in 0..num_rollouts {
        let (r, c) = rollout_returns(env, policy, state, forced, None, rng)?;
        hr.push(r);
        hc.push(c);
    }
    let pi = policy.high_distribution(state, forced)?;
    let (mut rhs_r, mut rhs_c, mut var_r, mut var_c) = (0.0, 0.0, 0.0, 0.0);
    for (alloc, &w) in pi.support.iter().zip(&pi.probs) {
        if w == 0.0 {
            continue;
        }
        let (mut lr, mut lc) = (Welford::default(), Welford::default());
        for _ in 0..num_rollouts {
            let (r, c) = rollout_returns(env, policy, state, forced, Some(alloc), rng)?;
            lr.push(r);
            lc.push(c);
        }
        let (er, ec) = (lr.estimate(), lc.estimate());
        rhs_r += w * er.mean;
        rhs_c += w * ec.mean;
        var_r += (w * er.std_error).powi(2);
        var_c += (w * ec.std_error).powi(2);
    }
    let (er, ec) = (hr.estimate(), hc.estimate());
    Ok(ValueBridge {
        reward: IdentityCheck {
            lhs: er.mean,
            rhs: rhs_r,
            std_error: (er.std_error.powi(2) + var_r).sqrt(),
        },
        cost: IdentityCheck {
            lhs: ec.mean,
            rhs: rhs_c,
            std_error: (ec.std_error.powi(2) + var_c).sqrt(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EbLocalState;

    fn state(layover: &[bool]) -> GlobalState {
        GlobalState {
            locals: layover
                .iter()
                .map(|&b| EbLocalState {
                    energy_kwh: 100.0,
                    layover: b,
                    prev_layover: b,
                    tau: 1,
                    prev_alloc: false,
                    trip: 0,
                })
                .collect(),
            pv_history: vec![0.0; 5],
            price_history: vec![0.0; 5],
            t: 0,
            day: 0,
        }
    }

    #[test]
    fn two_laying_one_charger() {
        let opts = option_space(&state(&[true, true]), 1, 12).unwrap();
        let s: Vec<String> = opts.iter().map(|a| a.to_string()).collect();
        assert_eq!(s, ["00", "10", "01"]);
    }

    #[test]
    fn nobody_laying() {
        let opts = option_space(&state(&[false, false, false]), 2, 12).unwrap();
        assert_eq!(opts, vec![Allocation::zeros(3)]);
    }

    #[test]
    fn six_laying_three_chargers() {
        let opts = option_space(&state(&[true; 6]), 3, 12).unwrap();
        assert_eq!(opts.len(), 1 + 6 + 15 + 20);
        let st = state(&[true; 6]);
        assert!(opts.iter().all(|a| a.is_feasible(&st, 3)));
        let mut dedup = opts.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), opts.len());
    }

    #[test]
    fn skips_operating_buses() {
        let opts = option_space(&state(&[false, true, false, true]), 2, 12).unwrap();
        let s: Vec<String> = opts.iter().map(|a| a.to_string()).collect();
        assert_eq!(s, ["0000", "0100", "0001", "0101"]);
    }

    #[test]
    fn cap_enforced() {
        let err = option_space(&state(&[true; 13]), 2, 12).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { laying: 13, cap: 12 }));
    }

    #[test]
    fn forced_termination_cases() {
        let a = state(&[true, false]);
        assert!(!forced_termination(&a, &a));
        assert!(forced_termination(&a, &state(&[false, false])));
        assert!(forced_termination(&a, &state(&[false, true])));
    }

    #[test]
    fn composition_examples() {
        let support = option_space(&state(&[true, true]), 1, 12).unwrap();
        let mu = [0.2, 0.5, 0.3];
        let prev = support[0].clone();
        let keep = compose_high_policy(&support, &mu, 0.0, &prev).unwrap();
        assert_eq!(keep.probs, vec![1.0, 0.0, 0.0]);
        let fresh = compose_high_policy(&support, &mu, 1.0, &prev).unwrap();
        assert_eq!(fresh.probs, mu.to_vec());
        let mix = compose_high_policy(&support, &mu, 0.5, &prev).unwrap();
        assert!((mix.probs[0] - 0.6).abs() < 1e-15);
        assert!((mix.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_previous_option_needs_full_termination() {
        let support = option_space(&state(&[true, false]), 1, 12).unwrap();
        let prev = Allocation::from_indices(2, &[1]);
        assert!(compose_high_policy(&support, &[0.5, 0.5], 0.3, &prev).is_err());
        assert!(compose_high_policy(&support, &[0.5, 0.5], 1.0, &prev).is_ok());
    }
}
