//! Clipped surrogates and critic losses, with optional gradients.
//!
//! Each function evaluates the objective over a slice of rows and, when
//! gradient buffers are supplied, accumulates the gradient of the loss
//! (the negated objective for the actors) into them.

use super::buffer::StepRecord;
use super::policy::{Candidates, PolicyNets};
use crate::nn::{
    enumeration_log_probs_tape, gaussian_entropy_tape, gaussian_log_prob_tape, sequential_log_prob_tape, Tape, Var,
};
use crate::Result;

/// `min(r A, clip(r, 1 - eps, 1 + eps) A)`.
pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> f64 {
    (ratio * adv).min(ratio.clamp(1.0 - eps, 1.0 + eps) * adv)
}

fn clipped_surrogate_tape(tape: &mut Tape, ratio: Var, adv: f64, eps: f64) -> Var {
    let a = tape.var(adv);
    let unclipped = tape.mul(ratio, a);
    let c = tape.clip(ratio, 1.0 - eps, 1.0 + eps);
    let clipped = tape.mul(c, a);
    tape.min(unclipped, clipped)
}

/// Mean objective and the number of rows dropped for a non-finite ratio.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurrogateStats {
    pub objective: f64,
    pub excluded: usize,
    pub samples: usize,
}

pub struct HighGrads<'a> {
    pub high: &'a mut [f64],
    pub termination: &'a mut [f64],
}

/// Log-probability of the recorded allocation under the current networks,
/// composed through the termination probability.
fn high_log_prob_tape(
    tape: &mut Tape,
    row: &StepRecord,
    outs: &[Var],
    term_logit: Option<Var>,
    chargers: usize,
) -> Result<(Var, Option<Vec<Var>>)> {
    let (log_mu, all) = match &row.candidates {
        Candidates::Enumerated(support) => {
            let lps = enumeration_log_probs_tape(tape, outs, support);
            let i = support
                .iter()
                .position(|a| *a == row.alloc)
                .ok_or_else(|| crate::Error::Contract("recorded allocation missing from its support".into()))?;
            (lps[i], Some(lps))
        }
        Candidates::Sequential(laying) => (
            sequential_log_prob_tape(tape, outs, laying, chargers, &row.alloc.indices())?,
            None,
        ),
    };
    let Some(tl) = term_logit else {
        return Ok((log_mu, all));
    };
    let beta = tape.sigmoid(tl);
    let mu = tape.exp(log_mu);
    let bm = tape.mul(beta, mu);
    let pi = if row.alloc == row.prev_alloc {
        let one = tape.var(1.0);
        let keep = tape.sub(one, beta);
        tape.add(keep, bm)
    } else {
        bm
    };
    Ok((tape.log(pi), all))
}

/// High-level clipped objective over `rows` with advantages `adv`.
pub fn high_objective(
    nets: &PolicyNets,
    rows: &[&StepRecord],
    adv: &[f64],
    eps: f64,
    entropy_coef: f64,
    chargers: usize,
    mut grads: Option<HighGrads<'_>>,
) -> Result<SurrogateStats> {
    let n = rows.len().max(1) as f64;
    let mut stats = SurrogateStats::default();
    let mut total = 0.0;
    for (row, &a) in rows.iter().zip(adv) {
        let mut tape = Tape::new();
        let cache_h = nets.high.forward_cached(&row.global)?;
        let outs = tape.vars(cache_h.output());
        let (cache_t, term_logit) = if row.forced {
            (None, None)
        } else {
            let c = nets.termination.forward_cached(&row.global)?;
            let v = tape.var(c.output()[0]);
            (Some(c), Some(v))
        };
        let (log_pi, all) = high_log_prob_tape(&mut tape, row, &outs, term_logit, chargers)?;
        let old = tape.var(row.log_prob_high);
        let diff = tape.sub(log_pi, old);
        let ratio = tape.exp(diff);
        let mut obj = clipped_surrogate_tape(&mut tape, ratio, a, eps);
        if entropy_coef > 0.0 {
            if let Some(lps) = all {
                let terms: Vec<Var> = lps
                    .iter()
                    .map(|&lp| {
                        let p = tape.exp(lp);
                        tape.mul(p, lp)
                    })
                    .collect();
                let neg_ent = tape.sum(&terms);
                let bonus = tape.scale(neg_ent, -entropy_coef);
                obj = tape.add(obj, bonus);
            }
        }
        let value = tape.value(obj);
        if !value.is_finite() {
            stats.excluded += 1;
            continue;
        }
        stats.samples += 1;
        total += value;
        if let Some(g) = grads.as_mut() {
            let back = tape.backward(obj);
            let d: Vec<f64> = back.wrt_all(&outs).iter().map(|x| -x / n).collect();
            nets.high.backward(&cache_h, &d, g.high);
            if let (Some(c), Some(tl)) = (cache_t, term_logit) {
                nets.termination.backward(&c, &[-back.wrt(tl) / n], g.termination);
            }
        }
    }
    stats.objective = total / stats.samples.max(1) as f64;
    Ok(stats)
}

pub struct LowGrads<'a> {
    pub low: &'a mut [f64],
    pub log_std: &'a mut f64,
}

/// Low-level clipped objective averaged over every controlled
/// `(bus, step)` pair; all buses at a step share that step's advantage.
pub fn low_objective(
    nets: &PolicyNets,
    rows: &[&StepRecord],
    adv: &[f64],
    eps: f64,
    entropy_coef: f64,
    mut grads: Option<LowGrads<'_>>,
) -> Result<SurrogateStats> {
    let pairs: usize = rows.iter().map(|r| r.agents.len()).sum();
    let n = pairs.max(1) as f64;
    let mut stats = SurrogateStats::default();
    let mut total = 0.0;
    for (row, &a) in rows.iter().zip(adv) {
        for agent in &row.agents {
            let mut tape = Tape::new();
            let cache = nets.low.forward_cached(&agent.local)?;
            let mean = tape.var(cache.output()[0]);
            let log_std = tape.var(nets.log_std);
            let lp = gaussian_log_prob_tape(&mut tape, agent.z, mean, log_std, agent.lo, agent.hi);
            let old = tape.var(agent.log_prob);
            let diff = tape.sub(lp, old);
            let ratio = tape.exp(diff);
            let mut obj = clipped_surrogate_tape(&mut tape, ratio, a, eps);
            if entropy_coef > 0.0 {
                let ent = gaussian_entropy_tape(&mut tape, log_std);
                let bonus = tape.scale(ent, entropy_coef);
                obj = tape.add(obj, bonus);
            }
            let value = tape.value(obj);
            if !value.is_finite() {
                stats.excluded += 1;
                continue;
            }
            stats.samples += 1;
            total += value;
            if let Some(g) = grads.as_mut() {
                let back = tape.backward(obj);
                nets.low.backward(&cache, &[-back.wrt(mean) / n], g.low);
                *g.log_std -= back.wrt(log_std) / n;
            }
        }
    }
    stats.objective = total / stats.samples.max(1) as f64;
    Ok(stats)
}

pub struct CriticGrads<'a> {
    pub critic_r: &'a mut [f64],
    pub critic_c: &'a mut [f64],
}

/// Mean squared errors of both critics against the returns.
pub fn critic_objectives(
    nets: &PolicyNets,
    rows: &[&StepRecord],
    returns_r: &[f64],
    returns_c: &[f64],
    mut grads: Option<CriticGrads<'_>>,
) -> Result<(f64, f64)> {
    let n = rows.len().max(1) as f64;
    let (mut mse_r, mut mse_c) = (0.0, 0.0);
    for ((row, &tr), &tc) in rows.iter().zip(returns_r).zip(returns_c) {
        let cr = nets.critic_r.forward_cached(&row.critic_input)?;
        let cc = nets.critic_c.forward_cached(&row.critic_input)?;
        let er = cr.output()[0] - tr;
        let ec = cc.output()[0] - tc;
        mse_r += er * er;
        mse_c += ec * ec;
        if let Some(g) = grads.as_mut() {
            nets.critic_r.backward(&cr, &[2.0 * er / n], g.critic_r);
            nets.critic_c.backward(&cc, &[2.0 * ec / n], g.critic_c);
        }
    }
    Ok((mse_r / n, mse_c / n))
}
