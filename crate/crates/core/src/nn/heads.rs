//! Action distributions on top of raw network outputs.
//!
//! Power uses a tanh-squashed Gaussian mapped onto the feasible interval.
//! Allocations use per-bus scores `s_m` and per-count biases `c_k`
//! (network output `[s_0 .. s_{M-1}, c_0 .. c_N]`): with an explicit option
//! list the logit of `w` is `sum_{m in w} s_m + c_{|w|}`; beyond the
//! enumeration cap buses are drawn one at a time (Plackett-Luce) against a
//! stop token with logit `c_0`.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::autodiff::{logsumexp, softplus, Tape, Var};
use crate::env::Allocation;
use crate::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Pre-squash samples are kept inside this band so actions stay strictly
/// inside the interval in floating point.
const Z_LIMIT: f64 = 15.0;

pub fn squash(z: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (z.tanh() + 1.0) / 2.0
}

/// `ln(1 - tanh(z)^2)` without cancellation.
pub fn log_one_minus_tanh_sq(z: f64) -> f64 {
    2.0 * (LN_2 - z - softplus(-2.0 * z))
}

/// Density of the squashed action, in action units, at pre-squash `z`.
pub fn gaussian_log_prob(z: f64, mean: f64, log_std: f64, lo: f64, hi: f64) -> f64 {
    let ls = log_std.clamp(LOG_STD_MIN, LOG_STD_MAX);
    let u = (z - mean) / ls.exp();
    -0.5 * u * u - ls - 0.5 * (2.0 * PI).ln() - ((hi - lo) / 2.0).ln() - log_one_minus_tanh_sq(z)
}

/// Same density built on the tape; gradients flow into `mean` and `log_std`.
pub fn gaussian_log_prob_tape(tape: &mut Tape, z: f64, mean: Var, log_std: Var, lo: f64, hi: f64) -> Var {
    let ls = tape.clip(log_std, LOG_STD_MIN, LOG_STD_MAX);
    let neg_ls = tape.neg(ls);
    let inv_std = tape.exp(neg_ls);
    let zc = tape.var(z);
    let diff = tape.sub(zc, mean);
    let u = tape.mul(diff, inv_std);
    let u2 = tape.square(u);
    let quad = tape.scale(u2, -0.5);
    let base = tape.sub(quad, ls);
    let c = -0.5 * (2.0 * PI).ln() - ((hi - lo) / 2.0).ln() - log_one_minus_tanh_sq(z);
    tape.add_const(base, c)
}

/// Entropy of the pre-squash Gaussian, used as an exploration bonus.
pub fn gaussian_entropy_tape(tape: &mut Tape, log_std: Var) -> Var {
    let ls = tape.clip(log_std, LOG_STD_MIN, LOG_STD_MAX);
    tape.add_const(ls, 0.5 * (2.0 * PI * std::f64::consts::E).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquashedSample {
    pub action: f64,
    /// Pre-squash value, stored so the log-probability can be re-evaluated.
    pub z: f64,
    pub log_prob: f64,
}

pub fn gaussian_sample_logprob<R: Rng + ?Sized>(
    mean: f64,
    log_std: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<SquashedSample> {
    if !(lo < hi) {
        return Err(Error::Contract(format!("power head needs lo < hi, got [{lo}, {hi}]")));
    }
    if !mean.is_finite() {
        return Err(Error::NonFinite("power mean".into()));
    }
    let std = log_std.clamp(LOG_STD_MIN, LOG_STD_MAX).exp();
    let eps: f64 = StandardNormal.sample(rng);
    let z = (mean + std * eps).clamp(-Z_LIMIT, Z_LIMIT);
    Ok(SquashedSample {
        action: squash(z, lo, hi),
        z,
        log_prob: gaussian_log_prob(z, mean, log_std, lo, hi),
    })
}

/// Deterministic action: the squashed mean.
pub fn gaussian_mode(mean: f64, lo: f64, hi: f64) -> f64 {
    squash(mean.clamp(-Z_LIMIT, Z_LIMIT), lo, hi)
}

/// Output width of the allocation actor.
pub fn allocation_output_dim(fleet_size: usize, chargers: usize) -> usize {
    fleet_size + chargers + 1
}

/// Which candidate set the allocation head samples from.
#[derive(Debug, Clone, Copy)]
pub enum OptionSet<'a> {
    /// Explicit feasible list; softmax over it.
    Enumerated(&'a [Allocation]),
    /// Sequential picks among `laying` with at most `chargers` picks.
    Sequential {
        laying: &'a [usize],
        chargers: usize,
        fleet_size: usize,
    },
}

pub fn option_logit(outputs: &[f64], alloc: &Allocation) -> f64 {
    let m = alloc.len();
    let mut z = outputs[m + alloc.count()];
    for i in alloc.indices() {
        z += outputs[i];
    }
    z
}

/// Log-softmax over an explicit option list.
pub fn enumeration_log_probs(outputs: &[f64], support: &[Allocation]) -> Vec<f64> {
    let logits: Vec<f64> = support.iter().map(|a| option_logit(outputs, a)).collect();
    let lse = logsumexp(&logits);
    logits.into_iter().map(|l| l - lse).collect()
}

pub fn enumeration_log_probs_tape(tape: &mut Tape, outputs: &[Var], support: &[Allocation]) -> Vec<Var> {
    let logits: Vec<Var> = support
        .iter()
        .map(|a| {
            let m = a.len();
            let mut terms = vec![outputs[m + a.count()]];
            terms.extend(a.indices().into_iter().map(|i| outputs[i]));
            tape.sum(&terms)
        })
        .collect();
    let lse = tape.logsumexp(&logits);
    logits.into_iter().map(|l| tape.sub(l, lse)).collect()
}

/// Exact log-probability that sequential picking ends with the set `chosen`.
///
/// Sums over pick orders with a dynamic program over subsets of `chosen`;
/// the stop token closes the set unless all `chargers` picks were used.
pub fn sequential_log_prob_tape(
    tape: &mut Tape,
    outputs: &[Var],
    laying: &[usize],
    chargers: usize,
    chosen: &[usize],
) -> Result<Var> {
    let fleet = outputs.len() - chargers - 1;
    let stop = outputs[fleet];
    let k = chosen.len();
    if k > chargers || chosen.iter().any(|m| !laying.contains(m)) {
        return Err(Error::Contract(format!(
            "allocation {chosen:?} not reachable by sequential picks"
        )));
    }
    if k > 16 {
        return Err(Error::Contract("sequential likelihood limited to 16 picks".into()));
    }
    // log normalizer after having picked the subset `mask` of `chosen`
    let log_z = |tape: &mut Tape, mask: usize| {
        let mut terms = vec![stop];
        for &m in laying {
            let taken = chosen
                .iter()
                .position(|&c| c == m)
                .is_some_and(|j| mask & (1 << j) != 0);
            if !taken {
                terms.push(outputs[m]);
            }
        }
        tape.logsumexp(&terms)
    };
    let full = (1usize << k) - 1;
    let mut f: Vec<Option<Var>> = vec![None; 1 << k];
    f[0] = Some(tape.var(0.0));
    for mask in 0..full {
        let Some(fm) = f[mask] else { continue };
        if (mask.count_ones() as usize) >= chargers {
            continue;
        }
        let lz = log_z(tape, mask);
        for (j, &m) in chosen.iter().enumerate() {
            if mask & (1 << j) != 0 {
                continue;
            }
            let step = tape.sub(outputs[m], lz);
            let term = tape.add(fm, step);
            let next = mask | (1 << j);
            f[next] = Some(match f[next] {
                None => term,
                Some(prev) => tape.logsumexp(&[prev, term]),
            });
        }
    }
    let reach = f[full].expect("full subset reachable");
    if k < chargers {
        let lz = log_z(tape, full);
        let stop_term = tape.sub(stop, lz);
        Ok(tape.add(reach, stop_term))
    } else {
        Ok(reach)
    }
}

pub fn sequential_log_prob(outputs: &[f64], laying: &[usize], chargers: usize, chosen: &[usize]) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = tape.vars(outputs);
    let lp = sequential_log_prob_tape(&mut tape, &vars, laying, chargers, chosen)?;
    Ok(tape.value(lp))
}

fn categorical<R: Rng + ?Sized>(log_probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    log_probs.iter().rposition(|lp| *lp > f64::NEG_INFINITY).unwrap_or(0)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Sequential draw; returns the picked buses in pick order.
fn sequential_draw(
    outputs: &[f64],
    laying: &[usize],
    chargers: usize,
    mut pick: impl FnMut(&[f64]) -> usize,
) -> Vec<usize> {
    let fleet = outputs.len() - chargers - 1;
    let mut remaining = laying.to_vec();
    let mut picked = Vec::new();
    while picked.len() < chargers && !remaining.is_empty() {
        let mut logits = vec![outputs[fleet]];
        logits.extend(remaining.iter().map(|&m| outputs[m]));
        let lse = logsumexp(&logits);
        let lps: Vec<f64> = logits.iter().map(|l| l - lse).collect();
        let i = pick(&lps);
        if i == 0 {
            break;
        }
        picked.push(remaining.remove(i - 1));
    }
    picked
}

/// Draws an allocation and returns its exact log-probability.
pub fn allocation_sample_logprob<R: Rng + ?Sized>(
    outputs: &[f64],
    set: OptionSet<'_>,
    rng: &mut R,
) -> Result<(Allocation, f64)> {
    if outputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("allocation logits".into()));
    }
    match set {
        OptionSet::Enumerated(support) => {
            if support.is_empty() {
                return Err(Error::Contract("empty option list".into()));
            }
            let lps = enumeration_log_probs(outputs, support);
            let i = categorical(&lps, rng);
            Ok((support[i].clone(), lps[i]))
        }
        OptionSet::Sequential {
            laying,
            chargers,
            fleet_size,
        } => {
            let picked = sequential_draw(outputs, laying, chargers, |lps| categorical(lps, rng));
            let lp = sequential_log_prob(outputs, laying, chargers, &picked)?;
            Ok((Allocation::from_indices(fleet_size, &picked), lp))
        }
    }
}

/// Most likely option (enumeration) or greedy picks (sequential).
pub fn allocation_mode(outputs: &[f64], set: OptionSet<'_>) -> Result<Allocation> {
    match set {
        OptionSet::Enumerated(support) => {
            if support.is_empty() {
                return Err(Error::Contract("empty option list".into()));
            }
            Ok(support[argmax(&enumeration_log_probs(outputs, support))].clone())
        }
        OptionSet::Sequential {
            laying,
            chargers,
            fleet_size,
        } => {
            let picked = sequential_draw(outputs, laying, chargers, argmax);
            Ok(Allocation::from_indices(fleet_size, &picked))
        }
    }
}

/// Log-probability of a given allocation under the head.
pub fn allocation_log_prob(outputs: &[f64], set: OptionSet<'_>, alloc: &Allocation) -> Result<f64> {
    match set {
        OptionSet::Enumerated(support) => {
            let i = support
                .iter()
                .position(|a| a == alloc)
                .ok_or_else(|| Error::Contract(format!("allocation {alloc} not in option list")))?;
            Ok(enumeration_log_probs(outputs, support)[i])
        }
        OptionSet::Sequential { laying, chargers, .. } => {
            sequential_log_prob(outputs, laying, chargers, &alloc.indices())
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_mean_squashes_to_midpoint() {
        assert_eq!(squash(0.0, 0.0, 120.0), 60.0);
        assert_eq!(gaussian_mode(0.0, -60.0, 20.0), -20.0);
        let s = gaussian_sample_logprob(0.0, LOG_STD_MIN, 0.0, 120.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!((s.action - 60.0).abs() < 0.5);
    }

    #[test]
    fn degenerate_bounds_rejected() {
        let r = gaussian_sample_logprob(0.0, 0.0, 5.0, 5.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn density_integrates_to_one() {
        let (lo, hi) = (-30.0, 120.0);
        for (mean, log_std) in [(0.0, 0.0), (0.8, -1.0), (-1.5, 0.5)] {
            // integrate over z with the change of variables da = (hi-lo)/2 (1 - tanh^2 z) dz
            let n = 200_000;
            let (a, b) = (-12.0, 12.0);
            let h = (b - a) / n as f64;
            let mut total = 0.0;
            for i in 0..=n {
                let z = a + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                let jac = (hi - lo) / 2.0 * (1.0 - z.tanh().powi(2));
                total += w * gaussian_log_prob(z, mean, log_std, lo, hi).exp() * jac * h;
            }
            assert!((total - 1.0).abs() < 1e-3, "{total}");
        }
    }

    #[test]
    fn samples_stay_inside_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..10_000 {
            let mean = (i as f64 - 5000.0) / 100.0;
            let s = gaussian_sample_logprob(mean, LOG_STD_MAX, 0.0, 120.0, &mut rng).unwrap();
            assert!(s.action > 0.0 && s.action < 120.0);
            assert!(s.log_prob.is_finite());
        }
    }

    fn two_laying() -> Vec<Allocation> {
        vec![
            Allocation::zeros(2),
            Allocation::from_indices(2, &[0]),
            Allocation::from_indices(2, &[1]),
        ]
    }

    #[test]
    fn equal_logits_uniform() {
        let lps = enumeration_log_probs(&[0.0; 4], &two_laying());
        for lp in lps {
            assert!((lp.exp() - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_over_two_options() {
        let support = vec![Allocation::zeros(2), Allocation::from_indices(2, &[0])];
        // logit(00) = c_0 = 0, logit(10) = s_0 + c_1 = ln 2
        let out = [2f64.ln(), 0.0, 0.0, 0.0];
        let p: Vec<f64> = enumeration_log_probs(&out, &support).iter().map(|l| l.exp()).collect();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sequential_single_pick() {
        let lp = sequential_log_prob(&[0.0; 4], &[0, 1], 1, &[0]).unwrap();
        assert!((lp - (1.0f64 / 3.0).ln()).abs() < 1e-14);
        let stop = sequential_log_prob(&[0.0; 4], &[0, 1], 1, &[]).unwrap();
        assert!((stop - (1.0f64 / 3.0).ln()).abs() < 1e-14);
    }

    /// Enumerates every pick sequence directly.
    fn brute_force(outputs: &[f64], laying: &[usize], chargers: usize, chosen: &[usize]) -> f64 {
        let fleet = outputs.len() - chargers - 1;
        fn rec(
            outputs: &[f64],
            fleet: usize,
            remaining: Vec<usize>,
            picked: Vec<usize>,
            chargers: usize,
            prob: f64,
            target: &[usize],
            acc: &mut f64,
        ) {
            let done = |picked: &Vec<usize>| {
                let mut a = picked.clone();
                a.sort();
                let mut b = target.to_vec();
                b.sort();
                a == b
            };
            if picked.len() == chargers || remaining.is_empty() {
                if done(&picked) {
                    *acc += prob;
                }
                return;
            }
            let mut w = vec![outputs[fleet].exp()];
            w.extend(remaining.iter().map(|&m| outputs[m].exp()));
            let z: f64 = w.iter().sum();
            if done(&picked) {
                *acc += prob * w[0] / z;
            }
            for (i, &m) in remaining.iter().enumerate() {
                let mut r = remaining.clone();
                r.remove(i);
                let mut p = picked.clone();
                p.push(m);
                rec(outputs, fleet, r, p, chargers, prob * w[i + 1] / z, target, acc);
            }
        }
        let mut acc = 0.0;
        rec(outputs, fleet, laying.to_vec(), vec![], chargers, 1.0, chosen, &mut acc);
        acc
    }

    #[test]
    fn sequential_matches_pick_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for chargers in 1..=3 {
            let out: Vec<f64> = (0..3 + chargers + 1).map(|_| rng.random_range(-1.5..1.5)).collect();
            let laying = [0usize, 1, 2];
            let mut total = 0.0;
            for mask in 0..8usize {
                let chosen: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
                if chosen.len() > chargers {
                    continue;
                }
                let lp = sequential_log_prob(&out, &laying, chargers, &chosen).unwrap();
                let bf = brute_force(&out, &laying, chargers, &chosen);
                assert!((lp.exp() - bf).abs() < 1e-12, "{chosen:?}: {} vs {bf}", lp.exp());
                total += bf;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_allocations_feasible_and_likelihoods_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let laying = [1usize, 3, 4];
        for _ in 0..500 {
            let out: Vec<f64> = (0..5 + 2 + 1).map(|_| rng.random_range(-2.0..2.0)).collect();
            let set = OptionSet::Sequential {
                laying: &laying,
                chargers: 2,
                fleet_size: 5,
            };
            let (a, lp) = allocation_sample_logprob(&out, set, &mut rng).unwrap();
            assert!(a.count() <= 2);
            assert!(a.indices().iter().all(|m| laying.contains(m)));
            assert!((allocation_log_prob(&out, set, &a).unwrap() - lp).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_sampling_frequencies() {
        let support = two_laying();
        let out = [0.3, -0.2, 0.1, 0.4];
        let lps = enumeration_log_probs(&out, &support);
        let mut counts = [0usize; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 60_000;
        for _ in 0..n {
            let (a, lp) = allocation_sample_logprob(&out, OptionSet::Enumerated(&support), &mut rng).unwrap();
            let i = support.iter().position(|s| *s == a).unwrap();
            assert_eq!(lp, lps[i]);
            counts[i] += 1;
        }
        for i in 0..3 {
            assert!((counts[i] as f64 / n as f64 - lps[i].exp()).abs() < 0.01);
        }
    }
}
