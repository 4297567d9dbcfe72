use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::advantage::{adjusted_advantages, compute_returns, gae_advantages, normalize};
use super::buffer::{collect_rollouts, RolloutBuffer, StepRecord};
use super::config::{ConstraintMode, TrainConfig};
use super::lagrange::LagrangeState;
use super::objectives::{critic_objectives, high_objective, low_objective, CriticGrads, HighGrads, LowGrads};
use super::policy::{DacPolicy, PolicyNets};
use crate::config::Scenario;
use crate::env::FleetEnv;
use crate::nn::{clip_grad_norm, Adam};
use crate::{Error, Result};

/// Per-iteration training summary, one row of the metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub mean_return: f64,
    pub mean_safety: f64,
    #[serde(rename = "lambda_H")]
    pub lambda_high: f64,
    #[serde(rename = "lambda_L")]
    pub lambda_low: f64,
    #[serde(rename = "loss_H")]
    pub loss_high: f64,
    #[serde(rename = "loss_L")]
    pub loss_low: f64,
    #[serde(rename = "mse_R")]
    pub mse_r: f64,
    #[serde(rename = "mse_C")]
    pub mse_c: f64,
    pub wall_ms: u64,
}

/// CSV sink for [`IterationMetrics`].
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(w: W) -> Self {
        MetricsWriter {
            inner: csv::Writer::from_writer(w),
        }
    }

    pub fn write(&mut self, m: &IterationMetrics) -> Result<()> {
        self.inner
            .serialize(m)
            .and_then(|_| self.inner.flush().map_err(Into::into))
            .map_err(|e| Error::Domain(format!("metrics write failed: {e}")))
    }

    /// Flushes and returns the underlying writer.
    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::Domain(format!("metrics flush failed: {e}")))
    }
}

/// Per-row learning targets of one iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Targets {
    pub returns_r: Vec<f64>,
    pub returns_c: Vec<f64>,
    pub adv_high: Vec<f64>,
    pub adv_low: Vec<f64>,
}

/// Returns and adjusted advantages for every row, episode by episode.
pub fn build_targets(buffer: &RolloutBuffer, cfg: &TrainConfig, lagrange: &LagrangeState) -> Targets {
    let mut t = Targets::default();
    for ep in &buffer.episodes {
        let r = ep.rewards();
        let c = ep.costs();
        t.returns_r.extend(compute_returns(&r));
        t.returns_c.extend(compute_returns(&c));
        let with_tail = |f: fn(&StepRecord) -> f64| {
            let mut v: Vec<f64> = ep.steps.iter().map(f).collect();
            v.push(0.0);
            v
        };
        let vh_r = with_tail(|s| s.value_high_r);
        let vh_c = with_tail(|s| s.value_high_c);
        let vl_r = with_tail(|s| s.value_r);
        let vl_c = with_tail(|s| s.value_c);
        let ah = adjusted_advantages(
            &gae_advantages(&r, &vh_r, cfg.gamma, cfg.gae_lambda),
            &gae_advantages(&c, &vh_c, cfg.gamma, cfg.gae_lambda),
            lagrange.lambda_high,
        );
        let al = adjusted_advantages(
            &gae_advantages(&r, &vl_r, cfg.gamma, cfg.gae_lambda),
            &gae_advantages(&c, &vl_c, cfg.gamma, cfg.gae_lambda),
            lagrange.lambda_low,
        );
        t.adv_high.extend(ah);
        t.adv_low.extend(al);
    }
    if cfg.normalize_advantages {
        normalize(&mut t.adv_high);
        normalize(&mut t.adv_low);
    }
    t
}

/// Primal-dual trainer for the two-level fleet agent.
pub struct Trainer {
    env: FleetEnv,
    cfg: TrainConfig,
    nets: PolicyNets,
    opt_high: Adam,
    opt_term: Adam,
    /// Low actor parameters followed by the log standard deviation.
    opt_low: Adam,
    opt_cr: Adam,
    opt_cc: Adam,
    lagrange: LagrangeState,
    iteration: usize,
    shuffle_rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(scenario: Arc<Scenario>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        init_rng.set_stream(u64::MAX);
        let nets = PolicyNets::new(&scenario, &cfg, &mut init_rng)?;
        Self::with_nets(scenario, cfg, nets)
    }

    pub fn with_nets(scenario: Arc<Scenario>, cfg: TrainConfig, nets: PolicyNets) -> Result<Self> {
        cfg.validate()?;
        nets.check_fits(&scenario)?;
        let lambda0 = match cfg.constraint {
            ConstraintMode::Lagrangian => cfg.lambda_init,
            ConstraintMode::FixedPenalty => scenario.config.costs.lambda_safe,
        };
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        shuffle_rng.set_stream(u64::MAX - 1);
        Ok(Trainer {
            opt_high: Adam::new(nets.high.num_params(), cfg.lr_actor),
            opt_term: Adam::new(nets.termination.num_params(), cfg.lr_actor),
            opt_low: Adam::new(nets.low.num_params() + 1, cfg.lr_actor),
            opt_cr: Adam::new(nets.critic_r.num_params(), cfg.lr_critic),
            opt_cc: Adam::new(nets.critic_c.num_params(), cfg.lr_critic),
            lagrange: LagrangeState::new(lambda0, cfg.tolerance, cfg.lr_lambda),
            env: FleetEnv::new(scenario)?,
            iteration: 0,
            shuffle_rng,
            nets,
            cfg,
        })
    }

    pub fn env(&self) -> &FleetEnv {
        &self.env
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn nets(&self) -> &PolicyNets {
        &self.nets
    }

    pub fn lagrange(&self) -> &LagrangeState {
        &self.lagrange
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Snapshot of the current policy.
    pub fn policy(&self, greedy: bool) -> DacPolicy {
        DacPolicy::new(
            Arc::new(self.nets.clone()),
            self.env.scenario().clone(),
            self.cfg.enumeration_cap,
            greedy,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.nets
            .save((self.lagrange.lambda_high, self.lagrange.lambda_low), path)
    }

    /// Collects fresh rollouts with the current policy.
    pub fn collect(&self) -> Result<RolloutBuffer> {
        collect_rollouts(
            &self.env,
            &self.policy(false),
            self.cfg.episodes_per_iter,
            self.cfg.seed,
            self.iteration as u64,
        )
    }

    /// One full iteration: rollouts, targets, actor and critic updates,
    /// then the dual step.
    pub fn train_iteration(&mut self) -> Result<IterationMetrics> {
        let started = Instant::now();
        let buffer = self.collect()?;
        let targets = build_targets(&buffer, &self.cfg, &self.lagrange);
        let rows: Vec<&StepRecord> = buffer.steps().collect();
        let chargers = self.env.params().chargers;
        let cfg = self.cfg.clone();

        let mut order: Vec<usize> = (0..rows.len()).collect();
        let (mut loss_h, mut loss_l, mut batches, mut low_batches) = (0.0, 0.0, 0usize, 0usize);
        for _ in 0..cfg.epochs {
            order.shuffle(&mut self.shuffle_rng);
            for chunk in order.chunks(cfg.batch_size) {
                let mb: Vec<&StepRecord> = chunk.iter().map(|&i| rows[i]).collect();
                let pick = |v: &[f64]| -> Vec<f64> { chunk.iter().map(|&i| v[i]).collect() };
                let (adv_h, adv_l) = (pick(&targets.adv_high), pick(&targets.adv_low));
                let (ret_r, ret_c) = (pick(&targets.returns_r), pick(&targets.returns_c));

                let mut g_high = vec![0.0; self.nets.high.num_params()];
                let mut g_term = vec![0.0; self.nets.termination.num_params()];
                let hs = high_objective(
                    &self.nets,
                    &mb,
                    &adv_h,
                    cfg.clip_eps,
                    cfg.entropy_coef,
                    chargers,
                    Some(HighGrads {
                        high: &mut g_high,
                        termination: &mut g_term,
                    }),
                )?;
                self.apply(&mut g_high, Net::High)?;
                self.apply(&mut g_term, Net::Termination)?;
                loss_h -= hs.objective;
                batches += 1;

                let mut g_low = vec![0.0; self.nets.low.num_params() + 1];
                let (g_net, g_std) = g_low.split_at_mut(self.nets.low.num_params());
                let ls = low_objective(
                    &self.nets,
                    &mb,
                    &adv_l,
                    cfg.clip_eps,
                    cfg.entropy_coef,
                    Some(LowGrads {
                        low: g_net,
                        log_std: &mut g_std[0],
                    }),
                )?;
                if ls.samples > 0 {
                    self.apply(&mut g_low, Net::Low)?;
                    loss_l -= ls.objective;
                    low_batches += 1;
                }

                let mut g_cr = vec![0.0; self.nets.critic_r.num_params()];
                let mut g_cc = vec![0.0; self.nets.critic_c.num_params()];
                critic_objectives(
                    &self.nets,
                    &mb,
                    &ret_r,
                    &ret_c,
                    Some(CriticGrads {
                        critic_r: &mut g_cr,
                        critic_c: &mut g_cc,
                    }),
                )?;
                self.apply(&mut g_cr, Net::CriticR)?;
                self.apply(&mut g_cc, Net::CriticC)?;
            }
        }
        let (mse_r, mse_c) = critic_objectives(&self.nets, &rows, &targets.returns_r, &targets.returns_c, None)?;

        let episodes = buffer.episodes.len() as f64;
        let mean_return = buffer.episodes.iter().map(|e| e.total_return()).sum::<f64>() / episodes;
        let mean_safety = buffer.episodes.iter().map(|e| e.total_safety()).sum::<f64>() / episodes;
        if cfg.constraint == ConstraintMode::Lagrangian {
            self.lagrange = self.lagrange.update(mean_safety, mean_safety);
        }
        let metrics = IterationMetrics {
            iteration: self.iteration,
            mean_return,
            mean_safety,
            lambda_high: self.lagrange.lambda_high,
            lambda_low: self.lagrange.lambda_low,
            loss_high: loss_h / batches.max(1) as f64,
            loss_low: loss_l / low_batches.max(1) as f64,
            mse_r,
            mse_c,
            wall_ms: if cfg.deterministic_metrics {
                0
            } else {
                started.elapsed().as_millis() as u64
            },
        };
        for v in [metrics.loss_high, metrics.loss_low, mse_r, mse_c] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("loss at iteration {}", self.iteration)));
            }
        }
        self.iteration += 1;
        Ok(metrics)
    }

    fn apply(&mut self, grads: &mut [f64], net: Net) -> Result<()> {
        clip_grad_norm(grads, self.cfg.max_grad_norm);
        match net {
            Net::High => self.opt_high.step(self.nets.high.params_mut(), grads),
            Net::Termination => self.opt_term.step(self.nets.termination.params_mut(), grads),
            Net::CriticR => self.opt_cr.step(self.nets.critic_r.params_mut(), grads),
            Net::CriticC => self.opt_cc.step(self.nets.critic_c.params_mut(), grads),
            Net::Low => {
                let mut params = self.nets.low.params().to_vec();
                params.push(self.nets.log_std);
                self.opt_low.step(&mut params, grads)?;
                self.nets.log_std = params.pop().unwrap();
                self.nets.low.params_mut().copy_from_slice(&params);
                Ok(())
            }
        }
    }

    /// Runs `iterations` iterations, handing each record to `on_iter`.
    pub fn train(
        &mut self,
        iterations: usize,
        mut on_iter: impl FnMut(&IterationMetrics, &Trainer) -> Result<()>,
    ) -> Result<Vec<IterationMetrics>> {
        let mut out = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let m = self.train_iteration()?;
            on_iter(&m, self)?;
            out.push(m);
        }
        Ok(out)
    }
}

#[derive(Clone, Copy)]
enum Net {
    High,
    Termination,
    Low,
    CriticR,
    CriticC,
}
