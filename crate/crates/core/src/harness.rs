//! Experiment runs: one directory per mode and seed holding the resolved
//! configuration, metrics, evaluation report, traces and checkpoints.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    eval_rng, evaluate, oracle_for_scenario, trace_episode, Controller, EvalReport, ForecastBaseline, OracleController,
};
use crate::config::{ExperimentConfig, Scenario};
use crate::env::FleetEnv;
use crate::trainer::{DacPolicy, MetricsWriter, PolicyNets, Trainer};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Train the hierarchical agent, then evaluate it greedily.
    Train,
    /// Greedy evaluation of a checkpoint.
    Eval,
    /// Open-loop execution of the perfect-information plan.
    Oracle,
    /// Open-loop execution of the forecast plan.
    Baseline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Train => "train",
            Mode::Eval => "eval",
            Mode::Oracle => "oracle",
            Mode::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub iterations: Option<usize>,
    pub out: PathBuf,
    pub ckpt_every: Option<usize>,
    /// Policy bundle for `eval`; without one the seeded initial policy runs.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub report: EvalReport,
}

/// Loads and validates an experiment file.
pub fn validate_config(path: &Path) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.scenario.resolve(base)?;
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn run(opts: &RunOptions) -> Result<RunSummary> {
    let mut cfg = validate_config(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.train.seed = seed;
    }
    if let Some(n) = opts.episodes {
        cfg.eval.episodes = n;
    }
    if let Some(n) = opts.iterations {
        cfg.train.iterations = n;
    }
    if let Some(k) = opts.ckpt_every {
        cfg.train.ckpt_every = k;
    }
    cfg.validate()?;
    let seed = cfg.train.seed;
    let run_dir = opts.out.join(format!("{}_seed{seed}", opts.mode.name()));
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    write_file(&run_dir.join("config.toml"), &cfg.to_toml_string())?;

    let base = opts.config.parent().unwrap_or(Path::new("."));
    let scenario: Arc<Scenario> = cfg.scenario.resolve(base)?.into_shared();
    let env = FleetEnv::new(scenario.clone())?;
    let eval_seed = cfg.eval.seed ^ seed;

    let controller: Box<dyn Controller> = match opts.mode {
        Mode::Train => {
            let mut trainer = Trainer::new(scenario.clone(), cfg.train.clone())?;
            let mut metrics = MetricsWriter::new(create(&run_dir.join("metrics.csv"))?);
            let every = cfg.train.ckpt_every;
            let dir = run_dir.clone();
            trainer.train(cfg.train.iterations, |m, t| {
                metrics.write(m)?;
                if every > 0 && (m.iteration + 1) % every == 0 {
                    t.save(dir.join(format!("checkpoint_{}.bin", m.iteration + 1)))?;
                }
                Ok(())
            })?;
            trainer.save(run_dir.join("checkpoint_final.bin"))?;
            Box::new(trainer.policy(true))
        }
        Mode::Eval => {
            let nets = match &opts.checkpoint {
                Some(path) => PolicyNets::load(path)?.0,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(u64::MAX);
                    PolicyNets::new(&scenario, &cfg.train, &mut rng)?
                }
            };
            nets.check_fits(&scenario)?;
            Box::new(DacPolicy::new(
                Arc::new(nets),
                scenario.clone(),
                cfg.train.enumeration_cap,
                true,
            ))
        }
        Mode::Oracle => {
            let mut rng = eval_rng(eval_seed, 0);
            let initial = env.reset(&mut rng);
            let energies: Vec<f64> = initial.locals.iter().map(|l| l.energy_kwh).collect();
            let (_, sol) = oracle_for_scenario(&scenario, initial.day, &energies, &cfg.oracle)?;
            let json = serde_json::to_string_pretty(&sol).expect("solution serializes");
            write_file(&run_dir.join("oracle_solution.json"), &json)?;
            Box::new(OracleController::new(scenario.clone(), cfg.oracle.clone())?)
        }
        Mode::Baseline => Box::new(ForecastBaseline::new(
            scenario.clone(),
            &cfg.forecast,
            cfg.oracle.clone(),
        )?),
    };

    let report = evaluate(&env, controller.as_ref(), cfg.eval.episodes, eval_seed)?;
    write_file(&run_dir.join("eval_report.json"), &report.to_json())?;
    for e in 0..cfg.eval.trace_episodes.min(cfg.eval.episodes) {
        let path = run_dir.join(format!("trace_{e}.csv"));
        trace_episode(&env, controller.as_ref(), e, eval_seed, create(&path)?)?;
    }
    Ok(RunSummary { run_dir, report })
}
