use super::config::RunConfig;
use super::episode::{episode_seed, mix64, run_episode, Greedy, Perception, Trainer};
use super::logs::{
    hash_hex, metrics_csv, updates_csv, write_episode_log, EpisodeLog, LogHeader, MetricsRow, Phase, UpdateRecord,
    LOG_SCHEMA, LOG_VERSION,
};
use crate::agent::{ActorCritic, Variant};
use crate::error::{Error, Result};
use crate::forecast::{collect_dataset, train_predictor, Predictor, TrajectorySample};
use crate::gradcore::checkpoint;
use crate::gridenc::EncoderConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Salt separating evaluation scenario seeds from training ones.
const EVAL_SALT: u64 = 0x6576_616c;

pub fn training_seeds(master: u64, episodes: usize) -> Vec<u64> {
    (0..episodes).map(|i| episode_seed(master, i)).collect()
}

pub fn evaluation_seeds(eval_master: u64, episodes: usize) -> Vec<u64> {
    (0..episodes).map(|i| episode_seed(eval_master ^ EVAL_SALT, i)).collect()
}

pub fn new_policy(config: &RunConfig, variant: Variant, master: u64) -> Result<ActorCritic> {
    ActorCritic::new(
        variant,
        config.agent.hidden,
        EncoderConfig::for_grid(config.grid.height, config.grid.width),
        mix64(master ^ 0x706f_6c69),
    )
}

/// Trajectory dataset from `dataset.episodes` seeded traffic rollouts.
pub fn collect(config: &RunConfig, master: u64) -> Result<Vec<TrajectorySample>> {
    let d = &config.dataset;
    let mut all = Vec::new();
    for i in 0..d.episodes {
        let seed = episode_seed(master ^ 0x6461_7461, i);
        all.extend(collect_dataset(&config.scenario, seed, d.vehicles, d.rate_hz, d.steps)?);
    }
    Ok(all)
}

/// Collects a dataset and trains the trajectory predictor for one master seed.
pub fn train_run_predictor(config: &RunConfig, master: u64) -> Result<Predictor> {
    let data = collect(config, master)?;
    let hyper = crate::forecast::PredictorTraining { seed: mix64(master ^ 0x7072_6564), ..config.predictor.clone() };
    let trained = train_predictor(&data, &hyper)?;
    if let Some(last) = trained.epochs.get(trained.best_epoch) {
        log::info!(
            "predictor for seed {master}: {} samples, best val MAD {:.3} FAD {:.3}",
            data.len(),
            last.validation.mad,
            last.validation.fad
        );
    }
    Ok(trained.predictor)
}

pub fn save_predictor(model: &Predictor, path: &Path) -> Result<()> {
    checkpoint::save(&model.params, path)
}

pub fn load_predictor(config: &RunConfig, path: &Path) -> Result<Predictor> {
    let mut model = Predictor::new(config.predictor.model, 0)?;
    checkpoint::load_into(&mut model.params, path).map_err(|e| Error::Config(format!("predictor checkpoint: {e}")))?;
    Ok(model)
}

pub fn load_policy(config: &RunConfig, variant: Variant, path: &Path) -> Result<ActorCritic> {
    let mut policy = new_policy(config, variant, 0)?;
    checkpoint::load_into(&mut policy.params, path)
        .map_err(|e| Error::Config(format!("policy checkpoint does not fit variant {variant}: {e}")))?;
    Ok(policy)
}

/// Result of one training run.
pub struct TrainedRun {
    pub variant: Variant,
    pub master_seed: u64,
    pub policy: ActorCritic,
    pub episodes: Vec<EpisodeLog>,
    pub updates: Vec<UpdateRecord>,
    pub decisions: usize,
}

/// The training loop: one stochastic episode per scenario seed, PPO update
/// after every `update_period` decisions.
pub fn train(config: &RunConfig, variant: Variant, master: u64, predictor: Option<&Predictor>) -> Result<TrainedRun> {
    config.validate()?;
    let perception = Perception { variant, grid: &config.grid, predictor };
    perception.check()?;
    let policy = new_policy(config, variant, master)?;
    let rng = ChaCha8Rng::seed_from_u64(mix64(master ^ 0x7361_6d70));
    let mut trainer = Trainer::new(policy, config.agent.clone(), rng);
    let mut episodes = Vec::with_capacity(config.run.train_episodes);
    for (i, seed) in training_seeds(master, config.run.train_episodes).into_iter().enumerate() {
        let log = run_episode(&config.scenario, &config.pilot, &perception, &mut trainer, i, seed, config.run.log_traces)?;
        log::debug!("{variant} seed {master} episode {i}: {:?} reward {:.1}", log.status, log.cumulative_reward);
        episodes.push(log);
    }
    Ok(TrainedRun {
        variant,
        master_seed: master,
        decisions: trainer.decisions,
        updates: trainer.updates,
        policy: trainer.policy,
        episodes,
    })
}

/// Greedy evaluation on fresh scenario seeds; episodes run in parallel and
/// come back in seed order.
pub fn evaluate(
    config: &RunConfig,
    policy: &ActorCritic,
    predictor: Option<&Predictor>,
    episodes: usize,
    eval_master: u64,
    parallel: bool,
) -> Result<Vec<EpisodeLog>> {
    if episodes == 0 {
        return Err(Error::Contract("evaluate needs at least one episode".into()));
    }
    let perception = Perception { variant: policy.variant, grid: &config.grid, predictor };
    perception.check()?;
    let seeds = evaluation_seeds(eval_master, episodes);
    let run = |(i, seed): (usize, u64)| {
        run_episode(&config.scenario, &config.pilot, &perception, &mut Greedy(policy), i, seed, config.run.log_traces)
    };
    if parallel {
        seeds.into_par_iter().enumerate().map(run).collect()
    } else {
        seeds.into_iter().enumerate().map(run).collect()
    }
}

fn header(variant: Variant, phase: Phase, master: u64, logs: &[EpisodeLog]) -> LogHeader {
    LogHeader {
        schema: LOG_SCHEMA.into(),
        version: LOG_VERSION,
        variant,
        phase,
        master_seed: master,
        seed_stream_hash: hash_hex(logs.iter().map(|l| l.seed)),
    }
}

pub fn run_dir(root: &Path, variant: Variant, master: u64) -> PathBuf {
    root.join(variant.as_str()).join(format!("seed-{master}"))
}

/// Writes train/eval logs, update diagnostics and the policy checkpoint.
pub fn persist_run(root: &Path, run: &TrainedRun, eval: &[EpisodeLog]) -> Result<PathBuf> {
    let dir = run_dir(root, run.variant, run.master_seed);
    std::fs::create_dir_all(&dir)?;
    write_episode_log(&dir.join("train.jsonl"), &header(run.variant, Phase::Train, run.master_seed, &run.episodes), &run.episodes)?;
    if !eval.is_empty() {
        write_episode_log(&dir.join("eval.jsonl"), &header(run.variant, Phase::Eval, run.master_seed, eval), eval)?;
    }
    std::fs::write(dir.join("updates.csv"), updates_csv(&run.updates))?;
    checkpoint::save(&run.policy.params, &dir.join("policy.ckpt"))?;
    Ok(dir)
}

#[derive(Clone, Debug)]
pub struct AblationResult {
    pub rows: Vec<MetricsRow>,
}

impl AblationResult {
    /// Mean success rate per variant in the fixed variant order.
    pub fn mean_success(&self) -> Vec<(Variant, f64)> {
        Variant::ALL
            .iter()
            .map(|&v| {
                let rows: Vec<&MetricsRow> = self.rows.iter().filter(|r| r.variant == v).collect();
                let mean = rows.iter().map(|r| r.success_rate()).sum::<f64>() / rows.len().max(1) as f64;
                (v, mean)
            })
            .collect()
    }

    pub fn success(&self, variant: Variant, seed: u64) -> Option<f64> {
        self.rows.iter().find(|r| r.variant == variant && r.seed == seed).map(|r| r.success_rate())
    }
}

/// Trains and evaluates every variant for every master seed on identical
/// scenario seed streams, writing logs under `root`, then renders the report.
pub fn ablate(config: &RunConfig, root: &Path) -> Result<AblationResult> {
    config.validate()?;
    std::fs::create_dir_all(root)?;
    std::fs::write(root.join("config.txt"), config.render())?;
    let predictors: Vec<Predictor> = config
        .run
        .seeds
        .par_iter()
        .map(|&seed| train_run_predictor(config, seed))
        .collect::<Result<_>>()?;
    for (seed, p) in config.run.seeds.iter().zip(&predictors) {
        save_predictor(p, &root.join(format!("predictor-seed-{seed}.ckpt")))?;
    }
    let jobs: Vec<(usize, Variant)> = (0..config.run.seeds.len())
        .flat_map(|s| Variant::ALL.into_iter().map(move |v| (s, v)))
        .collect();
    let rows: Vec<MetricsRow> = jobs
        .into_par_iter()
        .map(|(s, variant)| {
            let seed = config.run.seeds[s];
            let predictor = variant.uses_prediction().then_some(&predictors[s]);
            let run = train(config, variant, seed, predictor)?;
            let eval = evaluate(config, &run.policy, predictor, config.run.eval_episodes, config.run.eval_seed, false)?;
            persist_run(root, &run, &eval)?;
            let row = MetricsRow::from_statuses(variant, seed, eval.iter().map(|e| e.status));
            log::info!("{} (seed {seed})", row.table_line());
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut rows = rows;
    rows.sort_by_key(|r| (r.variant, r.seed));
    std::fs::write(root.join("metrics.csv"), metrics_csv(&rows))?;
    super::report::emit_report(root)?;
    Ok(AblationResult { rows })
}
