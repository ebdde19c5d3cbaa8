use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hppo::agent::Variant;
use hppo::forecast::{train_predictor, write_jsonl, PredictorTraining};
use hppo::harness::{self, RunConfig};
use hppo::percept::render_semantic_grid;
use hppo::pilot::execute_decision;
use hppo::trafficsim::WorldState;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "hppo", about = "Lane-change decision learning on a seeded highway simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `section.key = value` configuration file; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the first entry of run.seeds.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.run.seeds = vec![seed];
        }
        if let Some(out) = &self.out {
            cfg.run.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Collect a trajectory dataset (JSON lines) from seeded traffic.
    Collect(Common),
    /// Collect a dataset and train the trajectory predictor.
    TrainPredictor(Common),
    /// Train one variant for each master seed.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Evaluate a trained run directory.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Argmax decisions. Evaluation is always greedy; the flag is accepted
        /// for explicitness.
        #[arg(long)]
        greedy: bool,
    },
    /// Train and evaluate all four variants for every master seed.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Render curves and the summary table from logs under --out.
    Report(Common),
    /// Write the semantic grid of a seeded world as a plain graymap.
    SimDump {
        #[command(flatten)]
        common: Common,
        /// Keep-lane maneuvers to run before rendering.
        #[arg(long, default_value_t = 0)]
        maneuvers: usize,
    },
}

fn first_seed(cfg: &RunConfig) -> u64 {
    cfg.run.seeds[0]
}

fn predictor_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("predictor-seed-{seed}.ckpt"))
}

fn ensure_predictor(cfg: &RunConfig, seed: u64) -> Result<hppo::forecast::Predictor> {
    let path = predictor_path(&cfg.run.output_dir, seed);
    if path.exists() {
        return Ok(harness::load_predictor(cfg, &path)?);
    }
    log::info!("no predictor at {}; training one", path.display());
    let model = harness::train_run_predictor(cfg, seed)?;
    std::fs::create_dir_all(&cfg.run.output_dir)?;
    harness::save_predictor(&model, &path)?;
    Ok(model)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Collect(common) => {
            let cfg = common.load()?;
            let data = harness::collect(&cfg, first_seed(&cfg))?;
            std::fs::create_dir_all(&cfg.run.output_dir)?;
            let path = cfg.run.output_dir.join("trajectories.jsonl");
            write_jsonl(&data, &path)?;
            println!("{} samples -> {}", data.len(), path.display());
        }
        Command::TrainPredictor(common) => {
            let cfg = common.load()?;
            let seed = first_seed(&cfg);
            let data = harness::collect(&cfg, seed)?;
            let hyper = PredictorTraining { seed, ..cfg.predictor.clone() };
            let trained = train_predictor(&data, &hyper)?;
            for e in &trained.epochs {
                println!("epoch {} loss {:.5} val MAD {:.4} FAD {:.4}", e.epoch, e.train_loss, e.validation.mad, e.validation.fad);
            }
            std::fs::create_dir_all(&cfg.run.output_dir)?;
            let path = predictor_path(&cfg.run.output_dir, seed);
            harness::save_predictor(&trained.predictor, &path)?;
            println!("predictor (epoch {}) -> {}", trained.best_epoch, path.display());
        }
        Command::Train { common, variant, episodes } => {
            let mut cfg = common.load()?;
            if let Some(v) = variant {
                cfg.run.variant = v;
            }
            if let Some(n) = episodes {
                cfg.run.train_episodes = n;
            }
            cfg.validate()?;
            let variant = cfg.run.variant;
            for &seed in &cfg.run.seeds {
                let predictor = if variant.uses_prediction() { Some(ensure_predictor(&cfg, seed)?) } else { None };
                let run = harness::train(&cfg, variant, seed, predictor.as_ref())?;
                let dir = harness::persist_run(&cfg.run.output_dir, &run, &[])?;
                let row = harness::MetricsRow::from_statuses(variant, seed, run.episodes.iter().map(|e| e.status));
                println!("{} over training episodes; {} updates -> {}", row.table_line(), run.updates.len(), dir.display());
            }
        }
        Command::Eval { common, variant, episodes, greedy: _ } => {
            let mut cfg = common.load()?;
            if let Some(v) = variant {
                cfg.run.variant = v;
            }
            let n = episodes.unwrap_or(cfg.run.eval_episodes);
            let variant = cfg.run.variant;
            let mut rows = Vec::new();
            for &seed in &cfg.run.seeds {
                let dir = harness::run_dir(&cfg.run.output_dir, variant, seed);
                let policy = harness::load_policy(&cfg, variant, &dir.join("policy.ckpt"))?;
                let predictor = if variant.uses_prediction() {
                    Some(harness::load_predictor(&cfg, &predictor_path(&cfg.run.output_dir, seed))?)
                } else {
                    None
                };
                let logs = harness::evaluate(&cfg, &policy, predictor.as_ref(), n, cfg.run.eval_seed, true)?;
                let train_logs = harness::read_episode_log(&dir.join("train.jsonl")).map(|(_, l)| l).unwrap_or_default();
                let run = harness::TrainedRun { variant, master_seed: seed, policy, episodes: train_logs, updates: Vec::new(), decisions: 0 };
                harness::persist_run(&cfg.run.output_dir, &run, &logs)?;
                let row = harness::MetricsRow::from_statuses(variant, seed, logs.iter().map(|e| e.status));
                println!("{}  (seed {seed}, {n} episodes)", row.table_line());
                rows.push(row);
            }
            std::fs::write(cfg.run.output_dir.join(format!("metrics-{variant}.csv")), harness::metrics_csv(&rows))?;
        }
        Command::Ablate { common, episodes } => {
            let mut cfg = common.load()?;
            if let Some(n) = episodes {
                cfg.run.train_episodes = n;
            }
            let result = harness::ablate(&cfg, &cfg.run.output_dir)?;
            for (v, s) in result.mean_success() {
                println!("{:<15} mean success {:.1}%", v.display_name(), 100.0 * s);
            }
            println!("{}", std::fs::read_to_string(cfg.run.output_dir.join("summary.txt"))?);
        }
        Command::Report(common) => {
            let cfg = common.load()?;
            let report = harness::emit_report(&cfg.run.output_dir)?;
            print!("{}", report.summary);
        }
        Command::SimDump { common, maneuvers } => {
            let cfg = common.load()?;
            let mut world = WorldState::reset(&cfg.scenario, first_seed(&cfg))?;
            for _ in 0..maneuvers {
                if world.status.is_terminal() {
                    break;
                }
                execute_decision(&mut world, hppo::agent::Decision::Keep, &cfg.pilot)?;
            }
            let grid = render_semantic_grid(&world, &cfg.grid)?;
            let path = match &common.out {
                Some(p) if p.extension().is_some_and(|e| e == "pgm") => p.clone(),
                Some(p) => {
                    std::fs::create_dir_all(p)?;
                    p.join("grid.pgm")
                }
                None => PathBuf::from("grid.pgm"),
            };
            std::fs::write(&path, grid.to_pgm())?;
            println!("step {} grid -> {}", world.time_step, path.display());
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    run(Cli::parse())
}
