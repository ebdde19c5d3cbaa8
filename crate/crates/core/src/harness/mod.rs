//! Training, evaluation and ablation orchestration with JSON-lines episode
//! logs, CSV metrics, replay and report rendering.

mod config;
mod episode;
mod logs;
mod report;
mod train;

pub use config::{DatasetSection, RunConfig, RunSection};
pub use episode::{
    episode_seed, mix64, predicted_block, replay_episode, run_episode, Choice, Controller, Greedy, Perception, Trainer,
};
pub use logs::{
    fnv1a, format_table_line, hash_hex, metrics_csv, read_episode_log, updates_csv, write_episode_log, DecisionRecord,
    EpisodeLog, LogHeader, MetricsRow, Phase, UpdateRecord, LOG_SCHEMA, LOG_VERSION, METRICS_HEADER,
};
pub use report::{emit_report, smooth, svg_plot, Report};
pub use train::{
    ablate, collect, evaluate, evaluation_seeds, load_policy, load_predictor, new_policy, persist_run, run_dir,
    save_predictor, train, train_run_predictor, training_seeds, AblationResult, TrainedRun,
};

#[cfg(test)]
mod tests;
