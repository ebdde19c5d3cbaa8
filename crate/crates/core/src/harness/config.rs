use crate::agent::{AgentConfig, Variant};
use crate::error::{Error, Result};
use crate::forecast::PredictorTraining;
use crate::percept::GridSpec;
use crate::pilot::PilotConfig;
use crate::trafficsim::ScenarioConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

/// Run-level protocol settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub variant: Variant,
    /// Master seeds; one training run per seed.
    pub seeds: Vec<u64>,
    pub train_episodes: usize,
    pub eval_episodes: usize,
    /// Master seed for evaluation scenarios, independent of training.
    pub eval_seed: u64,
    pub output_dir: PathBuf,
    /// Embed per-tick maneuver traces in episode logs.
    pub log_traces: bool,
}

/// Trajectory collection settings for predictor training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSection {
    pub episodes: usize,
    pub vehicles: usize,
    pub steps: usize,
    pub rate_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run: RunSection,
    pub scenario: ScenarioConfig,
    pub agent: AgentConfig,
    pub predictor: PredictorTraining,
    pub dataset: DatasetSection,
    pub pilot: PilotConfig,
    pub grid: GridSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scenario = ScenarioConfig::default();
        Self {
            run: RunSection {
                variant: Variant::Hybrid,
                seeds: vec![0, 1, 2, 3, 4],
                train_episodes: 300,
                eval_episodes: 100,
                eval_seed: 1_000_003,
                output_dir: PathBuf::from("runs"),
                log_traces: false,
            },
            pilot: PilotConfig::default(),
            dataset: DatasetSection { episodes: 4, vehicles: 24, steps: 200, rate_hz: 1.0 / scenario.dt },
            predictor: PredictorTraining { epochs: 4, time_budget_secs: Some(120.0), ..PredictorTraining::default() },
            scenario,
            agent: AgentConfig::default(),
            grid: GridSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.agent.validate()?;
        self.pilot.validate()?;
        self.grid.validate()?;
        self.predictor.model.validate()?;
        if self.run.seeds.is_empty() {
            return Err(Error::Config("run.seeds must not be empty".into()));
        }
        if self.run.train_episodes == 0 || self.run.eval_episodes == 0 {
            return Err(Error::Config("run.train_episodes and run.eval_episodes must be positive".into()));
        }
        let d = &self.dataset;
        if d.episodes == 0 || d.vehicles == 0 || !(d.rate_hz > 0.0) {
            return Err(Error::Config("dataset.episodes, dataset.vehicles and dataset.rate_hz must be positive".into()));
        }
        if d.steps < crate::forecast::HISTORY_LEN + crate::forecast::FUTURE_LEN {
            return Err(Error::Config(format!("dataset.steps must be at least 20, got {}", d.steps)));
        }
        Ok(())
    }

    /// Parses `section.key = value` lines over the defaults. Values are
    /// JSON literals; anything that is not valid JSON is taken as a string.
    /// `#` starts a comment. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tree = serde_json::to_value(Self::default())?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |m: String| Error::Config(format!("line {}: {m}", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| at(format!("expected `section.key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            let path: Vec<&str> = key.split('.').collect();
            if path.len() < 2 || path.iter().any(|p| p.is_empty()) {
                return Err(at(format!("key `{key}` must look like section.key")));
            }
            let slot = path
                .iter()
                .try_fold(&mut tree, |node, part| node.get_mut(*part))
                .ok_or_else(|| at(format!("unknown key `{key}`")))?;
            if slot.is_object() {
                return Err(at(format!("`{key}` is a section, not a key")));
            }
            *slot = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        }
        let config: Self = serde_json::from_value(tree).map_err(|e| Error::Config(format!("invalid value: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Every key with its current value, in the same syntax `parse` reads.
    pub fn render(&self) -> String {
        fn walk(prefix: &str, v: &Value, out: &mut String) {
            match v {
                Value::Object(map) => {
                    for (k, child) in map {
                        let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                        walk(&p, child, out);
                    }
                }
                other => out.push_str(&format!("{prefix} = {other}\n")),
            }
        }
        let mut out = String::new();
        walk("", &serde_json::to_value(self).expect("config serializes"), &mut out);
        out
    }
}
