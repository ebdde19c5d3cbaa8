use crate::agent::{UpdateStats, Variant, ACTIONS};
use crate::error::{Error, Result};
use crate::pilot::TraceStep;
use crate::trafficsim::{EpisodeStatus, RewardBreakdown};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

pub const LOG_SCHEMA: &str = "hppo-episode-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    /// Simulator step at which the decision was taken.
    pub step: u64,
    /// FNV-1a over the bit patterns of the assembled state.
    pub state_hash: String,
    pub action: usize,
    pub probs: [f64; ACTIONS],
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceStep>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub seed: u64,
    pub decisions: Vec<DecisionRecord>,
    pub status: EpisodeStatus,
    pub cumulative_reward: f64,
    pub steps: u64,
    /// Ego progress along the route when the episode ended, meters.
    pub distance: f64,
}

impl EpisodeLog {
    pub fn actions(&self) -> Vec<usize> {
        self.decisions.iter().map(|d| d.action).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema: String,
    pub version: u32,
    pub variant: Variant,
    pub phase: Phase,
    pub master_seed: u64,
    /// Hash of the scenario seed sequence, identical across variants that
    /// saw the same scenarios.
    pub seed_stream_hash: String,
}

pub fn fnv1a(words: impl IntoIterator<Item = u64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for w in words {
        for b in w.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

pub fn hash_hex(words: impl IntoIterator<Item = u64>) -> String {
    format!("{:016x}", fnv1a(words))
}

pub fn write_episode_log(path: &Path, header: &LogHeader, episodes: &[EpisodeLog]) -> Result<()> {
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut f, header)?;
    f.write_all(b"\n")?;
    for e in episodes {
        serde_json::to_writer(&mut f, e)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_episode_log(path: &Path) -> Result<(LogHeader, Vec<EpisodeLog>)> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::EmptyRun(format!("{} has no header line", path.display())))??;
    let header: LogHeader = serde_json::from_str(&first)?;
    if header.schema != LOG_SCHEMA || header.version != LOG_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported log schema {} v{}",
            path.display(),
            header.schema,
            header.version
        )));
    }
    let mut episodes = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            episodes.push(serde_json::from_str(&line)?);
        }
    }
    Ok((header, episodes))
}

/// Outcome counts over a set of evaluation episodes. Off-road terminals
/// count as collisions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub variant: Variant,
    pub seed: u64,
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    pub timeouts: usize,
}

impl MetricsRow {
    pub fn from_statuses(variant: Variant, seed: u64, statuses: impl IntoIterator<Item = EpisodeStatus>) -> Self {
        let mut row = Self { variant, seed, episodes: 0, successes: 0, collisions: 0, timeouts: 0 };
        for s in statuses {
            row.episodes += 1;
            match s {
                EpisodeStatus::Success => row.successes += 1,
                EpisodeStatus::Collision | EpisodeStatus::OffRoadTerminal => row.collisions += 1,
                // Episodes always run to a terminal status; a live one counts as timed out.
                EpisodeStatus::Timeout | EpisodeStatus::Running => row.timeouts += 1,
            }
        }
        row
    }

    fn rate(&self, count: usize) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            count as f64 / self.episodes as f64
        }
    }

    pub fn success_rate(&self) -> f64 {
        self.rate(self.successes)
    }

    pub fn collision_rate(&self) -> f64 {
        self.rate(self.collisions)
    }

    pub fn timeout_rate(&self) -> f64 {
        self.rate(self.timeouts)
    }

    /// `"Hybrid-PPO 87.8% 10.5% 2.7%"`.
    pub fn table_line(&self) -> String {
        format_table_line(self.variant, self.success_rate(), self.collision_rate(), self.timeout_rate())
    }
}

pub fn format_table_line(variant: Variant, success: f64, collision: f64, timeout: f64) -> String {
    format!(
        "{} {:.1}% {:.1}% {:.1}%",
        variant.display_name(),
        100.0 * success,
        100.0 * collision,
        100.0 * timeout
    )
}

pub const METRICS_HEADER: &str =
    "variant,seed,episodes,success_rate,collision_rate,timeout_rate,successes,collisions,timeouts";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{},{},{}",
            r.variant,
            r.seed,
            r.episodes,
            r.success_rate(),
            r.collision_rate(),
            r.timeout_rate(),
            r.successes,
            r.collisions,
            r.timeouts
        )
        .expect("string write");
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub update: usize,
    pub decisions: usize,
    pub stats: UpdateStats,
}

pub fn updates_csv(records: &[UpdateRecord]) -> String {
    let mut out = String::from("update,decisions,surrogate,value_loss,entropy,clip_fraction,approx_kl,grad_norm\n");
    for r in records {
        let s = &r.stats;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.update, r.decisions, s.surrogate, s.value_loss, s.entropy, s.clip_fraction, s.approx_kl, s.grad_norm
        )
        .expect("string write");
    }
    out
}
