use super::{FUTURE_LEN, HISTORY_LEN};
use crate::error::{contract, Result};
use crate::trafficsim::{ControlCommand, ScenarioConfig, WorldState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// One history/future window in a local frame anchored at the last
/// observed position (history step 10 is the origin).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub history: [[f64; 2]; HISTORY_LEN],
    pub future: [[f64; 2]; FUTURE_LEN],
    /// Validity of the 10 history steps followed by the 10 future steps.
    pub mask: [bool; HISTORY_LEN + FUTURE_LEN],
    pub vehicle_id: usize,
    pub start_step: u64,
}

/// Translates a window so the last valid history point sits at the origin.
/// Masked steps become zero. Returns the anchor in the input frame.
pub fn localize(
    history: &[[f64; 2]; HISTORY_LEN],
    future: &[[f64; 2]; FUTURE_LEN],
    mask: &[bool; HISTORY_LEN + FUTURE_LEN],
) -> ([[f64; 2]; HISTORY_LEN], [[f64; 2]; FUTURE_LEN], [f64; 2]) {
    let anchor = (0..HISTORY_LEN)
        .rev()
        .find(|&t| mask[t])
        .map_or([0.0, 0.0], |t| history[t]);
    let shift = |p: [f64; 2], valid: bool| if valid { [p[0] - anchor[0], p[1] - anchor[1]] } else { [0.0, 0.0] };
    let mut h = [[0.0; 2]; HISTORY_LEN];
    let mut f = [[0.0; 2]; FUTURE_LEN];
    for t in 0..HISTORY_LEN {
        h[t] = shift(history[t], mask[t]);
    }
    for t in 0..FUTURE_LEN {
        f[t] = shift(future[t], mask[HISTORY_LEN + t]);
    }
    (h, f, anchor)
}

/// Runs the simulator with `vehicles` surrounding cars (the ego stays
/// parked at the start line) sampling at `rate_hz` for `steps` recorded
/// positions, then cuts stride-1 windows of 10 history + 10 future steps
/// for every surrounding vehicle.
pub fn collect_dataset(
    scenario: &ScenarioConfig,
    seed: u64,
    vehicles: usize,
    rate_hz: f64,
    steps: usize,
) -> Result<Vec<TrajectorySample>> {
    let window = HISTORY_LEN + FUTURE_LEN;
    if steps < window {
        return contract(format!("collect_dataset needs at least {window} steps, got {steps}"));
    }
    if !(rate_hz > 0.0) {
        return contract(format!("rate_hz must be positive, got {rate_hz}"));
    }
    let cfg = ScenarioConfig {
        npc_count: vehicles,
        dt: 1.0 / rate_hz,
        max_steps: steps as u64 + 1,
        ..scenario.clone()
    };
    let mut world = WorldState::reset(&cfg, seed)?;
    let ids: Vec<usize> = world.npcs().map(|v| v.id).collect();
    let mut tracks: Vec<Vec<[f64; 2]>> = vec![Vec::with_capacity(steps); ids.len()];
    for t in 0..steps {
        if t > 0 {
            world.step(ControlCommand::default())?;
            if world.status.is_terminal() {
                break;
            }
        }
        for (track, id) in tracks.iter_mut().zip(&ids) {
            let v = world.vehicle(*id).expect("vehicle persists");
            track.push([v.x, v.y]);
        }
    }
    let mut samples = Vec::new();
    for (track, &id) in tracks.iter().zip(&ids) {
        for start in 0..=track.len().saturating_sub(window) {
            if track.len() < window {
                break;
            }
            let mut history = [[0.0; 2]; HISTORY_LEN];
            let mut future = [[0.0; 2]; FUTURE_LEN];
            history.copy_from_slice(&track[start..start + HISTORY_LEN]);
            future.copy_from_slice(&track[start + HISTORY_LEN..start + window]);
            let mask = [true; HISTORY_LEN + FUTURE_LEN];
            let (history, future, _) = localize(&history, &future, &mask);
            samples.push(TrajectorySample { history, future, mask, vehicle_id: id, start_step: start as u64 });
        }
    }
    Ok(samples)
}

/// Straight-line samples with per-step displacement drawn uniformly from
/// the disk of radius `max_step` (meters per step).
pub fn constant_velocity_dataset(count: usize, max_step: f64, seed: u64) -> Vec<TrajectorySample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let r = max_step * rng.gen::<f64>().sqrt();
            let a = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let v = [r * a.cos(), r * a.sin()];
            let at = |k: f64| [k * v[0], k * v[1]];
            let mut history = [[0.0; 2]; HISTORY_LEN];
            let mut future = [[0.0; 2]; FUTURE_LEN];
            for t in 0..HISTORY_LEN {
                history[t] = at(t as f64 - (HISTORY_LEN - 1) as f64);
            }
            for t in 0..FUTURE_LEN {
                future[t] = at(t as f64 + 1.0);
            }
            TrajectorySample {
                history,
                future,
                mask: [true; HISTORY_LEN + FUTURE_LEN],
                vehicle_id: i,
                start_step: 0,
            }
        })
        .collect()
}

pub fn write_jsonl(samples: &[TrajectorySample], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut f, s)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<TrajectorySample>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
