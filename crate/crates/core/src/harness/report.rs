use super::logs::{format_table_line, read_episode_log, EpisodeLog, MetricsRow, Phase};
use crate::agent::Variant;
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const COLORS: [&str; 4] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"];

fn find_logs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_logs(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "jsonl") {
            out.push(p);
        }
    }
    Ok(())
}

/// Per-variant curve: mean over seeds of a per-episode quantity.
fn mean_curve(runs: &[Vec<EpisodeLog>], f: impl Fn(&EpisodeLog) -> f64) -> Vec<f64> {
    let len = runs.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let vals: Vec<f64> = runs.iter().filter_map(|r| r.get(i)).map(&f).collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect()
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" { "0.00".into() } else { s }
}

/// Line chart of one curve per series; deterministic output.
pub fn svg_plot(title: &str, y_label: &str, series: &[(String, Vec<f64>)]) -> String {
    let (w, h, left, right, top, bottom) = (720.0, 420.0, 70.0, 170.0, 40.0, 50.0);
    let n = series.iter().map(|s| s.1.len()).max().unwrap_or(0).max(1);
    let values = series.iter().flat_map(|s| s.1.iter().copied());
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pw = w - left - right;
    let ph = h - top - bottom;
    let px = |i: usize| left + if n > 1 { pw * i as f64 / (n - 1) as f64 } else { pw / 2.0 };
    let py = |v: f64| top + ph * (1.0 - (v - lo) / (hi - lo));
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" font-size="15">{title}</text>"#, left);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} V{} H{}" fill="none" stroke="black"/>"#,
        top + ph,
        left + pw
    );
    for (v, label) in [(lo, fmt_num(lo)), (hi, fmt_num(hi))] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{label}</text>"#, left - 6.0, fmt_num(py(v) + 4.0));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">episode (1..{n})</text>"#, left + pw / 2.0, h - 15.0);
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{y_label}</text>"#,
        top + ph / 2.0
    );
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        if ys.len() == 1 {
            let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#, fmt_num(px(0)), fmt_num(py(ys[0])));
        } else if !ys.is_empty() {
            let pts: Vec<String> = ys.iter().enumerate().map(|(i, &v)| format!("{},{}", fmt_num(px(i)), fmt_num(py(v)))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        }
        let ly = top + 16.0 * k as f64 + 8.0;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/>"#, w - right + 12.0, ly);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{name}</text>"#, w - right + 30.0, ly + 5.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Trailing moving average over `window` episodes.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|i| {
            let from = (i + 1).saturating_sub(window);
            values[from..=i].iter().sum::<f64>() / (i + 1 - from) as f64
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    /// Outcome counts per variant, summed over seeds, from evaluation logs
    /// when present and training logs otherwise.
    pub rows: Vec<MetricsRow>,
    pub summary: String,
}

/// Reads every episode log under `dir` and writes reward and distance
/// curves (SVG and CSV) plus `summary.txt`. Rerunning rewrites identical
/// bytes.
pub fn emit_report(dir: &Path) -> Result<Report> {
    let mut paths = Vec::new();
    if dir.is_dir() {
        find_logs(dir, &mut paths)?;
    }
    let mut train: BTreeMap<Variant, Vec<Vec<EpisodeLog>>> = BTreeMap::new();
    let mut eval: BTreeMap<Variant, Vec<EpisodeLog>> = BTreeMap::new();
    let mut train_flat: BTreeMap<Variant, Vec<EpisodeLog>> = BTreeMap::new();
    for p in &paths {
        let Ok((header, logs)) = read_episode_log(p) else { continue };
        match header.phase {
            Phase::Train => {
                train_flat.entry(header.variant).or_default().extend(logs.iter().cloned());
                train.entry(header.variant).or_default().push(logs);
            }
            Phase::Eval => eval.entry(header.variant).or_default().extend(logs),
        }
    }
    let any = train.values().flatten().any(|r| !r.is_empty()) || eval.values().any(|l| !l.is_empty());
    if !any {
        return Err(Error::EmptyRun(format!("no episode logs under {}", dir.display())));
    }

    let mut reward_series = Vec::new();
    let mut distance_series = Vec::new();
    let mut csv = String::from("variant,episode,mean_reward,mean_distance\n");
    for (variant, runs) in &train {
        let rewards = mean_curve(runs, |e| e.cumulative_reward);
        let distances = mean_curve(runs, |e| e.distance);
        for (i, (r, d)) in rewards.iter().zip(&distances).enumerate() {
            let _ = writeln!(csv, "{variant},{},{r},{d}", i + 1);
        }
        let window = (rewards.len() / 20).max(1);
        reward_series.push((variant.display_name().to_string(), smooth(&rewards, window)));
        distance_series.push((variant.display_name().to_string(), smooth(&distances, window)));
    }
    std::fs::write(dir.join("curves.csv"), csv)?;
    std::fs::write(dir.join("reward_curve.svg"), svg_plot("Total reward per training episode", "total reward", &reward_series))?;
    std::fs::write(
        dir.join("distance_curve.svg"),
        svg_plot("Safe forward distance per training episode", "distance (m)", &distance_series),
    )?;

    let mut rows = Vec::new();
    let mut summary = String::from("variant success collision timeout\n");
    for variant in Variant::ALL {
        let (logs, source) = match eval.get(&variant) {
            Some(l) if !l.is_empty() => (l, "eval"),
            _ => match train_flat.get(&variant) {
                Some(l) if !l.is_empty() => (l, "train"),
                _ => continue,
            },
        };
        let row = MetricsRow::from_statuses(variant, 0, logs.iter().map(|l| l.status));
        let _ = writeln!(
            summary,
            "{}  ({} {source} episodes)",
            format_table_line(variant, row.success_rate(), row.collision_rate(), row.timeout_rate()),
            row.episodes
        );
        rows.push(row);
    }
    summary.push_str(
        "\nDesk-scale protocol: values are specific to this run's scenario, seeds and episode counts; \
         see config.txt when present.\n",
    );
    std::fs::write(dir.join("summary.txt"), &summary)?;
    Ok(Report { rows, summary })
}
