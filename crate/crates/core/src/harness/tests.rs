use super::*;
use crate::agent::{Observation, Transition, Variant, CURRENT_WIDTH};
use crate::error::Error;
use crate::trafficsim::EpisodeStatus;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn small_config(episodes: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.run.train_episodes = episodes;
    cfg.run.eval_episodes = 4;
    cfg
}

fn tiny_predictor_config(mut cfg: RunConfig) -> RunConfig {
    cfg.dataset.episodes = 1;
    cfg.dataset.vehicles = 4;
    cfg.dataset.steps = 30;
    cfg.predictor.epochs = 1;
    cfg
}

#[test]
fn parse_overrides_defaults_and_skips_comments() {
    let text = "# desk run\nrun.train_episodes = 12\nscenario.npc_count = 3   # fewer cars\n\nagent.gamma = 0.9\nrun.variant = pure\nrun.output_dir = out/x\n";
    let cfg = RunConfig::parse(text).unwrap();
    assert_eq!(cfg.run.train_episodes, 12);
    assert_eq!(cfg.scenario.npc_count, 3);
    assert_eq!(cfg.agent.gamma, 0.9);
    assert_eq!(cfg.run.variant, Variant::Pure);
    assert_eq!(cfg.run.output_dir, Path::new("out/x"));
    assert_eq!(cfg.scenario.lanes, RunConfig::default().scenario.lanes);
}

#[test]
fn parse_rejects_unknown_keys_sections_and_bad_values() {
    for text in ["run.bogus = 1", "nosuch.key = 1", "scenario.lanes = 3", "scenario.npc_count = many", "justakey", "run = 1"] {
        match RunConfig::parse(text) {
            Err(Error::Config(_)) => {}
            other => panic!("{text:?} gave {other:?}"),
        }
    }
    assert!(matches!(RunConfig::parse("agent.gamma = 1.5"), Err(Error::Config(_))));
    assert!(matches!(RunConfig::parse("run.seeds = []"), Err(Error::Config(_))));
}

#[test]
fn render_parses_back_to_the_same_config() {
    let mut cfg = RunConfig::default();
    cfg.run.seeds = vec![7, 9];
    cfg.scenario.npc_spawn_length = 123.5;
    cfg.agent.entropy_coef = 0.02;
    assert_eq!(RunConfig::parse(&cfg.render()).unwrap(), cfg);
}

#[test]
fn identical_runs_write_identical_logs() {
    let cfg = small_config(6);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let run = train(&cfg, Variant::Pure, 3, None).unwrap();
        let eval = evaluate(&cfg, &run.policy, None, 3, cfg.run.eval_seed, false).unwrap();
        persist_run(d.path(), &run, &eval).unwrap();
    }
    for file in ["train.jsonl", "eval.jsonl", "updates.csv", "policy.ckpt"] {
        let read = |d: &tempfile::TempDir| std::fs::read(run_dir(d.path(), Variant::Pure, 3).join(file)).unwrap();
        assert_eq!(read(&dirs[0]), read(&dirs[1]), "{file}");
    }
}

#[test]
fn twenty_four_decisions_trigger_three_updates() {
    let cfg = RunConfig::default();
    let policy = new_policy(&cfg, Variant::Pure, 0).unwrap();
    let mut trainer = Trainer::new(policy, cfg.agent.clone(), ChaCha8Rng::seed_from_u64(1));
    let mut current = [0.0; CURRENT_WIDTH];
    current[3] = 1.0;
    current[9] = 1.0;
    let obs = Observation { prediction: None, grid: None, current };
    for n in 1..=24 {
        let choice = trainer.decide(&obs).unwrap();
        let t = Transition {
            obs: obs.clone(),
            action: choice.action,
            reward: n as f64,
            done: n % 10 == 0,
            log_prob: choice.log_prob,
            value: choice.value,
        };
        trainer.record(t, Some(&obs)).unwrap();
        assert_eq!(trainer.updates.len(), n / 8);
    }
    assert_eq!(trainer.updates.len(), 3);
    assert_eq!(trainer.updates.iter().map(|u| u.decisions).collect::<Vec<_>>(), [8, 16, 24]);
}

#[test]
fn update_count_matches_decisions_over_a_run() {
    let run = train(&small_config(10), Variant::Pure, 5, None).unwrap();
    let total: usize = run.episodes.iter().map(|e| e.decisions.len()).sum();
    assert_eq!(run.decisions, total);
    assert_eq!(run.updates.len(), total / 8);
}

#[test]
fn logged_episodes_replay_to_the_same_reward() {
    let cfg = small_config(8);
    let run = train(&cfg, Variant::Pure, 11, None).unwrap();
    for log in &run.episodes {
        let summed: f64 = log.decisions.iter().map(|d| d.reward).sum();
        assert_eq!(summed, log.cumulative_reward);
        let (reward, status) = replay_episode(&cfg.scenario, &cfg.pilot, log.seed, &log.actions()).unwrap();
        assert_eq!(reward, log.cumulative_reward);
        assert_eq!(status, log.status);
    }
}

#[test]
fn replay_rejects_actions_past_the_end() {
    let cfg = small_config(1);
    let run = train(&cfg, Variant::Pure, 2, None).unwrap();
    let log = &run.episodes[0];
    let mut actions = log.actions();
    actions.push(1);
    assert!(matches!(replay_episode(&cfg.scenario, &cfg.pilot, log.seed, &actions), Err(Error::Contract(_))));
}

#[test]
fn empty_road_is_learned_within_fifty_episodes() {
    let mut cfg = small_config(50);
    cfg.scenario.npc_count = 0;
    for seed in 0..3 {
        let untrained = new_policy(&cfg, Variant::Pure, seed).unwrap();
        let before = evaluate(&cfg, &untrained, None, 10, 99, false).unwrap();
        let run = train(&cfg, Variant::Pure, seed, None).unwrap();
        let after = evaluate(&cfg, &run.policy, None, 10, 99, false).unwrap();
        let rate = |logs: &[EpisodeLog]| MetricsRow::from_statuses(Variant::Pure, seed, logs.iter().map(|e| e.status)).success_rate();
        assert_eq!(rate(&after), 1.0, "seed {seed}, untrained {}", rate(&before));
    }
}

#[test]
fn prediction_variants_need_a_predictor() {
    let cfg = small_config(1);
    for v in [Variant::Prediction, Variant::Hybrid] {
        assert!(matches!(train(&cfg, v, 0, None), Err(Error::Config(_))));
    }
}

#[test]
fn evaluate_needs_an_episode() {
    let cfg = small_config(1);
    let policy = new_policy(&cfg, Variant::Pure, 0).unwrap();
    assert!(evaluate(&cfg, &policy, None, 0, 1, false).is_err());
}

#[test]
fn checkpoint_of_another_variant_is_a_config_error() {
    let cfg = small_config(1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ckpt");
    crate::gradcore::checkpoint::save(&new_policy(&cfg, Variant::Pure, 0).unwrap().params, &path).unwrap();
    assert!(matches!(load_policy(&cfg, Variant::Image, &path), Err(Error::Config(_))));
    let back = load_policy(&cfg, Variant::Pure, &path).unwrap();
    assert_eq!(back.variant, Variant::Pure);
}

#[test]
fn serial_and_parallel_evaluation_agree() {
    let cfg = small_config(4);
    let run = train(&cfg, Variant::Pure, 4, None).unwrap();
    let serial = evaluate(&cfg, &run.policy, None, 8, 17, false).unwrap();
    let parallel = evaluate(&cfg, &run.policy, None, 8, 17, true).unwrap();
    assert_eq!(serial, parallel);
}

#[test]
fn metrics_rows_count_outcomes() {
    let mut statuses = vec![EpisodeStatus::Success; 9];
    statuses.push(EpisodeStatus::Collision);
    let row = MetricsRow::from_statuses(Variant::Hybrid, 0, statuses);
    assert_eq!((row.success_rate(), row.collision_rate(), row.timeout_rate()), (0.9, 0.1, 0.0));
    let row = MetricsRow::from_statuses(Variant::Pure, 0, [EpisodeStatus::OffRoadTerminal, EpisodeStatus::Timeout]);
    assert_eq!((row.successes, row.collisions, row.timeouts), (0, 1, 1));
}

#[test]
fn rates_sum_to_one() {
    let all = [EpisodeStatus::Success, EpisodeStatus::Collision, EpisodeStatus::OffRoadTerminal, EpisodeStatus::Timeout];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..60 {
        let statuses: Vec<_> = (0..n).map(|_| all[rand::Rng::gen_range(&mut rng, 0..4)]).collect();
        let row = MetricsRow::from_statuses(Variant::Image, 0, statuses);
        let sum = row.success_rate() + row.collision_rate() + row.timeout_rate();
        assert!((sum - 1.0).abs() <= 1.0 / n as f64, "{sum}");
        assert_eq!(row.successes + row.collisions + row.timeouts, n);
    }
}

#[test]
fn table_lines_have_the_published_layout() {
    assert_eq!(format_table_line(Variant::Hybrid, 0.878, 0.105, 0.027), "Hybrid-PPO 87.8% 10.5% 2.7%");
    assert_eq!(format_table_line(Variant::Pure, 0.476, 0.5, 0.024), "Pure PPO 47.6% 50.0% 2.4%");
    let csv = metrics_csv(&[MetricsRow::from_statuses(Variant::Prediction, 2, [EpisodeStatus::Success])]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(METRICS_HEADER));
    assert_eq!(lines.next(), Some("prediction,2,1,1.000000,0.000000,0.000000,1,0,0"));
}

#[test]
fn report_on_empty_directory_is_an_empty_run() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(emit_report(dir.path()), Err(Error::EmptyRun(_))));
    assert!(matches!(emit_report(&dir.path().join("missing")), Err(Error::EmptyRun(_))));
}

#[test]
fn single_episode_report_has_one_point_curves_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let run = train(&small_config(1), Variant::Pure, 0, None).unwrap();
    persist_run(dir.path(), &run, &[]).unwrap();
    emit_report(dir.path()).unwrap();
    let files = ["curves.csv", "reward_curve.svg", "distance_curve.svg", "summary.txt"];
    let first: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(dir.path().join(f)).unwrap()).collect();
    let csv = String::from_utf8(first[0].clone()).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(String::from_utf8(first[1].clone()).unwrap().contains("<circle"));
    emit_report(dir.path()).unwrap();
    for (f, bytes) in files.iter().zip(&first) {
        assert_eq!(&std::fs::read(dir.path().join(f)).unwrap(), bytes, "{f}");
    }
}

#[test]
fn summary_matches_a_recount_of_the_raw_logs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(5);
    for seed in [0, 1] {
        let run = train(&cfg, Variant::Pure, seed, None).unwrap();
        let eval = evaluate(&cfg, &run.policy, None, 7, cfg.run.eval_seed + seed, false).unwrap();
        persist_run(dir.path(), &run, &eval).unwrap();
    }
    let report = emit_report(dir.path()).unwrap();
    // Recount straight from the JSON lines, skipping the header.
    let (mut successes, mut total) = (0, 0);
    for seed in [0, 1] {
        let text = std::fs::read_to_string(run_dir(dir.path(), Variant::Pure, seed).join("eval.jsonl")).unwrap();
        for line in text.lines().skip(1) {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            total += 1;
            successes += usize::from(v["status"] == "success");
        }
    }
    assert_eq!(total, 14);
    let row = &report.rows[0];
    assert_eq!((row.episodes, row.successes), (total, successes));
    let expected = format_table_line(Variant::Pure, successes as f64 / 14.0, row.collision_rate(), row.timeout_rate());
    assert!(report.summary.contains(&expected), "{}", report.summary);
}

#[test]
fn ablation_gives_every_variant_the_same_seed_stream() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_predictor_config(small_config(2));
    cfg.run.seeds = vec![6];
    cfg.run.eval_episodes = 2;
    let result = ablate(&cfg, dir.path()).unwrap();
    assert_eq!(result.rows.iter().map(|r| r.variant).collect::<Vec<_>>(), Variant::ALL);
    let hashes: Vec<String> = Variant::ALL
        .iter()
        .flat_map(|&v| {
            ["train.jsonl", "eval.jsonl"]
                .map(|f| read_episode_log(&run_dir(dir.path(), v, 6).join(f)).unwrap().0)
                .into_iter()
                .map(|h| format!("{:?}:{}", h.phase, h.seed_stream_hash))
        })
        .collect();
    assert!(hashes.chunks(2).all(|c| c == &hashes[..2]), "{hashes:?}");
    for f in ["metrics.csv", "summary.txt", "config.txt", "predictor-seed-6.ckpt", "reward_curve.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(RunConfig::parse(&std::fs::read_to_string(dir.path().join("config.txt")).unwrap()).unwrap(), cfg);
}
