use super::*;
use crate::trafficsim::ScenarioConfig;

fn empty_world(lane: i64, speed: f64) -> WorldState {
    let cfg = ScenarioConfig { npc_count: 0, max_steps: 100_000, ..ScenarioConfig::default() };
    let mut w = WorldState::reset(&cfg, 1).unwrap();
    let y = w.lanes().lane_center(lane);
    w.place_ego(20.0, y, 0.0, speed);
    w
}

fn pose(x: f64, y: f64, heading: f64) -> VehicleState {
    let mut w = empty_world(0, 0.0);
    w.place_ego(x, y, heading, 5.0);
    w.ego().clone()
}

#[test]
fn keep_plan_sits_on_lane_center() {
    let w = empty_world(2, 8.0);
    let plan = plan_lane_change(w.ego(), Decision::Keep, w.lanes(), 8.0, &PilotConfig::default());
    assert_eq!(plan.waypoints[0][0], 20.0);
    for p in &plan.waypoints {
        assert!((p[1] - 8.75).abs() < 1e-9);
    }
    assert!((plan.final_waypoint()[0] - 40.0).abs() < 1e-9);
}

#[test]
fn change_plan_endpoints() {
    let cfg = PilotConfig::default();
    let w = empty_world(2, 8.0);
    let left = plan_lane_change(w.ego(), Decision::ChangeLeft, w.lanes(), 8.0, &cfg);
    assert!((left.final_waypoint()[1] - 3.5 * 3.5).abs() < 1e-6);
    assert_eq!(left.waypoints[0], [w.ego().x, w.ego().y]);
    assert!(left.waypoints.windows(2).all(|p| p[1][0] > p[0][0]));
    let w0 = empty_world(0, 8.0);
    let right = plan_lane_change(w0.ego(), Decision::ChangeRight, w0.lanes(), 8.0, &cfg);
    assert!(right.final_waypoint()[1] < 0.0);
}

#[test]
fn lateral_pid_hand_values() {
    let g = PidGains::LATERAL;
    let mut s = PidState::default();
    assert_eq!(pid_lateral(&mut s, &g, &pose(0.0, 0.0, 0.0), [5.0, 0.0]), 0.0);

    // bearing error of exactly 0.1 rad on the first tick
    let mut s = PidState::default();
    let p = pose(0.0, 0.0, -0.1);
    let steer = pid_lateral(&mut s, &g, &p, [10.0, 0.0]);
    let expected = 1.95 * 0.1 + 0.2 * (0.1 / 0.1) + 0.07 * (0.1 * 0.1);
    assert!((steer - expected).abs() < 1e-12, "{steer} vs {expected}");

    let mut s = PidState::default();
    assert_eq!(pid_lateral(&mut s, &g, &pose(0.0, 0.0, 0.0), [-1.0, 0.5]), 1.0);
}

#[test]
fn integral_is_clamped() {
    let g = PidGains { k_p: 0.0, k_v: 0.0, k_a: 1.0, dt: 1.0 };
    let mut s = PidState::default();
    for _ in 0..50 {
        s.update(&g, 3.0);
    }
    assert_eq!(s.integral, INTEGRAL_LIMIT);
}

#[test]
fn longitudinal_signs() {
    let g = PidGains::LONGITUDINAL;
    assert_eq!(pid_longitudinal(&mut PidState::default(), &g, 8.0, 8.0), (0.0, 0.0));
    let (t, b) = pid_longitudinal(&mut PidState::default(), &g, 0.0, 8.33);
    assert!(t > 0.0 && b == 0.0);
    let (t, b) = pid_longitudinal(&mut PidState::default(), &g, 12.0, 8.33);
    assert!(t == 0.0 && b > 0.0);
}

#[test]
fn keep_maneuver_holds_center() {
    let mut w = empty_world(1, 8.0);
    let mut cfg = PilotConfig { max_steps: 200, stay_lookahead: 400.0, ..PilotConfig::default() };
    cfg.arrival_radius = 0.5;
    let out = execute_decision(&mut w, Decision::Keep, &cfg).unwrap();
    assert_eq!(out.trace.len(), 200);
    for s in &out.trace {
        assert!((s.y - 5.25).abs() <= 0.2);
        assert!(s.command.throttle * s.command.brake == 0.0);
    }
}

#[test]
fn lane_change_settles() {
    let cfg = PilotConfig::default();
    for lane in 0..4i64 {
        for decision in [Decision::ChangeRight, Decision::ChangeLeft] {
            let target = lane + decision.lane_delta();
            if !(0..4).contains(&target) {
                continue;
            }
            for speed in [4.0, 6.0, 8.0] {
                let mut w = empty_world(lane, speed);
                let target_y = w.lanes().lane_center(target);
                let sign = decision.lane_delta() as f64;
                let out = execute_decision(&mut w, decision, &cfg).unwrap();
                assert!(out.arrived);
                let overshoot = out.trace.iter().map(|s| sign * (s.y - target_y)).fold(0.0, f64::max);
                let end = out.trace.last().unwrap();
                assert!(out.trace.len() <= 60);
                assert!((end.y - target_y).abs() <= 0.1);
                assert!(overshoot <= 0.5);
            }
        }
    }
}

#[test]
fn collision_ends_maneuver() {
    let cfg = ScenarioConfig { npc_count: 1, max_steps: 10_000, ..ScenarioConfig::default() };
    let mut w = WorldState::reset(&cfg, 3).unwrap();
    let npc = w.npcs().next().unwrap().clone();
    w.place_ego(npc.x - 8.0, npc.y, 0.0, 20.0);
    let out = execute_decision(&mut w, Decision::Keep, &PilotConfig::default()).unwrap();
    assert_eq!(out.status, EpisodeStatus::Collision);
    assert_eq!(out.reward.r_collide, -500.0);
    assert!(out.trace.len() < 100);
}

#[test]
fn speed_loop_settles() {
    let cfg = PilotConfig { max_steps: 100, stay_lookahead: 500.0, ..PilotConfig::default() };
    let mut w = empty_world(1, 0.0);
    let out = execute_decision(&mut w, Decision::Keep, &cfg).unwrap();
    let speeds: Vec<f64> = out.trace.iter().map(|s| s.speed).collect();
    assert!(speeds[99..].iter().all(|v| (v - 30.0 / 3.6).abs() <= 0.2));
    assert!(speeds.iter().all(|v| *v < 30.0 / 3.6 + 0.5));
}
