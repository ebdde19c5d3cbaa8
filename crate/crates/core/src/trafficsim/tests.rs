use super::*;

fn empty_road() -> ScenarioConfig {
    ScenarioConfig { npc_count: 0, ..ScenarioConfig::default() }
}

fn add_npc(world: &mut WorldState, x: f64, y: f64, speed: f64) -> usize {
    let id = world.vehicles.len();
    world.vehicles.push(VehicleState {
        id,
        x,
        y,
        heading: 0.0,
        speed,
        length: 4.5,
        width: 2.0,
        is_ego: false,
    });
    id
}

#[test]
fn reset_without_traffic() {
    let w = WorldState::reset(&empty_road(), 1).unwrap();
    assert_eq!(w.vehicles.len(), 1);
    assert!(w.ego().is_ego);
    assert_eq!(w.ego().speed, 0.0);
    assert_eq!(w.ego().y, 5.25);
    assert_eq!(w.status, EpisodeStatus::Running);
    assert_eq!(episode_status(&w, 1200, &[]), EpisodeStatus::Running);
}

#[test]
fn reset_is_deterministic() {
    let cfg = ScenarioConfig::default();
    assert_eq!(WorldState::reset(&cfg, 42).unwrap(), WorldState::reset(&cfg, 42).unwrap());
    assert_ne!(WorldState::reset(&cfg, 42).unwrap(), WorldState::reset(&cfg, 43).unwrap());
}

#[test]
fn reset_keeps_two_length_gaps() {
    let cfg = ScenarioConfig::default();
    for seed in 0..50 {
        let w = WorldState::reset(&cfg, seed).unwrap();
        assert_eq!(w.vehicles.len(), 13);
        assert_eq!(w.vehicles.iter().filter(|v| v.is_ego).count(), 1);
        for (i, a) in w.vehicles.iter().enumerate() {
            for b in &w.vehicles[i + 1..] {
                if (a.y - b.y).abs() < 1e-9 {
                    let gap = (a.x - b.x).abs() - 4.5;
                    assert!(gap >= 9.0, "seed {seed}: gap {gap} between {} and {}", a.id, b.id);
                }
            }
        }
        assert!(detect_collision(&w).is_empty());
    }
}

#[test]
fn overcrowded_reset_is_a_placement_error() {
    let cfg = ScenarioConfig { npc_count: 200, npc_spawn_length: 100.0, ..ScenarioConfig::default() };
    let err = WorldState::reset(&cfg, 0).unwrap_err();
    assert!(matches!(err, Error::Placement { requested: 200, .. }));
    assert!(err.to_string().contains("lower the traffic density"));
}

#[test]
fn invalid_scenarios_are_rejected() {
    let mut cfg = ScenarioConfig::default();
    cfg.lanes.lane_count = 1;
    assert!(matches!(WorldState::reset(&cfg, 0), Err(Error::Config(_))));
    let mut cfg = ScenarioConfig::default();
    cfg.lanes.lane_width = 1.5;
    assert!(cfg.validate().is_err());
}

#[test]
fn open_road_npc_converges_to_cycle_speed() {
    let mut w = WorldState::reset(&empty_road(), 0).unwrap();
    w.place_ego(-1000.0, 5.25, 0.0, 0.0);
    let id = add_npc(&mut w, 0.0, 1.75, 0.0);
    let mut max_after = 0.0f64;
    for step in 0..600 {
        w.step(ControlCommand::default()).unwrap();
        if step > 300 {
            max_after = max_after.max(w.vehicle(id).unwrap().speed);
        }
    }
    let v = w.vehicle(id).unwrap().speed;
    assert!((v - 24.0 / 3.6).abs() < 0.1, "speed {v}");
    assert!(max_after <= 24.0 / 3.6 + 0.01);
}

#[test]
fn npc_brakes_for_stopped_leader() {
    let mut w = WorldState::reset(&empty_road(), 0).unwrap();
    // Ego stopped in lane 0, NPC 5 m behind its rear bumper.
    w.place_ego(20.0, 1.75, 0.0, 0.0);
    let id = add_npc(&mut w, 20.0 - 4.5 - 5.0, 1.75, 6.0);
    let cmd = surrounding_policy(&w, id);
    assert!(cmd.brake > 0.0 && cmd.throttle == 0.0, "{cmd:?}");
    // IDM oracle: s* = 2 + 6*1.5 + 6*6/(2*sqrt(3)) = 21.392..., a = 1.5*(1-(6/6.667)^4-(s*/5)^2)
    let s_star = 2.0 + 6.0 * 1.5 + 36.0 / (2.0 * 3f64.sqrt());
    let a = 1.5 * (1.0 - (6.0f64 / (24.0 / 3.6)).powi(4) - (s_star / 5.0).powi(2));
    assert!((cmd.brake - (-a / 6.0).min(1.0)).abs() < 1e-12);
}

#[test]
fn npc_at_equilibrium_holds() {
    let mut w = WorldState::reset(&empty_road(), 0).unwrap();
    let id = add_npc(&mut w, 100.0, 8.75, 24.0 / 3.6);
    let cmd = surrounding_policy(&w, id);
    assert!(cmd.steer.abs() < 1e-6);
    assert!(cmd.throttle.abs() < 1e-9 && cmd.brake.abs() < 1e-9, "{cmd:?}");
}

#[test]
fn zero_command_from_rest_stays_put() {
    let mut w = WorldState::reset(&empty_road(), 0).unwrap();
    let before = w.ego().clone();
    w.step(ControlCommand::default()).unwrap();
    assert_eq!(w.ego().x, before.x);
    assert_eq!(w.ego().y, before.y);
    assert_eq!(w.time_step, 1);
}

#[test]
fn full_throttle_one_step() {
    let mut w = WorldState::reset(&empty_road(), 0).unwrap();
    w.step(ControlCommand { throttle: 1.0, brake: 0.0, steer: 0.0 }).unwrap();
    assert!((w.ego().speed - 3.0 * 0.1).abs() < 1e-12);
    assert!((w.ego().x - 0.5 * 3.0 * 0.01).abs() < 1e-12);
}

#[test]
fn collision_ends_episode() {
    let mut w = WorldState::reset(&empty_road(), 0).unwrap();
    w.place_ego(50.0, 1.75, 0.0, 5.0);
    let id = add_npc(&mut w, 54.0, 1.75, 0.0);
    let prev = w.clone();
    let events = w.step(ControlCommand::default()).unwrap();
    assert!(events.contains(&Event::Collision { other: id }));
    assert_eq!(w.status, EpisodeStatus::Collision);
    let r = compute_reward(&prev, &w, &events);
    assert_eq!(r.r_collide, -500.0);
    assert_eq!(r.total, r.r_collide + r.r_out_road + r.r_go_forward + r.r_success);
    assert!(matches!(w.step(ControlCommand::default()), Err(Error::Contract(_))));
}

#[test]
fn reward_examples() {
    let mut prev = WorldState::reset(&empty_road(), 0).unwrap();
    prev.place_ego(10.0, 5.25, 0.0, 8.0);
    let mut next = prev.clone();
    next.place_ego(10.8, 5.25, 0.0, 8.0);
    let r = compute_reward(&prev, &next, &[]);
    assert_eq!((r.r_collide, r.r_out_road, r.r_success), (0.0, 0.0, 0.0));
    assert!((r.r_go_forward - 0.8).abs() < 1e-12);
    assert_eq!(r.total, r.r_go_forward);

    next.place_ego(10.3, 5.25, 0.0, 8.0);
    let r = compute_reward(&prev, &next, &[Event::Collision { other: 3 }]);
    assert!((r.total - (-499.7)).abs() < 1e-9);
}

#[test]
fn milestones_paid_once() {
    let mut w = WorldState::reset(&empty_road(), 0).unwrap();
    w.place_ego(124.9, 5.25, 0.0, 8.0);
    let mut paid = Vec::new();
    while !w.status.is_terminal() {
        let prev = w.clone();
        let events = w.step(ControlCommand::default()).unwrap();
        let r = compute_reward(&prev, &w, &events);
        if r.r_success != 0.0 {
            paid.push(r.r_success);
        }
        if w.ego().speed < 1.0 {
            w.place_ego(w.ego().x, 5.25, 0.0, 8.0);
        }
    }
    assert_eq!(paid, vec![100.0, 150.0, 200.0, 1000.0]);
    assert_eq!(w.status, EpisodeStatus::Success);
    assert_eq!(w.milestone_flags, [true; 4]);
}

#[test]
fn off_road_penalty_and_termination() {
    let mut w = WorldState::reset(&empty_road(), 0).unwrap();
    // One corner past the right edge, center on the road.
    w.place_ego(10.0, 0.5, 0.0, 0.0);
    let prev = w.clone();
    let events = w.step(ControlCommand::default()).unwrap();
    assert!(events.contains(&Event::OffRoad));
    assert_eq!(compute_reward(&prev, &w, &events).r_out_road, -10.0);
    assert_eq!(w.status, EpisodeStatus::Running);
    w.place_ego(10.0, -0.1, 0.0, 0.0);
    w.step(ControlCommand::default()).unwrap();
    assert_eq!(w.status, EpisodeStatus::OffRoadTerminal);
}

#[test]
fn status_definitions() {
    let mut w = WorldState::reset(&empty_road(), 0).unwrap();
    w.time_step = 1200;
    w.place_ego(250.0, 5.25, 0.0, 0.0);
    assert_eq!(episode_status(&w, 1200, &[]), EpisodeStatus::Timeout);
    w.time_step = 3;
    w.place_ego(500.0, 5.25, 0.0, 0.0);
    assert_eq!(episode_status(&w, 1200, &[]), EpisodeStatus::Success);
}

#[test]
fn timeout_is_reported_as_event() {
    let cfg = ScenarioConfig { max_steps: 5, ..empty_road() };
    let mut w = WorldState::reset(&cfg, 0).unwrap();
    for _ in 0..4 {
        assert!(w.step(ControlCommand::default()).unwrap().is_empty());
    }
    assert_eq!(w.step(ControlCommand::default()).unwrap(), vec![Event::Timeout]);
    assert_eq!(w.status, EpisodeStatus::Timeout);
}

#[test]
fn collision_relation_is_symmetric_and_sorted() {
    let mut w = WorldState::reset(&empty_road(), 0).unwrap();
    w.place_ego(0.0, 1.75, 0.0, 0.0);
    add_npc(&mut w, 2.0, 1.75, 0.0);
    add_npc(&mut w, 100.0, 1.75, 0.0);
    assert_eq!(detect_collision(&w), vec![(0, 1)]);
    w.vehicles.reverse();
    assert_eq!(detect_collision(&w), vec![(0, 1)]);
}
