//! Car-following law for surrounding vehicles.

use super::{ControlCommand, VehicleState, WorldState};

/// Desired IDM acceleration given an optional leader `(gap, leader_speed)`.
pub fn idm_acceleration(world: &WorldState, speed: f64, leader: Option<(f64, f64)>) -> f64 {
    let p = &world.scenario.idm;
    let v0 = world.scenario.cycle_speed;
    let free = if v0 > 0.0 { 1.0 - (speed / v0).powf(p.exponent) } else { -1.0 };
    let interaction = match leader {
        None => 0.0,
        Some((gap, _)) if gap <= 0.0 => f64::INFINITY,
        Some((gap, leader_speed)) => {
            let dv = speed - leader_speed;
            let desired = p.min_gap
                + (speed * p.time_headway + speed * dv / (2.0 * (p.max_accel * p.comfortable_decel).sqrt())).max(0.0);
            (desired / gap).powi(2)
        }
    };
    p.max_accel * (free - interaction)
}

/// Closest vehicle ahead of `me` whose footprint reaches into my lane band.
/// Returns bumper-to-bumper gap and the leader's speed.
pub fn leader_of(world: &WorldState, me: &VehicleState) -> Option<(f64, f64)> {
    let lanes = &world.scenario.lanes;
    let lane = lanes.nearest_lane(me.y) as i64;
    let lo = lane as f64 * lanes.lane_width;
    let hi = lo + lanes.lane_width;
    world
        .vehicles
        .iter()
        .filter(|o| o.id != me.id && o.x > me.x)
        .filter(|o| o.y + o.width / 2.0 > lo && o.y - o.width / 2.0 < hi)
        .map(|o| (o.x - me.x - (o.length + me.length) / 2.0, o.speed))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Command for surrounding vehicle `id`: IDM longitudinal control toward the
/// cycle speed and proportional lane keeping. Never changes lanes.
pub fn surrounding_policy(world: &WorldState, id: usize) -> ControlCommand {
    let me = world.vehicle(id).expect("surrounding vehicle exists");
    debug_assert!(!me.is_ego);
    let dynamics = &world.scenario.dynamics;
    let accel = idm_acceleration(world, me.speed, leader_of(world, me));
    let (throttle, brake) = if accel >= 0.0 {
        ((accel / dynamics.max_accel).min(1.0), 0.0)
    } else {
        (0.0, (-accel / dynamics.max_brake).min(1.0))
    };
    let lanes = &world.scenario.lanes;
    let center = lanes.lane_center(lanes.nearest_lane(me.y) as i64);
    let lateral_error = me.y - center;
    // Steering angle that points back at the lane center.
    let steer_angle = -0.3 * lateral_error - 1.5 * me.heading;
    let steer = (steer_angle / dynamics.max_steer).clamp(-1.0, 1.0);
    ControlCommand { throttle, brake, steer }
}
