//! Waypoint planning for lane-change decisions and dual PID tracking.

use crate::agent::Decision;
use crate::error::{Error, Result};
use crate::trafficsim::{
    compute_reward, ControlCommand, EpisodeStatus, Event, LaneSpec, RewardBreakdown, VehicleState, WorldState,
};
use serde::{Deserialize, Serialize};

/// Proportional, derivative and integral gains with the control period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub k_p: f64,
    /// Derivative gain.
    pub k_v: f64,
    /// Integral gain.
    pub k_a: f64,
    pub dt: f64,
}

impl PidGains {
    pub const LATERAL: PidGains = PidGains { k_p: 1.95, k_v: 0.2, k_a: 0.07, dt: 0.1 };
    pub const LONGITUDINAL: PidGains = PidGains { k_p: 1.0, k_v: 0.0, k_a: 0.75, dt: 0.1 };

    pub fn validate(&self) -> Result<()> {
        if self.dt > 0.0 && [self.k_p, self.k_v, self.k_a].iter().all(|g| g.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("PID gains need finite values and dt > 0, got {self:?}")))
        }
    }
}

pub const INTEGRAL_LIMIT: f64 = 10.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
}

impl PidState {
    fn update(&mut self, gains: &PidGains, error: f64) -> f64 {
        self.integral = (self.integral + error * gains.dt).clamp(-INTEGRAL_LIMIT, INTEGRAL_LIMIT);
        let derivative = (error - self.prev_error) / gains.dt;
        self.prev_error = error;
        gains.k_p * error + gains.k_v * derivative + gains.k_a * self.integral
    }

    /// Like `update`, but the integral is held while the output saturates
    /// beyond `[-1, 1]` in the direction of the error.
    fn update_saturating(&mut self, gains: &PidGains, error: f64) -> f64 {
        let held = self.integral;
        let raw = self.update(gains, error);
        if (raw > 1.0 && error > 0.0) || (raw < -1.0 && error < 0.0) {
            let raw = raw - gains.k_a * (self.integral - held);
            self.integral = held;
            return raw;
        }
        raw
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PidPair {
    pub lateral: PidState,
    pub longitudinal: PidState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PilotConfig {
    pub lateral: PidGains,
    pub longitudinal: PidGains,
    pub waypoint_spacing: f64,
    pub arrival_radius: f64,
    pub change_length: f64,
    /// Straight run along the target lane appended after the transition.
    pub settle_length: f64,
    pub stay_lookahead: f64,
    pub pursuit_distance: f64,
    pub max_steps: usize,
}

impl Default for PilotConfig {
    fn default() -> Self {
        Self {
            lateral: PidGains::LATERAL,
            longitudinal: PidGains::LONGITUDINAL,
            waypoint_spacing: 2.0,
            arrival_radius: 1.0,
            change_length: 25.0,
            settle_length: 10.0,
            stay_lookahead: 20.0,
            pursuit_distance: 6.0,
            max_steps: 100,
        }
    }
}

impl PilotConfig {
    pub fn validate(&self) -> Result<()> {
        self.lateral.validate()?;
        self.longitudinal.validate()?;
        let positive = [
            ("waypoint_spacing", self.waypoint_spacing),
            ("arrival_radius", self.arrival_radius),
            ("change_length", self.change_length),
            ("stay_lookahead", self.stay_lookahead),
            ("pursuit_distance", self.pursuit_distance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("pilot.{name} must be positive, got {v}")));
            }
        }
        if self.settle_length < 0.0 || self.max_steps == 0 {
            return Err(Error::Config("pilot.settle_length must be >= 0 and pilot.max_steps > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManeuverPlan {
    pub waypoints: Vec<[f64; 2]>,
    pub target_speed: f64,
    pub arrival_radius: f64,
    pub decision: Decision,
    pub target_lane: i64,
}

impl ManeuverPlan {
    pub fn final_waypoint(&self) -> [f64; 2] {
        *self.waypoints.last().expect("plans are never empty")
    }

    /// Point `distance` ahead of the projection of `(x, y)` on the plan,
    /// continuing straight past the last waypoint.
    pub fn lookahead_point(&self, x: f64, y: f64, distance: f64) -> [f64; 2] {
        let w = &self.waypoints;
        let mut best = (f64::INFINITY, 0usize, 0.0);
        for i in 0..w.len().saturating_sub(1) {
            let (a, b) = (w[i], w[i + 1]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 { (((x - a[0]) * dx + (y - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let (px, py) = (a[0] + t * dx, a[1] + t * dy);
            let d = (x - px).hypot(y - py);
            if d < best.0 {
                best = (d, i, t);
            }
        }
        let (_, mut i, t) = best;
        if w.len() < 2 {
            return [w[0][0] + distance, w[0][1]];
        }
        let seg_len = |i: usize| (w[i + 1][0] - w[i][0]).hypot(w[i + 1][1] - w[i][1]);
        let mut remaining = distance + t * seg_len(i);
        loop {
            let len = seg_len(i);
            if remaining <= len || i + 2 == w.len() {
                let (a, b) = (w[i], w[i + 1]);
                let s = if len > 0.0 { remaining / len } else { 0.0 };
                return [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            }
            remaining -= len;
            i += 1;
        }
    }
}

/// Smooth 0 -> 1 blend with zero first and second derivatives at both ends.
pub fn quintic_blend(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Waypoints for a decision, cruising at `target_speed`. Keeping the lane follows the current lane
/// center; changing lanes blends laterally into the neighbor lane (which
/// may lie off the road) and then runs straight along it.
pub fn plan_lane_change(
    pose: &VehicleState,
    decision: Decision,
    lanes: &LaneSpec,
    target_speed: f64,
    config: &PilotConfig,
) -> ManeuverPlan {
    let lane = lanes.lane_index(pose.y);
    let target_lane = lane + decision.lane_delta();
    let target_y = lanes.lane_center(target_lane);
    let spacing = config.waypoint_spacing;
    let mut waypoints = Vec::new();
    if decision == Decision::Keep {
        let n = (config.stay_lookahead / spacing).ceil() as usize;
        waypoints.extend((0..=n).map(|i| [pose.x + config.stay_lookahead * i as f64 / n as f64, target_y]));
    } else {
        let n = (config.change_length / spacing).ceil() as usize;
        for i in 0..=n {
            let s = i as f64 / n as f64;
            waypoints.push([pose.x + s * config.change_length, pose.y + (target_y - pose.y) * quintic_blend(s)]);
        }
        let tail = (config.settle_length / spacing).ceil() as usize;
        for i in 1..=tail {
            waypoints.push([pose.x + config.change_length + config.settle_length * i as f64 / tail as f64, target_y]);
        }
    }
    ManeuverPlan {
        waypoints,
        target_speed,
        arrival_radius: config.arrival_radius,
        decision,
        target_lane,
    }
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r <= -std::f64::consts::PI { r + two_pi } else { r }
}

/// Steering from the signed heading deviation toward `waypoint`.
pub fn pid_lateral(state: &mut PidState, gains: &PidGains, pose: &VehicleState, waypoint: [f64; 2]) -> f64 {
    let bearing = (waypoint[1] - pose.y).atan2(waypoint[0] - pose.x);
    let error = wrap_angle(bearing - pose.heading);
    state.update(gains, error).clamp(-1.0, 1.0)
}

/// `(throttle, brake)` from the speed error; never both non-zero.
pub fn pid_longitudinal(state: &mut PidState, gains: &PidGains, speed: f64, target_speed: f64) -> (f64, f64) {
    let raw = state.update_saturating(gains, target_speed - speed);
    if raw >= 0.0 {
        (raw.min(1.0), 0.0)
    } else {
        (0.0, (-raw).min(1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub time_step: u64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub command: ControlCommand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManeuverOutcome {
    pub plan: ManeuverPlan,
    pub reward: RewardBreakdown,
    pub events: Vec<Event>,
    pub trace: Vec<TraceStep>,
    pub status: EpisodeStatus,
    pub arrived: bool,
}

/// Plans once at the scenario's ego target speed and tracks the plan until arrival, a terminal event, or the
/// per-maneuver step cap. PID state starts from zero for every plan.
pub fn execute_decision(world: &mut WorldState, decision: Decision, config: &PilotConfig) -> Result<ManeuverOutcome> {
    execute_decision_observed(world, decision, config, |_| {})
}

/// [`execute_decision`] calling `observe` after every simulator step.
pub fn execute_decision_observed(
    world: &mut WorldState,
    decision: Decision,
    config: &PilotConfig,
    mut observe: impl FnMut(&WorldState),
) -> Result<ManeuverOutcome> {
    let plan = plan_lane_change(world.ego(), decision, world.lanes(), world.scenario.ego_target_speed, config);
    let mut pid = PidPair::default();
    let mut reward = RewardBreakdown::default();
    let mut events = Vec::new();
    let mut trace = Vec::new();
    let mut arrived = false;
    let goal = plan.final_waypoint();
    for _ in 0..config.max_steps {
        if world.status.is_terminal() {
            break;
        }
        let ego = world.ego().clone();
        let target = plan.lookahead_point(ego.x, ego.y, config.pursuit_distance);
        let steer = pid_lateral(&mut pid.lateral, &config.lateral, &ego, target);
        let (throttle, brake) = pid_longitudinal(&mut pid.longitudinal, &config.longitudinal, ego.speed, plan.target_speed);
        let command = ControlCommand { throttle, brake, steer };
        let prev = world.clone();
        let step_events = world.step(command)?;
        reward.accumulate(&compute_reward(&prev, world, &step_events));
        observe(world);
        let now = world.ego();
        trace.push(TraceStep {
            time_step: world.time_step,
            x: now.x,
            y: now.y,
            heading: now.heading,
            speed: now.speed,
            command,
        });
        events.extend(step_events);
        if (now.x - goal[0]).hypot(now.y - goal[1]) <= plan.arrival_radius || now.x > goal[0] {
            arrived = true;
            break;
        }
    }
    Ok(ManeuverOutcome { plan, reward, events, trace, status: world.status, arrived })
}

#[cfg(test)]
mod tests;
