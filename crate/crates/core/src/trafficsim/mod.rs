//! Deterministic straight-highway world: kinematic-bicycle vehicles,
//! IDM surrounding traffic, collision and off-road detection, reward and
//! episode lifecycle.

mod config;
pub mod geometry;
mod traffic;

pub use config::{Dynamics, IdmParams, LaneSpec, ScenarioConfig};
pub use geometry::OrientedRect;
pub use traffic::{idm_acceleration, leader_of, surrounding_policy};

use crate::error::{contract, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Reward for a collision involving the ego.
pub const COLLISION_REWARD: f64 = -500.0;
/// Reward per step with any ego corner outside the drivable area.
pub const OUT_OF_ROAD_REWARD: f64 = -10.0;
/// Route fractions at which progress bonuses are paid.
pub const MILESTONE_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
/// Bonus paid at each milestone; the last one is the destination.
pub const MILESTONE_REWARDS: [f64; 4] = [100.0, 150.0, 200.0, 1000.0];

/// Low-level actuation: throttle and brake are never both non-zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub throttle: f64,
    pub brake: f64,
    pub steer: f64,
}

impl ControlCommand {
    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.throttle)
            && (0.0..=1.0).contains(&self.brake)
            && (-1.0..=1.0).contains(&self.steer)
            && self.throttle * self.brake == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
    pub is_ego: bool,
}

impl VehicleState {
    pub fn footprint(&self) -> OrientedRect {
        OrientedRect { x: self.x, y: self.y, heading: self.heading, length: self.length, width: self.width }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    Success,
    Collision,
    OffRoadTerminal,
    Timeout,
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Running
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Collision { other: usize },
    OffRoad,
    Milestone { index: usize },
    Destination,
    Timeout,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_collide: f64,
    pub r_out_road: f64,
    pub r_go_forward: f64,
    pub r_success: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn new(r_collide: f64, r_out_road: f64, r_go_forward: f64, r_success: f64) -> Self {
        Self { r_collide, r_out_road, r_go_forward, r_success, total: r_collide + r_out_road + r_go_forward + r_success }
    }

    /// Component-wise accumulation; `total` stays the exact sum of the
    /// accumulated components.
    pub fn accumulate(&mut self, other: &RewardBreakdown) {
        *self = Self::new(
            self.r_collide + other.r_collide,
            self.r_out_road + other.r_out_road,
            self.r_go_forward + other.r_go_forward,
            self.r_success + other.r_success,
        );
    }
}

/// Full simulator snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub time_step: u64,
    pub dt: f64,
    pub vehicles: Vec<VehicleState>,
    pub ego_id: usize,
    pub milestone_flags: [bool; 4],
    pub rng: ChaCha8Rng,
    pub status: EpisodeStatus,
    pub scenario: ScenarioConfig,
}

impl WorldState {
    /// Spawns the ego at the route start and places surrounding vehicles at
    /// seeded random lanes and positions, keeping same-lane bumper gaps of at
    /// least two vehicle lengths.
    pub fn reset(scenario: &ScenarioConfig, seed: u64) -> Result<Self> {
        scenario.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lanes = scenario.lanes;
        let ego = VehicleState {
            id: 0,
            x: 0.0,
            y: lanes.lane_center(scenario.ego_lane as i64),
            heading: 0.0,
            speed: 0.0,
            length: scenario.vehicle_length,
            width: scenario.vehicle_width,
            is_ego: true,
        };
        let mut vehicles = vec![ego];
        let min_center_gap = 3.0 * scenario.vehicle_length;
        let max_attempts = 200 * (scenario.npc_count + 1);
        let mut attempts = 0;
        while vehicles.len() < scenario.npc_count + 1 {
            if attempts >= max_attempts {
                return Err(Error::Placement { requested: scenario.npc_count, placed: vehicles.len() - 1 });
            }
            attempts += 1;
            let lane = rng.gen_range(0..lanes.lane_count) as i64;
            let x = rng.gen_range(0.0..scenario.npc_spawn_length);
            let y = lanes.lane_center(lane);
            let clear = vehicles
                .iter()
                .all(|v| lanes.lane_index(v.y) != lane || (v.x - x).abs() >= min_center_gap);
            if clear {
                vehicles.push(VehicleState {
                    id: vehicles.len(),
                    x,
                    y,
                    heading: 0.0,
                    speed: scenario.cycle_speed,
                    length: scenario.vehicle_length,
                    width: scenario.vehicle_width,
                    is_ego: false,
                });
            }
        }
        Ok(Self {
            time_step: 0,
            dt: scenario.dt,
            vehicles,
            ego_id: 0,
            milestone_flags: [false; 4],
            rng,
            status: EpisodeStatus::Running,
            scenario: scenario.clone(),
        })
    }

    pub fn lanes(&self) -> &LaneSpec {
        &self.scenario.lanes
    }

    pub fn vehicle(&self, id: usize) -> Option<&VehicleState> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn ego(&self) -> &VehicleState {
        self.vehicle(self.ego_id).expect("ego present")
    }

    fn ego_mut(&mut self) -> &mut VehicleState {
        let id = self.ego_id;
        self.vehicles.iter_mut().find(|v| v.id == id).expect("ego present")
    }

    pub fn npcs(&self) -> impl Iterator<Item = &VehicleState> {
        self.vehicles.iter().filter(|v| !v.is_ego)
    }

    /// Advances every vehicle by one `dt`. The ego follows `ego_cmd`;
    /// surrounding vehicles follow [`surrounding_policy`] evaluated on the
    /// pre-step world.
    pub fn step(&mut self, ego_cmd: ControlCommand) -> Result<Vec<Event>> {
        if self.status.is_terminal() {
            return contract(format!("step called on a terminal world ({:?})", self.status));
        }
        let commands: Vec<ControlCommand> = self
            .vehicles
            .iter()
            .map(|v| if v.is_ego { ego_cmd } else { surrounding_policy(self, v.id) })
            .collect();
        let (dynamics, dt) = (self.scenario.dynamics, self.dt);
        for (v, cmd) in self.vehicles.iter_mut().zip(&commands) {
            integrate(v, cmd, &dynamics, dt);
        }
        self.time_step += 1;

        let mut events = Vec::new();
        for (a, b) in detect_collision(self) {
            if a == self.ego_id {
                events.push(Event::Collision { other: b });
            } else if b == self.ego_id {
                events.push(Event::Collision { other: a });
            }
        }
        let ego = self.ego().clone();
        let lanes = *self.lanes();
        if ego.footprint().corners().iter().any(|c| !lanes.on_road(c[1])) {
            events.push(Event::OffRoad);
        }
        let progress = ego.x / lanes.road_length;
        for k in 0..MILESTONE_FRACTIONS.len() {
            if !self.milestone_flags[k] && progress >= MILESTONE_FRACTIONS[k] {
                self.milestone_flags[k] = true;
                events.push(if k == MILESTONE_FRACTIONS.len() - 1 {
                    Event::Destination
                } else {
                    Event::Milestone { index: k }
                });
            }
        }
        self.status = episode_status(self, self.scenario.max_steps, &events);
        if self.status == EpisodeStatus::Timeout {
            events.push(Event::Timeout);
        }
        Ok(events)
    }

    /// Ego pose override, used by tests and scripted scenarios.
    pub fn place_ego(&mut self, x: f64, y: f64, heading: f64, speed: f64) {
        let e = self.ego_mut();
        e.x = x;
        e.y = y;
        e.heading = heading;
        e.speed = speed;
    }
}

/// Kinematic bicycle step with trapezoidal speed integration.
pub fn integrate(v: &mut VehicleState, cmd: &ControlCommand, dynamics: &Dynamics, dt: f64) {
    let accel = cmd.throttle * dynamics.max_accel - cmd.brake * dynamics.max_brake;
    let v0 = v.speed;
    let v1 = (v0 + accel * dt).max(0.0);
    let mean_speed = 0.5 * (v0 + v1);
    let steer_angle = cmd.steer.clamp(-1.0, 1.0) * dynamics.max_steer;
    let yaw_rate = mean_speed / dynamics.wheelbase * steer_angle.tan();
    let h0 = v.heading;
    let h1 = h0 + yaw_rate * dt;
    let mid = 0.5 * (h0 + h1);
    v.x += mean_speed * mid.cos() * dt;
    v.y += mean_speed * mid.sin() * dt;
    v.heading = h1;
    v.speed = v1;
}

/// Every overlapping pair `(i, j)` with `i < j` by vehicle id.
pub fn detect_collision(world: &WorldState) -> Vec<(usize, usize)> {
    let rects: Vec<(usize, OrientedRect)> = world.vehicles.iter().map(|v| (v.id, v.footprint())).collect();
    let mut pairs = Vec::new();
    for (i, (ia, ra)) in rects.iter().enumerate() {
        for (ib, rb) in &rects[i + 1..] {
            // Cheap reject on center distance before the exact test.
            let reach = 0.5 * (ra.length.hypot(ra.width) + rb.length.hypot(rb.width));
            if (ra.x - rb.x).hypot(ra.y - rb.y) > reach {
                continue;
            }
            if ra.overlaps(rb) {
                pairs.push(((*ia).min(*ib), (*ia).max(*ib)));
            }
        }
    }
    pairs
}

/// Reward for the transition `prev -> next` given the step's events.
pub fn compute_reward(prev: &WorldState, next: &WorldState, events: &[Event]) -> RewardBreakdown {
    let collide = events.iter().any(|e| matches!(e, Event::Collision { .. }));
    let off_road = events.contains(&Event::OffRoad);
    let success: f64 = events
        .iter()
        .map(|e| match e {
            Event::Milestone { index } => MILESTONE_REWARDS[*index],
            Event::Destination => MILESTONE_REWARDS[3],
            _ => 0.0,
        })
        .sum();
    RewardBreakdown::new(
        if collide { COLLISION_REWARD } else { 0.0 },
        if off_road { OUT_OF_ROAD_REWARD } else { 0.0 },
        next.ego().x - prev.ego().x,
        success,
    )
}

/// Status implied by the world and the latest events, checked in priority
/// order collision, off-road, destination, timeout.
pub fn episode_status(world: &WorldState, max_steps: u64, events: &[Event]) -> EpisodeStatus {
    if world.status.is_terminal() {
        return world.status;
    }
    let ego = world.ego();
    let lanes = world.lanes();
    if events.iter().any(|e| matches!(e, Event::Collision { .. })) {
        EpisodeStatus::Collision
    } else if !lanes.on_road(ego.y) {
        EpisodeStatus::OffRoadTerminal
    } else if ego.x >= lanes.road_length {
        EpisodeStatus::Success
    } else if world.time_step >= max_steps {
        EpisodeStatus::Timeout
    } else {
        EpisodeStatus::Running
    }
}

#[cfg(test)]
mod tests;
