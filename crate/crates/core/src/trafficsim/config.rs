use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Straight multi-lane road. Lane 0 is the rightmost; `y = 0` is the right edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneSpec {
    pub lane_count: usize,
    pub lane_width: f64,
    /// Route distance from the start line to the destination.
    pub road_length: f64,
}

impl LaneSpec {
    pub fn road_width(&self) -> f64 {
        self.lane_count as f64 * self.lane_width
    }

    /// Center line of lane `index`; indices outside the road are allowed.
    pub fn lane_center(&self, index: i64) -> f64 {
        (index as f64 + 0.5) * self.lane_width
    }

    /// Lane index containing lateral position `y` (may be out of range).
    pub fn lane_index(&self, y: f64) -> i64 {
        (y / self.lane_width).floor() as i64
    }

    /// Lane containing `y`, clamped to the road.
    pub fn nearest_lane(&self, y: f64) -> usize {
        self.lane_index(y).clamp(0, self.lane_count as i64 - 1) as usize
    }

    pub fn on_road(&self, y: f64) -> bool {
        (0.0..=self.road_width()).contains(&y)
    }
}

/// Kinematic-bicycle limits shared by every vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dynamics {
    pub wheelbase: f64,
    pub max_accel: f64,
    pub max_brake: f64,
    /// Radians.
    pub max_steer: f64,
}

impl Default for Dynamics {
    fn default() -> Self {
        Self { wheelbase: 2.5, max_accel: 3.0, max_brake: 6.0, max_steer: 35f64.to_radians() }
    }
}

/// Intelligent Driver Model parameters for surrounding traffic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    pub time_headway: f64,
    pub min_gap: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub exponent: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self { time_headway: 1.5, min_gap: 2.0, max_accel: 1.5, comfortable_decel: 2.0, exponent: 4.0 }
    }
}

/// Everything needed to build and advance a world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub lanes: LaneSpec,
    pub npc_count: usize,
    /// Surrounding-vehicle cruise speed, m/s (24 km/h).
    pub cycle_speed: f64,
    /// Ego cruise speed handed to the pilot, m/s (30 km/h).
    pub ego_target_speed: f64,
    pub max_steps: u64,
    pub dt: f64,
    pub ego_lane: usize,
    /// Surrounding vehicles spawn with their centers in `[0, npc_spawn_length)`.
    pub npc_spawn_length: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub dynamics: Dynamics,
    pub idm: IdmParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            lanes: LaneSpec { lane_count: 4, lane_width: 3.5, road_length: 500.0 },
            npc_count: 12,
            cycle_speed: 24.0 / 3.6,
            ego_target_speed: 30.0 / 3.6,
            max_steps: 1200,
            dt: 0.1,
            ego_lane: 1,
            npc_spawn_length: 300.0,
            vehicle_length: 4.5,
            vehicle_width: 2.0,
            dynamics: Dynamics::default(),
            idm: IdmParams::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        let l = &self.lanes;
        if l.lane_count < 2 {
            return fail(format!("lane_count must be >= 2, got {}", l.lane_count));
        }
        if !(l.lane_width > self.vehicle_width) {
            return fail(format!("lane_width {} must exceed vehicle width {}", l.lane_width, self.vehicle_width));
        }
        if !(l.road_length > 0.0) {
            return fail(format!("road_length must be positive, got {}", l.road_length));
        }
        if !(self.dt > 0.0) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if self.ego_lane >= l.lane_count {
            return fail(format!("ego_lane {} outside {} lanes", self.ego_lane, l.lane_count));
        }
        if !(self.vehicle_length > 0.0 && self.vehicle_width > 0.0) {
            return fail("vehicle dimensions must be positive".into());
        }
        if !(self.cycle_speed >= 0.0 && self.ego_target_speed >= 0.0) {
            return fail("speeds must be non-negative".into());
        }
        if !(self.npc_spawn_length > 0.0) {
            return fail("npc_spawn_length must be positive".into());
        }
        if self.max_steps == 0 {
            return fail("max_steps must be >= 1".into());
        }
        Ok(())
    }
}
