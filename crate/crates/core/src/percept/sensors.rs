use crate::trafficsim::{VehicleState, WorldState};
use serde::{Deserialize, Serialize};

/// Number of surrounding vehicles observed.
pub const NEIGHBORS: usize = 8;
/// Reals per sensor row.
pub const ROW_WIDTH: usize = 10;
/// Ego row plus one row per neighbor.
pub const SENSOR_ROWS: usize = NEIGHBORS + 1;

/// `[x_rel, y_rel, sin(h_rel), cos(h_rel), speed, lane_offset,
/// lateral_offset_in_lane, v_long, v_lat, valid]`.
///
/// Neighbor rows are expressed in the ego frame (forward = +x, left = +y)
/// with velocities relative to the ego. The ego row carries its heading and
/// velocity relative to the road axis.
pub type SensorRow = [f64; ROW_WIDTH];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorMatrix {
    pub rows: [SensorRow; SENSOR_ROWS],
}

impl SensorMatrix {
    pub fn flatten(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }

    pub fn neighbor_distance(&self, row: usize) -> f64 {
        self.rows[row][0].hypot(self.rows[row][1])
    }
}

/// Non-ego vehicle ids ordered by distance to the ego, ties by lower id.
pub fn nearest_neighbors(world: &WorldState, k: usize) -> Vec<usize> {
    let ego = world.ego();
    let mut others: Vec<(f64, usize)> = world
        .npcs()
        .map(|v| ((v.x - ego.x).hypot(v.y - ego.y), v.id))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(k).map(|(_, id)| id).collect()
}

/// World point expressed in the frame of `pose` (forward = +x, left = +y).
pub fn to_ego_frame(pose: &VehicleState, x: f64, y: f64) -> [f64; 2] {
    let (s, c) = pose.heading.sin_cos();
    let (dx, dy) = (x - pose.x, y - pose.y);
    [dx * c + dy * s, -dx * s + dy * c]
}

fn lane_fields(world: &WorldState, v: &VehicleState) -> (i64, f64) {
    let lanes = world.lanes();
    let lane = lanes.lane_index(v.y);
    (lane, v.y - lanes.lane_center(lane))
}

pub fn sensor_rows(world: &WorldState, neighbor_ids: &[usize]) -> SensorMatrix {
    let ego = world.ego();
    let (ego_lane, ego_lat) = lane_fields(world, ego);
    let (hs, hc) = ego.heading.sin_cos();
    let mut rows = [[0.0; ROW_WIDTH]; SENSOR_ROWS];
    rows[0] = [0.0, 0.0, hs, hc, ego.speed, 0.0, ego_lat, ego.speed * hc, ego.speed * hs, 1.0];
    let ego_vel = [ego.speed * hc, ego.speed * hs];
    for (row, id) in rows[1..].iter_mut().zip(neighbor_ids) {
        let Some(v) = world.vehicle(*id) else { continue };
        let [xr, yr] = to_ego_frame(ego, v.x, v.y);
        let rel_heading = v.heading - ego.heading;
        let (rs, rc) = rel_heading.sin_cos();
        let (lane, lat) = lane_fields(world, v);
        let (vs, vc) = v.heading.sin_cos();
        let dv = [v.speed * vc - ego_vel[0], v.speed * vs - ego_vel[1]];
        let v_long = dv[0] * hc + dv[1] * hs;
        let v_lat = -dv[0] * hs + dv[1] * hc;
        *row = [xr, yr, rs, rc, v.speed, (lane - ego_lane) as f64, lat, v_long, v_lat, 1.0];
    }
    SensorMatrix { rows }
}
