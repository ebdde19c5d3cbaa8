use crate::error::{Error, Result};
use crate::gradcore::Tensor;
use crate::trafficsim::{geometry::heading_axes, WorldState};
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Semantic classes in painter's order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellClass {
    OffRoad = 0,
    Road = 1,
    LaneMarking = 2,
    Npc = 3,
    Ego = 4,
}

pub const CLASS_COUNT: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    /// Meters per cell edge.
    pub cell_size: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { height: 64, width: 64, cell_size: 0.5 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || !(self.cell_size > 0.0) {
            return Err(Error::Config(format!("invalid grid spec {self:?}")));
        }
        Ok(())
    }

    /// Ego-frame `(forward, left)` coordinates of the center of cell `(row, col)`.
    /// Row 0 is the far-forward edge; column 0 is the far-left edge.
    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        let forward = (self.height as f64 / 2.0 - row as f64 - 0.5) * self.cell_size;
        let left = (self.width as f64 / 2.0 - col as f64 - 0.5) * self.cell_size;
        [forward, left]
    }
}

/// Ego-centered class raster, forward = up.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SemanticGrid {
    pub height: usize,
    pub width: usize,
    pub classes: Vec<u8>,
}

impl SemanticGrid {
    pub fn class_at(&self, row: usize, col: usize) -> u8 {
        self.classes[row * self.width + col]
    }

    pub fn count(&self, class: CellClass) -> usize {
        self.classes.iter().filter(|&&c| c == class as u8).count()
    }

    /// One-hot planes, shape `[5, height, width]`.
    pub fn one_hot(&self) -> Tensor {
        let plane = self.height * self.width;
        let mut data = vec![0.0; CLASS_COUNT * plane];
        for (i, &c) in self.classes.iter().enumerate() {
            data[c as usize * plane + i] = 1.0;
        }
        Tensor::new(vec![CLASS_COUNT, self.height, self.width], data).expect("grid shape")
    }

    /// Plain-text graymap (`P2`), one class index per cell.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n{}\n", self.width, self.height, CLASS_COUNT - 1);
        for row in self.classes.chunks(self.width) {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            writeln!(out, "{}", line.join(" ")).expect("string write");
        }
        out
    }
}

/// Rasterizes the world around the ego. A cell takes the class of whatever
/// covers its center, later classes overwriting earlier ones.
pub fn render_semantic_grid(world: &WorldState, spec: &GridSpec) -> Result<SemanticGrid> {
    spec.validate()?;
    let ego = world.ego();
    let lanes = world.lanes();
    let (fwd, left) = heading_axes(ego.heading);
    let half_extent = 0.5 * (spec.height.max(spec.width) as f64) * spec.cell_size * std::f64::consts::SQRT_2;
    let nearby: Vec<_> = world
        .npcs()
        .filter(|v| (v.x - ego.x).hypot(v.y - ego.y) <= half_extent + v.length.hypot(v.width))
        .map(|v| v.footprint())
        .collect();
    let ego_rect = ego.footprint();
    let mut classes = vec![CellClass::OffRoad as u8; spec.height * spec.width];
    for row in 0..spec.height {
        for col in 0..spec.width {
            let [f, l] = spec.cell_center(row, col);
            let p = [ego.x + f * fwd[0] + l * left[0], ego.y + f * fwd[1] + l * left[1]];
            let mut class = CellClass::OffRoad;
            if lanes.on_road(p[1]) {
                class = CellClass::Road;
                let near_line = (0..=lanes.lane_count)
                    .any(|k| (p[1] - k as f64 * lanes.lane_width).abs() < spec.cell_size / 2.0);
                if near_line {
                    class = CellClass::LaneMarking;
                }
            }
            if nearby.iter().any(|r| r.contains(p)) {
                class = CellClass::Npc;
            }
            if ego_rect.contains(p) {
                class = CellClass::Ego;
            }
            classes[row * spec.width + col] = class as u8;
        }
    }
    Ok(SemanticGrid { height: spec.height, width: spec.width, classes })
}
