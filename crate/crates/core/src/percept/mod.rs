//! Observation streams: current sensor rows for the ego and its nearest
//! neighbors, a short position history, and an ego-centered semantic raster.

mod grid;
mod history;
mod sensors;

pub use grid::{render_semantic_grid, CellClass, GridSpec, SemanticGrid, CLASS_COUNT};
pub use history::{push_history, HistoryBuffer, HistoryStep, HISTORY_LEN};
pub use sensors::{
    nearest_neighbors, sensor_rows, to_ego_frame, SensorMatrix, SensorRow, NEIGHBORS, ROW_WIDTH, SENSOR_ROWS,
};
