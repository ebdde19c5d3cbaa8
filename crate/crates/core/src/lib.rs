//! Lane-change decision learning on a deterministic highway simulator.
//!
//! The pipeline: [`trafficsim`] produces worlds, [`percept`] turns them into
//! sensor rows, position histories and semantic rasters, [`forecast`]
//! predicts neighbor trajectories, [`gridenc`] compresses the raster,
//! [`agent`] decides lane changes with PPO, [`pilot`] executes them under
//! PID control, and [`harness`] runs training, evaluation and ablations.

pub mod agent;
pub mod error;
pub mod forecast;
pub mod gradcore;
pub mod gridenc;
pub mod harness;
pub mod percept;
pub mod pilot;
pub mod trafficsim;

pub use error::{Error, Result};
