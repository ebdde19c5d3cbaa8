//! PPO lane-change decision maker: state assembly for the four ablation
//! variants, the actor-critic networks, action sampling, advantage
//! estimation and the clipped-surrogate update.

mod policy;
mod ppo;

pub use policy::{policy_value_forward, ActorCritic, Observation, PolicyOutput};
pub use ppo::{
    clipped_surrogate_term, gae_advantages, policy_gradient_objective, ppo_update, sample_action,
    surrogate_objective, Advantages, RolloutBuffer, Transition, UpdateStats,
};

use crate::error::{contract, Error, Result};
use crate::gridenc::FEATURE_WIDTH;
use crate::percept::{SensorMatrix, NEIGHBORS, ROW_WIDTH, SENSOR_ROWS};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const PREDICTION_WIDTH: usize = NEIGHBORS * 2;
pub const CURRENT_WIDTH: usize = SENSOR_ROWS * ROW_WIDTH;
pub const ACTIONS: usize = 3;

/// Discrete lane-change decision. Lanes are counted from the right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    /// a0
    ChangeRight,
    /// a1
    Keep,
    /// a2
    ChangeLeft,
}

impl Decision {
    pub const ALL: [Decision; ACTIONS] = [Decision::ChangeRight, Decision::Keep, Decision::ChangeLeft];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Lane index change produced by the decision.
    pub fn lane_delta(self) -> i64 {
        self as i64 - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Pure,
    Image,
    Prediction,
    Hybrid,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Pure, Variant::Image, Variant::Prediction, Variant::Hybrid];

    pub fn uses_prediction(self) -> bool {
        matches!(self, Self::Prediction | Self::Hybrid)
    }

    pub fn uses_grid(self) -> bool {
        matches!(self, Self::Image | Self::Hybrid)
    }

    pub fn state_width(self) -> usize {
        CURRENT_WIDTH
            + if self.uses_prediction() { PREDICTION_WIDTH } else { 0 }
            + if self.uses_grid() { FEATURE_WIDTH } else { 0 }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pure => "pure",
            Self::Image => "image",
            Self::Prediction => "prediction",
            Self::Hybrid => "hybrid",
        }
    }

    /// Row label used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            Self::Pure => "Pure PPO",
            Self::Image => "Image-PPO",
            Self::Prediction => "Prediction-PPO",
            Self::Hybrid => "Hybrid-PPO",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}` (expected pure, image, prediction or hybrid)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub clip: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    pub update_period: usize,
    pub epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub hidden: usize,
    pub max_grad_norm: f64,
    /// Multiplies environment rewards before advantage estimation.
    pub reward_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            clip: 0.2,
            lambda: 0.95,
            learning_rate: 3e-4,
            buffer_capacity: 2048,
            update_period: 8,
            epochs: 4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            hidden: 128,
            max_grad_norm: 0.5,
            reward_scale: 0.01,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::Config(what.to_string())) };
        check(self.gamma > 0.0 && self.gamma <= 1.0, "agent.gamma must lie in (0, 1]")?;
        check(self.clip > 0.0 && self.clip < 1.0, "agent.clip must lie in (0, 1)")?;
        check((0.0..=1.0).contains(&self.lambda), "agent.lambda must lie in [0, 1]")?;
        check(self.learning_rate > 0.0, "agent.learning_rate must be positive")?;
        check(self.update_period >= 1, "agent.update_period must be at least 1")?;
        check(self.buffer_capacity >= self.update_period, "agent.buffer_capacity must hold one update window")?;
        check(self.epochs >= 1, "agent.epochs must be at least 1")?;
        check(self.hidden >= 1, "agent.hidden must be at least 1")?;
        check(self.max_grad_norm > 0.0, "agent.max_grad_norm must be positive")?;
        check(self.reward_scale > 0.0, "agent.reward_scale must be positive")
    }
}

/// Flat policy input laid out as `[prediction | grid | current]`, blocks
/// present according to the variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub variant: Variant,
    pub values: Vec<f64>,
}

impl HybridState {
    pub fn zeros(variant: Variant) -> Self {
        Self { variant, values: vec![0.0; variant.state_width()] }
    }

    pub fn width(&self) -> usize {
        self.values.len()
    }
}

pub fn assemble_state(
    variant: Variant,
    prediction: Option<&[f64; PREDICTION_WIDTH]>,
    grid_feature: Option<&[f64; FEATURE_WIDTH]>,
    sensors: &SensorMatrix,
) -> Result<HybridState> {
    let mut values = Vec::with_capacity(variant.state_width());
    if variant.uses_prediction() {
        let Some(p) = prediction else {
            return contract(format!("{variant} state needs the prediction block"));
        };
        values.extend_from_slice(p);
    }
    if variant.uses_grid() {
        let Some(g) = grid_feature else {
            return contract(format!("{variant} state needs the grid block"));
        };
        values.extend_from_slice(g);
    }
    values.extend(sensors.rows.iter().flatten());
    Ok(HybridState { variant, values })
}

/// Fixed per-column input scaling applied inside the networks so that
/// distances, speeds and flags enter at comparable magnitudes.
pub fn input_scale(variant: Variant) -> Vec<f64> {
    const ROW: [f64; ROW_WIDTH] = [1.0 / 50.0, 1.0 / 10.0, 1.0, 1.0, 1.0 / 10.0, 0.5, 0.5, 1.0 / 10.0, 1.0 / 5.0, 1.0];
    let mut s = Vec::with_capacity(variant.state_width());
    if variant.uses_prediction() {
        for _ in 0..NEIGHBORS {
            s.extend([1.0 / 50.0, 1.0 / 10.0]);
        }
    }
    if variant.uses_grid() {
        s.extend([1.0; FEATURE_WIDTH]);
    }
    for _ in 0..SENSOR_ROWS {
        s.extend(ROW);
    }
    s
}
