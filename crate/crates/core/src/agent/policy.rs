use super::{input_scale, HybridState, Variant, ACTIONS, CURRENT_WIDTH, PREDICTION_WIDTH};
use crate::error::{contract, shape_err, Result};
use crate::gradcore::{Bound, Dense, ParamSet, Tape, Tensor, Var};
use crate::gridenc::{EncoderConfig, GridEncoder, FEATURE_WIDTH};
use crate::percept::SemanticGrid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Raw inputs of one decision. The grid stays raw so the encoder can be
/// trained through it at update time.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub prediction: Option<[f64; PREDICTION_WIDTH]>,
    pub grid: Option<Arc<SemanticGrid>>,
    pub current: [f64; CURRENT_WIDTH],
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    pub probs: [f64; ACTIONS],
    pub value: f64,
    pub state: HybridState,
}

/// Separate tanh MLP actor and critic over the variant's state, plus the
/// grid encoder for variants that see the grid. All weights live in one
/// [`ParamSet`].
#[derive(Clone, Debug)]
pub struct ActorCritic {
    pub variant: Variant,
    pub params: ParamSet,
    encoder: Option<GridEncoder>,
    actor: [Dense; 3],
    critic: [Dense; 3],
    scale: Vec<f64>,
}

impl ActorCritic {
    pub fn new(variant: Variant, hidden: usize, grid: EncoderConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let encoder = if variant.uses_grid() {
            Some(GridEncoder::new(grid, &mut params, "encoder", &mut rng)?)
        } else {
            None
        };
        let w = variant.state_width();
        let actor = [
            Dense::new(&mut params, "actor.0", w, hidden, &mut rng),
            Dense::new(&mut params, "actor.1", hidden, hidden, &mut rng),
            Dense::new(&mut params, "actor.out", hidden, ACTIONS, &mut rng),
        ];
        let critic = [
            Dense::new(&mut params, "critic.0", w, hidden, &mut rng),
            Dense::new(&mut params, "critic.1", hidden, hidden, &mut rng),
            Dense::new(&mut params, "critic.out", hidden, 1, &mut rng),
        ];
        // Near-uniform initial policy.
        for v in params.get_mut(actor[2].weight).data_mut() {
            *v *= 0.01;
        }
        Ok(Self { variant, params, encoder, actor, critic, scale: input_scale(variant) })
    }

    pub fn state_width(&self) -> usize {
        self.variant.state_width()
    }

    pub fn encoder(&self) -> Option<&GridEncoder> {
        self.encoder.as_ref()
    }

    fn mlp(&self, tape: &mut Tape, bound: &Bound, layers: &[Dense; 3], x: Var) -> Result<Var> {
        let mut h = x;
        for layer in &layers[..2] {
            h = layer.forward(tape, bound, h)?;
            h = tape.tanh(h);
        }
        layers[2].forward(tape, bound, h)
    }

    /// Logits `[n, 3]` and values `[n, 1]` for assembled states `[n, w]`.
    pub fn forward_states(&self, tape: &mut Tape, bound: &Bound, states: Var) -> Result<(Var, Var)> {
        let (n, w) = tape.value(states).dims2()?;
        if w != self.state_width() {
            return shape_err(format!("{} policy expects state width {}, got {w}", self.variant, self.state_width()));
        }
        let scale: Vec<f64> = (0..n).flat_map(|_| self.scale.iter().copied()).collect();
        let scale = tape.constant(Tensor::new(vec![n, w], scale)?);
        let x = tape.mul(states, scale)?;
        let logits = self.mlp(tape, bound, &self.actor, x)?;
        let value = self.mlp(tape, bound, &self.critic, x)?;
        Ok((logits, value))
    }

    fn check_observation(&self, obs: &Observation) -> Result<()> {
        if self.variant.uses_prediction() && obs.prediction.is_none() {
            return contract(format!("{} policy needs the prediction block", self.variant));
        }
        if self.variant.uses_grid() && obs.grid.is_none() {
            return contract(format!("{} policy needs the grid", self.variant));
        }
        Ok(())
    }

    fn fixed_row(&self, obs: &Observation, grid_feature: Option<&[f64; FEATURE_WIDTH]>) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.state_width());
        if self.variant.uses_prediction() {
            row.extend_from_slice(obs.prediction.as_ref().expect("checked"));
        }
        if let Some(g) = grid_feature {
            row.extend_from_slice(g);
        }
        row.extend_from_slice(&obs.current);
        row
    }

    /// Assembled states `[n, w]` on the tape; grid blocks are produced by the
    /// encoder so gradients reach it.
    pub fn state_var(&self, tape: &mut Tape, bound: &Bound, obs: &[&Observation]) -> Result<Var> {
        if obs.is_empty() {
            return contract("state_var needs at least one observation");
        }
        for o in obs {
            self.check_observation(o)?;
        }
        let Some(encoder) = &self.encoder else {
            let data: Vec<f64> = obs.iter().flat_map(|o| self.fixed_row(o, None)).collect();
            return Ok(tape.constant(Tensor::new(vec![obs.len(), self.state_width()], data)?));
        };
        let mut rows = Vec::with_capacity(obs.len());
        for o in obs {
            let grid = tape.constant(o.grid.as_ref().expect("checked").one_hot());
            let feature = encoder.forward(tape, bound, grid)?;
            let mut parts = Vec::with_capacity(3);
            if let Some(p) = &o.prediction {
                parts.push(tape.constant(Tensor::new(vec![1, PREDICTION_WIDTH], p.to_vec())?));
            }
            parts.push(feature);
            parts.push(tape.constant(Tensor::new(vec![1, CURRENT_WIDTH], o.current.to_vec())?));
            rows.push(tape.concat(&parts, 1)?);
        }
        tape.concat(&rows, 0)
    }

    /// Greedy-free evaluation of one observation under the current weights.
    pub fn act(&self, obs: &Observation) -> Result<PolicyOutput> {
        self.check_observation(obs)?;
        let feature = match (&self.encoder, &obs.grid) {
            (Some(enc), Some(grid)) => Some(enc.encode_tensor(&self.params, &grid.one_hot())?),
            _ => None,
        };
        let state = HybridState { variant: self.variant, values: self.fixed_row(obs, feature.as_ref()) };
        let (probs, value) = policy_value_forward(self, &state)?;
        Ok(PolicyOutput { probs, value, state })
    }

    pub fn value_of(&self, obs: &Observation) -> Result<f64> {
        Ok(self.act(obs)?.value)
    }
}

/// Action probabilities and state value for an assembled state.
pub fn policy_value_forward(model: &ActorCritic, state: &HybridState) -> Result<([f64; ACTIONS], f64)> {
    if state.variant != model.variant || state.width() != model.state_width() {
        return shape_err(format!(
            "{} policy expects state width {}, got {} state of width {}",
            model.variant,
            model.state_width(),
            state.variant,
            state.width()
        ));
    }
    let mut tape = Tape::new();
    let bound = model.params.bind_frozen(&mut tape);
    let x = tape.constant(Tensor::new(vec![1, state.width()], state.values.clone())?);
    let (logits, value) = model.forward_states(&mut tape, &bound, x)?;
    let probs = tape.softmax(logits, 1)?;
    let mut p = [0.0; ACTIONS];
    p.copy_from_slice(tape.value(probs).data());
    Ok((p, tape.value(value).item()))
}
