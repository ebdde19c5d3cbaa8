use super::logs::{hash_hex, DecisionRecord, EpisodeLog, UpdateRecord};
use crate::agent::{
    ppo_update, sample_action, ActorCritic, AgentConfig, Decision, Observation, RolloutBuffer, Transition, Variant,
    ACTIONS, CURRENT_WIDTH, PREDICTION_WIDTH,
};
use crate::error::{Error, Result};
use crate::forecast::{predict_future, NeighborHistory, Predictor, HISTORY_LEN};
use crate::gradcore::Adam;
use crate::percept::{
    nearest_neighbors, render_semantic_grid, sensor_rows, to_ego_frame, GridSpec, HistoryBuffer, NEIGHBORS,
};
use crate::pilot::{execute_decision, execute_decision_observed, PilotConfig};
use crate::trafficsim::{EpisodeStatus, ScenarioConfig, WorldState};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Scenario seed of episode `index` under `master`.
pub fn episode_seed(master: u64, index: usize) -> u64 {
    mix64(mix64(master) ^ index as u64)
}

/// What the agent perceives and how observations are built.
#[derive(Clone, Copy, Debug)]
pub struct Perception<'a> {
    pub variant: Variant,
    pub grid: &'a GridSpec,
    pub predictor: Option<&'a Predictor>,
}

impl Perception<'_> {
    pub fn check(&self) -> Result<()> {
        if self.variant.uses_prediction() && self.predictor.is_none() {
            return Err(Error::Config(format!("variant {} needs a trained predictor", self.variant)));
        }
        Ok(())
    }

    pub fn observe(&self, world: &WorldState, history: &HistoryBuffer) -> Result<Observation> {
        let ids = nearest_neighbors(world, NEIGHBORS);
        let sensors = sensor_rows(world, &ids);
        let mut current = [0.0; CURRENT_WIDTH];
        current.copy_from_slice(&sensors.flatten());
        let prediction = match (self.variant.uses_prediction(), self.predictor) {
            (false, _) => None,
            (true, None) => return Err(Error::Config(format!("variant {} needs a trained predictor", self.variant))),
            (true, Some(model)) => Some(predicted_block(model, world, history, &ids)?),
        };
        let grid = if self.variant.uses_grid() {
            Some(Arc::new(render_semantic_grid(world, self.grid)?))
        } else {
            None
        };
        Ok(Observation { prediction, grid, current })
    }
}

/// Ego-frame position of each neighbor 10 steps ahead; zeros for empty
/// neighbor slots.
pub fn predicted_block(
    model: &Predictor,
    world: &WorldState,
    history: &HistoryBuffer,
    ids: &[usize],
) -> Result<[f64; PREDICTION_WIDTH]> {
    let empty: NeighborHistory = ([[0.0; 2]; HISTORY_LEN], [false; HISTORY_LEN]);
    let mut inputs = vec![empty; NEIGHBORS];
    for (slot, id) in ids.iter().enumerate().take(NEIGHBORS) {
        if let Some(h) = history.history_of(*id) {
            inputs[slot] = h;
        }
    }
    let futures = predict_future(model, &inputs)?;
    let ego = world.ego();
    let mut block = [0.0; PREDICTION_WIDTH];
    for (k, (input, future)) in inputs.iter().zip(&futures).enumerate() {
        if input.1.iter().any(|&m| m) {
            let last = future[future.len() - 1];
            let [x, y] = to_ego_frame(ego, last[0], last[1]);
            block[2 * k] = x;
            block[2 * k + 1] = y;
        }
    }
    Ok(block)
}

fn push_history(history: &mut HistoryBuffer, world: &WorldState) {
    let ids = nearest_neighbors(world, NEIGHBORS);
    history.push(world, &ids);
}

/// Chooses actions and optionally learns from the resulting transitions.
pub trait Controller {
    fn decide(&mut self, obs: &Observation) -> Result<Choice>;
    /// Called once per decision after the maneuver; `next` is the following
    /// observation, absent when the episode ended.
    fn record(&mut self, transition: Transition, next: Option<&Observation>) -> Result<()>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Choice {
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub probs: [f64; ACTIONS],
    pub state_hash: String,
}

fn choose(policy: &ActorCritic, obs: &Observation, rng: Option<&mut ChaCha8Rng>) -> Result<Choice> {
    let out = policy.act(obs)?;
    let (action, log_prob) = match rng {
        Some(rng) => sample_action(&out.probs, rng, false),
        None => sample_action(&out.probs, &mut rand::rngs::mock::StepRng::new(0, 0), true),
    };
    Ok(Choice {
        action,
        log_prob,
        value: out.value,
        probs: out.probs,
        state_hash: hash_hex(out.state.values.iter().map(|v| v.to_bits())),
    })
}

/// Greedy evaluation policy.
pub struct Greedy<'a>(pub &'a ActorCritic);

impl Controller for Greedy<'_> {
    fn decide(&mut self, obs: &Observation) -> Result<Choice> {
        choose(self.0, obs, None)
    }

    fn record(&mut self, _: Transition, _: Option<&Observation>) -> Result<()> {
        Ok(())
    }
}

/// Stochastic policy that runs a PPO update after every
/// `update_period`-th decision, counted across episodes.
pub struct Trainer {
    pub policy: ActorCritic,
    pub config: AgentConfig,
    optimizer: Adam,
    buffer: RolloutBuffer,
    rng: ChaCha8Rng,
    pub decisions: usize,
    pub updates: Vec<UpdateRecord>,
}

impl Trainer {
    pub fn new(policy: ActorCritic, config: AgentConfig, rng: ChaCha8Rng) -> Self {
        let optimizer = Adam::new(&policy.params, config.learning_rate);
        let buffer = RolloutBuffer::new(config.buffer_capacity);
        Self { policy, config, optimizer, buffer, rng, decisions: 0, updates: Vec::new() }
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }
}

impl Controller for Trainer {
    fn decide(&mut self, obs: &Observation) -> Result<Choice> {
        choose(&self.policy, obs, Some(&mut self.rng))
    }

    fn record(&mut self, transition: Transition, next: Option<&Observation>) -> Result<()> {
        self.buffer.push(transition);
        self.decisions += 1;
        if self.decisions.is_multiple_of(self.config.update_period) {
            let bootstrap = match next {
                Some(obs) => self.policy.value_of(obs)?,
                None => 0.0,
            };
            let window = self.buffer.recent(self.config.update_period).to_vec();
            let stats = ppo_update(&mut self.policy, &mut self.optimizer, &window, bootstrap, &self.config)?;
            self.updates.push(UpdateRecord { update: self.updates.len() + 1, decisions: self.decisions, stats });
        }
        Ok(())
    }
}

/// Runs one episode from `seed` to a terminal status.
pub fn run_episode(
    scenario: &ScenarioConfig,
    pilot: &PilotConfig,
    perception: &Perception,
    controller: &mut dyn Controller,
    episode: usize,
    seed: u64,
    log_traces: bool,
) -> Result<EpisodeLog> {
    perception.check()?;
    let mut world = WorldState::reset(scenario, seed)?;
    let mut history = HistoryBuffer::new();
    push_history(&mut history, &world);
    let mut decisions = Vec::new();
    let mut cumulative = 0.0;
    let mut obs = perception.observe(&world, &history)?;
    while !world.status.is_terminal() {
        let step = world.time_step;
        let choice = controller.decide(&obs)?;
        let decision = Decision::from_index(choice.action).expect("valid action index");
        let outcome = execute_decision_observed(&mut world, decision, pilot, |w| push_history(&mut history, w))?;
        cumulative += outcome.reward.total;
        let done = world.status.is_terminal();
        let next = if done { None } else { Some(perception.observe(&world, &history)?) };
        controller.record(
            Transition {
                obs,
                action: choice.action,
                reward: outcome.reward.total,
                done,
                log_prob: choice.log_prob,
                value: choice.value,
            },
            next.as_ref(),
        )?;
        decisions.push(DecisionRecord {
            step,
            state_hash: choice.state_hash,
            action: choice.action,
            probs: choice.probs,
            reward: outcome.reward.total,
            breakdown: outcome.reward,
            trace: log_traces.then_some(outcome.trace),
        });
        match next {
            Some(n) => obs = n,
            None => break,
        }
    }
    Ok(EpisodeLog {
        episode,
        seed,
        decisions,
        status: world.status,
        cumulative_reward: cumulative,
        steps: world.time_step,
        distance: world.ego().x.clamp(0.0, scenario.lanes.road_length),
    })
}

/// Re-simulates an action sequence and returns the cumulative reward and
/// final status.
pub fn replay_episode(
    scenario: &ScenarioConfig,
    pilot: &PilotConfig,
    seed: u64,
    actions: &[usize],
) -> Result<(f64, EpisodeStatus)> {
    let mut world = WorldState::reset(scenario, seed)?;
    let mut cumulative = 0.0;
    for &a in actions {
        if world.status.is_terminal() {
            return Err(Error::Contract("replay has actions past the end of the episode".into()));
        }
        let decision = Decision::from_index(a).ok_or_else(|| Error::Contract(format!("invalid action {a}")))?;
        cumulative += execute_decision(&mut world, decision, pilot)?.reward.total;
    }
    Ok((cumulative, world.status))
}
