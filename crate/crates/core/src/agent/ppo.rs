use super::{ActorCritic, AgentConfig, Observation, ACTIONS};
use crate::error::{contract, Result};
use crate::gradcore::{Adam, Bound, Tape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// One decision: the observation it was made from, the chosen action, the
/// reward accrued while the maneuver ran, and the behavior policy's
/// log-probability and value estimate. The bootstrap value for the state
/// that follows is supplied when the window is consumed.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
    pub log_prob: f64,
    pub value: f64,
}

/// Bounded FIFO of transitions; the oldest entries are evicted first.
#[derive(Clone, Debug)]
pub struct RolloutBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl RolloutBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), items: VecDeque::with_capacity(capacity.max(1)) }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// The most recent `n` transitions in insertion order.
    pub fn recent(&mut self, n: usize) -> &[Transition] {
        let len = self.items.len();
        &self.items.make_contiguous()[len - n.min(len)..]
    }
}

/// Draws an action; greedy mode takes the argmax with ties to the lower
/// index. Returns the action and its log-probability.
pub fn sample_action<R: Rng>(probs: &[f64; ACTIONS], rng: &mut R, greedy: bool) -> (usize, f64) {
    let action = if greedy {
        (0..ACTIONS).fold(0, |best, i| if probs[i] > probs[best] { i } else { best })
    } else {
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        let mut pick = None;
        for (i, &p) in probs.iter().enumerate() {
            cum += p;
            if u < cum && p > 0.0 {
                pick = Some(i);
                break;
            }
        }
        // Rounding can leave u above the final cumulative sum.
        pick.unwrap_or_else(|| (0..ACTIONS).rev().find(|&i| probs[i] > 0.0).unwrap_or(0))
    };
    (action, probs[action].ln())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Advantages {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    /// `raw + value`, the critic's regression target.
    pub returns: Vec<f64>,
}

pub(crate) fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
    bootstrap_value: f64,
) -> Advantages {
    let n = rewards.len();
    let mut raw = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap_value };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        raw[t] = next_adv;
    }
    let mean = raw.iter().sum::<f64>() / n as f64;
    let var = raw.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    let normalized = raw.iter().map(|a| if std > 1e-8 { (a - mean) / std } else { a - mean }).collect();
    let returns = raw.iter().zip(values).map(|(a, v)| a + v).collect();
    Advantages { raw, normalized, returns }
}

/// Generalized advantage estimates over a contiguous window. A transition
/// marked `done` cuts the bootstrap from whatever follows it.
pub fn gae_advantages(window: &[Transition], gamma: f64, lambda: f64, bootstrap_value: f64) -> Result<Advantages> {
    if window.is_empty() {
        return contract("advantage window is empty");
    }
    let rewards: Vec<f64> = window.iter().map(|t| t.reward).collect();
    let values: Vec<f64> = window.iter().map(|t| t.value).collect();
    let dones: Vec<bool> = window.iter().map(|t| t.done).collect();
    Ok(gae(&rewards, &values, &dones, gamma, lambda, bootstrap_value))
}

/// `min(r A, clip(r, 1 - eps, 1 + eps) A)`.
pub fn clipped_surrogate_term(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
}

fn column(tape: &mut Tape, values: &[f64]) -> Result<Var> {
    Ok(tape.constant(Tensor::new(vec![values.len()], values.to_vec())?))
}

/// Log-probabilities `[n]` of `actions` and the full log-softmax `[n, 3]`.
fn action_log_probs(
    model: &ActorCritic,
    tape: &mut Tape,
    bound: &Bound,
    obs: &[&Observation],
    actions: &[usize],
) -> Result<(Var, Var, Var)> {
    let states = model.state_var(tape, bound, obs)?;
    let (logits, values) = model.forward_states(tape, bound, states)?;
    let logp = tape.log_softmax(logits)?;
    let logp_a = tape.gather(logp, actions)?;
    Ok((logp_a, logp, values))
}

/// Mean clipped surrogate over a batch, differentiable in the policy.
#[allow(clippy::too_many_arguments)]
pub fn surrogate_objective(
    model: &ActorCritic,
    tape: &mut Tape,
    bound: &Bound,
    obs: &[&Observation],
    actions: &[usize],
    old_log_probs: &[f64],
    advantages: &[f64],
    clip: f64,
) -> Result<Var> {
    let (logp_a, _, _) = action_log_probs(model, tape, bound, obs, actions)?;
    clipped_mean(tape, logp_a, old_log_probs, advantages, clip).map(|(v, _)| v)
}

/// Mean of `log pi(a|s) * A`, the plain policy-gradient objective.
pub fn policy_gradient_objective(
    model: &ActorCritic,
    tape: &mut Tape,
    bound: &Bound,
    obs: &[&Observation],
    actions: &[usize],
    advantages: &[f64],
) -> Result<Var> {
    let (logp_a, _, _) = action_log_probs(model, tape, bound, obs, actions)?;
    let adv = column(tape, advantages)?;
    let weighted = tape.mul(logp_a, adv)?;
    Ok(tape.mean(weighted))
}

fn clipped_mean(
    tape: &mut Tape,
    logp_a: Var,
    old_log_probs: &[f64],
    advantages: &[f64],
    clip: f64,
) -> Result<(Var, Var)> {
    let old = column(tape, old_log_probs)?;
    let adv = column(tape, advantages)?;
    let diff = tape.sub(logp_a, old)?;
    let ratio = tape.exp(diff);
    let unclipped = tape.mul(ratio, adv)?;
    let clipped_ratio = tape.clamp(ratio, 1.0 - clip, 1.0 + clip);
    let clipped = tape.mul(clipped_ratio, adv)?;
    let term = tape.minimum(unclipped, clipped)?;
    Ok((tape.mean(term), ratio))
}

/// Clipped-surrogate PPO update over one window: the behavior policy is
/// snapshotted before the first epoch, then `config.epochs` full-batch Adam
/// steps are taken on `-(surrogate) + c_v (V - R)^2 - c_e H`.
pub fn ppo_update(
    model: &mut ActorCritic,
    optimizer: &mut Adam,
    window: &[Transition],
    bootstrap_value: f64,
    config: &AgentConfig,
) -> Result<UpdateStats> {
    if window.is_empty() {
        return contract("ppo_update needs a non-empty window");
    }
    let n = window.len();
    let rewards: Vec<f64> = window.iter().map(|t| t.reward * config.reward_scale).collect();
    let values: Vec<f64> = window.iter().map(|t| t.value).collect();
    let dones: Vec<bool> = window.iter().map(|t| t.done).collect();
    let adv = gae(&rewards, &values, &dones, config.gamma, config.lambda, bootstrap_value);
    let obs: Vec<&Observation> = window.iter().map(|t| &t.obs).collect();
    let actions: Vec<usize> = window.iter().map(|t| t.action).collect();

    let old_log_probs: Vec<f64> = {
        let mut tape = Tape::new();
        let bound = model.params.bind_frozen(&mut tape);
        let (logp_a, _, _) = action_log_probs(model, &mut tape, &bound, &obs, &actions)?;
        tape.value(logp_a).data().to_vec()
    };

    let mut stats = UpdateStats::default();
    for _ in 0..config.epochs {
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape);
        let (logp_a, logp, v) = action_log_probs(model, &mut tape, &bound, &obs, &actions)?;
        let (surrogate, ratio) = clipped_mean(&mut tape, logp_a, &old_log_probs, &adv.normalized, config.clip)?;

        let v = tape.reshape(v, vec![n])?;
        let target = column(&mut tape, &adv.returns)?;
        let err = tape.sub(v, target)?;
        let sq = tape.mul(err, err)?;
        let value_loss = tape.mean(sq);

        let probs = tape.exp(logp);
        let plogp = tape.mul(probs, logp)?;
        let neg_entropy_sum = tape.sum(plogp);
        let neg_entropy = tape.scale(neg_entropy_sum, 1.0 / n as f64);

        let policy_loss = tape.scale(surrogate, -1.0);
        let weighted_v = tape.scale(value_loss, config.value_coef);
        let weighted_h = tape.scale(neg_entropy, config.entropy_coef);
        let partial = tape.add(policy_loss, weighted_v)?;
        let loss = tape.add(partial, weighted_h)?;

        let ratios = tape.value(ratio).data().to_vec();
        let new_logp = tape.value(logp_a).data();
        for (i, &r) in ratios.iter().enumerate() {
            let a = adv.normalized[i];
            assert!(clipped_surrogate_term(r, a, config.clip) <= r * a + 1e-12);
        }
        stats.surrogate += tape.value(surrogate).item();
        stats.value_loss += tape.value(value_loss).item();
        stats.entropy -= tape.value(neg_entropy).item();
        stats.clip_fraction += ratios.iter().filter(|r| (*r - 1.0).abs() > config.clip).count() as f64 / n as f64;
        stats.approx_kl += old_log_probs.iter().zip(new_logp).map(|(o, l)| o - l).sum::<f64>() / n as f64;

        let grads = tape.backward(loss)?;
        let mut grads = bound.collect(&grads);
        stats.grad_norm += grads.clip_global_norm(config.max_grad_norm);
        optimizer.step(&mut model.params, &grads)?;
    }
    let k = config.epochs as f64;
    stats.surrogate /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_fraction /= k;
    stats.approx_kl /= k;
    stats.grad_norm /= k;
    Ok(stats)
}
