use super::{TrajectorySample, FUTURE_LEN, HISTORY_LEN};
use crate::error::{Error, Result};
use crate::gradcore::{Bound, Dense, ParamSet, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub embed_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub ff_hidden: usize,
    /// Positions are divided by this before embedding and offsets multiplied
    /// by it after the head.
    pub position_scale: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self { embed_dim: 32, heads: 2, layers: 2, ff_hidden: 64, position_scale: 5.0 }
    }
}

impl PredictorConfig {
    pub fn key_dim(&self) -> usize {
        self.embed_dim / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.embed_dim == 0 || !self.embed_dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "embed_dim {} must be a positive multiple of heads {}",
                self.embed_dim, self.heads
            )));
        }
        if self.layers == 0 || self.ff_hidden == 0 || !(self.position_scale > 0.0) {
            return Err(Error::Config("predictor layers, ff_hidden and position_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct EncoderLayer {
    query: Dense,
    key: Dense,
    value: Dense,
    output: Dense,
    ff_in: Dense,
    ff_out: Dense,
}

/// Encoder-only transformer over one vehicle's position history that emits
/// 10 future offsets relative to the last observed position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub config: PredictorConfig,
    pub params: ParamSet,
    embed: Dense,
    layers: Vec<EncoderLayer>,
    head: Dense,
}

/// Sinusoidal position code, shape `[seq, dim]`.
pub fn positional_encoding(seq: usize, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; seq * dim];
    for t in 0..seq {
        for i in 0..dim {
            let freq = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / dim as f64);
            let angle = t as f64 * freq;
            out[t * dim + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    out
}

impl Predictor {
    pub fn new(config: PredictorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let d = config.embed_dim;
        let embed = Dense::new(&mut params, "predictor.embed", 2, d, &mut rng);
        let layers = (0..config.layers)
            .map(|l| {
                let n = |s: &str| format!("predictor.layer{l}.{s}");
                EncoderLayer {
                    query: Dense::new(&mut params, &n("query"), d, d, &mut rng),
                    key: Dense::new(&mut params, &n("key"), d, d, &mut rng),
                    value: Dense::new(&mut params, &n("value"), d, d, &mut rng),
                    output: Dense::new(&mut params, &n("output"), d, d, &mut rng),
                    ff_in: Dense::new(&mut params, &n("ff_in"), d, config.ff_hidden, &mut rng),
                    ff_out: Dense::new(&mut params, &n("ff_out"), config.ff_hidden, d, &mut rng),
                }
            })
            .collect();
        let head = Dense::new(&mut params, "predictor.head", d, 2 * FUTURE_LEN, &mut rng);
        // Zero head: an untrained model predicts "stay where last seen".
        *params.get_mut(head.weight) = Tensor::zeros(&[d, 2 * FUTURE_LEN]);
        Ok(Self { config, params, embed, layers, head })
    }

    /// Forward pass over a batch of localized histories. Returns the
    /// predicted offsets as a `[batch, 20]` node (x0, y0, x1, y1, ...).
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        histories: &[[[f64; 2]; HISTORY_LEN]],
        masks: &[[bool; HISTORY_LEN]],
    ) -> Result<Var> {
        let batch = histories.len();
        let cfg = &self.config;
        let d = cfg.embed_dim;
        let inv = 1.0 / cfg.position_scale;
        let tokens: Vec<f64> = histories
            .iter()
            .flat_map(|h| h.iter().flat_map(|p| [p[0] * inv, p[1] * inv]))
            .collect();
        let token_mask: Vec<bool> = masks.iter().flatten().copied().collect();
        let x = tape.constant(Tensor::new(vec![batch * HISTORY_LEN, 2], tokens)?);
        let pe_one = positional_encoding(HISTORY_LEN, d);
        let pe: Vec<f64> = (0..batch).flat_map(|_| pe_one.iter().copied()).collect();
        let pe = tape.constant(Tensor::new(vec![batch * HISTORY_LEN, d], pe)?);
        let mut h = self.embed.forward(tape, bound, x)?;
        h = tape.add(h, pe)?;
        for layer in &self.layers {
            let q = layer.query.forward(tape, bound, h)?;
            let k = layer.key.forward(tape, bound, h)?;
            let v = layer.value.forward(tape, bound, h)?;
            let a = tape.attention(q, k, v, batch, cfg.heads, Some(&token_mask))?;
            let o = layer.output.forward(tape, bound, a)?;
            h = tape.add(h, o)?;
            let f = layer.ff_in.forward(tape, bound, h)?;
            let f = tape.relu(f);
            let f = layer.ff_out.forward(tape, bound, f)?;
            h = tape.add(h, f)?;
        }
        let pooled = tape.mean_pool(h, batch, HISTORY_LEN, Some(&token_mask))?;
        let out = self.head.forward(tape, bound, pooled)?;
        Ok(tape.scale(out, cfg.position_scale))
    }

    /// Predicted offsets for localized histories, without gradients.
    pub fn predict_offsets(
        &self,
        histories: &[[[f64; 2]; HISTORY_LEN]],
        masks: &[[bool; HISTORY_LEN]],
    ) -> Result<Vec<[[f64; 2]; FUTURE_LEN]>> {
        if histories.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let bound = self.params.bind_frozen(&mut tape);
        let out = self.forward(&mut tape, &bound, histories, masks)?;
        Ok(tape
            .value(out)
            .data()
            .chunks(2 * FUTURE_LEN)
            .map(|row| {
                let mut f = [[0.0; 2]; FUTURE_LEN];
                for (t, p) in f.iter_mut().enumerate() {
                    *p = [row[2 * t], row[2 * t + 1]];
                }
                f
            })
            .collect())
    }

    /// Mean squared displacement loss over a batch of samples.
    pub fn loss(&self, tape: &mut Tape, bound: &Bound, batch: &[&TrajectorySample]) -> Result<Var> {
        let histories: Vec<_> = batch.iter().map(|s| s.history).collect();
        let masks: Vec<[bool; HISTORY_LEN]> = batch.iter().map(|s| history_mask(s)).collect();
        let pred = self.forward(tape, bound, &histories, &masks)?;
        let target: Vec<f64> = batch.iter().flat_map(|s| s.future.iter().flat_map(|p| [p[0], p[1]])).collect();
        let weights: Vec<f64> = batch
            .iter()
            .flat_map(|s| s.mask[HISTORY_LEN..].iter().flat_map(|&m| [f64::from(u8::from(m)); 2]))
            .collect();
        let target = tape.constant(Tensor::new(vec![batch.len(), 2 * FUTURE_LEN], target)?);
        let weights = tape.constant(Tensor::new(vec![batch.len(), 2 * FUTURE_LEN], weights)?);
        let diff = tape.sub(pred, target)?;
        let diff = tape.mul(diff, weights)?;
        let sq = tape.mul(diff, diff)?;
        let total = tape.sum(sq);
        Ok(tape.scale(total, 1.0 / (batch.len() * FUTURE_LEN) as f64))
    }
}

pub(crate) fn history_mask(s: &TrajectorySample) -> [bool; HISTORY_LEN] {
    let mut m = [false; HISTORY_LEN];
    m.copy_from_slice(&s.mask[..HISTORY_LEN]);
    m
}
