#![allow(dead_code)]

use hppo::agent::{ActorCritic, Observation, Variant, CURRENT_WIDTH, PREDICTION_WIDTH};
use hppo::forecast::{Predictor, PredictorConfig, HISTORY_LEN};
use hppo::gradcore::{Bound, ParamSet, Tape, Tensor, Var};
use hppo::gridenc::{EncoderConfig, GridEncoder};
use hppo::percept::{render_semantic_grid, GridSpec};
use hppo::trafficsim::{OrientedRect, ScenarioConfig, WorldState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub const FD_STEP: f64 = 1e-3;
pub const GRAD_TOL: f64 = 1e-4;
/// Magnitude floor of the relative error, so two gradients that are both
/// zero up to roundoff compare equal.
pub const REL_FLOOR: f64 = 1e-7;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Scalar `sum(c * y)` with fixed random weights `c`, so every output
/// element gets a distinct weight in the gradient.
pub fn probe(tape: &mut Tape, y: Var, seed: u64) -> Var {
    let shape = tape.value(y).shape().to_vec();
    let c = random_tensor(&mut rng(seed ^ 0x5eed), &shape, 1.0);
    let c = tape.constant(c);
    let p = tape.mul(y, c).unwrap();
    tape.sum(p)
}

/// Largest relative error between the tape gradient and central finite
/// differences with respect to every element of every leaf.
pub fn check_leaves(inputs: &[Tensor], build: impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let eval = |values: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.variable(t.clone())).collect();
        let loss = build(&mut tape, &vars);
        tape.value(loss).item()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let loss = build(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (k, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var);
        for i in 0..inputs[k].len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic.data()[i], numeric));
        }
    }
    worst
}

/// Outcome of a parameter sweep.
#[derive(Clone, Copy, Debug, Default)]
pub struct ParamCheck {
    /// Largest relative error over the judged coordinates.
    pub worst: f64,
    pub judged: usize,
    /// Coordinates whose stencil straddles a ReLU kink: the estimates at
    /// `FD_STEP` and `FD_STEP / 2` disagree, so neither is a derivative.
    pub kinked: usize,
}

impl ParamCheck {
    pub fn merge(self, other: ParamCheck) -> ParamCheck {
        ParamCheck {
            worst: self.worst.max(other.worst),
            judged: self.judged + other.judged,
            kinked: self.kinked + other.kinked,
        }
    }
}

/// Consistency required between the two stencils for a coordinate to count
/// as smooth; the truncation gap of a smooth function is orders smaller.
pub const SMOOTH_TOL: f64 = 1e-5;

/// Compares tape gradients with central differences over `coords` randomly
/// chosen parameter scalars (with replacement).
pub fn check_params<M>(
    model: &mut M,
    params: fn(&mut M) -> &mut ParamSet,
    coords: usize,
    seed: u64,
    loss: impl Fn(&M, &mut Tape, &Bound) -> Var,
) -> ParamCheck {
    let eval = |m: &mut M| {
        let mut tape = Tape::new();
        let bound = params(m).bind_frozen(&mut tape);
        let l = loss(m, &mut tape, &bound);
        tape.value(l).item()
    };
    let mut tape = Tape::new();
    let bound = params(model).bind(&mut tape);
    let l = loss(model, &mut tape, &bound);
    let grads = bound.collect(&tape.backward(l).unwrap());
    let ids: Vec<_> = params(model).ids().collect();
    let mut r = rng(seed);
    let mut out = ParamCheck::default();
    for _ in 0..coords {
        let id = ids[r.gen_range(0..ids.len())];
        let i = r.gen_range(0..params(model).get(id).len());
        let analytic = grads.get(id).unwrap().data()[i];
        let orig = params(model).get(id).data()[i];
        let mut central = |h: f64| {
            params(model).get_mut(id).data_mut()[i] = orig + h;
            let up = eval(model);
            params(model).get_mut(id).data_mut()[i] = orig - h;
            let down = eval(model);
            params(model).get_mut(id).data_mut()[i] = orig;
            (up - down) / (2.0 * h)
        };
        let numeric = central(FD_STEP);
        let half = central(FD_STEP / 2.0);
        if rel_err(numeric, half) > SMOOTH_TOL {
            out.kinked += 1;
            continue;
        }
        out.judged += 1;
        out.worst = out.worst.max(rel_err(analytic, numeric));
    }
    out
}

pub fn actor_critic_params(m: &mut ActorCritic) -> &mut ParamSet {
    &mut m.params
}

pub fn predictor_params(m: &mut Predictor) -> &mut ParamSet {
    &mut m.params
}

pub struct EncoderModel {
    pub encoder: GridEncoder,
    pub params: ParamSet,
}

pub fn encoder_params(m: &mut EncoderModel) -> &mut ParamSet {
    &mut m.params
}

/// Small grid keeps the finite-difference sweeps cheap.
pub const CHECK_GRID: GridSpec = GridSpec { height: 16, width: 16, cell_size: 1.0 };

/// Zero biases put ReLU inputs exactly on the kink; a random instance
/// should not.
pub fn randomize_biases(params: &mut ParamSet, seed: u64) {
    let mut r = rng(seed ^ 0xb1a5);
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        if params.name(id).ends_with("bias") {
            for v in params.get_mut(id).data_mut() {
                *v = r.gen_range(-0.5..0.5);
            }
        }
    }
}

pub fn encoder_model(seed: u64) -> EncoderModel {
    let mut params = ParamSet::new();
    let cfg = EncoderConfig::for_grid(CHECK_GRID.height, CHECK_GRID.width);
    let encoder = GridEncoder::new(cfg, &mut params, "encoder", &mut rng(seed)).unwrap();
    randomize_biases(&mut params, seed);
    EncoderModel { encoder, params }
}

pub fn actor_critic(variant: Variant, seed: u64) -> ActorCritic {
    let mut m = ActorCritic::new(variant, 16, EncoderConfig::for_grid(CHECK_GRID.height, CHECK_GRID.width), seed).unwrap();
    // Undo the small output init so the actor gradient is not tiny.
    let mut r = rng(seed ^ 7);
    let ids: Vec<_> = m.params.ids().collect();
    for id in ids {
        if m.params.name(id).starts_with("actor.out.weight") {
            for v in m.params.get_mut(id).data_mut() {
                *v = r.gen_range(-0.5..0.5);
            }
        }
    }
    randomize_biases(&mut m.params, seed);
    m
}

pub fn small_predictor(seed: u64) -> Predictor {
    let cfg = PredictorConfig { embed_dim: 8, heads: 2, layers: 1, ff_hidden: 8, position_scale: 5.0 };
    let mut p = Predictor::new(cfg, seed).unwrap();
    // Random head instead of the zero init, so gradients flow everywhere.
    let mut r = rng(seed ^ 11);
    let ids: Vec<_> = p.params.ids().collect();
    for id in ids {
        if p.params.name(id) == "predictor.head.weight" {
            for v in p.params.get_mut(id).data_mut() {
                *v = r.gen_range(-0.5..0.5);
            }
        }
    }
    randomize_biases(&mut p.params, seed);
    p
}

pub fn random_histories(seed: u64, n: usize) -> (Vec<[[f64; 2]; HISTORY_LEN]>, Vec<[bool; HISTORY_LEN]>) {
    let mut r = rng(seed);
    let mut hs = Vec::new();
    let mut ms = Vec::new();
    for _ in 0..n {
        let mut h = [[0.0; 2]; HISTORY_LEN];
        let mut m = [true; HISTORY_LEN];
        let start = r.gen_range(0..4);
        for (t, p) in h.iter_mut().enumerate() {
            *p = [r.gen_range(-8.0..2.0), r.gen_range(-2.0..2.0)];
            m[t] = t >= start;
        }
        hs.push(h);
        ms.push(m);
    }
    (hs, ms)
}

/// Observation from a seeded world carrying the blocks `variant` uses.
pub fn observation_for(variant: Variant, seed: u64) -> Observation {
    let mut o = observation(seed);
    if !variant.uses_prediction() {
        o.prediction = None;
    }
    if !variant.uses_grid() {
        o.grid = None;
    }
    o
}

/// Observation from a seeded world, with a random prediction block and a
/// small grid.
pub fn observation(seed: u64) -> Observation {
    let world = WorldState::reset(&ScenarioConfig::default(), seed).unwrap();
    let grid = render_semantic_grid(&world, &CHECK_GRID).unwrap();
    let mut r = rng(seed);
    let mut current = [0.0; CURRENT_WIDTH];
    for v in current.iter_mut() {
        *v = r.gen_range(-1.0..1.0);
    }
    let mut prediction = [0.0; PREDICTION_WIDTH];
    for v in prediction.iter_mut() {
        *v = r.gen_range(-20.0..20.0);
    }
    Observation { prediction: Some(prediction), grid: Some(Arc::new(grid)), current }
}

/// Overlap decided from a 100 x 100 sample grid over `a` (boundary
/// included), tested against `b` shrunk and grown by the grid spacing. A
/// sample in the shrunk `b` proves overlap; no sample in the grown `b`
/// proves separation; anything else is too close to tangency to call.
pub fn sampled_overlap(a: &OrientedRect, b: &OrientedRect) -> Option<bool> {
    const N: usize = 100;
    let spacing = a.length.max(a.width) / (N - 1) as f64;
    let resize = |d: f64| OrientedRect { length: b.length + 2.0 * d, width: b.width + 2.0 * d, ..*b };
    let (shrunk, grown) = (resize(-spacing), resize(spacing));
    let (s, c) = a.heading.sin_cos();
    let (mut in_shrunk, mut in_grown) = (false, false);
    for i in 0..N {
        for j in 0..N {
            let u = (i as f64 / (N - 1) as f64 - 0.5) * a.length;
            let v = (j as f64 / (N - 1) as f64 - 0.5) * a.width;
            let p = [a.x + u * c - v * s, a.y + u * s + v * c];
            in_shrunk |= shrunk.length > 0.0 && shrunk.width > 0.0 && shrunk.contains(p);
            in_grown |= grown.contains(p);
        }
    }
    match (in_shrunk, in_grown) {
        (true, _) => Some(true),
        (false, false) => Some(false),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CollisionSweep {
    pub hits: usize,
    pub misses: usize,
    /// Pairs within a sample spacing of tangency.
    pub undecided: usize,
    /// Decided pairs where the exact test disagrees with sampling, or is
    /// not symmetric.
    pub disagreements: usize,
}

pub fn collision_sweep(seed: u64, pairs: usize) -> CollisionSweep {
    let mut r = rng(seed);
    let mut out = CollisionSweep::default();
    for _ in 0..pairs {
        let mut rect = |spread: f64| OrientedRect {
            x: r.gen_range(-spread..spread),
            y: r.gen_range(-spread..spread),
            heading: r.gen_range(-3.2..3.2),
            length: r.gen_range(1.0..6.0),
            width: r.gen_range(0.5..3.0),
        };
        let a = rect(1.0);
        let b = rect(5.0);
        let exact = a.overlaps(&b);
        if exact != b.overlaps(&a) {
            out.disagreements += 1;
            continue;
        }
        match sampled_overlap(&a, &b) {
            Some(o) if o != exact => out.disagreements += 1,
            Some(true) => out.hits += 1,
            Some(false) => out.misses += 1,
            None => out.undecided += 1,
        }
    }
    out
}
