use super::{Gradients, Tape, Tensor, Var};
use crate::error::{contract, shape_err, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Index of a tensor inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Puts every parameter on `tape` as a gradient-receiving leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound(self.tensors.iter().map(|t| tape.variable(t.clone())).collect())
    }

    /// Puts every parameter on `tape` as a constant (inference only).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Bound {
        Bound(self.tensors.iter().map(|t| tape.constant(t.clone())).collect())
    }

    /// Replaces values from another set with identical names and shapes.
    pub fn copy_from(&mut self, other: &ParamSet) -> Result<()> {
        if self.names != other.names {
            return contract("parameter sets have different layouts");
        }
        for (dst, src) in self.tensors.iter_mut().zip(&other.tensors) {
            if dst.shape() != src.shape() {
                return shape_err(format!("parameter shape {:?} vs {:?}", dst.shape(), src.shape()));
            }
            dst.clone_from(src);
        }
        Ok(())
    }
}

/// Tape handles for a bound [`ParamSet`].
#[derive(Clone, Debug)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    /// Gradients for every bound parameter (zero where unreachable).
    pub fn collect(&self, grads: &Gradients) -> ParamGrads {
        ParamGrads(self.0.iter().map(|&v| Some(grads.get(v))).collect())
    }
}

impl std::ops::Index<ParamId> for Bound {
    type Output = Var;
    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}

/// Per-parameter gradients keyed by [`ParamId`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads(Vec<Option<Tensor>>);

impl ParamGrads {
    pub fn empty(len: usize) -> Self {
        Self(vec![None; len])
    }

    pub fn insert(&mut self, id: ParamId, grad: Tensor) {
        self.0[id.0] = Some(grad);
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.0.get(id.0).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn global_norm(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .flat_map(|t| t.data().iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`. Returns the norm
    /// before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for t in self.0.iter_mut().flatten() {
                t.data_mut().iter_mut().for_each(|g| *g *= s);
            }
        }
        norm
    }

    /// Elementwise sum with another gradient set of the same layout.
    pub fn accumulate(&mut self, other: &ParamGrads) -> Result<()> {
        if self.0.len() != other.0.len() {
            return contract("gradient sets have different lengths");
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            match (a.as_mut(), b) {
                (Some(x), Some(y)) => x.data_mut().iter_mut().zip(y.data()).for_each(|(p, q)| *p += q),
                (None, Some(y)) => *a = Some(y.clone()),
                _ => {}
            }
        }
        Ok(())
    }
}

/// Uniform initialization in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("init shape")
}

/// Fully connected layer `x W + b`, `W: [in, out]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn new<R: Rng>(params: &mut ParamSet, name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let weight = params.add(
            format!("{name}.weight"),
            glorot_uniform(rng, &[inputs, outputs], inputs, outputs),
        );
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(&[outputs]));
        Self { weight, bias, inputs, outputs }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let y = tape.matmul(x, bound[self.weight])?;
        tape.add_row_bias(y, bound[self.bias])
    }
}
