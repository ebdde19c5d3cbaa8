//! Small convolutional encoder compressing the one-hot semantic grid into a
//! 10-wide feature row.

use crate::error::{shape_err, Result};
use crate::gradcore::kernels::ConvGeometry;
use crate::gradcore::{glorot_uniform, Bound, Dense, ParamId, ParamSet, Tape, Tensor, Var};
use crate::percept::{SemanticGrid, CLASS_COUNT};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const FEATURE_WIDTH: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Self::Relu => tape.relu(x),
            Self::Tanh => tape.tanh(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// `[channels, height, width]` of the grid tensor.
    pub input: [usize; 3],
    pub conv: Vec<ConvSpec>,
    pub activation: Activation,
}

impl EncoderConfig {
    pub fn for_grid(height: usize, width: usize) -> Self {
        let block = |out_channels| ConvSpec { out_channels, kernel: 3, stride: 2, padding: 1 };
        Self {
            input: [CLASS_COUNT, height, width],
            conv: vec![block(8), block(16), block(16)],
            activation: Activation::Relu,
        }
    }
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::for_grid(64, 64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct ConvLayer {
    kernels: ParamId,
    bias: ParamId,
    stride: usize,
    padding: usize,
}

/// Handles to encoder weights stored in a shared [`ParamSet`], so the
/// encoder trains together with whatever consumes its features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEncoder {
    pub config: EncoderConfig,
    layers: Vec<ConvLayer>,
    head: Dense,
}

impl GridEncoder {
    pub fn new<R: Rng>(config: EncoderConfig, params: &mut ParamSet, prefix: &str, rng: &mut R) -> Result<Self> {
        let mut shape = config.input.to_vec();
        let mut layers = Vec::with_capacity(config.conv.len());
        for (i, spec) in config.conv.iter().enumerate() {
            let kshape = [spec.out_channels, shape[0], spec.kernel, spec.kernel];
            let geom = ConvGeometry::new(&shape, &kshape, spec.stride, spec.padding)?;
            let area = spec.kernel * spec.kernel;
            let kernels = params.add(
                format!("{prefix}.conv{i}.kernels"),
                glorot_uniform(rng, &kshape, shape[0] * area, spec.out_channels * area),
            );
            let bias = params.add(format!("{prefix}.conv{i}.bias"), Tensor::zeros(&[spec.out_channels]));
            layers.push(ConvLayer { kernels, bias, stride: spec.stride, padding: spec.padding });
            shape = geom.out_shape();
        }
        let flat: usize = shape.iter().product();
        let head = Dense::new(params, &format!("{prefix}.head"), flat, FEATURE_WIDTH, rng);
        Ok(Self { config, layers, head })
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        if shape != self.config.input {
            return shape_err(format!("grid encoder expects input {:?}, got {shape:?}", self.config.input));
        }
        Ok(())
    }

    /// Differentiable forward pass of one `[c, h, w]` grid to `[1, 10]`.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, grid: Var) -> Result<Var> {
        self.check_input(tape.value(grid).shape())?;
        let mut x = grid;
        for layer in &self.layers {
            x = tape.conv2d(x, bound.var(layer.kernels), layer.stride, layer.padding)?;
            x = tape.add_channel_bias(x, bound.var(layer.bias))?;
            x = self.config.activation.apply(tape, x);
        }
        let flat = tape.value(x).len();
        let x = tape.reshape(x, vec![1, flat])?;
        self.head.forward(tape, bound, x)
    }

    /// Stacks each grid's `[1, 10]` feature into `[n, 10]`.
    pub fn forward_batch(&self, tape: &mut Tape, bound: &Bound, grids: &[Var]) -> Result<Var> {
        let rows = grids.iter().map(|&g| self.forward(tape, bound, g)).collect::<Result<Vec<_>>>()?;
        tape.concat(&rows, 0)
    }

    pub fn encode_tensor(&self, params: &ParamSet, grid: &Tensor) -> Result<[f64; FEATURE_WIDTH]> {
        self.check_input(grid.shape())?;
        let mut tape = Tape::new();
        let bound = params.bind_frozen(&mut tape);
        let x = tape.constant(grid.clone());
        let y = self.forward(&mut tape, &bound, x)?;
        let mut out = [0.0; FEATURE_WIDTH];
        out.copy_from_slice(tape.value(y).data());
        Ok(out)
    }
}

/// Feature row of a semantic grid under the encoder's current weights.
pub fn encode_grid(model: &GridEncoder, params: &ParamSet, grid: &SemanticGrid) -> Result<[f64; FEATURE_WIDTH]> {
    model.encode_tensor(params, &grid.one_hot())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percept::{CellClass, SemanticGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn build(config: EncoderConfig) -> (GridEncoder, ParamSet) {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let enc = GridEncoder::new(config, &mut params, "grid", &mut rng).unwrap();
        (enc, params)
    }

    fn random_grid(h: usize, w: usize, seed: u64) -> SemanticGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SemanticGrid {
            height: h,
            width: w,
            classes: (0..h * w).map(|_| rng.gen_range(0..CLASS_COUNT as u8)).collect(),
        }
    }

    #[test]
    fn default_output_is_ten_wide() {
        let (enc, params) = build(EncoderConfig::default());
        let grid = random_grid(64, 64, 1);
        let f = encode_grid(&enc, &params, &grid).unwrap();
        assert!(f.iter().all(|v| v.is_finite()));
        assert_eq!(f, encode_grid(&enc, &params, &grid).unwrap());
    }

    #[test]
    fn head_adapts_to_grid_size() {
        for (h, w) in [(120, 120), (17, 33), (8, 8)] {
            let (enc, params) = build(EncoderConfig::for_grid(h, w));
            let f = encode_grid(&enc, &params, &random_grid(h, w, 2)).unwrap();
            assert_eq!(f.len(), FEATURE_WIDTH);
        }
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let (enc, params) = build(EncoderConfig::default());
        let f = enc.encode_tensor(&params, &Tensor::zeros(&[CLASS_COUNT, 64, 64])).unwrap();
        assert_eq!(f, [0.0; FEATURE_WIDTH]);
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let (enc, params) = build(EncoderConfig::default());
        let err = encode_grid(&enc, &params, &random_grid(32, 64, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, crate::Error::Shape(_)));
        assert!(msg.contains("[5, 64, 64]") && msg.contains("[5, 32, 64]"), "{msg}");
    }

    #[test]
    fn gradients_reach_every_conv_layer() {
        let (enc, params) = build(EncoderConfig::default());
        let mut grid = random_grid(64, 64, 4);
        grid.classes[0] = CellClass::Ego as u8;
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let x = tape.constant(grid.one_hot());
        let y = enc.forward(&mut tape, &bound, x).unwrap();
        let s = tape.sum(y);
        let grads = bound.collect(&tape.backward(s).unwrap());
        for id in params.ids() {
            if params.name(id).ends_with("kernels") {
                let g = grads.get(id).unwrap();
                assert!(g.data().iter().any(|v| *v != 0.0), "{}", params.name(id));
            }
        }
    }
}
