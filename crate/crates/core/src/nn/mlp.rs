use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, BatchJet, BlockKind, Jet2, JetSpec, Mat, ParamLayout, ParamVector, Tape, Var};
use crate::error::{Error, Result};
use crate::rng;

/// Width of every hidden layer of the base network.
pub const BASE_WIDTH: usize = 64;
/// Number of hidden layers of the base network.
pub const BASE_DEPTH: usize = 6;
/// Hidden widths of the hypernetwork.
pub const HYPER_HIDDEN: [usize; 6] = [512, 512, 256, 256, 128, 128];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub init_seed: u64,
}

impl MlpConfig {
    /// `input_dim → 64 × 6 → output_dim`, tanh.
    pub fn base(input_dim: usize, output_dim: usize, init_seed: u64) -> Self {
        Self {
            input_dim,
            hidden_widths: vec![BASE_WIDTH; BASE_DEPTH],
            output_dim,
            activation: Activation::Tanh,
            init_seed,
        }
    }

    /// `input_dim → 512·2 → 256·2 → 128·2 → output_dim`, tanh.
    pub fn hypernet(input_dim: usize, output_dim: usize, init_seed: u64) -> Self {
        Self {
            input_dim,
            hidden_widths: HYPER_HIDDEN.to_vec(),
            output_dim,
            activation: Activation::Tanh,
            init_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_widths.contains(&0) {
            return Err(Error::Config(format!(
                "every layer width must be at least 1 (got {} → {:?} → {})",
                self.input_dim, self.hidden_widths, self.output_dim
            )));
        }
        Ok(())
    }

    /// `(out, in)` of every weight matrix, input layer first.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden_widths.len() + 2);
        widths.push(self.input_dim);
        widths.extend_from_slice(&self.hidden_widths);
        widths.push(self.output_dim);
        widths.windows(2).map(|w| (w[1], w[0])).collect()
    }

    /// Canonical layout: per layer, weight row-major then bias.
    pub fn layout(&self) -> ParamLayout {
        let mut layout = ParamLayout::new();
        for (i, (m, n)) in self.layer_dims().into_iter().enumerate() {
            layout.push(i, BlockKind::Weight, m, n);
            layout.push(i, BlockKind::Bias, 1, m);
        }
        layout
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(m, n)| m * n + m).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `out x in`
    pub weight: Mat,
    /// `1 x out`
    pub bias: Mat,
}

/// Dense feed-forward network; activation on every layer but the last.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    config: MlpConfig,
    layers: Vec<Dense>,
}

impl Mlp {
    /// Uniform ±√(6/(fan_in + fan_out)) weights, zero biases.
    pub fn new(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::seeded(config.init_seed);
        let layers = config
            .layer_dims()
            .into_iter()
            .map(|(m, n)| {
                let limit = libm::sqrt(6.0 / (m + n) as f64);
                Dense {
                    weight: Mat::from_fn(m, n, |_, _| rng.random_range(-limit..limit)),
                    bias: Mat::zeros(1, m),
                }
            })
            .collect();
        Ok(Self { config, layers })
    }

    pub fn from_params(config: MlpConfig, params: &ParamVector) -> Result<Self> {
        config.validate()?;
        params.expect_layout(&config.layout())?;
        Ok(Self::from_blocks(config, params.blocks()))
    }

    pub(crate) fn from_blocks(config: MlpConfig, blocks: Vec<Mat>) -> Self {
        let mut it = blocks.into_iter();
        let mut layers = Vec::new();
        while let (Some(weight), Some(bias)) = (it.next(), it.next()) {
            layers.push(Dense { weight, bias });
        }
        Self { config, layers }
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.config.param_count()
    }

    pub fn params(&self) -> ParamVector {
        let mut values = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            values.extend_from_slice(l.weight.as_slice());
            values.extend_from_slice(l.bias.as_slice());
        }
        ParamVector {
            values,
            layout: self.config.layout(),
        }
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        let blocks = self.config.layout().unflatten(values)?;
        *self = Self::from_blocks(self.config.clone(), blocks);
        Ok(())
    }

    /// Plain forward pass over a batch of points (`N x input_dim`).
    pub fn forward(&self, x: &Mat) -> Mat {
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = h.matmul_t(&l.weight);
            let b = l.bias.as_slice();
            let c = z.cols();
            for (k, v) in z.as_mut_slice().iter_mut().enumerate() {
                *v += b[k % c];
            }
            if i != last {
                let act = self.config.activation;
                for v in z.as_mut_slice() {
                    *v = act.apply(*v);
                }
            }
            h = z;
        }
        h
    }

    /// Records the parameters on `tape`; as leaves when `trainable`.
    pub fn on_tape(&self, tape: &mut Tape, trainable: bool) -> TapedMlp {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                if trainable {
                    (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone()))
                } else {
                    (tape.constant(l.weight.clone()), tape.constant(l.bias.clone()))
                }
            })
            .collect();
        TapedMlp {
            layers,
            activation: self.config.activation,
        }
    }
}

/// A network whose weights live on a tape.
#[derive(Clone, Debug)]
pub struct TapedMlp {
    /// `(weight, bias)` per layer.
    pub layers: Vec<(Var, Var)>,
    pub activation: Activation,
}

impl TapedMlp {
    /// Parameter nodes in canonical layout order.
    pub fn params(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }

    pub fn input_dim(&self, tape: &Tape) -> usize {
        tape.shape(self.layers[0].0).1
    }

    pub fn output_dim(&self, tape: &Tape) -> usize {
        tape.shape(self.layers[self.layers.len() - 1].0).0
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Var {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let z = tape.matmul_t(h, w);
            h = tape.add_row(z, b);
            if i != last {
                h = self.activation.on_tape(tape, h);
            }
        }
        h
    }

    /// Values and input derivatives at a batch of points.
    pub fn jet(&self, tape: &mut Tape, points: &Mat, spec: &JetSpec) -> Result<BatchJet> {
        let dim = self.input_dim(tape);
        if points.cols() != dim {
            return Err(Error::Shape {
                context: "network input dimension",
                expected: dim,
                found: points.cols(),
                offset: None,
            });
        }
        let last = self.layers.len() - 1;
        let mut jet = BatchJet::seed(tape, points, spec)?;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            jet = jet.linear(tape, w, b);
            if i != last {
                jet = jet.activate(tape, self.activation)?;
            }
        }
        Ok(jet)
    }

    /// Per-output jets at a single point.
    ///
    /// `order` is 1 or 2; second derivatives are taken along every direction.
    pub fn input_jet(
        &self,
        tape: &mut Tape,
        point: &[f64],
        directions: &[usize],
        order: usize,
    ) -> Result<Vec<Jet2>> {
        if !(1..=2).contains(&order) {
            return Err(Error::Config(format!("jet order must be 1 or 2, got {order}")));
        }
        let second: &[usize] = if order == 2 { directions } else { &[] };
        let spec = JetSpec::new(directions, second);
        let pts = Mat::from_vec(1, point.len(), point.to_vec());
        let jet = self.jet(tape, &pts, &spec)?;
        let outputs = self.output_dim(tape);
        Ok((0..outputs)
            .map(|c| {
                let col = jet.columns(tape, c, 1);
                Jet2 {
                    value: col.value,
                    grad: col.first.iter().map(|&(_, v)| v).collect(),
                    second: directions
                        .iter()
                        .map(|&d| match col.d2(d) {
                            Some(Some(v)) => Some(v),
                            Some(None) => Some(tape.constant(Mat::scalar(0.0))),
                            None => None,
                        })
                        .collect(),
                }
            })
            .collect())
    }
}

/// Evaluates `net` at `points` with the parameters replaced by `values`.
pub fn forward_with(config: &MlpConfig, values: &[f64], points: &Mat) -> Result<Mat> {
    let blocks = config.layout().unflatten(values)?;
    Ok(Mlp::from_blocks(config.clone(), blocks).forward(points))
}

/// Zeroes every weight and bias.
pub fn zeroed(config: MlpConfig) -> Result<Mlp> {
    config.validate()?;
    let n = config.param_count();
    let blocks = config.layout().unflatten(&vec![0.0; n])?;
    Ok(Mlp::from_blocks(config, blocks))
}
