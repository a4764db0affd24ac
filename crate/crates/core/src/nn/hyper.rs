//! Hypernetworks that emit parameters for a base network, and the plumbing
//! that turns a predicted flat vector into a usable network.

use alloc::vec::Vec;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::embedding::{EmbeddingCodec, TaskEmbedding};
use super::lora::{adapter_layout, check_rank, LORA_INIT_STD};
use super::mlp::{Mlp, MlpConfig, TapedMlp, HYPER_HIDDEN};
use crate::autodiff::{Activation, BlockKind, Mat, ParamLayout, ParamVector, Tape, Var};
use crate::error::{Error, Result};
use crate::rng;

/// How a predicted vector becomes base-network weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AssemblyMode {
    /// Vector holds `A, B` per layer; weights are `W₀ + B·A`.
    Lora { rank: usize },
    /// Vector replaces every weight and bias.
    Full,
    /// Vector is a dense additive update of every weight and bias.
    Delta,
}

impl AssemblyMode {
    pub fn label(&self) -> alloc::string::String {
        match self {
            AssemblyMode::Lora { rank } => alloc::format!("{rank}"),
            AssemblyMode::Full => "*".into(),
            AssemblyMode::Delta => "delta".into(),
        }
    }
}

/// Layout the predicted vector must follow for `mode`.
pub fn predicted_layout(config: &MlpConfig, mode: AssemblyMode) -> ParamLayout {
    match mode {
        AssemblyMode::Lora { rank } => adapter_layout(config, rank),
        AssemblyMode::Full | AssemblyMode::Delta => config.layout(),
    }
}

/// Builds the network described by `base` and a predicted vector.
pub fn apply_predicted(base: &Mlp, theta: &ParamVector, mode: AssemblyMode) -> Result<Mlp> {
    let expected = predicted_layout(base.config(), mode);
    theta.expect_layout(&expected)?;
    let blocks = theta.blocks();
    let mut net = base.clone();
    match mode {
        AssemblyMode::Lora { .. } => {
            for (l, pair) in net.layers_mut().iter_mut().zip(blocks.chunks(2)) {
                let (a, b) = (&pair[0], &pair[1]);
                l.weight.axpy(1.0, &b.matmul(a));
            }
        }
        AssemblyMode::Full => {
            net.set_params(&theta.values)?;
        }
        AssemblyMode::Delta => {
            for (l, pair) in net.layers_mut().iter_mut().zip(blocks.chunks(2)) {
                l.weight.axpy(1.0, &pair[0]);
                l.bias.axpy(1.0, &pair[1]);
            }
        }
    }
    Ok(net)
}

/// Taped version of [`apply_predicted`]; `theta` is a `1 x P` node.
pub fn assemble_on_tape(
    tape: &mut Tape,
    base: &Mlp,
    theta: Var,
    mode: AssemblyMode,
) -> Result<TapedMlp> {
    let layout = predicted_layout(base.config(), mode);
    let (rows, cols) = tape.shape(theta);
    if rows != 1 || cols != layout.len() {
        return Err(Error::Shape {
            context: "predicted parameter vector",
            expected: layout.len(),
            found: rows * cols,
            offset: Some(cols.min(layout.len())),
        });
    }
    let mut blocks = Vec::with_capacity(layout.entries().len());
    for e in layout.entries() {
        let flat = tape.slice_cols(theta, e.offset, e.len());
        blocks.push(tape.reshape(flat, e.rows, e.cols));
    }
    let mut layers = Vec::with_capacity(base.layers().len());
    for (l, pair) in base.layers().iter().zip(blocks.chunks(2)) {
        let layer = match mode {
            AssemblyMode::Lora { .. } => {
                let w0 = tape.constant(l.weight.clone());
                let delta = tape.matmul(pair[1], pair[0]);
                (tape.add(w0, delta), tape.constant(l.bias.clone()))
            }
            AssemblyMode::Full => (pair[0], pair[1]),
            AssemblyMode::Delta => {
                let w0 = tape.constant(l.weight.clone());
                let b0 = tape.constant(l.bias.clone());
                (tape.add(w0, pair[0]), tape.add(b0, pair[1]))
            }
        };
        layers.push(layer);
    }
    Ok(TapedMlp {
        layers,
        activation: base.config().activation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperConfig {
    #[serde(default = "default_hidden")]
    pub hidden_widths: Vec<usize>,
    #[serde(default = "default_scale")]
    pub output_scale: f64,
    pub mode: AssemblyMode,
    #[serde(default)]
    pub init_seed: u64,
}

fn default_hidden() -> Vec<usize> {
    HYPER_HIDDEN.to_vec()
}

fn default_scale() -> f64 {
    1.0
}

impl HyperConfig {
    pub fn new(mode: AssemblyMode, init_seed: u64) -> Self {
        Self {
            hidden_widths: default_hidden(),
            output_scale: 1.0,
            mode,
            init_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperNetwork {
    net: Mlp,
    output_scale: f64,
    mode: AssemblyMode,
    target: MlpConfig,
    codec: EmbeddingCodec,
}

impl HyperNetwork {
    /// Fresh hypernetwork whose predictions all assemble to `base` itself.
    ///
    /// The last layer has zero weights. Its bias is chosen per mode so the
    /// prediction is the identity element of the assembly: `A = 0` with a
    /// small random `B` (a zero `B` would leave `A` without gradient) for
    /// LoRA, the base parameters for full replacement, zero for deltas.
    pub fn new(config: &HyperConfig, base: &Mlp, codec: EmbeddingCodec) -> Result<Self> {
        if let AssemblyMode::Lora { rank } = config.mode {
            check_rank(base.config(), rank)?;
        }
        if !(config.output_scale.is_finite() && config.output_scale > 0.0) {
            return Err(Error::Config(alloc::format!(
                "output_scale must be positive, got {}",
                config.output_scale
            )));
        }
        let layout = predicted_layout(base.config(), config.mode);
        let net_cfg = MlpConfig {
            input_dim: codec.dim(),
            hidden_widths: config.hidden_widths.clone(),
            output_dim: layout.len(),
            activation: Activation::Tanh,
            init_seed: config.init_seed,
        };
        let mut net = Mlp::new(net_cfg)?;
        let bias = match config.mode {
            AssemblyMode::Lora { .. } => {
                let mut rng = rng::seeded(rng::derive_seed(config.init_seed, 1));
                let normal = Normal::new(0.0, LORA_INIT_STD).expect("valid normal");
                let mut v = alloc::vec![0.0; layout.len()];
                for e in layout.entries().iter().filter(|e| e.kind == BlockKind::LoraB) {
                    for x in &mut v[e.offset..e.offset + e.len()] {
                        *x = normal.sample(&mut rng) / config.output_scale;
                    }
                }
                v
            }
            AssemblyMode::Full => base
                .params()
                .values
                .iter()
                .map(|x| x / config.output_scale)
                .collect(),
            AssemblyMode::Delta => alloc::vec![0.0; layout.len()],
        };
        let last = net.layers_mut().last_mut().expect("at least one layer");
        last.weight = Mat::zeros(last.weight.rows(), last.weight.cols());
        last.bias = Mat::from_vec(1, bias.len(), bias);
        Ok(Self {
            net,
            output_scale: config.output_scale,
            mode: config.mode,
            target: base.config().clone(),
            codec,
        })
    }

    /// Reassembles a trained hypernetwork from its parts.
    pub fn from_parts(
        net: Mlp,
        output_scale: f64,
        mode: AssemblyMode,
        target: MlpConfig,
        codec: EmbeddingCodec,
    ) -> Result<Self> {
        let expected = predicted_layout(&target, mode).len();
        if net.config().output_dim != expected {
            return Err(Error::Shape {
                context: "hypernetwork output",
                expected,
                found: net.config().output_dim,
                offset: None,
            });
        }
        Ok(Self {
            net,
            output_scale,
            mode,
            target,
            codec,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        self.net.set_params(values)
    }

    pub fn mode(&self) -> AssemblyMode {
        self.mode
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    pub fn codec(&self) -> &EmbeddingCodec {
        &self.codec
    }

    pub fn target(&self) -> &MlpConfig {
        &self.target
    }

    pub fn output_layout(&self) -> ParamLayout {
        predicted_layout(&self.target, self.mode)
    }

    pub fn output_dim(&self) -> usize {
        self.net.config().output_dim
    }

    fn check_embedding(&self, e: &TaskEmbedding) -> Result<()> {
        let dim = self.net.config().input_dim;
        if e.normalized.len() != dim {
            return Err(Error::Shape {
                context: "task embedding",
                expected: dim,
                found: e.normalized.len(),
                offset: None,
            });
        }
        Ok(())
    }

    /// `θ′ = scale · H(λ)` in the layout of [`Self::output_layout`].
    pub fn predict(&self, embedding: &TaskEmbedding) -> Result<ParamVector> {
        self.check_embedding(embedding)?;
        let x = Mat::from_vec(1, embedding.normalized.len(), embedding.normalized.clone());
        let out = self.net.forward(&x);
        let values = out.as_slice().iter().map(|v| v * self.output_scale).collect();
        ParamVector::new(values, self.output_layout())
    }

    /// Predicts and assembles in one go.
    pub fn assemble(&self, base: &Mlp, embedding: &TaskEmbedding) -> Result<Mlp> {
        let theta = self.predict(embedding)?;
        apply_predicted(base, &theta, self.mode)
    }

    /// Records a batch prediction (`T x P`, already scaled) and returns it
    /// together with the hypernetwork parameter leaves.
    pub fn on_tape(&self, tape: &mut Tape, embeddings: &Mat) -> Result<(Var, Vec<Var>)> {
        let dim = self.net.config().input_dim;
        if embeddings.cols() != dim {
            return Err(Error::Shape {
                context: "task embedding",
                expected: dim,
                found: embeddings.cols(),
                offset: None,
            });
        }
        let taped = self.net.on_tape(tape, true);
        let x = tape.constant(embeddings.clone());
        let raw = taped.forward(tape, x);
        let out = if self.output_scale == 1.0 {
            raw
        } else {
            tape.scale(raw, self.output_scale)
        };
        Ok((out, taped.params()))
    }
}
