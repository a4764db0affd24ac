//! Low-rank adapters on every weight matrix of a frozen network.
//!
//! Layer `i` with weight `W₀ ∈ R^{m×n}` gets factors `A ∈ R^{r×n}` and
//! `B ∈ R^{m×r}` and computes with `W₀ + B·A`. Biases stay frozen.

use alloc::vec::Vec;
use rand_distr::{Distribution, Normal};

use super::mlp::{Dense, Mlp, MlpConfig, TapedMlp};
use crate::autodiff::{BlockKind, Mat, ParamLayout, ParamVector, Tape, Var};
use crate::error::{Error, Result};
use crate::rng;

/// Standard deviation of the random factor at initialization.
pub const LORA_INIT_STD: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct Adapter {
    /// `r x n`
    pub a: Mat,
    /// `m x r`
    pub b: Mat,
}

impl Adapter {
    /// `B · A`
    pub fn delta(&self) -> Mat {
        self.b.matmul(&self.a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoraNetwork {
    base: Mlp,
    rank: usize,
    adapters: Vec<Adapter>,
}

/// Layout of the adapter parameters: per layer, `A` row-major then `B`.
pub fn adapter_layout(config: &MlpConfig, rank: usize) -> ParamLayout {
    let mut layout = ParamLayout::new();
    for (i, (m, n)) in config.layer_dims().into_iter().enumerate() {
        layout.push(i, BlockKind::LoraA, rank, n);
        layout.push(i, BlockKind::LoraB, m, rank);
    }
    layout
}

/// Number of trainable adapter scalars: `Σ r·(m + n)`.
pub fn adapter_param_count(config: &MlpConfig, rank: usize) -> usize {
    config
        .layer_dims()
        .iter()
        .map(|&(m, n)| rank * (m + n))
        .sum()
}

/// Rejects ranks that are not below `min(m, n)` of a hidden-to-hidden layer.
///
/// The input and output layers are adapted too, but their smaller side is
/// the input or output dimension (1–3 here), so they are exempt; their
/// update is simply allowed to be full rank.
pub fn check_rank(config: &MlpConfig, rank: usize) -> Result<()> {
    let dims = config.layer_dims();
    if rank == 0 {
        let (m, n) = dims[0];
        return Err(Error::Rank {
            layer: 0,
            rank,
            rows: m,
            cols: n,
        });
    }
    let interior: Vec<usize> = if dims.len() > 2 {
        (1..dims.len() - 1).collect()
    } else {
        (0..dims.len()).collect()
    };
    for i in interior {
        let (m, n) = dims[i];
        if rank >= m.min(n) {
            return Err(Error::Rank {
                layer: i,
                rank,
                rows: m,
                cols: n,
            });
        }
    }
    Ok(())
}

/// Wraps a trained network with zero-effect adapters: `A = 0`,
/// `B ~ N(0, 0.01²)`.
pub fn lora_wrap(base: &Mlp, rank: usize, seed: u64) -> Result<LoraNetwork> {
    check_rank(base.config(), rank)?;
    let mut rng = rng::seeded(seed);
    let normal = Normal::new(0.0, LORA_INIT_STD).expect("valid normal");
    let adapters = base
        .config()
        .layer_dims()
        .into_iter()
        .map(|(m, n)| Adapter {
            a: Mat::zeros(rank, n),
            b: Mat::from_fn(m, rank, |_, _| normal.sample(&mut rng)),
        })
        .collect();
    Ok(LoraNetwork {
        base: base.clone(),
        rank,
        adapters,
    })
}

impl LoraNetwork {
    pub fn base(&self) -> &Mlp {
        &self.base
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn adapters(&self) -> &[Adapter] {
        &self.adapters
    }

    pub fn adapters_mut(&mut self) -> &mut [Adapter] {
        &mut self.adapters
    }

    pub fn layout(&self) -> ParamLayout {
        adapter_layout(self.base.config(), self.rank)
    }

    pub fn adapter_params(&self) -> ParamVector {
        let mut values = Vec::with_capacity(self.layout().len());
        for ad in &self.adapters {
            values.extend_from_slice(ad.a.as_slice());
            values.extend_from_slice(ad.b.as_slice());
        }
        ParamVector {
            values,
            layout: self.layout(),
        }
    }

    pub fn set_adapter_values(&mut self, values: &[f64]) -> Result<()> {
        let blocks = self.layout().unflatten(values)?;
        let mut it = blocks.into_iter();
        for ad in &mut self.adapters {
            ad.a = it.next().expect("layout has A per layer");
            ad.b = it.next().expect("layout has B per layer");
        }
        Ok(())
    }

    pub fn set_adapter_params(&mut self, params: &ParamVector) -> Result<()> {
        params.expect_layout(&self.layout())?;
        self.set_adapter_values(&params.values)
    }

    /// Dense network with `W₀ + B·A` per layer.
    pub fn effective_weights(&self) -> Mlp {
        let mut net = self.base.clone();
        for (l, ad) in net.layers_mut().iter_mut().zip(&self.adapters) {
            l.weight.axpy(1.0, &ad.delta());
        }
        net
    }

    /// Forward pass computing `W₀x + B(Ax)` without forming `B·A`.
    pub fn forward(&self, x: &Mat) -> Mat {
        let act = self.base.config().activation;
        let last = self.adapters.len() - 1;
        let mut h = x.clone();
        for (i, (Dense { weight, bias }, ad)) in
            self.base.layers().iter().zip(&self.adapters).enumerate()
        {
            let mut z = h.matmul_t(weight);
            let low = h.matmul_t(&ad.a).matmul_t(&ad.b);
            z.axpy(1.0, &low);
            let b = bias.as_slice();
            let c = z.cols();
            for (k, v) in z.as_mut_slice().iter_mut().enumerate() {
                *v += b[k % c];
                if i != last {
                    *v = act.apply(*v);
                }
            }
            h = z;
        }
        h
    }

    /// Frozen base as constants, adapters as leaves (in layout order).
    pub fn on_tape(&self, tape: &mut Tape) -> (TapedMlp, Vec<Var>) {
        let mut leaves = Vec::with_capacity(2 * self.adapters.len());
        let mut layers = Vec::with_capacity(self.adapters.len());
        for (l, ad) in self.base.layers().iter().zip(&self.adapters) {
            let a = tape.leaf(ad.a.clone());
            let b = tape.leaf(ad.b.clone());
            leaves.push(a);
            leaves.push(b);
            let w0 = tape.constant(l.weight.clone());
            let delta = tape.matmul(b, a);
            let w = tape.add(w0, delta);
            layers.push((w, tape.constant(l.bias.clone())));
        }
        (
            TapedMlp {
                layers,
                activation: self.base.config().activation,
            },
            leaves,
        )
    }
}
