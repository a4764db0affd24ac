//! Second-order input jets built from tape primitives.
//!
//! A jet carries a batch of values together with first and (optionally)
//! second partial derivatives along a few input coordinates. Propagating it
//! through a dense layer is three kinds of matrix product; propagating it
//! through an activation `σ` uses
//!
//! ```text
//! a    = σ(z)
//! a_d  = σ'(z) z_d
//! a_dd = σ''(z) z_d² + σ'(z) z_dd
//! ```
//!
//! Every quantity is an ordinary tape node, so a single reverse sweep yields
//! parameter gradients of any loss built from the derivatives.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::mat::Mat;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Pointwise nonlinearity of a dense network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Sine,
    /// Piecewise linear; only first-order jets are defined.
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            Activation::Sine => libm::sin(x),
            Activation::Relu => x.max(0.0),
        }
    }

    pub fn on_tape(self, tape: &mut Tape, z: Var) -> Var {
        match self {
            Activation::Tanh => tape.tanh(z),
            Activation::Sine => tape.sin(z),
            Activation::Relu => tape.relu(z),
        }
    }
}

/// Which input coordinates need first and second derivatives.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JetSpec {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

impl JetSpec {
    pub fn values_only() -> Self {
        Self::default()
    }

    /// First derivatives along `first`, second along `second` (⊆ `first`).
    pub fn new(first: &[usize], second: &[usize]) -> Self {
        debug_assert!(second.iter().all(|d| first.contains(d)));
        Self {
            first: first.to_vec(),
            second: second.to_vec(),
        }
    }

    pub fn order(&self) -> usize {
        if !self.second.is_empty() {
            2
        } else if !self.first.is_empty() {
            1
        } else {
            0
        }
    }
}

/// Batch of values with input derivatives, each an `N x width` node.
#[derive(Clone, Debug)]
pub struct BatchJet {
    pub value: Var,
    /// `(input coordinate, ∂/∂x_d)` in the order of [`JetSpec::first`].
    pub first: Vec<(usize, Var)>,
    /// `(input coordinate, ∂²/∂x_d²)`; `None` while identically zero.
    pub second: Vec<(usize, Option<Var>)>,
}

impl BatchJet {
    /// Seeds a jet at the inputs: derivative of coordinate `i` along `d` is δ_id.
    pub fn seed(tape: &mut Tape, points: &Mat, spec: &JetSpec) -> Result<Self> {
        let (n, dim) = points.shape();
        for &d in spec.first.iter().chain(&spec.second) {
            if d >= dim {
                return Err(Error::Shape {
                    context: "jet direction",
                    expected: dim,
                    found: d,
                    offset: None,
                });
            }
        }
        let value = tape.constant(points.clone());
        let first = spec
            .first
            .iter()
            .map(|&d| {
                let seed = Mat::from_fn(n, dim, |_, j| if j == d { 1.0 } else { 0.0 });
                (d, tape.constant(seed))
            })
            .collect();
        let second = spec.second.iter().map(|&d| (d, None)).collect();
        Ok(Self {
            value,
            first,
            second,
        })
    }

    pub fn d1(&self, dir: usize) -> Option<Var> {
        self.first.iter().find(|(d, _)| *d == dir).map(|&(_, v)| v)
    }

    /// Second derivative along `dir`; `Some(None)` means known to be zero.
    pub fn d2(&self, dir: usize) -> Option<Option<Var>> {
        self.second.iter().find(|(d, _)| *d == dir).map(|&(_, v)| v)
    }

    /// `x · Wᵀ + b` applied to the value, `x · Wᵀ` to every derivative.
    pub fn linear(&self, tape: &mut Tape, weight: Var, bias: Var) -> Self {
        let z = tape.matmul_t(self.value, weight);
        let value = tape.add_row(z, bias);
        let first = self
            .first
            .iter()
            .map(|&(d, v)| (d, tape.matmul_t(v, weight)))
            .collect();
        let second = self
            .second
            .iter()
            .map(|&(d, v)| (d, v.map(|v| tape.matmul_t(v, weight))))
            .collect();
        Self {
            value,
            first,
            second,
        }
    }

    /// Pushes the jet through an elementwise activation.
    pub fn activate(&self, tape: &mut Tape, act: Activation) -> Result<Self> {
        let z = self.value;
        // (σ(z), σ'(z), σ''(z) if needed)
        let need_second = !self.second.is_empty();
        let (value, slope, curvature) = match act {
            Activation::Tanh => {
                let t = tape.tanh(z);
                if self.first.is_empty() {
                    (t, None, None)
                } else {
                    let t2 = tape.square(t);
                    let neg = tape.neg(t2);
                    let s = tape.offset(neg, 1.0);
                    let c = if need_second {
                        let ts = tape.mul(t, s);
                        Some(tape.scale(ts, -2.0))
                    } else {
                        None
                    };
                    (t, Some(s), c)
                }
            }
            Activation::Sine => {
                let a = tape.sin(z);
                if self.first.is_empty() {
                    (a, None, None)
                } else {
                    let s = tape.cos(z);
                    let c = if need_second { Some(tape.neg(a)) } else { None };
                    (a, Some(s), c)
                }
            }
            Activation::Relu => {
                if need_second {
                    return Err(Error::Unsupported {
                        operation: "second-order jet",
                        detail: format!("{act:?} has no second derivative"),
                    });
                }
                let a = tape.relu(z);
                if self.first.is_empty() {
                    (a, None, None)
                } else {
                    // Heaviside step as a constant mask.
                    let mask = tape.value(z).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    (a, Some(tape.constant(mask)), None)
                }
            }
        };
        let first: Vec<(usize, Var)> = self
            .first
            .iter()
            .map(|&(d, zd)| (d, tape.mul(slope.expect("slope present with first derivatives"), zd)))
            .collect();
        let mut second = Vec::with_capacity(self.second.len());
        for &(d, zdd) in &self.second {
            let s = slope.expect("slope present with second derivatives");
            let c = curvature.expect("curvature present with second derivatives");
            let zd = self.d1(d).ok_or(Error::Config(format!(
                "second derivative along {d} requested without the first"
            )))?;
            let zd2 = tape.square(zd);
            let mut add = tape.mul(c, zd2);
            if let Some(zdd) = zdd {
                let lin = tape.mul(s, zdd);
                add = tape.add(add, lin);
            }
            second.push((d, Some(add)));
        }
        Ok(Self {
            value,
            first,
            second,
        })
    }

    /// Restricts the jet to output columns `start..start + len`.
    pub fn columns(&self, tape: &mut Tape, start: usize, len: usize) -> Self {
        Self {
            value: tape.slice_cols(self.value, start, len),
            first: self
                .first
                .iter()
                .map(|&(d, v)| (d, tape.slice_cols(v, start, len)))
                .collect(),
            second: self
                .second
                .iter()
                .map(|&(d, v)| (d, v.map(|v| tape.slice_cols(v, start, len))))
                .collect(),
        }
    }
}

/// Value and input derivatives of one scalar output at one point.
#[derive(Clone, Debug)]
pub struct Jet2 {
    pub value: Var,
    pub grad: Vec<Var>,
    /// Pure second partials, `None` where the spec did not ask for them.
    pub second: Vec<Option<Var>>,
}
