//! Reverse-mode tape over dense matrices.
//!
//! Every operation appends a node holding its value and the recipe needed to
//! push adjoints back to its parents. Input derivatives are built out of the
//! same primitives (see [`super::jet`]), so any derivative value living on the
//! tape can itself be differentiated with respect to the parameters.

use alloc::vec;
use alloc::vec::Vec;

use super::mat::{gemm, Mat, View};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A `1 x 1` node.
pub type Scalar = Var;

/// Elementwise primitives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Unary {
    Neg,
    Tanh,
    Exp,
    Sin,
    Cos,
    Sqrt,
    Ln,
    LogSigmoid,
    Square,
    Powf(f64),
    Relu,
}

impl Unary {
    pub fn name(self) -> &'static str {
        match self {
            Unary::Neg => "neg",
            Unary::Tanh => "tanh",
            Unary::Exp => "exp",
            Unary::Sin => "sin",
            Unary::Cos => "cos",
            Unary::Sqrt => "sqrt",
            Unary::Ln => "ln",
            Unary::LogSigmoid => "log_sigmoid",
            Unary::Square => "square",
            Unary::Powf(_) => "powf",
            Unary::Relu => "relu",
        }
    }

    /// Plain evaluation, with the domain checks applied by the tape.
    pub fn eval(self, x: f64) -> Result<f64> {
        let y = match self {
            Unary::Neg => -x,
            Unary::Tanh => libm::tanh(x),
            Unary::Exp => libm::exp(x),
            Unary::Sin => libm::sin(x),
            Unary::Cos => libm::cos(x),
            Unary::Sqrt => {
                if x < 0.0 {
                    return Err(self.domain(x));
                }
                libm::sqrt(x)
            }
            Unary::Ln => {
                if x <= 0.0 || x.is_nan() {
                    return Err(self.domain(x));
                }
                libm::log(x)
            }
            Unary::LogSigmoid => log_sigmoid(x),
            Unary::Square => x * x,
            Unary::Powf(p) => {
                if x < 0.0 && libm::trunc(p) != p {
                    return Err(self.domain(x));
                }
                if x == 0.0 && p < 0.0 {
                    return Err(self.domain(x));
                }
                libm::pow(x, p)
            }
            Unary::Relu => x.max(0.0),
        };
        Ok(y)
    }

    /// dy/dx given the input `x` and output `y`.
    fn slope(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Neg => -1.0,
            Unary::Tanh => 1.0 - y * y,
            Unary::Exp => y,
            Unary::Sin => libm::cos(x),
            Unary::Cos => -libm::sin(x),
            Unary::Sqrt => 0.5 / y,
            Unary::Ln => 1.0 / x,
            Unary::LogSigmoid => sigmoid(-x),
            Unary::Square => 2.0 * x,
            Unary::Powf(p) => p * libm::pow(x, p - 1.0),
            Unary::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn domain(self, operand: f64) -> Error {
        Error::Domain {
            primitive: self.name(),
            operand,
        }
    }
}

/// `ln σ(x)` without overflow for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    x.min(0.0) - libm::log1p(libm::exp(-x.abs()))
}

/// Logistic function evaluated without overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Unary(Var, Unary),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    MulScalar(Var, Var),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    AddRow(Var, Var),
    Sum(Var),
    Mean(Var),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    Reshape(Var),
}

#[derive(Clone, Debug)]
struct Node {
    value: Mat,
    op: Op,
    tracked: bool,
}

/// Single-threaded record of a computation.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by a backward pass.
#[derive(Debug)]
pub struct Grads {
    adj: Vec<Option<Mat>>,
}

impl Grads {
    /// Adjoint of `v`, or `None` when nothing flowed into it.
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.adj.get(v.0).and_then(Option::as_ref)
    }

    /// Adjoint of `v` with the given shape filled in with zeros when absent.
    pub fn get_or_zeros(&self, v: Var, rows: usize, cols: usize) -> Mat {
        self.get(v).cloned().unwrap_or_else(|| Mat::zeros(rows, cols))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A value with zero derivative with respect to everything.
    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar_leaf(&mut self, value: f64) -> Scalar {
        self.leaf(Mat::scalar(value))
    }

    pub fn scalar_constant(&mut self, value: f64) -> Scalar {
        self.constant(Mat::scalar(value))
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Value of a `1 x 1` node.
    pub fn item(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    pub fn is_tracked(&self, v: Var) -> bool {
        self.tracked(v)
    }

    pub fn unary(&mut self, x: Var, op: Unary) -> Result<Var> {
        let xv = &self.nodes[x.0].value;
        let mut out = Mat::zeros(xv.rows(), xv.cols());
        for (o, &a) in out.as_mut_slice().iter_mut().zip(xv.as_slice()) {
            *o = op.eval(a)?;
        }
        let tracked = self.tracked(x);
        Ok(self.push(out, Op::Unary(x, op), tracked))
    }

    fn unary_infallible(&mut self, x: Var, op: Unary) -> Var {
        self.unary(x, op)
            .expect("primitive without domain restrictions failed")
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.unary_infallible(x, Unary::Neg)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary_infallible(x, Unary::Tanh)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary_infallible(x, Unary::Exp)
    }

    pub fn sin(&mut self, x: Var) -> Var {
        self.unary_infallible(x, Unary::Sin)
    }

    pub fn cos(&mut self, x: Var) -> Var {
        self.unary_infallible(x, Unary::Cos)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary_infallible(x, Unary::Square)
    }

    pub fn log_sigmoid(&mut self, x: Var) -> Var {
        self.unary_infallible(x, Unary::LogSigmoid)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary_infallible(x, Unary::Relu)
    }

    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Unary::Sqrt)
    }

    pub fn ln(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Unary::Ln)
    }

    pub fn powf(&mut self, x: Var, p: f64) -> Result<Var> {
        self.unary(x, Unary::Powf(p))
    }

    fn binary_shape(&self, a: Var, b: Var, what: &'static str) {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert_eq!(sa, sb, "{what}: shape mismatch {sa:?} vs {sb:?}");
    }

    fn zip(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let out = self.nodes[a.0].value.zip_map(&self.nodes[b.0].value, f);
        let tracked = self.tracked(a) || self.tracked(b);
        self.push(out, op, tracked)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary_shape(a, b, "add");
        self.zip(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary_shape(a, b, "sub");
        self.zip(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary_shape(a, b, "mul");
        self.zip(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shape(a, b, "div");
        if let Some(&z) = self.nodes[b.0].value.as_slice().iter().find(|&&d| d == 0.0) {
            return Err(Error::Domain {
                primitive: "div",
                operand: z,
            });
        }
        Ok(self.zip(a, b, Op::Div(a, b), |x, y| x / y))
    }

    /// Sum of any number of same-shaped nodes.
    pub fn add_all(&mut self, terms: &[Var]) -> Var {
        let (&first, rest) = terms.split_first().expect("add_all of no terms");
        rest.iter().fold(first, |acc, &t| self.add(acc, t))
    }

    /// `c * x`
    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let out = self.nodes[x.0].value.map(|v| v * c);
        let tracked = self.tracked(x);
        self.push(out, Op::Scale(x, c), tracked)
    }

    /// `x + c`
    pub fn offset(&mut self, x: Var, c: f64) -> Var {
        let out = self.nodes[x.0].value.map(|v| v + c);
        let tracked = self.tracked(x);
        self.push(out, Op::Offset(x), tracked)
    }

    /// Matrix `x` times the `1 x 1` node `s`.
    pub fn mul_scalar(&mut self, x: Var, s: Scalar) -> Var {
        assert_eq!(self.shape(s), (1, 1), "mul_scalar needs a 1x1 factor");
        let c = self.item(s);
        let out = self.nodes[x.0].value.map(|v| v * c);
        let tracked = self.tracked(x) || self.tracked(s);
        self.push(out, Op::MulScalar(x, s), tracked)
    }

    /// `a · b`
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.nodes[a.0].value.matmul(&self.nodes[b.0].value);
        let tracked = self.tracked(a) || self.tracked(b);
        self.push(out, Op::MatMul(a, b), tracked)
    }

    /// `a · bᵀ`; with `b` stored as `out x in` this is a dense layer.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let out = self.nodes[a.0].value.matmul_t(&self.nodes[b.0].value);
        let tracked = self.tracked(a) || self.tracked(b);
        self.push(out, Op::MatMulT(a, b), tracked)
    }

    /// Adds the `1 x c` row `bias` to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(self.shape(bias), (1, c), "add_row bias shape");
        let b = self.nodes[bias.0].value.as_slice();
        let mut out = self.nodes[x.0].value.clone();
        for i in 0..r {
            for (o, &bv) in out.as_mut_slice()[i * c..(i + 1) * c].iter_mut().zip(b) {
                *o += bv;
            }
        }
        let tracked = self.tracked(x) || self.tracked(bias);
        self.push(out, Op::AddRow(x, bias), tracked)
    }

    pub fn sum(&mut self, x: Var) -> Scalar {
        let out = Mat::scalar(self.nodes[x.0].value.sum());
        let tracked = self.tracked(x);
        self.push(out, Op::Sum(x), tracked)
    }

    pub fn mean(&mut self, x: Var) -> Scalar {
        let out = Mat::scalar(self.nodes[x.0].value.mean());
        let tracked = self.tracked(x);
        self.push(out, Op::Mean(x), tracked)
    }

    /// Mean of squared entries.
    pub fn mean_square(&mut self, x: Var) -> Scalar {
        let sq = self.square(x);
        self.mean(sq)
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Var {
        let out = self.nodes[x.0].value.slice_rows(start, len);
        let tracked = self.tracked(x);
        self.push(out, Op::SliceRows(x, start), tracked)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let out = self.nodes[x.0].value.slice_cols(start, len);
        let tracked = self.tracked(x);
        self.push(out, Op::SliceCols(x, start), tracked)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let mats: Vec<&Mat> = parts.iter().map(|p| &self.nodes[p.0].value).collect();
        let out = Mat::hstack(&mats);
        let tracked = parts.iter().any(|&p| self.tracked(p));
        self.push(out, Op::ConcatCols(parts.to_vec()), tracked)
    }

    /// Reinterprets the row-major data of `x` with a new shape.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Var {
        let out = self.nodes[x.0].value.clone().reshaped(rows, cols);
        let tracked = self.tracked(x);
        self.push(out, Op::Reshape(x), tracked)
    }

    /// Backward pass from a finite scalar.
    pub fn backward(&self, root: Scalar) -> Result<Grads> {
        let v = self.value(root);
        assert_eq!(v.shape(), (1, 1), "backward root must be 1x1");
        let value = v.item();
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { value });
        }
        Ok(self.backward_seeded(root, Mat::scalar(1.0)))
    }

    /// Backward pass starting from an arbitrary cotangent for `root`.
    pub fn backward_seeded(&self, root: Var, seed: Mat) -> Grads {
        assert_eq!(seed.shape(), self.shape(root), "seed shape");
        let mut adj: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        adj[root.0] = Some(seed);
        for i in (0..=root.0).rev() {
            if !self.nodes[i].tracked {
                continue;
            }
            let g = match &self.nodes[i].op {
                Op::Leaf => continue,
                _ => match adj[i].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            self.propagate(i, &g, &mut adj);
        }
        Grads { adj }
    }

    /// Gradient of `loss` with respect to `wrt`, flattened in the given order.
    pub fn grad(&self, loss: Scalar, wrt: &[Var]) -> Result<Vec<f64>> {
        let grads = self.backward(loss)?;
        flatten_grads(self, &grads, wrt)
    }

    fn propagate(&self, i: usize, g: &Mat, adj: &mut [Option<Mat>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Unary(x, op) => {
                if self.tracked(*x) {
                    let xv = &self.nodes[x.0].value;
                    let y = &node.value;
                    let contrib = Mat::from_vec(
                        g.rows(),
                        g.cols(),
                        g.as_slice()
                            .iter()
                            .zip(xv.as_slice().iter().zip(y.as_slice()))
                            .map(|(&gi, (&xi, &yi))| gi * op.slope(xi, yi))
                            .collect(),
                    );
                    accumulate_owned(adj, *x, contrib);
                }
            }
            Op::Add(a, b) => {
                if self.tracked(*a) {
                    accumulate(adj, *a, 1.0, g);
                }
                if self.tracked(*b) {
                    accumulate(adj, *b, 1.0, g);
                }
            }
            Op::Sub(a, b) => {
                if self.tracked(*a) {
                    accumulate(adj, *a, 1.0, g);
                }
                if self.tracked(*b) {
                    accumulate(adj, *b, -1.0, g);
                }
            }
            Op::Mul(a, b) => {
                if self.tracked(*a) {
                    accumulate_owned(adj, *a, g.zip_map(&self.nodes[b.0].value, |x, y| x * y));
                }
                if self.tracked(*b) {
                    accumulate_owned(adj, *b, g.zip_map(&self.nodes[a.0].value, |x, y| x * y));
                }
            }
            Op::Div(a, b) => {
                let bv = &self.nodes[b.0].value;
                if self.tracked(*a) {
                    accumulate_owned(adj, *a, g.zip_map(bv, |x, y| x / y));
                }
                if self.tracked(*b) {
                    // d(a/b)/db = -(a/b)/b
                    let q = g.zip_map(&node.value, |x, y| x * y);
                    accumulate_owned(adj, *b, q.zip_map(bv, |x, y| -x / y));
                }
            }
            Op::Scale(x, c) => {
                if self.tracked(*x) {
                    accumulate(adj, *x, *c, g);
                }
            }
            Op::Offset(x) => {
                if self.tracked(*x) {
                    accumulate(adj, *x, 1.0, g);
                }
            }
            Op::MulScalar(x, s) => {
                let c = self.nodes[s.0].value.item();
                if self.tracked(*x) {
                    accumulate(adj, *x, c, g);
                }
                if self.tracked(*s) {
                    let dot: f64 = g
                        .as_slice()
                        .iter()
                        .zip(self.nodes[x.0].value.as_slice())
                        .map(|(a, b)| a * b)
                        .sum();
                    accumulate_owned(adj, *s, Mat::scalar(dot));
                }
            }
            Op::MatMul(a, b) => {
                let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                if self.tracked(*a) {
                    // dA = G · Bᵀ
                    let slot = slot(adj, *a, av.rows(), av.cols());
                    gemm(1.0, View::of(g), View::of(bv).t(), 1.0, slot);
                }
                if self.tracked(*b) {
                    // dB = Aᵀ · G
                    let slot = slot(adj, *b, bv.rows(), bv.cols());
                    gemm(1.0, View::of(av).t(), View::of(g), 1.0, slot);
                }
            }
            Op::MatMulT(a, b) => {
                let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                if self.tracked(*a) {
                    // out = A·Bᵀ  =>  dA = G · B
                    let slot = slot(adj, *a, av.rows(), av.cols());
                    gemm(1.0, View::of(g), View::of(bv), 1.0, slot);
                }
                if self.tracked(*b) {
                    // dB = Gᵀ · A
                    let slot = slot(adj, *b, bv.rows(), bv.cols());
                    gemm(1.0, View::of(g).t(), View::of(av), 1.0, slot);
                }
            }
            Op::AddRow(x, bias) => {
                if self.tracked(*x) {
                    accumulate(adj, *x, 1.0, g);
                }
                if self.tracked(*bias) {
                    let c = g.cols();
                    let slot = slot(adj, *bias, 1, c);
                    let s = slot.as_mut_slice();
                    for r in 0..g.rows() {
                        for (acc, &gv) in s.iter_mut().zip(g.row(r)) {
                            *acc += gv;
                        }
                    }
                }
            }
            Op::Sum(x) | Op::Mean(x) => {
                if self.tracked(*x) {
                    let xv = &self.nodes[x.0].value;
                    let mut gv = g.item();
                    if matches!(node.op, Op::Mean(_)) && !xv.is_empty() {
                        gv /= xv.len() as f64;
                    }
                    let slot = slot(adj, *x, xv.rows(), xv.cols());
                    for s in slot.as_mut_slice() {
                        *s += gv;
                    }
                }
            }
            Op::SliceRows(x, start) => {
                if self.tracked(*x) {
                    let xv = &self.nodes[x.0].value;
                    let c = xv.cols();
                    let slot = slot(adj, *x, xv.rows(), c);
                    let dst = &mut slot.as_mut_slice()[start * c..(start + g.rows()) * c];
                    for (d, &s) in dst.iter_mut().zip(g.as_slice()) {
                        *d += s;
                    }
                }
            }
            Op::SliceCols(x, start) => {
                if self.tracked(*x) {
                    let xv = &self.nodes[x.0].value;
                    let slot = slot(adj, *x, xv.rows(), xv.cols());
                    for r in 0..g.rows() {
                        for (j, &s) in g.row(r).iter().enumerate() {
                            let cur = slot.get(r, start + j);
                            slot.set(r, start + j, cur + s);
                        }
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for p in parts {
                    let w = self.nodes[p.0].value.cols();
                    if self.tracked(*p) {
                        accumulate_owned(adj, *p, g.slice_cols(start, w));
                    }
                    start += w;
                }
            }
            Op::Reshape(x) => {
                if self.tracked(*x) {
                    let (r, c) = self.shape(*x);
                    accumulate_owned(adj, *x, g.clone().reshaped(r, c));
                }
            }
        }
    }
}

/// Flattens adjoints of `wrt` in order, rejecting non-finite entries.
pub fn flatten_grads(tape: &Tape, grads: &Grads, wrt: &[Var]) -> Result<Vec<f64>> {
    let total: usize = wrt.iter().map(|&v| tape.value(v).len()).sum();
    let mut out = Vec::with_capacity(total);
    for &v in wrt {
        match grads.get(v) {
            Some(g) => out.extend_from_slice(g.as_slice()),
            None => out.extend(core::iter::repeat_n(0.0, tape.value(v).len())),
        }
    }
    if let Some(offset) = out.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { offset });
    }
    Ok(out)
}

fn slot(adj: &mut [Option<Mat>], v: Var, rows: usize, cols: usize) -> &mut Mat {
    adj[v.0].get_or_insert_with(|| Mat::zeros(rows, cols))
}

fn accumulate(adj: &mut [Option<Mat>], v: Var, alpha: f64, g: &Mat) {
    match &mut adj[v.0] {
        Some(existing) => existing.axpy(alpha, g),
        empty => {
            *empty = Some(if alpha == 1.0 {
                g.clone()
            } else {
                g.map(|x| alpha * x)
            })
        }
    }
}

fn accumulate_owned(adj: &mut [Option<Mat>], v: Var, g: Mat) {
    match &mut adj[v.0] {
        Some(existing) => existing.axpy(1.0, &g),
        empty => *empty = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_of_zero_is_zero() {
        let mut t = Tape::new();
        let x = t.scalar_leaf(0.0);
        let y = t.tanh(x);
        assert_eq!(t.item(y), 0.0);
    }

    #[test]
    fn sigmoid_through_log_sigmoid_at_zero_is_half() {
        let mut t = Tape::new();
        let x = t.scalar_leaf(0.0);
        let ls = t.log_sigmoid(x);
        let s = t.exp(ls);
        assert!((t.item(s) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn composite_matches_plain_evaluation() {
        let (xv, yv) = (0.3, 0.7);
        let mut t = Tape::new();
        let x = t.scalar_leaf(xv);
        let y = t.scalar_leaf(yv);
        let xy = t.mul(x, y);
        let th = t.tanh(x);
        let f = t.add(xy, th);
        let plain = xv * yv + libm::tanh(xv);
        assert!((t.item(f) - plain).abs() <= 1e-14);
    }

    #[test]
    fn quadratic_gradient_is_twice_the_weights() {
        let w = [0.5, -1.25, 3.0, 0.0];
        let mut t = Tape::new();
        let wv = t.leaf(Mat::from_vec(1, 4, w.to_vec()));
        let sq = t.square(wv);
        let loss = t.sum(sq);
        let g = t.grad(loss, &[wv]).unwrap();
        let expected: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
        assert_eq!(g, expected);
    }

    #[test]
    fn tanh_slope_at_origin_recovers_input() {
        for xv in [-2.0, 0.1, 7.5] {
            let mut t = Tape::new();
            let w = t.scalar_leaf(0.0);
            let x = t.scalar_constant(xv);
            let wx = t.mul(w, x);
            let loss = t.tanh(wx);
            let g = t.grad(loss, &[w]).unwrap();
            assert!((g[0] - xv).abs() < 1e-15);
        }
    }

    #[test]
    fn domain_errors_name_the_primitive() {
        let mut t = Tape::new();
        let a = t.scalar_leaf(1.0);
        let z = t.scalar_constant(0.0);
        assert_eq!(
            t.div(a, z).unwrap_err(),
            Error::Domain {
                primitive: "div",
                operand: 0.0
            }
        );
        let neg = t.scalar_constant(-2.0);
        assert_eq!(
            t.ln(neg).unwrap_err(),
            Error::Domain {
                primitive: "ln",
                operand: -2.0
            }
        );
        assert!(matches!(
            t.sqrt(neg),
            Err(Error::Domain {
                primitive: "sqrt",
                ..
            })
        ));
    }

    #[test]
    fn non_finite_loss_is_rejected_before_backward() {
        let mut t = Tape::new();
        let x = t.scalar_leaf(f64::INFINITY);
        let y = t.scale(x, 2.0);
        assert!(matches!(t.backward(y), Err(Error::NonFiniteLoss { .. })));
    }

    #[test]
    fn non_finite_gradient_reports_offset() {
        let mut t = Tape::new();
        let x = t.leaf(Mat::from_vec(1, 3, vec![1.0, 0.0, 4.0]));
        let r = t.sqrt(x).unwrap();
        let loss = t.sum(r);
        assert_eq!(
            t.grad(loss, &[x]).unwrap_err(),
            Error::NonFiniteGradient { offset: 1 }
        );
    }

    #[test]
    fn constants_receive_no_adjoint() {
        let mut t = Tape::new();
        let c = t.scalar_constant(2.0);
        let x = t.scalar_leaf(3.0);
        let y = t.mul(c, x);
        let g = t.backward(y).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(x).unwrap().item(), 2.0);
    }
}
