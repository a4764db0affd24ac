//! Physics-informed and supervised losses.
//!
//! Every component is a mean over points of the squared error summed over
//! output components (or equations), so magnitudes do not depend on the
//! point budget.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Mat, Plain, Scalar, Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{Mlp, TapedMlp};
use crate::pde::{BoundarySet, Field, Labeled, PointSets, Task};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub ic: f64,
    pub bc: f64,
    pub physics: f64,
    pub data: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            ic: 1.0,
            bc: 1.0,
            physics: 1.0,
            data: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_ic: f64,
    pub l_bc: f64,
    pub l_physics: f64,
    pub l_data: f64,
    pub total: f64,
}

impl LossReport {
    /// Report holding a single supervised term.
    pub fn data(l_data: f64) -> Self {
        Self {
            l_data,
            total: l_data,
            ..Self::default()
        }
    }

    pub fn components(&self) -> [f64; 4] {
        [self.l_ic, self.l_bc, self.l_physics, self.l_data]
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.components().iter().all(|c| c.is_finite())
    }
}

/// First row of `values` holding a non-finite entry.
fn first_bad_row(values: &Mat) -> Option<usize> {
    (0..values.rows()).find(|&i| values.row(i).iter().any(|v| !v.is_finite()))
}

fn ensure_finite(values: &Mat, points: &Mat, component: &'static str) -> Result<()> {
    match first_bad_row(values) {
        None => Ok(()),
        Some(i) => Err(Error::NonFiniteComponent {
            component,
            point: points.row(i).to_vec(),
        }),
    }
}

/// Per-component fields of a network at a batch of points, on the tape.
pub fn taped_fields(tape: &mut Tape, net: &TapedMlp, task: &Task, points: &Mat) -> Result<Vec<Field<Var>>> {
    let kind = task.kind();
    let jet = net.jet(tape, points, &kind.jet_spec())?;
    let mut zero = None;
    let mut fields = Vec::with_capacity(kind.output_dim());
    for c in 0..kind.output_dim() {
        let col = jet.columns(tape, c, 1);
        let mut f = Field::constant(col.value);
        for &(d, v) in &col.first {
            f.d1[d] = Some(v);
        }
        for &(d, v) in &col.second {
            f.d2[d] = Some(match v {
                Some(v) => v,
                None => *zero.get_or_insert_with(|| tape.constant(Mat::zeros(points.rows(), 1))),
            });
        }
        fields.push(f);
    }
    Ok(fields)
}

/// Mean over rows of the row sums of squares of `parts` (each `N x 1`).
fn mean_sum_of_squares(tape: &mut Tape, parts: &[Var]) -> Scalar {
    let squares: Vec<Var> = parts.iter().map(|&r| tape.square(r)).collect();
    let sum = tape.add_all(&squares);
    tape.mean(sum)
}

/// Supervised mismatch `mean_i Σ_c (net(x_i)_c − y_ic)²` on the tape.
fn record_labeled(tape: &mut Tape, net: &TapedMlp, set: &Labeled, component: &'static str) -> Result<Scalar> {
    let x = tape.constant(set.points.clone());
    let out = net.forward(tape, x);
    ensure_finite(tape.value(out), &set.points, component)?;
    let y = tape.constant(set.targets.clone());
    let diff = tape.sub(out, y);
    let ms = tape.mean_square(diff);
    Ok(tape.scale(ms, set.targets.cols() as f64))
}

/// Records the physics-informed loss of `net` on `task` and returns the
/// weighted total together with its per-component values.
pub fn record_pinn_loss(
    tape: &mut Tape,
    net: &TapedMlp,
    task: &Task,
    pts: &PointSets,
    weights: &LossWeights,
) -> Result<(Scalar, LossReport)> {
    let mut report = LossReport::default();
    let mut terms = Vec::with_capacity(3);

    let fields = taped_fields(tape, net, task, &pts.collocation)?;
    let res = task.residual(tape, &fields);
    for &r in &res {
        ensure_finite(tape.value(r), &pts.collocation, "physics")?;
    }
    let phys = mean_sum_of_squares(tape, &res);
    report.l_physics = tape.item(phys);
    terms.push(tape.scale(phys, weights.physics));

    if let Some(ic) = &pts.initial {
        let l = record_labeled(tape, net, ic, "initial")?;
        report.l_ic = tape.item(l);
        terms.push(tape.scale(l, weights.ic));
    }

    match &pts.boundary {
        BoundarySet::Dirichlet(set) if !set.is_empty() => {
            let l = record_labeled(tape, net, set, "boundary")?;
            report.l_bc = tape.item(l);
            terms.push(tape.scale(l, weights.bc));
        }
        BoundarySet::Periodic { left, right } if left.rows() > 0 => {
            let a = tape.constant(left.clone());
            let b = tape.constant(right.clone());
            let ua = net.forward(tape, a);
            let ub = net.forward(tape, b);
            ensure_finite(tape.value(ua), left, "boundary")?;
            ensure_finite(tape.value(ub), right, "boundary")?;
            let diff = tape.sub(ua, ub);
            let cols = tape.shape(diff).1;
            let ms = tape.mean_square(diff);
            let l = tape.scale(ms, cols as f64);
            report.l_bc = tape.item(l);
            terms.push(tape.scale(l, weights.bc));
        }
        _ => {}
    }

    let total = tape.add_all(&terms);
    report.total = tape.item(total);
    Ok((total, report))
}

/// Mean squared error over points and components, on the tape.
pub fn record_data_loss(tape: &mut Tape, net: &TapedMlp, set: &Labeled) -> Result<(Scalar, LossReport)> {
    let x = tape.constant(set.points.clone());
    let out = net.forward(tape, x);
    ensure_finite(tape.value(out), &set.points, "data")?;
    let y = tape.constant(set.targets.clone());
    let diff = tape.sub(out, y);
    let l = tape.mean_square(diff);
    Ok((l, LossReport::data(tape.item(l))))
}

/// Anything that can be scored by [`pinn_loss`].
pub trait FieldModel {
    /// Outputs at `N` points, `N x components`.
    fn values(&self, points: &Mat) -> Result<Mat>;
    /// Residuals at `N` points, `N x equations`.
    fn residuals(&self, task: &Task, points: &Mat) -> Result<Mat>;
}

impl FieldModel for Mlp {
    fn values(&self, points: &Mat) -> Result<Mat> {
        Ok(self.forward(points))
    }

    fn residuals(&self, task: &Task, points: &Mat) -> Result<Mat> {
        let mut tape = Tape::new();
        let net = self.on_tape(&mut tape, false);
        let fields = taped_fields(&mut tape, &net, task, points)?;
        let res = task.residual(&mut tape, &fields);
        let parts: Vec<&Mat> = res.iter().map(|&r| tape.value(r)).collect();
        Ok(Mat::hstack(&parts))
    }
}

/// The closed-form solution of a task, posing as a network.
#[derive(Clone, Copy, Debug)]
pub struct AnalyticModel<'a>(pub &'a Task);

impl AnalyticModel<'_> {
    fn unsupported(&self) -> Error {
        Error::Unsupported {
            operation: "analytic model",
            detail: alloc::format!("{} has no closed-form solution", self.0.kind()),
        }
    }
}

impl FieldModel for AnalyticModel<'_> {
    fn values(&self, points: &Mat) -> Result<Mat> {
        let c = self.0.kind().output_dim();
        let mut data = Vec::with_capacity(points.rows() * c);
        for i in 0..points.rows() {
            data.extend(self.0.analytic(points.row(i)).ok_or_else(|| self.unsupported())?);
        }
        Ok(Mat::from_vec(points.rows(), c, data))
    }

    fn residuals(&self, task: &Task, points: &Mat) -> Result<Mat> {
        let mut data = Vec::new();
        let mut eqs = 0;
        for i in 0..points.rows() {
            let fields = task.analytic_fields(points.row(i)).ok_or_else(|| self.unsupported())?;
            let r = task.residual(&mut Plain, &fields);
            eqs = r.len();
            data.extend(r);
        }
        Ok(Mat::from_vec(points.rows(), eqs, data))
    }
}

fn labeled_mse(model: &(impl FieldModel + ?Sized), set: &Labeled, component: &'static str) -> Result<f64> {
    let out = model.values(&set.points)?;
    ensure_finite(&out, &set.points, component)?;
    let d = out.zip_map(&set.targets, |a, b| a - b);
    Ok(d.as_slice().iter().map(|v| v * v).sum::<f64>() / set.len().max(1) as f64)
}

/// The physics-informed loss evaluated without recording gradients.
pub fn pinn_loss(
    model: &(impl FieldModel + ?Sized),
    task: &Task,
    pts: &PointSets,
    weights: &LossWeights,
) -> Result<LossReport> {
    let mut r = LossReport::default();
    let res = model.residuals(task, &pts.collocation)?;
    ensure_finite(&res, &pts.collocation, "physics")?;
    r.l_physics = res.as_slice().iter().map(|v| v * v).sum::<f64>() / res.rows().max(1) as f64;
    if let Some(ic) = &pts.initial {
        r.l_ic = labeled_mse(model, ic, "initial")?;
    }
    match &pts.boundary {
        BoundarySet::Dirichlet(set) if !set.is_empty() => r.l_bc = labeled_mse(model, set, "boundary")?,
        BoundarySet::Periodic { left, right } if left.rows() > 0 => {
            let a = model.values(left)?;
            let b = model.values(right)?;
            ensure_finite(&a, left, "boundary")?;
            ensure_finite(&b, right, "boundary")?;
            let d = a.zip_map(&b, |p, q| p - q);
            r.l_bc = d.as_slice().iter().map(|v| v * v).sum::<f64>() / left.rows() as f64;
        }
        _ => {}
    }
    r.total = weights.physics * r.l_physics + weights.ic * r.l_ic + weights.bc * r.l_bc;
    Ok(r)
}
