//! The four ways of training a hypernetwork.
//!
//! * `B1`: outputs of the assembled network regressed on reference solutions.
//! * `B2`: predicted vectors regressed on pretrained per-task vectors.
//! * `B3`: like `B1` but the labels come from pretrained per-task networks.
//! * `B4`: the physics-informed loss of the assembled network, no labels.
//!
//! For the network-level regimes every task is recorded on its own tape
//! with the predicted vector as a leaf; the per-task vector gradients are
//! then pulled back through one batched hypernetwork pass. Tasks are
//! processed in a fixed order so runs are reproducible.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use super::loss::{pinn_loss, record_data_loss, record_pinn_loss, LossReport};
use super::pinn::{optimize, TrainConfig, TrainedArtifact};
use crate::autodiff::{flatten_grads, Mat, Tape};
use crate::error::{Error, Result};
use crate::nn::{apply_predicted, assemble_on_tape, HyperNetwork, Mlp, TaskEmbedding};
use crate::pde::{Labeled, PointSets, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    B1,
    B2,
    B3,
    B4,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::B1, Regime::B2, Regime::B3, Regime::B4];

    pub fn name(self) -> &'static str {
        match self {
            Regime::B1 => "b1",
            Regime::B2 => "b2",
            Regime::B3 => "b3",
            Regime::B4 => "b4",
        }
    }

    /// Whether per-task pretrained networks must exist before training.
    pub fn needs_pretrained(self) -> bool {
        matches!(self, Regime::B2 | Regime::B3)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown regime `{s}` (expected b1, b2, b3 or b4)")))
    }
}

/// One task as seen by hypernetwork training.
#[derive(Clone, Debug)]
pub struct HyperTask {
    pub task: Task,
    pub embedding: TaskEmbedding,
    /// Collocation/IC/BC points for the physics loss.
    pub points: PointSets,
    /// Supervised samples: reference values (`B1`, validation) or outputs of
    /// a pretrained network (`B3`).
    pub labels: Option<Labeled>,
    /// Pretrained vector in the hypernetwork output layout (`B2`).
    pub target: Option<Vec<f64>>,
}

impl HyperTask {
    pub fn new(task: Task, points: PointSets) -> Result<Self> {
        Ok(Self {
            embedding: task.embedding()?,
            task,
            points,
            labels: None,
            target: None,
        })
    }
}

fn embeddings(tasks: &[HyperTask], dim: usize) -> Result<Mat> {
    let mut data = Vec::with_capacity(tasks.len() * dim);
    for t in tasks {
        if t.embedding.normalized.len() != dim {
            return Err(Error::Shape {
                context: "task embedding",
                expected: dim,
                found: t.embedding.normalized.len(),
                offset: None,
            });
        }
        data.extend_from_slice(&t.embedding.normalized);
    }
    Ok(Mat::from_vec(tasks.len(), dim, data))
}

fn missing(what: &str, regime: Regime, i: usize) -> Error {
    Error::Config(format!("regime {regime} needs {what} for training task {i}"))
}

/// Checks that every task carries what `regime` consumes.
fn check_inputs(regime: Regime, hyper: &HyperNetwork, train: &[HyperTask], valid: &[HyperTask]) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Config("hypernetwork training needs at least one task".into()));
    }
    let p = hyper.output_dim();
    for (i, t) in train.iter().enumerate() {
        match regime {
            Regime::B1 | Regime::B3 if t.labels.is_none() => return Err(missing("labels", regime, i)),
            Regime::B2 => match &t.target {
                None => return Err(missing("a pretrained vector", regime, i)),
                Some(v) if v.len() != p => {
                    return Err(Error::Shape {
                        context: "pretrained vector vs hypernetwork output",
                        expected: p,
                        found: v.len(),
                        offset: Some(v.len().min(p)),
                    })
                }
                _ => {}
            },
            _ => {}
        }
    }
    if regime != Regime::B4 {
        if let Some(i) = valid.iter().position(|t| t.labels.is_none()) {
            return Err(Error::Config(format!(
                "regime {regime} validates against reference labels; validation task {i} has none"
            )));
        }
    }
    Ok(())
}

/// Validation score of a hypernetwork: mean physics loss (`B4`) or mean
/// data error (others) of the assembled networks over `valid`.
pub fn validation_score(regime: Regime, hyper: &HyperNetwork, base: &Mlp, valid: &[HyperTask], config: &TrainConfig) -> Result<f64> {
    if valid.is_empty() {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for t in valid {
        let net = hyper.assemble(base, &t.embedding)?;
        acc += match regime {
            Regime::B4 => pinn_loss(&net, &t.task, &t.points, &config.weights)?.total,
            _ => {
                let set = t.labels.as_ref().expect("checked");
                let out = net.forward(&set.points);
                let d = out.zip_map(&set.targets, |a, b| a - b);
                d.as_slice().iter().map(|v| v * v).sum::<f64>() / d.len().max(1) as f64
            }
        };
    }
    Ok(acc / valid.len() as f64)
}

/// Trains `hyper` in place and returns the run record (its `params` are
/// the hypernetwork parameters of the best-validation snapshot).
pub fn train_hyper(
    regime: Regime,
    hyper: &mut HyperNetwork,
    base: &Mlp,
    train: &[HyperTask],
    valid: &[HyperTask],
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainedArtifact> {
    check_inputs(regime, hyper, train, valid)?;
    let expected = hyper.target();
    if expected != base.config() {
        return Err(Error::Config(
            "hypernetwork was built for a different base architecture".into(),
        ));
    }
    let emb = embeddings(train, hyper.net().config().input_dim)?;
    let mode = hyper.mode();
    let p = hyper.output_dim();
    let n = train.len() as f64;
    let targets = (regime == Regime::B2).then(|| {
        let mut data = Vec::with_capacity(train.len() * p);
        for t in train {
            data.extend_from_slice(t.target.as_ref().expect("checked"));
        }
        Mat::from_vec(train.len(), p, data)
    });

    let mut scratch = hyper.clone();
    let weights = config.weights;
    let objective = |values: &[f64]| -> Result<(LossReport, Vec<f64>)> {
        scratch.set_params(values)?;
        let mut htape = Tape::new();
        let (out, leaves) = scratch.on_tape(&mut htape, &emb)?;
        if let Some(y) = &targets {
            let yv = htape.constant(y.clone());
            let diff = htape.sub(out, yv);
            let loss = htape.mean_square(diff);
            let report = LossReport::data(htape.item(loss));
            return Ok((report, htape.grad(loss, &leaves)?));
        }
        let predicted = htape.value(out).clone();
        let mut seed_rows = Vec::with_capacity(train.len() * p);
        let mut report = LossReport::default();
        for (i, t) in train.iter().enumerate() {
            let mut tape = Tape::new();
            let theta = tape.leaf(Mat::from_vec(1, p, predicted.row(i).to_vec()));
            let net = assemble_on_tape(&mut tape, base, theta, mode)?;
            let (loss, r) = match regime {
                Regime::B4 => record_pinn_loss(&mut tape, &net, &t.task, &t.points, &weights)?,
                _ => record_data_loss(&mut tape, &net, t.labels.as_ref().expect("checked"))?,
            };
            let g = tape.backward(loss)?;
            seed_rows.extend(g.get_or_zeros(theta, 1, p).as_slice().iter().map(|v| v / n));
            report.l_ic += r.l_ic / n;
            report.l_bc += r.l_bc / n;
            report.l_physics += r.l_physics / n;
            report.l_data += r.l_data / n;
            report.total += r.total / n;
        }
        let grads = htape.backward_seeded(out, Mat::from_vec(train.len(), p, seed_rows));
        Ok((report, flatten_grads(&htape, &grads, &leaves)?))
    };
    let mut probe = hyper.clone();
    let validate = |values: &[f64]| {
        probe.set_params(values)?;
        if valid.is_empty() {
            // fall back to the training objective's data/physics score
            return validation_score(regime, &probe, base, train, config);
        }
        validation_score(regime, &probe, base, valid, config)
    };
    let init = hyper.net().params();
    let art = optimize(init.values, init.layout, config, seed, objective, validate)?;
    hyper.set_params(&art.params.values)?;
    Ok(art)
}

/// Network the hypernetwork assigns to `task`.
pub fn assemble_for(hyper: &HyperNetwork, base: &Mlp, task: &Task) -> Result<Mlp> {
    let theta = hyper.predict(&task.embedding()?)?;
    apply_predicted(base, &theta, hyper.mode())
}
