use alloc::boxed::Box;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::loss::{pinn_loss, record_pinn_loss, LossReport, LossWeights};
use super::schedule::{Scale, Schedule};
use crate::autodiff::{ParamLayout, ParamVector, Tape};
use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpConfig};
use crate::pde::{make_point_sets, PointBudget, PointSets, SystemKind, Task};
use crate::rng;

/// Losses above this count as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Everything that shapes a training run besides the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub schedule: Schedule,
    pub budget: PointBudget,
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl TrainConfig {
    pub fn pinn(kind: SystemKind, scale: Scale) -> Self {
        Self::with(Schedule::pinn(scale), kind)
    }

    pub fn lora(kind: SystemKind, scale: Scale) -> Self {
        Self::with(Schedule::lora(scale), kind)
    }

    pub fn hyper(kind: SystemKind, scale: Scale) -> Self {
        Self::with(Schedule::hyper(scale), kind)
    }

    fn with(schedule: Schedule, kind: SystemKind) -> Self {
        Self {
            schedule,
            budget: PointBudget::standard(kind),
            weights: LossWeights::default(),
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: LossReport,
    pub lr: f64,
    pub val_total: Option<f64>,
}

/// Result of one optimization run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedArtifact {
    /// Best-validation snapshot.
    pub params: ParamVector,
    pub history: Vec<EpochRecord>,
    pub epochs_run: usize,
    /// Epoch whose parameters were kept (`epochs_run` for the final ones).
    pub best_epoch: usize,
    pub best_val: f64,
    /// Seconds; zero when built without `std`.
    pub wall_time: f64,
    pub config: TrainConfig,
    pub seed: u64,
}

impl TrainedArtifact {
    /// Training loss recorded at the kept snapshot (or the last one recorded).
    pub fn final_train_loss(&self) -> f64 {
        self.history
            .iter()
            .find(|r| r.epoch == self.best_epoch)
            .or(self.history.last())
            .map_or(f64::NAN, |r| r.train.total)
    }

    /// First epoch whose training loss is at or below `target`.
    pub fn epochs_to_reach(&self, target: f64) -> Option<usize> {
        self.history.iter().find(|r| r.train.total <= target).map(|r| r.epoch)
    }
}

#[cfg(feature = "std")]
struct Stopwatch(std::time::Instant);

#[cfg(feature = "std")]
impl Stopwatch {
    fn start() -> Self {
        Self(std::time::Instant::now())
    }
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(not(feature = "std"))]
struct Stopwatch;

#[cfg(not(feature = "std"))]
impl Stopwatch {
    fn start() -> Self {
        Self
    }
    fn seconds(&self) -> f64 {
        0.0
    }
}

fn diverged(epoch: usize, loss: f64, history: &[EpochRecord]) -> Error {
    Error::Diverged {
        epoch,
        loss,
        history: Box::new(history.to_vec()),
    }
}

/// Full-batch Adam on `objective` with the schedule of `config`, keeping the
/// parameters with the lowest `validate` score.
pub(crate) fn optimize(
    init: Vec<f64>,
    layout: ParamLayout,
    config: &TrainConfig,
    seed: u64,
    mut objective: impl FnMut(&[f64]) -> Result<(LossReport, Vec<f64>)>,
    mut validate: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<TrainedArtifact> {
    let schedule = &config.schedule;
    schedule.validate()?;
    let clock = Stopwatch::start();
    let mut params = init;
    let mut opt = Adam::new(params.len(), config.adam);
    let mut history: Vec<EpochRecord> = Vec::with_capacity(schedule.max_epochs);
    let mut best = (f64::INFINITY, 0usize, params.clone());
    let mut stopped_at = None;

    for epoch in 0..schedule.max_epochs {
        let (report, grads) = match objective(&params) {
            Ok(v) => v,
            Err(e) if e.is_numerical() => return Err(diverged(epoch, f64::NAN, &history)),
            Err(e) => return Err(e),
        };
        if !report.is_finite() || report.total > DIVERGENCE_THRESHOLD {
            return Err(diverged(epoch, report.total, &history));
        }
        let lr = schedule.lr(epoch);
        let mut val_total = None;
        if epoch % schedule.val_every == 0 {
            let v = validate(&params)?;
            val_total = Some(v);
            if v < best.0 {
                best = (v, epoch, params.clone());
            }
        }
        history.push(EpochRecord {
            epoch,
            train: report,
            lr,
            val_total,
        });
        if let Some(p) = schedule.patience {
            if val_total.is_some() && epoch - best.1 >= p {
                stopped_at = Some(epoch);
                break;
            }
        }
        if let Err(e) = opt.step(&mut params, &grads, lr) {
            return Err(match e {
                Error::NonFiniteGradient { .. } => diverged(epoch, report.total, &history),
                e => e,
            });
        }
    }

    let epochs_run = stopped_at.map_or(schedule.max_epochs, |e| e + 1);
    if stopped_at.is_none() {
        let v = validate(&params)?;
        if v < best.0 {
            best = (v, epochs_run, params.clone());
        }
    }
    let (best_val, best_epoch, values) = best;
    Ok(TrainedArtifact {
        params: ParamVector::new(values, layout)?,
        history,
        epochs_run,
        best_epoch,
        best_val,
        wall_time: clock.seconds(),
        config: config.clone(),
        seed,
    })
}

/// Training and validation point sets of one run.
pub fn run_point_sets(task: &Task, budget: &PointBudget, seed: u64) -> Result<(PointSets, PointSets)> {
    Ok((
        make_point_sets(task, budget, rng::derive_seed(seed, 1))?,
        make_point_sets(task, budget, rng::derive_seed(seed, 2))?,
    ))
}

fn fit_network(
    start: Mlp,
    task: &Task,
    config: &TrainConfig,
    seed: u64,
) -> Result<(Mlp, TrainedArtifact)> {
    let (pts, val) = run_point_sets(task, &config.budget, seed)?;
    let net_cfg = start.config().clone();
    let weights = config.weights;
    let mut scratch = start.clone();
    let objective = |values: &[f64]| {
        scratch.set_params(values)?;
        let mut tape = Tape::new();
        let taped = scratch.on_tape(&mut tape, true);
        let (loss, report) = record_pinn_loss(&mut tape, &taped, task, &pts, &weights)?;
        let grads = tape.grad(loss, &taped.params())?;
        Ok((report, grads))
    };
    let mut probe = start.clone();
    let validate = |values: &[f64]| {
        probe.set_params(values)?;
        Ok(pinn_loss(&probe, task, &val, &weights)?.total)
    };
    let art = optimize(start.params().values, net_cfg.layout(), config, seed, objective, validate)?;
    let net = Mlp::from_params(net_cfg, &art.params)?;
    Ok((net, art))
}

/// Trains a network from random initialization on one task.
pub fn train_pinn(
    task: &Task,
    net: MlpConfig,
    config: &TrainConfig,
    seed: u64,
) -> Result<(Mlp, TrainedArtifact)> {
    task.validate()?;
    let kind = task.kind();
    if net.input_dim != kind.input_dim() || net.output_dim != kind.output_dim() {
        return Err(Error::Config(alloc::format!(
            "{kind} needs a {} -> {} network, got {} -> {}",
            kind.input_dim(),
            kind.output_dim(),
            net.input_dim,
            net.output_dim
        )));
    }
    let cfg = MlpConfig {
        init_seed: rng::derive_seed(seed, 0),
        ..net
    };
    fit_network(Mlp::new(cfg)?, task, config, seed)
}

/// Continues training every weight of `base` on a new task.
pub fn finetune(base: &Mlp, task: &Task, config: &TrainConfig, seed: u64) -> Result<(Mlp, TrainedArtifact)> {
    task.validate()?;
    fit_network(base.clone(), task, config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small_config(epochs: usize) -> TrainConfig {
        let mut c = TrainConfig::pinn(SystemKind::Kovasznay, Scale::Desk);
        c.schedule = Schedule::proportional(epochs, Some(1_000));
        c.budget = PointBudget {
            collocation: 30,
            initial: 0,
            boundary_per_face: 5,
            periodic_times: 0,
        };
        c
    }

    #[test]
    fn constant_loss_exhausts_patience() {
        let mut cfg = small_config(50);
        cfg.schedule.patience = Some(10);
        cfg.schedule.val_every = 1;
        let layout = MlpConfig::base(1, 1, 0).layout();
        let n = layout.len();
        let art = optimize(
            vec![0.0; n],
            layout,
            &cfg,
            0,
            |_| Ok((LossReport::data(1.0), vec![0.0; n])),
            |_| Ok(1.0),
        )
        .unwrap();
        assert_eq!(art.epochs_run, 11);
        assert!(art.epochs_run < 50);
        assert_eq!(art.best_epoch, 0);
    }

    #[test]
    fn exploding_loss_reports_divergence_with_history() {
        let cfg = small_config(20);
        let layout = MlpConfig::base(1, 1, 0).layout();
        let n = layout.len();
        let mut k = 0;
        let err = optimize(
            vec![0.0; n],
            layout,
            &cfg,
            0,
            |_| {
                k += 1;
                Ok((LossReport::data(if k > 3 { 1e7 } else { 1.0 }), vec![0.0; n]))
            },
            |_| Ok(1.0),
        )
        .unwrap_err();
        match err {
            Error::Diverged { epoch, history, .. } => {
                assert_eq!(epoch, 3);
                assert_eq!(history.len(), 3);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn training_is_deterministic_and_decreases_loss() {
        let task = Task::Kovasznay { re: 40.0 };
        let cfg = small_config(30);
        let net = MlpConfig::base(2, 3, 0);
        let (_, a) = train_pinn(&task, net.clone(), &cfg, 5).unwrap();
        let (_, b) = train_pinn(&task, net, &cfg, 5).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
        assert!(a.history.last().unwrap().train.total < a.history[0].train.total);
    }

    #[test]
    fn finetune_starts_from_base() {
        let task = Task::Kovasznay { re: 40.0 };
        let cfg = small_config(3);
        let base = Mlp::new(MlpConfig::base(2, 3, 1)).unwrap();
        let (_, art) = finetune(&base, &task, &cfg, 0).unwrap();
        let (pts, _) = run_point_sets(&task, &cfg.budget, 0).unwrap();
        let initial = pinn_loss(&base, &task, &pts, &cfg.weights).unwrap().total;
        assert!((art.history[0].train.total - initial).abs() < 1e-12 * initial);
    }
}
