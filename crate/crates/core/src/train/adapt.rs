use super::loss::{pinn_loss, record_pinn_loss};
use super::pinn::{optimize, run_point_sets, TrainConfig, TrainedArtifact};
use crate::autodiff::Tape;
use crate::error::Result;
use crate::nn::{lora_wrap, LoraNetwork, Mlp};
use crate::pde::Task;
use crate::rng;

/// Trains rank-`rank` adapters on top of a frozen `base` for `task`.
///
/// The returned artifact holds the adapter vector; `base` is only read.
pub fn adapt_lora(
    base: &Mlp,
    task: &Task,
    rank: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<(LoraNetwork, TrainedArtifact)> {
    task.validate()?;
    let start = lora_wrap(base, rank, rng::derive_seed(seed, 0))?;
    let (pts, val) = run_point_sets(task, &config.budget, seed)?;
    let weights = config.weights;
    let mut scratch = start.clone();
    let objective = |values: &[f64]| {
        scratch.set_adapter_values(values)?;
        let mut tape = Tape::new();
        let (taped, leaves) = scratch.on_tape(&mut tape);
        let (loss, report) = record_pinn_loss(&mut tape, &taped, task, &pts, &weights)?;
        let grads = tape.grad(loss, &leaves)?;
        Ok((report, grads))
    };
    let mut probe = start.clone();
    let validate = |values: &[f64]| {
        probe.set_adapter_values(values)?;
        Ok(pinn_loss(&probe.effective_weights(), task, &val, &weights)?.total)
    };
    let init = start.adapter_params();
    let art = optimize(init.values, init.layout, config, seed, objective, validate)?;
    let mut out = start;
    out.set_adapter_params(&art.params)?;
    Ok((out, art))
}
