//! Experiment harness: rank sweeps, the hypernetwork regime matrix,
//! inference timing and error-map exports.
//!
//! Every run is keyed by a sweep seed and a task index; the training seed
//! of a run is derived from both, so any row can be recomputed from the
//! plan that produced it.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use hyperlora_core::autodiff::{Mat, ParamVector};
use hyperlora_core::nn::{adapter_param_count, AssemblyMode, HyperConfig, HyperNetwork, Mlp, MlpConfig, HYPER_HIDDEN};
use hyperlora_core::pde::{make_point_sets, Labeled, PointBudget, Reference, SystemKind, Task, HORIZON, LATTICE};
use hyperlora_core::rng::derive_seed;
use hyperlora_core::train::{
    adapt_lora, finetune, train_hyper, train_pinn, EpochRecord, FieldModel, HyperTask, Regime, Scale, TrainConfig,
    TrainedArtifact,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pinn,
    FinetunePinn,
    LoraPinn,
    HyperB1,
    HyperB2,
    HyperB3,
    HyperB4,
}

impl Method {
    pub fn hyper(regime: Regime) -> Self {
        match regime {
            Regime::B1 => Method::HyperB1,
            Regime::B2 => Method::HyperB2,
            Regime::B3 => Method::HyperB3,
            Regime::B4 => Method::HyperB4,
        }
    }
}

/// Adapter rank of a row, or `full` for dense training / prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum RankSpec {
    Low(usize),
    Full,
}

impl fmt::Display for RankSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankSpec::Low(r) => write!(f, "{r}"),
            RankSpec::Full => f.write_str("full"),
        }
    }
}

impl FromStr for RankSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" || s == "*" {
            return Ok(RankSpec::Full);
        }
        s.parse()
            .map(RankSpec::Low)
            .map_err(|_| Error::Config(format!("rank must be a positive integer or `full`, got `{s}`")))
    }
}

impl From<RankSpec> for String {
    fn from(r: RankSpec) -> Self {
        r.to_string()
    }
}

impl TryFrom<String> for RankSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AssemblyMode> for RankSpec {
    fn from(m: AssemblyMode) -> Self {
        match m {
            AssemblyMode::Lora { rank } => RankSpec::Low(rank),
            AssemblyMode::Full | AssemblyMode::Delta => RankSpec::Full,
        }
    }
}

/// One result row. Rows with a `task_index` describe a single test task;
/// rows without one are means over such rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub system: SystemKind,
    pub method: Method,
    pub rank: RankSpec,
    /// Position in the test split.
    pub task_index: Option<usize>,
    /// Sweep seed; absent on rows averaged over seeds.
    pub seed: Option<u64>,
    pub n_params_trained: usize,
    /// Mean grid error over the training tasks (hypernetworks only).
    pub train_mse: Option<f64>,
    /// Mean grid error over the validation tasks (hypernetworks only).
    pub valid_mse: Option<f64>,
    pub test_mse: f64,
    /// Training objective at the kept snapshot.
    pub final_loss: f64,
    pub epochs_run: f64,
    pub time_per_epoch: f64,
    /// Seconds to obtain a network for a new task.
    pub inference_time: f64,
}

/// A record together with the training curve that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub history: Vec<EpochRecord>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn mean_opt<'a>(rows: &[&'a RunRecord], f: impl Fn(&'a RunRecord) -> Option<f64>) -> Option<f64> {
    let vals: Option<Vec<f64>> = rows.iter().map(|r| f(r)).collect();
    vals.map(|v| mean(v.into_iter()))
}

/// Means of the per-task rows, grouped by system, method and rank (and by
/// seed when `per_seed`). Groups come out sorted.
pub fn aggregate(records: &[RunRecord], per_seed: bool) -> Vec<RunRecord> {
    let mut groups: BTreeMap<(String, Method, RankSpec, Option<u64>), Vec<&RunRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.task_index.is_some()) {
        let seed = if per_seed { r.seed } else { None };
        groups
            .entry((r.system.name().to_string(), r.method, r.rank, seed))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((_, method, rank, seed), rows)| {
            let first = rows[0];
            RunRecord {
                system: first.system,
                method,
                rank,
                task_index: None,
                seed,
                n_params_trained: first.n_params_trained,
                train_mse: mean_opt(&rows, |r| r.train_mse),
                valid_mse: mean_opt(&rows, |r| r.valid_mse),
                test_mse: mean(rows.iter().map(|r| r.test_mse)),
                final_loss: mean(rows.iter().map(|r| r.final_loss)),
                epochs_run: mean(rows.iter().map(|r| r.epochs_run)),
                time_per_epoch: mean(rows.iter().map(|r| r.time_per_epoch)),
                inference_time: mean(rows.iter().map(|r| r.inference_time)),
            }
        })
        .collect()
}

/// Train/validation/test task lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSplit {
    pub train: Vec<Task>,
    pub valid: Vec<Task>,
    pub test: Vec<Task>,
}

/// Stable content hash of one task.
pub fn task_fingerprint(task: &Task) -> String {
    let json = serde_json::to_vec(task).expect("tasks serialize");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

impl TaskSplit {
    /// 100/20/20 for 1D Burgers, 20/20/20 otherwise.
    pub fn default_sizes(kind: SystemKind) -> [usize; 3] {
        match kind {
            SystemKind::Burgers1d => [100, 20, 20],
            _ => [20, 20, 20],
        }
    }

    /// Draws `train + valid + test` distinct tasks; draw `i` uses the child
    /// seed `i` of `seed`, and repeats are skipped.
    pub fn sample(kind: SystemKind, sizes: [usize; 3], seed: u64) -> Result<Self> {
        let total: usize = sizes.iter().sum();
        let mut seen = HashSet::new();
        let mut tasks = Vec::with_capacity(total);
        let mut i = 0u64;
        while tasks.len() < total {
            if i > 16 * total as u64 + 64 {
                return Err(Error::Config(format!("could not draw {total} distinct {kind} tasks")));
            }
            let t = kind.sample_task(derive_seed(seed, i));
            i += 1;
            if seen.insert(task_fingerprint(&t)) {
                tasks.push(t);
            }
        }
        let test = tasks.split_off(sizes[0] + sizes[1]);
        let valid = tasks.split_off(sizes[0]);
        Ok(Self {
            train: tasks,
            valid,
            test,
        })
    }

    /// Errors if any task occurs in two lists (or twice in one).
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (name, list) in [("train", &self.train), ("valid", &self.valid), ("test", &self.test)] {
            for (i, t) in list.iter().enumerate() {
                if !seen.insert(task_fingerprint(t)) {
                    return Err(Error::Config(format!("{name} task {i} ({}) occurs more than once", t.label())));
                }
            }
        }
        Ok(())
    }

    /// Hash of the whole split, recorded in manifests.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for list in [&self.train, &self.valid, &self.test] {
            for t in list {
                h.update(task_fingerprint(t).as_bytes());
            }
            h.update(b"|");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Evaluation grid: 256 × 100 over `(x, t)` for 1D Burgers, the 101 × 101
/// lattice for Kovasznay, and that lattice at `t = 1` for 2D Burgers.
pub fn eval_grid(kind: SystemKind) -> Mat {
    let l = LATTICE;
    let step = 1.0 / (l - 1) as f64;
    match kind {
        SystemKind::Burgers1d => {
            let (nx, nt) = (256, 100);
            Mat::from_fn(nx * nt, 2, |i, j| {
                if j == 0 {
                    (i / nt) as f64 / nx as f64
                } else {
                    HORIZON * (i % nt) as f64 / (nt - 1) as f64
                }
            })
        }
        SystemKind::Kovasznay => Mat::from_fn(l * l, 2, |i, j| if j == 0 { (i / l) as f64 * step } else { (i % l) as f64 * step }),
        SystemKind::Burgers2d => Mat::from_fn(l * l, 3, |i, j| match j {
            0 => (i / l) as f64 * step,
            1 => (i % l) as f64 * step,
            _ => HORIZON,
        }),
    }
}

/// Snapshot times used when a numerical reference is needed at arbitrary
/// points.
fn reference_times(kind: SystemKind) -> Vec<f64> {
    match kind {
        SystemKind::Burgers1d => (0..100).map(|j| HORIZON * j as f64 / 99.0).collect(),
        _ => Vec::new(),
    }
}

/// Ground truth of a task on its evaluation grid.
#[derive(Clone, Debug)]
pub struct EvalSet {
    pub grid: Mat,
    pub reference: Mat,
}

impl EvalSet {
    pub fn for_task(task: &Task) -> Result<Self> {
        let kind = task.kind();
        let grid = eval_grid(kind);
        let reference = Reference::for_task(task, &reference_times(kind))?.values(&grid);
        Ok(Self { grid, reference })
    }

    pub fn mse(&self, model: &(impl FieldModel + ?Sized)) -> Result<f64> {
        mse_vs_reference(model, &self.reference, &self.grid)
    }
}

/// Mean over grid points and output components of the squared error.
pub fn mse_vs_reference(model: &(impl FieldModel + ?Sized), reference: &Mat, grid: &Mat) -> Result<f64> {
    let pred = model.values(grid)?;
    if pred.shape() != reference.shape() {
        return Err(Error::Config(format!(
            "prediction is {}x{} but the reference is {}x{}",
            pred.rows(),
            pred.cols(),
            reference.rows(),
            reference.cols()
        )));
    }
    let sse: f64 = pred
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(p, r)| (p - r) * (p - r))
        .sum();
    Ok(sse / pred.len() as f64)
}

/// Reference values at arbitrary points of `task` (training labels).
pub fn reference_labels(task: &Task, points: &Mat) -> Result<Labeled> {
    let times: Vec<f64> = match task.kind() {
        SystemKind::Burgers1d => (0..=200).map(|j| HORIZON * j as f64 / 200.0).collect(),
        _ => Vec::new(),
    };
    Ok(Labeled {
        points: points.clone(),
        targets: Reference::for_task(task, &times)?.values(points),
    })
}

/// Runs `f` over `items` on up to `jobs` threads; results keep item order.
pub fn parallel_map<T: Sync, R: Send>(jobs: usize, items: &[T], f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

/// Reduced per-task point budgets for desk-scale sweeps, where every cell
/// trains many networks.
pub fn desk_task_budget(kind: SystemKind) -> PointBudget {
    match kind {
        SystemKind::Burgers1d => PointBudget {
            collocation: 512,
            initial: 128,
            boundary_per_face: 0,
            periodic_times: 32,
        },
        SystemKind::Burgers2d => PointBudget {
            collocation: 512,
            initial: 64,
            boundary_per_face: 16,
            periodic_times: 0,
        },
        SystemKind::Kovasznay => PointBudget {
            collocation: 256,
            initial: 0,
            boundary_per_face: 20,
            periodic_times: 0,
        },
    }
}

/// Per-task budgets: the full point sets at paper scale, reduced ones at
/// desk scale.
pub fn task_budget(kind: SystemKind, scale: Scale) -> PointBudget {
    match scale {
        Scale::Desk => desk_task_budget(kind),
        Scale::Paper => PointBudget::standard(kind),
    }
}

/// Trains the base network on the family's base task.
pub fn train_base(kind: SystemKind, config: &TrainConfig, seed: u64) -> Result<(Mlp, TrainedArtifact)> {
    let net = MlpConfig::base(kind.input_dim(), kind.output_dim(), 0);
    Ok(train_pinn(&kind.base_task(), net, config, seed)?)
}

/// What a rank sweep trains on every test task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub ranks: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Also train from scratch and fine-tune every weight.
    pub baselines: bool,
    /// Schedule and points of from-scratch training.
    pub scratch: TrainConfig,
    /// Schedule and points of adaptation and fine-tuning.
    pub adapt: TrainConfig,
    /// Use only the first this many test tasks.
    pub max_test_tasks: Option<usize>,
}

impl SweepPlan {
    /// Ranks 1 to 32 with both baselines, 3 seeds at desk scale and 1 at
    /// paper scale. Scratch training gets the adaptation budget so the
    /// curves are comparable epoch for epoch.
    pub fn standard(kind: SystemKind, scale: Scale) -> Self {
        let budget = task_budget(kind, scale);
        let mut adapt = TrainConfig::lora(kind, scale);
        adapt.budget = budget;
        Self {
            ranks: vec![1, 2, 4, 8, 16, 32],
            seeds: match scale {
                Scale::Desk => vec![0, 1, 2],
                Scale::Paper => vec![0],
            },
            baselines: true,
            scratch: adapt.clone(),
            adapt,
            max_test_tasks: None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct SweepJob {
    seed: u64,
    task: usize,
    method: Method,
    rank: RankSpec,
}

fn per_task_record(
    kind: SystemKind,
    job: &SweepJob,
    n_params: usize,
    art: &TrainedArtifact,
    test_mse: f64,
) -> RunOutcome {
    RunOutcome {
        record: RunRecord {
            system: kind,
            method: job.method,
            rank: job.rank,
            task_index: Some(job.task),
            seed: Some(job.seed),
            n_params_trained: n_params,
            train_mse: None,
            valid_mse: None,
            test_mse,
            final_loss: art.final_train_loss(),
            epochs_run: art.epochs_run as f64,
            time_per_epoch: art.wall_time / art.epochs_run.max(1) as f64,
            inference_time: art.wall_time,
        },
        history: art.history.clone(),
    }
}

/// Seed of the training run for `task` under sweep seed `seed`.
pub fn run_seed(seed: u64, task: usize) -> u64 {
    derive_seed(seed, 1_000 + task as u64)
}

/// Evaluation sets for `tasks`, built on `jobs` threads.
pub fn eval_sets(tasks: &[Task], jobs: usize) -> Result<Vec<EvalSet>> {
    parallel_map(jobs, tasks, |_, t| EvalSet::for_task(t)).into_iter().collect()
}

/// Adapts `base` to each test task at every rank (plus the baselines).
/// Returns one outcome per (seed, task, method, rank) in that order.
pub fn run_rank_sweep(base: &Mlp, split: &TaskSplit, plan: &SweepPlan, jobs: usize) -> Result<Vec<RunOutcome>> {
    split.check_disjoint()?;
    let kind = split
        .test
        .first()
        .map(Task::kind)
        .ok_or_else(|| Error::Config("the test split is empty".into()))?;
    let n_tasks = plan.max_test_tasks.unwrap_or(split.test.len()).min(split.test.len());
    let tests = &split.test[..n_tasks];
    let evals = eval_sets(tests, jobs)?;
    let mut work = Vec::new();
    for &seed in &plan.seeds {
        for task in 0..n_tasks {
            if plan.baselines {
                work.push(SweepJob {
                    seed,
                    task,
                    method: Method::Pinn,
                    rank: RankSpec::Full,
                });
                work.push(SweepJob {
                    seed,
                    task,
                    method: Method::FinetunePinn,
                    rank: RankSpec::Full,
                });
            }
            for &r in &plan.ranks {
                work.push(SweepJob {
                    seed,
                    task,
                    method: Method::LoraPinn,
                    rank: RankSpec::Low(r),
                });
            }
        }
    }
    let full = base.param_count();
    let results = parallel_map(jobs, &work, |_, job| -> Result<RunOutcome> {
        let task = &tests[job.task];
        let seed = run_seed(job.seed, job.task);
        let eval = &evals[job.task];
        match (job.method, job.rank) {
            (Method::Pinn, _) => {
                let (net, art) = train_pinn(task, base.config().clone(), &plan.scratch, seed)?;
                Ok(per_task_record(kind, job, full, &art, eval.mse(&net)?))
            }
            (Method::FinetunePinn, _) => {
                let (net, art) = finetune(base, task, &plan.adapt, seed)?;
                Ok(per_task_record(kind, job, full, &art, eval.mse(&net)?))
            }
            (_, RankSpec::Low(r)) => {
                let (lora, art) = adapt_lora(base, task, r, &plan.adapt, seed)?;
                let n = adapter_param_count(base.config(), r);
                Ok(per_task_record(kind, job, n, &art, eval.mse(&lora.effective_weights())?))
            }
            _ => unreachable!("sweep jobs are built above"),
        }
    });
    results.into_iter().collect()
}

/// Per-task networks used as regression targets by the `B2`/`B3` regimes.
#[derive(Clone, Debug)]
pub struct BankEntry {
    /// Vector in the hypernetwork output layout of the mode.
    pub params: ParamVector,
    /// Network it describes.
    pub net: Mlp,
}

/// Pretrains one network per task: rank-`r` adapters on the base for LoRA
/// modes, a network trained from scratch for full mode, and a finetuned
/// delta for delta mode. Seeds are child `i` of `seed`.
pub fn build_bank(base: &Mlp, tasks: &[Task], mode: AssemblyMode, config: &TrainConfig, seed: u64, jobs: usize) -> Result<Vec<BankEntry>> {
    let out = parallel_map(jobs, tasks, |i, task| -> Result<BankEntry> {
        let s = derive_seed(seed, 2_000 + i as u64);
        match mode {
            AssemblyMode::Lora { rank } => {
                let (lora, _) = adapt_lora(base, task, rank, config, s)?;
                Ok(BankEntry {
                    params: lora.adapter_params(),
                    net: lora.effective_weights(),
                })
            }
            AssemblyMode::Full => {
                let (net, _) = train_pinn(task, base.config().clone(), config, s)?;
                Ok(BankEntry { params: net.params(), net })
            }
            AssemblyMode::Delta => {
                let (net, _) = finetune(base, task, config, s)?;
                let b = base.params();
                let values = net.params().values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
                Ok(BankEntry {
                    params: ParamVector::new(values, b.layout)?,
                    net,
                })
            }
        }
    });
    out.into_iter().collect()
}

/// What the hypernetwork matrix trains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperPlan {
    pub regimes: Vec<Regime>,
    pub modes: Vec<AssemblyMode>,
    pub seeds: Vec<u64>,
    /// Hypernetwork schedule; its budget sets the per-task point sets.
    pub hyper: TrainConfig,
    /// Per-task pretraining for the `B2`/`B3` targets.
    pub bank: TrainConfig,
    pub hidden_widths: Vec<usize>,
    pub output_scale: f64,
    /// Repetitions of the inference timing.
    pub timing_reps: usize,
}

impl HyperPlan {
    pub fn standard(kind: SystemKind, scale: Scale) -> Self {
        let budget = task_budget(kind, scale);
        let mut hyper = TrainConfig::hyper(kind, scale);
        hyper.budget = budget;
        let mut bank = TrainConfig::lora(kind, scale);
        bank.budget = budget;
        Self {
            regimes: Regime::ALL.to_vec(),
            modes: vec![AssemblyMode::Lora { rank: 4 }, AssemblyMode::Full],
            seeds: match scale {
                Scale::Desk => vec![0, 1, 2],
                Scale::Paper => vec![0],
            },
            hyper,
            bank,
            hidden_widths: HYPER_HIDDEN.to_vec(),
            output_scale: 1.0,
            timing_reps: 5,
        }
    }
}

/// Median and median absolute deviation of repeated wall-time samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub median: f64,
    pub mad: f64,
    pub samples: Vec<f64>,
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

impl Timing {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let mut s = samples.clone();
        let m = median(&mut s);
        let mut dev: Vec<f64> = samples.iter().map(|x| (x - m).abs()).collect();
        Self {
            median: m,
            mad: median(&mut dev),
            samples,
        }
    }
}

/// Wall time of predict + assemble + one evaluation on `grid`, `reps` times.
pub fn measure_inference(hyper: &HyperNetwork, base: &Mlp, task: &Task, grid: &Mat, reps: usize) -> Result<Timing> {
    let emb = task.embedding()?;
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        let net = hyper.assemble(base, &emb)?;
        let out = net.forward(grid);
        std::hint::black_box(out);
        samples.push(start.elapsed().as_secs_f64());
    }
    Ok(Timing::from_samples(samples))
}

/// Wall time of adapting `base` to `task` at `rank`, `reps` times.
pub fn measure_adaptation(base: &Mlp, task: &Task, rank: usize, config: &TrainConfig, reps: usize) -> Result<Timing> {
    let mut samples = Vec::with_capacity(reps);
    for i in 0..reps.max(1) {
        let start = Instant::now();
        let out = adapt_lora(base, task, rank, config, i as u64)?;
        std::hint::black_box(out);
        samples.push(start.elapsed().as_secs_f64());
    }
    Ok(Timing::from_samples(samples))
}

fn hyper_tasks(tasks: &[Task], budget: &PointBudget, seed: u64, salt: u64, labels: bool) -> Result<Vec<HyperTask>> {
    tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let pts = make_point_sets(t, budget, derive_seed(seed, salt + i as u64))?;
            let mut h = HyperTask::new(t.clone(), pts)?;
            if labels {
                h.labels = Some(reference_labels(t, &h.points.collocation)?);
            }
            Ok(h)
        })
        .collect()
}

/// Everything one hypernetwork cell produced.
#[derive(Clone, Debug)]
pub struct HyperOutcome {
    pub regime: Regime,
    pub mode: AssemblyMode,
    pub seed: u64,
    pub hyper: HyperNetwork,
    pub artifact: TrainedArtifact,
    /// One row per test task.
    pub records: Vec<RunRecord>,
    pub inference: Timing,
}

/// Pretrained banks, keyed by mode and seed, shared across regimes.
pub type Banks = BTreeMap<(String, u64), Vec<BankEntry>>;

fn bank_key(mode: AssemblyMode, seed: u64) -> (String, u64) {
    (mode.label(), seed)
}

/// Trains one hypernetwork per (seed, mode, regime) and scores it on the
/// split. Banks missing from `banks` are built and inserted.
pub fn run_hyper_matrix(
    base: &Mlp,
    split: &TaskSplit,
    plan: &HyperPlan,
    banks: &mut Banks,
    jobs: usize,
) -> Result<Vec<HyperOutcome>> {
    split.check_disjoint()?;
    let kind = split
        .test
        .first()
        .map(Task::kind)
        .ok_or_else(|| Error::Config("the test split is empty".into()))?;
    let train_evals = eval_sets(&split.train, jobs)?;
    let valid_evals = eval_sets(&split.valid, jobs)?;
    let test_evals = eval_sets(&split.test, jobs)?;
    let budget = plan.hyper.budget;
    let mut out = Vec::new();
    for &seed in &plan.seeds {
        let valid = hyper_tasks(&split.valid, &budget, seed, 20_000, true)?;
        let mut train_base_tasks = hyper_tasks(&split.train, &budget, seed, 10_000, false)?;
        for mode in &plan.modes {
            let needs_bank = plan.regimes.iter().any(|r| r.needs_pretrained());
            if needs_bank && !banks.contains_key(&bank_key(*mode, seed)) {
                let bank = build_bank(base, &split.train, *mode, &plan.bank, derive_seed(seed, 7), jobs)?;
                banks.insert(bank_key(*mode, seed), bank);
            }
            for &regime in &plan.regimes {
                for (i, h) in train_base_tasks.iter_mut().enumerate() {
                    h.labels = None;
                    h.target = None;
                    match regime {
                        Regime::B1 => h.labels = Some(reference_labels(&h.task, &h.points.collocation)?),
                        Regime::B2 => h.target = Some(banks[&bank_key(*mode, seed)][i].params.values.clone()),
                        Regime::B3 => {
                            let entry = &banks[&bank_key(*mode, seed)][i];
                            let pts = h.points.collocation.clone();
                            h.labels = Some(Labeled {
                                targets: entry.net.forward(&pts),
                                points: pts,
                            });
                        }
                        Regime::B4 => {}
                    }
                }
                let cfg = HyperConfig {
                    hidden_widths: plan.hidden_widths.clone(),
                    output_scale: plan.output_scale,
                    mode: *mode,
                    init_seed: derive_seed(seed, 0),
                };
                let mut hyper = HyperNetwork::new(&cfg, base, kind.codec())?;
                let art = train_hyper(regime, &mut hyper, base, &train_base_tasks, &valid, &plan.hyper, seed)?;
                let score = |tasks: &[Task], evals: &[EvalSet]| -> Result<Vec<f64>> {
                    tasks
                        .iter()
                        .zip(evals)
                        .map(|(t, e)| e.mse(&hyper.assemble(base, &t.embedding()?)?))
                        .collect()
                };
                let train_mse = mean(score(&split.train, &train_evals)?.into_iter());
                let valid_mse = mean(score(&split.valid, &valid_evals)?.into_iter());
                let test = score(&split.test, &test_evals)?;
                let inference = measure_inference(&hyper, base, &split.test[0], &test_evals[0].grid, plan.timing_reps)?;
                let records = test
                    .iter()
                    .enumerate()
                    .map(|(i, &test_mse)| RunRecord {
                        system: kind,
                        method: Method::hyper(regime),
                        rank: (*mode).into(),
                        task_index: Some(i),
                        seed: Some(seed),
                        n_params_trained: hyper.net().param_count(),
                        train_mse: Some(train_mse),
                        valid_mse: Some(valid_mse),
                        test_mse,
                        final_loss: art.final_train_loss(),
                        epochs_run: art.epochs_run as f64,
                        time_per_epoch: art.wall_time / art.epochs_run.max(1) as f64,
                        inference_time: inference.median,
                    })
                    .collect();
                out.push(HyperOutcome {
                    regime,
                    mode: *mode,
                    seed,
                    hyper,
                    artifact: art,
                    records,
                    inference,
                });
            }
        }
    }
    Ok(out)
}

/// Writes `coords…,component,predicted,reference,abs_error` for `model` on
/// the evaluation grid of `task`; returns the number of data rows.
pub fn export_error_map(model: &(impl FieldModel + ?Sized), task: &Task, path: &Path) -> Result<usize> {
    let kind = task.kind();
    let eval = EvalSet::for_task(task)?;
    let pred = model.values(&eval.grid)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let err = |e: csv::Error| Error::format(path, e);
    let mut header: Vec<&str> = kind.coordinates().to_vec();
    header.extend(["component", "predicted", "reference", "abs_error"]);
    w.write_record(&header).map_err(err)?;
    let mut rows = 0;
    for i in 0..eval.grid.rows() {
        for (c, name) in kind.components().iter().enumerate() {
            let (p, r) = (pred.get(i, c), eval.reference.get(i, c));
            let mut rec: Vec<String> = eval.grid.row(i).iter().map(|v| v.to_string()).collect();
            rec.extend([(*name).to_string(), p.to_string(), r.to_string(), (p - r).abs().to_string()]);
            w.write_record(&rec).map_err(err)?;
            rows += 1;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows)
}

/// Results table: one CSV row per record.
pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<RunRecord>, _>>()
        .map_err(|e| Error::format(path, e))
}
