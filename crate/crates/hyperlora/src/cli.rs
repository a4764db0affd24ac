//! Argument parsing, config resolution and the five commands.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperlora::bench::{
    self, aggregate, export_error_map, measure_adaptation, measure_inference, run_hyper_matrix, run_rank_sweep,
    task_budget, train_base, write_records, Banks, EvalSet, HyperPlan, RankSpec, RunRecord, SweepPlan, TaskSplit,
};
use hyperlora::io::{load_checkpoint, read_tasks, save_checkpoint, write_history, write_json, write_tasks, Manifest, Model, TaskRecord};
use hyperlora::Error;
use hyperlora_core::nn::{AssemblyMode, Mlp, MlpConfig};
use hyperlora_core::pde::{sample_grf_u0, PointBudget, SystemKind, Task};
use hyperlora_core::train::{adapt_lora, train_pinn, Regime, Scale, Schedule, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "hyperlora", version, about = "Physics-informed LoRA adapters and hypernetworks for parameterized PDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a network from scratch on one task.
    TrainPinn(Options),
    /// Train low-rank adapters on top of a saved base network.
    Adapt(Options),
    /// Train a hypernetwork in one of the regimes b1..b4.
    Hyper(Options),
    /// Run a rank sweep, the hypernetwork matrix or the inference timing.
    Sweep(Options),
    /// Write the prediction error of a checkpoint on the evaluation grid.
    Export(Options),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Rank,
    Hyper,
    Inference,
}

/// Command-line flags; each one overrides the same key of the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct Options {
    /// TOML file with any of the keys below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub system: Option<SystemKind>,
    #[arg(long)]
    pub scale: Option<Scale>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reynolds number of a Kovasznay task.
    #[arg(long)]
    pub re: Option<f64>,
    /// Viscosity of a 2D Burgers task.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Seed of the GRF initial condition of a 1D Burgers task.
    #[arg(long)]
    pub u0_seed: Option<u64>,
    /// JSON-lines task file; the first task is used.
    #[arg(long)]
    pub task_file: Option<PathBuf>,
    /// Adapter rank, or `full`.
    #[arg(long)]
    pub rank: Option<RankSpec>,
    #[arg(long)]
    pub regime: Option<Regime>,
    /// Base network checkpoint.
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Checkpoint to export.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub sweep: Option<SweepKind>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr0: Option<f64>,
    /// Early-stopping patience in epochs; 0 disables it.
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub collocation: Option<usize>,
    /// Comma-separated ranks of a rank sweep.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    /// Comma-separated sweep seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub max_test_tasks: Option<usize>,
    /// Output directory of this run.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Parallel worker threads for sweeps.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Fully resolved settings of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemKind,
    pub scale: Scale,
    pub seed: u64,
    pub re: Option<f64>,
    pub nu: Option<f64>,
    pub u0_seed: Option<u64>,
    pub task_file: Option<PathBuf>,
    pub rank: RankSpec,
    pub regime: Regime,
    pub base: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub sweep: SweepKind,
    pub split_seed: u64,
    pub epochs: Option<usize>,
    pub lr0: Option<f64>,
    pub patience: Option<usize>,
    pub collocation: Option<usize>,
    pub ranks: Option<Vec<usize>>,
    pub seeds: Option<Vec<u64>>,
    pub max_test_tasks: Option<usize>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemKind::Kovasznay,
            scale: Scale::Desk,
            seed: 0,
            re: None,
            nu: None,
            u0_seed: None,
            task_file: None,
            rank: RankSpec::Low(4),
            regime: Regime::B4,
            base: None,
            checkpoint: None,
            sweep: SweepKind::Rank,
            split_seed: 0,
            epochs: None,
            lr0: None,
            patience: None,
            collocation: None,
            ranks: None,
            seeds: None,
            max_test_tasks: None,
            out: None,
            jobs: 1,
        }
    }
}

macro_rules! overlay {
    ($cfg:ident, $opts:ident; $($field:ident),*) => {
        $(if let Some(v) = $opts.$field.clone() { $cfg.$field = v; })*
    };
}

macro_rules! overlay_opt {
    ($cfg:ident, $opts:ident; $($field:ident),*) => {
        $(if $opts.$field.is_some() { $cfg.$field = $opts.$field.clone(); })*
    };
}

impl RunConfig {
    /// Defaults, then the config file, then the flags.
    pub fn resolve(opts: &Options) -> Result<Self, Error> {
        let mut cfg = match &opts.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        overlay!(cfg, opts; system, scale, seed, rank, regime, sweep, split_seed, jobs);
        overlay_opt!(cfg, opts; re, nu, u0_seed, task_file, base, checkpoint, epochs, lr0, patience,
            collocation, ranks, seeds, max_test_tasks, out);
        if cfg.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(cfg)
    }

    /// The single task named by `re` / `nu` / `u0_seed` / `task_file`, or the
    /// family's base task.
    pub fn task(&self) -> Result<Task, Error> {
        let set = [self.re.is_some(), self.nu.is_some(), self.u0_seed.is_some(), self.task_file.is_some()];
        if set.iter().filter(|&&b| b).count() > 1 {
            return Err(Error::Config("give at most one of re, nu, u0_seed and task_file".into()));
        }
        let task = if let Some(path) = &self.task_file {
            read_tasks(path)?
                .into_iter()
                .next()
                .map(|r| r.task)
                .ok_or_else(|| Error::format(path, "no tasks in file"))?
        } else if let Some(re) = self.re {
            Task::Kovasznay { re }
        } else if let Some(nu) = self.nu {
            Task::Burgers2d { nu }
        } else if let Some(s) = self.u0_seed {
            Task::Burgers1d { u0: sample_grf_u0(s) }
        } else {
            self.system.base_task()
        };
        if task.kind() != self.system {
            return Err(Error::Config(format!(
                "task {} does not belong to system {}",
                task.label(),
                self.system
            )));
        }
        task.validate()?;
        Ok(task)
    }

    /// `config` with the schedule and point overrides applied.
    pub fn tune(&self, mut config: TrainConfig) -> TrainConfig {
        if let Some(n) = self.epochs {
            let patience = config.schedule.patience;
            let val_every = config.schedule.val_every;
            config.schedule = Schedule {
                val_every,
                ..Schedule::proportional(n, patience)
            };
        }
        if let Some(lr) = self.lr0 {
            config.schedule.lr0 = lr;
        }
        if let Some(p) = self.patience {
            config.schedule.patience = (p > 0).then_some(p);
        }
        if let Some(c) = self.collocation {
            config.budget.collocation = c;
        }
        config
    }

    fn sweep_budget(&self) -> PointBudget {
        task_budget(self.system, self.scale)
    }

    fn out_dir(&self, command: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            let root = std::env::var_os("HYPERLORA_OUT").map_or_else(|| PathBuf::from("runs"), PathBuf::from);
            root.join(format!("{command}-{}-seed{}", self.system, self.seed))
        })
    }
}

struct Run {
    dir: PathBuf,
    manifest: Manifest,
}

impl Run {
    /// Creates the output directory and echoes the resolved config.
    fn start(command: &str, cfg: &RunConfig, seeds: Vec<u64>) -> anyhow::Result<Self> {
        let dir = cfg.out_dir(command);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let manifest = Manifest::new(command, cfg, seeds)?;
        let run = Self { dir, manifest };
        run.write_manifest()?;
        Ok(run)
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn write_manifest(&self) -> anyhow::Result<()> {
        write_json(&self.dir.join("manifest.json"), &self.manifest)?;
        Ok(())
    }

    fn finish(self) -> anyhow::Result<PathBuf> {
        self.write_manifest()?;
        Ok(self.dir)
    }
}

fn load_base(cfg: &RunConfig) -> anyhow::Result<Mlp> {
    let path = cfg.base.as_ref().ok_or_else(|| Error::Config("this command needs --base <checkpoint>".into()))?;
    match load_checkpoint(path)?.1 {
        Model::Mlp(net) => {
            let kind = cfg.system;
            if net.config().input_dim != kind.input_dim() || net.config().output_dim != kind.output_dim() {
                bail!(Error::Config(format!("{} does not hold a {kind} network", path.display())));
            }
            Ok(net)
        }
        _ => bail!(Error::Config(format!("{} is not a plain network checkpoint", path.display()))),
    }
}

fn lora_rank(cfg: &RunConfig) -> anyhow::Result<usize> {
    match cfg.rank {
        RankSpec::Low(r) => Ok(r),
        RankSpec::Full => bail!(Error::Config("adapters need a numeric rank".into())),
    }
}

fn assembly(rank: RankSpec) -> AssemblyMode {
    match rank {
        RankSpec::Low(rank) => AssemblyMode::Lora { rank },
        RankSpec::Full => AssemblyMode::Full,
    }
}

fn train_pinn_cmd(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let task = cfg.task()?;
    let config = cfg.tune(TrainConfig::pinn(cfg.system, cfg.scale));
    let mut run = Run::start("train-pinn", cfg, vec![cfg.seed])?;
    let net_cfg = MlpConfig::base(cfg.system.input_dim(), cfg.system.output_dim(), 0);
    let (net, art) = train_pinn(&task, net_cfg, &config, cfg.seed).context("training failed")?;
    let meta = serde_json::json!({ "task": task, "train": config, "best_epoch": art.best_epoch, "best_val": art.best_val });
    save_checkpoint(&run.path("model.ckpt"), &Model::Mlp(net), cfg.seed, &meta)?;
    write_history(&run.path("history.csv"), &art.history)?;
    run.finish()
}

fn adapt_cmd(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let rank = lora_rank(cfg)?;
    let base = load_base(cfg)?;
    let task = cfg.task()?;
    let config = cfg.tune(TrainConfig::lora(cfg.system, cfg.scale));
    let mut run = Run::start("adapt", cfg, vec![cfg.seed])?;
    let (lora, art) = adapt_lora(&base, &task, rank, &config, cfg.seed).context("adaptation failed")?;
    let meta = serde_json::json!({ "task": task, "train": config, "best_epoch": art.best_epoch, "best_val": art.best_val });
    save_checkpoint(&run.path("adapter.ckpt"), &Model::Lora(lora), cfg.seed, &meta)?;
    write_history(&run.path("history.csv"), &art.history)?;
    run.finish()
}

fn write_split(run: &mut Run, split: &TaskSplit, seed: u64) -> anyhow::Result<()> {
    for (name, list) in [("train", &split.train), ("valid", &split.valid), ("test", &split.test)] {
        let records: Vec<TaskRecord> = list
            .iter()
            .map(|t| TaskRecord {
                task: t.clone(),
                seed: Some(seed),
            })
            .collect();
        write_tasks(&run.path(&format!("tasks_{name}.jsonl")), &records)?;
    }
    Ok(())
}

fn split_for(cfg: &RunConfig) -> anyhow::Result<TaskSplit> {
    let split = TaskSplit::sample(cfg.system, TaskSplit::default_sizes(cfg.system), cfg.split_seed)?;
    split.check_disjoint()?;
    Ok(split)
}

fn hyper_plan(cfg: &RunConfig, regimes: Vec<Regime>, modes: Vec<AssemblyMode>, seeds: Vec<u64>) -> HyperPlan {
    let mut plan = HyperPlan::standard(cfg.system, cfg.scale);
    plan.regimes = regimes;
    plan.modes = modes;
    plan.seeds = seeds;
    let mut hyper = plan.hyper.clone();
    hyper.budget = cfg.sweep_budget();
    plan.hyper = cfg.tune(hyper);
    let mut bank = plan.bank.clone();
    bank.budget = cfg.sweep_budget();
    plan.bank = cfg.tune(bank);
    plan
}

fn with_aggregates(mut rows: Vec<RunRecord>) -> Vec<RunRecord> {
    let mut agg = aggregate(&rows, true);
    agg.extend(aggregate(&rows, false));
    rows.extend(agg);
    rows
}

fn hyper_cmd(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let base = load_base(cfg)?;
    let split = split_for(cfg)?;
    let plan = hyper_plan(cfg, vec![cfg.regime], vec![assembly(cfg.rank)], vec![cfg.seed]);
    let mut run = Run::start("hyper", cfg, vec![cfg.seed])?;
    write_split(&mut run, &split, cfg.split_seed)?;
    let mut banks = Banks::new();
    let mut outcomes = run_hyper_matrix(&base, &split, &plan, &mut banks, cfg.jobs).context("hypernetwork training failed")?;
    let out = outcomes.pop().expect("one cell");
    let meta = serde_json::json!({ "regime": out.regime, "plan": plan, "split": split.fingerprint() });
    save_checkpoint(
        &run.path("hyper.ckpt"),
        &Model::Hyper {
            hyper: out.hyper,
            base,
        },
        cfg.seed,
        &meta,
    )?;
    write_history(&run.path("history.csv"), &out.artifact.history)?;
    write_records(&run.path("results.csv"), &with_aggregates(out.records))?;
    run.finish()
}

fn base_for_sweep(cfg: &RunConfig, run: &mut Run) -> anyhow::Result<Mlp> {
    if cfg.base.is_some() {
        return load_base(cfg);
    }
    let config = cfg.tune(TrainConfig::pinn(cfg.system, cfg.scale));
    let (net, art) = train_base(cfg.system, &config, cfg.seed).context("base training failed")?;
    let meta = serde_json::json!({ "task": cfg.system.base_task(), "train": config });
    save_checkpoint(&run.path("base.ckpt"), &Model::Mlp(net.clone()), cfg.seed, &meta)?;
    write_history(&run.path("base_history.csv"), &art.history)?;
    Ok(net)
}

fn sweep_cmd(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let split = split_for(cfg)?;
    let default_seeds = SweepPlan::standard(cfg.system, cfg.scale).seeds;
    let seeds = cfg.seeds.clone().unwrap_or(default_seeds);
    let mut run = Run::start("sweep", cfg, seeds.clone())?;
    run.manifest.config["split_fingerprint"] = split.fingerprint().into();
    run.write_manifest()?;
    write_split(&mut run, &split, cfg.split_seed)?;
    let base = base_for_sweep(cfg, &mut run)?;
    match cfg.sweep {
        SweepKind::Rank => {
            let mut plan = SweepPlan::standard(cfg.system, cfg.scale);
            plan.seeds = seeds;
            if let Some(r) = &cfg.ranks {
                plan.ranks = r.clone();
            }
            plan.max_test_tasks = cfg.max_test_tasks;
            let mut adapt = plan.adapt.clone();
            adapt.budget = cfg.sweep_budget();
            plan.adapt = cfg.tune(adapt);
            plan.scratch = plan.adapt.clone();
            let outcomes = run_rank_sweep(&base, &split, &plan, cfg.jobs).context("rank sweep failed")?;
            let rows: Vec<RunRecord> = outcomes.into_iter().map(|o| o.record).collect();
            write_records(&run.path("results.csv"), &with_aggregates(rows))?;
        }
        SweepKind::Hyper => {
            let modes = match &cfg.ranks {
                Some(r) => r.iter().map(|&rank| AssemblyMode::Lora { rank }).chain([AssemblyMode::Full]).collect(),
                None => vec![AssemblyMode::Lora { rank: 4 }, AssemblyMode::Full],
            };
            let plan = hyper_plan(cfg, Regime::ALL.to_vec(), modes, seeds);
            let mut banks = Banks::new();
            let outcomes = run_hyper_matrix(&base, &split, &plan, &mut banks, cfg.jobs).context("hypernetwork matrix failed")?;
            let rows: Vec<RunRecord> = outcomes.into_iter().flat_map(|o| o.records).collect();
            write_records(&run.path("results.csv"), &with_aggregates(rows))?;
        }
        SweepKind::Inference => {
            let rank = lora_rank(cfg)?;
            let task = &split.test[0];
            let plan = hyper_plan(cfg, vec![Regime::B4], vec![AssemblyMode::Lora { rank }], vec![cfg.seed]);
            let mut adapt = TrainConfig::lora(cfg.system, cfg.scale);
            adapt.budget = cfg.sweep_budget();
            let adapt = cfg.tune(adapt);
            let lora = measure_adaptation(&base, task, rank, &adapt, plan.timing_reps)?;
            let hyper = hyperlora_core::nn::HyperNetwork::new(
                &hyperlora_core::nn::HyperConfig::new(AssemblyMode::Lora { rank }, cfg.seed),
                &base,
                cfg.system.codec(),
            )?;
            let grid = bench::eval_grid(cfg.system);
            let hyper_t = measure_inference(&hyper, &base, task, &grid, plan.timing_reps)?;
            let report = serde_json::json!({
                "task": task,
                "lora_adaptation": lora,
                "hyper_inference": hyper_t,
                "speedup": lora.median / hyper_t.median,
            });
            write_json(&run.path("timing.json"), &report)?;
        }
    }
    run.finish()
}

fn export_cmd(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::Config("export needs --checkpoint <file>".into()))?;
    let (_, model) = load_checkpoint(path)?;
    let task = cfg.task()?;
    if model.input_dim() != cfg.system.input_dim() {
        bail!(Error::Config(format!("{} does not hold a {} model", path.display(), cfg.system)));
    }
    let net = model.network_for(Some(&task))?;
    let mut run = Run::start("export", cfg, vec![cfg.seed])?;
    let rows = export_error_map(&net, &task, &run.path("error_map.csv"))?;
    let mse = EvalSet::for_task(&task)?.mse(&net)?;
    write_json(&run.path("summary.json"), &serde_json::json!({ "task": task, "rows": rows, "mse": mse }))?;
    run.finish()
}

/// Runs one parsed command; returns the output directory.
pub fn dispatch(cli: &Cli) -> anyhow::Result<PathBuf> {
    let (opts, f): (&Options, fn(&RunConfig) -> anyhow::Result<PathBuf>) = match &cli.command {
        Command::TrainPinn(o) => (o, train_pinn_cmd),
        Command::Adapt(o) => (o, adapt_cmd),
        Command::Hyper(o) => (o, hyper_cmd),
        Command::Sweep(o) => (o, sweep_cmd),
        Command::Export(o) => (o, export_cmd),
    };
    let cfg = RunConfig::resolve(opts)?;
    f(&cfg)
}

/// Exit code for an error chain: the first typed error decides.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return e.exit_code();
        }
        if let Some(e) = cause.downcast_ref::<hyperlora_core::Error>() {
            return if e.is_numerical() { 3 } else { 2 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "system = \"burgers2d\"\nseed = 3\nnu = 2e-4\nepochs = 50\n").unwrap();
        let opts = Options {
            config: Some(path),
            seed: Some(8),
            ..Options::default()
        };
        let cfg = RunConfig::resolve(&opts).unwrap();
        assert_eq!(cfg.system, SystemKind::Burgers2d);
        assert_eq!(cfg.seed, 8);
        assert_eq!(cfg.epochs, Some(50));
        assert_eq!(cfg.task().unwrap(), Task::Burgers2d { nu: 2e-4 });
        assert_eq!(cfg.scale, Scale::Desk);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "sytem = \"kovasznay\"\n").unwrap();
        let err = RunConfig::resolve(&Options {
            config: Some(path),
            ..Options::default()
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("sytem"), "{err}");
    }

    #[test]
    fn task_must_match_system() {
        let cfg = RunConfig {
            nu: Some(3e-4),
            ..RunConfig::default()
        };
        assert!(cfg.task().is_err());
        assert_eq!(RunConfig::default().task().unwrap(), Task::Kovasznay { re: 60.0 });
    }

    #[test]
    fn epoch_override_rescales_the_schedule() {
        let cfg = RunConfig {
            epochs: Some(600),
            patience: Some(0),
            ..RunConfig::default()
        };
        let t = cfg.tune(TrainConfig::pinn(SystemKind::Kovasznay, Scale::Desk));
        assert_eq!(t.schedule.max_epochs, 600);
        assert_eq!(t.schedule.hold, 200);
        assert_eq!(t.schedule.patience, None);
    }

    #[test]
    fn default_config_roundtrips_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), cfg);
    }
}
