//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.
//!
//! `ACCEPTANCE_ONLY=1,3,9` restricts the run to the listed criteria; the
//! others are reported as SKIP. The full run takes a few hours on one core.

use std::cell::OnceCell;
use std::collections::HashSet;
use std::f64::consts::PI;
use std::time::Instant;

use hyperlora::bench::{
    run_hyper_matrix, run_rank_sweep, run_seed, measure_adaptation, measure_inference, eval_grid, Banks,
    HyperOutcome, HyperPlan, Method, RankSpec, RunOutcome, SweepPlan, TaskSplit,
};
use hyperlora_core::autodiff::fd::{central_gradient, central_second, close};
use hyperlora_core::autodiff::{Activation, BlockKind, JetSpec, Mat, ParamLayout, ParamVector, Plain, Tape};
use hyperlora_core::nn::{
    adapter_param_count, forward_with, AssemblyMode, HyperConfig, HyperNetwork, Mlp, MlpConfig,
};
use hyperlora_core::pde::{make_point_sets, sample_grf, Field, Labeled, PointBudget, Reference, SystemKind, Task, GRF_POINTS};
use hyperlora_core::rng;
use hyperlora_core::train::{
    adapt_lora, pinn_loss, train_hyper, train_pinn, HyperTask, LossWeights, Regime, Scale, Schedule, TrainConfig,
    TrainedArtifact,
};
use rand::Rng;

const KIND: SystemKind = SystemKind::Kovasznay;
/// Test tasks per seed in the rank sweep.
const SWEEP_TASKS: usize = 5;
const SWEEP_SEEDS: [u64; 3] = [0, 1, 2];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// ---------------------------------------------------------------- oracles

/// Kovasznay flow with derivatives, written out directly.
fn kovasznay_oracle(x: f64, y: f64, re: f64) -> [[f64; 5]; 3] {
    let lam = re / 2.0 - (re * re / 4.0 + 4.0 * PI * PI).sqrt();
    let k = 2.0 * PI;
    let e = (lam * x).exp();
    let (s, c) = ((k * y).sin(), (k * y).cos());
    // value, d/dx, d/dy, d2/dx2, d2/dy2
    [
        [1.0 - e * c, -lam * e * c, k * e * s, -lam * lam * e * c, k * k * e * c],
        [lam / k * e * s, lam * lam / k * e * s, lam * e * c, lam.powi(3) / k * e * s, -lam * k * e * s],
        [0.5 * (1.0 - e * e), -lam * e * e, 0.0, -2.0 * lam * lam * e * e, 0.0],
    ]
}

fn kovasznay_residual_oracle(f: &[[f64; 5]; 3], re: f64) -> [f64; 3] {
    let [u, v, p] = f;
    [
        u[1] + v[2],
        u[0] * u[1] + v[0] * u[2] + p[1] - (u[3] + u[4]) / re,
        u[0] * v[1] + v[0] * v[2] + p[2] - (v[3] + v[4]) / re,
    ]
}

/// Coupled 2D Burgers front; `[value, x, y, t, xx, yy]` per component.
fn burgers2d_oracle(x: f64, y: f64, t: f64, nu: f64) -> [[f64; 6]; 2] {
    let z = (-4.0 * x + 4.0 * y - t) / (32.0 * nu);
    let s = if z > 0.0 { (-z).exp() / (1.0 + (-z).exp()) } else { 1.0 / (1.0 + z.exp()) };
    let ds = -s * (1.0 - s);
    let dds = s * (1.0 - s) * (1.0 - 2.0 * s);
    let (zx, zy, zt) = (-1.0 / (8.0 * nu), 1.0 / (8.0 * nu), -1.0 / (32.0 * nu));
    let w = [s / 4.0, ds * zx / 4.0, ds * zy / 4.0, ds * zt / 4.0, dds * zx * zx / 4.0, dds * zy * zy / 4.0];
    let u = [0.75 - w[0], -w[1], -w[2], -w[3], -w[4], -w[5]];
    let v = [0.75 + w[0], w[1], w[2], w[3], w[4], w[5]];
    [u, v]
}

fn burgers2d_residual_oracle(f: &[[f64; 6]; 2], nu: f64) -> [f64; 2] {
    let [u, v] = f;
    let m = |w: &[f64; 6]| w[3] + u[0] * w[1] + v[0] * w[2] - nu * (w[4] + w[5]);
    [m(u), m(v)]
}

/// `want` holds the value, then the first derivatives in `d1`, then the
/// second derivatives in `d2` (directions `0..d1` and `0..d2`).
fn field_matches(f: &Field<f64>, want: &[f64], d1: usize, d2: usize) -> bool {
    let same = |got: Option<f64>, w: f64| got.is_some_and(|g| close(g, w, 1e-12, 1e-10));
    same(Some(f.value), want[0])
        && (0..d1).all(|k| same(f.d1[k], want[1 + k]))
        && (0..d2).all(|k| same(f.d2[k], want[1 + d1 + k]))
}

// ------------------------------------------------------------ shared state

struct Shared {
    split: OnceCell<TaskSplit>,
    base: OnceCell<(Mlp, f64)>,
    sweep: OnceCell<(SweepPlan, Vec<RunOutcome>, f64)>,
    scratch: OnceCell<(Vec<(u64, usize, TrainedArtifact)>, f64)>,
    hyper: OnceCell<(Vec<HyperOutcome>, f64)>,
}

impl Shared {
    fn split(&self) -> &TaskSplit {
        self.split.get_or_init(|| TaskSplit::sample(KIND, TaskSplit::default_sizes(KIND), 0).unwrap())
    }

    /// Base network on the family's base task, full desk PINN budget.
    fn base(&self) -> &Mlp {
        &self
            .base
            .get_or_init(|| {
                let t = Instant::now();
                let cfg = TrainConfig::pinn(KIND, Scale::Desk);
                let net = MlpConfig::base(KIND.input_dim(), KIND.output_dim(), 0);
                let (base, art) = train_pinn(&KIND.base_task(), net, &cfg, 0).unwrap();
                let secs = t.elapsed().as_secs_f64();
                println!("  (base network: {} epochs, loss {:.3e}, {secs:.0}s)", art.epochs_run, art.final_train_loss());
                (base, secs)
            })
            .0
    }

    fn sweep(&self) -> &(SweepPlan, Vec<RunOutcome>, f64) {
        self.sweep.get_or_init(|| {
            let base = self.base();
            let mut plan = SweepPlan::standard(KIND, Scale::Desk);
            plan.ranks = vec![1, 4];
            plan.seeds = SWEEP_SEEDS.to_vec();
            plan.baselines = false;
            plan.max_test_tasks = Some(SWEEP_TASKS);
            let t = Instant::now();
            let out = run_rank_sweep(base, self.split(), &plan, 1).unwrap();
            (plan, out, t.elapsed().as_secs_f64())
        })
    }

    /// From-scratch PINNs on the sweep tasks with the sweep's budget.
    fn scratch(&self) -> &(Vec<(u64, usize, TrainedArtifact)>, f64) {
        self.scratch.get_or_init(|| {
            let base = self.base();
            let plan = &self.sweep().0;
            let t = Instant::now();
            let mut out = Vec::new();
            for &seed in &plan.seeds {
                for (i, task) in self.split().test[..SWEEP_TASKS].iter().enumerate() {
                    let (_, art) = train_pinn(task, base.config().clone(), &plan.scratch, run_seed(seed, i)).unwrap();
                    out.push((seed, i, art));
                }
            }
            (out, t.elapsed().as_secs_f64())
        })
    }

    fn hyper(&self) -> &(Vec<HyperOutcome>, f64) {
        self.hyper.get_or_init(|| {
            let base = self.base();
            let mut plan = HyperPlan::standard(KIND, Scale::Desk);
            plan.seeds = vec![0];
            let t = Instant::now();
            let mut banks = Banks::new();
            let out = run_hyper_matrix(base, self.split(), &plan, &mut banks, 1).unwrap();
            (out, t.elapsed().as_secs_f64())
        })
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

// -------------------------------------------------------------- criteria

fn random_network(r: &mut rng::Rng) -> (MlpConfig, Vec<f64>) {
    let input_dim = r.random_range(1..=3);
    let depth = r.random_range(1..=3);
    let cfg = MlpConfig {
        input_dim,
        hidden_widths: (0..depth).map(|_| r.random_range(2..=6)).collect(),
        output_dim: r.random_range(1..=3),
        activation: if r.random_bool(0.5) { Activation::Tanh } else { Activation::Sine },
        init_seed: r.random(),
    };
    let x = (0..input_dim).map(|_| r.random_range(-1.0..1.0)).collect();
    (cfg, x)
}

fn jet_at(net: &Mlp, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let dirs: Vec<usize> = (0..x.len()).collect();
    let mut tape = Tape::new();
    let t = net.on_tape(&mut tape, false);
    let jet = t.jet(&mut tape, &Mat::from_vec(1, x.len(), x.to_vec()), &JetSpec::new(&dirs, &dirs)).unwrap();
    let out = net.config().output_dim;
    let first = dirs.iter().map(|&k| tape.value(jet.d1(k).unwrap()).row(0).to_vec()).collect();
    let second = dirs
        .iter()
        .map(|&k| match jet.d2(k).unwrap() {
            Some(v) => tape.value(v).row(0).to_vec(),
            None => vec![0.0; out],
        })
        .collect();
    (first, second)
}

fn c1_autodiff(_: &Shared) -> Verdict {
    let t = Instant::now();
    let mut r = rng::seeded(2024);
    let mut failures = Vec::new();
    for n in 0..100 {
        let (cfg, x) = random_network(&mut r);
        let net = Mlp::new(cfg.clone()).unwrap();
        let pts = Mat::from_vec(1, x.len(), x.clone());
        let w = net.params().values;

        // parameter gradient of a mean-square output loss
        let mut tape = Tape::new();
        let tn = net.on_tape(&mut tape, true);
        let xin = tape.constant(pts.clone());
        let out = tn.forward(&mut tape, xin);
        let loss = tape.mean_square(out);
        let g = tape.grad(loss, &tn.params()).unwrap();
        let fd = central_gradient(
            |p| {
                let y = forward_with(&cfg, p, &pts).unwrap();
                y.as_slice().iter().map(|v| v * v).sum::<f64>() / y.len() as f64
            },
            &w,
            1e-6,
        );
        if let Some(i) = (0..g.len()).find(|&i| !close(g[i], fd[i], 1e-4, 1e-9)) {
            failures.push(format!("net {n} param {i}: {} vs {}", g[i], fd[i]));
        }

        // input derivatives
        let (first, second) = jet_at(&net, &x);
        for c in 0..cfg.output_dim {
            let f = |p: &[f64]| net.forward(&Mat::from_vec(1, p.len(), p.to_vec())).get(0, c);
            let g1 = central_gradient(f, &x, 1e-6);
            for k in 0..x.len() {
                if !close(first[k][c], g1[k], 1e-4, 1e-9) {
                    failures.push(format!("net {n} d/dx{k}[{c}]: {} vs {}", first[k][c], g1[k]));
                }
                let s = central_second(f, &x, k, 1e-3);
                if !close(second[k][c], s, 1e-4, 1e-7) {
                    failures.push(format!("net {n} d2/dx{k}2[{c}]: {} vs {s}", second[k][c]));
                }
            }
        }

        // gradient of Σ u_xx with respect to the weights
        let mut tape = Tape::new();
        let tn = net.on_tape(&mut tape, true);
        let jet = tn.jet(&mut tape, &pts, &JetSpec::new(&[0], &[0])).unwrap();
        let uxx = jet.d2(0).unwrap().expect("hidden layers give a second derivative");
        let total = tape.sum(uxx);
        let g = tape.grad(total, &tn.params()).unwrap();
        let fd = central_gradient(
            |p| {
                let m = Mlp::from_params(cfg.clone(), &ParamVector::new(p.to_vec(), cfg.layout()).unwrap()).unwrap();
                jet_at(&m, &x).1[0].iter().sum()
            },
            &w,
            1e-5,
        );
        if let Some(i) = (0..g.len()).find(|&i| !close(g[i], fd[i], 1e-3, 1e-8)) {
            failures.push(format!("net {n} d/dw u_xx param {i}: {} vs {}", g[i], fd[i]));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let head = failures.first().cloned().unwrap_or_default();
    verdict(
        failures.is_empty() && secs < 60.0,
        format!("100 networks, {} mismatches {head}; {secs:.1}s", failures.len()),
    )
}

fn c2_residuals(_: &Shared) -> Verdict {
    let t = Instant::now();
    let mut r = rng::seeded(77);
    let (mut worst_lib, mut worst_oracle, mut fields_ok) = (0.0f64, 0.0f64, true);
    for re in [20.0, 60.0, 100.0] {
        let task = Task::Kovasznay { re };
        for _ in 0..1000 {
            let (x, y) = (r.random::<f64>(), r.random::<f64>());
            let lib = task.analytic_fields(&[x, y]).unwrap();
            let res = task.residual(&mut Plain, &lib);
            worst_lib = res.iter().fold(worst_lib, |m, v| m.max(v.abs()));
            let o = kovasznay_oracle(x, y, re);
            worst_oracle = kovasznay_residual_oracle(&o, re).iter().fold(worst_oracle, |m, v| m.max(v.abs()));
            for (f, want) in lib.iter().zip(&o) {
                fields_ok &= field_matches(f, want, 2, 2);
            }
        }
    }
    for nu in [1e-4, 5e-4, 1e-3] {
        let task = Task::Burgers2d { nu };
        for _ in 0..1000 {
            let (x, y, s) = (r.random::<f64>(), r.random::<f64>(), r.random::<f64>());
            let lib = task.analytic_fields(&[x, y, s]).unwrap();
            let res = task.residual(&mut Plain, &lib);
            worst_lib = res.iter().fold(worst_lib, |m, v| m.max(v.abs()));
            let o = burgers2d_oracle(x, y, s, nu);
            worst_oracle = burgers2d_residual_oracle(&o, nu).iter().fold(worst_oracle, |m, v| m.max(v.abs()));
            for (f, want) in lib.iter().zip(&o) {
                fields_ok &= field_matches(f, want, 3, 2);
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        worst_lib <= 1e-8 && worst_oracle <= 1e-8 && fields_ok && secs < 60.0,
        format!(
            "max |residual| {worst_lib:.2e} (independent formulas {worst_oracle:.2e}), fields agree: {fields_ok}; {secs:.1}s"
        ),
    )
}

fn c3_grf(_: &Shared) -> Verdict {
    let t = Instant::now();
    let (n, kmax, draws) = (GRF_POINTS, 32usize, 100_000usize);
    let table: Vec<Vec<(f64, f64)>> = (0..=kmax)
        .map(|k| (0..n).map(|j| (2.0 * PI * (k * j) as f64 / n as f64).sin_cos()).collect())
        .collect();
    let mut sq = vec![0.0; kmax + 1];
    let mut quad = vec![0.0; kmax + 1];
    let mut count = vec![0.0; kmax + 1];
    for d in 0..draws {
        let u = sample_grf(d as u64, n);
        for k in 0..=kmax {
            let (mut a, mut b) = (0.0, 0.0);
            for (v, (s, c)) in u.iter().zip(&table[k]) {
                a += v * c;
                b += v * s;
            }
            let norm = if k == 0 { 1.0 / n as f64 } else { 2f64.sqrt() / n as f64 };
            let coeffs: &[f64] = if k == 0 { &[a * norm] } else { &[a * norm, b * norm] };
            for c in coeffs {
                sq[k] += c * c;
                quad[k] += c.powi(4);
                count[k] += 1.0;
            }
        }
    }
    let mut worst = (0usize, 0.0f64);
    for k in 0..=kmax {
        let var = sq[k] / count[k];
        let se = ((quad[k] / count[k] - var * var) / count[k]).sqrt();
        let w = 2.0 * PI * k as f64;
        let want = (25.0 / (w * w + 25.0)).powi(2);
        let z = (var - want).abs() / se;
        if z > worst.1 {
            worst = (k, z);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        worst.1 <= 3.0 && secs < 60.0,
        format!("largest deviation {:.2} standard errors (mode {}); {secs:.1}s", worst.1, worst.0),
    )
}

fn c4_pinn(_: &Shared) -> Verdict {
    let t = Instant::now();
    let re = 40.0;
    let cfg = TrainConfig::pinn(KIND, Scale::Desk);
    let (net, art) = train_pinn(&Task::Kovasznay { re }, MlpConfig::base(2, 3, 0), &cfg, 0).unwrap();
    let l = 101;
    let grid = Mat::from_fn(l * l, 2, |i, j| if j == 0 { (i / l) as f64 / 100.0 } else { (i % l) as f64 / 100.0 });
    let pred = net.forward(&grid);
    let mut sse = 0.0;
    for i in 0..grid.rows() {
        let o = kovasznay_oracle(grid.get(i, 0), grid.get(i, 1), re);
        for c in 0..3 {
            sse += (pred.get(i, c) - o[c][0]).powi(2);
        }
    }
    let mse = sse / (3 * l * l) as f64;
    let secs = t.elapsed().as_secs_f64();
    verdict(
        mse <= 1e-4 && secs <= 1800.0,
        format!("test MSE {mse:.3e} after {} epochs (loss {:.3e}); {secs:.0}s", art.epochs_run, art.final_train_loss()),
    )
}

fn c5_rank_sweep(s: &Shared) -> Verdict {
    let (_, out, secs) = s.sweep();
    let at = |r: usize| mean(out.iter().filter(|o| o.record.rank == RankSpec::Low(r)).map(|o| o.record.test_mse));
    let (m1, m4) = (at(1), at(4));
    let base = s.base();
    let frac = adapter_param_count(base.config(), 4) as f64 / base.param_count() as f64;
    verdict(
        m4 <= m1 && frac < 0.15 && *secs <= 7200.0,
        format!(
            "mean test MSE rank 1 {m1:.3e}, rank 4 {m4:.3e} ({} seeds x {SWEEP_TASKS} tasks); rank-4 params {:.1}% of full; {secs:.0}s",
            SWEEP_SEEDS.len(),
            100.0 * frac
        ),
    )
}

fn c6_convergence(s: &Shared) -> Verdict {
    let (_, out, sweep_secs) = s.sweep();
    let (scratch, scratch_secs) = s.scratch();
    let mut per_seed = Vec::new();
    for &seed in &SWEEP_SEEDS {
        let mut ratios: Vec<f64> = scratch
            .iter()
            .filter(|(sd, _, _)| *sd == seed)
            .map(|(_, task, art)| {
                let target = art.final_train_loss();
                let lora = out
                    .iter()
                    .find(|o| {
                        o.record.seed == Some(seed)
                            && o.record.task_index == Some(*task)
                            && o.record.rank == RankSpec::Low(4)
                            && o.record.method == Method::LoraPinn
                    })
                    .expect("rank-4 run for every scratch run");
                match lora.history.iter().find(|h| h.train.total <= target) {
                    Some(h) => (h.epoch + 1) as f64 / art.epochs_run as f64,
                    None => f64::INFINITY,
                }
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        let n = ratios.len();
        let median = if n % 2 == 1 { ratios[n / 2] } else { 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]) };
        per_seed.push(median);
    }
    // rank-4 runs are half of the sweep
    let secs = scratch_secs + sweep_secs / 2.0;
    let list: Vec<String> = per_seed.iter().map(|m| format!("{m:.3}")).collect();
    verdict(
        per_seed.iter().all(|&m| m <= 0.5) && secs <= 7200.0,
        format!("median epochs-to-match / scratch epochs per seed [{}]; {secs:.0}s", list.join(", ")),
    )
}

fn hyper_mean(out: &[HyperOutcome], regime: Regime, mode: AssemblyMode, tasks: Option<usize>) -> f64 {
    let o = out.iter().find(|o| o.regime == regime && o.mode == mode).expect("cell trained");
    mean(o.records.iter().take(tasks.unwrap_or(usize::MAX)).map(|r| r.test_mse))
}

fn c7_regimes(s: &Shared) -> Verdict {
    let (out, secs) = s.hyper();
    let lora4 = AssemblyMode::Lora { rank: 4 };
    let full = AssemblyMode::Full;
    let b4 = hyper_mean(out, Regime::B4, lora4, None);
    let b2 = hyper_mean(out, Regime::B2, lora4, None);
    let a = b2 >= 10.0 * b4;
    let mut cells = Vec::new();
    let mut b_ok = true;
    for regime in Regime::ALL {
        let (r4, rf) = (hyper_mean(out, regime, lora4, None), hyper_mean(out, regime, full, None));
        b_ok &= r4 < rf;
        cells.push(format!("{regime} {r4:.2e}/{rf:.2e}"));
    }
    // per-task adapters exist for the first sweep tasks; compare on those
    let (_, sweep, _) = s.sweep();
    let lora = mean(sweep.iter().filter(|o| o.record.rank == RankSpec::Low(4)).map(|o| o.record.test_mse));
    let b4_same = hyper_mean(out, Regime::B4, lora4, Some(SWEEP_TASKS));
    let c = b4_same <= 10.0 * lora;
    verdict(
        a && b_ok && c && *secs <= 14_400.0,
        format!(
            "(a) B2/B4 = {:.1} [{a}]; (b) rank-4/full: {} [{b_ok}]; (c) B4 {b4_same:.2e} vs per-task LoRA {lora:.2e} = {:.2}x [{c}]; {secs:.0}s",
            b2 / b4,
            cells.join(", "),
            b4_same / lora
        ),
    )
}

fn c8_inference(s: &Shared) -> Verdict {
    let t = Instant::now();
    let (out, _) = s.hyper();
    let cell = out
        .iter()
        .find(|o| o.regime == Regime::B4 && o.mode == AssemblyMode::Lora { rank: 4 })
        .expect("B4 rank-4 cell");
    let base = s.base();
    let task = &s.split().test[0];
    let grid = eval_grid(KIND);
    let infer = measure_inference(&cell.hyper, base, task, &grid, 7).unwrap();
    let plan = &s.sweep().0;
    let adapt = measure_adaptation(base, task, 4, &plan.adapt, 3).unwrap();
    let speedup = adapt.median / infer.median;
    let secs = t.elapsed().as_secs_f64();
    verdict(
        speedup >= 100.0 && secs <= 1200.0,
        format!(
            "inference {:.4}s vs adaptation {:.1}s median: {speedup:.0}x; {secs:.0}s",
            infer.median, adapt.median
        ),
    )
}

fn tiny(kind: SystemKind) -> PointBudget {
    match kind {
        SystemKind::Kovasznay => PointBudget { collocation: 20, initial: 0, boundary_per_face: 4, periodic_times: 0 },
        SystemKind::Burgers2d => PointBudget { collocation: 20, initial: 10, boundary_per_face: 3, periodic_times: 0 },
        SystemKind::Burgers1d => PointBudget { collocation: 20, initial: 10, boundary_per_face: 0, periodic_times: 5 },
    }
}

fn tiny_config(kind: SystemKind, epochs: usize) -> TrainConfig {
    let mut c = TrainConfig::pinn(kind, Scale::Desk);
    c.schedule = Schedule { val_every: 1, ..Schedule::proportional(epochs, None) };
    c.budget = tiny(kind);
    c
}

fn small_net(kind: SystemKind, seed: u64) -> Mlp {
    Mlp::new(MlpConfig { hidden_widths: vec![8, 8], ..MlpConfig::base(kind.input_dim(), kind.output_dim(), seed) })
        .unwrap()
}

fn c9_properties(_: &Shared) -> Verdict {
    let t = Instant::now();
    let mut r = rng::seeded(9);
    let mut failed: Vec<&str> = Vec::new();

    // flatten / unflatten
    let mut identity = true;
    for _ in 0..200 {
        let mut layout = ParamLayout::new();
        for i in 0..r.random_range(1..8) {
            let kind = [BlockKind::Weight, BlockKind::Bias, BlockKind::LoraA, BlockKind::LoraB][i % 4];
            layout.push(i, kind, r.random_range(1..7), r.random_range(1..7));
        }
        let values: Vec<f64> = (0..layout.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let blocks = layout.unflatten(&values).unwrap();
        identity &= layout.flatten(&blocks.iter().collect::<Vec<_>>()).unwrap() == values;
    }
    if !identity {
        failed.push("flatten/unflatten");
    }

    // W0 immutability: adaptation and every regime in every assembly mode
    let mut frozen = true;
    for kind in SystemKind::ALL {
        let base = small_net(kind, 1);
        let before = base.params();
        let (lora, _) = adapt_lora(&base, &kind.sample_task(4), 2, &tiny_config(kind, 8), 0).unwrap();
        frozen &= base.params() == before && lora.base().params() == before;
    }
    let base = small_net(KIND, 2);
    let before = base.params();
    let tasks: Vec<HyperTask> = [30.0, 80.0]
        .iter()
        .enumerate()
        .map(|(i, &re)| {
            let task = Task::Kovasznay { re };
            let pts = make_point_sets(&task, &tiny(KIND), i as u64).unwrap();
            let mut h = HyperTask::new(task.clone(), pts.clone()).unwrap();
            h.labels = Some(Labeled { targets: Reference::Analytic(task).values(&pts.collocation), points: pts.collocation });
            h
        })
        .collect();
    for mode in [AssemblyMode::Lora { rank: 2 }, AssemblyMode::Full, AssemblyMode::Delta] {
        for regime in Regime::ALL {
            let hc = HyperConfig { hidden_widths: vec![6], ..HyperConfig::new(mode, 3) };
            let mut hyper = HyperNetwork::new(&hc, &base, KIND.codec()).unwrap();
            let mut ts = tasks.clone();
            for t in &mut ts {
                t.target = Some(vec![0.01; hyper.output_dim()]);
            }
            train_hyper(regime, &mut hyper, &base, &ts, &ts, &tiny_config(KIND, 4), 0).unwrap();
            frozen &= base.params() == before;
        }
    }
    if !frozen {
        failed.push("base immutability");
    }

    // loss components
    let mut nonneg = true;
    for kind in SystemKind::ALL {
        for s in 0..20 {
            let task = kind.sample_task(s);
            let pts = make_point_sets(&task, &tiny(kind), s).unwrap();
            let rep = pinn_loss(&small_net(kind, s), &task, &pts, &LossWeights::default()).unwrap();
            nonneg &= rep.components().iter().chain([&rep.total]).all(|&c| c >= 0.0 && c.is_finite());
        }
    }
    if !nonneg {
        failed.push("loss non-negativity");
    }

    // reproducibility from (config, seed)
    let mut repro = true;
    for kind in SystemKind::ALL {
        let task = kind.sample_task(5);
        let net = small_net(kind, 0).config().clone();
        let cfg = tiny_config(kind, 10);
        let a = train_pinn(&task, net.clone(), &cfg, 3).unwrap();
        let b = train_pinn(&task, net, &cfg, 3).unwrap();
        repro &= a.0 == b.0 && a.1.history == b.1.history;
    }
    let hyper_run = || {
        let hc = HyperConfig { hidden_widths: vec![6], ..HyperConfig::new(AssemblyMode::Lora { rank: 2 }, 3) };
        let mut h = HyperNetwork::new(&hc, &base, KIND.codec()).unwrap();
        train_hyper(Regime::B4, &mut h, &base, &tasks, &tasks, &tiny_config(KIND, 5), 1).unwrap();
        h.net().params()
    };
    repro &= hyper_run() == hyper_run();
    if !repro {
        failed.push("reproducibility");
    }

    // split disjointness, checked on serialized tasks
    let mut disjoint = true;
    for kind in SystemKind::ALL {
        for seed in 0..3 {
            let split = TaskSplit::sample(kind, TaskSplit::default_sizes(kind), seed).unwrap();
            let all: Vec<&Task> = split.train.iter().chain(&split.valid).chain(&split.test).collect();
            let distinct: HashSet<String> = all.iter().map(|t| serde_json::to_string(t).unwrap()).collect();
            disjoint &= distinct.len() == all.len() && split.check_disjoint().is_ok();
            let mut leaky = split.clone();
            leaky.test[0] = leaky.train[0].clone();
            disjoint &= leaky.check_disjoint().is_err();
        }
    }
    if !disjoint {
        failed.push("split disjointness");
    }

    let secs = t.elapsed().as_secs_f64();
    verdict(
        failed.is_empty() && secs < 600.0,
        format!(
            "flatten/unflatten, base immutability, loss non-negativity, reproducibility, split disjointness; failed: {:?}; {secs:.1}s",
            failed
        ),
    )
}

fn main() {
    let only: Option<HashSet<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn(&Shared) -> Verdict); 9] = [
        (1, "autodiff vs finite differences", c1_autodiff),
        (2, "analytic residuals vanish", c2_residuals),
        (3, "GRF mode variances", c3_grf),
        (4, "PINN on Kovasznay Re=40", c4_pinn),
        (5, "rank sweep trend", c5_rank_sweep),
        (6, "LoRA convergence vs scratch", c6_convergence),
        (7, "hypernetwork regime ordering", c7_regimes),
        (8, "hypernetwork inference speed", c8_inference),
        (9, "property suites", c9_properties),
    ];
    let shared = Shared {
        split: OnceCell::new(),
        base: OnceCell::new(),
        sweep: OnceCell::new(),
        scratch: OnceCell::new(),
        hyper: OnceCell::new(),
    };
    let mut failures = 0;
    for (n, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            println!("SKIP {n} {name}");
            continue;
        }
        let v = check(&shared);
        if !v.pass {
            failures += 1;
        }
        println!("{} {n} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
