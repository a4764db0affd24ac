use hyperlora_core::autodiff::{Activation, BlockKind, Mat, ParamLayout};
use hyperlora_core::nn::{lora_wrap, AssemblyMode, EmbeddingCodec, HyperConfig, HyperNetwork, Mlp, MlpConfig};
use hyperlora_core::pde::{make_point_sets, PointBudget, Reference, SystemKind, Task};
use hyperlora_core::train::{
    adapt_lora, pinn_loss, train_hyper, train_pinn, HyperTask, LossWeights, Regime, Scale, Schedule, TrainConfig,
};
use proptest::prelude::*;

fn tiny_budget(kind: SystemKind) -> PointBudget {
    match kind {
        SystemKind::Kovasznay => PointBudget { collocation: 24, initial: 0, boundary_per_face: 4, periodic_times: 0 },
        SystemKind::Burgers2d => PointBudget { collocation: 24, initial: 12, boundary_per_face: 3, periodic_times: 0 },
        SystemKind::Burgers1d => PointBudget { collocation: 24, initial: 12, boundary_per_face: 0, periodic_times: 6 },
    }
}

fn small_net(kind: SystemKind, seed: u64) -> Mlp {
    Mlp::new(MlpConfig {
        hidden_widths: vec![8, 8],
        ..MlpConfig::base(kind.input_dim(), kind.output_dim(), seed)
    })
    .unwrap()
}

fn config(kind: SystemKind, epochs: usize) -> TrainConfig {
    let mut c = TrainConfig::pinn(kind, Scale::Desk);
    c.schedule = Schedule::proportional(epochs, None);
    c.budget = tiny_budget(kind);
    c
}

fn kind_strategy() -> impl Strategy<Value = SystemKind> {
    prop_oneof![Just(SystemKind::Burgers1d), Just(SystemKind::Burgers2d), Just(SystemKind::Kovasznay)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flatten_inverts_unflatten(
        shapes in prop::collection::vec((1usize..6, 1usize..6), 1..6),
        seed in any::<u64>(),
    ) {
        let mut layout = ParamLayout::new();
        for (i, &(r, c)) in shapes.iter().enumerate() {
            let kind = if i % 2 == 0 { BlockKind::Weight } else { BlockKind::Bias };
            layout.push(i / 2, kind, r, c);
        }
        let values: Vec<f64> = (0..layout.len())
            .map(|i| ((seed.wrapping_add(i as u64) % 1000) as f64 - 500.0) * 1e-3)
            .collect();
        let blocks = layout.unflatten(&values).unwrap();
        let refs: Vec<&Mat> = blocks.iter().collect();
        prop_assert_eq!(layout.flatten(&refs).unwrap(), values);
    }

    #[test]
    fn network_params_roundtrip(widths in prop::collection::vec(1usize..7, 1..4), seed in any::<u64>()) {
        let cfg = MlpConfig { input_dim: 2, hidden_widths: widths, output_dim: 3, activation: Activation::Tanh, init_seed: seed };
        let net = Mlp::new(cfg.clone()).unwrap();
        let back = Mlp::from_params(cfg, &net.params()).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn loss_components_are_non_negative(kind in kind_strategy(), task_seed in 0u64..50, net_seed in any::<u64>()) {
        let task = kind.sample_task(task_seed);
        let pts = make_point_sets(&task, &tiny_budget(kind), task_seed).unwrap();
        let r = pinn_loss(&small_net(kind, net_seed), &task, &pts, &LossWeights::default()).unwrap();
        for c in r.components() {
            prop_assert!(c >= 0.0 && c.is_finite(), "{r:?}");
        }
        prop_assert!(r.total >= 0.0);
    }
}

#[test]
fn runs_are_reproducible_from_config_and_seed() {
    for kind in SystemKind::ALL {
        let task = kind.sample_task(1);
        let net = small_net(kind, 0).config().clone();
        let cfg = config(kind, 15);
        let (a, art_a) = train_pinn(&task, net.clone(), &cfg, 9).unwrap();
        let (b, art_b) = train_pinn(&task, net.clone(), &cfg, 9).unwrap();
        assert_eq!(a, b, "{kind}");
        assert_eq!(art_a.history, art_b.history);
        let (c, _) = train_pinn(&task, net, &cfg, 10).unwrap();
        assert_ne!(a, c);
    }
}

#[test]
fn adaptation_never_touches_the_base() {
    for kind in SystemKind::ALL {
        let base = small_net(kind, 3);
        let before = base.params();
        let (adapted, _) = adapt_lora(&base, &kind.sample_task(2), 2, &config(kind, 10), 0).unwrap();
        assert_eq!(base.params(), before);
        assert_eq!(adapted.base().params(), before);
        assert_ne!(adapted.effective_weights().params(), before);
    }
}

#[test]
fn wrapping_starts_from_the_base_function() {
    let base = small_net(SystemKind::Kovasznay, 3);
    let lora = lora_wrap(&base, 3, 5).unwrap();
    let x = Mat::from_fn(7, 2, |i, j| 0.1 * i as f64 - 0.2 * j as f64);
    assert_eq!(lora.forward(&x).zip_map(&base.forward(&x), |a, b| a - b).max_abs(), 0.0);
}

#[test]
fn hypernetwork_regimes_never_touch_the_base() {
    let kind = SystemKind::Kovasznay;
    let base = small_net(kind, 4);
    let before = base.params();
    let tasks: Vec<HyperTask> = [25.0, 75.0]
        .iter()
        .enumerate()
        .map(|(i, &re)| {
            let task = Task::Kovasznay { re };
            let pts = make_point_sets(&task, &tiny_budget(kind), i as u64).unwrap();
            let mut h = HyperTask::new(task.clone(), pts.clone()).unwrap();
            h.labels = Some(hyperlora_core::pde::Labeled {
                targets: Reference::Analytic(task).values(&pts.collocation),
                points: pts.collocation,
            });
            h
        })
        .collect();
    for mode in [AssemblyMode::Lora { rank: 2 }, AssemblyMode::Full, AssemblyMode::Delta] {
        for regime in Regime::ALL {
            let hc = HyperConfig { hidden_widths: vec![6], ..HyperConfig::new(mode, 1) };
            let mut hyper = HyperNetwork::new(&hc, &base, EmbeddingCodec::reynolds()).unwrap();
            let mut tasks = tasks.clone();
            for t in &mut tasks {
                t.target = Some(vec![0.01; hyper.output_dim()]);
            }
            let mut cfg = config(kind, 5);
            cfg.schedule.val_every = 1;
            train_hyper(regime, &mut hyper, &base, &tasks, &tasks, &cfg, 0).unwrap();
            assert_eq!(base.params(), before, "{regime} {mode:?}");
        }
    }
}
