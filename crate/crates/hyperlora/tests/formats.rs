use hyperlora::bench::{read_records, write_records, Method, RankSpec, RunRecord};
use hyperlora::io::{load_checkpoint, read_tasks, save_checkpoint, write_tasks, Model, TaskRecord};
use hyperlora_core::nn::{lora_wrap, Mlp, MlpConfig};
use hyperlora_core::pde::{SystemKind, Task};
use proptest::prelude::*;

fn task() -> impl Strategy<Value = Task> {
    prop_oneof![
        (1.0f64..200.0).prop_map(|re| Task::Kovasznay { re }),
        (1e-5f64..1e-2).prop_map(|nu| Task::Burgers2d { nu }),
        any::<u64>().prop_map(|s| SystemKind::Burgers1d.sample_task(s)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn task_files_roundtrip(tasks in prop::collection::vec((task(), prop::option::of(any::<u64>())), 1..6)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tasks.jsonl");
        let records: Vec<TaskRecord> = tasks.into_iter().map(|(task, seed)| TaskRecord { task, seed }).collect();
        write_tasks(&path, &records).unwrap();
        prop_assert_eq!(read_tasks(&path).unwrap(), records);
    }

    #[test]
    fn checkpoints_roundtrip(widths in prop::collection::vec(1usize..9, 1..4), init in any::<u64>(), rank in 1usize..3, seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let net = Mlp::new(MlpConfig { hidden_widths: widths, ..MlpConfig::base(2, 3, init) }).unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&path, &Model::Mlp(net.clone()), seed, &serde_json::json!({})).unwrap();
        let (header, back) = load_checkpoint(&path).unwrap();
        prop_assert_eq!(header.seed, seed);
        prop_assert!(matches!(back, Model::Mlp(ref m) if *m == net));

        // ranks the architecture cannot take are rejected up front
        if let Ok(lora) = lora_wrap(&net, rank, seed) {
            save_checkpoint(&path, &Model::Lora(lora.clone()), seed, &serde_json::json!({})).unwrap();
            let (_, back) = load_checkpoint(&path).unwrap();
            prop_assert!(matches!(back, Model::Lora(ref l) if *l == lora));
        }
    }

    #[test]
    fn rank_labels_parse_back(r in 1usize..1000) {
        prop_assert_eq!(RankSpec::Low(r).to_string().parse::<RankSpec>().unwrap(), RankSpec::Low(r));
    }

    #[test]
    fn result_tables_roundtrip(mse in prop::collection::vec(0.0f64..1.0, 1..5), rank in 1usize..64) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let rows: Vec<RunRecord> = mse
            .iter()
            .enumerate()
            .map(|(i, &m)| RunRecord {
                system: SystemKind::Kovasznay,
                method: Method::LoraPinn,
                rank: RankSpec::Low(rank),
                task_index: Some(i),
                seed: if i % 2 == 0 { Some(i as u64) } else { None },
                n_params_trained: 100 + i,
                train_mse: None,
                valid_mse: Some(m / 2.0),
                test_mse: m,
                final_loss: m * 3.0,
                epochs_run: 10.0,
                time_per_epoch: 0.5,
                inference_time: 5.0,
            })
            .collect();
        write_records(&path, &rows).unwrap();
        prop_assert_eq!(read_records(&path).unwrap(), rows);
    }
}
