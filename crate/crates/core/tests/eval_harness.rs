use proptest::prelude::*;
use zssl_core::eval::{ablation_suite, make_split, run_protocol, select_rows, EvalConfig, ABLATION_ROWS};
use zssl_core::features::FeatureConfig;
use zssl_core::io::synth::{synth_dataset, SynthSpec};
use zssl_core::io::Dataset;
use zssl_core::model::Protocol;
use zssl_core::pipeline::{DeepChannelConfig, TrainConfig};

fn small_data(deep_dim: usize) -> Dataset {
    synth_dataset(&SynthSpec {
        num_classes: 10,
        samples_per_class: 12,
        deep_dim,
        seed: 3,
        ..SynthSpec::default()
    })
    .unwrap()
}

fn quick(runs: usize) -> EvalConfig {
    EvalConfig {
        name: "quick".into(),
        features: FeatureConfig::skeleton_only(),
        deep: DeepChannelConfig {
            input_dim: 64,
            lstm_hidden: 8,
            ..DeepChannelConfig::default()
        },
        train: TrainConfig {
            epochs: 40,
            lr: 3e-3,
            projection_hidden: 32,
            ..TrainConfig::default()
        },
        runs,
        base_seed: 100,
    }
}

proptest! {
    #[test]
    fn splits_partition_the_classes(n in 2usize..300, p2 in any::<bool>(), seed in any::<u64>()) {
        let labels: Vec<String> = (0..n).map(|i| format!("l{i}")).collect();
        let protocol = if p2 { Protocol::P2 } else { Protocol::P1 };
        let s = make_split(&labels, protocol, seed).unwrap();
        prop_assert!(s.seen().is_disjoint(s.unseen()));
        let used = s.seen().len() + s.unseen().len();
        if p2 && n % 2 == 1 {
            prop_assert_eq!(used, n - 1);
        } else {
            prop_assert_eq!(used, n);
        }
    }
}

#[test]
fn single_run_report_and_determinism() {
    let data = small_data(0);
    let one = run_protocol(&data, Protocol::P1, &quick(1)).unwrap();
    assert_eq!(one.runs.len(), 1);
    assert_eq!(one.mean_top1, one.runs[0].top1);
    assert_eq!(one.std_top1, 0.0);

    let a = run_protocol(&data, Protocol::P2, &quick(3)).unwrap();
    let b = run_protocol(&data, Protocol::P2, &quick(3)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), [101, 102, 103]);
    for r in &a.runs {
        assert_eq!((r.seen_classes, r.unseen_classes), (5, 5));
        assert_eq!((r.train_samples, r.test_samples), (60, 60));
        assert!((0.0..=1.0).contains(&r.top1));
        assert!(r.top5.is_some());
    }
    let mean = a.runs.iter().map(|r| r.top1).sum::<f64>() / 3.0;
    assert!((a.mean_top1 - mean).abs() < 1e-12);
}

#[test]
fn synthetic_accuracy_clears_five_times_chance() {
    let data = synth_dataset(&SynthSpec {
        deep_dim: 0,
        ..SynthSpec::default()
    })
    .unwrap();
    let cfg = EvalConfig {
        train: TrainConfig {
            epochs: 60,
            projection_hidden: 64,
            ..quick(2).train
        },
        ..quick(2)
    };
    let rep = run_protocol(&data, Protocol::P2, &cfg).unwrap();
    let chance = 1.0 / rep.runs[0].unseen_classes as f64;
    assert!(rep.mean_top1 > 5.0 * chance, "{} vs chance {chance}", rep.mean_top1);
}

#[test]
fn ablation_grid_structure_and_deep_isolation() {
    let data = small_data(64);
    let base = EvalConfig {
        train: TrainConfig {
            epochs: 2,
            ..quick(1).train
        },
        ..quick(1)
    };
    let rows = select_rows(None).unwrap();
    let reports = ablation_suite(&data, &[Protocol::P1, Protocol::P2], &rows, &base).unwrap();
    assert_eq!(reports.len(), 30);
    for (i, r) in reports.iter().enumerate() {
        assert_eq!(r.config, ABLATION_ROWS[i / 2].key);
        assert_eq!(r.protocol, if i % 2 == 0 { Protocol::P1 } else { Protocol::P2 });
    }

    // skeleton rows on a dataset with snippets leave the read counters alone
    let fresh = small_data(64);
    let skel_rows = select_rows(Some(&["dist".into(), "svd+ang".into()])).unwrap();
    ablation_suite(&fresh, &[Protocol::P1], &skel_rows, &base).unwrap();
    assert!(fresh.samples.iter().all(|s| s.deep().unwrap().read_count() == 0));
}

#[test]
fn deep_rows_need_snippets() {
    let data = small_data(0);
    let rows = select_rows(Some(&["deep".into()])).unwrap();
    let err = ablation_suite(&data, &[Protocol::P1], &rows, &quick(1)).unwrap_err();
    assert!(err.to_string().contains("deep"), "{err}");
}
