mod common;

use proptest::prelude::*;
use rand::Rng;
use replast::surgery::{apply_surgery, parse_config_tag, PruneSpec, SurgeryConfig};
use replast::tensor_store::ClassificationRules;
use replast::tinytrain::{
    accuracy, cross_entropy, random_batch, run_experiment, synth_transfer_tasks, train, Mlp, MlpSpec, Protocol,
    TaskConfig, TrainConfig,
};

fn small_task() -> TaskConfig {
    TaskConfig {
        per_class: 120,
        ..TaskConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn backward_matches_central_differences(seed in any::<u64>(), hidden in prop::collection::vec(2usize..10, 1..3)) {
        let spec = MlpSpec::new(5, &hidden, 3);
        let mut model = Mlp::init(&spec, seed).unwrap();
        let mut rng = common::rng(seed);
        let batch = 6;
        let x = random_batch(&mut rng, batch, 5);
        let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..3)).collect();
        let (_, cache) = model.forward(&x, batch).unwrap();
        let grads = model.backward(&cache, &labels).unwrap();
        let h = 1e-6;
        for layer in 0..grads.layers.len() {
            for i in 0..grads.layers[layer].weight.len() {
                let orig = model.layers()[layer].weight[i];
                model.layers_mut()[layer].weight[i] = orig + h;
                let up = cross_entropy(&model.forward(&x, batch).unwrap().0, &labels, 3);
                model.layers_mut()[layer].weight[i] = orig - h;
                let down = cross_entropy(&model.forward(&x, batch).unwrap().0, &labels, 3);
                model.layers_mut()[layer].weight[i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.layers[layer].weight[i];
                // Absolute floor: differences this small are roundoff in the loss.
                prop_assert!((numeric - analytic).abs() <= 1e-4 * analytic.abs().max(numeric.abs()).max(1e-4));
            }
        }
    }
}

#[test]
fn uniform_model_has_log_c_loss() {
    for classes in [2, 4, 7] {
        let model = Mlp::zeros(&MlpSpec::new(3, &[4], classes)).unwrap();
        let x = random_batch(&mut common::rng(1), 5, 3);
        let (logits, _) = model.forward(&x, 5).unwrap();
        let loss = cross_entropy(&logits, &[0, 1, 0, 1, 1], classes);
        assert!((loss - (classes as f64).ln()).abs() < 1e-6);
    }
}

#[test]
fn source_task_is_learnable() {
    let cfg = TaskConfig::default();
    let tasks = synth_transfer_tasks(5, &cfg).unwrap();
    let model = Mlp::init(&MlpSpec::new(cfg.dims, &[32, 32], cfg.classes), 5).unwrap();
    let out = train(&model, &tasks.source, &TrainConfig::default()).unwrap();
    let acc = accuracy(&out.model, &tasks.source.test).unwrap();
    assert!(acc > 90.0, "source test accuracy {acc}");
}

#[test]
fn early_stopping_returns_the_best_snapshot() {
    let tasks = synth_transfer_tasks(2, &small_task()).unwrap();
    let model = Mlp::init(&MlpSpec::new(16, &[8], 4), 2).unwrap();
    let cfg = TrainConfig {
        max_epochs: 40,
        patience: 5,
        ..TrainConfig::default()
    };
    let out = train(&model, &tasks.target, &cfg).unwrap();
    assert!(out.epochs_run <= cfg.max_epochs);
    assert_eq!(out.val_history.len(), out.epochs_run);
    let best = out.val_history.iter().copied().fold(f64::MIN, f64::max);
    assert_eq!(out.best_val_accuracy, best);
    assert_eq!(out.val_history[out.best_epoch - 1], best);
    assert_eq!(accuracy(&out.model, &tasks.target.val).unwrap(), best);
}

#[test]
fn surgery_that_changes_nothing_trains_like_base() {
    let tasks = synth_transfer_tasks(3, &small_task()).unwrap();
    let spec = MlpSpec::new(16, &[12, 12], 4);
    let pretrained = train(&Mlp::init(&spec, 3).unwrap(), &tasks.source, &TrainConfig::default())
        .unwrap()
        .model;
    let config = SurgeryConfig {
        prune: PruneSpec::proportional(0.001),
        bias_reset: false,
        ..SurgeryConfig::from_tag(parse_config_tag("10M").unwrap(), 9)
    };
    let (operated, report) = apply_surgery(
        &pretrained.to_checkpoint(),
        None,
        &config,
        &ClassificationRules::default(),
    )
    .unwrap();
    assert_eq!(report.total_reinitialized, 0);
    let operated = Mlp::from_checkpoint(&spec, &operated).unwrap();
    let cfg = TrainConfig {
        seed: 4,
        ..TrainConfig::default()
    };
    let a = train(&pretrained, &tasks.target, &cfg).unwrap();
    let b = train(&operated, &tasks.target, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.val_history, b.val_history);
}

#[test]
fn small_protocol_is_reproducible() {
    let text = r#"
        master_seed = 5
        repetitions = 3
        cases = ["Base", "10M", "5NS"]
        hidden = [8]
        saturation = 0.2
        [task]
        per_class = 60
        [pretrain]
        max_epochs = 30
        [finetune]
        max_epochs = 30
        patience = 5
    "#;
    let p = Protocol::parse(text, false).unwrap();
    let a = run_experiment(&p).unwrap();
    let b = run_experiment(&p).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.records.len(), 9);
    assert_eq!(a.first_repetition.len(), 3);
    assert!(a.table().lines().count() == 5);
}

#[test]
fn unknown_case_fails_before_training() {
    let p = Protocol::parse("cases = [\"Base\", \"10Q\"]", false).unwrap();
    let err = run_experiment(&p).unwrap_err();
    assert!(err.is_usage(), "{err}");
}
