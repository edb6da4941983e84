//! Optimizer and training-loop behavior at micro scale.

mod common;

use common::{adam_reference, band_dataset, micro_model_config, tally_reference};
use emohrnet_core::adam::{adam_step, adam_update, AdamState};
use emohrnet_core::augment::AugmentPolicy;
use emohrnet_core::error::Error;
use emohrnet_core::model::HRNetModel;
use emohrnet_core::rng::Rng;
use emohrnet_core::train::{evaluate, train, CheckpointMeta, TrainConfig};
use emohrnet_core::{Graph, Tensor};

#[test]
fn adam_agrees_with_straight_line_reimplementation() {
    let mut rng = Rng::new(21, 0);
    for _ in 0..20 {
        let w0 = rng.standard_normal();
        let grads: Vec<f64> = (0..12).map(|_| rng.standard_normal()).collect();
        let (lr, b1, b2, eps, wd) = (0.001, 0.9, 0.999, 1e-8, 0.0001);
        let expect = adam_reference(w0, &grads, lr, b1, b2, eps, wd);

        let mut w = [w0];
        let mut m = [0.0];
        let mut v = [0.0];
        for (i, &g) in grads.iter().enumerate() {
            adam_update(&mut w, &[g], &mut m, &mut v, (i + 1) as u64, lr, b1, b2, eps, wd);
            assert!(
                (w[0] - expect[i]).abs() < 1e-15,
                "step {i}: {} vs {}",
                w[0],
                expect[i]
            );
        }
    }
}

#[test]
fn adam_step_counter_advances_once_per_call() {
    let cfg = micro_model_config(8, 12, 2);
    let mut model = HRNetModel::build(&cfg, &mut Rng::new(1, 0)).unwrap();
    let mut state = AdamState::new(model.params());
    let grads: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|(_, t)| vec![0.01; t.numel()])
        .collect();
    let tcfg = TrainConfig::default();
    adam_step(&mut model.params_mut(), &grads, &mut state, &tcfg).unwrap();
    assert_eq!(state.t, 1);
    adam_step(&mut model.params_mut(), &grads, &mut state, &tcfg).unwrap();
    assert_eq!(state.t, 2);
}

#[test]
fn adam_step_rejects_mismatched_state() {
    let cfg = micro_model_config(8, 12, 2);
    let mut model = HRNetModel::build(&cfg, &mut Rng::new(1, 0)).unwrap();
    let mut state = AdamState::new(model.params());
    state.m[0] = vec![0.0; 3];
    let grads: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|(_, t)| vec![0.0; t.numel()])
        .collect();
    let err = adam_step(&mut model.params_mut(), &grads, &mut state, &TrainConfig::default());
    assert!(matches!(err, Err(Error::ShapeMismatch { .. })));
}

#[test]
fn evaluate_matches_the_tally_oracle() {
    let cfg = micro_model_config(8, 10, 3);
    let model = HRNetModel::build(&cfg, &mut Rng::new(31, 0)).unwrap();
    // random 3-class dataset
    let mut ds = band_dataset(6, 8, 10, 77);
    ds.n_classes = 3;
    for (i, s) in ds.samples.iter_mut().enumerate() {
        s.class_id = i % 3;
    }
    let report = evaluate(&model, &ds, 10, 4).unwrap();

    // oracle: run the forward per sample and tally directly
    let mut probs = Vec::new();
    let mut truths = Vec::new();
    for s in &ds.samples {
        let mut g = Graph::new();
        let mut input = vec![0.0f64; 8 * 10];
        input.copy_from_slice(s.mel.values.data());
        let pass = model
            .forward(&mut g, Tensor::new(vec![1, 1, 8, 10], input).unwrap())
            .unwrap();
        probs.push(g.value(pass.probs).data().to_vec());
        truths.push(s.class_id);
    }
    let (uar, overall, confusion) = tally_reference(&probs, &truths, 3);
    assert_eq!(report.unweighted_accuracy, uar);
    assert_eq!(report.overall_accuracy, overall);
    assert_eq!(report.confusion, confusion);

    // the UAR identity: mean of diagonal-over-row-sum ratios
    let mut ratios = Vec::new();
    for c in 0..3 {
        let row: u64 = report.confusion[c].iter().sum();
        if row > 0 {
            ratios.push(report.confusion[c][c] as f64 / row as f64);
        }
    }
    let identity = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert_eq!(report.unweighted_accuracy, identity);
}

#[test]
fn evaluate_rejects_empty_dataset() {
    let cfg = micro_model_config(8, 10, 2);
    let model = HRNetModel::build(&cfg, &mut Rng::new(31, 0)).unwrap();
    let ds = emohrnet_core::data::Dataset {
        samples: Vec::new(),
        n_classes: 2,
    };
    assert!(matches!(
        evaluate(&model, &ds, 10, 4),
        Err(Error::EmptyDataset(_))
    ));
}

#[test]
fn zero_epochs_returns_the_initialized_model() {
    let cfg = micro_model_config(8, 12, 2);
    let ds = band_dataset(2, 8, 12, 5);
    let tcfg = TrainConfig {
        epochs: 0,
        batch_size: 2,
        seed: 9,
        ..TrainConfig::default()
    };
    let mut model = HRNetModel::build(&cfg, &mut Rng::new(tcfg.seed, 0)).unwrap();
    let init: Vec<Vec<f64>> = model.params().iter().map(|(_, t)| t.data().to_vec()).collect();
    let outcome = train(
        &mut model,
        &ds,
        &ds,
        &tcfg,
        &AugmentPolicy::disabled(),
        12,
        &CheckpointMeta::anonymous(),
        None,
    )
    .unwrap();
    assert!(outcome.history.is_empty());
    assert_eq!(outcome.best.epoch_next, 0);
    assert_eq!(outcome.best.validation_metric, None);
    for ((_, tensor), before) in outcome.best.params.iter().zip(&init) {
        assert_eq!(tensor.data(), before.as_slice());
    }
    assert_eq!(outcome.best.adam.t, 0);
}

#[test]
fn validation_never_augments_and_training_does() {
    let cfg = micro_model_config(8, 12, 2);
    let ds = band_dataset(3, 8, 12, 6);
    let tcfg = TrainConfig {
        epochs: 2,
        batch_size: 4,
        seed: 9,
        eval_every: 1,
        ..TrainConfig::default()
    };
    let policy = AugmentPolicy {
        freq_mask_max: 2,
        time_mask_max: 2,
        max_shift: 2,
        ..AugmentPolicy::default()
    };
    let mut model = HRNetModel::build(&cfg, &mut Rng::new(tcfg.seed, 0)).unwrap();
    let outcome = train(
        &mut model,
        &ds,
        &ds,
        &tcfg,
        &policy,
        12,
        &CheckpointMeta::anonymous(),
        None,
    )
    .unwrap();
    // 6 samples x 2 epochs with augmentation on, none during the 2 validations
    assert_eq!(outcome.stats.train_augment_applications, 12);
    assert_eq!(outcome.stats.eval_augment_applications, 0);
    assert_eq!(outcome.history.len(), 2);
    assert!(outcome.history.iter().all(|r| r.val_metric.is_some()));
}

#[test]
fn missing_training_class_is_an_error() {
    let cfg = micro_model_config(8, 12, 2);
    let mut ds = band_dataset(2, 8, 12, 7);
    for s in ds.samples.iter_mut() {
        s.class_id = 0;
    }
    let mut model = HRNetModel::build(&cfg, &mut Rng::new(1, 0)).unwrap();
    let err = train(
        &mut model,
        &ds,
        &ds,
        &TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        },
        &AugmentPolicy::disabled(),
        12,
        &CheckpointMeta::anonymous(),
        None,
    );
    assert!(matches!(err, Err(Error::InvalidData(_))));
}

#[test]
fn divergent_learning_rate_aborts_with_epoch_and_batch() {
    let cfg = micro_model_config(8, 12, 2);
    let ds = band_dataset(3, 8, 12, 8);
    let tcfg = TrainConfig {
        epochs: 50,
        batch_size: 6,
        seed: 2,
        lr: 1e80,
        ..TrainConfig::default()
    };
    let mut model = HRNetModel::build(&cfg, &mut Rng::new(tcfg.seed, 0)).unwrap();
    let err = train(
        &mut model,
        &ds,
        &ds,
        &tcfg,
        &AugmentPolicy::disabled(),
        12,
        &CheckpointMeta::anonymous(),
        None,
    );
    match err {
        Err(Error::NonFiniteLoss { epoch, batch }) => {
            assert!(epoch < 50);
            assert_eq!(batch, 0);
        }
        Err(other) => panic!("expected NonFiniteLoss, got {other:?}"),
        Ok(_) => panic!("expected NonFiniteLoss, training succeeded"),
    }
}

#[test]
fn resume_with_wrong_hash_is_rejected() {
    let cfg = micro_model_config(8, 12, 2);
    let ds = band_dataset(2, 8, 12, 9);
    let tcfg = TrainConfig {
        epochs: 1,
        batch_size: 4,
        seed: 3,
        ..TrainConfig::default()
    };
    let meta = CheckpointMeta {
        config_hash: "aaaa".into(),
        config_echo: serde_json::json!({}),
    };
    let mut model = HRNetModel::build(&cfg, &mut Rng::new(tcfg.seed, 0)).unwrap();
    let outcome = train(
        &mut model,
        &ds,
        &ds,
        &tcfg,
        &AugmentPolicy::disabled(),
        12,
        &meta,
        None,
    )
    .unwrap();
    let other_meta = CheckpointMeta {
        config_hash: "bbbb".into(),
        config_echo: serde_json::json!({}),
    };
    let err = train(
        &mut model,
        &ds,
        &ds,
        &TrainConfig {
            epochs: 2,
            ..tcfg
        },
        &AugmentPolicy::disabled(),
        12,
        &other_meta,
        Some(&outcome.last),
    );
    assert!(matches!(err, Err(Error::ConfigHashMismatch { .. })));
}
