//! Cross-entropy/Adam training with periodic validation and best-checkpoint
//! selection.
//!
//! Determinism contract: (seed, config, data) fully determine every
//! parameter bit at every epoch. All randomness is drawn from streams
//! derived from the master seed — initialization, the per-epoch shuffle,
//! and per-(epoch, sample) augmentation — so a resumed run replays exactly
//! the draws a straight run would have made.

use serde::{Deserialize, Serialize};

use crate::adam::{adam_step, AdamState};
use crate::augment::{augment, AugmentPolicy};
use crate::data::{assemble_batch, epoch_order, Dataset};
use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};
use crate::model::HRNetModel;
use crate::persist::Checkpoint;
use crate::rng::{augment_stream, Rng};
use crate::Graph;

/// Optimizer and schedule hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Validate every this many epochs.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 0.0001,
            epochs: 100,
            batch_size: 64,
            seed: 0,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig("train.lr must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig(
                "train.beta1 and train.beta2 must lie in [0, 1)".into(),
            ));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::InvalidConfig("train.adam_eps must be positive".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig(
                "train.weight_decay must be non-negative".into(),
            ));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("train.batch_size must be at least 1".into()));
        }
        if self.eval_every < 1 {
            return Err(Error::InvalidConfig("train.eval_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// One epoch's history line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Validation unweighted accuracy; absent on non-validation epochs.
    pub val_metric: Option<f64>,
}

/// Counters proving where augmentation was applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrainStats {
    pub train_augment_applications: u64,
    /// Augmentation applications during validation; always zero — validation
    /// never augments, and tests pin that via this counter.
    pub eval_augment_applications: u64,
}

pub struct TrainOutcome {
    /// Checkpoint of the epoch with the highest validation unweighted
    /// accuracy (ties keep the earlier epoch).
    pub best: Checkpoint,
    /// Checkpoint of the final state, the one to resume from.
    pub last: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub stats: TrainStats,
}

/// Run metadata embedded into every produced checkpoint.
#[derive(Clone, Debug)]
pub struct CheckpointMeta {
    pub config_hash: String,
    pub config_echo: serde_json::Value,
}

impl CheckpointMeta {
    /// Placeholder metadata for library-level runs without an engine config.
    pub fn anonymous() -> Self {
        CheckpointMeta {
            config_hash: "unconfigured".into(),
            config_echo: serde_json::Value::Null,
        }
    }
}

/// Classification quality on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Macro-averaged per-class recall over classes present in the data.
    pub unweighted_accuracy: f64,
    pub overall_accuracy: f64,
    /// confusion[true][predicted] counts.
    pub confusion: Vec<Vec<u64>>,
    /// Per-class recall; `null` for classes absent from the dataset.
    pub per_class_recall: Vec<Option<f64>>,
    pub n_samples: usize,
}

fn snapshot(
    model: &HRNetModel,
    adam: &AdamState,
    meta: &CheckpointMeta,
    seed: u64,
    epoch_next: usize,
    validation_metric: Option<f64>,
    best_epoch: Option<usize>,
) -> Checkpoint {
    Checkpoint {
        params: model
            .params()
            .iter()
            .map(|(n, t)| (n.to_string(), t.clone()))
            .collect(),
        adam: adam.clone(),
        config_hash: meta.config_hash.clone(),
        config_echo: meta.config_echo.clone(),
        epoch_next,
        validation_metric,
        best_epoch,
        seed,
    }
}

/// Train `model` in place, returning best/last checkpoints plus history.
///
/// Validation runs every `eval_every` epochs with augmentation structurally
/// disabled. Resuming restores parameters, optimizer state, and the epoch
/// counter from `resume` after checking its config hash.
#[allow(clippy::too_many_arguments)]
pub fn train(
    model: &mut HRNetModel,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    policy: &AugmentPolicy,
    target_frames: usize,
    meta: &CheckpointMeta,
    resume: Option<&Checkpoint>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("training split is empty".into()));
    }
    let n_classes = model.config().n_classes;
    if train_set.n_classes != n_classes || val_set.n_classes != n_classes {
        return Err(Error::InvalidData(format!(
            "class count mismatch: model {n_classes}, train {}, val {}",
            train_set.n_classes, val_set.n_classes
        )));
    }
    for class in 0..n_classes {
        if !train_set.samples.iter().any(|s| s.class_id == class) {
            return Err(Error::InvalidData(format!(
                "class {class} has no samples in the training split"
            )));
        }
    }

    let mut adam;
    let start_epoch;
    match resume {
        Some(ckpt) => {
            if ckpt.config_hash != meta.config_hash {
                return Err(Error::ConfigHashMismatch {
                    ckpt: ckpt.config_hash.clone(),
                    current: meta.config_hash.clone(),
                });
            }
            if ckpt.seed != cfg.seed {
                return Err(Error::InvalidData(format!(
                    "checkpoint seed {} does not match configured seed {}",
                    ckpt.seed, cfg.seed
                )));
            }
            model.load_params(&ckpt.params)?;
            adam = ckpt.adam.clone();
            start_epoch = ckpt.epoch_next;
        }
        None => {
            adam = AdamState::new(model.params());
            start_epoch = 0;
        }
    }

    let mut stats = TrainStats::default();
    let mut history = Vec::new();
    let mut best: Option<Checkpoint> = None;
    let mut best_metric: Option<f64> = None;
    let mut best_epoch: Option<usize> = None;

    for epoch in start_epoch..cfg.epochs {
        let order = epoch_order(train_set.len(), cfg.seed, epoch, true);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut mels: Vec<MelSpectrogram<f64>> = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let sample = &train_set.samples[i];
                if policy.enabled {
                    let mut rng = Rng::new(cfg.seed, augment_stream(epoch, i));
                    mels.push(augment(&sample.mel, policy, &mut rng)?);
                    stats.train_augment_applications += 1;
                } else {
                    mels.push(sample.mel.clone());
                }
            }
            let classes: Vec<usize> = chunk.iter().map(|&i| train_set.samples[i].class_id).collect();
            let ids: Vec<String> = chunk.iter().map(|&i| train_set.samples[i].id.clone()).collect();
            let batch = assemble_batch(
                &mels,
                &classes,
                ids,
                chunk.to_vec(),
                n_classes,
                target_frames,
            )?;

            let mut g = Graph::new();
            let pass = model.forward(&mut g, batch.input)?;
            let loss_var = g.cross_entropy(pass.probs, &batch.labels)?;
            let loss = g.value(loss_var).data()[0];
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            g.backward(loss_var)?;
            let grads: Vec<Vec<f64>> = pass
                .params
                .vars()
                .iter()
                .map(|&v| g.grad(v).expect("parameters always require grad").to_vec())
                .collect();
            adam_step(model.params_mut(), &grads, &mut adam, cfg)?;

            loss_sum += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let train_loss = loss_sum / seen as f64;

        let val_metric = if (epoch + 1) % cfg.eval_every == 0 {
            let report = evaluate(model, val_set, target_frames, cfg.batch_size)?;
            Some(report.unweighted_accuracy)
        } else {
            None
        };
        if let Some(metric) = val_metric {
            let improved = match best_metric {
                None => true,
                Some(b) => metric > b,
            };
            if improved {
                best_metric = Some(metric);
                best_epoch = Some(epoch);
                best = Some(snapshot(
                    model,
                    &adam,
                    meta,
                    cfg.seed,
                    epoch + 1,
                    Some(metric),
                    Some(epoch),
                ));
            }
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_metric,
        });
    }

    let last = snapshot(
        model,
        &adam,
        meta,
        cfg.seed,
        cfg.epochs.max(start_epoch),
        best_metric,
        best_epoch,
    );
    let best = best.unwrap_or_else(|| last.clone());
    Ok(TrainOutcome {
        best,
        last,
        history,
        stats,
    })
}

/// Argmax classification over the dataset (ties pick the lowest class id),
/// tallied into a confusion matrix. Classes absent from the data are
/// excluded from the macro average.
pub fn evaluate(
    model: &HRNetModel,
    ds: &Dataset,
    target_frames: usize,
    batch_size: usize,
) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset("evaluation dataset is empty".into()));
    }
    let n_classes = model.config().n_classes;
    if ds.n_classes != n_classes {
        return Err(Error::InvalidData(format!(
            "class count mismatch: model {n_classes}, dataset {}",
            ds.n_classes
        )));
    }
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    let indices: Vec<usize> = (0..ds.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let mels: Vec<MelSpectrogram<f64>> =
            chunk.iter().map(|&i| ds.samples[i].mel.clone()).collect();
        let classes: Vec<usize> = chunk.iter().map(|&i| ds.samples[i].class_id).collect();
        let ids: Vec<String> = chunk.iter().map(|&i| ds.samples[i].id.clone()).collect();
        let batch = assemble_batch(&mels, &classes, ids, chunk.to_vec(), n_classes, target_frames)?;
        let mut g = Graph::new();
        let pass = model.forward(&mut g, batch.input)?;
        let probs = g.value(pass.probs);
        for (row, &truth) in classes.iter().enumerate() {
            let p = &probs.data()[row * n_classes..(row + 1) * n_classes];
            let mut pred = 0;
            for k in 1..n_classes {
                if p[k] > p[pred] {
                    pred = k;
                }
            }
            confusion[truth][pred] += 1;
        }
    }
    Ok(report_from_confusion(confusion, ds.len()))
}

fn report_from_confusion(confusion: Vec<Vec<u64>>, n_samples: usize) -> EvalReport {
    let n_classes = confusion.len();
    let mut per_class_recall = Vec::with_capacity(n_classes);
    let mut recall_sum = 0.0;
    let mut present = 0usize;
    let mut correct = 0u64;
    for c in 0..n_classes {
        let row_sum: u64 = confusion[c].iter().sum();
        correct += confusion[c][c];
        if row_sum > 0 {
            let recall = confusion[c][c] as f64 / row_sum as f64;
            recall_sum += recall;
            present += 1;
            per_class_recall.push(Some(recall));
        } else {
            per_class_recall.push(None);
        }
    }
    EvalReport {
        unweighted_accuracy: if present > 0 { recall_sum / present as f64 } else { 0.0 },
        overall_accuracy: correct as f64 / n_samples as f64,
        confusion,
        per_class_recall,
        n_samples,
    }
}

/// Render history as CSV: `epoch,train_loss,val_unweighted_acc`, the value
/// column empty on non-validation epochs.
pub fn history_to_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_unweighted_acc\n");
    for r in history {
        out.push_str(&format!(
            "{},{},{}\n",
            r.epoch,
            r.train_loss,
            r.val_metric.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_matches_macro_vs_micro_hand_example() {
        // 2 classes, 9 + 1 samples, everything predicted as class 0:
        // overall 0.9, unweighted 0.5
        let confusion = vec![vec![9, 0], vec![1, 0]];
        let report = report_from_confusion(confusion, 10);
        assert_eq!(report.overall_accuracy, 0.9);
        assert_eq!(report.unweighted_accuracy, 0.5);
        assert_eq!(report.per_class_recall, vec![Some(1.0), Some(0.0)]);
    }

    #[test]
    fn absent_classes_are_excluded_from_the_macro_average() {
        let confusion = vec![vec![4, 0, 0], vec![0, 0, 0], vec![2, 0, 2]];
        let report = report_from_confusion(confusion, 8);
        assert_eq!(report.per_class_recall[1], None);
        assert!((report.unweighted_accuracy - (1.0 + 0.5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn history_csv_has_empty_metric_cells() {
        let csv = history_to_csv(&[
            EpochRecord {
                epoch: 0,
                train_loss: 0.5,
                val_metric: None,
            },
            EpochRecord {
                epoch: 1,
                train_loss: 0.25,
                val_metric: Some(0.75),
            },
        ]);
        assert_eq!(
            csv,
            "epoch,train_loss,val_unweighted_acc\n0,0.5,\n1,0.25,0.75\n"
        );
    }

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let mut c = TrainConfig::default();
        c.lr = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.beta2 = 1.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.batch_size = 0;
        assert!(c.validate().is_err());
    }
}
