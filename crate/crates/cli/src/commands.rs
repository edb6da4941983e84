//! The five subcommands: preprocess, augment-preview, train, eval,
//! gradcheck.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use emohrnet_core::augment::augment;
use emohrnet_core::data::{
    build_manifest, load_row_mel, load_split, Manifest, Split,
};
use emohrnet_core::dsp::{self, MelSpectrogram};
use emohrnet_core::model::HRNetModel;
use emohrnet_core::persist::{
    load_checkpoint, mel_cache_file_name, save_checkpoint, save_mel_cache,
};
use emohrnet_core::rng::{augment_stream, Rng, STREAM_INIT};
use emohrnet_core::train::{
    evaluate, history_to_csv, train, CheckpointMeta, EvalReport, TrainOutcome,
};
use emohrnet_core::verify::run_gradcheck;

use crate::config::EngineConfig;
use crate::pgm::write_pgm;
use crate::CliError;

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Obtain the manifest: read a TSV, or scan-and-split when `data.manifest`
/// points at a directory. Returns the manifest and whether it was built.
pub fn resolve_manifest(cfg: &EngineConfig) -> Result<(Manifest, bool), CliError> {
    let schema = cfg.schema()?;
    let path = cfg.data.manifest.as_ref().ok_or_else(|| {
        CliError::Input("data.manifest must point at a manifest TSV or a corpus directory".into())
    })?;
    if path.is_dir() {
        let (manifest, report) = build_manifest(
            path,
            &schema,
            &cfg.data.split,
            cfg.train.seed,
            cfg.data.include_song,
        )?;
        for (file, why) in &report.skipped {
            eprintln!("warning: skipped {}: {why}", file.display());
        }
        for label in &report.empty_classes {
            eprintln!("warning: class {label} has no samples");
        }
        Ok((manifest, true))
    } else {
        Ok((Manifest::read_tsv(path, schema)?, false))
    }
}

#[derive(Serialize)]
struct PreprocessSummary {
    config: serde_json::Value,
    count: usize,
    n_mels: usize,
    frames_min: usize,
    frames_max: usize,
    value_mean: f64,
    value_std: f64,
    value_min: f64,
    value_max: f64,
}

/// Compute and cache a spectrogram for every manifest row.
pub fn cmd_preprocess(cfg: &EngineConfig, out: &Path) -> Result<(), CliError> {
    let (manifest, built) = resolve_manifest(cfg)?;
    if manifest.rows.is_empty() {
        return Err(CliError::Input("manifest is empty".into()));
    }
    ensure_dir(out)?;
    if built {
        manifest.write_tsv(&out.join("manifest.tsv"))?;
    }

    let mut count = 0usize;
    let mut frames_min = usize::MAX;
    let mut frames_max = 0usize;
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut n_values = 0usize;
    let mut value_min = f64::INFINITY;
    let mut value_max = f64::NEG_INFINITY;
    for row in &manifest.rows {
        let wave = dsp::load_wav(&row.path)?;
        let mel: MelSpectrogram<f64> = dsp::mel_spectrogram(&wave, &cfg.dsp, &row.source_id)?;
        save_mel_cache(&mel, &out.join(mel_cache_file_name(&row.source_id)))?;
        count += 1;
        frames_min = frames_min.min(mel.n_frames());
        frames_max = frames_max.max(mel.n_frames());
        for &v in mel.values.data() {
            sum += v;
            sum_sq += v * v;
            value_min = value_min.min(v);
            value_max = value_max.max(v);
        }
        n_values += mel.values.numel();
    }
    let mean = sum / n_values as f64;
    let summary = PreprocessSummary {
        config: cfg.to_value(),
        count,
        n_mels: cfg.dsp.n_mels,
        frames_min,
        frames_max,
        value_mean: mean,
        value_std: (sum_sq / n_values as f64 - mean * mean).max(0.0).sqrt(),
        value_min,
        value_max,
    };
    write_text(
        &out.join("preprocess-summary.json"),
        &serde_json::to_string_pretty(&summary).expect("summary serializable"),
    )?;
    println!(
        "cached {count} spectrograms ({} mel bins, {frames_min}..{frames_max} frames) to {}",
        cfg.dsp.n_mels,
        out.display()
    );
    println!(
        "values: mean {} std {} min {} max {}",
        summary.value_mean, summary.value_std, summary.value_min, summary.value_max
    );
    Ok(())
}

/// Write original / augmented / absolute-difference preview images.
pub fn cmd_augment_preview(
    cfg: &EngineConfig,
    sample: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let wave = dsp::load_wav(sample)?;
    let source_id = sample.to_string_lossy().into_owned();
    let mel: MelSpectrogram<f64> = dsp::mel_spectrogram(&wave, &cfg.dsp, &source_id)?;
    let fitted = dsp::fit_frames(&mel, cfg.data.n_frames_target);

    // the preview replays exactly the training-time draw stream of
    // (epoch 0, sample 0) under the configured seed
    let mut rng = Rng::new(cfg.train.seed, augment_stream(0, 0));
    let augmented = augment(&fitted, &cfg.augment, &mut rng)?;
    let diff: Vec<f64> = fitted
        .values
        .data()
        .iter()
        .zip(augmented.values.data())
        .map(|(a, b)| (a - b).abs())
        .collect();

    ensure_dir(out)?;
    let (rows, cols) = (fitted.n_mels(), fitted.n_frames());
    write_pgm(&out.join("original.pgm"), rows, cols, fitted.values.data())?;
    write_pgm(&out.join("augmented.pgm"), rows, cols, augmented.values.data())?;
    write_pgm(&out.join("difference.pgm"), rows, cols, &diff)?;
    println!(
        "wrote original.pgm, augmented.pgm, difference.pgm ({rows}x{cols}) to {}",
        out.display()
    );
    Ok(())
}

/// Run training and write best/last checkpoints, history, and the resolved
/// config.
pub fn cmd_train(cfg: &EngineConfig, out: &Path, resume: Option<&Path>) -> Result<TrainOutcome, CliError> {
    let (manifest, _) = resolve_manifest(cfg)?;
    manifest.validate()?;
    let cache_dir = cfg.data.cache_dir.as_deref();
    let train_set = load_split(&manifest, Split::Train, &cfg.dsp, cache_dir)?;
    let val_set = load_split(&manifest, Split::Val, &cfg.dsp, cache_dir)?;

    let meta = CheckpointMeta {
        config_hash: cfg.fingerprint(),
        config_echo: cfg.to_value(),
    };
    let resumed = match resume {
        Some(path) => Some(load_checkpoint(path)?),
        None => None,
    };
    let mut model = HRNetModel::build(&cfg.model, &mut Rng::new(cfg.train.seed, STREAM_INIT))?;
    let outcome = train(
        &mut model,
        &train_set,
        &val_set,
        &cfg.train,
        &cfg.augment,
        cfg.data.n_frames_target,
        &meta,
        resumed.as_ref(),
    )?;

    ensure_dir(out)?;
    save_checkpoint(&outcome.best, &out.join("best.ckpt"))?;
    save_checkpoint(&outcome.last, &out.join("last.ckpt"))?;
    write_text(&out.join("history.csv"), &history_to_csv(&outcome.history))?;
    write_text(
        &out.join("resolved-config.json"),
        &serde_json::to_string_pretty(&cfg.to_value()).expect("config serializable"),
    )?;
    match (outcome.best.best_epoch, outcome.best.validation_metric) {
        (Some(epoch), Some(metric)) => {
            println!("best validation unweighted accuracy {metric} at epoch {epoch}")
        }
        _ => println!("no validation epochs ran; best.ckpt holds the latest state"),
    }
    println!("wrote best.ckpt, last.ckpt, history.csv, resolved-config.json to {}", out.display());
    Ok(outcome)
}

#[derive(Serialize)]
struct EvalOutput {
    config: serde_json::Value,
    split: String,
    report: EvalReport,
}

/// Evaluate a checkpoint on one manifest split and print the report.
pub fn cmd_eval(
    checkpoint: &Path,
    split: &str,
    sets: &[String],
    out: Option<&Path>,
) -> Result<EvalReport, CliError> {
    let split = Split::parse(split)?;
    let ckpt = load_checkpoint(checkpoint)?;

    // the embedded resolved config is the source of truth; --set can
    // override e.g. the manifest location
    let mut doc = ckpt.config_echo.clone();
    if doc.is_null() {
        return Err(CliError::Input(format!(
            "{}: checkpoint carries no embedded config",
            checkpoint.display()
        )));
    }
    for spec in sets {
        crate::config::apply_set(&mut doc, spec)?;
    }
    let cfg: EngineConfig = serde_json::from_value(doc)
        .map_err(|e| CliError::Input(format!("embedded config: {e}")))?;
    cfg.validate()?;

    let (manifest, _) = resolve_manifest(&cfg)?;
    let ds = load_split(&manifest, split, &cfg.dsp, cfg.data.cache_dir.as_deref())?;

    let mut model = HRNetModel::build(&cfg.model, &mut Rng::new(ckpt.seed, STREAM_INIT))?;
    model.load_params(&ckpt.params)?;
    let report = evaluate(&model, &ds, cfg.data.n_frames_target, cfg.train.batch_size)?;

    let schema = cfg.schema()?;
    println!("unweighted_accuracy {}", report.unweighted_accuracy);
    println!("overall_accuracy {}", report.overall_accuracy);
    println!("confusion matrix (rows: true, cols: predicted):");
    let width = schema
        .labels
        .iter()
        .map(|l| l.len())
        .max()
        .unwrap_or(8)
        .max(6);
    print!("{:>width$} ", "");
    for label in &schema.labels {
        print!("{label:>width$} ");
    }
    println!();
    for (c, row) in report.confusion.iter().enumerate() {
        print!("{:>width$} ", schema.labels[c]);
        for &n in row {
            print!("{n:>width$} ");
        }
        match report.per_class_recall[c] {
            Some(r) => println!("  recall {r}"),
            None => println!("  recall n/a"),
        }
    }

    if let Some(out) = out {
        ensure_dir(out)?;
        let output = EvalOutput {
            config: cfg.to_value(),
            split: split.to_string(),
            report: report.clone(),
        };
        write_text(
            &out.join("eval-report.json"),
            &serde_json::to_string_pretty(&output).expect("report serializable"),
        )?;
    }
    Ok(report)
}

/// Run the gradient-check suite; a failing check is a `Check` error so the
/// process exits with code 1.
pub fn cmd_gradcheck(cfg: &EngineConfig, seed: u64, corrupt: bool) -> Result<(), CliError> {
    let report = run_gradcheck(&cfg.model, seed, corrupt)?;
    println!("parameter manifest ({} tensors):", report.manifest.len());
    for (name, shape) in &report.manifest {
        println!("  {name} {shape:?}");
    }
    let total: usize = report
        .manifest
        .iter()
        .map(|(_, s)| s.iter().product::<usize>())
        .sum();
    println!("total parameters: {total}");
    for c in &report.checks {
        println!(
            "check {:<20} max_rel_err {:>12.5e}  tol {:>7.0e}  {}{}",
            c.name,
            c.max_rel_err,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" },
            c.detail
                .as_ref()
                .map(|d| format!("  ({d})"))
                .unwrap_or_default()
        );
    }
    if !report.covers_all_ops() {
        return Err(CliError::Check(
            "gradcheck does not cover every registered op".into(),
        ));
    }
    if !report.all_pass() {
        return Err(CliError::Check("gradient checks failed".into()));
    }
    println!("all gradient checks passed");
    Ok(())
}

/// Convenience for tests: the path of a cache file for a source id.
pub fn cache_path(out: &Path, source_id: &str) -> PathBuf {
    out.join(mel_cache_file_name(source_id))
}

/// Convenience for tests: compute one spectrogram exactly as `preprocess`
/// does.
pub fn reference_mel(cfg: &EngineConfig, path: &Path, source_id: &str) -> Result<MelSpectrogram<f64>, CliError> {
    let wave = dsp::load_wav(path)?;
    Ok(dsp::mel_spectrogram(&wave, &cfg.dsp, source_id)?)
}

/// Convenience for tests: recompute a row's training-time mel (cache-aware).
pub fn row_mel(
    cfg: &EngineConfig,
    row: &emohrnet_core::data::ManifestRow,
) -> Result<MelSpectrogram<f64>, CliError> {
    Ok(load_row_mel(row, &cfg.dsp, cfg.data.cache_dir.as_deref())?)
}
