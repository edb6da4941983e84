//! Corpus ingestion: label schemas, manifests, deterministic splits, and
//! batch assembly.

pub mod labels;
pub mod manifest;

use std::path::Path;

use crate::dsp::{self, DspConfig, MelSpectrogram};
use crate::error::{Error, Result};
use crate::rng::{shuffle_stream, Rng};
use crate::Tensor;
pub use labels::{parse_emovo_filename, parse_ravdess_filename, LabelSchema};
pub use manifest::{build_manifest, BuildReport, Manifest, ManifestRow, Split, SplitPolicy};

/// One loaded sample: its normalized spectrogram and class.
#[derive(Clone, Debug)]
pub struct DataSample {
    pub mel: MelSpectrogram<f64>,
    pub class_id: usize,
    pub id: String,
}

/// In-memory dataset; samples keep manifest order so epoch shuffles are the
/// only source of ordering randomness.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub samples: Vec<DataSample>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A model-ready minibatch.
#[derive(Clone, Debug)]
pub struct Batch {
    /// [n, 1, n_mels, n_frames_target]
    pub input: Tensor,
    /// One-hot [n, n_classes].
    pub labels: Tensor,
    pub ids: Vec<String>,
    /// Dataset indices the batch rows came from.
    pub indices: Vec<usize>,
}

/// Load every row of one split, via the cache when available, else through
/// the full audio front end. An unreadable file is an error naming the path,
/// never a silent skip.
pub fn load_split(
    manifest: &Manifest,
    split: Split,
    dsp_cfg: &DspConfig,
    cache_dir: Option<&Path>,
) -> Result<Dataset> {
    let mut samples = Vec::new();
    for row in manifest.rows_for(split) {
        let mel = load_row_mel(row, dsp_cfg, cache_dir)?;
        samples.push(DataSample {
            mel,
            class_id: row.class_id,
            id: row.source_id.clone(),
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset(format!("split {split} has no rows")));
    }
    Ok(Dataset {
        samples,
        n_classes: manifest.schema.n_classes(),
    })
}

/// Spectrogram for one manifest row: cached file if present, else computed.
pub fn load_row_mel(
    row: &ManifestRow,
    dsp_cfg: &DspConfig,
    cache_dir: Option<&Path>,
) -> Result<MelSpectrogram<f64>> {
    if let Some(dir) = cache_dir {
        let cached = dir.join(crate::persist::mel_cache_file_name(&row.source_id));
        if cached.exists() {
            return crate::persist::load_mel_cache(&cached, dsp_cfg);
        }
    }
    let wave = dsp::load_wav(&row.path)?;
    dsp::mel_spectrogram(&wave, dsp_cfg, &row.source_id)
}

/// The sample visitation order for one epoch: a seeded permutation, or
/// dataset order when `shuffle` is off.
pub fn epoch_order(n: usize, seed: u64, epoch: usize, shuffle: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        let mut rng = Rng::new(seed, shuffle_stream(epoch));
        rng.shuffle(&mut order);
    }
    order
}

/// Assemble one batch from already-augmented spectrograms.
pub fn assemble_batch(
    mels: &[MelSpectrogram<f64>],
    classes: &[usize],
    ids: Vec<String>,
    indices: Vec<usize>,
    n_classes: usize,
    target_frames: usize,
) -> Result<Batch> {
    let n = mels.len();
    if n == 0 {
        return Err(Error::EmptyDataset("empty batch".into()));
    }
    let n_mels = mels[0].n_mels();
    let mut input = vec![0.0f64; n * n_mels * target_frames];
    for (i, mel) in mels.iter().enumerate() {
        let fitted = dsp::fit_frames(mel, target_frames);
        if fitted.n_mels() != n_mels {
            return Err(Error::ShapeMismatch {
                op: "assemble_batch",
                lhs: vec![n_mels],
                rhs: vec![fitted.n_mels()],
            });
        }
        input[i * n_mels * target_frames..(i + 1) * n_mels * target_frames]
            .copy_from_slice(fitted.values.data());
    }
    let mut labels = vec![0.0f64; n * n_classes];
    for (i, &class) in classes.iter().enumerate() {
        if class >= n_classes {
            return Err(Error::InvalidData(format!(
                "class id {class} out of range ({n_classes} classes)"
            )));
        }
        labels[i * n_classes + class] = 1.0;
    }
    Ok(Batch {
        input: Tensor::new(vec![n, 1, n_mels, target_frames], input)?,
        labels: Tensor::new(vec![n, n_classes], labels)?,
        ids,
        indices,
    })
}

/// Deterministic batches over one manifest split, loading samples through
/// the audio front end. Order is fully determined by (seed, epoch).
#[allow(clippy::too_many_arguments)]
pub fn batch_iter(
    manifest: &Manifest,
    split: Split,
    dsp_cfg: &DspConfig,
    target_frames: usize,
    batch_size: usize,
    seed: u64,
    epoch: usize,
    shuffle: bool,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    let ds = load_split(manifest, split, dsp_cfg, None)?;
    let order = epoch_order(ds.len(), seed, epoch, shuffle);
    let mut batches = Vec::new();
    for chunk in order.chunks(batch_size) {
        let mels: Vec<MelSpectrogram<f64>> =
            chunk.iter().map(|&i| ds.samples[i].mel.clone()).collect();
        let classes: Vec<usize> = chunk.iter().map(|&i| ds.samples[i].class_id).collect();
        let ids: Vec<String> = chunk.iter().map(|&i| ds.samples[i].id.clone()).collect();
        batches.push(assemble_batch(
            &mels,
            &classes,
            ids,
            chunk.to_vec(),
            ds.n_classes,
            target_frames,
        )?);
    }
    Ok(batches)
}
