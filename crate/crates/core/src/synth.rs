//! Synthetic band-tone corpora: tiny WAV datasets whose classes live in
//! distinct frequency bands. Used by the convergence fixture, smoke tests,
//! and examples; real corpora are ingested through `data` instead.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Generation parameters for one synthetic corpus.
#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub per_class: usize,
    pub sample_rate: u32,
    pub duration_samples: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_classes: 2,
            per_class: 8,
            sample_rate: 16000,
            duration_samples: 5600,
            seed: 0,
        }
    }
}

/// Tone frequency assigned to a class: classes are spread over 500..3500 Hz
/// so their mel signatures occupy distinct bands.
pub fn class_tone_hz(class: usize, n_classes: usize) -> f64 {
    if n_classes <= 1 {
        return 1000.0;
    }
    500.0 + 3000.0 * class as f64 / (n_classes - 1) as f64
}

/// Write `n_classes * per_class` WAV files named `synth-<class>-<index>.wav`
/// into `dir`. Each file is a class-band tone with per-sample frequency
/// jitter and additive noise. Fully determined by the spec.
pub fn write_synthetic_corpus(dir: &Path, spec: &SynthSpec) -> Result<Vec<PathBuf>> {
    if spec.n_classes < 2 || spec.per_class < 1 {
        return Err(Error::InvalidData(
            "synthetic corpus needs at least 2 classes and 1 sample per class".into(),
        ));
    }
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for class in 0..spec.n_classes {
        for idx in 0..spec.per_class {
            let stream = (class * spec.per_class + idx) as u64;
            let mut rng = Rng::new(spec.seed, stream);
            let base = class_tone_hz(class, spec.n_classes);
            let freq = base * (1.0 + 0.04 * rng.standard_normal());
            let phase = rng.standard_normal();
            let path = dir.join(format!("synth-{class}-{idx}.wav"));
            let wavspec = hound::WavSpec {
                channels: 1,
                sample_rate: spec.sample_rate,
                bits_per_sample: 16,
                sample_format: hound::SampleFormat::Int,
            };
            let mut writer = hound::WavWriter::create(&path, wavspec).map_err(|e| {
                Error::WavFormat {
                    path: path.clone(),
                    msg: e.to_string(),
                }
            })?;
            for n in 0..spec.duration_samples {
                let t = n as f64 / spec.sample_rate as f64;
                let tone = (std::f64::consts::TAU * freq * t + phase).sin();
                let noise = 0.02 * rng.standard_normal();
                let v = (0.5 * tone + noise).clamp(-1.0, 1.0);
                let s = (v * 32767.0).round() as i16;
                writer.write_sample(s).map_err(|e| Error::WavFormat {
                    path: path.clone(),
                    msg: e.to_string(),
                })?;
            }
            writer.finalize().map_err(|e| Error::WavFormat {
                path: path.clone(),
                msg: e.to_string(),
            })?;
            paths.push(path);
        }
    }
    Ok(paths)
}
