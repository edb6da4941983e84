//! RIFF/WAVE PCM-16 ingestion.

use std::path::Path;

use crate::error::{Error, Result};

/// Mono audio in [-1, 1] plus its native sample rate. No resampling is ever
/// performed; a rate mismatch surfaces as an error at spectrogram time.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidData("waveform has no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidData("sample rate must be positive".into()));
        }
        if !samples.iter().all(|s| s.is_finite()) {
            return Err(Error::InvalidData("waveform contains non-finite samples".into()));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Load a 16-bit PCM RIFF/WAVE file, averaging multi-channel audio to mono.
///
/// Samples are scaled by 1/32768 into [-1, 1). Float-encoded and non-16-bit
/// files are rejected with distinct errors.
pub fn load_wav(path: &Path) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::WavFormat {
            path: path.to_path_buf(),
            msg: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::WavEncoding {
            path: path.to_path_buf(),
        });
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::WavBitDepth {
            path: path.to_path_buf(),
            bits: spec.bits_per_sample,
        });
    }
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::WavFormat {
            path: path.to_path_buf(),
            msg: "zero channels".into(),
        });
    }

    let mut samples = Vec::new();
    let mut frame_acc = 0.0f64;
    let mut in_frame = 0usize;
    for s in reader.samples::<i16>() {
        let s = s.map_err(|e| Error::WavFormat {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        frame_acc += s as f64;
        in_frame += 1;
        if in_frame == channels {
            samples.push(frame_acc / channels as f64 / 32768.0);
            frame_acc = 0.0;
            in_frame = 0;
        }
    }
    if samples.is_empty() {
        return Err(Error::WavFormat {
            path: path.to_path_buf(),
            msg: "file contains no samples".into(),
        });
    }
    Waveform::new(samples, spec.sample_rate)
}
