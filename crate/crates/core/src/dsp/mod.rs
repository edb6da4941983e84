//! Audio front end: WAV ingestion, STFT power, mel projection, and
//! per-utterance normalization.

pub mod mel;
pub mod stft;
pub mod wav;

use rustfft::FftNum;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
pub use mel::{filter_edges_hz, hz_to_mel, mel_filterbank, mel_to_hz};
pub use stft::{frame_count, hann_window, stft_power};
pub use wav::{load_wav, Waveform};

/// Spectrogram extraction parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DspConfig {
    pub sample_rate: u32,
    /// Analysis window length in samples.
    pub n_fft: usize,
    /// Hop between windows in samples.
    pub hop: usize,
    /// Mel filter count.
    pub n_mels: usize,
    /// Lowest filterbank frequency, Hz.
    pub fmin: f64,
    /// Highest filterbank frequency, Hz.
    pub fmax: f64,
    /// Additive floor applied to mel power before the log.
    pub log_floor: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        DspConfig {
            sample_rate: 16000,
            n_fft: 512,
            hop: 160,
            n_mels: 64,
            fmin: 0.0,
            fmax: 8000.0,
            log_floor: 1e-10,
        }
    }
}

impl DspConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("dsp.sample_rate must be positive".into()));
        }
        if self.n_fft < 2 {
            return Err(Error::InvalidConfig("dsp.n_fft must be at least 2".into()));
        }
        if self.hop == 0 || self.hop > self.n_fft {
            return Err(Error::InvalidConfig(
                "dsp.hop must satisfy 0 < hop <= n_fft".into(),
            ));
        }
        if self.n_mels < 1 {
            return Err(Error::InvalidConfig("dsp.n_mels must be at least 1".into()));
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax) {
            return Err(Error::InvalidConfig(
                "dsp frequencies must satisfy 0 <= fmin < fmax".into(),
            ));
        }
        if self.fmax > self.sample_rate as f64 / 2.0 {
            return Err(Error::InvalidConfig(
                "dsp.fmax must not exceed the Nyquist frequency".into(),
            ));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::InvalidConfig("dsp.log_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Normalized log-mel feature matrix [n_mels, n_frames] plus provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram<F: Scalar> {
    pub values: Tensor<F>,
    pub config: DspConfig,
    pub source_id: String,
}

impl<F: Scalar> MelSpectrogram<F> {
    pub fn n_mels(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn n_frames(&self) -> usize {
        self.values.shape()[1]
    }
}

/// Full front end: STFT power -> mel projection -> log -> per-utterance
/// z-score (population std).
///
/// A constant log-mel matrix (e.g. silence) has zero spread and normalizes
/// to all zeros by convention.
pub fn mel_spectrogram<F: Scalar + FftNum>(
    wave: &Waveform,
    cfg: &DspConfig,
    source_id: &str,
) -> Result<MelSpectrogram<F>> {
    let power = stft_power::<F>(wave, cfg)?;
    let fb = mel_filterbank::<F>(cfg)?;
    let n_bins = power.shape()[0];
    let n_frames = power.shape()[1];
    let floor = F::from(cfg.log_floor).unwrap();

    let mut values = vec![F::zero(); cfg.n_mels * n_frames];
    for m in 0..cfg.n_mels {
        let fr = &fb.data()[m * n_bins..(m + 1) * n_bins];
        for t in 0..n_frames {
            let mut acc = F::zero();
            for (bin, &w) in fr.iter().enumerate() {
                if w != F::zero() {
                    acc += w * power.data()[bin * n_frames + t];
                }
            }
            values[m * n_frames + t] = (acc + floor).ln();
        }
    }
    normalize_in_place(&mut values);
    Ok(MelSpectrogram {
        values: Tensor::new(vec![cfg.n_mels, n_frames], values)?,
        config: cfg.clone(),
        source_id: source_id.to_string(),
    })
}

/// Z-score with population standard deviation; bitwise-constant input maps
/// to all zeros.
fn normalize_in_place<F: Scalar>(values: &mut [F]) {
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        for v in values.iter_mut() {
            *v = F::zero();
        }
        return;
    }
    let n = F::from(values.len()).unwrap();
    let mut sum = F::zero();
    for &v in values.iter() {
        sum += v;
    }
    let mean = sum / n;
    let mut var = F::zero();
    for &v in values.iter() {
        let d = v - mean;
        var += d * d;
    }
    let std = (var / n).sqrt();
    let inv = F::one() / std;
    for v in values.iter_mut() {
        *v = (*v - mean) * inv;
    }
}

/// Right-pad with zeros or center-crop along the frame axis to `target`
/// frames. Zero is the post-normalization mean, so padding is neutral.
pub fn fit_frames<F: Scalar>(mel: &MelSpectrogram<F>, target: usize) -> MelSpectrogram<F> {
    let (n_mels, n_frames) = (mel.n_mels(), mel.n_frames());
    if n_frames == target {
        return mel.clone();
    }
    let mut out = vec![F::zero(); n_mels * target];
    if n_frames < target {
        for m in 0..n_mels {
            out[m * target..m * target + n_frames]
                .copy_from_slice(&mel.values.data()[m * n_frames..(m + 1) * n_frames]);
        }
    } else {
        let start = (n_frames - target) / 2;
        for m in 0..n_mels {
            let src = m * n_frames + start;
            out[m * target..(m + 1) * target]
                .copy_from_slice(&mel.values.data()[src..src + target]);
        }
    }
    MelSpectrogram {
        values: Tensor::new(vec![n_mels, target], out).expect("shape consistent"),
        config: mel.config.clone(),
        source_id: mel.source_id.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_normalizes_to_all_zeros() {
        let wave = Waveform::new(vec![0.0; 4000], 16000).unwrap();
        let cfg = DspConfig {
            n_fft: 256,
            hop: 128,
            n_mels: 24,
            ..DspConfig::default()
        };
        let mel = mel_spectrogram::<f64>(&wave, &cfg, "silence").unwrap();
        assert!(mel.values.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_normalizes_to_zero_mean_unit_std() {
        let mut rng = crate::rng::Rng::new(11, 0);
        let samples: Vec<f64> = (0..8000).map(|_| rng.standard_normal() * 0.1).collect();
        let wave = Waveform::new(samples, 16000).unwrap();
        let cfg = DspConfig {
            n_fft: 256,
            hop: 128,
            n_mels: 24,
            ..DspConfig::default()
        };
        let mel = mel_spectrogram::<f64>(&wave, &cfg, "noise").unwrap();
        let n = mel.values.numel() as f64;
        let mean: f64 = mel.values.data().iter().sum::<f64>() / n;
        let var: f64 = mel.values.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-9, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 1e-9, "std {}", var.sqrt());
    }

    #[test]
    fn fit_frames_pads_right_and_center_crops() {
        let cfg = DspConfig::default();
        let mel = MelSpectrogram {
            values: Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
            config: cfg,
            source_id: "t".into(),
        };
        let padded = fit_frames(&mel, 5);
        assert_eq!(padded.values.data(), &[1.0, 2.0, 3.0, 0.0, 0.0, 4.0, 5.0, 6.0, 0.0, 0.0]);
        let cropped = fit_frames(&mel, 1);
        assert_eq!(cropped.values.data(), &[2.0, 5.0]);
        let same = fit_frames(&mel, 3);
        assert_eq!(same.values.data(), mel.values.data());
    }
}
