//! Training-time spectrogram augmentation: random time shift plus
//! frequency/time masking.
//!
//! Draw order is part of the contract so recorded draws can be replayed:
//! `augment` consumes the rng as shift (1 draw), then per frequency mask
//! (width, start), then per time mask (width, start). Width draws are
//! inclusive of both endpoints, and a zero-width mask still draws its start.

use serde::{Deserialize, Serialize};

use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Masking and shift bounds applied to training samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentPolicy {
    /// Largest frequency-mask width, in mel bins.
    pub freq_mask_max: usize,
    /// Largest time-mask width, in frames.
    pub time_mask_max: usize,
    pub n_freq_masks: usize,
    pub n_time_masks: usize,
    /// Largest absolute time shift, in frames.
    pub max_shift: usize,
    /// Fill value for masked cells; 0 is the post-normalization mean.
    pub mask_value: f64,
    pub enabled: bool,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            freq_mask_max: 12,
            time_mask_max: 30,
            n_freq_masks: 1,
            n_time_masks: 1,
            max_shift: 20,
            mask_value: 0.0,
            enabled: true,
        }
    }
}

impl AugmentPolicy {
    /// A policy that leaves every sample untouched.
    pub fn disabled() -> Self {
        AugmentPolicy {
            enabled: false,
            ..AugmentPolicy::default()
        }
    }
}

fn rebuild<F: Scalar>(mel: &MelSpectrogram<F>, values: Vec<F>) -> MelSpectrogram<F> {
    MelSpectrogram {
        values: Tensor::new(vec![mel.n_mels(), mel.n_frames()], values)
            .expect("shape preserved"),
        config: mel.config.clone(),
        source_id: mel.source_id.clone(),
    }
}

/// Shift all columns by a uniform draw from [-max_shift, +max_shift],
/// zero-filling the vacated side. Shape is preserved; no wraparound.
pub fn time_shift<F: Scalar>(
    mel: &MelSpectrogram<F>,
    max_shift: usize,
    rng: &mut Rng,
) -> Result<MelSpectrogram<F>> {
    let (n_mels, n_frames) = (mel.n_mels(), mel.n_frames());
    if max_shift >= n_frames {
        return Err(Error::ShiftTooLarge {
            max_shift,
            n_frames,
        });
    }
    let shift = rng.uniform_i64(-(max_shift as i64), max_shift as i64);
    let src = mel.values.data();
    let mut out = vec![F::zero(); src.len()];
    for m in 0..n_mels {
        for t in 0..n_frames {
            let from = t as i64 - shift;
            if from >= 0 && (from as usize) < n_frames {
                out[m * n_frames + t] = src[m * n_frames + from as usize];
            }
        }
    }
    Ok(rebuild(mel, out))
}

/// Mask a random band of mel bins: width ~ U{0..=max_width}, then start
/// ~ U{0..=n_mels-width}; rows [start, start+width) take `mask_value`.
pub fn freq_mask<F: Scalar>(
    mel: &MelSpectrogram<F>,
    max_width: usize,
    mask_value: F,
    rng: &mut Rng,
) -> Result<MelSpectrogram<F>> {
    let (n_mels, n_frames) = (mel.n_mels(), mel.n_frames());
    if max_width > n_mels {
        return Err(Error::FreqMaskTooWide {
            width: max_width,
            n_mels,
        });
    }
    let width = rng.uniform_usize(0, max_width);
    let start = rng.uniform_usize(0, n_mels - width);
    let mut out = mel.values.data().to_vec();
    for m in start..start + width {
        for v in &mut out[m * n_frames..(m + 1) * n_frames] {
            *v = mask_value;
        }
    }
    Ok(rebuild(mel, out))
}

/// Mask a random span of frames; symmetric to [`freq_mask`] along time.
pub fn time_mask<F: Scalar>(
    mel: &MelSpectrogram<F>,
    max_width: usize,
    mask_value: F,
    rng: &mut Rng,
) -> Result<MelSpectrogram<F>> {
    let (n_mels, n_frames) = (mel.n_mels(), mel.n_frames());
    if max_width > n_frames {
        return Err(Error::TimeMaskTooWide {
            width: max_width,
            n_frames,
        });
    }
    let width = rng.uniform_usize(0, max_width);
    let start = rng.uniform_usize(0, n_frames - width);
    let mut out = mel.values.data().to_vec();
    for m in 0..n_mels {
        for v in &mut out[m * n_frames + start..m * n_frames + start + width] {
            *v = mask_value;
        }
    }
    Ok(rebuild(mel, out))
}

/// Apply the full policy: shift, then the frequency masks, then the time
/// masks. A disabled policy returns the input bit-identically and consumes
/// no draws.
pub fn augment<F: Scalar>(
    mel: &MelSpectrogram<F>,
    policy: &AugmentPolicy,
    rng: &mut Rng,
) -> Result<MelSpectrogram<F>> {
    if !policy.enabled {
        return Ok(mel.clone());
    }
    let mask_value = F::from(policy.mask_value).unwrap();
    let mut out = time_shift(mel, policy.max_shift, rng)?;
    for _ in 0..policy.n_freq_masks {
        out = freq_mask(&out, policy.freq_mask_max, mask_value, rng)?;
    }
    for _ in 0..policy.n_time_masks {
        out = time_mask(&out, policy.time_mask_max, mask_value, rng)?;
    }
    Ok(out)
}
