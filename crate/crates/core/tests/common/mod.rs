//! Independent oracles and fixtures shared by the integration suites.
//!
//! Everything here recomputes expected values through a route separate from
//! the implementation under test: direct-summation loops, a naive DFT, a
//! straight-line optimizer recurrence, hand tallies.

#![allow(dead_code)]

use emohrnet_core::data::Dataset;
use emohrnet_core::dsp::DspConfig;
use emohrnet_core::model::HRNetConfig;
use emohrnet_core::rng::Rng;
use emohrnet_core::Tensor;

/// |a - b| / max(|a|, |b|, floor)
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Six-nested-loop direct-summation cross-correlation with zero padding.
pub fn conv2d_reference(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Tensor {
    let (n, c_in, h, w) = (
        x.shape()[0],
        x.shape()[1],
        x.shape()[2],
        x.shape()[3],
    );
    let (c_out, _, kh, kw) = (
        kernel.shape()[0],
        kernel.shape()[1],
        kernel.shape()[2],
        kernel.shape()[3],
    );
    let h_out = (h + 2 * padding - kh) / stride + 1;
    let w_out = (w + 2 * padding - kw) / stride + 1;
    let mut out = vec![0.0f64; n * c_out * h_out * w_out];
    for ni in 0..n {
        for co in 0..c_out {
            for ho in 0..h_out {
                for wo in 0..w_out {
                    let mut acc = bias.data()[co];
                    for ci in 0..c_in {
                        for ki in 0..kh {
                            for kj in 0..kw {
                                let hi = (ho * stride + ki) as isize - padding as isize;
                                let wi = (wo * stride + kj) as isize - padding as isize;
                                if hi >= 0 && (hi as usize) < h && wi >= 0 && (wi as usize) < w {
                                    acc += x.at4(ni, ci, hi as usize, wi as usize)
                                        * kernel.at4(co, ci, ki, kj);
                                }
                            }
                        }
                    }
                    out[((ni * c_out + co) * h_out + ho) * w_out + wo] = acc;
                }
            }
        }
    }
    emohrnet_core::tensor::Tensor::new(vec![n, c_out, h_out, w_out], out).unwrap()
}

/// Naive O(n^2) DFT power spectrum of one already-windowed frame.
pub fn dft_power_reference(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    let n_bins = n / 2 + 1;
    let mut out = Vec::with_capacity(n_bins);
    for k in 0..n_bins {
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        for (i, &x) in frame.iter().enumerate() {
            let angle = -std::f64::consts::TAU * (k * i) as f64 / n as f64;
            re += x * angle.cos();
            im += x * angle.sin();
        }
        out.push(re * re + im * im);
    }
    out
}

/// Full STFT power oracle: Hann window (recomputed here), exact hopping, a
/// naive DFT per frame; shape [n_bins, n_frames].
pub fn stft_power_reference(samples: &[f64], n_fft: usize, hop: usize) -> Vec<Vec<f64>> {
    let n_frames = (samples.len() - n_fft) / hop + 1;
    let window: Vec<f64> = (0..n_fft)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n_fft as f64).cos())
        .collect();
    let n_bins = n_fft / 2 + 1;
    let mut out = vec![vec![0.0f64; n_frames]; n_bins];
    for t in 0..n_frames {
        let frame: Vec<f64> = (0..n_fft)
            .map(|i| samples[t * hop + i] * window[i])
            .collect();
        let power = dft_power_reference(&frame);
        for (bin, &p) in power.iter().enumerate() {
            out[bin][t] = p;
        }
    }
    out
}

/// Mel grid oracle built on half-steps: with delta = (mel(fmax) - mel(fmin))
/// / (2 (n_mels + 1)), filter m spans mel offsets [2m, 2m+4] with its
/// center at 2m + 2.
pub struct MelGridOracle {
    pub half_step: f64,
    pub mel_lo: f64,
}

impl MelGridOracle {
    pub fn new(cfg: &DspConfig) -> Self {
        let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
        let lo = mel(cfg.fmin);
        let hi = mel(cfg.fmax);
        MelGridOracle {
            half_step: (hi - lo) / (2.0 * (cfg.n_mels + 1) as f64),
            mel_lo: lo,
        }
    }

    fn to_hz(&self, mel: f64) -> f64 {
        700.0 * (10f64.powf(mel / 2595.0) - 1.0)
    }

    pub fn center_hz(&self, m: usize) -> f64 {
        self.to_hz(self.mel_lo + (2 * m + 2) as f64 * self.half_step)
    }

    pub fn band_hz(&self, m: usize) -> (f64, f64) {
        (
            self.to_hz(self.mel_lo + (2 * m) as f64 * self.half_step),
            self.to_hz(self.mel_lo + (2 * m + 4) as f64 * self.half_step),
        )
    }
}

/// Straight-line recomputation of the optimizer recurrences on one
/// coordinate sequence; returns the parameter trajectory.
#[allow(clippy::too_many_arguments)]
pub fn adam_reference(
    w0: f64,
    grads: &[f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
) -> Vec<f64> {
    let mut w = w0;
    let mut m = 0.0;
    let mut v = 0.0;
    let mut out = Vec::with_capacity(grads.len());
    for (i, &grad) in grads.iter().enumerate() {
        let t = (i + 1) as i32;
        let g = grad + weight_decay * w;
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        let m_hat = m / (1.0 - beta1.powi(t));
        let v_hat = v / (1.0 - beta2.powi(t));
        w -= lr * m_hat / (v_hat.sqrt() + eps);
        out.push(w);
    }
    out
}

/// Brute-force tally: per-sample argmax (lowest index wins ties) against
/// truth, macro recall over present classes, plain accuracy.
pub fn tally_reference(probs: &[Vec<f64>], truths: &[usize], k: usize) -> (f64, f64, Vec<Vec<u64>>) {
    let mut confusion = vec![vec![0u64; k]; k];
    for (p, &t) in probs.iter().zip(truths) {
        let mut pred = 0;
        for c in 1..k {
            if p[c] > p[pred] {
                pred = c;
            }
        }
        confusion[t][pred] += 1;
    }
    let mut recalls = Vec::new();
    let mut correct = 0u64;
    for c in 0..k {
        let row: u64 = confusion[c].iter().sum();
        correct += confusion[c][c];
        if row > 0 {
            recalls.push(confusion[c][c] as f64 / row as f64);
        }
    }
    let uar = recalls.iter().sum::<f64>() / recalls.len() as f64;
    let overall = correct as f64 / truths.len() as f64;
    (uar, overall, confusion)
}

/// Random tensor from a dedicated stream.
pub fn randn(shape: Vec<usize>, std: f64, seed: u64, stream: u64) -> Tensor {
    let mut rng = Rng::new(seed, stream);
    emohrnet_core::tensor::Tensor::randn(shape, std, &mut rng)
}

/// A tiny in-memory two-class dataset with class-distinct mel bands,
/// z-scored per sample like the real front end.
pub fn band_dataset(n_per_class: usize, n_mels: usize, n_frames: usize, seed: u64) -> Dataset {
    use emohrnet_core::data::DataSample;
    use emohrnet_core::dsp::MelSpectrogram;
    let mut samples = Vec::new();
    for class in 0..2usize {
        for idx in 0..n_per_class {
            let mut rng = Rng::new(seed, (class * n_per_class + idx) as u64);
            let mut values = vec![0.0f64; n_mels * n_frames];
            for v in values.iter_mut() {
                *v = 0.2 * rng.standard_normal();
            }
            let band = if class == 0 {
                0..n_mels / 3
            } else {
                2 * n_mels / 3..n_mels
            };
            for m in band {
                for t in 0..n_frames {
                    values[m * n_frames + t] += 2.0;
                }
            }
            // z-score like the front end
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            for v in values.iter_mut() {
                *v = (*v - mean) / std;
            }
            samples.push(DataSample {
                mel: MelSpectrogram {
                    values: emohrnet_core::tensor::Tensor::new(
                        vec![n_mels, n_frames],
                        values,
                    )
                    .unwrap(),
                    config: DspConfig::default(),
                    source_id: format!("band-{class}-{idx}"),
                },
                class_id: class,
                id: format!("band-{class}-{idx}"),
            });
        }
    }
    Dataset {
        samples,
        n_classes: 2,
    }
}

/// The small architecture used by training-level tests.
pub fn micro_model_config(n_mels: usize, n_frames: usize, n_classes: usize) -> HRNetConfig {
    HRNetConfig {
        in_frames: n_frames,
        in_mels: n_mels,
        stem_channels: 8,
        n_stages: 2,
        branch_channels: vec![8, 16],
        blocks_per_branch: 1,
        n_classes,
        fuse_channels: 16,
    }
}
