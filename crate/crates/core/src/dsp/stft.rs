//! Short-time Fourier transform power spectra.

use rustfft::num_complex::Complex;
use rustfft::{FftNum, FftPlanner};

use super::wav::Waveform;
use super::DspConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Periodic Hann window: 0.5 - 0.5 cos(2 pi n / len).
pub fn hann_window<F: Scalar>(len: usize) -> Vec<F> {
    let half = F::from(0.5).unwrap();
    let step = std::f64::consts::TAU / len as f64;
    (0..len)
        .map(|n| half - half * F::from((n as f64 * step).cos()).unwrap())
        .collect()
}

/// Number of whole analysis windows: floor((len - n_fft)/hop) + 1.
pub fn frame_count(len: usize, n_fft: usize, hop: usize) -> Result<usize> {
    if len < n_fft {
        return Err(Error::SignalTooShort { len, n_fft });
    }
    Ok((len - n_fft) / hop + 1)
}

/// Hann-windowed power spectrogram of shape [n_fft/2 + 1, n_frames].
///
/// Frames are taken at the configured hop with no centering or reflection
/// padding, so the frame-count formula is exact. Each bin holds |DFT|^2.
pub fn stft_power<F: Scalar + FftNum>(wave: &Waveform, cfg: &DspConfig) -> Result<Tensor<F>> {
    cfg.validate()?;
    if wave.sample_rate != cfg.sample_rate {
        return Err(Error::SampleRateMismatch {
            wave: wave.sample_rate,
            cfg: cfg.sample_rate,
        });
    }
    let n_fft = cfg.n_fft;
    let n_frames = frame_count(wave.samples.len(), n_fft, cfg.hop)?;
    let n_bins = n_fft / 2 + 1;
    let window: Vec<F> = hann_window(n_fft);

    let mut planner = FftPlanner::<F>::new();
    let fft = planner.plan_fft_forward(n_fft);
    let mut buf: Vec<Complex<F>> = vec![Complex::new(F::zero(), F::zero()); n_fft];
    let mut scratch = vec![Complex::new(F::zero(), F::zero()); fft.get_inplace_scratch_len()];

    let mut out = vec![F::zero(); n_bins * n_frames];
    for t in 0..n_frames {
        let start = t * cfg.hop;
        for i in 0..n_fft {
            let s = F::from(wave.samples[start + i]).unwrap();
            buf[i] = Complex::new(s * window[i], F::zero());
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (bin, c) in buf.iter().take(n_bins).enumerate() {
            out[bin * n_frames + t] = c.re * c.re + c.im * c.im;
        }
    }
    Tensor::new(vec![n_bins, n_frames], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_fft: usize, hop: usize) -> DspConfig {
        DspConfig {
            sample_rate: 16000,
            n_fft,
            hop,
            ..DspConfig::default()
        }
    }

    #[test]
    fn frame_count_formula_is_exact() {
        assert_eq!(frame_count(512, 512, 160).unwrap(), 1);
        assert_eq!(frame_count(672, 512, 160).unwrap(), 2);
        assert_eq!(frame_count(671, 512, 160).unwrap(), 1);
        assert!(frame_count(511, 512, 160).is_err());
    }

    #[test]
    fn silence_gives_all_zero_power() {
        let wave = Waveform::new(vec![0.0; 2000], 16000).unwrap();
        let p = stft_power::<f64>(&wave, &cfg(256, 128)).unwrap();
        assert!(p.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sample_rate_mismatch_is_an_error() {
        let wave = Waveform::new(vec![0.0; 2000], 22050).unwrap();
        let err = stft_power::<f64>(&wave, &cfg(256, 128)).unwrap_err();
        assert!(matches!(err, Error::SampleRateMismatch { .. }));
    }

    #[test]
    fn bin_centered_sine_peaks_at_its_bin() {
        // frequency k * sr / n_fft lands exactly on bin k
        let sr = 16000u32;
        let n_fft = 256;
        let k = 20;
        let f = k as f64 * sr as f64 / n_fft as f64;
        let samples: Vec<f64> = (0..4096)
            .map(|i| (std::f64::consts::TAU * f * i as f64 / sr as f64).sin() * 0.5)
            .collect();
        let wave = Waveform::new(samples, sr).unwrap();
        let p = stft_power::<f64>(&wave, &cfg(n_fft, 128)).unwrap();
        let (n_bins, n_frames) = (p.shape()[0], p.shape()[1]);
        for t in 0..n_frames {
            let mut best = 0;
            for bin in 1..n_bins {
                if p.at2(bin, t) > p.at2(best, t) {
                    best = bin;
                }
            }
            assert_eq!(best, k, "frame {t}");
        }
    }
}
