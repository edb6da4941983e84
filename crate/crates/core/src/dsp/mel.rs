//! Triangular mel filterbanks.

use super::DspConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// HTK mel scale: 2595 * log10(1 + f/700).
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// The n_mels + 2 grid frequencies (Hz) bounding the triangles: filter m
/// rises from `edges[m]` to its center `edges[m+1]` and falls to `edges[m+2]`.
pub fn filter_edges_hz(cfg: &DspConfig) -> Vec<f64> {
    let lo = hz_to_mel(cfg.fmin);
    let hi = hz_to_mel(cfg.fmax);
    let step = (hi - lo) / (cfg.n_mels + 1) as f64;
    (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + step * i as f64))
        .collect()
}

/// Peak-1 triangular filters over FFT bins, shape [n_mels, n_fft/2 + 1].
///
/// Centers are uniformly spaced on the mel scale between fmin and fmax. A
/// filter so narrow that it covers no FFT bin is a configuration error and
/// is reported with its index.
pub fn mel_filterbank<F: Scalar>(cfg: &DspConfig) -> Result<Tensor<F>> {
    cfg.validate()?;
    let n_bins = cfg.n_fft / 2 + 1;
    let edges = filter_edges_hz(cfg);
    let bin_hz = cfg.sample_rate as f64 / cfg.n_fft as f64;
    let mut data = vec![F::zero(); cfg.n_mels * n_bins];
    for m in 0..cfg.n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut any_nonzero = false;
        for bin in 0..n_bins {
            let f = bin as f64 * bin_hz;
            let rising = (f - left) / (center - left);
            let falling = (right - f) / (right - center);
            let w = rising.min(falling).max(0.0);
            if w > 0.0 {
                data[m * n_bins + bin] = F::from(w).unwrap();
                any_nonzero = true;
            }
        }
        if !any_nonzero {
            return Err(Error::EmptyMelFilter { index: m });
        }
    }
    Tensor::new(vec![cfg.n_mels, n_bins], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_map_round_trips() {
        for f in [0.0, 100.0, 440.0, 4000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9 * (1.0 + f));
        }
    }

    #[test]
    fn filters_are_nonnegative_and_unimodal() {
        let cfg = DspConfig::default();
        let fb = mel_filterbank::<f64>(&cfg).unwrap();
        let n_bins = fb.shape()[1];
        for m in 0..cfg.n_mels {
            let row = &fb.data()[m * n_bins..(m + 1) * n_bins];
            assert!(row.iter().all(|&w| w >= 0.0));
            // unimodal: once it decreases after the peak it never rises again
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            for i in 1..=peak {
                assert!(row[i] >= row[i - 1] || row[i - 1] == 0.0);
            }
            for i in peak + 1..n_bins {
                assert!(row[i] <= row[i - 1] || row[i] == 0.0);
            }
        }
    }

    #[test]
    fn centers_are_strictly_increasing_in_hz() {
        let cfg = DspConfig::default();
        let edges = filter_edges_hz(&cfg);
        for pair in edges.windows(2) {
            assert!(pair[1] > pair[0]);
        }
    }

    #[test]
    fn too_many_filters_for_fft_resolution_names_the_filter() {
        let cfg = DspConfig {
            n_fft: 32,
            hop: 16,
            n_mels: 64,
            ..DspConfig::default()
        };
        match mel_filterbank::<f64>(&cfg) {
            Err(Error::EmptyMelFilter { index }) => assert_eq!(index, 0),
            other => panic!("expected EmptyMelFilter, got {other:?}"),
        }
    }
}
