//! Forward and backward numeric kernels behind the graph ops.
//!
//! All loops use a fixed iteration order so repeated runs produce
//! bit-identical results.

use crate::scalar::Scalar;

/// Resolved convolution geometry shared by forward and backward.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvDims {
    pub n: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
    pub h_out: usize,
    pub w_out: usize,
}

/// Copy one sample's planes into a zero-padded buffer of hp x wp per channel.
fn pad_sample<F: Scalar>(x: &[F], d: &ConvDims, xpad: &mut [F]) {
    let (hp, wp) = (d.h + 2 * d.padding, d.w + 2 * d.padding);
    for v in xpad.iter_mut() {
        *v = F::zero();
    }
    for ci in 0..d.c_in {
        for h in 0..d.h {
            let src = (ci * d.h + h) * d.w;
            let dst = ci * hp * wp + (h + d.padding) * wp + d.padding;
            xpad[dst..dst + d.w].copy_from_slice(&x[src..src + d.w]);
        }
    }
}

/// Direct cross-correlation with zero padding.
pub(crate) fn conv2d_forward<F: Scalar>(x: &[F], k: &[F], bias: &[F], d: &ConvDims) -> Vec<F> {
    let (hp, wp) = (d.h + 2 * d.padding, d.w + 2 * d.padding);
    let plane_out = d.h_out * d.w_out;
    let mut out = vec![F::zero(); d.n * d.c_out * plane_out];
    let mut xpad = vec![F::zero(); d.c_in * hp * wp];
    for n in 0..d.n {
        pad_sample(&x[n * d.c_in * d.h * d.w..(n + 1) * d.c_in * d.h * d.w], d, &mut xpad);
        for co in 0..d.c_out {
            let out_base = (n * d.c_out + co) * plane_out;
            out[out_base..out_base + plane_out].fill(bias[co]);
            for ci in 0..d.c_in {
                for kh in 0..d.kh {
                    for kw in 0..d.kw {
                        let wgt = k[((co * d.c_in + ci) * d.kh + kh) * d.kw + kw];
                        for ho in 0..d.h_out {
                            let in_base = ci * hp * wp + (ho * d.stride + kh) * wp + kw;
                            let orow = out_base + ho * d.w_out;
                            if d.stride == 1 {
                                let xrow = &xpad[in_base..in_base + d.w_out];
                                let out_row = &mut out[orow..orow + d.w_out];
                                for (o, &xv) in out_row.iter_mut().zip(xrow) {
                                    *o = *o + wgt * xv;
                                }
                            } else {
                                for wo in 0..d.w_out {
                                    out[orow + wo] =
                                        out[orow + wo] + wgt * xpad[in_base + wo * d.stride];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients w.r.t. input, kernel, and bias of [`conv2d_forward`].
pub(crate) fn conv2d_backward<F: Scalar>(
    x: &[F],
    k: &[F],
    d: &ConvDims,
    gout: &[F],
) -> (Vec<F>, Vec<F>, Vec<F>) {
    let (hp, wp) = (d.h + 2 * d.padding, d.w + 2 * d.padding);
    let plane_out = d.h_out * d.w_out;
    let mut dx = vec![F::zero(); d.n * d.c_in * d.h * d.w];
    let mut dk = vec![F::zero(); k.len()];
    let mut db = vec![F::zero(); d.c_out];
    let mut xpad = vec![F::zero(); d.c_in * hp * wp];
    let mut dxpad = vec![F::zero(); d.c_in * hp * wp];
    for n in 0..d.n {
        pad_sample(&x[n * d.c_in * d.h * d.w..(n + 1) * d.c_in * d.h * d.w], d, &mut xpad);
        dxpad.fill(F::zero());
        for co in 0..d.c_out {
            let gbase = (n * d.c_out + co) * plane_out;
            let mut bias_acc = F::zero();
            for &g in &gout[gbase..gbase + plane_out] {
                bias_acc += g;
            }
            db[co] += bias_acc;
            for ci in 0..d.c_in {
                for kh in 0..d.kh {
                    for kw in 0..d.kw {
                        let kidx = ((co * d.c_in + ci) * d.kh + kh) * d.kw + kw;
                        let wgt = k[kidx];
                        let mut acc = F::zero();
                        for ho in 0..d.h_out {
                            let in_base = ci * hp * wp + (ho * d.stride + kh) * wp + kw;
                            let grow = gbase + ho * d.w_out;
                            if d.stride == 1 {
                                let xrow = &xpad[in_base..in_base + d.w_out];
                                let dxrow = &mut dxpad[in_base..in_base + d.w_out];
                                let grow = &gout[grow..grow + d.w_out];
                                for i in 0..d.w_out {
                                    acc += grow[i] * xrow[i];
                                    dxrow[i] += wgt * grow[i];
                                }
                            } else {
                                for wo in 0..d.w_out {
                                    let g = gout[grow + wo];
                                    acc += g * xpad[in_base + wo * d.stride];
                                    dxpad[in_base + wo * d.stride] += wgt * g;
                                }
                            }
                        }
                        dk[kidx] += acc;
                    }
                }
            }
        }
        // crop the padding back off
        for ci in 0..d.c_in {
            for h in 0..d.h {
                let src = ci * hp * wp + (h + d.padding) * wp + d.padding;
                let dst = (n * d.c_in + ci) * d.h * d.w + h * d.w;
                for w in 0..d.w {
                    dx[dst + w] += dxpad[src + w];
                }
            }
        }
    }
    (dx, dk, db)
}

/// y = x * w^T + b with x: [n, c], w: [k, c], b: [k].
pub(crate) fn linear_forward<F: Scalar>(
    x: &[F],
    w: &[F],
    b: &[F],
    n: usize,
    c: usize,
    k: usize,
) -> Vec<F> {
    let mut out = vec![F::zero(); n * k];
    for i in 0..n {
        for j in 0..k {
            let mut acc = b[j];
            for p in 0..c {
                acc += x[i * c + p] * w[j * c + p];
            }
            out[i * k + j] = acc;
        }
    }
    out
}

pub(crate) fn linear_backward<F: Scalar>(
    x: &[F],
    w: &[F],
    gout: &[F],
    n: usize,
    c: usize,
    k: usize,
) -> (Vec<F>, Vec<F>, Vec<F>) {
    let mut dx = vec![F::zero(); n * c];
    let mut dw = vec![F::zero(); k * c];
    let mut db = vec![F::zero(); k];
    for i in 0..n {
        for j in 0..k {
            let g = gout[i * k + j];
            db[j] += g;
            for p in 0..c {
                dx[i * c + p] += g * w[j * c + p];
                dw[j * c + p] += g * x[i * c + p];
            }
        }
    }
    (dx, dw, db)
}

/// Per-channel spatial mean: [n, c, h, w] -> [n, c].
pub(crate) fn gap_forward<F: Scalar>(x: &[F], n: usize, c: usize, h: usize, w: usize) -> Vec<F> {
    let hw = h * w;
    let inv = F::one() / F::from(hw).unwrap();
    let mut out = vec![F::zero(); n * c];
    for i in 0..n * c {
        let mut acc = F::zero();
        for &v in &x[i * hw..(i + 1) * hw] {
            acc += v;
        }
        out[i] = acc * inv;
    }
    out
}

pub(crate) fn gap_backward<F: Scalar>(gout: &[F], n: usize, c: usize, h: usize, w: usize) -> Vec<F> {
    let hw = h * w;
    let inv = F::one() / F::from(hw).unwrap();
    let mut dx = vec![F::zero(); n * c * hw];
    for i in 0..n * c {
        let g = gout[i] * inv;
        for v in &mut dx[i * hw..(i + 1) * hw] {
            *v = g;
        }
    }
    dx
}

/// Nearest-neighbor upsampling: each cell replicated factor x factor times.
pub(crate) fn upsample_forward<F: Scalar>(
    x: &[F],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    factor: usize,
) -> Vec<F> {
    let (ho, wo) = (h * factor, w * factor);
    let mut out = vec![F::zero(); n * c * ho * wo];
    for p in 0..n * c {
        let src = p * h * w;
        let dst = p * ho * wo;
        for i in 0..ho {
            let srow = src + (i / factor) * w;
            let drow = dst + i * wo;
            for j in 0..wo {
                out[drow + j] = x[srow + j / factor];
            }
        }
    }
    out
}

pub(crate) fn upsample_backward<F: Scalar>(
    gout: &[F],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    factor: usize,
) -> Vec<F> {
    let (ho, wo) = (h * factor, w * factor);
    let mut dx = vec![F::zero(); n * c * h * w];
    for p in 0..n * c {
        let src = p * ho * wo;
        let dst = p * h * w;
        for i in 0..ho {
            let srow = src + i * wo;
            let drow = dst + (i / factor) * w;
            for j in 0..wo {
                dx[drow + j / factor] += gout[srow + j];
            }
        }
    }
    dx
}

/// Row-wise softmax with max-subtraction for stability.
pub(crate) fn softmax_forward<F: Scalar>(z: &[F], n: usize, k: usize) -> Vec<F> {
    let mut out = vec![F::zero(); n * k];
    for i in 0..n {
        let row = &z[i * k..(i + 1) * k];
        let mut m = row[0];
        for &v in &row[1..] {
            if v > m {
                m = v;
            }
        }
        let mut sum = F::zero();
        for j in 0..k {
            let e = (row[j] - m).exp();
            out[i * k + j] = e;
            sum += e;
        }
        let inv = F::one() / sum;
        for j in 0..k {
            out[i * k + j] = out[i * k + j] * inv;
        }
    }
    out
}

/// dz_i = y_i * (g_i - sum_j g_j * y_j), per row.
pub(crate) fn softmax_backward<F: Scalar>(y: &[F], gout: &[F], n: usize, k: usize) -> Vec<F> {
    let mut dz = vec![F::zero(); n * k];
    for i in 0..n {
        let mut dot = F::zero();
        for j in 0..k {
            dot += gout[i * k + j] * y[i * k + j];
        }
        for j in 0..k {
            dz[i * k + j] = y[i * k + j] * (gout[i * k + j] - dot);
        }
    }
    dz
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(
        n: usize,
        c_in: usize,
        h: usize,
        w: usize,
        c_out: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        padding: usize,
    ) -> ConvDims {
        ConvDims {
            n,
            c_in,
            h,
            w,
            c_out,
            kh,
            kw,
            stride,
            padding,
            h_out: (h + 2 * padding - kh) / stride + 1,
            w_out: (w + 2 * padding - kw) / stride + 1,
        }
    }

    #[test]
    fn all_ones_kernel_counts_taps() {
        // constant 1s, 3x3 all-ones kernel, padding 1: interior 9, corners 4
        let d = dims(1, 1, 5, 5, 1, 3, 3, 1, 1);
        let x = vec![1.0f64; 25];
        let k = vec![1.0f64; 9];
        let out = conv2d_forward(&x, &k, &[0.0], &d);
        assert_eq!(out[0], 4.0);
        assert_eq!(out[2 * 5 + 2], 9.0);
        assert_eq!(out[4 * 5 + 4], 4.0);
        assert_eq!(out[1], 6.0);
    }

    #[test]
    fn upsample_replicates_blocks() {
        let x = vec![1.0f64, 2.0, 3.0, 4.0];
        let out = upsample_forward(&x, 1, 1, 2, 2, 2);
        let expect = vec![
            1.0, 1.0, 2.0, 2.0, //
            1.0, 1.0, 2.0, 2.0, //
            3.0, 3.0, 4.0, 4.0, //
            3.0, 3.0, 4.0, 4.0,
        ];
        assert_eq!(out, expect);
    }

    #[test]
    fn upsample_backward_sums_blocks() {
        let g = vec![1.0f64; 16];
        let dx = upsample_backward(&g, 1, 1, 2, 2, 2);
        assert_eq!(dx, vec![4.0; 4]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let z = vec![0.3f64, -1.0, 2.0, 4.0, 4.0, 4.0];
        let y = softmax_forward(&z, 2, 3);
        for i in 0..2 {
            let s: f64 = y[i * 3..(i + 1) * 3].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        // equal logits -> uniform
        for j in 0..3 {
            assert!((y[3 + j] - 1.0 / 3.0).abs() < 1e-12);
        }
    }
}
