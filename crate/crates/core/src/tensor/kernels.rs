//! Numeric kernels shared by the inference and training engines.
//!
//! All kernels are pure functions on `ndarray` arrays. Heavy convolutions
//! run as im2col + GEMM, split into fixed-size column chunks whose contents
//! do not depend on thread count, so parallel and serial execution produce
//! bit-identical results.

use ndarray::{Array1, Array2, Array4, ArrayD, ArrayView2, ArrayView4, Axis, Ix1, Ix2, Ix4};

use crate::disentangle::ConvSpec;
use crate::runtime;

use super::Scalar;

/// Fixed GEMM column-chunk width; a function of nothing but this constant,
/// so chunk boundaries (and thus accumulation order) never depend on the
/// machine.
const COL_CHUNK: usize = 4096;

pub(crate) fn run_tasks<I, R, F>(inputs: Vec<I>, f: F) -> Vec<R>
where
    I: Send,
    R: Send,
    F: Fn(I) -> R + Sync + Send,
{
    if runtime::deterministic() || inputs.len() <= 1 {
        inputs.into_iter().map(f).collect()
    } else {
        use rayon::prelude::*;
        inputs.into_par_iter().map(f).collect()
    }
}

/// Output spatial size of a convolution along one axis.
pub fn conv_out_len(input: usize, kernel: usize, stride: usize, dilation: usize, pad: usize) -> usize {
    let span = dilation * (kernel - 1) + 1;
    if input + 2 * pad < span {
        return 0;
    }
    (input + 2 * pad - span) / stride + 1
}

pub fn conv_out_shape(spec: &ConvSpec, h: usize, w: usize) -> (usize, usize) {
    (
        conv_out_len(h, spec.kernel.0, spec.stride.0, spec.dilation.0, spec.padding.0),
        conv_out_len(w, spec.kernel.1, spec.stride.1, spec.dilation.1, spec.padding.1),
    )
}

/// Materializes im2col columns `col_lo..col_hi` for one sample.
/// Column `j` holds the receptive field of output position
/// `(j / w_out, j % w_out)` flattened as `(c_in, ky, kx)`.
fn im2col_chunk<T: Scalar>(
    x: &ArrayView2<'_, T>, // [C_in, H*W] view of one sample, with (h, w) known
    h: usize,
    w: usize,
    spec: &ConvSpec,
    w_out: usize,
    col_lo: usize,
    col_hi: usize,
) -> Array2<T> {
    let c_in = spec.in_channels;
    let (kh, kw) = spec.kernel;
    let (sh, sw) = spec.stride;
    let (dh, dw) = spec.dilation;
    let (ph, pw) = spec.padding;
    let k = c_in * kh * kw;
    let mut cols = Array2::<T>::zeros((k, col_hi - col_lo));
    let xs = x.as_slice().expect("sample view must be contiguous");
    for (local, j) in (col_lo..col_hi).enumerate() {
        let oy = j / w_out;
        let ox = j % w_out;
        let base_y = (oy * sh) as isize - ph as isize;
        let base_x = (ox * sw) as isize - pw as isize;
        for ci in 0..c_in {
            let plane = ci * h * w;
            for ky in 0..kh {
                let iy = base_y + (ky * dh) as isize;
                let row_in_range = iy >= 0 && (iy as usize) < h;
                for kx in 0..kw {
                    let ix = base_x + (kx * dw) as isize;
                    if row_in_range && ix >= 0 && (ix as usize) < w {
                        let v = xs[plane + iy as usize * w + ix as usize];
                        cols[[ci * kh * kw + ky * kw + kx, local]] = v;
                    }
                }
            }
        }
    }
    cols
}

fn col_ranges(total: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut lo = 0;
    while lo < total {
        let hi = (lo + COL_CHUNK).min(total);
        out.push((lo, hi));
        lo = hi;
    }
    out
}

/// Convolution forward: `x` is `[N, C_in, H, W]`, `w` is
/// `[C_out, C_in, kh, kw]`, `b` is `[C_out]`.
pub fn conv2d_fwd<T: Scalar>(
    x: &ArrayD<T>,
    w: &ArrayD<T>,
    b: Option<&ArrayD<T>>,
    spec: &ConvSpec,
) -> ArrayD<T> {
    let x_any = x.view().into_dimensionality::<Ix4>().expect("conv input must be 4D");
    let x_std = x_any.as_standard_layout();
    let x4 = x_std.view();
    let (n, c_in, h, wid) = x4.dim();
    assert_eq!(c_in, spec.in_channels, "conv input channels");
    let (h_out, w_out) = conv_out_shape(spec, h, wid);
    assert!(h_out > 0 && w_out > 0, "conv output collapsed to zero size");
    let c_out = spec.out_channels;
    let k = spec.in_channels * spec.kernel.0 * spec.kernel.1;
    let w_mat = w
        .view()
        .into_shape_with_order((c_out, k))
        .expect("conv weight shape");

    let total = h_out * w_out;
    let mut tasks = Vec::new();
    for ni in 0..n {
        for (lo, hi) in col_ranges(total) {
            tasks.push((ni, lo, hi));
        }
    }
    let results = run_tasks(tasks, |(ni, lo, hi)| {
        let sample = x4.index_axis(Axis(0), ni);
        let flat = sample
            .into_shape_with_order((c_in, h * wid))
            .expect("sample reshape");
        let cols = im2col_chunk(&flat, h, wid, spec, w_out, lo, hi);
        let out = w_mat.dot(&cols);
        (ni, lo, out)
    });

    let mut out = Array4::<T>::zeros((n, c_out, h_out, w_out));
    {
        let out_slice = out.as_slice_mut().expect("output contiguous");
        for (ni, lo, chunk) in results {
            let chunk_cols = chunk.ncols();
            for co in 0..c_out {
                let dst_base = ni * c_out * total + co * total + lo;
                let src_row = chunk.row(co);
                let src = src_row.as_slice().expect("chunk row contiguous");
                out_slice[dst_base..dst_base + chunk_cols].copy_from_slice(src);
            }
        }
    }
    if let Some(b) = b {
        let b1 = b.view().into_dimensionality::<Ix1>().expect("bias 1D");
        for ni in 0..n {
            for co in 0..c_out {
                let bias = b1[co];
                out.index_axis_mut(Axis(0), ni)
                    .index_axis_mut(Axis(0), co)
                    .mapv_inplace(|v| v + bias);
            }
        }
    }
    out.into_dyn()
}

/// Convolution backward. Returns `(gx, gw, gb)`.
pub fn conv2d_bwd<T: Scalar>(
    x: &ArrayD<T>,
    w: &ArrayD<T>,
    spec: &ConvSpec,
    gout: &ArrayD<T>,
) -> (ArrayD<T>, ArrayD<T>, ArrayD<T>) {
    let x_any = x.view().into_dimensionality::<Ix4>().unwrap();
    let x_std = x_any.as_standard_layout();
    let x4 = x_std.view();
    let g_any = gout.view().into_dimensionality::<Ix4>().unwrap();
    let g_std = g_any.as_standard_layout();
    let g4 = g_std.view();
    let (n, c_in, h, wid) = x4.dim();
    let (_, c_out, h_out, w_out) = g4.dim();
    let k = c_in * spec.kernel.0 * spec.kernel.1;
    let total = h_out * w_out;
    let w_mat = w.view().into_shape_with_order((c_out, k)).unwrap();

    // bias gradient: plain ordered reduction
    let mut gb = Array1::<T>::zeros(c_out);
    for ni in 0..n {
        for co in 0..c_out {
            let mut acc = T::zero();
            for g in g4.index_axis(Axis(0), ni).index_axis(Axis(0), co).iter() {
                acc = acc + *g;
            }
            gb[co] = gb[co] + acc;
        }
    }

    let per_sample = run_tasks((0..n).collect::<Vec<_>>(), |ni| {
        let sample = x4.index_axis(Axis(0), ni);
        let flat = sample.into_shape_with_order((c_in, h * wid)).unwrap();
        let gmat = g4
            .index_axis(Axis(0), ni)
            .into_shape_with_order((c_out, total))
            .unwrap();
        let mut gw_n = Array2::<T>::zeros((c_out, k));
        let mut gx_n = vec![T::zero(); c_in * h * wid];
        for (lo, hi) in col_ranges(total) {
            let cols = im2col_chunk(&flat, h, wid, spec, w_out, lo, hi);
            let g_chunk = gmat.slice(ndarray::s![.., lo..hi]);
            // dW += g_chunk · colsᵀ
            gw_n = gw_n + g_chunk.dot(&cols.t());
            // dcols = wᵀ · g_chunk, scattered back (col2im)
            let dcols = w_mat.t().dot(&g_chunk);
            col2im_accumulate(&dcols.view(), h, wid, spec, w_out, lo, &mut gx_n);
        }
        (gw_n, gx_n)
    });

    let mut gw = Array2::<T>::zeros((c_out, k));
    let mut gx = Array4::<T>::zeros((n, c_in, h, wid));
    for (ni, (gw_n, gx_n)) in per_sample.into_iter().enumerate() {
        gw = gw + &gw_n;
        gx.index_axis_mut(Axis(0), ni)
            .as_slice_mut()
            .unwrap()
            .copy_from_slice(&gx_n);
    }
    (
        gx.into_dyn(),
        gw.into_shape_with_order((c_out, c_in, spec.kernel.0, spec.kernel.1))
            .unwrap()
            .into_dyn(),
        gb.into_dyn(),
    )
}

fn col2im_accumulate<T: Scalar>(
    dcols: &ArrayView2<'_, T>,
    h: usize,
    w: usize,
    spec: &ConvSpec,
    w_out: usize,
    col_lo: usize,
    gx: &mut [T],
) {
    let c_in = spec.in_channels;
    let (kh, kw) = spec.kernel;
    let (sh, sw) = spec.stride;
    let (dh, dw) = spec.dilation;
    let (ph, pw) = spec.padding;
    for (local, j) in (col_lo..col_lo + dcols.ncols()).enumerate() {
        let oy = j / w_out;
        let ox = j % w_out;
        let base_y = (oy * sh) as isize - ph as isize;
        let base_x = (ox * sw) as isize - pw as isize;
        for ci in 0..c_in {
            let plane = ci * h * w;
            for ky in 0..kh {
                let iy = base_y + (ky * dh) as isize;
                if iy < 0 || iy as usize >= h {
                    continue;
                }
                for kx in 0..kw {
                    let ix = base_x + (kx * dw) as isize;
                    if ix < 0 || ix as usize >= w {
                        continue;
                    }
                    let idx = plane + iy as usize * w + ix as usize;
                    gx[idx] = gx[idx] + dcols[[ci * kh * kw + ky * kw + kx, local]];
                }
            }
        }
    }
}

/// `[N, C·r², H, W] → [N, C, rH, rW]`; channel `c·r² + i·r + j` lands at
/// spatial offset `(i, j)` inside each upscaled cell.
pub fn pixel_shuffle2_fwd<T: Scalar>(x: &ArrayD<T>, r: usize) -> ArrayD<T> {
    let x4 = x.view().into_dimensionality::<Ix4>().unwrap();
    let (n, c_in, h, w) = x4.dim();
    assert_eq!(c_in % (r * r), 0, "pixel shuffle channel count");
    let c = c_in / (r * r);
    let mut out = Array4::<T>::zeros((n, c, h * r, w * r));
    for ni in 0..n {
        let sample = x4.index_axis(Axis(0), ni);
        for co in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let src = sample.index_axis(Axis(0), co * r * r + i * r + j);
                    for hh in 0..h {
                        for ww in 0..w {
                            out[[ni, co, hh * r + i, ww * r + j]] = src[[hh, ww]];
                        }
                    }
                }
            }
        }
    }
    out.into_dyn()
}

pub fn pixel_shuffle2_bwd<T: Scalar>(gout: &ArrayD<T>, r: usize) -> ArrayD<T> {
    let g4 = gout.view().into_dimensionality::<Ix4>().unwrap();
    let (n, c, hr, wr) = g4.dim();
    let (h, w) = (hr / r, wr / r);
    let mut gx = Array4::<T>::zeros((n, c * r * r, h, w));
    for ni in 0..n {
        for co in 0..c {
            for i in 0..r {
                for j in 0..r {
                    for hh in 0..h {
                        for ww in 0..w {
                            gx[[ni, co * r * r + i * r + j, hh, ww]] =
                                g4[[ni, co, hh * r + i, ww * r + j]];
                        }
                    }
                }
            }
        }
    }
    gx.into_dyn()
}

/// One-axis pixel shuffle along width: `[N, C·r, H, W] → [N, C, H, rW]`.
pub fn pixel_shuffle_w_fwd<T: Scalar>(x: &ArrayD<T>, r: usize) -> ArrayD<T> {
    let x4 = x.view().into_dimensionality::<Ix4>().unwrap();
    let (n, c_in, h, w) = x4.dim();
    assert_eq!(c_in % r, 0, "width shuffle channel count");
    let c = c_in / r;
    let mut out = Array4::<T>::zeros((n, c, h, w * r));
    for ni in 0..n {
        let sample = x4.index_axis(Axis(0), ni);
        for co in 0..c {
            for j in 0..r {
                let src = sample.index_axis(Axis(0), co * r + j);
                for hh in 0..h {
                    for ww in 0..w {
                        out[[ni, co, hh, ww * r + j]] = src[[hh, ww]];
                    }
                }
            }
        }
    }
    out.into_dyn()
}

pub fn pixel_shuffle_w_bwd<T: Scalar>(gout: &ArrayD<T>, r: usize) -> ArrayD<T> {
    let g4 = gout.view().into_dimensionality::<Ix4>().unwrap();
    let (n, c, h, wr) = g4.dim();
    let w = wr / r;
    let mut gx = Array4::<T>::zeros((n, c * r, h, w));
    for ni in 0..n {
        for co in 0..c {
            for j in 0..r {
                for hh in 0..h {
                    for ww in 0..w {
                        gx[[ni, co * r + j, hh, ww]] = g4[[ni, co, hh, ww * r + j]];
                    }
                }
            }
        }
    }
    gx.into_dyn()
}

/// Swaps the two spatial axes (a full MacPI transpose).
pub fn transpose_hw<T: Scalar>(x: &ArrayD<T>) -> ArrayD<T> {
    let x4 = x.view().into_dimensionality::<Ix4>().unwrap();
    x4.permuted_axes([0, 1, 3, 2])
        .as_standard_layout()
        .to_owned()
        .into_dyn()
}

pub fn concat_c<T: Scalar>(xs: &[&ArrayD<T>]) -> ArrayD<T> {
    let views: Vec<ArrayView4<'_, T>> = xs
        .iter()
        .map(|x| x.view().into_dimensionality::<Ix4>().unwrap())
        .collect();
    let out = ndarray::concatenate(
        Axis(1),
        &views.iter().map(|v| v.view()).collect::<Vec<_>>(),
    )
    .unwrap();
    if out.is_standard_layout() {
        out.into_dyn()
    } else {
        out.as_standard_layout().into_owned().into_dyn()
    }
}

pub fn global_avg_pool_fwd<T: Scalar>(x: &ArrayD<T>) -> ArrayD<T> {
    let x4 = x.view().into_dimensionality::<Ix4>().unwrap();
    let (n, c, h, w) = x4.dim();
    let inv = T::one() / T::from_usize(h * w).unwrap();
    let mut out = Array2::<T>::zeros((n, c));
    for ni in 0..n {
        for ci in 0..c {
            let mut acc = T::zero();
            for v in x4.index_axis(Axis(0), ni).index_axis(Axis(0), ci).iter() {
                acc = acc + *v;
            }
            out[[ni, ci]] = acc * inv;
        }
    }
    out.into_dyn()
}

pub fn global_avg_pool_bwd<T: Scalar>(gout: &ArrayD<T>, hw: (usize, usize)) -> ArrayD<T> {
    let g2 = gout.view().into_dimensionality::<Ix2>().unwrap();
    let (n, c) = g2.dim();
    let inv = T::one() / T::from_usize(hw.0 * hw.1).unwrap();
    let mut gx = Array4::<T>::zeros((n, c, hw.0, hw.1));
    for ni in 0..n {
        for ci in 0..c {
            let g = g2[[ni, ci]] * inv;
            gx.index_axis_mut(Axis(0), ni)
                .index_axis_mut(Axis(0), ci)
                .fill(g);
        }
    }
    gx.into_dyn()
}

/// Fully connected layer on pooled features: `x [N, F] · wᵀ [F, O] + b`.
pub fn linear_fwd<T: Scalar>(x: &ArrayD<T>, w: &ArrayD<T>, b: &ArrayD<T>) -> ArrayD<T> {
    let x2 = x.view().into_dimensionality::<Ix2>().unwrap();
    let w2 = w.view().into_dimensionality::<Ix2>().unwrap();
    let b1 = b.view().into_dimensionality::<Ix1>().unwrap();
    let mut out = x2.dot(&w2.t());
    for mut row in out.outer_iter_mut() {
        ndarray::Zip::from(&mut row).and(&b1).for_each(|r, &b| *r = *r + b);
    }
    out.into_dyn()
}

pub fn linear_bwd<T: Scalar>(
    x: &ArrayD<T>,
    w: &ArrayD<T>,
    gout: &ArrayD<T>,
) -> (ArrayD<T>, ArrayD<T>, ArrayD<T>) {
    let x2 = x.view().into_dimensionality::<Ix2>().unwrap();
    let w2 = w.view().into_dimensionality::<Ix2>().unwrap();
    let g2 = gout.view().into_dimensionality::<Ix2>().unwrap();
    let gx = g2.dot(&w2);
    let gw = g2.t().dot(&x2);
    let gb = g2.sum_axis(Axis(0));
    (gx.into_dyn(), gw.into_dyn(), gb.into_dyn())
}

pub fn leaky_relu_fwd<T: Scalar>(x: &ArrayD<T>, slope: T) -> ArrayD<T> {
    x.mapv(|v| if v > T::zero() { v } else { v * slope })
}

pub fn leaky_relu_bwd<T: Scalar>(x: &ArrayD<T>, slope: T, gout: &ArrayD<T>) -> ArrayD<T> {
    let mut gx = gout.clone();
    ndarray::Zip::from(&mut gx).and(x).for_each(|g, &v| {
        if v <= T::zero() {
            *g = *g * slope;
        }
    });
    gx
}

pub fn sigmoid_fwd<T: Scalar>(x: &ArrayD<T>) -> ArrayD<T> {
    x.mapv(|v| T::one() / (T::one() + (-v).exp()))
}

pub fn sigmoid_bwd<T: Scalar>(y: &ArrayD<T>, gout: &ArrayD<T>) -> ArrayD<T> {
    let mut gx = gout.clone();
    ndarray::Zip::from(&mut gx).and(y).for_each(|g, &s| {
        *g = *g * s * (T::one() - s);
    });
    gx
}

/// Per-channel gating: `out[n,c,h,w] = x[n,c,h,w] · gates[n,c]`.
pub fn scale_channels_fwd<T: Scalar>(x: &ArrayD<T>, gates: &ArrayD<T>) -> ArrayD<T> {
    let x4 = x.view().into_dimensionality::<Ix4>().unwrap();
    let g2 = gates.view().into_dimensionality::<Ix2>().unwrap();
    let (n, c, h, w) = x4.dim();
    let mut out = Array4::<T>::zeros((n, c, h, w));
    for ni in 0..n {
        let sample = x4.index_axis(Axis(0), ni);
        for ci in 0..c {
            let g = g2[[ni, ci]];
            let src = sample.index_axis(Axis(0), ci);
            let mut plane = out.index_axis_mut(Axis(0), ni);
            let mut dst = plane.index_axis_mut(Axis(0), ci);
            ndarray::Zip::from(&mut dst).and(&src).for_each(|d, &s| *d = s * g);
        }
    }
    out.into_dyn()
}

pub fn scale_channels_bwd<T: Scalar>(
    x: &ArrayD<T>,
    gates: &ArrayD<T>,
    gout: &ArrayD<T>,
) -> (ArrayD<T>, ArrayD<T>) {
    let x4 = x.view().into_dimensionality::<Ix4>().unwrap();
    let g2 = gates.view().into_dimensionality::<Ix2>().unwrap();
    let o4 = gout.view().into_dimensionality::<Ix4>().unwrap();
    let (n, c, h, w) = x4.dim();
    let mut gx = Array4::<T>::zeros((n, c, h, w));
    let mut gg = Array2::<T>::zeros((n, c));
    for ni in 0..n {
        for ci in 0..c {
            let g = g2[[ni, ci]];
            let mut acc = T::zero();
            for hh in 0..h {
                for ww in 0..w {
                    let go = o4[[ni, ci, hh, ww]];
                    gx[[ni, ci, hh, ww]] = go * g;
                    acc = acc + go * x4[[ni, ci, hh, ww]];
                }
            }
            gg[[ni, ci]] = acc;
        }
    }
    (gx.into_dyn(), gg.into_dyn())
}

/// Mean absolute error over all elements, as a 0-d array.
pub fn l1_loss_fwd<T: Scalar>(a: &ArrayD<T>, b: &ArrayD<T>) -> ArrayD<T> {
    assert_eq!(a.shape(), b.shape(), "L1 operands must match");
    let inv = T::one() / T::from_usize(a.len()).unwrap();
    let mut acc = T::zero();
    ndarray::Zip::from(a).and(b).for_each(|&x, &y| {
        acc = acc + (x - y).abs();
    });
    ndarray::arr0(acc * inv).into_dyn()
}

pub fn l1_loss_bwd<T: Scalar>(a: &ArrayD<T>, b: &ArrayD<T>, gout: T) -> (ArrayD<T>, ArrayD<T>) {
    let inv = gout / T::from_usize(a.len()).unwrap();
    let mut ga = ArrayD::<T>::zeros(a.raw_dim());
    ndarray::Zip::from(&mut ga).and(a).and(b).for_each(|g, &x, &y| {
        *g = if x > y {
            inv
        } else if x < y {
            -inv
        } else {
            T::zero()
        };
    });
    let gb = ga.mapv(|v| -v);
    (ga, gb)
}
