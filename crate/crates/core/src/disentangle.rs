//! Disentangling feature extractors on macro-pixel-layout features.
//!
//! On a MacPI, position `(r, c)` belongs to view `(r mod A, c mod A)` and
//! macro-pixel `(r / A, c / A)`. Three convolution geometries isolate the
//! three light-field correlations:
//!
//! * SFE — kernel 3×3, stride 1, dilation A, padding A: reads only pixels
//!   of the same view in a 3×3 spatial neighborhood.
//! * AFE — kernel A×A, stride A, padding 0: reads exactly one macro-pixel.
//! * EFE — kernel 1×A², horizontal stride A: reads one horizontal EPI
//!   window; the vertical variant is the same weights on the transposed
//!   MacPI.

use std::collections::BTreeSet;

use ndarray::{Array3, ArrayD};

use crate::error::{Error, Result};
use crate::tensor::{kernels, Engine, Grads, ParamStore, Scalar, TapeEngine, ValueId};

/// Convolution geometry contract: kernel, stride, dilation, padding, and
/// channel widths. Weight tensors are shaped
/// `[out_channels, in_channels, kh, kw]` and live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub dilation: (usize, usize),
    pub padding: (usize, usize),
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvSpec {
    /// `[C_out, C_in, kh, kw]`.
    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel.0, self.kernel.1]
    }

    pub fn param_count(&self) -> u64 {
        let w = self.out_channels * self.in_channels * self.kernel.0 * self.kernel.1;
        (w + self.out_channels) as u64
    }

    pub fn out_shape(&self, h: usize, w: usize) -> (usize, usize) {
        kernels::conv_out_shape(self, h, w)
    }
}

/// Pointwise (1×1) convolution spec.
pub fn conv1x1_spec(c_in: usize, c_out: usize) -> ConvSpec {
    ConvSpec {
        kernel: (1, 1),
        stride: (1, 1),
        dilation: (1, 1),
        padding: (0, 0),
        in_channels: c_in,
        out_channels: c_out,
    }
}

/// Plain k×k same-size convolution (dilation 1).
pub fn plain_conv_spec(k: usize, c_in: usize, c_out: usize) -> ConvSpec {
    ConvSpec {
        kernel: (k, k),
        stride: (1, 1),
        dilation: (1, 1),
        padding: (k / 2, k / 2),
        in_channels: c_in,
        out_channels: c_out,
    }
}

/// Spatial feature extractor: same-size, same-view 3×3 neighborhood.
pub fn sfe_spec(a: usize, c_in: usize, c_out: usize) -> ConvSpec {
    ConvSpec {
        kernel: (3, 3),
        stride: (1, 1),
        dilation: (a, a),
        padding: (a, a),
        in_channels: c_in,
        out_channels: c_out,
    }
}

/// Angular feature extractor: one macro-pixel per output position,
/// macpi-full `(A·H, A·W)` → angular-reduced `(H, W)`.
pub fn afe_spec(a: usize, c_in: usize, c_out: usize) -> Result<ConvSpec> {
    if a < 2 {
        return Err(Error::InvalidArg(format!("AFE needs an angular size >= 2, got {a}")));
    }
    Ok(ConvSpec {
        kernel: (a, a),
        stride: (a, a),
        dilation: (1, 1),
        padding: (0, 0),
        in_channels: c_in,
        out_channels: c_out,
    })
}

/// AFE with an override kernel (ablation); output size floors when `k − A`
/// is odd, so the default `k = A` is the only exactly macro-pixel-aligned
/// choice.
pub fn afe_spec_with_kernel(a: usize, k: usize, c_in: usize, c_out: usize) -> Result<ConvSpec> {
    if a < 2 {
        return Err(Error::InvalidArg(format!("AFE needs an angular size >= 2, got {a}")));
    }
    Ok(ConvSpec {
        kernel: (k, k),
        stride: (a, a),
        dilation: (1, 1),
        padding: (k.saturating_sub(a) / 2, k.saturating_sub(a) / 2),
        in_channels: c_in,
        out_channels: c_out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EfeOrientation {
    Horizontal,
    Vertical,
}

/// EPI feature extractor: the 1×A² convolution plus its restore stage
/// (channel expansion by `restore_factor` and a one-axis pixel shuffle),
/// mapping macpi-full back to macpi-full. The vertical variant shares
/// weights and runs on the transposed MacPI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EfeSpec {
    pub conv: ConvSpec,
    /// One-axis pixel-shuffle factor of the restore stage.
    pub restore_factor: usize,
    pub orientation: EfeOrientation,
}

/// Builds the EFE contract. `literal_stride_sq` keeps the stride-A² variant
/// (padding 0, factor-A² restore); the default is stride A with a factor-A
/// restore, which keeps the composite shape-compatible with AFEB/SFEB
/// outputs.
pub fn efe_spec(
    a: usize,
    c_in: usize,
    c_out: usize,
    orientation: EfeOrientation,
    literal_stride_sq: bool,
) -> Result<EfeSpec> {
    if a < 2 {
        return Err(Error::InvalidArg(format!("EFE needs an angular size >= 2, got {a}")));
    }
    let (stride_w, pad_w, restore) = if literal_stride_sq {
        (a * a, 0, a * a)
    } else {
        (a, a * (a - 1) / 2, a)
    };
    Ok(EfeSpec {
        conv: ConvSpec {
            kernel: (1, a * a),
            stride: (1, stride_w),
            dilation: (1, 1),
            padding: (0, pad_w),
            in_channels: c_in,
            out_channels: c_out,
        },
        restore_factor: restore,
        orientation,
    })
}

/// Layout of a feature map in MacPI coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureLayout {
    /// `(A·H, A·W)` interleaved views.
    MacpiFull,
    /// `(H, W)` after an angular reduction.
    AngularReduced,
}

/// A `[C, rows, cols]` feature tensor tagged with its MacPI layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T: Scalar> {
    pub data: Array3<T>,
    pub ang: usize,
    pub layout: FeatureLayout,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn macpi_full(data: Array3<T>, ang: usize) -> Result<Self> {
        let (_, r, c) = data.dim();
        if ang == 0 || r % ang != 0 || c % ang != 0 {
            return Err(Error::Shape(format!(
                "macpi-full feature of {r}x{c} must be a multiple of A={ang}"
            )));
        }
        Ok(Self { data, ang, layout: FeatureLayout::MacpiFull })
    }

    pub fn angular_reduced(data: Array3<T>, ang: usize) -> Self {
        Self { data, ang, layout: FeatureLayout::AngularReduced }
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }
}

/// Applies one convolution contract to a single (unbatched) feature map.
pub fn apply_conv_single<T: Scalar>(
    spec: &ConvSpec,
    weight: &ArrayD<T>,
    bias: &ArrayD<T>,
    x: &Array3<T>,
) -> Array3<T> {
    let (c, h, w) = x.dim();
    let batched = x
        .to_owned()
        .into_shape_with_order((1, c, h, w))
        .unwrap()
        .into_dyn();
    let out = kernels::conv2d_fwd(&batched, weight, Some(bias), spec);
    let sh = out.shape().to_vec();
    out.into_shape_with_order((sh[1], sh[2], sh[3])).unwrap()
}

/// Exact receptive field of one output position: the set of in-range input
/// positions `(row, col)` the output depends on, from kernel/stride/
/// dilation/padding arithmetic alone.
pub fn receptive_field_mask(
    spec: &ConvSpec,
    out_pos: (usize, usize),
    in_size: (usize, usize),
) -> Result<BTreeSet<(usize, usize)>> {
    let (h_out, w_out) = spec.out_shape(in_size.0, in_size.1);
    if out_pos.0 >= h_out || out_pos.1 >= w_out {
        return Err(Error::InvalidArg(format!(
            "output position {out_pos:?} outside {h_out}x{w_out}"
        )));
    }
    let axis = |o: usize, k: usize, s: usize, d: usize, p: usize, n: usize| -> Vec<usize> {
        (0..k)
            .filter_map(|i| {
                let pos = (o * s + i * d) as isize - p as isize;
                (pos >= 0 && (pos as usize) < n).then_some(pos as usize)
            })
            .collect()
    };
    let rows = axis(out_pos.0, spec.kernel.0, spec.stride.0, spec.dilation.0, spec.padding.0, in_size.0);
    let cols = axis(out_pos.1, spec.kernel.1, spec.stride.1, spec.dilation.1, spec.padding.1, in_size.1);
    let mut set = BTreeSet::new();
    for &r in &rows {
        for &c in &cols {
            set.insert((r, c));
        }
    }
    Ok(set)
}

/// Input positions with a nonzero autodiff gradient for one output position
/// (channel 0), on the given weights. The independent cross-check for
/// [`receptive_field_mask`].
pub fn gradient_mask<T: Scalar>(
    spec: &ConvSpec,
    weight: &ArrayD<T>,
    bias: &ArrayD<T>,
    input: &ArrayD<T>,
    out_pos: (usize, usize),
) -> BTreeSet<(usize, usize)> {
    let mut params = ParamStore::<T>::new();
    params.insert("probe.weight", weight.clone());
    params.insert("probe.bias", bias.clone());
    let mut e = TapeEngine::new(&params);
    let x = e.input(input.clone());
    let w = e.param("probe.weight");
    let b = e.param("probe.bias");
    let y = e.conv2d(&x, &w, Some(&b), spec);

    let mut seed = ArrayD::<T>::zeros(e.shape(&y));
    seed[[0, 0, out_pos.0, out_pos.1]] = T::one();
    let grads = e.backward_with_seed(y, seed);
    nonzero_positions(&grads, x)
}

/// Spatial positions where any channel of the input gradient is nonzero.
pub fn nonzero_positions<T: Scalar>(
    grads: &Grads<T>,
    input: ValueId,
) -> BTreeSet<(usize, usize)> {
    let g = grads.of(input).expect("input gradient missing");
    let sh = g.shape().to_vec();
    let mut set = BTreeSet::new();
    for r in 0..sh[2] {
        for c in 0..sh[3] {
            let hit = (0..sh[1]).any(|ch| g[[0, ch, r, c]] != T::zero());
            if hit {
                set.insert((r, c));
            }
        }
    }
    set
}
