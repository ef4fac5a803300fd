//! Canonical light-field data model and lossless layout transforms.
//!
//! A light field is stored as a 4D luminance array indexed `(u, v, h, w)`
//! where `(u, v)` are the angular coordinates (view row/column) and `(h, w)`
//! the spatial coordinates inside a view. The macro-pixel image (MacPI) is
//! the interleaved 2D layout `MacPI[h·A + u, w·A + v]`: each `A×A` block
//! gathers the samples of one spatial position across all views. Both
//! layouts carry exactly the same samples; the transforms here are lossless.

mod synth;
pub mod io;

pub use synth::{estimate_epi_disparity, SyntheticSceneSpec, Texture};

use ndarray::{Array2, Array4, ArrayView2};

use crate::error::{Error, Result};

/// 4D luminance light field in sub-aperture-image (SAI) form.
///
/// Samples are unit-range luminance; the angular grid is `U×V` views of
/// `H×W` pixels each.
#[derive(Debug, Clone, PartialEq)]
pub struct LightField {
    views: Array4<f32>,
}

impl LightField {
    /// Wraps a `(U, V, H, W)` array, validating dimensions and sample range.
    pub fn new(views: Array4<f32>) -> Result<Self> {
        let d = views.dim();
        if d.0 == 0 || d.1 == 0 || d.2 == 0 || d.3 == 0 {
            return Err(Error::Shape(format!("light field has an empty dimension: {d:?}")));
        }
        if views.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidArg(
                "light-field samples must be finite and in [0, 1]".into(),
            ));
        }
        Ok(Self { views })
    }

    /// Wraps raw views, clamping every sample into `[0, 1]`.
    pub fn from_views_clamped(mut views: Array4<f32>) -> Result<Self> {
        views.mapv_inplace(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 });
        Self::new(views)
    }

    pub fn from_fn(u: usize, v: usize, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Result<Self> {
        Self::new(Array4::from_shape_fn((u, v, h, w), |(a, b, c, d)| f(a, b, c, d)))
    }

    pub fn views(&self) -> &Array4<f32> {
        &self.views
    }

    pub fn into_views(self) -> Array4<f32> {
        self.views
    }

    /// Angular rows `U`.
    pub fn num_u(&self) -> usize {
        self.views.dim().0
    }

    /// Angular columns `V`.
    pub fn num_v(&self) -> usize {
        self.views.dim().1
    }

    pub fn height(&self) -> usize {
        self.views.dim().2
    }

    pub fn width(&self) -> usize {
        self.views.dim().3
    }

    /// Angular size `A` of a square grid; error if `U != V`.
    pub fn angular_size(&self) -> Result<usize> {
        if self.num_u() != self.num_v() {
            return Err(Error::Shape(format!(
                "expected a square angular grid, got {}x{}",
                self.num_u(),
                self.num_v()
            )));
        }
        Ok(self.num_u())
    }

    /// One sub-aperture image as a 2D view.
    pub fn view_at(&self, u: usize, v: usize) -> ArrayView2<'_, f32> {
        self.views.slice(ndarray::s![u, v, .., ..])
    }

    /// Spatial window `(h0.., w0..)` of every view.
    pub fn crop_spatial(&self, h0: usize, w0: usize, h: usize, w: usize) -> Result<Self> {
        if h0 + h > self.height() || w0 + w > self.width() || h == 0 || w == 0 {
            return Err(Error::InvalidArg(format!(
                "spatial crop ({h0}+{h}, {w0}+{w}) outside {}x{}",
                self.height(),
                self.width()
            )));
        }
        let views = self
            .views
            .slice(ndarray::s![.., .., h0..h0 + h, w0..w0 + w])
            .to_owned();
        Ok(Self { views })
    }

    /// Angular window `(u0.., v0..)` of size `n×n`.
    pub fn crop_angular_block(&self, u0: usize, v0: usize, n: usize) -> Result<Self> {
        if u0 + n > self.num_u() || v0 + n > self.num_v() || n == 0 {
            return Err(Error::InvalidArg(format!(
                "angular block ({u0}+{n}, {v0}+{n}) outside {}x{}",
                self.num_u(),
                self.num_v()
            )));
        }
        let views = self
            .views
            .slice(ndarray::s![u0..u0 + n, v0..v0 + n, .., ..])
            .to_owned();
        Ok(Self { views })
    }

    /// Horizontal spatial flip applied jointly with the matching angular flip
    /// (`w → W−1−w`, `v → V−1−v`), preserving the constant-disparity law.
    pub fn flip_horizontal(&self) -> Self {
        let (nu, nv, nh, nw) = self.views.dim();
        let views = Array4::from_shape_fn((nu, nv, nh, nw), |(u, v, h, w)| {
            self.views[[u, nv - 1 - v, h, nw - 1 - w]]
        });
        Self { views }
    }

    /// Vertical spatial flip applied jointly with the matching angular flip.
    pub fn flip_vertical(&self) -> Self {
        let (nu, nv, nh, nw) = self.views.dim();
        let views = Array4::from_shape_fn((nu, nv, nh, nw), |(u, v, h, w)| {
            self.views[[nu - 1 - u, v, nh - 1 - h, w]]
        });
        Self { views }
    }

    /// 90° counter-clockwise rotation of the spatial and angular lattices
    /// together. Requires a square angular grid and square patches for the
    /// result to remain a valid sample of the same scene geometry.
    pub fn rot90(&self) -> Self {
        let (nu, nv, nh, nw) = self.views.dim();
        let views = Array4::from_shape_fn((nv, nu, nw, nh), |(u, v, h, w)| {
            // (r, c) → (c, N−1−r) inverse mapping on both lattices
            self.views[[v, nu - 1 - u, w, nh - 1 - h]]
        });
        Self { views }
    }
}

/// 2D macro-pixel image: the same samples as a square-grid [`LightField`],
/// interleaved as `pixels[h·A + u, w·A + v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacPI {
    pixels: Array2<f32>,
    ang: usize,
}

impl MacPI {
    /// Wraps a 2D array, validating that both dimensions are multiples of `a`.
    pub fn new(pixels: Array2<f32>, a: usize) -> Result<Self> {
        if a == 0 {
            return Err(Error::InvalidArg("angular size must be >= 1".into()));
        }
        let (r, c) = pixels.dim();
        if r == 0 || c == 0 || r % a != 0 || c % a != 0 {
            return Err(Error::Shape(format!(
                "macro-pixel image of {r}x{c} is not a nonempty multiple of A={a}"
            )));
        }
        Ok(Self { pixels, ang: a })
    }

    pub fn pixels(&self) -> &Array2<f32> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Array2<f32> {
        self.pixels
    }

    pub fn angular_size(&self) -> usize {
        self.ang
    }

    /// Spatial height `H` (rows / A).
    pub fn height(&self) -> usize {
        self.pixels.nrows() / self.ang
    }

    /// Spatial width `W` (cols / A).
    pub fn width(&self) -> usize {
        self.pixels.ncols() / self.ang
    }
}

/// Epipolar-plane image: one angular and one spatial axis of the 4D field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpiOrientation {
    /// Fix `(u, h)`, vary `(v, w)`; strip shape `(V, W)`.
    Horizontal,
    /// Fix `(v, w)`, vary `(u, h)`; strip shape `(U, H)`.
    Vertical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Epi {
    pub strip: Array2<f32>,
    pub orientation: EpiOrientation,
}

/// Interleaves a square-grid light field into its macro-pixel image,
/// `MacPI[h·A + u, w·A + v] = lf[u, v, h, w]`.
pub fn macpi_from_sai(lf: &LightField) -> Result<MacPI> {
    let a = lf.angular_size()?;
    let (h, w) = (lf.height(), lf.width());
    let mut pixels = Array2::zeros((a * h, a * w));
    let views = lf.views();
    for u in 0..a {
        for v in 0..a {
            for hh in 0..h {
                for ww in 0..w {
                    pixels[[hh * a + u, ww * a + v]] = views[[u, v, hh, ww]];
                }
            }
        }
    }
    MacPI::new(pixels, a)
}

/// Exact inverse of [`macpi_from_sai`].
pub fn sai_from_macpi(m: &MacPI) -> LightField {
    let a = m.angular_size();
    let (h, w) = (m.height(), m.width());
    let px = m.pixels();
    let views = Array4::from_shape_fn((a, a, h, w), |(u, v, hh, ww)| px[[hh * a + u, ww * a + v]]);
    LightField { views }
}

/// Extracts an epipolar-plane image at the given fixed coordinates.
pub fn extract_epi(
    lf: &LightField,
    orientation: EpiOrientation,
    fixed_angular: usize,
    fixed_spatial: usize,
) -> Result<Epi> {
    let views = lf.views();
    let strip = match orientation {
        EpiOrientation::Horizontal => {
            if fixed_angular >= lf.num_u() || fixed_spatial >= lf.height() {
                return Err(Error::InvalidArg(format!(
                    "horizontal EPI indices (u={fixed_angular}, h={fixed_spatial}) out of range for {}x{} views of {}x{}",
                    lf.num_u(), lf.num_v(), lf.height(), lf.width()
                )));
            }
            Array2::from_shape_fn((lf.num_v(), lf.width()), |(v, w)| {
                views[[fixed_angular, v, fixed_spatial, w]]
            })
        }
        EpiOrientation::Vertical => {
            if fixed_angular >= lf.num_v() || fixed_spatial >= lf.width() {
                return Err(Error::InvalidArg(format!(
                    "vertical EPI indices (v={fixed_angular}, w={fixed_spatial}) out of range for {}x{} views of {}x{}",
                    lf.num_u(), lf.num_v(), lf.height(), lf.width()
                )));
            }
            Array2::from_shape_fn((lf.num_u(), lf.height()), |(u, h)| {
                views[[u, fixed_angular, h, fixed_spatial]]
            })
        }
    };
    Ok(Epi { strip, orientation })
}

/// Evenly spaced indices `0..=last` including both endpoints, `n >= 2`.
/// For `n = count` this is the identity enumeration.
pub fn evenly_spaced_indices(count: usize, n: usize) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::InvalidArg(format!("corner-grid size must be >= 2, got {n}")));
    }
    if n > count {
        return Err(Error::InvalidArg(format!(
            "cannot sample {n} views from an axis of {count}"
        )));
    }
    let last = count - 1;
    Ok((0..n).map(|k| (k * last + (n - 1) / 2) / (n - 1)).collect())
}

/// Sparse angular sampling: the `n×n` views at evenly spaced angular
/// positions including both endpoints (`n = 2` picks the four corners).
pub fn sparse_sample_corners(lf: &LightField, n: usize) -> Result<LightField> {
    let rows = evenly_spaced_indices(lf.num_u(), n)?;
    let cols = evenly_spaced_indices(lf.num_v(), n)?;
    let (h, w) = (lf.height(), lf.width());
    let views = lf.views();
    let out = Array4::from_shape_fn((n, n, h, w), |(i, j, hh, ww)| {
        views[[rows[i], cols[j], hh, ww]]
    });
    Ok(LightField { views: out })
}

/// Central `A'×A'` angular crop; spatial content untouched. For odd
/// remainders the crop offset is `floor((U − A')/2)`.
pub fn center_crop_angular(lf: &LightField, target: usize) -> Result<LightField> {
    if target == 0 || target > lf.num_u() || target > lf.num_v() {
        return Err(Error::InvalidArg(format!(
            "cannot crop {}x{} angular grid to {target}x{target}",
            lf.num_u(),
            lf.num_v()
        )));
    }
    let off_u = (lf.num_u() - target) / 2;
    let off_v = (lf.num_v() - target) / 2;
    let (h, w) = (lf.height(), lf.width());
    let views = lf.views();
    let out = Array4::from_shape_fn((target, target, h, w), |(u, v, hh, ww)| {
        views[[u + off_u, v + off_v, hh, ww]]
    });
    Ok(LightField { views: out })
}

/// Bilinear sample of a toroidally extended 2D array at real coordinates.
pub fn sample_periodic_bilinear(tex: &Array2<f32>, row: f64, col: f64) -> f32 {
    let (h, w) = tex.dim();
    let r0 = row.floor();
    let c0 = col.floor();
    let fr = (row - r0) as f32;
    let fc = (col - c0) as f32;
    let wrap = |x: f64, n: usize| -> usize {
        let m = (x as i64).rem_euclid(n as i64);
        m as usize
    };
    let r0i = wrap(r0, h);
    let r1i = (r0i + 1) % h;
    let c0i = wrap(c0, w);
    let c1i = (c0i + 1) % w;
    let a = tex[[r0i, c0i]];
    let b = tex[[r0i, c1i]];
    let c = tex[[r1i, c0i]];
    let d = tex[[r1i, c1i]];
    a * (1.0 - fr) * (1.0 - fc) + b * (1.0 - fr) * fc + c * fr * (1.0 - fc) + d * fr * fc
}

/// Maximum absolute violation of the constant-disparity parallax law over
/// all view pairs: every view must equal the center view shifted by
/// `d·(u_c − u, v_c − v)` under toroidal bilinear sampling. Exactly `0.0`
/// for integer `d` on periodically generated fields.
pub fn constant_disparity_residual(lf: &LightField, d: f64) -> f32 {
    let (nu, nv, h, w) = lf.views().dim();
    // pairwise form of the law, texture-free: lf[u,v](h,w) = lf[0,0](h + d·u, w + d·v)
    let reference = lf.view_at(0, 0).to_owned();
    let mut worst = 0.0f32;
    for u in 0..nu {
        for v in 0..nv {
            let du = d * (u as f64);
            let dv = d * (v as f64);
            let view = lf.view_at(u, v);
            for hh in 0..h {
                for ww in 0..w {
                    let expect = sample_periodic_bilinear(&reference, hh as f64 + du, ww as f64 + dv);
                    let got = view[[hh, ww]];
                    worst = worst.max((expect - got).abs());
                }
            }
        }
    }
    worst
}

/// Generates a constant-disparity light field from a synthetic scene spec:
/// `lf[u, v, h, w] = texture(h + d·(u − u_c), w + d·(v − v_c))` with
/// toroidal bilinear texture sampling and `u_c = v_c = (A−1)/2`.
pub fn generate_constant_disparity_lf(spec: &SyntheticSceneSpec) -> Result<LightField> {
    spec.validate()?;
    let a = spec.a;
    let (h, w) = (spec.h, spec.w);
    let uc = (a as f64 - 1.0) / 2.0;
    let tex = spec.texture.render(h, w);
    let views = Array4::from_shape_fn((a, a, h, w), |(u, v, hh, ww)| {
        let row = hh as f64 + spec.disparity * (u as f64 - uc);
        let col = ww as f64 + spec.disparity * (v as f64 - uc);
        sample_periodic_bilinear(&tex, row, col)
    });
    LightField::new(views)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_lf(seed: u64, u: usize, v: usize, h: usize, w: usize) -> LightField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LightField::from_fn(u, v, h, w, |_, _, _, _| rng.gen_range(0.0..=1.0)).unwrap()
    }

    #[test]
    fn macpi_identity_for_single_view() {
        let lf = random_lf(1, 1, 1, 5, 7);
        let m = macpi_from_sai(&lf).unwrap();
        assert_eq!(m.pixels(), &lf.view_at(0, 0).to_owned());
    }

    #[test]
    fn macpi_two_by_two_scalar_views() {
        // A=2, H=W=1, views [[a,b],[c,d]] as scalars per view
        let views = Array4::from_shape_vec((2, 2, 1, 1), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let lf = LightField::new(views).unwrap();
        let m = macpi_from_sai(&lf).unwrap();
        assert_eq!(m.pixels(), &array![[0.1, 0.2], [0.3, 0.4]]);
    }

    #[test]
    fn macpi_rejects_non_square_grid() {
        let lf = random_lf(2, 2, 3, 4, 4);
        assert!(matches!(macpi_from_sai(&lf), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_disparity_macro_pixels_are_constant() {
        let spec = SyntheticSceneSpec {
            texture: Texture::SmoothNoise { seed: 7, harmonics: 4 },
            disparity: 0.0,
            a: 3,
            h: 5,
            w: 5,
        };
        let lf = generate_constant_disparity_lf(&spec).unwrap();
        let m = macpi_from_sai(&lf).unwrap();
        let px = m.pixels();
        for h in 0..5 {
            for w in 0..5 {
                let anchor = px[[h * 3, w * 3]];
                for i in 0..3 {
                    for j in 0..3 {
                        assert_eq!(px[[h * 3 + i, w * 3 + j]], anchor);
                    }
                }
            }
        }
    }

    #[test]
    fn round_trip_exact() {
        for (seed, a, h, w) in [(3u64, 2usize, 8usize, 8usize), (4, 7, 16, 16), (5, 3, 6, 10)] {
            let lf = random_lf(seed, a, a, h, w);
            let back = sai_from_macpi(&macpi_from_sai(&lf).unwrap());
            assert_eq!(back.views(), lf.views());
        }
    }

    #[test]
    fn macpi_zeros_round_trip() {
        let m = MacPI::new(Array2::zeros((9, 12)), 3).unwrap();
        let lf = sai_from_macpi(&m);
        assert!(lf.views().iter().all(|&v| v == 0.0));
        assert_eq!(lf.num_u(), 3);
        assert_eq!(lf.height(), 3);
        assert_eq!(lf.width(), 4);
    }

    #[test]
    fn macpi_rejects_indivisible_dims() {
        assert!(MacPI::new(Array2::zeros((10, 9)), 3).is_err());
    }

    #[test]
    fn layout_law_random_probes() {
        let lf = random_lf(9, 5, 5, 12, 9);
        let m = macpi_from_sai(&lf).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..200 {
            let (u, v) = (rng.gen_range(0..5), rng.gen_range(0..5));
            let (h, w) = (rng.gen_range(0..12), rng.gen_range(0..9));
            assert_eq!(m.pixels()[[h * 5 + u, w * 5 + v]], lf.views()[[u, v, h, w]]);
        }
    }

    #[test]
    fn epi_zero_disparity_columns_constant() {
        let spec = SyntheticSceneSpec {
            texture: Texture::SmoothNoise { seed: 11, harmonics: 5 },
            disparity: 0.0,
            a: 5,
            h: 16,
            w: 16,
        };
        let lf = generate_constant_disparity_lf(&spec).unwrap();
        let epi = extract_epi(&lf, EpiOrientation::Horizontal, 2, 7).unwrap();
        for w in 0..16 {
            let first = epi.strip[[0, w]];
            for v in 1..5 {
                assert_eq!(epi.strip[[v, w]], first);
            }
        }
    }

    #[test]
    fn epi_edge_advances_one_pixel_per_view() {
        let spec = SyntheticSceneSpec {
            texture: Texture::HStep { col: 8 },
            disparity: 1.0,
            a: 3,
            h: 16,
            w: 16,
        };
        let lf = generate_constant_disparity_lf(&spec).unwrap();
        let epi = extract_epi(&lf, EpiOrientation::Horizontal, 1, 4).unwrap();
        // locate the step per EPI row as the argmax of |forward difference|,
        // searching the interior only (the toroidal extension puts a second,
        // spurious edge at the wrap seam)
        let edge_col = |v: usize| -> i64 {
            let row = epi.strip.row(v);
            let mut best = (0usize, -1.0f32);
            for w in 2..12 {
                let g = (row[w + 1] - row[w]).abs();
                if g > best.1 {
                    best = (w, g);
                }
            }
            best.0 as i64
        };
        let positions: Vec<i64> = (0..3).map(edge_col).collect();
        assert_eq!((positions[0] - positions[1]).abs(), 1);
        assert_eq!((positions[1] - positions[2]).abs(), 1);
    }

    #[test]
    fn epi_single_view_is_image_row() {
        let lf = random_lf(21, 1, 1, 6, 9);
        let epi = extract_epi(&lf, EpiOrientation::Horizontal, 0, 3).unwrap();
        assert_eq!(epi.strip.dim(), (1, 9));
        for w in 0..9 {
            assert_eq!(epi.strip[[0, w]], lf.views()[[0, 0, 3, w]]);
        }
    }

    #[test]
    fn epi_rejects_out_of_range() {
        let lf = random_lf(22, 3, 3, 4, 4);
        assert!(extract_epi(&lf, EpiOrientation::Horizontal, 3, 0).is_err());
        assert!(extract_epi(&lf, EpiOrientation::Vertical, 0, 4).is_err());
    }

    #[test]
    fn corners_of_seven_grid() {
        let lf = random_lf(30, 7, 7, 4, 4);
        let s = sparse_sample_corners(&lf, 2).unwrap();
        assert_eq!(s.num_u(), 2);
        for (i, u) in [(0usize, 0usize), (1, 6)] {
            for (j, v) in [(0usize, 0usize), (1, 6)] {
                assert_eq!(s.view_at(i, j), lf.view_at(u, v));
            }
        }
    }

    #[test]
    fn five_from_nine_alternating() {
        assert_eq!(evenly_spaced_indices(9, 5).unwrap(), vec![0, 2, 4, 6, 8]);
    }

    #[test]
    fn full_sampling_is_identity() {
        let lf = random_lf(31, 5, 5, 4, 4);
        let s = sparse_sample_corners(&lf, 5).unwrap();
        assert_eq!(s.views(), lf.views());
    }

    #[test]
    fn sampling_rejects_oversize() {
        let lf = random_lf(32, 3, 3, 4, 4);
        assert!(sparse_sample_corners(&lf, 4).is_err());
        assert!(sparse_sample_corners(&lf, 1).is_err());
    }

    #[test]
    fn center_crop_nine_to_seven() {
        let lf = random_lf(40, 9, 9, 4, 4);
        let c = center_crop_angular(&lf, 7).unwrap();
        for u in 0..7 {
            for v in 0..7 {
                assert_eq!(c.view_at(u, v), lf.view_at(u + 1, v + 1));
            }
        }
    }

    #[test]
    fn center_crop_identity_and_composition() {
        let lf = random_lf(41, 9, 9, 4, 4);
        let same = center_crop_angular(&lf, 9).unwrap();
        assert_eq!(same.views(), lf.views());
        let corners = sparse_sample_corners(&same, 2).unwrap();
        assert_eq!(corners.view_at(1, 1), lf.view_at(8, 8));
        assert!(center_crop_angular(&lf, 10).is_err());
    }

    #[test]
    fn zero_disparity_views_identical() {
        let spec = SyntheticSceneSpec {
            texture: Texture::Checker { period: 3 },
            disparity: 0.0,
            a: 3,
            h: 9,
            w: 9,
        };
        let lf = generate_constant_disparity_lf(&spec).unwrap();
        let center = lf.view_at(1, 1).to_owned();
        for u in 0..3 {
            for v in 0..3 {
                assert_eq!(lf.view_at(u, v), center.view());
            }
        }
    }

    /// Eq-style displaced macro-pixel correspondence for integer disparities:
    /// the sample of an object point seen from view (u,v) lies in the
    /// macro-pixel displaced by d·(u_c−u, v_c−v) from its anchor macro-pixel.
    fn assert_macro_pixel_displacement(d: i64) {
        let a = 3usize;
        let (h, w) = (12usize, 12usize);
        let spec = SyntheticSceneSpec {
            texture: Texture::SeededUniform { seed: 50 + d as u64 },
            disparity: d as f64,
            a,
            h,
            w,
        };
        let lf = generate_constant_disparity_lf(&spec).unwrap();
        let m = macpi_from_sai(&lf).unwrap();
        let tex = spec.texture.render(h, w);
        let uc = 1i64; // (A−1)/2 for A=3
        let px = m.pixels();
        for h0 in 0..h as i64 {
            for w0 in 0..w as i64 {
                for u in 0..a as i64 {
                    for v in 0..a as i64 {
                        let dh = d * (uc - u);
                        let dw = d * (uc - v);
                        let hr = (h0 + dh).rem_euclid(h as i64) as usize;
                        let wr = (w0 + dw).rem_euclid(w as i64) as usize;
                        let got = px[[hr * a + u as usize, wr * a + v as usize]];
                        let expect = tex[[h0 as usize, w0 as usize]];
                        assert_eq!(got, expect, "object ({h0},{w0}) via view ({u},{v}), d={d}");
                        // Chebyshev distance of the displacement matches |d|·view offset
                        let cheb = dh.abs().max(dw.abs());
                        assert_eq!(cheb, d.abs() * (uc - u).abs().max((uc - v).abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn displaced_macro_pixel_correspondence_d1() {
        assert_macro_pixel_displacement(1);
    }

    #[test]
    fn displaced_macro_pixel_correspondence_d2() {
        assert_macro_pixel_displacement(2);
    }

    #[test]
    fn parallax_residual_zero_for_integer_disparity() {
        for d in [0i64, 1, 2] {
            let spec = SyntheticSceneSpec {
                texture: Texture::SeededUniform { seed: 60 },
                disparity: d as f64,
                a: 3,
                h: 14,
                w: 14,
            };
            let lf = generate_constant_disparity_lf(&spec).unwrap();
            assert_eq!(constant_disparity_residual(&lf, d as f64), 0.0);
        }
    }

    #[test]
    fn generator_rejects_excessive_shift() {
        let spec = SyntheticSceneSpec {
            texture: Texture::Checker { period: 2 },
            disparity: 4.0,
            a: 3,
            h: 12,
            w: 12,
        };
        // |d|·(A−1) = 8 >= min(H,W)/2 = 6
        assert!(generate_constant_disparity_lf(&spec).is_err());
    }

    #[test]
    fn flips_preserve_parallax_law() {
        let spec = SyntheticSceneSpec {
            texture: Texture::SeededUniform { seed: 71 },
            disparity: 1.0,
            a: 3,
            h: 16,
            w: 16,
        };
        let lf = generate_constant_disparity_lf(&spec).unwrap();
        assert_eq!(constant_disparity_residual(&lf.flip_horizontal(), 1.0), 0.0);
        assert_eq!(constant_disparity_residual(&lf.flip_vertical(), 1.0), 0.0);
        assert_eq!(constant_disparity_residual(&lf.rot90(), 1.0), 0.0);
        // involution
        assert_eq!(lf.flip_horizontal().flip_horizontal().views(), lf.views());
    }
}
