//! Synthetic constant-disparity scenes and the EPI-slope oracle.
//!
//! Textures are rendered on the integer pixel lattice and extended
//! toroidally, so fractional disparity shifts never read out of bounds and
//! integer shifts reproduce exact texels. That makes the generated fields
//! usable as exact geometric ground truth in tests.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::Epi;

/// Procedural, seedable unit-range textures.
#[derive(Debug, Clone, PartialEq)]
pub enum Texture {
    /// Band-limited sum of integer-frequency sinusoids; smooth and exactly
    /// periodic, good for sub-pixel correlation tests.
    SmoothNoise { seed: u64, harmonics: usize },
    /// Binary checkerboard with the given cell size.
    Checker { period: usize },
    /// Horizontal step edge: 0 left of `col`, 1 from `col` on.
    HStep { col: usize },
    /// Independent uniform samples per texel.
    SeededUniform { seed: u64 },
}

impl Texture {
    /// Renders the texture on an `h×w` integer lattice, values in `[0, 1]`.
    pub fn render(&self, h: usize, w: usize) -> Array2<f32> {
        match *self {
            Texture::SmoothNoise { seed, harmonics } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = harmonics.max(1);
                let comps: Vec<(f64, i32, i32, f64)> = (0..n)
                    .map(|_| {
                        (
                            rng.gen_range(0.3..1.0),
                            rng.gen_range(1..=3),
                            rng.gen_range(1..=3),
                            rng.gen_range(0.0..std::f64::consts::TAU),
                        )
                    })
                    .collect();
                let raw = Array2::from_shape_fn((h, w), |(r, c)| {
                    comps
                        .iter()
                        .map(|&(amp, fr, fc, phase)| {
                            amp * (std::f64::consts::TAU
                                * (fr as f64 * r as f64 / h as f64
                                    + fc as f64 * c as f64 / w as f64)
                                + phase)
                                .sin()
                        })
                        .sum::<f64>()
                });
                let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let span = (hi - lo).max(1e-12);
                raw.mapv(|v| ((v - lo) / span) as f32)
            }
            Texture::Checker { period } => {
                let p = period.max(1);
                Array2::from_shape_fn((h, w), |(r, c)| (((r / p) + (c / p)) % 2) as f32)
            }
            Texture::HStep { col } => {
                Array2::from_shape_fn((h, w), |(_, c)| if c < col { 0.0 } else { 1.0 })
            }
            Texture::SeededUniform { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Array2::from_shape_fn((h, w), |_| rng.gen_range(0.0..=1.0))
            }
        }
    }
}

/// Parameters of a synthetic constant-disparity scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneSpec {
    pub texture: Texture,
    /// Pixels of shift per view step; may be fractional.
    pub disparity: f64,
    /// Angular size (square grid).
    pub a: usize,
    pub h: usize,
    pub w: usize,
}

impl SyntheticSceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.a == 0 || self.h == 0 || self.w == 0 {
            return Err(Error::InvalidArg("scene sizes must be positive".into()));
        }
        let max_shift = self.disparity.abs() * (self.a as f64 - 1.0);
        let bound = self.h.min(self.w) as f64 / 2.0;
        if max_shift >= bound {
            return Err(Error::InvalidArg(format!(
                "|d|·(A−1) = {max_shift} must stay below min(H, W)/2 = {bound}"
            )));
        }
        if let Texture::HStep { col } = self.texture {
            if col >= self.w {
                return Err(Error::InvalidArg(format!(
                    "step column {col} outside texture width {}",
                    self.w
                )));
            }
        }
        Ok(())
    }
}

/// Estimates the disparity slope of an EPI by circular cross-correlation.
///
/// Each strip row is correlated against the middle row at integer lags
/// (toroidal), the peak is refined with a 3-point parabolic fit, and the
/// per-row shifts are least-squares regressed against the view index. For a
/// constant-disparity field the returned slope is the disparity in pixels
/// per view step.
pub fn estimate_epi_disparity(epi: &Epi) -> f64 {
    let (rows, cols) = epi.strip.dim();
    assert!(rows >= 2, "EPI slope needs at least two views");
    let vref = rows / 2;
    let reference: Vec<f64> = epi.strip.row(vref).iter().map(|&x| x as f64).collect();
    let ref_mean = reference.iter().sum::<f64>() / cols as f64;

    let corr = |row: &[f64], row_mean: f64, lag: i64| -> f64 {
        let mut acc = 0.0;
        for w in 0..cols {
            let shifted = (w as i64 + lag).rem_euclid(cols as i64) as usize;
            acc += (row[w] - row_mean) * (reference[shifted] - ref_mean);
        }
        acc
    };

    let max_lag = (cols / 3) as i64;
    let mut xs = Vec::with_capacity(rows);
    let mut ys = Vec::with_capacity(rows);
    for v in 0..rows {
        let row: Vec<f64> = epi.strip.row(v).iter().map(|&x| x as f64).collect();
        let row_mean = row.iter().sum::<f64>() / cols as f64;
        let mut best = (0i64, f64::NEG_INFINITY);
        for lag in -max_lag..=max_lag {
            let c = corr(&row, row_mean, lag);
            if c > best.1 {
                best = (lag, c);
            }
        }
        let l0 = best.0;
        let cm = corr(&row, row_mean, l0 - 1);
        let c0 = best.1;
        let cp = corr(&row, row_mean, l0 + 1);
        let denom = cm - 2.0 * c0 + cp;
        let frac = if denom.abs() > 1e-12 { 0.5 * (cm - cp) / denom } else { 0.0 };
        xs.push(v as f64);
        ys.push(l0 as f64 + frac.clamp(-1.0, 1.0));
    }

    let n = rows as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..rows {
        num += (xs[i] - xm) * (ys[i] - ym);
        den += (xs[i] - xm) * (xs[i] - xm);
    }
    num / den
}
