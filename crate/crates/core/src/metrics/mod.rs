//! Quantitative evaluation: luminance conversion, PSNR/SSIM over novel
//! views, disparity bad-pixel ratios, and report aggregation.

pub mod pfm;

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::lf::{evenly_spaced_indices, LightField};

/// ITU-R BT.601 full-range luminance of unit-range RGB.
pub fn rgb_to_y(r: f32, g: f32, b: f32) -> f32 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// BT.601 chroma components in `[0, 1]` (offset 0.5).
pub fn rgb_to_cbcr(r: f32, g: f32, b: f32) -> (f32, f32) {
    let y = rgb_to_y(r, g, b);
    (0.564 * (b - y) + 0.5, 0.713 * (r - y) + 0.5)
}

/// Inverse of [`rgb_to_y`]/[`rgb_to_cbcr`].
pub fn ycbcr_to_rgb(y: f32, cb: f32, cr: f32) -> (f32, f32, f32) {
    let cb = cb - 0.5;
    let cr = cr - 0.5;
    let r = y + 1.403 * cr;
    let g = y - 0.344 * cb - 0.714 * cr;
    let b = y + 1.773 * cb;
    (r.clamp(0.0, 1.0), g.clamp(0.0, 1.0), b.clamp(0.0, 1.0))
}

/// Peak signal-to-noise ratio in dB for unit-range images; `+∞` when the
/// images are identical.
pub fn psnr(a: &ArrayView2<'_, f32>, b: &ArrayView2<'_, f32>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("psnr operands {:?} vs {:?}", a.dim(), b.dim())));
    }
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let d = (x - y) as f64;
        acc += d * d;
    }
    let mse = acc / a.len() as f64;
    if mse == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (1.0 / mse).log10())
    }
}

fn gaussian_window(size: usize, sigma: f64) -> Array2<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut w = Array2::from_shape_fn((size, size), |(i, j)| {
        let di = i as f64 - c;
        let dj = j as f64 - c;
        (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp()
    });
    let sum: f64 = w.iter().sum();
    w.mapv_inplace(|v| v / sum);
    w
}

fn filter_valid(img: &ArrayView2<'_, f64>, win: &Array2<f64>) -> Array2<f64> {
    let (h, w) = img.dim();
    let k = win.nrows();
    let mut out = Array2::zeros((h - k + 1, w - k + 1));
    for oy in 0..h - k + 1 {
        for ox in 0..w - k + 1 {
            let mut acc = 0.0;
            for i in 0..k {
                for j in 0..k {
                    acc += win[[i, j]] * img[[oy + i, ox + j]];
                }
            }
            out[[oy, ox]] = acc;
        }
    }
    out
}

/// Mean structural similarity with the reference parameters: 11×11
/// Gaussian window (σ = 1.5), K₁ = 0.01, K₂ = 0.03 on unit range.
pub fn ssim(a: &ArrayView2<'_, f32>, b: &ArrayView2<'_, f32>) -> Result<f64> {
    const WIN: usize = 11;
    const K1: f64 = 0.01;
    const K2: f64 = 0.03;
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("ssim operands {:?} vs {:?}", a.dim(), b.dim())));
    }
    let (h, w) = a.dim();
    if h < WIN || w < WIN {
        return Err(Error::InvalidArg(format!(
            "image {h}x{w} smaller than the {WIN}x{WIN} SSIM window"
        )));
    }
    let c1 = K1 * K1;
    let c2 = K2 * K2;
    let win = gaussian_window(WIN, 1.5);
    let af = a.mapv(|v| v as f64);
    let bf = b.mapv(|v| v as f64);
    let mu1 = filter_valid(&af.view(), &win);
    let mu2 = filter_valid(&bf.view(), &win);
    let aa = filter_valid(&(&af * &af).view(), &win);
    let bb = filter_valid(&(&bf * &bf).view(), &win);
    let ab = filter_valid(&(&af * &bf).view(), &win);

    let mut acc = 0.0;
    for ((i, j), &m1) in mu1.indexed_iter() {
        let m2 = mu2[[i, j]];
        let s11 = aa[[i, j]] - m1 * m1;
        let s22 = bb[[i, j]] - m2 * m2;
        let s12 = ab[[i, j]] - m1 * m2;
        acc += ((2.0 * m1 * m2 + c1) * (2.0 * s12 + c2))
            / ((m1 * m1 + m2 * m2 + c1) * (s11 + s22 + c2));
    }
    Ok(acc / mu1.len() as f64)
}

/// Center-view disparity map with a validity mask.
#[derive(Debug, Clone)]
pub struct DisparityMap {
    pub values: Array2<f32>,
    pub mask: Array2<bool>,
}

impl DisparityMap {
    pub fn new(values: Array2<f32>) -> Result<Self> {
        let mask = Array2::from_elem(values.dim(), true);
        Self::with_mask(values, mask)
    }

    pub fn with_mask(values: Array2<f32>, mask: Array2<bool>) -> Result<Self> {
        if values.dim() != mask.dim() {
            return Err(Error::Shape("disparity values and mask differ in shape".into()));
        }
        for (&v, &m) in values.iter().zip(mask.iter()) {
            if m && !v.is_finite() {
                return Err(Error::InvalidArg("non-finite disparity inside mask".into()));
            }
        }
        Ok(Self { values, mask })
    }
}

fn masked_pairs<'a>(
    d: &'a DisparityMap,
    gt: &'a DisparityMap,
) -> Result<impl Iterator<Item = (f32, f32)> + 'a> {
    if d.values.dim() != gt.values.dim() {
        return Err(Error::Shape(format!(
            "disparity maps {:?} vs {:?}",
            d.values.dim(),
            gt.values.dim()
        )));
    }
    Ok(d.values
        .iter()
        .zip(gt.values.iter())
        .zip(d.mask.iter().zip(gt.mask.iter()))
        .filter(|(_, (&m1, &m2))| m1 && m2)
        .map(|((&a, &b), _)| (a, b)))
}

/// Percentage of masked pixels whose absolute disparity error exceeds τ.
pub fn badpix(d: &DisparityMap, gt: &DisparityMap, tau: f64) -> Result<f64> {
    let mut total = 0usize;
    let mut bad = 0usize;
    for (a, b) in masked_pairs(d, gt)? {
        total += 1;
        if ((a - b).abs() as f64) > tau {
            bad += 1;
        }
    }
    if total == 0 {
        return Err(Error::InvalidArg("empty disparity mask".into()));
    }
    Ok(100.0 * bad as f64 / total as f64)
}

/// Mean squared disparity error × 100 over the combined mask.
pub fn mse100(d: &DisparityMap, gt: &DisparityMap) -> Result<f64> {
    let mut total = 0usize;
    let mut acc = 0.0f64;
    for (a, b) in masked_pairs(d, gt)? {
        total += 1;
        let e = (a - b) as f64;
        acc += e * e;
    }
    if total == 0 {
        return Err(Error::InvalidArg("empty disparity mask".into()));
    }
    Ok(100.0 * acc / total as f64)
}

/// An angular super-resolution task: `n_in×n_in` input views evenly sampled
/// from an `a_out×a_out` output grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AsrTask {
    pub n_in: usize,
    pub a_out: usize,
}

impl AsrTask {
    pub fn new(n_in: usize, a_out: usize) -> Self {
        Self { n_in, a_out }
    }

    /// Angular positions supplied as inputs (excluded from metrics).
    pub fn input_positions(&self) -> Result<BTreeSet<(usize, usize)>> {
        let idx = evenly_spaced_indices(self.a_out, self.n_in)?;
        let mut set = BTreeSet::new();
        for &u in &idx {
            for &v in &idx {
                set.insert((u, v));
            }
        }
        Ok(set)
    }

    pub fn novel_count(&self) -> usize {
        self.a_out * self.a_out - self.n_in * self.n_in
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewMetric {
    pub u: usize,
    pub v: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneReport {
    pub scene: String,
    pub views: Vec<ViewMetric>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

/// Per-scene and per-dataset aggregates; scene means average the novel
/// views, dataset means average the scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub task: AsrTask,
    pub model_id: String,
    pub scenes: Vec<SceneReport>,
}

impl MetricReport {
    pub fn dataset_psnr(&self) -> f64 {
        self.scenes.iter().map(|s| s.mean_psnr).sum::<f64>() / self.scenes.len().max(1) as f64
    }

    pub fn dataset_ssim(&self) -> f64 {
        self.scenes.iter().map(|s| s.mean_ssim).sum::<f64>() / self.scenes.len().max(1) as f64
    }

    /// One record per scene plus a dataset summary, as plain text.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "task={}x{}->{}x{} model={}\n",
            self.task.n_in, self.task.n_in, self.task.a_out, self.task.a_out, self.model_id
        );
        for s in &self.scenes {
            out.push_str(&format!(
                "scene={} views={} psnr={:.4} ssim={:.6}\n",
                s.scene,
                s.views.len(),
                s.mean_psnr,
                s.mean_ssim
            ));
        }
        out.push_str(&format!(
            "dataset scenes={} psnr={:.4} ssim={:.6}\n",
            self.scenes.len(),
            self.dataset_psnr(),
            self.dataset_ssim()
        ));
        out
    }
}

/// Scores a reconstruction against ground truth over novel views only.
pub fn evaluate_scene(
    pred: &LightField,
    gt: &LightField,
    task: AsrTask,
    scene: &str,
) -> Result<SceneReport> {
    if pred.views().dim() != gt.views().dim() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs ground truth {:?}",
            pred.views().dim(),
            gt.views().dim()
        )));
    }
    if pred.num_u() != task.a_out || pred.num_v() != task.a_out {
        return Err(Error::Shape(format!(
            "field is {}x{} but the task expects {}x{}",
            pred.num_u(),
            pred.num_v(),
            task.a_out,
            task.a_out
        )));
    }
    let inputs = task.input_positions()?;
    let mut views = Vec::new();
    for u in 0..task.a_out {
        for v in 0..task.a_out {
            if inputs.contains(&(u, v)) {
                continue;
            }
            let p = pred.view_at(u, v);
            let g = gt.view_at(u, v);
            views.push(ViewMetric {
                u,
                v,
                psnr: psnr(&p, &g)?,
                ssim: ssim(&p, &g)?,
            });
        }
    }
    let n = views.len() as f64;
    let mean_psnr = views.iter().map(|m| m.psnr).sum::<f64>() / n;
    let mean_ssim = views.iter().map(|m| m.ssim).sum::<f64>() / n;
    Ok(SceneReport { scene: scene.to_string(), views, mean_psnr, mean_ssim })
}
