//! Error-map and EPI-strip emission for qualitative inspection.

use std::path::{Path, PathBuf};

use image::{GrayImage, RgbImage};
use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::lf::{extract_epi, EpiOrientation, LightField};

fn to_gray(img: &ArrayView2<'_, f32>) -> GrayImage {
    let (h, w) = img.dim();
    let mut out = GrayImage::new(w as u32, h as u32);
    for ((r, c), &v) in img.indexed_iter() {
        out.put_pixel(c as u32, r as u32, image::Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8]));
    }
    out
}

/// Piecewise-linear heat colormap (blue → cyan → yellow → red).
fn heat(t: f32) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let seg = |lo: f32, hi: f32| ((t - lo) / (hi - lo)).clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.25 {
        (0.0, seg(0.0, 0.25), 1.0)
    } else if t < 0.5 {
        (0.0, 1.0, 1.0 - seg(0.25, 0.5))
    } else if t < 0.75 {
        (seg(0.5, 0.75), 1.0, 0.0)
    } else {
        (1.0, 1.0 - seg(0.75, 1.0), 0.0)
    };
    [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8]
}

/// Writes the center view, a scaled color error map, and the horizontal and
/// vertical EPI strips of a reconstruction. Files appear under fixed names
/// (`csai.png`, `errmap.png`, `epi_h.png`, `epi_v.png`); the scanline picks
/// the spatial row/column of the strips (default: the middle).
pub fn emit_visuals(
    pred: &LightField,
    gt: &LightField,
    out_dir: &Path,
    scanline: Option<usize>,
) -> Result<Vec<PathBuf>> {
    if pred.views().dim() != gt.views().dim() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs ground truth {:?}",
            pred.views().dim(),
            gt.views().dim()
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let uc = pred.num_u() / 2;
    let vc = pred.num_v() / 2;
    let line_h = scanline.unwrap_or(pred.height() / 2);
    let line_w = scanline.unwrap_or(pred.width() / 2);
    if line_h >= pred.height() || line_w >= pred.width() {
        return Err(Error::InvalidArg(format!(
            "scanline {} outside the {}x{} view",
            scanline.unwrap_or(0),
            pred.height(),
            pred.width()
        )));
    }

    let mut written = Vec::new();
    let save_gray = |img: GrayImage, name: &str, written: &mut Vec<PathBuf>| -> Result<()> {
        let path = out_dir.join(name);
        img.save(&path).map_err(|e| Error::image(path.display().to_string(), e))?;
        written.push(path);
        Ok(())
    };

    save_gray(to_gray(&pred.view_at(uc, vc)), "csai.png", &mut written)?;

    // |pred − gt| on the center view, scaled by its own maximum
    let p = pred.view_at(uc, vc);
    let g = gt.view_at(uc, vc);
    let mut peak = 0.0f32;
    for (&a, &b) in p.iter().zip(g.iter()) {
        peak = peak.max((a - b).abs());
    }
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    let mut err_img = RgbImage::new(pred.width() as u32, pred.height() as u32);
    for h in 0..pred.height() {
        for w in 0..pred.width() {
            let e = (p[[h, w]] - g[[h, w]]).abs() * scale;
            err_img.put_pixel(w as u32, h as u32, image::Rgb(heat(e)));
        }
    }
    let err_path = out_dir.join("errmap.png");
    err_img
        .save(&err_path)
        .map_err(|e| Error::image(err_path.display().to_string(), e))?;
    written.push(err_path);

    let epi_h = extract_epi(pred, EpiOrientation::Horizontal, uc, line_h)?;
    save_gray(to_gray(&epi_h.strip.view()), "epi_h.png", &mut written)?;
    let epi_v = extract_epi(pred, EpiOrientation::Vertical, vc, line_w)?;
    save_gray(to_gray(&epi_v.strip.view()), "epi_v.png", &mut written)?;

    Ok(written)
}
