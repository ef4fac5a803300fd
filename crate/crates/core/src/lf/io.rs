//! Scene-directory and macro-pixel-image file formats.
//!
//! A scene is a directory of 8-bit PNG views named `view_{u:02}_{v:02}.png`
//! plus a `scene.meta` text file of `key=value` lines (`U`, `V`, `H`, `W`,
//! optional `disparity_min`/`disparity_max`). RGB views are converted to
//! BT.601 luminance on load. A MacPI exports as a single grayscale PNG with
//! a sibling `.meta` file recording `A`, `H`, `W`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageReader, RgbImage};
use ndarray::{Array2, Array4};

use crate::error::{Error, Result};
use crate::metrics::rgb_to_y;

use super::{LightField, MacPI};

/// A loaded scene: luminance field plus the original RGB planes when the
/// source views were color.
#[derive(Debug, Clone)]
pub struct SceneData {
    pub y: LightField,
    pub rgb: Option<Box<[LightField; 3]>>,
    pub disparity_range: Option<(f64, f64)>,
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn dequantize(b: u8) -> f32 {
    b as f32 / 255.0
}

fn view_name(u: usize, v: usize) -> String {
    format!("view_{u:02}_{v:02}.png")
}

fn parse_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::SceneFormat(format!(
                "{}:{}: expected key=value, got {line:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn meta_usize(map: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<usize> {
    map.get(key)
        .ok_or_else(|| Error::SceneFormat(format!("{}: missing key {key}", path.display())))?
        .parse::<usize>()
        .map_err(|_| Error::SceneFormat(format!("{}: key {key} is not a count", path.display())))
}

/// Writes a grayscale scene directory (views + `scene.meta`).
pub fn write_scene(dir: &Path, lf: &LightField, disparity_range: Option<(f64, f64)>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for u in 0..lf.num_u() {
        for v in 0..lf.num_v() {
            let view = lf.view_at(u, v);
            let mut img = GrayImage::new(lf.width() as u32, lf.height() as u32);
            for (h, row) in view.outer_iter().enumerate() {
                for (w, &val) in row.iter().enumerate() {
                    img.put_pixel(w as u32, h as u32, image::Luma([quantize(val)]));
                }
            }
            let path = dir.join(view_name(u, v));
            img.save(&path).map_err(|e| Error::image(path.display().to_string(), e))?;
        }
    }
    let mut meta = format!(
        "U={}\nV={}\nH={}\nW={}\n",
        lf.num_u(),
        lf.num_v(),
        lf.height(),
        lf.width()
    );
    if let Some((lo, hi)) = disparity_range {
        meta.push_str(&format!("disparity_min={lo}\ndisparity_max={hi}\n"));
    }
    let meta_path = dir.join("scene.meta");
    fs::write(&meta_path, meta).map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    Ok(())
}

/// Writes an RGB scene directory from three unit-range channel fields.
pub fn write_scene_rgb(dir: &Path, channels: &[LightField; 3]) -> Result<()> {
    let [r, g, b] = channels;
    if r.views().dim() != g.views().dim() || g.views().dim() != b.views().dim() {
        return Err(Error::Shape("RGB channel fields must share a shape".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for u in 0..r.num_u() {
        for v in 0..r.num_v() {
            let mut img = RgbImage::new(r.width() as u32, r.height() as u32);
            for h in 0..r.height() {
                for w in 0..r.width() {
                    img.put_pixel(
                        w as u32,
                        h as u32,
                        image::Rgb([
                            quantize(r.views()[[u, v, h, w]]),
                            quantize(g.views()[[u, v, h, w]]),
                            quantize(b.views()[[u, v, h, w]]),
                        ]),
                    );
                }
            }
            let path = dir.join(view_name(u, v));
            img.save(&path).map_err(|e| Error::image(path.display().to_string(), e))?;
        }
    }
    let meta = format!(
        "U={}\nV={}\nH={}\nW={}\n",
        r.num_u(),
        r.num_v(),
        r.height(),
        r.width()
    );
    let meta_path = dir.join("scene.meta");
    fs::write(&meta_path, meta).map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    Ok(())
}

/// Reads a scene directory; RGB views populate both `y` and `rgb`.
pub fn read_scene(dir: &Path) -> Result<SceneData> {
    let meta_path = dir.join("scene.meta");
    let meta = parse_meta(&meta_path)?;
    let nu = meta_usize(&meta, "U", &meta_path)?;
    let nv = meta_usize(&meta, "V", &meta_path)?;
    let nh = meta_usize(&meta, "H", &meta_path)?;
    let nw = meta_usize(&meta, "W", &meta_path)?;
    if nu == 0 || nv == 0 || nh == 0 || nw == 0 {
        return Err(Error::SceneFormat(format!("{}: zero-sized scene", meta_path.display())));
    }
    let disparity_range = match (meta.get("disparity_min"), meta.get("disparity_max")) {
        (Some(lo), Some(hi)) => Some((
            lo.parse::<f64>()
                .map_err(|_| Error::SceneFormat(format!("{}: bad disparity_min", meta_path.display())))?,
            hi.parse::<f64>()
                .map_err(|_| Error::SceneFormat(format!("{}: bad disparity_max", meta_path.display())))?,
        )),
        _ => None,
    };

    let mut y = Array4::zeros((nu, nv, nh, nw));
    let mut rgb: Option<[Array4<f32>; 3]> = None;
    for u in 0..nu {
        for v in 0..nv {
            let path = dir.join(view_name(u, v));
            let img = ImageReader::open(&path)
                .map_err(|e| Error::io(path.display().to_string(), e))?
                .decode()
                .map_err(|e| Error::image(path.display().to_string(), e))?;
            if img.width() as usize != nw || img.height() as usize != nh {
                return Err(Error::SceneFormat(format!(
                    "{}: view is {}x{}, scene.meta says {}x{}",
                    path.display(),
                    img.width(),
                    img.height(),
                    nw,
                    nh
                )));
            }
            match img {
                DynamicImage::ImageLuma8(g) => {
                    for (x, yy, p) in g.enumerate_pixels() {
                        y[[u, v, yy as usize, x as usize]] = dequantize(p.0[0]);
                    }
                }
                other => {
                    let c = other.to_rgb8();
                    let planes = rgb.get_or_insert_with(|| {
                        [
                            Array4::zeros((nu, nv, nh, nw)),
                            Array4::zeros((nu, nv, nh, nw)),
                            Array4::zeros((nu, nv, nh, nw)),
                        ]
                    });
                    for (x, yy, p) in c.enumerate_pixels() {
                        let (r, g, b) =
                            (dequantize(p.0[0]), dequantize(p.0[1]), dequantize(p.0[2]));
                        planes[0][[u, v, yy as usize, x as usize]] = r;
                        planes[1][[u, v, yy as usize, x as usize]] = g;
                        planes[2][[u, v, yy as usize, x as usize]] = b;
                        y[[u, v, yy as usize, x as usize]] = rgb_to_y(r, g, b);
                    }
                }
            }
        }
    }
    let rgb = match rgb {
        Some([r, g, b]) => Some(Box::new([
            LightField::new(r)?,
            LightField::new(g)?,
            LightField::new(b)?,
        ])),
        None => None,
    };
    Ok(SceneData { y: LightField::new(y)?, rgb, disparity_range })
}

/// Convenience wrapper returning only the luminance field.
pub fn read_scene_y(dir: &Path) -> Result<LightField> {
    Ok(read_scene(dir)?.y)
}

fn macpi_meta_path(png: &Path) -> PathBuf {
    png.with_extension("meta")
}

/// Exports a MacPI as one grayscale PNG plus a `.meta` sibling recording `A`.
pub fn write_macpi(png: &Path, m: &MacPI) -> Result<()> {
    if let Some(parent) = png.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    let px = m.pixels();
    let mut img = GrayImage::new(px.ncols() as u32, px.nrows() as u32);
    for (r, row) in px.outer_iter().enumerate() {
        for (c, &val) in row.iter().enumerate() {
            img.put_pixel(c as u32, r as u32, image::Luma([quantize(val)]));
        }
    }
    img.save(png).map_err(|e| Error::image(png.display().to_string(), e))?;
    let meta = format!("A={}\nH={}\nW={}\n", m.angular_size(), m.height(), m.width());
    let meta_path = macpi_meta_path(png);
    fs::write(&meta_path, meta).map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    Ok(())
}

/// Imports a MacPI PNG, taking `A` from the sibling `.meta` file.
pub fn read_macpi(png: &Path) -> Result<MacPI> {
    let meta_path = macpi_meta_path(png);
    let meta = parse_meta(&meta_path)?;
    let a = meta_usize(&meta, "A", &meta_path)?;
    let img = ImageReader::open(png)
        .map_err(|e| Error::io(png.display().to_string(), e))?
        .decode()
        .map_err(|e| Error::image(png.display().to_string(), e))?
        .to_luma8();
    let pixels = Array2::from_shape_fn((img.height() as usize, img.width() as usize), |(r, c)| {
        dequantize(img.get_pixel(c as u32, r as u32).0[0])
    });
    MacPI::new(pixels, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lf::{macpi_from_sai, sai_from_macpi};
    use ndarray::Array4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quantized_lf(seed: u64, a: usize, h: usize, w: usize) -> LightField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let views = Array4::from_shape_fn((a, a, h, w), |_| {
            rng.gen_range(0u32..=255) as f32 / 255.0
        });
        LightField::new(views).unwrap()
    }

    #[test]
    fn scene_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lf = quantized_lf(1, 3, 6, 8);
        write_scene(dir.path(), &lf, Some((-1.5, 2.0))).unwrap();
        let back = read_scene(dir.path()).unwrap();
        assert_eq!(back.y.views(), lf.views());
        assert!(back.rgb.is_none());
        assert_eq!(back.disparity_range, Some((-1.5, 2.0)));
    }

    #[test]
    fn rgb_scene_converts_to_luminance() {
        let dir = tempfile::tempdir().unwrap();
        let r = quantized_lf(2, 2, 4, 4);
        let g = quantized_lf(3, 2, 4, 4);
        let b = quantized_lf(4, 2, 4, 4);
        write_scene_rgb(dir.path(), &[r.clone(), g.clone(), b.clone()]).unwrap();
        let back = read_scene(dir.path()).unwrap();
        assert!(back.rgb.is_some());
        let expect = rgb_to_y(
            r.views()[[0, 1, 2, 3]],
            g.views()[[0, 1, 2, 3]],
            b.views()[[0, 1, 2, 3]],
        );
        let got = back.y.views()[[0, 1, 2, 3]];
        assert!((got - expect).abs() < 1e-6);
    }

    #[test]
    fn macpi_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lf = quantized_lf(5, 3, 5, 7);
        let m = macpi_from_sai(&lf).unwrap();
        let png = dir.path().join("macpi.png");
        write_macpi(&png, &m).unwrap();
        let back = read_macpi(&png).unwrap();
        assert_eq!(back.angular_size(), 3);
        assert_eq!(back.pixels(), m.pixels());
        assert_eq!(sai_from_macpi(&back).views(), lf.views());
    }

    #[test]
    fn missing_meta_is_a_scene_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_scene(dir.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn dimension_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let lf = quantized_lf(6, 2, 4, 4);
        write_scene(dir.path(), &lf, None).unwrap();
        std::fs::write(dir.path().join("scene.meta"), "U=2\nV=2\nH=5\nW=4\n").unwrap();
        assert!(matches!(read_scene(dir.path()), Err(Error::SceneFormat(_))));
    }
}
