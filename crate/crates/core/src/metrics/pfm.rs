//! PFM (portable float map) reader/writer for disparity ground truth.
//!
//! Grayscale `Pf` maps only; the scale sign selects endianness and rows are
//! stored bottom-to-top, per the format convention.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Reads a grayscale PFM into row-major top-down order.
pub fn read_pfm(path: &Path) -> Result<Array2<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let bad = |msg: &str| Error::SceneFormat(format!("{}: {msg}", path.display()));

    // header: three whitespace-separated tokens ("Pf", "W H", "scale"),
    // each conventionally on its own line
    let mut at = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        while at < bytes.len() && bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        let start = at;
        while at < bytes.len() && !bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        if start == at {
            return Err(bad("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..at]).into_owned())
    };

    let magic = token(&bytes)?;
    if magic == "PF" {
        return Err(bad("color PFM not supported for disparity maps (expected grayscale Pf)"));
    }
    if magic != "Pf" {
        return Err(bad("not a PFM file"));
    }
    let w: usize = token(&bytes)?.parse().map_err(|_| bad("bad width"))?;
    let h: usize = token(&bytes)?.parse().map_err(|_| bad("bad height"))?;
    let scale: f64 = token(&bytes)?.parse().map_err(|_| bad("bad scale"))?;
    if w == 0 || h == 0 {
        return Err(bad("zero-sized map"));
    }
    let little_endian = scale < 0.0;
    // exactly one whitespace byte separates the header from the raster
    at += 1;
    let need = w * h * 4;
    if bytes.len() < at + need {
        return Err(bad("truncated raster"));
    }
    let data = &bytes[at..at + need];
    let mut out = Array2::zeros((h, w));
    for row in 0..h {
        for col in 0..w {
            let i = (row * w + col) * 4;
            let quad: [u8; 4] = data[i..i + 4].try_into().unwrap();
            let v = if little_endian {
                f32::from_le_bytes(quad)
            } else {
                f32::from_be_bytes(quad)
            };
            // PFM rows run bottom-to-top
            out[[h - 1 - row, col]] = v;
        }
    }
    Ok(out)
}

/// Writes a grayscale little-endian PFM.
pub fn write_pfm(path: &Path, values: &Array2<f32>) -> Result<()> {
    let (h, w) = values.dim();
    let mut bytes = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    for row in (0..h).rev() {
        for col in 0..w {
            bytes.extend_from_slice(&values[[row, col]].to_le_bytes());
        }
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}
