//! Checkpoint archive: config as plain text, weight tensors keyed by
//! hierarchical path as little-endian f32, and a trailing SHA-256 digest.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "DDASR-CHECKPOINT v1\n"
//! u32 config-text length, config text (key=value lines, includes step)
//! u32 tensor count
//! per tensor: u16 path length, path, u8 ndim, ndim × u32 dims, data f32 LE
//! 32-byte SHA-256 over everything above
//! ```
//!
//! Unknown keys, missing keys, duplicate keys, and shape mismatches are all
//! rejected loudly; a digest mismatch is an integrity error.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::{ModelDef, ModelState, NetworkConfig};

const MAGIC: &[u8] = b"DDASR-CHECKPOINT v1\n";

fn config_to_text(config: &NetworkConfig, step: u64) -> String {
    let stages = config
        .stage_counts
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "a_in={}\na_out={}\nchannels={}\nstage_counts={}\nattention_reduction={}\n\
         afeb_layers={}\nsfeb_layers={}\nuse_channel_attention={}\nafeb_expand_kernel={}\n\
         dense_connections={}\nefe_stride_sq={}\nlong_skip={}\nstep={}\n",
        config.a_in,
        config.a_out,
        config.channels,
        stages,
        config.attention_reduction,
        config.afeb_layers,
        config.sfeb_layers,
        config.use_channel_attention,
        config.afeb_expand_kernel,
        config.dense_connections,
        config.efe_stride_sq,
        config.long_skip,
        step
    )
}

fn parse_config_text(text: &str) -> Result<(NetworkConfig, u64)> {
    let mut map = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("bad config line {line:?}")))?;
        map.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| -> Result<&String> {
        map.get(k).ok_or_else(|| Error::Checkpoint(format!("config missing key {k}")))
    };
    let parse_usize = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("config key {k} is not a count")))
    };
    let parse_bool = |k: &str| -> Result<bool> {
        match get(k)?.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(Error::Checkpoint(format!("config key {k} has non-boolean {other:?}"))),
        }
    };
    let stage_counts = get("stage_counts")?
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Checkpoint("bad stage_counts entry".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let step = get("step")?
        .parse::<u64>()
        .map_err(|_| Error::Checkpoint("bad step counter".into()))?;
    Ok((
        NetworkConfig {
            a_in: parse_usize("a_in")?,
            a_out: parse_usize("a_out")?,
            channels: parse_usize("channels")?,
            stage_counts,
            attention_reduction: parse_usize("attention_reduction")?,
            afeb_layers: parse_usize("afeb_layers")?,
            sfeb_layers: parse_usize("sfeb_layers")?,
            use_channel_attention: parse_bool("use_channel_attention")?,
            afeb_expand_kernel: parse_usize("afeb_expand_kernel")?,
            dense_connections: parse_bool("dense_connections")?,
            efe_stride_sq: parse_bool("efe_stride_sq")?,
            long_skip: parse_bool("long_skip")?,
        },
        step,
    ))
}

/// Serializes a model to the archive format.
pub fn save_checkpoint(model: &ModelState<f32>, path: &Path) -> Result<()> {
    let def = model.def()?;
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    let cfg = config_to_text(&model.config, model.step);
    buf.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    buf.extend_from_slice(cfg.as_bytes());

    let mut order: Vec<String> = Vec::new();
    def.for_each_param(|p, _| order.push(p.to_string()));
    buf.extend_from_slice(&(order.len() as u32).to_le_bytes());
    for p in &order {
        let tensor = model
            .params
            .get(p)
            .ok_or_else(|| Error::Checkpoint(format!("model is missing parameter {p}")))?;
        buf.extend_from_slice(&(p.len() as u16).to_le_bytes());
        buf.extend_from_slice(p.as_bytes());
        buf.push(tensor.ndim() as u8);
        for &d in tensor.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

struct RawCheckpoint {
    config: NetworkConfig,
    step: u64,
    tensors: HashMap<String, ArrayD<f32>>,
}

fn read_raw(path: &Path) -> Result<RawCheckpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if bytes.len() < MAGIC.len() + 32 {
        return Err(Error::Checkpoint(format!("{}: truncated archive", path.display())));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint(format!(
            "{}: integrity check failed (corrupted archive)",
            path.display()
        )));
    }
    if &body[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: not a checkpoint archive or unsupported version",
            path.display()
        )));
    }
    let mut at = MAGIC.len();
    let take = |at: &mut usize, n: usize| -> Result<&[u8]> {
        if *at + n > body.len() {
            return Err(Error::Checkpoint(format!("{}: truncated archive", path.display())));
        }
        let s = &body[*at..*at + n];
        *at += n;
        Ok(s)
    };
    let read_u32 = |at: &mut usize| -> Result<u32> {
        Ok(u32::from_le_bytes(take(at, 4)?.try_into().unwrap()))
    };

    let cfg_len = read_u32(&mut at)? as usize;
    let cfg_text = std::str::from_utf8(take(&mut at, cfg_len)?)
        .map_err(|_| Error::Checkpoint("config text is not UTF-8".into()))?
        .to_string();
    let (config, step) = parse_config_text(&cfg_text)?;

    let count = read_u32(&mut at)? as usize;
    let mut tensors = HashMap::new();
    for _ in 0..count {
        let plen = u16::from_le_bytes(take(&mut at, 2)?.try_into().unwrap()) as usize;
        let pname = std::str::from_utf8(take(&mut at, plen)?)
            .map_err(|_| Error::Checkpoint("tensor path is not UTF-8".into()))?
            .to_string();
        let ndim = take(&mut at, 1)?[0] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u32(&mut at)? as usize);
        }
        let len: usize = shape.iter().product();
        let data = take(&mut at, len * 4)?;
        let mut values = Vec::with_capacity(len);
        for chunk in data.chunks_exact(4) {
            values.push(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
        let tensor = ArrayD::from_shape_vec(IxDyn(&shape), values)
            .map_err(|e| Error::Checkpoint(format!("tensor {pname}: {e}")))?;
        if tensors.insert(pname.clone(), tensor).is_some() {
            return Err(Error::Checkpoint(format!("duplicate key {pname}")));
        }
    }
    Ok(RawCheckpoint { config, step, tensors })
}

fn assemble(raw: RawCheckpoint, config: &NetworkConfig) -> Result<ModelState<f32>> {
    let def = ModelDef::new(config)?;
    let mut expected: Vec<(String, Vec<usize>)> = Vec::new();
    def.for_each_param(|p, s| expected.push((p.to_string(), s.to_vec())));
    let expected_set: HashMap<&str, &[usize]> = expected
        .iter()
        .map(|(p, s)| (p.as_str(), s.as_slice()))
        .collect();

    for key in raw.tensors.keys() {
        if !expected_set.contains_key(key.as_str()) {
            return Err(Error::Checkpoint(format!("unknown key {key}")));
        }
    }
    let mut params = crate::tensor::ParamStore::new();
    for (p, shape) in &expected {
        let t = raw
            .tensors
            .get(p)
            .ok_or_else(|| Error::Checkpoint(format!("missing key {p}")))?;
        if t.shape() != shape.as_slice() {
            return Err(Error::Checkpoint(format!(
                "shape mismatch at key {p}: archive has {:?}, config needs {:?}",
                t.shape(),
                shape
            )));
        }
        params.insert(p.clone(), t.clone());
    }
    Ok(ModelState { config: config.clone(), params, step: raw.step })
}

/// Loads a checkpoint, taking the configuration stored in the archive.
pub fn load_checkpoint(path: &Path) -> Result<ModelState<f32>> {
    let raw = read_raw(path)?;
    let config = raw.config.clone();
    assemble(raw, &config)
}

/// Loads a checkpoint against an explicitly expected configuration; shape
/// and key mismatches name the offending parameter.
pub fn load_checkpoint_with_config(path: &Path, config: &NetworkConfig) -> Result<ModelState<f32>> {
    let raw = read_raw(path)?;
    assemble(raw, config)
}
