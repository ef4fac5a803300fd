//! Training harness: patch enumeration, light-field-consistent
//! augmentation, and the supervised training loop.

mod adam;

pub use adam::Adam;

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::btas::make_schedule;
use crate::error::{Error, Result};
use crate::lf::{center_crop_angular, macpi_from_sai, sparse_sample_corners, LightField};
use crate::net::checkpoint::save_checkpoint;
use crate::net::{l1_training_loss_and_grads, ModelState};

/// Training task: either the global 2×2→7×7 network or the local
/// 2×2→3×3 network fed by the block-traversal sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Targets are central 7×7 crops; inputs the four corners.
    Gvn,
    /// Targets are the overlapping 3×3 angular blocks of the central 9×9,
    /// enumerated by the traversal schedule; inputs each block's corners.
    Lvn,
}

impl Task {
    pub fn required_angular(&self) -> usize {
        match self {
            Task::Gvn => 7,
            Task::Lvn => 9,
        }
    }

    pub fn input_views(&self) -> usize {
        2
    }

    pub fn output_views(&self) -> usize {
        match self {
            Task::Gvn => 7,
            Task::Lvn => 3,
        }
    }
}

/// Optimizer, schedule, and data-pipeline hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub task: Task,
    pub batch_size: usize,
    pub lr0: f64,
    /// Epochs between learning-rate halvings.
    pub lr_half_period: usize,
    pub epochs: usize,
    /// Spatial patch side.
    pub patch: usize,
    /// Patch enumeration stride.
    pub patch_stride: usize,
    pub augment: bool,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
}

impl TrainConfig {
    pub fn gvn() -> Self {
        Self {
            task: Task::Gvn,
            batch_size: 8,
            lr0: 2e-4,
            lr_half_period: 15,
            epochs: 75,
            patch: 64,
            patch_stride: 64,
            augment: true,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
        }
    }

    pub fn lvn() -> Self {
        Self { task: Task::Lvn, batch_size: 12, ..Self::gvn() }
    }

    /// Learning rate of a 1-indexed epoch: `lr₀ · 0.5^floor(e / period)`,
    /// so the first halving lands on epoch `period` and epoch 30 of the
    /// 15-epoch schedule runs at `lr₀/4`.
    pub fn lr_for_epoch(&self, epoch: usize) -> f64 {
        self.lr0 * 0.5f64.powi((epoch / self.lr_half_period) as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || self.epochs == 0
            || self.patch == 0
            || self.patch_stride == 0
            || self.lr_half_period == 0
        {
            return Err(Error::InvalidArg("training config fields must be positive".into()));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::InvalidArg("learning rate must be positive".into()));
        }
        Ok(())
    }

    /// Parses `key=value` lines, starting from the task defaults. Unknown
    /// keys are returned to the caller.
    pub fn from_text(text: &str) -> Result<(Self, BTreeMap<String, String>)> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArg(format!("config line {}: expected key=value", lineno + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let task = match map.remove("task").as_deref() {
            Some("gvn") | None => Task::Gvn,
            Some("lvn") => Task::Lvn,
            Some(other) => {
                return Err(Error::InvalidArg(format!("unknown task {other:?}")));
            }
        };
        let mut cfg = match task {
            Task::Gvn => Self::gvn(),
            Task::Lvn => Self::lvn(),
        };
        macro_rules! take {
            ($key:literal, $field:expr, $ty:ty) => {
                if let Some(v) = map.remove($key) {
                    $field = v.parse::<$ty>().map_err(|_| {
                        Error::InvalidArg(format!("config key {} has bad value {v:?}", $key))
                    })?;
                }
            };
        }
        take!("batch_size", cfg.batch_size, usize);
        take!("lr0", cfg.lr0, f64);
        take!("lr_half_period", cfg.lr_half_period, usize);
        take!("epochs", cfg.epochs, usize);
        take!("patch", cfg.patch, usize);
        take!("patch_stride", cfg.patch_stride, usize);
        take!("augment", cfg.augment, bool);
        take!("seed", cfg.seed, u64);
        take!("beta1", cfg.beta1, f64);
        take!("beta2", cfg.beta2, f64);
        cfg.validate()?;
        Ok((cfg, map))
    }
}

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub scene: String,
    pub spatial: (usize, usize),
    /// Output-grid origin of the angular block, for local-network samples.
    pub block: Option<(usize, usize)>,
}

/// One training pair: a sparse input patch and its dense target.
#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub input: LightField,
    pub target: LightField,
    pub provenance: Provenance,
}

impl SampleRecord {
    /// Input views must equal the corresponding corner views of the target.
    pub fn check_consistency(&self) -> Result<()> {
        let n = self.input.num_u();
        let idx = crate::lf::evenly_spaced_indices(self.target.num_u(), n)?;
        for (i, &u) in idx.iter().enumerate() {
            for (j, &v) in idx.iter().enumerate() {
                if self.input.view_at(i, j) != self.target.view_at(u, v) {
                    return Err(Error::Train(format!(
                        "input view ({i},{j}) differs from target corner ({u},{v})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Number of patch origins along one axis.
pub fn patch_grid_count(extent: usize, patch: usize, stride: usize) -> usize {
    if extent < patch {
        0
    } else {
        (extent - patch) / stride + 1
    }
}

#[derive(Debug, Clone, Copy)]
struct PatchEntry {
    scene: usize,
    y: usize,
    x: usize,
    /// Output-grid origin of the 3×3 angular block (local task only).
    block: Option<(usize, usize)>,
}

/// Deterministic enumeration of training samples over a scene set. Scenes
/// are angular-cropped once at construction; samples are cut on demand.
pub struct PatchSet {
    scenes: Vec<(String, LightField)>,
    entries: Vec<PatchEntry>,
    task: Task,
    patch: usize,
}

impl PatchSet {
    pub fn build(
        scenes: Vec<(String, LightField)>,
        task: Task,
        patch: usize,
        stride: usize,
    ) -> Result<Self> {
        if scenes.is_empty() {
            return Err(Error::Train("no scenes supplied".into()));
        }
        let need = task.required_angular();
        let mut cropped = Vec::with_capacity(scenes.len());
        for (name, lf) in scenes {
            if lf.num_u() < need || lf.num_v() < need {
                return Err(Error::Train(format!(
                    "scene {name} has {}x{} views, task needs {need}x{need}",
                    lf.num_u(),
                    lf.num_v()
                )));
            }
            if lf.height() < patch || lf.width() < patch {
                return Err(Error::Train(format!(
                    "scene {name} is {}x{}, smaller than the {patch}px patch",
                    lf.height(),
                    lf.width()
                )));
            }
            cropped.push((name, center_crop_angular(&lf, need)?));
        }

        let blocks: Vec<Option<(usize, usize)>> = match task {
            Task::Gvn => vec![None],
            Task::Lvn => make_schedule(5, 2, 3, 9)?
                .blocks
                .iter()
                .map(|b| Some(b.output_origin))
                .collect(),
        };

        let mut entries = Vec::new();
        for (si, (_, lf)) in cropped.iter().enumerate() {
            for yi in 0..patch_grid_count(lf.height(), patch, stride) {
                for xi in 0..patch_grid_count(lf.width(), patch, stride) {
                    for b in &blocks {
                        entries.push(PatchEntry {
                            scene: si,
                            y: yi * stride,
                            x: xi * stride,
                            block: *b,
                        });
                    }
                }
            }
        }
        Ok(Self { scenes: cropped, entries, task, patch })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> Result<SampleRecord> {
        let e = self.entries[i];
        let (name, scene) = &self.scenes[e.scene];
        let spatial = scene.crop_spatial(e.y, e.x, self.patch, self.patch)?;
        let (target, block) = match (self.task, e.block) {
            (Task::Gvn, _) => (spatial, None),
            (Task::Lvn, Some((p, q))) => (spatial.crop_angular_block(p, q, 3)?, Some((p, q))),
            (Task::Lvn, None) => unreachable!("local entries always carry a block"),
        };
        let input = sparse_sample_corners(&target, self.task.input_views())?;
        Ok(SampleRecord {
            input,
            target,
            provenance: Provenance { scene: name.clone(), spatial: (e.y, e.x), block },
        })
    }
}

/// Joint spatial+angular flips and 90° rotations; input and target transform
/// identically, so corner sampling and the parallax law are preserved.
pub fn augment(s: &SampleRecord, rng: &mut impl Rng) -> SampleRecord {
    let flip_h = rng.gen_bool(0.5);
    let flip_v = rng.gen_bool(0.5);
    let quarter_turns = rng.gen_range(0..4u32);
    let apply = |lf: &LightField| {
        let mut out = lf.clone();
        if flip_h {
            out = out.flip_horizontal();
        }
        if flip_v {
            out = out.flip_vertical();
        }
        for _ in 0..quarter_turns {
            out = out.rot90();
        }
        out
    };
    SampleRecord {
        input: apply(&s.input),
        target: apply(&s.target),
        provenance: s.provenance.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
}

impl TrainLog {
    /// Line-delimited records: `step= epoch= lr= loss=`.
    pub fn render_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&format!(
                "step={} epoch={} lr={:e} loss={:.8}\n",
                s.step, s.epoch, s.lr, s.loss
            ));
        }
        out
    }
}

fn macpi_batch(fields: &[&LightField]) -> Result<ArrayD<f32>> {
    let first = fields[0];
    let a = first.angular_size()?;
    let (h, w) = (first.height(), first.width());
    let mut out = ArrayD::<f32>::zeros(IxDyn(&[fields.len(), 1, a * h, a * w]));
    for (n, lf) in fields.iter().enumerate() {
        let m = macpi_from_sai(lf)?;
        for ((i, j), &v) in m.pixels().indexed_iter() {
            out[[n, 0, i, j]] = v;
        }
    }
    Ok(out)
}

fn stable_stream(seed: u64, epoch: usize, index: usize) -> ChaCha20Rng {
    // distinct, order-independent stream per (seed, epoch, sample)
    let mix = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((epoch as u64) << 32)
        .wrapping_add(index as u64);
    ChaCha20Rng::seed_from_u64(mix)
}

/// Supervised training: epoch loop, seeded shuffling, Adam updates, and
/// optional per-epoch checkpointing. The loss covers the full output MacPI
/// (novel and input view positions alike). Aborts on a non-finite loss with
/// the offending step, learning rate, and batch provenance.
pub fn train(
    model: &mut ModelState<f32>,
    data: &PatchSet,
    cfg: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainLog> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Train("empty patch set".into()));
    }
    if model.config.a_in != cfg.task.input_views() || model.config.a_out != cfg.task.output_views()
    {
        return Err(Error::Train(format!(
            "model is {}->{} but the task needs {}->{}",
            model.config.a_in,
            model.config.a_out,
            cfg.task.input_views(),
            cfg.task.output_views()
        )));
    }

    let mut opt = Adam::new(cfg.beta1, cfg.beta2);
    let mut log = TrainLog::default();

    for epoch in 1..=cfg.epochs {
        let lr = cfg.lr_for_epoch(epoch);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut shuffle_rng = ChaCha20Rng::seed_from_u64(cfg.seed.wrapping_add(epoch as u64));
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            order.swap(i, j);
        }

        for batch in order.chunks(cfg.batch_size) {
            let mut inputs = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            let mut provenance = Vec::with_capacity(batch.len());
            for &idx in batch {
                let mut sample = data.get(idx)?;
                if cfg.augment {
                    let mut rng = stable_stream(cfg.seed, epoch, idx);
                    sample = augment(&sample, &mut rng);
                }
                provenance.push(format!("{:?}", sample.provenance));
                inputs.push(sample.input);
                targets.push(sample.target);
            }
            let x = macpi_batch(&inputs.iter().collect::<Vec<_>>())?;
            let t = macpi_batch(&targets.iter().collect::<Vec<_>>())?;
            let (loss, grads) = l1_training_loss_and_grads(model, &x, &t)?;
            if !loss.is_finite() {
                return Err(Error::Train(format!(
                    "non-finite loss at step {} (epoch {epoch}, lr {lr:e}); batch: {}",
                    model.step,
                    provenance.join("; ")
                )));
            }
            opt.step(&mut model.params, &grads, lr);
            model.step += 1;
            log.steps.push(StepRecord { step: model.step, epoch, lr, loss: loss as f64 });
        }

        if let Some(dir) = checkpoint_dir {
            save_checkpoint(model, &dir.join(format!("epoch_{epoch:03}.ckpt")))?;
        }
    }
    Ok(log)
}
