//! Block Traversal Angular Super-Resolution: enumerate overlapping angular
//! blocks, synthesize each with a local view network, and blend overlaps by
//! averaging, so peak memory is bounded by one block regardless of the
//! input grid size.

use ndarray::{Array2, Array4};

use crate::error::{Error, Result};
use crate::lf::LightField;
use crate::net::{forward_macpi, ModelState, NetworkConfig};
use crate::runtime;

/// One traversal step: where the block's input views sit in the input grid
/// and where its output views land in the output grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub input_origin: (usize, usize),
    pub output_origin: (usize, usize),
}

/// The traversal plan for an `M×M → T×T` reconstruction via `n×n → m×m`
/// local blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSchedule {
    pub lvn_in: usize,
    pub lvn_out: usize,
    pub input_grid: usize,
    pub output_grid: usize,
    /// Output-view stride between blocks (`m − 1`, one view of overlap).
    pub stride: usize,
    pub blocks: Vec<Block>,
}

/// Builds the traversal for the supported `n = 2, m = 3` construction:
/// output origins step by `m − 1 = 2` from the top-left corner, each block's
/// inputs are the consecutive view pair at half its output origin, and
/// `T = 2M − 1`.
pub fn make_schedule(input_grid: usize, n: usize, m: usize, output_grid: usize) -> Result<BlockSchedule> {
    if n != 2 || m != 3 {
        return Err(Error::InvalidArg(format!(
            "unsupported block shape {n}x{n} -> {m}x{m}; the traversal rule is defined for 2x2 -> 3x3"
        )));
    }
    if input_grid < 2 {
        return Err(Error::InvalidArg("input grid must be at least 2x2".into()));
    }
    if output_grid != 2 * input_grid - 1 {
        return Err(Error::InvalidArg(format!(
            "output grid {output_grid} inconsistent with input grid {input_grid} (expected {})",
            2 * input_grid - 1
        )));
    }
    let stride = m - 1;
    let mut blocks = Vec::new();
    for p in (0..=output_grid - m).step_by(stride) {
        for q in (0..=output_grid - m).step_by(stride) {
            blocks.push(Block {
                input_origin: (p / 2, q / 2),
                output_origin: (p, q),
            });
        }
    }
    Ok(BlockSchedule { lvn_in: n, lvn_out: m, input_grid, output_grid, stride, blocks })
}

/// How many blocks cover each output view; every view must be covered.
pub fn coverage_map(sched: &BlockSchedule) -> Array2<u32> {
    let t = sched.output_grid;
    let m = sched.lvn_out;
    let mut cov = Array2::zeros((t, t));
    for b in &sched.blocks {
        for i in 0..m {
            for j in 0..m {
                cov[[b.output_origin.0 + i, b.output_origin.1 + j]] += 1;
            }
        }
    }
    cov
}

/// A local view network: synthesizes an `m×m` view block from its `n×n`
/// corner views. Outputs are raw (unclamped) views; the traversal clamps
/// once after blending.
pub trait LvnAdapter: Sync {
    fn in_views(&self) -> usize;
    fn out_views(&self) -> usize;
    fn synthesize(&self, block: &LightField) -> Result<Array4<f32>>;
}

/// Analytic oracle for constant-disparity scenes with periodic texture:
/// every output view is the block's top-left view shifted by the disparity
/// per output-grid step. Exact for integer disparities.
#[derive(Debug, Clone, Copy)]
pub struct ShiftOracleLvn {
    /// Disparity in pixels per output-grid view step.
    pub disparity: f64,
}

impl LvnAdapter for ShiftOracleLvn {
    fn in_views(&self) -> usize {
        2
    }

    fn out_views(&self) -> usize {
        3
    }

    fn synthesize(&self, block: &LightField) -> Result<Array4<f32>> {
        let (h, w) = (block.height(), block.width());
        let reference = block.view_at(0, 0).to_owned();
        let mut out = Array4::zeros((3, 3, h, w));
        for i in 0..3 {
            for j in 0..3 {
                let du = self.disparity * i as f64;
                let dv = self.disparity * j as f64;
                for hh in 0..h {
                    for ww in 0..w {
                        out[[i, j, hh, ww]] = crate::lf::sample_periodic_bilinear(
                            &reference,
                            hh as f64 + du,
                            ww as f64 + dv,
                        );
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A trained 2×2 → 3×3 model as the local view network.
pub struct ModelLvn<'a> {
    pub model: &'a ModelState<f32>,
}

impl<'a> ModelLvn<'a> {
    pub fn new(model: &'a ModelState<f32>) -> Result<Self> {
        if model.config.a_in != 2 || model.config.a_out != 3 {
            return Err(Error::InvalidArg(format!(
                "local view network must map 2x2 -> 3x3, got {}x{} -> {}x{}",
                model.config.a_in, model.config.a_in, model.config.a_out, model.config.a_out
            )));
        }
        Ok(Self { model })
    }
}

impl LvnAdapter for ModelLvn<'_> {
    fn in_views(&self) -> usize {
        2
    }

    fn out_views(&self) -> usize {
        3
    }

    fn synthesize(&self, block: &LightField) -> Result<Array4<f32>> {
        let m = crate::lf::macpi_from_sai(block)?;
        let (r, c) = m.pixels().dim();
        let mut x = ndarray::ArrayD::<f32>::zeros(ndarray::IxDyn(&[1, 1, r, c]));
        for ((i, j), &v) in m.pixels().indexed_iter() {
            x[[0, 0, i, j]] = v;
        }
        let y = forward_macpi(self.model, &x)?;
        let (h, w) = (block.height(), block.width());
        let a = self.model.config.a_out;
        let mut out = Array4::zeros((a, a, h, w));
        for u in 0..a {
            for v in 0..a {
                for hh in 0..h {
                    for ww in 0..w {
                        out[[u, v, hh, ww]] = y[[0, 0, hh * a + u, ww * a + v]];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Runs the traversal: per-block synthesis (parallel unless deterministic
/// mode forces serial), then accumulation in block order and a uniform mean
/// over all covering blocks. Blending happens in linear luminance with one
/// clamp at the end.
pub fn run_btas(
    lf_in: &LightField,
    lvn: &dyn LvnAdapter,
    sched: &BlockSchedule,
) -> Result<LightField> {
    let a = lf_in.angular_size()?;
    if a != sched.input_grid {
        return Err(Error::Shape(format!(
            "input grid {a}x{a} does not match the schedule's {0}x{0}",
            sched.input_grid
        )));
    }
    if lvn.in_views() != sched.lvn_in || lvn.out_views() != sched.lvn_out {
        return Err(Error::Shape(
            "local network block shape does not match the schedule".into(),
        ));
    }
    let (h, w) = (lf_in.height(), lf_in.width());
    let n = sched.lvn_in;
    let m = sched.lvn_out;
    let t = sched.output_grid;

    let synth_one = |b: &Block| -> Result<Array4<f32>> {
        let block = lf_in.crop_angular_block(b.input_origin.0, b.input_origin.1, n)?;
        let out = lvn.synthesize(&block)?;
        if out.dim() != (m, m, h, w) {
            return Err(Error::Shape(format!(
                "local network produced {:?}, expected ({m}, {m}, {h}, {w})",
                out.dim()
            )));
        }
        Ok(out)
    };

    // synthesis may run in parallel; the blend below is a fixed-order
    // accumulation, so parallel and serial execution agree bit-for-bit
    let outputs: Vec<Result<Array4<f32>>> = if runtime::deterministic() {
        sched.blocks.iter().map(synth_one).collect()
    } else {
        use rayon::prelude::*;
        sched.blocks.par_iter().map(synth_one).collect()
    };

    let mut acc = Array4::<f32>::zeros((t, t, h, w));
    for (b, out) in sched.blocks.iter().zip(outputs) {
        let out = out?;
        for i in 0..m {
            for j in 0..m {
                let (p, q) = (b.output_origin.0 + i, b.output_origin.1 + j);
                for hh in 0..h {
                    for ww in 0..w {
                        acc[[p, q, hh, ww]] += out[[i, j, hh, ww]];
                    }
                }
            }
        }
    }
    let cov = coverage_map(sched);
    for u in 0..t {
        for v in 0..t {
            let c = cov[[u, v]];
            if c == 0 {
                return Err(Error::InvalidArg(format!("output view ({u},{v}) never covered")));
            }
            let inv = 1.0 / c as f32;
            for hh in 0..h {
                for ww in 0..w {
                    acc[[u, v, hh, ww]] *= inv;
                }
            }
        }
    }
    LightField::from_views_clamped(acc)
}

/// Analytic peak-activation estimate (bytes, one sample, f32) for running
/// the network on a full `a_in×a_in` grid of `h×w` views: the maximum of
/// "retained + concurrently live" tensor elements over the forward walk.
/// An estimate of the widest moment, not a measurement.
pub fn peak_activation_estimate(config: &NetworkConfig, h: usize, w: usize) -> Result<u64> {
    config.validate()?;
    let s = (config.a_in * config.a_in * h * w) as u64; // macpi elements per channel
    let c = config.channels as u64;
    let mut peak = 0u64;
    let mut bump = |elems: u64| peak = peak.max(elems);

    // initial features live until the long skip
    let x0 = c * s;
    bump(s + x0);

    let n_groups = config.stage_counts.len() as u64;
    for (g, &n) in config.stage_counts.iter().enumerate() {
        let retained_groups = x0 + g as u64 * c * s;
        for i in 0..n as u64 {
            let retained = retained_groups + i * c * s + c * s; // prior block outputs + block input
            // widest in-block moments: the three branch outputs, their
            // concatenated copy, and the busiest branch's internals
            let branch_cat = 3 * c * s + 3 * c * s;
            let afeb_internal = (config.afeb_layers as u64 + 1) * c * s;
            bump(retained + branch_cat.max(afeb_internal + 2 * c * s));
            // the spatial block after fusion: stage outputs + concat copy
            let sfeb = (2 * config.sfeb_layers as u64) * c * s + c * s;
            bump(retained + sfeb);
        }
        // group fusion: block outputs, their concat copy, fused result
        bump(retained_groups + 2 * (n as u64) * c * s + c * s);
    }
    // top fusion over all group outputs
    bump(x0 + 2 * n_groups * c * s + c * s);
    // up-sampling head: channel expansion to the full output footprint
    let out_elems = (config.a_out * config.a_out * h * w) as u64;
    bump(x0 + c * s / (config.a_in * config.a_in) as u64 + 2 * out_elems);

    Ok(4 * peak)
}

/// Peak activation of one traversal step: one block through the local view
/// network. Depends only on the local network and the per-view size, never
/// on the input grid being traversed.
pub fn btas_peak_activation_estimate(lvn_config: &NetworkConfig, h: usize, w: usize) -> Result<u64> {
    peak_activation_estimate(lvn_config, h, w)
}
