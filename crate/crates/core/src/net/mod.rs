//! The DDASR network family.
//!
//! Four levels: feature extractors (level 1) combine into the Deep
//! Disentangling Block (level 2), blocks stack into groups with
//! layer-by-layer concatenation and channel attention (level 3), and four
//! groups plus an initial extraction and an angular up-sampling head form
//! the full network (level 4). The model is described structurally by
//! [`ModelDef`], which is the single source of truth for parameter paths
//! and shapes: initialization, counting, checkpoint validation, and the
//! forward pass all walk the same definition.

pub mod checkpoint;

use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::disentangle::{afe_spec, conv1x1_spec, efe_spec, sfe_spec, ConvSpec, EfeOrientation};
use crate::error::{Error, Result};
use crate::lf::{macpi_from_sai, sai_from_macpi, LightField, MacPI};
use crate::tensor::{Engine, InferEngine, ParamStore, Scalar, TapeEngine};

const LRELU_SLOPE: f64 = 0.1;

/// Full hyperparameter record for a DDASR-family model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    /// Input angular size (square grid).
    pub a_in: usize,
    /// Output angular size; the up-sampling factor is `a_out / a_in`.
    pub a_out: usize,
    /// Feature channels C.
    pub channels: usize,
    /// Blocks per group, e.g. `[2, 2, 6, 2]`.
    pub stage_counts: Vec<usize>,
    /// Attention MLP bottleneck divisor.
    pub attention_reduction: usize,
    pub afeb_layers: usize,
    pub sfeb_layers: usize,
    /// Channel attention at group/top fusions (ablation: plain 1×1 conv).
    pub use_channel_attention: bool,
    /// Kernel of the conv after each AFE (ablation: 1).
    pub afeb_expand_kernel: usize,
    /// Dense connections instead of layer-by-layer concatenation (ablation).
    pub dense_connections: bool,
    /// Literal stride-A² EPI extractor with factor-A² restore.
    pub efe_stride_sq: bool,
    /// Long additive skip from the initial features to the fused trunk.
    pub long_skip: bool,
}

impl NetworkConfig {
    /// The full-size 2×2 → 7×7 network.
    pub fn ddasr() -> Self {
        Self {
            a_in: 2,
            a_out: 7,
            channels: 128,
            stage_counts: vec![2, 2, 6, 2],
            attention_reduction: 4,
            afeb_layers: 3,
            sfeb_layers: 3,
            use_channel_attention: true,
            afeb_expand_kernel: 3,
            dense_connections: false,
            efe_stride_sq: false,
            long_skip: true,
        }
    }

    /// The 2×2 → 3×3 local view network (reduced block counts).
    pub fn ddasr_s() -> Self {
        Self {
            a_out: 3,
            stage_counts: vec![1, 1, 3, 1],
            ..Self::ddasr()
        }
    }

    /// Small test-scale configuration.
    pub fn reduced(channels: usize, stage_counts: Vec<usize>, a_in: usize, a_out: usize) -> Self {
        Self {
            a_in,
            a_out,
            channels,
            stage_counts,
            ..Self::ddasr()
        }
    }

    /// Up-sampling factor α.
    pub fn alpha(&self) -> f64 {
        self.a_out as f64 / self.a_in as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.a_in < 2 {
            return Err(Error::InvalidArg("input angular size must be >= 2".into()));
        }
        if self.a_out == 0 {
            return Err(Error::InvalidArg("output angular size must be >= 1".into()));
        }
        if self.channels == 0 || self.attention_reduction == 0 {
            return Err(Error::InvalidArg("channel widths must be positive".into()));
        }
        if self.channels % self.attention_reduction != 0 {
            return Err(Error::InvalidArg(format!(
                "channels {} must be divisible by the attention reduction {}",
                self.channels, self.attention_reduction
            )));
        }
        if self.stage_counts.is_empty() || self.stage_counts.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArg("stage counts must be nonempty positives".into()));
        }
        if self.afeb_layers == 0 || self.sfeb_layers == 0 {
            return Err(Error::InvalidArg("extraction blocks need at least one layer".into()));
        }
        if self.afeb_expand_kernel % 2 == 0 {
            return Err(Error::InvalidArg("AFEB expansion kernel must be odd".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ConvDef {
    pub path: String,
    pub spec: ConvSpec,
}

impl ConvDef {
    fn new(path: String, spec: ConvSpec) -> Self {
        Self { path, spec }
    }

    fn params(&self) -> u64 {
        self.spec.param_count()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LinearDef {
    pub path: String,
    pub in_f: usize,
    pub out_f: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct AttnDef {
    pub fc1: LinearDef,
    pub fc2: LinearDef,
}

/// `ChnAttn[concat(...)]`: optional channel attention over the concatenated
/// width, then a 1×1 fusion back to C.
#[derive(Debug, Clone)]
pub(crate) struct FusionDef {
    pub attn: Option<AttnDef>,
    pub fuse: ConvDef,
}

impl FusionDef {
    fn new(path: &str, c_cat: usize, c_out: usize, reduction: usize, attention: bool) -> Self {
        let attn = attention.then(|| {
            let hidden = (c_cat / reduction).max(1);
            AttnDef {
                fc1: LinearDef { path: format!("{path}.attn.fc1"), in_f: c_cat, out_f: hidden },
                fc2: LinearDef { path: format!("{path}.attn.fc2"), in_f: hidden, out_f: c_cat },
            }
        });
        Self {
            attn,
            fuse: ConvDef::new(format!("{path}.fuse"), conv1x1_spec(c_cat, c_out)),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AfebStageDef {
    pub afe: ConvDef,
    pub expand: ConvDef,
}

#[derive(Debug, Clone)]
pub(crate) struct AfebDef {
    pub stages: Vec<AfebStageDef>,
    pub fuse: ConvDef,
    pub shuffle: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct SfebDef {
    pub convs: Vec<ConvDef>,
    pub fuse: ConvDef,
}

#[derive(Debug, Clone)]
pub(crate) struct EfeDef {
    pub conv: ConvDef,
    pub expand: ConvDef,
    pub restore: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct DdbDef {
    pub afeb: AfebDef,
    pub efe: EfeDef,
    pub fuse: ConvDef,
    pub sfeb: SfebDef,
}

#[derive(Debug, Clone)]
pub(crate) struct GroupDef {
    pub blocks: Vec<DdbDef>,
    pub fusion: FusionDef,
}

#[derive(Debug, Clone)]
pub(crate) struct HeadDef {
    pub down: ConvDef,
    pub expand: ConvDef,
    pub shuffle: usize,
}

/// Structural description of the whole network, derived from the config.
#[derive(Debug, Clone)]
pub(crate) struct ModelDef {
    pub config: NetworkConfig,
    pub init: ConvDef,
    pub groups: Vec<GroupDef>,
    pub top: FusionDef,
    pub head: HeadDef,
}

impl ModelDef {
    pub fn new(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let a = config.a_in;
        let c = config.channels;
        let dense = config.dense_connections;

        let build_afeb = |path: &str, in_ch: usize| -> Result<AfebDef> {
            let mut stages = Vec::new();
            for s in 0..config.afeb_layers {
                let stage_in = if dense { in_ch + s * c } else if s == 0 { in_ch } else { c };
                let afe = afe_spec(a, stage_in, c)?;
                let k = config.afeb_expand_kernel;
                let expand = ConvSpec {
                    kernel: (k, k),
                    stride: (1, 1),
                    dilation: (1, 1),
                    padding: (k / 2, k / 2),
                    in_channels: c,
                    out_channels: c * a * a,
                };
                stages.push(AfebStageDef {
                    afe: ConvDef::new(format!("{path}.stage{s}.afe"), afe),
                    expand: ConvDef::new(format!("{path}.stage{s}.expand"), expand),
                });
            }
            let cat = if dense { in_ch + config.afeb_layers * c } else { config.afeb_layers * c };
            Ok(AfebDef {
                stages,
                fuse: ConvDef::new(format!("{path}.fuse"), conv1x1_spec(cat, c)),
                shuffle: a,
            })
        };

        let build_sfeb = |path: &str, in_ch: usize| -> SfebDef {
            let mut convs = Vec::new();
            for s in 0..config.sfeb_layers {
                let stage_in = if dense { in_ch + s * c } else if s == 0 { in_ch } else { c };
                convs.push(ConvDef::new(format!("{path}.conv{s}"), sfe_spec(a, stage_in, c)));
            }
            let cat = if dense { in_ch + config.sfeb_layers * c } else { config.sfeb_layers * c };
            SfebDef {
                convs,
                fuse: ConvDef::new(format!("{path}.fuse"), conv1x1_spec(cat, c)),
            }
        };

        let build_ddb = |path: &str, in_ch: usize| -> Result<DdbDef> {
            let espec = efe_spec(a, in_ch, c, EfeOrientation::Horizontal, config.efe_stride_sq)?;
            Ok(DdbDef {
                afeb: build_afeb(&format!("{path}.afeb"), in_ch)?,
                efe: EfeDef {
                    conv: ConvDef::new(format!("{path}.efe.conv"), espec.conv),
                    expand: ConvDef::new(
                        format!("{path}.efe.expand"),
                        conv1x1_spec(c, c * espec.restore_factor),
                    ),
                    restore: espec.restore_factor,
                },
                fuse: ConvDef::new(format!("{path}.fuse"), conv1x1_spec(3 * c, c)),
                sfeb: build_sfeb(&format!("{path}.sfeb"), c),
            })
        };

        let mut groups = Vec::new();
        for (g, &n) in config.stage_counts.iter().enumerate() {
            let gpath = format!("ddbg{g}");
            let mut blocks = Vec::new();
            for i in 0..n {
                let in_ch = if dense { c + i * c } else { c };
                blocks.push(build_ddb(&format!("{gpath}.ddb{i}"), in_ch)?);
            }
            let cat = if dense { c + n * c } else { n * c };
            groups.push(GroupDef {
                blocks,
                fusion: FusionDef::new(&gpath, cat, c, config.attention_reduction, config.use_channel_attention),
            });
        }

        let n_groups = config.stage_counts.len();
        let top_cat = if dense { c + n_groups * c } else { n_groups * c };
        let top = FusionDef::new("top", top_cat, c, config.attention_reduction, config.use_channel_attention);

        let head = HeadDef {
            down: ConvDef::new("head.down".into(), afe_spec(a, c, c)?),
            expand: ConvDef::new(
                "head.expand".into(),
                conv1x1_spec(c, config.a_out * config.a_out),
            ),
            shuffle: config.a_out,
        };

        Ok(Self {
            config: config.clone(),
            init: ConvDef::new("init".into(), sfe_spec(a, 1, c)),
            groups,
            top,
            head,
        })
    }

    /// Visits every parameter as `(path, shape)` in a stable order.
    pub fn for_each_param(&self, mut f: impl FnMut(&str, &[usize])) {
        let conv = |c: &ConvDef, f: &mut dyn FnMut(&str, &[usize])| {
            f(&format!("{}.weight", c.path), &c.spec.weight_shape());
            f(&format!("{}.bias", c.path), &[c.spec.out_channels]);
        };
        let linear = |l: &LinearDef, f: &mut dyn FnMut(&str, &[usize])| {
            f(&format!("{}.weight", l.path), &[l.out_f, l.in_f]);
            f(&format!("{}.bias", l.path), &[l.out_f]);
        };
        let fusion = |fu: &FusionDef, f: &mut dyn FnMut(&str, &[usize])| {
            if let Some(attn) = &fu.attn {
                linear(&attn.fc1, f);
                linear(&attn.fc2, f);
            }
            conv(&fu.fuse, f);
        };

        conv(&self.init, &mut f);
        for g in &self.groups {
            for b in &g.blocks {
                for s in &b.afeb.stages {
                    conv(&s.afe, &mut f);
                    conv(&s.expand, &mut f);
                }
                conv(&b.afeb.fuse, &mut f);
                conv(&b.efe.conv, &mut f);
                conv(&b.efe.expand, &mut f);
                conv(&b.fuse, &mut f);
                for s in &b.sfeb.convs {
                    conv(s, &mut f);
                }
                conv(&b.sfeb.fuse, &mut f);
            }
            fusion(&g.fusion, &mut f);
        }
        fusion(&self.top, &mut f);
        conv(&self.head.down, &mut f);
        conv(&self.head.expand, &mut f);
    }

    /// Parameters inside the DDB trunk only (no group/top fusion stages,
    /// no init/head): invariant under regrouping at a fixed total block
    /// count.
    pub fn block_params(&self) -> u64 {
        let conv = |c: &ConvDef| c.params();
        self.groups
            .iter()
            .flat_map(|g| g.blocks.iter())
            .map(|b| {
                b.afeb.stages.iter().map(|s| conv(&s.afe) + conv(&s.expand)).sum::<u64>()
                    + conv(&b.afeb.fuse)
                    + conv(&b.efe.conv)
                    + conv(&b.efe.expand)
                    + conv(&b.fuse)
                    + b.sfeb.convs.iter().map(conv).sum::<u64>()
                    + conv(&b.sfeb.fuse)
            })
            .sum()
    }
}

/// Exact count of learnable scalars for a configuration.
pub fn param_count(config: &NetworkConfig) -> Result<u64> {
    let def = ModelDef::new(config)?;
    let mut total = 0u64;
    def.for_each_param(|_, shape| total += shape.iter().product::<usize>() as u64);
    Ok(total)
}

/// Trunk-only parameter count (the DDBs themselves).
pub fn param_count_blocks(config: &NetworkConfig) -> Result<u64> {
    Ok(ModelDef::new(config)?.block_params())
}

/// A model: configuration, named weights, and the training step counter.
#[derive(Debug, Clone)]
pub struct ModelState<T: Scalar = f32> {
    pub config: NetworkConfig,
    pub params: ParamStore<T>,
    pub step: u64,
}

impl<T: Scalar> ModelState<T> {
    /// Kaiming-initialized model (fan-in scaling for the leaky-rectifier
    /// slope; biases uniform in ±1/√fan_in).
    pub fn init(config: &NetworkConfig, seed: u64) -> Result<Self> {
        let def = ModelDef::new(config)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let gain = (2.0 / (1.0 + LRELU_SLOPE * LRELU_SLOPE)).sqrt();
        let mut params = ParamStore::new();
        def.for_each_param(|path, shape| {
            let fan_in: usize = if shape.len() >= 2 {
                shape[1..].iter().product()
            } else {
                shape[0]
            };
            let tensor = if path.ends_with(".bias") {
                let bound = 1.0 / (fan_in as f64).sqrt();
                ArrayD::from_shape_fn(IxDyn(shape), |_| {
                    T::from_real(rng.gen_range(-bound..bound))
                })
            } else {
                let bound = gain * (3.0 / fan_in as f64).sqrt();
                ArrayD::from_shape_fn(IxDyn(shape), |_| {
                    T::from_real(rng.gen_range(-bound..bound))
                })
            };
            params.insert(path, tensor);
        });
        Ok(Self { config: config.clone(), params, step: 0 })
    }

    pub(crate) fn def(&self) -> Result<ModelDef> {
        ModelDef::new(&self.config)
    }

    pub fn param_count(&self) -> u64 {
        self.params.total_scalars()
    }
}

fn run_conv<T: Scalar, E: Engine<T>>(e: &mut E, c: &ConvDef, x: &E::V) -> E::V {
    let w = e.param(&format!("{}.weight", c.path));
    let b = e.param(&format!("{}.bias", c.path));
    e.conv2d(x, &w, Some(&b), &c.spec)
}

fn run_conv_act<T: Scalar, E: Engine<T>>(e: &mut E, c: &ConvDef, x: &E::V) -> E::V {
    let y = run_conv(e, c, x);
    e.leaky_relu(&y, T::from_real(LRELU_SLOPE))
}

fn afeb_forward<T: Scalar, E: Engine<T>>(e: &mut E, def: &AfebDef, dense: bool, x: &E::V) -> E::V {
    let mut outs: Vec<E::V> = Vec::with_capacity(def.stages.len());
    for (s, stage) in def.stages.iter().enumerate() {
        let input = if dense {
            let mut parts = vec![x.clone()];
            parts.extend(outs.iter().cloned());
            if parts.len() == 1 { parts[0].clone() } else { e.concat_c(&parts) }
        } else if s == 0 {
            x.clone()
        } else {
            outs[s - 1].clone()
        };
        let reduced = run_conv_act(e, &stage.afe, &input);
        let expanded = run_conv_act(e, &stage.expand, &reduced);
        let restored = e.pixel_shuffle2(&expanded, def.shuffle);
        outs.push(restored);
    }
    let cat = if dense {
        let mut parts = vec![x.clone()];
        parts.extend(outs);
        e.concat_c(&parts)
    } else if outs.len() == 1 {
        outs.pop().unwrap()
    } else {
        e.concat_c(&outs)
    };
    run_conv(e, &def.fuse, &cat)
}

fn sfeb_forward<T: Scalar, E: Engine<T>>(e: &mut E, def: &SfebDef, dense: bool, x: &E::V) -> E::V {
    let mut outs: Vec<E::V> = Vec::with_capacity(def.convs.len());
    for (s, conv) in def.convs.iter().enumerate() {
        let input = if dense {
            let mut parts = vec![x.clone()];
            parts.extend(outs.iter().cloned());
            if parts.len() == 1 { parts[0].clone() } else { e.concat_c(&parts) }
        } else if s == 0 {
            x.clone()
        } else {
            outs[s - 1].clone()
        };
        outs.push(run_conv_act(e, conv, &input));
    }
    let cat = if dense {
        let mut parts = vec![x.clone()];
        parts.extend(outs);
        e.concat_c(&parts)
    } else if outs.len() == 1 {
        outs.pop().unwrap()
    } else {
        e.concat_c(&outs)
    };
    run_conv(e, &def.fuse, &cat)
}

fn efe_forward<T: Scalar, E: Engine<T>>(
    e: &mut E,
    def: &EfeDef,
    x: &E::V,
    orientation: EfeOrientation,
) -> E::V {
    let input = match orientation {
        EfeOrientation::Horizontal => x.clone(),
        EfeOrientation::Vertical => e.transpose_hw(x),
    };
    let y = run_conv_act(e, &def.conv, &input);
    let expanded = run_conv(e, &def.expand, &y);
    let restored = e.pixel_shuffle_w(&expanded, def.restore);
    match orientation {
        EfeOrientation::Horizontal => restored,
        EfeOrientation::Vertical => e.transpose_hw(&restored),
    }
}

fn fusion_forward<T: Scalar, E: Engine<T>>(e: &mut E, def: &FusionDef, cat: &E::V) -> E::V {
    let gated = if let Some(attn) = &def.attn {
        let pooled = e.global_avg_pool(cat);
        let w1 = e.param(&format!("{}.weight", attn.fc1.path));
        let b1 = e.param(&format!("{}.bias", attn.fc1.path));
        let h = e.linear(&pooled, &w1, &b1);
        let h = e.leaky_relu(&h, T::zero());
        let w2 = e.param(&format!("{}.weight", attn.fc2.path));
        let b2 = e.param(&format!("{}.bias", attn.fc2.path));
        let gates = e.linear(&h, &w2, &b2);
        let gates = e.sigmoid(&gates);
        e.scale_channels(cat, &gates)
    } else {
        cat.clone()
    };
    run_conv(e, &def.fuse, &gated)
}

fn ddb_forward<T: Scalar, E: Engine<T>>(e: &mut E, def: &DdbDef, dense: bool, x: &E::V) -> E::V {
    let ang = afeb_forward(e, &def.afeb, dense, x);
    let epi_h = efe_forward(e, &def.efe, x, EfeOrientation::Horizontal);
    let epi_v = efe_forward(e, &def.efe, x, EfeOrientation::Vertical);
    let cat = e.concat_c(&[ang, epi_h, epi_v]);
    let fusion = run_conv(e, &def.fuse, &cat);
    let spatial = sfeb_forward(e, &def.sfeb, dense, &fusion);
    e.add(&spatial, &fusion)
}

fn group_forward<T: Scalar, E: Engine<T>>(e: &mut E, def: &GroupDef, dense: bool, x: &E::V) -> E::V {
    let mut outs: Vec<E::V> = Vec::with_capacity(def.blocks.len());
    for (i, block) in def.blocks.iter().enumerate() {
        let input = if dense {
            let mut parts = vec![x.clone()];
            parts.extend(outs.iter().cloned());
            if parts.len() == 1 { parts[0].clone() } else { e.concat_c(&parts) }
        } else if i == 0 {
            x.clone()
        } else {
            outs[i - 1].clone()
        };
        outs.push(ddb_forward(e, block, dense, &input));
    }
    let cat = if dense {
        let mut parts = vec![x.clone()];
        parts.extend(outs);
        e.concat_c(&parts)
    } else if outs.len() == 1 {
        outs.pop().unwrap()
    } else {
        e.concat_c(&outs)
    };
    fusion_forward(e, &def.fusion, &cat)
}

/// Engine-generic forward pass on a MacPI batch `[N, 1, A·H, A·W]`,
/// producing the unclamped output MacPI batch
/// `[N, 1, A_out·H, A_out·W]`.
pub(crate) fn forward_macpi_engine<T: Scalar, E: Engine<T>>(
    def: &ModelDef,
    e: &mut E,
    x: &E::V,
) -> E::V {
    let dense = def.config.dense_connections;
    let x0 = run_conv_act(e, &def.init, x);
    let mut outs: Vec<E::V> = Vec::with_capacity(def.groups.len());
    let mut cur = x0.clone();
    for g in &def.groups {
        cur = group_forward(e, g, dense, &cur);
        outs.push(cur.clone());
    }
    let cat = if dense {
        let mut parts = vec![x0.clone()];
        parts.extend(outs);
        e.concat_c(&parts)
    } else {
        e.concat_c(&outs)
    };
    let fused = fusion_forward(e, &def.top, &cat);
    let trunk = if def.config.long_skip { e.add(&fused, &x0) } else { fused };
    let down = run_conv_act(e, &def.head.down, &trunk);
    let expanded = run_conv(e, &def.head.expand, &down);
    e.pixel_shuffle2(&expanded, def.head.shuffle)
}

/// Validates and shapes a sparse input field into a `[1, 1, A·H, A·W]`
/// MacPI batch of the engine's scalar type.
fn macpi_batch_from_lf<T: Scalar>(lf: &LightField, a_in: usize) -> Result<ArrayD<T>> {
    let a = lf.angular_size()?;
    if a != a_in {
        return Err(Error::Shape(format!(
            "input angular size {a} does not match the model's {a_in}"
        )));
    }
    let m = macpi_from_sai(lf)?;
    let (r, c) = m.pixels().dim();
    let mut out = ArrayD::<T>::zeros(IxDyn(&[1, 1, r, c]));
    for ((i, j), &v) in m.pixels().indexed_iter() {
        out[[0, 0, i, j]] = T::from_real(v as f64);
    }
    Ok(out)
}

/// Unclamped inference on a MacPI batch (used by training, the traversal
/// strategy, and tests).
pub fn forward_macpi<T: Scalar>(model: &ModelState<T>, x: &ArrayD<T>) -> Result<ArrayD<T>> {
    let def = model.def()?;
    let mut e = InferEngine::new(&model.params);
    let xin = e.input(x.clone());
    let y = forward_macpi_engine(&def, &mut e, &xin);
    Ok(e.array(&y))
}

/// Full inference: sparse field in, dense field out, clamped to `[0, 1]`.
pub fn ddasr_forward<T: Scalar>(lf_sparse: &LightField, model: &ModelState<T>) -> Result<LightField> {
    let x = macpi_batch_from_lf::<T>(lf_sparse, model.config.a_in)?;
    let y = forward_macpi(model, &x)?;
    let sh = y.shape().to_vec();
    let mut pixels = ndarray::Array2::<f32>::zeros((sh[2], sh[3]));
    for ((i, j), p) in pixels.indexed_iter_mut() {
        *p = y[[0, 0, i, j]].to_f64() as f32;
    }
    let m = MacPI::new(
        pixels.mapv(|v| v.clamp(0.0, 1.0)),
        model.config.a_out,
    )?;
    Ok(sai_from_macpi(&m))
}

/// L1 training loss of one batch, without gradients.
pub fn l1_training_loss<T: Scalar>(
    model: &ModelState<T>,
    input: &ArrayD<T>,
    target: &ArrayD<T>,
) -> Result<T> {
    let def = model.def()?;
    let mut e = InferEngine::new(&model.params);
    let x = e.input(input.clone());
    let y = forward_macpi_engine(&def, &mut e, &x);
    let t = e.input(target.clone());
    let loss = e.l1_loss(&y, &t);
    Ok(e.array(&loss)[[]])
}

/// L1 training loss plus gradients for every parameter, via the tape.
pub fn l1_training_loss_and_grads<T: Scalar>(
    model: &ModelState<T>,
    input: &ArrayD<T>,
    target: &ArrayD<T>,
) -> Result<(T, ParamStore<T>)> {
    let def = model.def()?;
    let mut e = TapeEngine::new(&model.params);
    let x = e.input(input.clone());
    let y = forward_macpi_engine(&def, &mut e, &x);
    let t = e.input(target.clone());
    let loss = e.l1_loss(&y, &t);
    let grads = e.backward(loss);
    let mut store = ParamStore::new();
    def.for_each_param(|path, shape| {
        let g = e
            .param_grad(&grads, path)
            .cloned()
            .unwrap_or_else(|| ArrayD::zeros(IxDyn(shape)));
        store.insert(path, g);
    });
    Ok((e.array(&loss)[[]], store))
}
