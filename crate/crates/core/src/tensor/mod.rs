//! Minimal reverse-mode tensor engine behind the network.
//!
//! Forward code is written once against the [`Engine`] trait and runs in two
//! modes: [`InferEngine`] evaluates eagerly and frees intermediates as their
//! reference counts drop, while [`TapeEngine`] records every op on a tape
//! for exact reverse-mode differentiation. The element type is generic over
//! [`Scalar`] (`f32` in production, `f64` for finite-difference oracles).

pub mod kernels;

use std::collections::HashMap;
use std::rc::Rc;

use ndarray::ArrayD;

use crate::disentangle::ConvSpec;

/// Element types the engine runs on.
pub trait Scalar:
    ndarray::LinalgScalar
    + num_traits::Float
    + num_traits::FromPrimitive
    + ndarray::ScalarOperand
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
{
    fn from_real(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("scalar conversion")
    }
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn to_f64(self) -> f64 {
        self
    }
}

/// Ordered collection of named weight tensors. Iteration order is insertion
/// order, which the model definition makes deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T: Scalar> {
    names: Vec<String>,
    index: HashMap<String, usize>,
    tensors: Vec<ArrayD<T>>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self { names: Vec::new(), index: HashMap::new(), tensors: Vec::new() }
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: impl Into<String>, tensor: ArrayD<T>) {
        let path = path.into();
        assert!(
            !self.index.contains_key(&path),
            "duplicate parameter path {path}"
        );
        self.index.insert(path.clone(), self.tensors.len());
        self.names.push(path);
        self.tensors.push(tensor);
    }

    pub fn get(&self, path: &str) -> Option<&ArrayD<T>> {
        self.index.get(path).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut ArrayD<T>> {
        self.index.get(path).map(|&i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ArrayD<T>)> {
        self.names.iter().map(|n| n.as_str()).zip(self.tensors.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut ArrayD<T>)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.tensors.iter_mut())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of learnable scalars.
    pub fn total_scalars(&self) -> u64 {
        self.tensors.iter().map(|t| t.len() as u64).sum()
    }
}

/// Forward-pass vocabulary shared by inference and training.
pub trait Engine<T: Scalar> {
    type V: Clone;

    /// Registers an input/constant tensor.
    fn input(&mut self, x: ArrayD<T>) -> Self::V;
    /// Fetches a named parameter. Repeated fetches of the same path alias
    /// the same node, so shared weights accumulate gradients together.
    fn param(&mut self, path: &str) -> Self::V;
    fn conv2d(&mut self, x: &Self::V, w: &Self::V, b: Option<&Self::V>, spec: &ConvSpec) -> Self::V;
    fn linear(&mut self, x: &Self::V, w: &Self::V, b: &Self::V) -> Self::V;
    fn leaky_relu(&mut self, x: &Self::V, slope: T) -> Self::V;
    fn sigmoid(&mut self, x: &Self::V) -> Self::V;
    fn global_avg_pool(&mut self, x: &Self::V) -> Self::V;
    fn scale_channels(&mut self, x: &Self::V, gates: &Self::V) -> Self::V;
    fn concat_c(&mut self, xs: &[Self::V]) -> Self::V;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn pixel_shuffle2(&mut self, x: &Self::V, r: usize) -> Self::V;
    fn pixel_shuffle_w(&mut self, x: &Self::V, r: usize) -> Self::V;
    fn transpose_hw(&mut self, x: &Self::V) -> Self::V;
    fn l1_loss(&mut self, pred: &Self::V, target: &Self::V) -> Self::V;
    /// Materializes a value.
    fn array(&self, v: &Self::V) -> ArrayD<T>;
    fn shape(&self, v: &Self::V) -> Vec<usize>;
}

/// Eager engine: no tape, intermediates free as soon as unreferenced.
pub struct InferEngine<'a, T: Scalar> {
    params: &'a ParamStore<T>,
    cached: HashMap<String, Rc<ArrayD<T>>>,
}

impl<'a, T: Scalar> InferEngine<'a, T> {
    pub fn new(params: &'a ParamStore<T>) -> Self {
        Self { params, cached: HashMap::new() }
    }
}

impl<T: Scalar> Engine<T> for InferEngine<'_, T> {
    type V = Rc<ArrayD<T>>;

    fn input(&mut self, x: ArrayD<T>) -> Self::V {
        Rc::new(x)
    }

    fn param(&mut self, path: &str) -> Self::V {
        if let Some(v) = self.cached.get(path) {
            return v.clone();
        }
        let t = self
            .params
            .get(path)
            .unwrap_or_else(|| panic!("unknown parameter path {path}"));
        let rc = Rc::new(t.clone());
        self.cached.insert(path.to_string(), rc.clone());
        rc
    }

    fn conv2d(&mut self, x: &Self::V, w: &Self::V, b: Option<&Self::V>, spec: &ConvSpec) -> Self::V {
        Rc::new(kernels::conv2d_fwd(x, w, b.map(|b| &**b), spec))
    }

    fn linear(&mut self, x: &Self::V, w: &Self::V, b: &Self::V) -> Self::V {
        Rc::new(kernels::linear_fwd(x, w, b))
    }

    fn leaky_relu(&mut self, x: &Self::V, slope: T) -> Self::V {
        Rc::new(kernels::leaky_relu_fwd(x, slope))
    }

    fn sigmoid(&mut self, x: &Self::V) -> Self::V {
        Rc::new(kernels::sigmoid_fwd(x))
    }

    fn global_avg_pool(&mut self, x: &Self::V) -> Self::V {
        Rc::new(kernels::global_avg_pool_fwd(x))
    }

    fn scale_channels(&mut self, x: &Self::V, gates: &Self::V) -> Self::V {
        Rc::new(kernels::scale_channels_fwd(x, gates))
    }

    fn concat_c(&mut self, xs: &[Self::V]) -> Self::V {
        let refs: Vec<&ArrayD<T>> = xs.iter().map(|x| &**x).collect();
        Rc::new(kernels::concat_c(&refs))
    }

    fn add(&mut self, a: &Self::V, b: &Self::V) -> Self::V {
        Rc::new(&**a + &**b)
    }

    fn pixel_shuffle2(&mut self, x: &Self::V, r: usize) -> Self::V {
        Rc::new(kernels::pixel_shuffle2_fwd(x, r))
    }

    fn pixel_shuffle_w(&mut self, x: &Self::V, r: usize) -> Self::V {
        Rc::new(kernels::pixel_shuffle_w_fwd(x, r))
    }

    fn transpose_hw(&mut self, x: &Self::V) -> Self::V {
        Rc::new(kernels::transpose_hw(x))
    }

    fn l1_loss(&mut self, pred: &Self::V, target: &Self::V) -> Self::V {
        Rc::new(kernels::l1_loss_fwd(pred, target))
    }

    fn array(&self, v: &Self::V) -> ArrayD<T> {
        (**v).clone()
    }

    fn shape(&self, v: &Self::V) -> Vec<usize> {
        v.shape().to_vec()
    }
}

/// Node handle on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv2d { x: usize, w: usize, b: Option<usize>, spec: ConvSpec },
    Linear { x: usize, w: usize, b: usize },
    LeakyRelu { x: usize, slope: f64 },
    Sigmoid { x: usize },
    GlobalAvgPool { x: usize, hw: (usize, usize) },
    ScaleChannels { x: usize, gates: usize },
    ConcatC { xs: Vec<usize>, widths: Vec<usize> },
    Add { a: usize, b: usize },
    PixelShuffle2 { x: usize, r: usize },
    PixelShuffleW { x: usize, r: usize },
    TransposeHw { x: usize },
    L1Loss { a: usize, b: usize },
}

/// Gradients keyed by tape node, produced by [`TapeEngine::backward`].
pub struct Grads<T: Scalar> {
    slots: Vec<Option<ArrayD<T>>>,
}

impl<T: Scalar> Grads<T> {
    pub fn of(&self, v: ValueId) -> Option<&ArrayD<T>> {
        self.slots[v.0].as_ref()
    }
}

/// Recording engine for reverse-mode differentiation.
pub struct TapeEngine<'a, T: Scalar> {
    params: &'a ParamStore<T>,
    vals: Vec<ArrayD<T>>,
    ops: Vec<Op>,
    param_ids: HashMap<String, usize>,
}

impl<'a, T: Scalar> TapeEngine<'a, T> {
    pub fn new(params: &'a ParamStore<T>) -> Self {
        Self { params, vals: Vec::new(), ops: Vec::new(), param_ids: HashMap::new() }
    }

    fn push(&mut self, op: Op, val: ArrayD<T>) -> ValueId {
        let id = self.vals.len();
        self.vals.push(val);
        self.ops.push(op);
        ValueId(id)
    }

    fn val(&self, id: usize) -> &ArrayD<T> {
        &self.vals[id]
    }

    /// Reverse pass seeding `d(at)/d(at) = 1` (requires a scalar node).
    pub fn backward(&self, at: ValueId) -> Grads<T> {
        assert!(self.vals[at.0].len() == 1, "backward() expects a scalar loss");
        let seed = ArrayD::from_elem(self.vals[at.0].raw_dim(), T::one());
        self.backward_with_seed(at, seed)
    }

    /// Reverse pass from an arbitrary output cotangent (used by the
    /// receptive-field probes).
    pub fn backward_with_seed(&self, at: ValueId, seed: ArrayD<T>) -> Grads<T> {
        assert_eq!(seed.shape(), self.vals[at.0].shape(), "seed shape");
        let mut slots: Vec<Option<ArrayD<T>>> = vec![None; self.vals.len()];
        slots[at.0] = Some(seed);

        fn accum<T: Scalar>(slots: &mut [Option<ArrayD<T>>], id: usize, g: ArrayD<T>) {
            match &mut slots[id] {
                Some(cur) => *cur = &*cur + &g,
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..self.ops.len()).rev() {
            let Some(gout) = slots[i].clone() else { continue };
            match &self.ops[i] {
                Op::Leaf => {}
                Op::Conv2d { x, w, b, spec } => {
                    let (gx, gw, gb) = kernels::conv2d_bwd(self.val(*x), self.val(*w), spec, &gout);
                    accum(&mut slots, *x, gx);
                    accum(&mut slots, *w, gw);
                    if let Some(b) = b {
                        accum(&mut slots, *b, gb);
                    }
                }
                Op::Linear { x, w, b } => {
                    let (gx, gw, gb) = kernels::linear_bwd(self.val(*x), self.val(*w), &gout);
                    accum(&mut slots, *x, gx);
                    accum(&mut slots, *w, gw);
                    accum(&mut slots, *b, gb);
                }
                Op::LeakyRelu { x, slope } => {
                    let gx = kernels::leaky_relu_bwd(self.val(*x), T::from_real(*slope), &gout);
                    accum(&mut slots, *x, gx);
                }
                Op::Sigmoid { x } => {
                    let gx = kernels::sigmoid_bwd(self.val(i), &gout);
                    accum(&mut slots, *x, gx);
                }
                Op::GlobalAvgPool { x, hw } => {
                    let gx = kernels::global_avg_pool_bwd(&gout, *hw);
                    accum(&mut slots, *x, gx);
                }
                Op::ScaleChannels { x, gates } => {
                    let (gx, gg) =
                        kernels::scale_channels_bwd(self.val(*x), self.val(*gates), &gout);
                    accum(&mut slots, *x, gx);
                    accum(&mut slots, *gates, gg);
                }
                Op::ConcatC { xs, widths } => {
                    let mut lo = 0;
                    for (xi, wd) in xs.iter().zip(widths.iter()) {
                        let part = gout
                            .slice_axis(ndarray::Axis(1), ndarray::Slice::from(lo..lo + wd))
                            .to_owned();
                        accum(&mut slots, *xi, part);
                        lo += wd;
                    }
                }
                Op::Add { a, b } => {
                    accum(&mut slots, *a, gout.clone());
                    accum(&mut slots, *b, gout);
                }
                Op::PixelShuffle2 { x, r } => {
                    accum(&mut slots, *x, kernels::pixel_shuffle2_bwd(&gout, *r));
                }
                Op::PixelShuffleW { x, r } => {
                    accum(&mut slots, *x, kernels::pixel_shuffle_w_bwd(&gout, *r));
                }
                Op::TransposeHw { x } => {
                    accum(&mut slots, *x, kernels::transpose_hw(&gout));
                }
                Op::L1Loss { a, b } => {
                    let g = gout[[]];
                    let (ga, gb) = kernels::l1_loss_bwd(self.val(*a), self.val(*b), g);
                    accum(&mut slots, *a, ga);
                    accum(&mut slots, *b, gb);
                }
            }
        }
        Grads { slots }
    }

    /// Gradient of a named parameter after [`Self::backward`].
    pub fn param_grad<'g>(&self, grads: &'g Grads<T>, path: &str) -> Option<&'g ArrayD<T>> {
        self.param_ids.get(path).and_then(|&id| grads.slots[id].as_ref())
    }

    /// Paths of every parameter touched by the recorded forward pass.
    pub fn touched_params(&self) -> impl Iterator<Item = &str> {
        self.param_ids.keys().map(|s| s.as_str())
    }
}

impl<T: Scalar> Engine<T> for TapeEngine<'_, T> {
    type V = ValueId;

    fn input(&mut self, x: ArrayD<T>) -> ValueId {
        self.push(Op::Leaf, x)
    }

    fn param(&mut self, path: &str) -> ValueId {
        if let Some(&id) = self.param_ids.get(path) {
            return ValueId(id);
        }
        let t = self
            .params
            .get(path)
            .unwrap_or_else(|| panic!("unknown parameter path {path}"))
            .clone();
        let id = self.push(Op::Leaf, t);
        self.param_ids.insert(path.to_string(), id.0);
        id
    }

    fn conv2d(&mut self, x: &ValueId, w: &ValueId, b: Option<&ValueId>, spec: &ConvSpec) -> ValueId {
        let out = kernels::conv2d_fwd(
            self.val(x.0),
            self.val(w.0),
            b.map(|b| self.val(b.0)),
            spec,
        );
        self.push(Op::Conv2d { x: x.0, w: w.0, b: b.map(|b| b.0), spec: spec.clone() }, out)
    }

    fn linear(&mut self, x: &ValueId, w: &ValueId, b: &ValueId) -> ValueId {
        let out = kernels::linear_fwd(self.val(x.0), self.val(w.0), self.val(b.0));
        self.push(Op::Linear { x: x.0, w: w.0, b: b.0 }, out)
    }

    fn leaky_relu(&mut self, x: &ValueId, slope: T) -> ValueId {
        let out = kernels::leaky_relu_fwd(self.val(x.0), slope);
        self.push(Op::LeakyRelu { x: x.0, slope: slope.to_f64() }, out)
    }

    fn sigmoid(&mut self, x: &ValueId) -> ValueId {
        let out = kernels::sigmoid_fwd(self.val(x.0));
        self.push(Op::Sigmoid { x: x.0 }, out)
    }

    fn global_avg_pool(&mut self, x: &ValueId) -> ValueId {
        let v = self.val(x.0);
        let hw = (v.shape()[2], v.shape()[3]);
        let out = kernels::global_avg_pool_fwd(v);
        self.push(Op::GlobalAvgPool { x: x.0, hw }, out)
    }

    fn scale_channels(&mut self, x: &ValueId, gates: &ValueId) -> ValueId {
        let out = kernels::scale_channels_fwd(self.val(x.0), self.val(gates.0));
        self.push(Op::ScaleChannels { x: x.0, gates: gates.0 }, out)
    }

    fn concat_c(&mut self, xs: &[ValueId]) -> ValueId {
        let refs: Vec<&ArrayD<T>> = xs.iter().map(|x| self.val(x.0)).collect();
        let widths: Vec<usize> = refs.iter().map(|r| r.shape()[1]).collect();
        let out = kernels::concat_c(&refs);
        self.push(Op::ConcatC { xs: xs.iter().map(|x| x.0).collect(), widths }, out)
    }

    fn add(&mut self, a: &ValueId, b: &ValueId) -> ValueId {
        let out = self.val(a.0) + self.val(b.0);
        self.push(Op::Add { a: a.0, b: b.0 }, out)
    }

    fn pixel_shuffle2(&mut self, x: &ValueId, r: usize) -> ValueId {
        let out = kernels::pixel_shuffle2_fwd(self.val(x.0), r);
        self.push(Op::PixelShuffle2 { x: x.0, r }, out)
    }

    fn pixel_shuffle_w(&mut self, x: &ValueId, r: usize) -> ValueId {
        let out = kernels::pixel_shuffle_w_fwd(self.val(x.0), r);
        self.push(Op::PixelShuffleW { x: x.0, r }, out)
    }

    fn transpose_hw(&mut self, x: &ValueId) -> ValueId {
        let out = kernels::transpose_hw(self.val(x.0));
        self.push(Op::TransposeHw { x: x.0 }, out)
    }

    fn l1_loss(&mut self, pred: &ValueId, target: &ValueId) -> ValueId {
        let out = kernels::l1_loss_fwd(self.val(pred.0), self.val(target.0));
        self.push(Op::L1Loss { a: pred.0, b: target.0 }, out)
    }

    fn array(&self, v: &ValueId) -> ArrayD<T> {
        self.vals[v.0].clone()
    }

    fn shape(&self, v: &ValueId) -> Vec<usize> {
        self.vals[v.0].shape().to_vec()
    }
}
