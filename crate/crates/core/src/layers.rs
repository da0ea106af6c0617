//! Layer kernels and reverse-mode differentiation.
//!
//! A forward pass applies layers one by one, recording what each needs for
//! its backward rule on a [`Tape`]. The tape is a linear chain: each layer
//! consumes the previous layer's output. Branching graphs (a trunk feeding
//! several heads) are composed from multiple tapes by seeding one tape's
//! backward with another's input gradient.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::scalar::Real;
use crate::tensor::Tensor;

pub const BATCHNORM_EPS: f64 = 1e-5;
pub const BATCHNORM_MOMENTUM: f64 = 0.9;
pub const DEFAULT_LRELU_SLOPE: f32 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d,
    Deconv2d,
    FullyConnected,
    Embedding,
    Relu,
    LRelu,
    Tanh,
    Sigmoid,
    Softmax,
    BatchNorm,
}

impl LayerKind {
    pub fn has_kernel(self) -> bool {
        matches!(self, LayerKind::Conv2d | LayerKind::Deconv2d)
    }
}

/// Declarative layer description. Output shape is a pure function of the
/// input shape and this spec.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Parameter name prefix; empty for parameter-free layers.
    pub name: String,
    pub kernel: Option<(usize, usize)>,
    pub stride: Option<usize>,
    pub in_channels: Option<usize>,
    pub out_channels: Option<usize>,
    /// Explicit output spatial size for deconv2d. Transposed convolutions do
    /// not have a unique output size for a given kernel/stride, so the spec
    /// carries the target directly.
    pub out_size: Option<(usize, usize)>,
    /// Negative-side slope for lrelu.
    pub slope: Option<f32>,
}

impl LayerSpec {
    fn bare(kind: LayerKind) -> Self {
        LayerSpec {
            kind,
            name: String::new(),
            kernel: None,
            stride: None,
            in_channels: None,
            out_channels: None,
            out_size: None,
            slope: None,
        }
    }

    pub fn conv2d(name: &str, kernel: usize, stride: usize, in_ch: usize, out_ch: usize) -> Self {
        LayerSpec {
            name: name.to_string(),
            kernel: Some((kernel, kernel)),
            stride: Some(stride),
            in_channels: Some(in_ch),
            out_channels: Some(out_ch),
            ..Self::bare(LayerKind::Conv2d)
        }
    }

    pub fn deconv2d(
        name: &str,
        kernel: usize,
        stride: usize,
        in_ch: usize,
        out_ch: usize,
        out_size: (usize, usize),
    ) -> Self {
        LayerSpec {
            name: name.to_string(),
            kernel: Some((kernel, kernel)),
            stride: Some(stride),
            in_channels: Some(in_ch),
            out_channels: Some(out_ch),
            out_size: Some(out_size),
            ..Self::bare(LayerKind::Deconv2d)
        }
    }

    pub fn fully_connected(name: &str, in_features: usize, out_features: usize) -> Self {
        LayerSpec {
            name: name.to_string(),
            in_channels: Some(in_features),
            out_channels: Some(out_features),
            ..Self::bare(LayerKind::FullyConnected)
        }
    }

    /// Affine embedding of a concatenated (noise, labels) vector.
    pub fn embedding(name: &str, in_features: usize, out_features: usize) -> Self {
        LayerSpec {
            name: name.to_string(),
            in_channels: Some(in_features),
            out_channels: Some(out_features),
            ..Self::bare(LayerKind::Embedding)
        }
    }

    pub fn relu() -> Self {
        Self::bare(LayerKind::Relu)
    }

    pub fn lrelu(slope: f32) -> Self {
        LayerSpec {
            slope: Some(slope),
            ..Self::bare(LayerKind::LRelu)
        }
    }

    pub fn tanh() -> Self {
        Self::bare(LayerKind::Tanh)
    }

    pub fn sigmoid() -> Self {
        Self::bare(LayerKind::Sigmoid)
    }

    pub fn softmax() -> Self {
        Self::bare(LayerKind::Softmax)
    }

    pub fn batchnorm(name: &str, channels: usize) -> Self {
        LayerSpec {
            name: name.to_string(),
            in_channels: Some(channels),
            out_channels: Some(channels),
            ..Self::bare(LayerKind::BatchNorm)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let needs_kernel = self.kind.has_kernel();
        if needs_kernel != (self.kernel.is_some() && self.stride.is_some()) {
            return Err(Error::InvalidSpec(format!(
                "{:?}: kernel/stride must be present iff conv2d or deconv2d",
                self.kind
            )));
        }
        if self.kind == LayerKind::Deconv2d && self.out_size.is_none() {
            return Err(Error::InvalidSpec("deconv2d requires out_size".into()));
        }
        if self.kind == LayerKind::LRelu && self.slope.is_none() {
            return Err(Error::InvalidSpec("lrelu requires slope".into()));
        }
        if matches!(
            self.kind,
            LayerKind::Conv2d
                | LayerKind::Deconv2d
                | LayerKind::FullyConnected
                | LayerKind::Embedding
                | LayerKind::BatchNorm
        ) {
            if self.in_channels.is_none() || self.out_channels.is_none() {
                return Err(Error::InvalidSpec(format!(
                    "{:?} requires in/out channels",
                    self.kind
                )));
            }
            if self.name.is_empty() {
                return Err(Error::InvalidSpec(format!(
                    "{:?} requires a parameter name",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    /// Output shape for a batched input `[B, ...]`.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        match self.kind {
            LayerKind::Conv2d => {
                let (b, h, w, c) = unpack_nhwc(input)?;
                let ic = self.in_channels.unwrap();
                if c != ic {
                    return Err(Error::ShapeMismatch(format!(
                        "conv2d `{}` expects {ic} channels, input has {c}",
                        self.name
                    )));
                }
                let s = self.stride.unwrap();
                let oh = div_ceil(h, s);
                let ow = div_ceil(w, s);
                Ok(vec![b, oh, ow, self.out_channels.unwrap()])
            }
            LayerKind::Deconv2d => {
                let (b, h, w, c) = unpack_nhwc(input)?;
                let ic = self.in_channels.unwrap();
                if c != ic {
                    return Err(Error::ShapeMismatch(format!(
                        "deconv2d `{}` expects {ic} channels, input has {c}",
                        self.name
                    )));
                }
                let (kh, kw) = self.kernel.unwrap();
                let s = self.stride.unwrap();
                let (oh, ow) = self.out_size.unwrap();
                for (i, k, o) in [(h, kh, oh), (w, kw, ow)] {
                    let reach = (i - 1) * s + k;
                    if reach < o || reach - o > 2 * (k - 1) {
                        return Err(Error::InvalidSpec(format!(
                            "deconv2d `{}`: output {o} unreachable from input {i} with kernel {k} stride {s}",
                            self.name
                        )));
                    }
                }
                Ok(vec![b, oh, ow, self.out_channels.unwrap()])
            }
            LayerKind::FullyConnected | LayerKind::Embedding => {
                if input.len() < 2 {
                    return Err(Error::ShapeMismatch(
                        "affine layer needs a batched input".into(),
                    ));
                }
                let b = input[0];
                let f: usize = input[1..].iter().product();
                let in_f = self.in_channels.unwrap();
                if f != in_f {
                    return Err(Error::ShapeMismatch(format!(
                        "affine `{}` expects {in_f} features, input flattens to {f}",
                        self.name
                    )));
                }
                Ok(vec![b, self.out_channels.unwrap()])
            }
            LayerKind::BatchNorm => {
                let c = *input.last().ok_or_else(|| {
                    Error::ShapeMismatch("batchnorm needs a non-scalar input".into())
                })?;
                if c != self.in_channels.unwrap() {
                    return Err(Error::ShapeMismatch(format!(
                        "batchnorm `{}` expects {} channels, input has {c}",
                        self.name,
                        self.in_channels.unwrap()
                    )));
                }
                Ok(input.to_vec())
            }
            LayerKind::Relu | LayerKind::LRelu | LayerKind::Tanh | LayerKind::Sigmoid => {
                Ok(input.to_vec())
            }
            LayerKind::Softmax => {
                if input.is_empty() {
                    return Err(Error::ShapeMismatch("softmax needs a non-empty shape".into()));
                }
                Ok(input.to_vec())
            }
        }
    }

    /// Parameter names and shapes this layer owns.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        match self.kind {
            LayerKind::Conv2d | LayerKind::Deconv2d => {
                let (kh, kw) = self.kernel.unwrap();
                let ic = self.in_channels.unwrap();
                let oc = self.out_channels.unwrap();
                vec![
                    (format!("{}.w", self.name), vec![kh, kw, ic, oc]),
                    (format!("{}.b", self.name), vec![oc]),
                ]
            }
            LayerKind::FullyConnected | LayerKind::Embedding => {
                let i = self.in_channels.unwrap();
                let o = self.out_channels.unwrap();
                vec![
                    (format!("{}.w", self.name), vec![i, o]),
                    (format!("{}.b", self.name), vec![o]),
                ]
            }
            LayerKind::BatchNorm => {
                let c = self.in_channels.unwrap();
                vec![
                    (format!("{}.gamma", self.name), vec![c]),
                    (format!("{}.beta", self.name), vec![c]),
                    (format!("{}.rmean", self.name), vec![c]),
                    (format!("{}.rvar", self.name), vec![c]),
                ]
            }
            _ => vec![],
        }
    }

    /// (fan_in, fan_out) for scale-stable uniform init; `None` for
    /// parameter-free layers and batchnorm.
    pub fn fans(&self) -> Option<(usize, usize)> {
        match self.kind {
            LayerKind::Conv2d | LayerKind::Deconv2d => {
                let (kh, kw) = self.kernel.unwrap();
                Some((
                    kh * kw * self.in_channels.unwrap(),
                    kh * kw * self.out_channels.unwrap(),
                ))
            }
            LayerKind::FullyConnected | LayerKind::Embedding => {
                Some((self.in_channels.unwrap(), self.out_channels.unwrap()))
            }
            _ => None,
        }
    }
}

fn unpack_nhwc(shape: &[usize]) -> Result<(usize, usize, usize, usize)> {
    if shape.len() != 4 {
        return Err(Error::ShapeMismatch(format!(
            "expected [batch, h, w, channels], got {shape:?}"
        )));
    }
    Ok((shape[0], shape[1], shape[2], shape[3]))
}

fn div_ceil(a: usize, b: usize) -> usize {
    (a + b - 1) / b
}

/// Padding before the first element for a total padding amount, matching the
/// usual "same" convention (extra padding goes at the end).
fn pad_begin(total: usize) -> usize {
    total / 2
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

enum Saved<E: Real> {
    Conv {
        input: Tensor<E>,
        weight: Tensor<E>,
    },
    Deconv {
        input: Tensor<E>,
        weight: Tensor<E>,
    },
    Affine {
        input: Tensor<E>,
        weight: Tensor<E>,
    },
    FromInput {
        input: Tensor<E>,
    },
    FromOutput {
        output: Tensor<E>,
    },
    BatchNorm {
        xhat: Tensor<E>,
        inv_std: Vec<E>,
        gamma: Tensor<E>,
        train: bool,
    },
}

struct Entry<E: Real> {
    spec: LayerSpec,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    saved: Saved<E>,
}

/// Ordered record of one forward pass, sufficient for one backward pass.
///
/// `backward` consumes the tape by value, so a tape cannot be replayed twice.
pub struct Tape<E: Real = f32> {
    phase: Phase,
    entries: Vec<Entry<E>>,
    param_shapes: BTreeMap<String, Vec<usize>>,
    stat_updates: Vec<(String, Tensor<E>)>,
}

impl<E: Real> Default for Tape<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Real> Tape<E> {
    pub fn new() -> Self {
        Tape {
            phase: Phase::Train,
            entries: Vec::new(),
            param_shapes: BTreeMap::new(),
            stat_updates: Vec::new(),
        }
    }

    pub fn eval() -> Self {
        Tape {
            phase: Phase::Eval,
            ..Self::new()
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Batchnorm running-statistic updates collected during training-phase
    /// forwards, as `(param name, new value)` pairs.
    pub fn take_stat_updates(&mut self) -> Vec<(String, Tensor<E>)> {
        std::mem::take(&mut self.stat_updates)
    }

    fn observe_params(&mut self, params: &ParamSet<E>) {
        if self.param_shapes.len() == params.len() {
            return;
        }
        for (name, t) in params.iter() {
            self.param_shapes
                .entry(name.to_string())
                .or_insert_with(|| t.shape().to_vec());
        }
    }

    /// Run the chain rule back over the recorded operations.
    ///
    /// `seed` is the loss gradient with respect to the final output. Returns
    /// gradients for every observed parameter (zero for parameters the pass
    /// never touched) and for the chain input.
    pub fn backward(self, seed: &Tensor<E>) -> Result<Gradients<E>> {
        let last = self
            .entries
            .last()
            .ok_or_else(|| Error::InvalidSpec("backward over an empty tape".into()))?;
        if seed.shape() != last.output_shape.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "seed shape {:?} does not match output {:?}",
                seed.shape(),
                last.output_shape
            )));
        }
        let mut grads: BTreeMap<String, Tensor<E>> = BTreeMap::new();
        let mut grad = seed.clone();
        for entry in self.entries.iter().rev() {
            grad = backward_entry(entry, &grad, &mut grads)?;
        }
        let mut params = ParamSet::new();
        for (name, shape) in &self.param_shapes {
            match grads.remove(name) {
                Some(g) => params.insert(name.clone(), g),
                None => params.insert(name.clone(), Tensor::zeros(shape)),
            }
        }
        Ok(Gradients {
            params,
            input: grad,
        })
    }
}

/// Result of a backward pass: parameter gradients plus the gradient with
/// respect to the chain input (needed for input-space reconstruction).
pub struct Gradients<E: Real = f32> {
    pub params: ParamSet<E>,
    pub input: Tensor<E>,
}

fn accumulate<E: Real>(grads: &mut BTreeMap<String, Tensor<E>>, name: String, g: Tensor<E>) {
    match grads.get_mut(&name) {
        Some(acc) => {
            acc.add_assign(&g).expect("gradient accumulation shape");
        }
        None => {
            grads.insert(name, g);
        }
    }
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

/// Apply one layer, recording the operation on `tape`.
pub fn apply_layer<E: Real>(
    spec: &LayerSpec,
    params: &ParamSet<E>,
    input: &Tensor<E>,
    tape: &mut Tape<E>,
) -> Result<Tensor<E>> {
    let out_shape = spec.output_shape(input.shape())?;
    if let Some(last) = tape.entries.last() {
        if last.output_shape != input.shape() {
            return Err(Error::ShapeMismatch(format!(
                "tape chain broken: previous output {:?}, next input {:?}",
                last.output_shape,
                input.shape()
            )));
        }
    }
    tape.observe_params(params);

    let (output, saved) = match spec.kind {
        LayerKind::Conv2d => {
            let w = params.get(&format!("{}.w", spec.name))?;
            let b = params.get(&format!("{}.b", spec.name))?;
            let out = conv2d_forward(input, w, b, spec.stride.unwrap())?;
            (
                out,
                Saved::Conv {
                    input: input.clone(),
                    weight: w.clone(),
                },
            )
        }
        LayerKind::Deconv2d => {
            let w = params.get(&format!("{}.w", spec.name))?;
            let b = params.get(&format!("{}.b", spec.name))?;
            let out = deconv2d_forward(input, w, b, spec.stride.unwrap(), spec.out_size.unwrap())?;
            (
                out,
                Saved::Deconv {
                    input: input.clone(),
                    weight: w.clone(),
                },
            )
        }
        LayerKind::FullyConnected | LayerKind::Embedding => {
            let w = params.get(&format!("{}.w", spec.name))?;
            let b = params.get(&format!("{}.b", spec.name))?;
            let out = affine_forward(input, w, b)?;
            (
                out,
                Saved::Affine {
                    input: input.clone(),
                    weight: w.clone(),
                },
            )
        }
        LayerKind::Relu => {
            let out = input.map(|v| v.max_val(E::zero()));
            (out, Saved::FromInput {
                input: input.clone(),
            })
        }
        LayerKind::LRelu => {
            let slope = E::from_f32(spec.slope.unwrap());
            let out = input.map(|v| if v.lt(E::zero()) { slope * v } else { v });
            (out, Saved::FromInput {
                input: input.clone(),
            })
        }
        LayerKind::Tanh => {
            let out = input.map(Real::tanh);
            (
                out.clone(),
                Saved::FromOutput { output: out },
            )
        }
        LayerKind::Sigmoid => {
            let out = input.map(sigmoid_scalar);
            (
                out.clone(),
                Saved::FromOutput { output: out },
            )
        }
        LayerKind::Softmax => {
            let out = softmax_forward(input);
            (
                out.clone(),
                Saved::FromOutput { output: out },
            )
        }
        LayerKind::BatchNorm => {
            let gamma = params.get(&format!("{}.gamma", spec.name))?.clone();
            let beta = params.get(&format!("{}.beta", spec.name))?;
            match tape.phase {
                Phase::Train => {
                    let (out, xhat, inv_std, mean, var) = batchnorm_train(input, &gamma, beta)?;
                    let momentum = E::from_f64(BATCHNORM_MOMENTUM);
                    let blend = E::one() - momentum;
                    let rmean = params.get(&format!("{}.rmean", spec.name))?;
                    let rvar = params.get(&format!("{}.rvar", spec.name))?;
                    let new_mean = rmean.scale(momentum).add(&mean.scale(blend))?;
                    let new_var = rvar.scale(momentum).add(&var.scale(blend))?;
                    tape.stat_updates
                        .push((format!("{}.rmean", spec.name), new_mean));
                    tape.stat_updates
                        .push((format!("{}.rvar", spec.name), new_var));
                    (
                        out,
                        Saved::BatchNorm {
                            xhat,
                            inv_std,
                            gamma,
                            train: true,
                        },
                    )
                }
                Phase::Eval => {
                    let rmean = params.get(&format!("{}.rmean", spec.name))?;
                    let rvar = params.get(&format!("{}.rvar", spec.name))?;
                    let (out, xhat, inv_std) = batchnorm_eval(input, &gamma, beta, rmean, rvar)?;
                    (
                        out,
                        Saved::BatchNorm {
                            xhat,
                            inv_std,
                            gamma,
                            train: false,
                        },
                    )
                }
            }
        }
    };

    if !output.is_finite() {
        return Err(Error::NonFinite(format!(
            "{:?} layer `{}` output",
            spec.kind, spec.name
        )));
    }
    debug_assert_eq!(output.shape(), out_shape.as_slice());

    tape.entries.push(Entry {
        spec: spec.clone(),
        input_shape: input.shape().to_vec(),
        output_shape: out_shape,
        saved,
    });
    Ok(output)
}

pub const SIGMOID_EPS: f64 = 1e-7;

fn sigmoid_scalar<E: Real>(x: E) -> E {
    // numerically stable on both tails; clamped so the output stays strictly
    // inside (0, 1) even where f32 would round to an endpoint
    let p = if x.lt(E::zero()) {
        let e = x.exp();
        e / (E::one() + e)
    } else {
        E::one() / (E::one() + (-x).exp())
    };
    p.clamp_val(
        E::from_f64(SIGMOID_EPS),
        E::one() - E::from_f64(SIGMOID_EPS),
    )
}

fn softmax_forward<E: Real>(x: &Tensor<E>) -> Tensor<E> {
    let shape = x.shape();
    let c = *shape.last().unwrap();
    let rows = x.numel() / c;
    let mut out = vec![E::zero(); x.numel()];
    let data = x.data();
    for r in 0..rows {
        let row = &data[r * c..(r + 1) * c];
        let mut max = row[0];
        for &v in row {
            max = max.max_val(v);
        }
        let mut sum = E::zero();
        for (i, &v) in row.iter().enumerate() {
            let e = (v - max).exp();
            out[r * c + i] = e;
            sum += e;
        }
        for v in &mut out[r * c..(r + 1) * c] {
            *v = *v / sum;
        }
    }
    Tensor::from_vec(shape, out).expect("softmax shape")
}

fn affine_forward<E: Real>(x: &Tensor<E>, w: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    let batch = x.shape()[0];
    let features: usize = x.shape()[1..].iter().product();
    let (wi, wo) = (w.shape()[0], w.shape()[1]);
    if features != wi {
        return Err(Error::ShapeMismatch(format!(
            "affine: input flattens to {features}, weight expects {wi}"
        )));
    }
    let xd = x.data();
    let wd = w.data();
    let bd = b.data();
    let mut out = vec![E::zero(); batch * wo];
    for bi in 0..batch {
        let xrow = &xd[bi * features..(bi + 1) * features];
        let orow = &mut out[bi * wo..(bi + 1) * wo];
        orow.copy_from_slice(bd);
        for (f, &xv) in xrow.iter().enumerate() {
            let wrow = &wd[f * wo..(f + 1) * wo];
            for (o, &wv) in wrow.iter().enumerate() {
                orow[o] += xv * wv;
            }
        }
    }
    Tensor::from_vec(&[batch, wo], out)
}

struct ConvGeom {
    oh: usize,
    ow: usize,
    pad_top: usize,
    pad_left: usize,
}

fn conv_geom(h: usize, w: usize, kh: usize, kw: usize, stride: usize) -> ConvGeom {
    let oh = div_ceil(h, stride);
    let ow = div_ceil(w, stride);
    let pad_h = ((oh - 1) * stride + kh).saturating_sub(h);
    let pad_w = ((ow - 1) * stride + kw).saturating_sub(w);
    ConvGeom {
        oh,
        ow,
        pad_top: pad_begin(pad_h),
        pad_left: pad_begin(pad_w),
    }
}

fn deconv_geom(h: usize, w: usize, kh: usize, kw: usize, stride: usize, oh: usize, ow: usize) -> ConvGeom {
    let pad_h = (h - 1) * stride + kh - oh;
    let pad_w = (w - 1) * stride + kw - ow;
    ConvGeom {
        oh,
        ow,
        pad_top: pad_begin(pad_h),
        pad_left: pad_begin(pad_w),
    }
}

fn conv2d_forward<E: Real>(
    x: &Tensor<E>,
    w: &Tensor<E>,
    b: &Tensor<E>,
    stride: usize,
) -> Result<Tensor<E>> {
    let (batch, h, wid, ci) = unpack_nhwc(x.shape())?;
    let (kh, kw, wci, co) = unpack_nhwc(w.shape())?;
    if wci != ci {
        return Err(Error::ShapeMismatch(format!(
            "conv2d weight expects {wci} input channels, input has {ci}"
        )));
    }
    let g = conv_geom(h, wid, kh, kw, stride);
    let xd = x.data();
    let wd = w.data();
    let bd = b.data();
    let mut out = vec![E::zero(); batch * g.oh * g.ow * co];
    for bi in 0..batch {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let obase = ((bi * g.oh + oy) * g.ow + ox) * co;
                out[obase..obase + co].copy_from_slice(bd);
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - g.pad_top as isize;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - g.pad_left as isize;
                        if ix < 0 || ix as usize >= wid {
                            continue;
                        }
                        let xbase = ((bi * h + iy as usize) * wid + ix as usize) * ci;
                        let wbase = (ky * kw + kx) * ci * co;
                        for c in 0..ci {
                            let xv = xd[xbase + c];
                            let wrow = &wd[wbase + c * co..wbase + (c + 1) * co];
                            let orow = &mut out[obase..obase + co];
                            for (o, &wv) in wrow.iter().enumerate() {
                                orow[o] += xv * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[batch, g.oh, g.ow, co], out)
}

fn conv2d_backward<E: Real>(
    x: &Tensor<E>,
    w: &Tensor<E>,
    dy: &Tensor<E>,
    stride: usize,
) -> (Tensor<E>, Tensor<E>, Tensor<E>) {
    let (batch, h, wid, ci) = unpack_nhwc(x.shape()).expect("saved input shape");
    let (kh, kw, _, co) = unpack_nhwc(w.shape()).expect("saved weight shape");
    let g = conv_geom(h, wid, kh, kw, stride);
    let xd = x.data();
    let wd = w.data();
    let dyd = dy.data();
    let mut dx = vec![E::zero(); xd.len()];
    let mut dw = vec![E::zero(); wd.len()];
    let mut db = vec![E::zero(); co];
    for bi in 0..batch {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let obase = ((bi * g.oh + oy) * g.ow + ox) * co;
                let dyrow = &dyd[obase..obase + co];
                for (o, &gv) in dyrow.iter().enumerate() {
                    db[o] += gv;
                }
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - g.pad_top as isize;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - g.pad_left as isize;
                        if ix < 0 || ix as usize >= wid {
                            continue;
                        }
                        let xbase = ((bi * h + iy as usize) * wid + ix as usize) * ci;
                        let wbase = (ky * kw + kx) * ci * co;
                        for c in 0..ci {
                            let xv = xd[xbase + c];
                            let wrow = &wd[wbase + c * co..wbase + (c + 1) * co];
                            let dwrow = &mut dw[wbase + c * co..wbase + (c + 1) * co];
                            let mut acc = E::zero();
                            for (o, &gv) in dyrow.iter().enumerate() {
                                acc += wrow[o] * gv;
                                dwrow[o] += xv * gv;
                            }
                            dx[xbase + c] += acc;
                        }
                    }
                }
            }
        }
    }
    (
        Tensor::from_vec(x.shape(), dx).expect("dx shape"),
        Tensor::from_vec(w.shape(), dw).expect("dw shape"),
        Tensor::from_vec(&[co], db).expect("db shape"),
    )
}

fn deconv2d_forward<E: Real>(
    x: &Tensor<E>,
    w: &Tensor<E>,
    b: &Tensor<E>,
    stride: usize,
    out_size: (usize, usize),
) -> Result<Tensor<E>> {
    let (batch, h, wid, ci) = unpack_nhwc(x.shape())?;
    let (kh, kw, wci, co) = unpack_nhwc(w.shape())?;
    if wci != ci {
        return Err(Error::ShapeMismatch(format!(
            "deconv2d weight expects {wci} input channels, input has {ci}"
        )));
    }
    let (oh, ow) = out_size;
    let g = deconv_geom(h, wid, kh, kw, stride, oh, ow);
    let xd = x.data();
    let wd = w.data();
    let bd = b.data();
    let mut out = vec![E::zero(); batch * oh * ow * co];
    for bi in 0..batch {
        for iy in 0..h {
            for ix in 0..wid {
                let xbase = ((bi * h + iy) * wid + ix) * ci;
                for ky in 0..kh {
                    let oy = (iy * stride + ky) as isize - g.pad_top as isize;
                    if oy < 0 || oy as usize >= oh {
                        continue;
                    }
                    for kx in 0..kw {
                        let ox = (ix * stride + kx) as isize - g.pad_left as isize;
                        if ox < 0 || ox as usize >= ow {
                            continue;
                        }
                        let obase = ((bi * oh + oy as usize) * ow + ox as usize) * co;
                        let wbase = (ky * kw + kx) * ci * co;
                        for c in 0..ci {
                            let xv = xd[xbase + c];
                            let wrow = &wd[wbase + c * co..wbase + (c + 1) * co];
                            let orow = &mut out[obase..obase + co];
                            for (o, &wv) in wrow.iter().enumerate() {
                                orow[o] += xv * wv;
                            }
                        }
                    }
                }
            }
        }
        for oy in 0..oh {
            for ox in 0..ow {
                let obase = ((bi * oh + oy) * ow + ox) * co;
                for (o, &bv) in bd.iter().enumerate() {
                    out[obase + o] += bv;
                }
            }
        }
    }
    Tensor::from_vec(&[batch, oh, ow, co], out)
}

fn deconv2d_backward<E: Real>(
    x: &Tensor<E>,
    w: &Tensor<E>,
    dy: &Tensor<E>,
    stride: usize,
) -> (Tensor<E>, Tensor<E>, Tensor<E>) {
    let (batch, h, wid, ci) = unpack_nhwc(x.shape()).expect("saved input shape");
    let (kh, kw, _, co) = unpack_nhwc(w.shape()).expect("saved weight shape");
    let (_, oh, ow, _) = unpack_nhwc(dy.shape()).expect("dy shape");
    let g = deconv_geom(h, wid, kh, kw, stride, oh, ow);
    let xd = x.data();
    let wd = w.data();
    let dyd = dy.data();
    let mut dx = vec![E::zero(); xd.len()];
    let mut dw = vec![E::zero(); wd.len()];
    let mut db = vec![E::zero(); co];
    for (o, dbv) in db.iter_mut().enumerate() {
        let mut acc = E::zero();
        let mut idx = o;
        while idx < dyd.len() {
            acc += dyd[idx];
            idx += co;
        }
        *dbv = acc;
    }
    for bi in 0..batch {
        for iy in 0..h {
            for ix in 0..wid {
                let xbase = ((bi * h + iy) * wid + ix) * ci;
                for ky in 0..kh {
                    let oy = (iy * stride + ky) as isize - g.pad_top as isize;
                    if oy < 0 || oy as usize >= oh {
                        continue;
                    }
                    for kx in 0..kw {
                        let ox = (ix * stride + kx) as isize - g.pad_left as isize;
                        if ox < 0 || ox as usize >= ow {
                            continue;
                        }
                        let obase = ((bi * oh + oy as usize) * ow + ox as usize) * co;
                        let dyrow = &dyd[obase..obase + co];
                        let wbase = (ky * kw + kx) * ci * co;
                        for c in 0..ci {
                            let xv = xd[xbase + c];
                            let wrow = &wd[wbase + c * co..wbase + (c + 1) * co];
                            let dwrow = &mut dw[wbase + c * co..wbase + (c + 1) * co];
                            let mut acc = E::zero();
                            for (o, &gv) in dyrow.iter().enumerate() {
                                acc += wrow[o] * gv;
                                dwrow[o] += xv * gv;
                            }
                            dx[xbase + c] += acc;
                        }
                    }
                }
            }
        }
    }
    (
        Tensor::from_vec(x.shape(), dx).expect("dx shape"),
        Tensor::from_vec(w.shape(), dw).expect("dw shape"),
        Tensor::from_vec(&[co], db).expect("db shape"),
    )
}

type BatchNormOut<E> = (Tensor<E>, Tensor<E>, Vec<E>, Tensor<E>, Tensor<E>);

fn batchnorm_train<E: Real>(
    x: &Tensor<E>,
    gamma: &Tensor<E>,
    beta: &Tensor<E>,
) -> Result<BatchNormOut<E>> {
    let c = *x.shape().last().unwrap();
    let m = x.numel() / c;
    let m_e = E::from_f64(m as f64);
    let eps = E::from_f64(BATCHNORM_EPS);
    let xd = x.data();
    let mut mean = vec![E::zero(); c];
    for (i, &v) in xd.iter().enumerate() {
        mean[i % c] += v;
    }
    for v in &mut mean {
        *v = *v / m_e;
    }
    let mut var = vec![E::zero(); c];
    for (i, &v) in xd.iter().enumerate() {
        let d = v - mean[i % c];
        var[i % c] += d * d;
    }
    for v in &mut var {
        *v = *v / m_e;
    }
    let inv_std: Vec<E> = var.iter().map(|&v| E::one() / (v + eps).sqrt()).collect();
    let gd = gamma.data();
    let bd = beta.data();
    let mut xhat = vec![E::zero(); xd.len()];
    let mut out = vec![E::zero(); xd.len()];
    for (i, &v) in xd.iter().enumerate() {
        let ch = i % c;
        let h = (v - mean[ch]) * inv_std[ch];
        xhat[i] = h;
        out[i] = gd[ch] * h + bd[ch];
    }
    Ok((
        Tensor::from_vec(x.shape(), out)?,
        Tensor::from_vec(x.shape(), xhat)?,
        inv_std,
        Tensor::from_vec(&[c], mean)?,
        Tensor::from_vec(&[c], var)?,
    ))
}

fn batchnorm_eval<E: Real>(
    x: &Tensor<E>,
    gamma: &Tensor<E>,
    beta: &Tensor<E>,
    rmean: &Tensor<E>,
    rvar: &Tensor<E>,
) -> Result<(Tensor<E>, Tensor<E>, Vec<E>)> {
    let c = *x.shape().last().unwrap();
    let eps = E::from_f64(BATCHNORM_EPS);
    let inv_std: Vec<E> = rvar
        .data()
        .iter()
        .map(|&v| E::one() / (v + eps).sqrt())
        .collect();
    let xd = x.data();
    let md = rmean.data();
    let gd = gamma.data();
    let bd = beta.data();
    let mut xhat = vec![E::zero(); xd.len()];
    let mut out = vec![E::zero(); xd.len()];
    for (i, &v) in xd.iter().enumerate() {
        let ch = i % c;
        let h = (v - md[ch]) * inv_std[ch];
        xhat[i] = h;
        out[i] = gd[ch] * h + bd[ch];
    }
    Ok((
        Tensor::from_vec(x.shape(), out)?,
        Tensor::from_vec(x.shape(), xhat)?,
        inv_std,
    ))
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

fn backward_entry<E: Real>(
    entry: &Entry<E>,
    dy: &Tensor<E>,
    grads: &mut BTreeMap<String, Tensor<E>>,
) -> Result<Tensor<E>> {
    let spec = &entry.spec;
    match (&entry.saved, spec.kind) {
        (Saved::Conv { input, weight }, LayerKind::Conv2d) => {
            let (dx, dw, db) = conv2d_backward(input, weight, dy, spec.stride.unwrap());
            accumulate(grads, format!("{}.w", spec.name), dw);
            accumulate(grads, format!("{}.b", spec.name), db);
            Ok(dx)
        }
        (Saved::Deconv { input, weight }, LayerKind::Deconv2d) => {
            let (dx, dw, db) = deconv2d_backward(input, weight, dy, spec.stride.unwrap());
            accumulate(grads, format!("{}.w", spec.name), dw);
            accumulate(grads, format!("{}.b", spec.name), db);
            Ok(dx)
        }
        (Saved::Affine { input, weight }, LayerKind::FullyConnected | LayerKind::Embedding) => {
            let batch = input.shape()[0];
            let features: usize = input.shape()[1..].iter().product();
            let (_, wo) = (weight.shape()[0], weight.shape()[1]);
            let xd = input.data();
            let wd = weight.data();
            let dyd = dy.data();
            let mut dx = vec![E::zero(); xd.len()];
            let mut dw = vec![E::zero(); wd.len()];
            let mut db = vec![E::zero(); wo];
            for bi in 0..batch {
                let dyrow = &dyd[bi * wo..(bi + 1) * wo];
                for (o, &g) in dyrow.iter().enumerate() {
                    db[o] += g;
                }
                let xrow = &xd[bi * features..(bi + 1) * features];
                let dxrow = &mut dx[bi * features..(bi + 1) * features];
                for f in 0..features {
                    let wrow = &wd[f * wo..(f + 1) * wo];
                    let dwrow = &mut dw[f * wo..(f + 1) * wo];
                    let xv = xrow[f];
                    let mut acc = E::zero();
                    for (o, &g) in dyrow.iter().enumerate() {
                        acc += wrow[o] * g;
                        dwrow[o] += xv * g;
                    }
                    dxrow[f] += acc;
                }
            }
            accumulate(
                grads,
                format!("{}.w", spec.name),
                Tensor::from_vec(weight.shape(), dw)?,
            );
            accumulate(grads, format!("{}.b", spec.name), Tensor::from_vec(&[wo], db)?);
            Tensor::from_vec(&entry.input_shape, dx)
        }
        (Saved::FromInput { input }, LayerKind::Relu) => {
            input.zip_map(dy, |x, g| if x.lt(E::zero()) { E::zero() } else { g })
        }
        (Saved::FromInput { input }, LayerKind::LRelu) => {
            let slope = E::from_f32(spec.slope.unwrap());
            input.zip_map(dy, |x, g| if x.lt(E::zero()) { slope * g } else { g })
        }
        (Saved::FromOutput { output }, LayerKind::Tanh) => {
            output.zip_map(dy, |y, g| (E::one() - y * y) * g)
        }
        (Saved::FromOutput { output }, LayerKind::Sigmoid) => {
            output.zip_map(dy, |y, g| y * (E::one() - y) * g)
        }
        (Saved::FromOutput { output }, LayerKind::Softmax) => {
            let c = *output.shape().last().unwrap();
            let rows = output.numel() / c;
            let yd = output.data();
            let dyd = dy.data();
            let mut dx = vec![E::zero(); yd.len()];
            for r in 0..rows {
                let y = &yd[r * c..(r + 1) * c];
                let g = &dyd[r * c..(r + 1) * c];
                let mut dot = E::zero();
                for i in 0..c {
                    dot += y[i] * g[i];
                }
                for i in 0..c {
                    dx[r * c + i] = y[i] * (g[i] - dot);
                }
            }
            Tensor::from_vec(output.shape(), dx)
        }
        (
            Saved::BatchNorm {
                xhat,
                inv_std,
                gamma,
                train,
            },
            LayerKind::BatchNorm,
        ) => {
            let c = *xhat.shape().last().unwrap();
            let m = xhat.numel() / c;
            let m_e = E::from_f64(m as f64);
            let xh = xhat.data();
            let dyd = dy.data();
            let gd = gamma.data();
            let mut dgamma = vec![E::zero(); c];
            let mut dbeta = vec![E::zero(); c];
            for (i, &g) in dyd.iter().enumerate() {
                let ch = i % c;
                dgamma[ch] += g * xh[i];
                dbeta[ch] += g;
            }
            let mut dx = vec![E::zero(); xh.len()];
            if *train {
                for (i, &g) in dyd.iter().enumerate() {
                    let ch = i % c;
                    let term = g * m_e - dbeta[ch] - xh[i] * dgamma[ch];
                    dx[i] = gd[ch] * inv_std[ch] * term / m_e;
                }
            } else {
                for (i, &g) in dyd.iter().enumerate() {
                    let ch = i % c;
                    dx[i] = gd[ch] * inv_std[ch] * g;
                }
            }
            accumulate(
                grads,
                format!("{}.gamma", spec.name),
                Tensor::from_vec(&[c], dgamma)?,
            );
            accumulate(
                grads,
                format!("{}.beta", spec.name),
                Tensor::from_vec(&[c], dbeta)?,
            );
            Tensor::from_vec(&entry.input_shape, dx)
        }
        _ => Err(Error::InvalidSpec(format!(
            "tape entry mismatch for {:?}",
            spec.kind
        ))),
    }
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Central-difference gradient of a scalar function over a parameter set.
/// Test oracle; independent of the tape machinery.
pub fn finite_diff_grad<E: Real>(
    f: &mut dyn FnMut(&ParamSet<E>) -> Result<E>,
    params: &ParamSet<E>,
    step: f64,
) -> Result<ParamSet<E>> {
    if step <= 0.0 {
        return Err(Error::InvalidConfig("finite-difference step must be > 0".into()));
    }
    let h = E::from_f64(step);
    let two_h = E::from_f64(2.0 * step);
    let mut grad = params.zeros_like();
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        let n = params.get(&name)?.numel();
        for i in 0..n {
            let mut plus = params.clone();
            plus.get_mut(&name)?.data_mut()[i] += h;
            let mut minus = params.clone();
            minus.get_mut(&name)?.data_mut()[i] -= h;
            let fp = f(&plus)?;
            let fm = f(&minus)?;
            grad.get_mut(&name)?.data_mut()[i] = (fp - fm) / two_h;
        }
    }
    Ok(grad)
}

/// Central-difference gradient with respect to a tensor input.
pub fn finite_diff_grad_input<E: Real>(
    f: &mut dyn FnMut(&Tensor<E>) -> Result<E>,
    x: &Tensor<E>,
    step: f64,
) -> Result<Tensor<E>> {
    let h = E::from_f64(step);
    let two_h = E::from_f64(2.0 * step);
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        let fp = f(&plus)?;
        let fm = f(&minus)?;
        grad.data_mut()[i] = (fp - fm) / two_h;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_with<E: Real>(entries: &[(&str, Tensor<E>)]) -> ParamSet<E> {
        let mut p = ParamSet::new();
        for (name, t) in entries {
            p.insert(*name, t.clone());
        }
        p
    }

    #[test]
    fn conv_identity_kernel_passes_image_through() {
        let spec = LayerSpec::conv2d("c", 1, 1, 1, 1);
        let img = Tensor::from_vec(&[1, 3, 3, 1], (1..=9).map(|v| v as f32).collect()).unwrap();
        let params = params_with(&[
            ("c.w", Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap()),
            ("c.b", Tensor::zeros(&[1])),
        ]);
        let mut tape = Tape::new();
        let out = apply_layer(&spec, &params, &img, &mut tape).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let spec = LayerSpec::softmax();
        let x = Tensor::zeros(&[1, 10]);
        let mut tape = Tape::new();
        let out = apply_layer(&spec, &ParamSet::<f32>::new(), &x, &mut tape).unwrap();
        for &v in out.data() {
            assert!((v - 0.1).abs() < 1e-7);
        }
        let sum: f32 = out.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn deconv_shape_follows_spec() {
        // 7x7x192 -> 14x14x96 with a 5x5 kernel at stride 2
        let spec = LayerSpec::deconv2d("d", 5, 2, 192, 96, (14, 14));
        let out = spec.output_shape(&[1, 7, 7, 192]).unwrap();
        assert_eq!(out, vec![1, 14, 14, 96]);
    }

    #[test]
    fn deconv_rejects_unreachable_output() {
        let spec = LayerSpec::deconv2d("d", 5, 2, 4, 4, (40, 40));
        assert!(spec.output_shape(&[1, 7, 7, 4]).is_err());
    }

    #[test]
    fn kernel_field_rules_enforced() {
        let mut bad = LayerSpec::relu();
        bad.kernel = Some((3, 3));
        bad.stride = Some(1);
        assert!(bad.validate().is_err());
        let mut conv = LayerSpec::conv2d("c", 3, 1, 1, 1);
        conv.kernel = None;
        assert!(conv.validate().is_err());
    }

    #[test]
    fn relu_backward_zeroes_negative_preactivations() {
        let spec = LayerSpec::relu();
        let x = Tensor::from_vec(&[1, 4], vec![-1.0f32, 2.0, -3.0, 4.0]).unwrap();
        let mut tape = Tape::new();
        apply_layer(&spec, &ParamSet::new(), &x, &mut tape).unwrap();
        let seed = Tensor::filled(&[1, 4], 1.0f32);
        let grads = tape.backward(&seed).unwrap();
        assert_eq!(grads.input.data(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn linear_loss_gradient_is_input() {
        // loss = sum(W x): dL/dW = x broadcast across output rows
        let spec = LayerSpec::fully_connected("fc", 3, 2);
        let x = Tensor::from_vec(&[1, 3], vec![1.0f32, -2.0, 0.5]).unwrap();
        let params = params_with(&[
            ("fc.w", Tensor::zeros(&[3, 2])),
            ("fc.b", Tensor::zeros(&[2])),
        ]);
        let mut tape = Tape::new();
        apply_layer(&spec, &params, &x, &mut tape).unwrap();
        let grads = tape.backward(&Tensor::filled(&[1, 2], 1.0)).unwrap();
        let dw = grads.params.get("fc.w").unwrap();
        assert_eq!(dw.data(), &[1.0, 1.0, -2.0, -2.0, 0.5, 0.5]);
        let db = grads.params.get("fc.b").unwrap();
        assert_eq!(db.data(), &[1.0, 1.0]);
    }

    #[test]
    fn fully_connected_flattens_rank4_input() {
        let spec = LayerSpec::fully_connected("fc", 12, 5);
        let x = Tensor::<f32>::zeros(&[2, 2, 3, 2]);
        let params = params_with(&[
            ("fc.w", Tensor::zeros(&[12, 5])),
            ("fc.b", Tensor::zeros(&[5])),
        ]);
        let mut tape = Tape::new();
        let out = apply_layer(&spec, &params, &x, &mut tape).unwrap();
        assert_eq!(out.shape(), &[2, 5]);
        let grads = tape.backward(&Tensor::zeros(&[2, 5])).unwrap();
        assert_eq!(grads.input.shape(), &[2, 2, 3, 2]);
    }

    #[test]
    fn batchnorm_handles_zero_variance() {
        let spec = LayerSpec::batchnorm("bn", 2);
        let x = Tensor::filled(&[4, 1, 1, 2], 3.0f32);
        let params = params_with(&[
            ("bn.gamma", Tensor::filled(&[2], 1.0)),
            ("bn.beta", Tensor::zeros(&[2])),
            ("bn.rmean", Tensor::zeros(&[2])),
            ("bn.rvar", Tensor::filled(&[2], 1.0)),
        ]);
        let mut tape = Tape::new();
        let out = apply_layer(&spec, &params, &x, &mut tape).unwrap();
        assert!(out.is_finite());
        for &v in out.data() {
            assert!(v.abs() < 1e-3);
        }
        let updates = tape.take_stat_updates();
        assert_eq!(updates.len(), 2);
        // rmean moves toward the batch mean of 3.0
        let (name, rm) = &updates[0];
        assert_eq!(name, "bn.rmean");
        assert!((rm.data()[0] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn sigmoid_tanh_ranges() {
        let x = Tensor::from_vec(&[1, 5], vec![-50.0f32, -1.0, 0.0, 1.0, 50.0]).unwrap();
        let mut tape = Tape::new();
        let s = apply_layer(&LayerSpec::sigmoid(), &ParamSet::new(), &x, &mut tape).unwrap();
        for &v in s.data() {
            assert!(v > 0.0 && v < 1.0);
        }
        let mut tape = Tape::new();
        let t = apply_layer(&LayerSpec::tanh(), &ParamSet::new(), &x, &mut tape).unwrap();
        for &v in t.data() {
            assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn backward_rejects_bad_seed_shape() {
        let spec = LayerSpec::relu();
        let x = Tensor::zeros(&[1, 4]);
        let mut tape = Tape::new();
        apply_layer(&spec, &ParamSet::<f32>::new(), &x, &mut tape).unwrap();
        assert!(tape.backward(&Tensor::zeros(&[1, 3])).is_err());
    }

    #[test]
    fn finite_diff_on_quadratic() {
        // f(theta) = theta^2 at theta = 3 -> 6
        let mut p = ParamSet::new();
        p.insert("t", Tensor::scalar(3.0f64));
        let grad = finite_diff_grad(
            &mut |p: &ParamSet<f64>| {
                let v = p.get("t")?.data()[0];
                Ok(v * v)
            },
            &p,
            1e-3,
        )
        .unwrap();
        assert!((grad.get("t").unwrap().data()[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_constant_is_zero() {
        let mut p = ParamSet::new();
        p.insert("t", Tensor::from_vec(&[2], vec![1.0f64, -2.0]).unwrap());
        let grad = finite_diff_grad(&mut |_| Ok(7.5f64), &p, 1e-3).unwrap();
        assert_eq!(grad.get("t").unwrap().data(), &[0.0, 0.0]);
    }
}
