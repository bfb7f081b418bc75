use rand::Rng;

use crate::error::{Error, Result};

use super::{glorot_bound, Real, Tensor};

/// 1D convolution over a `[len, c_in]` sequence. Kernels are stored
/// `[c_out, k, c_in]`; `k` is odd so same-padding is symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> ConvLayer<T> {
    pub fn new(kernels: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let &[c_out, k, _c_in] = kernels.shape() else {
            return Err(Error::Shape(format!("conv kernels must be rank 3, got {:?}", kernels.shape())));
        };
        if k % 2 == 0 {
            return Err(Error::InvalidArgument(format!("conv kernel length {k} must be odd")));
        }
        if bias.shape() != [c_out] {
            return Err(Error::Shape(format!("conv bias shape {:?} != [{c_out}]", bias.shape())));
        }
        Ok(ConvLayer { kernels, bias })
    }

    /// Glorot-uniform kernels, zero bias.
    pub fn init(c_in: usize, c_out: usize, k: usize, rng: &mut impl Rng) -> Result<Self> {
        let bound = glorot_bound(k * c_in, k * c_out);
        let kernels = Tensor::from_fn(&[c_out, k, c_in], |_| T::of(rng.gen_range(-bound..bound)));
        Self::new(kernels, Tensor::zeros(&[c_out]))
    }

    pub fn c_out(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn kernel_len(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn c_in(&self) -> usize {
        self.kernels.shape()[2]
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Same-padded convolution:
/// `out[t, o] = bias[o] + sum_{j, c} kernels[o, j, c] * x[t + j - (k-1)/2, c]`,
/// with zeros outside `[0, len)`.
pub fn conv1d_forward<T: Real>(x: &Tensor<T>, layer: &ConvLayer<T>) -> Result<Tensor<T>> {
    let (len, c_in) = x.expect_rank2("conv input")?;
    if c_in != layer.c_in() {
        return Err(Error::Shape(format!(
            "conv input has {c_in} channels, layer expects {}",
            layer.c_in()
        )));
    }
    let (c_out, k) = (layer.c_out(), layer.kernel_len());
    let half = (k - 1) / 2;
    let kern = layer.kernels.data();
    let bias = layer.bias.data();
    let mut out = Vec::with_capacity(len * c_out);
    for t in 0..len {
        for o in 0..c_out {
            let mut acc = bias[o];
            for j in 0..k {
                let Some(src) = (t + j).checked_sub(half).filter(|&s| s < len) else {
                    continue;
                };
                let w = &kern[(o * k + j) * c_in..(o * k + j + 1) * c_in];
                acc += dot(w, x.row(src));
            }
            out.push(acc);
        }
    }
    Tensor::new(vec![len, c_out], out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv1d_backward<T: Real>(x: &Tensor<T>, layer: &ConvLayer<T>, grad_out: &Tensor<T>) -> Result<ConvGrads<T>> {
    let (len, c_in) = x.expect_rank2("conv input")?;
    let (c_out, k) = (layer.c_out(), layer.kernel_len());
    if grad_out.shape() != [len, c_out] || c_in != layer.c_in() {
        return Err(Error::Shape(format!(
            "conv backward: input {:?}, output grad {:?}, kernels {:?}",
            x.shape(),
            grad_out.shape(),
            layer.kernels.shape()
        )));
    }
    let half = (k - 1) / 2;
    let kern = layer.kernels.data();
    let mut g_in = vec![T::zero(); len * c_in];
    let mut g_kern = vec![T::zero(); c_out * k * c_in];
    let mut g_bias = vec![T::zero(); c_out];
    for t in 0..len {
        let g_row = grad_out.row(t);
        for (o, &g) in g_row.iter().enumerate() {
            g_bias[o] += g;
            if g == T::zero() {
                continue;
            }
            for j in 0..k {
                let Some(src) = (t + j).checked_sub(half).filter(|&s| s < len) else {
                    continue;
                };
                let base = (o * k + j) * c_in;
                let x_row = x.row(src);
                let gk = &mut g_kern[base..base + c_in];
                for (gk, &xv) in gk.iter_mut().zip(x_row) {
                    *gk += g * xv;
                }
                let gi = &mut g_in[src * c_in..(src + 1) * c_in];
                for (gi, &w) in gi.iter_mut().zip(&kern[base..base + c_in]) {
                    *gi += g * w;
                }
            }
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(vec![len, c_in], g_in)?,
        kernels: Tensor::new(vec![c_out, k, c_in], g_kern)?,
        bias: Tensor::new(vec![c_out], g_bias)?,
    })
}

/// Non-overlapping-or-strided max pooling along the sequence axis. Trailing
/// positions that do not fill a window are dropped. Returns the pooled
/// tensor and, per output element, the source row that attained the max
/// (earliest row on ties).
pub fn maxpool1d<T: Real>(x: &Tensor<T>, window: usize, stride: usize) -> Result<(Tensor<T>, Vec<usize>)> {
    let (len, channels) = x.expect_rank2("pool input")?;
    if window == 0 || stride == 0 {
        return Err(Error::InvalidArgument("pool window and stride must be positive".into()));
    }
    if len < window {
        return Err(Error::Shape(format!("pool input length {len} is shorter than window {window}")));
    }
    let out_len = (len - window) / stride + 1;
    let mut out = Vec::with_capacity(out_len * channels);
    let mut argmax = Vec::with_capacity(out_len * channels);
    for t in 0..out_len {
        let start = t * stride;
        for c in 0..channels {
            let mut best = start;
            for r in start + 1..start + window {
                if x.row(r)[c] > x.row(best)[c] {
                    best = r;
                }
            }
            out.push(x.row(best)[c]);
            argmax.push(best);
        }
    }
    Ok((Tensor::new(vec![out_len, channels], out)?, argmax))
}

pub fn maxpool1d_backward<T: Real>(input_len: usize, grad_out: &Tensor<T>, argmax: &[usize]) -> Result<Tensor<T>> {
    let (_, channels) = grad_out.expect_rank2("pool output grad")?;
    if argmax.len() != grad_out.len() {
        return Err(Error::Shape("pool argmax map does not match output gradient".into()));
    }
    let mut g = vec![T::zero(); input_len * channels];
    for (i, (&src, &gv)) in argmax.iter().zip(grad_out.data()).enumerate() {
        g[src * channels + i % channels] += gv;
    }
    Tensor::new(vec![input_len, channels], g)
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient through relu given the relu *output*.
pub fn relu_backward<T: Real>(output: &Tensor<T>, grad: &Tensor<T>) -> Tensor<T> {
    let data = output
        .data()
        .iter()
        .zip(grad.data())
        .map(|(&o, &g)| if o > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(grad.shape().to_vec(), data).expect("relu gradient keeps its shape")
}

/// Per-element multipliers applied by a train-mode dropout: `0` for dropped
/// elements, `1/(1-p)` for survivors.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<T>(pub Vec<T>);

/// Inverted dropout. In eval mode this is the identity and no mask is made.
pub fn dropout<T: Real>(
    x: &Tensor<T>,
    p: f64,
    train: bool,
    rng: &mut impl Rng,
) -> Result<(Tensor<T>, Option<DropoutMask<T>>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout probability {p} must lie in [0, 1)")));
    }
    if !train {
        return Ok((x.clone(), None));
    }
    let keep = T::of(1.0 / (1.0 - p));
    let mask: Vec<T> = (0..x.len())
        .map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((Tensor::new(x.shape().to_vec(), data)?, Some(DropoutMask(mask))))
}

pub fn dropout_backward<T: Real>(grad: &Tensor<T>, mask: Option<&DropoutMask<T>>) -> Tensor<T> {
    match mask {
        None => grad.clone(),
        Some(DropoutMask(m)) => {
            let data = grad.data().iter().zip(m).map(|(&g, &s)| g * s).collect();
            Tensor::new(grad.shape().to_vec(), data).expect("dropout gradient keeps its shape")
        }
    }
}

/// Affine layer `W x + b` with `W` stored `[n_out, n_in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> DenseLayer<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let (n_out, _) = weights.expect_rank2("dense weights")?;
        if bias.shape() != [n_out] {
            return Err(Error::Shape(format!("dense bias shape {:?} != [{n_out}]", bias.shape())));
        }
        Ok(DenseLayer { weights, bias })
    }

    pub fn init(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Result<Self> {
        let bound = glorot_bound(n_in, n_out);
        let weights = Tensor::from_fn(&[n_out, n_in], |_| T::of(rng.gen_range(-bound..bound)));
        Self::new(weights, Tensor::zeros(&[n_out]))
    }

    pub fn n_in(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn n_out(&self) -> usize {
        self.weights.shape()[0]
    }
}

pub fn dense_forward<T: Real>(x: &[T], layer: &DenseLayer<T>) -> Result<Vec<T>> {
    if x.len() != layer.n_in() {
        return Err(Error::Shape(format!(
            "dense input has {} features, layer expects {}",
            x.len(),
            layer.n_in()
        )));
    }
    Ok((0..layer.n_out())
        .map(|o| layer.bias.data()[o] + dot(layer.weights.row(o), x))
        .collect())
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Vec<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn dense_backward<T: Real>(x: &[T], layer: &DenseLayer<T>, grad_out: &[T]) -> Result<DenseGrads<T>> {
    let (n_out, n_in) = (layer.n_out(), layer.n_in());
    if x.len() != n_in || grad_out.len() != n_out {
        return Err(Error::Shape(format!(
            "dense backward: input {} / grad {} vs layer {n_out}x{n_in}",
            x.len(),
            grad_out.len()
        )));
    }
    let mut g_in = vec![T::zero(); n_in];
    let mut g_w = Vec::with_capacity(n_out * n_in);
    for (o, &g) in grad_out.iter().enumerate() {
        g_w.extend(x.iter().map(|&xv| g * xv));
        for (gi, &w) in g_in.iter_mut().zip(layer.weights.row(o)) {
            *gi += g * w;
        }
    }
    Ok(DenseGrads {
        input: g_in,
        weights: Tensor::new(vec![n_out, n_in], g_w)?,
        bias: Tensor::new(vec![n_out], grad_out.to_vec())?,
    })
}
