use crate::error::{Error, Result};
use crate::rng;

use super::layers::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, dropout, dropout_backward, maxpool1d,
    maxpool1d_backward, relu, relu_backward, ConvLayer, DenseLayer, DropoutMask,
};
use super::loss::{cross_entropy_from_logits, softmax, softmax_cross_entropy_grad};
use super::{Real, Tensor};

/// Architecture of the text CNN:
/// `[conv -> relu -> conv -> relu -> maxpool] x conv_pairs -> flatten ->
/// dropout -> dense(fc_dim) -> relu -> dropout -> dense(n_classes) -> softmax`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnnArch {
    pub max_len: usize,
    pub embed_dim: usize,
    pub conv_pairs: usize,
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
    pub dropout_p: f64,
    pub fc_dim: usize,
    pub n_classes: usize,
}

impl CnnArch {
    /// Sequence length after every pooling stage, or `None` if some stage
    /// would be shorter than the pooling window.
    pub fn pooled_len(&self) -> Option<usize> {
        let mut len = self.max_len;
        for _ in 0..self.conv_pairs {
            if self.pool == 0 || len < self.pool {
                return None;
            }
            len /= self.pool;
        }
        (len >= 1).then_some(len)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("max_len", self.max_len),
            ("embed_dim", self.embed_dim),
            ("conv_pairs", self.conv_pairs),
            ("filters", self.filters),
            ("kernel", self.kernel),
            ("pool", self.pool),
            ("fc_dim", self.fc_dim),
            ("n_classes", self.n_classes),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("kernel length {} must be odd", self.kernel)));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidArgument(format!("dropout {} must lie in [0, 1)", self.dropout_p)));
        }
        if self.pooled_len().is_none() {
            return Err(Error::InvalidArgument(format!(
                "max_len {} cannot survive {} pooling stages of width {}",
                self.max_len, self.conv_pairs, self.pool
            )));
        }
        Ok(())
    }

    pub fn flatten_dim(&self) -> usize {
        self.pooled_len().unwrap_or(0) * self.filters
    }

    /// Closed-form parameter count.
    pub fn parameter_count(&self) -> usize {
        let mut total = 0;
        let mut c_in = self.embed_dim;
        for _ in 0..2 * self.conv_pairs {
            total += self.filters * self.kernel * c_in + self.filters;
            c_in = self.filters;
        }
        total += self.fc_dim * self.flatten_dim() + self.fc_dim;
        total + self.n_classes * self.fc_dim + self.n_classes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active; masks are drawn from a generator seeded with `seed`,
    /// so the same seed always reproduces the same masks.
    Train { seed: u64 },
}

#[derive(Debug, Clone)]
struct Trace<T> {
    conv_inputs: Vec<Tensor<T>>,
    conv_outputs: Vec<Tensor<T>>,
    pool_inputs_len: Vec<usize>,
    pool_argmax: Vec<Vec<usize>>,
    pooled_shape: Vec<usize>,
    mask_flat: Option<DropoutMask<T>>,
    fc_input: Vec<T>,
    fc_output: Tensor<T>,
    mask_fc: Option<DropoutMask<T>>,
    out_input: Vec<T>,
    logits: Vec<T>,
    probs: Vec<T>,
}

/// Intermediates recorded by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct Tape<T>(Option<Trace<T>>);

impl<T> Default for Tape<T> {
    fn default() -> Self {
        Tape(None)
    }
}

impl<T> Tape<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_recorded(&self) -> bool {
        self.0.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct CnnGradients<T> {
    /// Same order as [`Cnn::params`].
    pub params: Vec<Tensor<T>>,
    pub input: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cnn<T> {
    arch: CnnArch,
    convs: Vec<ConvLayer<T>>,
    fc: DenseLayer<T>,
    out: DenseLayer<T>,
}

impl<T: Real> Cnn<T> {
    /// Glorot-uniform weights and zero biases drawn from `seed`.
    pub fn new(arch: CnnArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut r = rng::seeded(seed);
        let mut convs = Vec::with_capacity(2 * arch.conv_pairs);
        let mut c_in = arch.embed_dim;
        for _ in 0..2 * arch.conv_pairs {
            convs.push(ConvLayer::init(c_in, arch.filters, arch.kernel, &mut r)?);
            c_in = arch.filters;
        }
        let fc = DenseLayer::init(arch.flatten_dim(), arch.fc_dim, &mut r)?;
        let out = DenseLayer::init(arch.fc_dim, arch.n_classes, &mut r)?;
        Ok(Cnn { arch, convs, fc, out })
    }

    /// Rebuilds a network from tensors in [`Cnn::param_names`] order.
    pub fn from_params(arch: CnnArch, mut params: Vec<Tensor<T>>) -> Result<Self> {
        arch.validate()?;
        let template = Self::zeros_like(arch)?;
        if params.len() != template.params().len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, got {}",
                template.params().len(),
                params.len()
            )));
        }
        for ((p, t), name) in params.iter().zip(template.params()).zip(template.param_names()) {
            if p.shape() != t.shape() {
                return Err(Error::Shape(format!("{name}: shape {:?}, expected {:?}", p.shape(), t.shape())));
            }
        }
        let mut drain = params.drain(..);
        let mut next = || drain.next().expect("count checked above");
        let mut convs = Vec::with_capacity(2 * arch.conv_pairs);
        for _ in 0..2 * arch.conv_pairs {
            let kernels = next();
            convs.push(ConvLayer::new(kernels, next())?);
        }
        let fc = DenseLayer::new(next(), next())?;
        let out = DenseLayer::new(next(), next())?;
        Ok(Cnn { arch, convs, fc, out })
    }

    fn zeros_like(arch: CnnArch) -> Result<Self> {
        let mut convs = Vec::new();
        let mut c_in = arch.embed_dim;
        for _ in 0..2 * arch.conv_pairs {
            convs.push(ConvLayer::new(
                Tensor::zeros(&[arch.filters, arch.kernel, c_in]),
                Tensor::zeros(&[arch.filters]),
            )?);
            c_in = arch.filters;
        }
        Ok(Cnn {
            arch,
            convs,
            fc: DenseLayer::new(Tensor::zeros(&[arch.fc_dim, arch.flatten_dim()]), Tensor::zeros(&[arch.fc_dim]))?,
            out: DenseLayer::new(Tensor::zeros(&[arch.n_classes, arch.fc_dim]), Tensor::zeros(&[arch.n_classes]))?,
        })
    }

    pub fn arch(&self) -> &CnnArch {
        &self.arch
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut v = Vec::with_capacity(2 * self.convs.len() + 4);
        for c in &self.convs {
            v.push(&c.kernels);
            v.push(&c.bias);
        }
        v.extend([&self.fc.weights, &self.fc.bias, &self.out.weights, &self.out.bias]);
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = Vec::with_capacity(2 * self.convs.len() + 4);
        for c in &mut self.convs {
            v.push(&mut c.kernels);
            v.push(&mut c.bias);
        }
        v.extend([
            &mut self.fc.weights,
            &mut self.fc.bias,
            &mut self.out.weights,
            &mut self.out.bias,
        ]);
        v
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.convs.len() {
            names.push(format!("conv{i}.kernels"));
            names.push(format!("conv{i}.bias"));
        }
        names.extend(["fc.weights", "fc.bias", "out.weights", "out.bias"].map(String::from));
        names
    }

    /// Number of scalars actually allocated.
    pub fn allocated_params(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> Cnn<U> {
        let params = self.params().into_iter().map(|t| t.cast()).collect();
        Cnn::from_params(self.arch, params).expect("cast preserves shapes")
    }

    /// Class probabilities for a `[max_len, embed_dim]` input. Pass a tape
    /// to record what [`Cnn::backward`] needs.
    pub fn forward(&self, x: &Tensor<T>, mode: Mode, tape: Option<&mut Tape<T>>) -> Result<Vec<T>> {
        let a = &self.arch;
        if x.shape() != [a.max_len, a.embed_dim] {
            return Err(Error::Shape(format!(
                "cnn input shape {:?}, expected [{}, {}]",
                x.shape(),
                a.max_len,
                a.embed_dim
            )));
        }
        let (train, mut r) = match mode {
            Mode::Eval => (false, rng::seeded(0)),
            Mode::Train { seed } => (true, rng::seeded(seed)),
        };
        let mut conv_inputs = Vec::with_capacity(self.convs.len());
        let mut conv_outputs = Vec::with_capacity(self.convs.len());
        let mut pool_inputs_len = Vec::with_capacity(a.conv_pairs);
        let mut pool_argmax = Vec::with_capacity(a.conv_pairs);
        let mut h = x.clone();
        for pair in self.convs.chunks(2) {
            for layer in pair {
                let out = relu(&conv1d_forward(&h, layer)?);
                conv_inputs.push(std::mem::replace(&mut h, out.clone()));
                conv_outputs.push(out);
            }
            pool_inputs_len.push(h.shape()[0]);
            let (pooled, argmax) = maxpool1d(&h, a.pool, a.pool)?;
            pool_argmax.push(argmax);
            h = pooled;
        }
        let pooled_shape = h.shape().to_vec();
        let (flat, mask_flat) = dropout(&h, a.dropout_p, train, &mut r)?;
        let fc_input = flat.into_data();
        let fc_pre = dense_forward(&fc_input, &self.fc)?;
        let fc_output = relu(&Tensor::new(vec![a.fc_dim], fc_pre)?);
        let (dropped, mask_fc) = dropout(&fc_output, a.dropout_p, train, &mut r)?;
        let out_input = dropped.into_data();
        let logits = dense_forward(&out_input, &self.out)?;
        let probs = softmax(&logits);
        if let Some(tape) = tape {
            tape.0 = Some(Trace {
                conv_inputs,
                conv_outputs,
                pool_inputs_len,
                pool_argmax,
                pooled_shape,
                mask_flat,
                fc_input,
                fc_output,
                mask_fc,
                out_input,
                logits,
                probs: probs.clone(),
            });
        }
        Ok(probs)
    }

    pub fn logits(&self, x: &Tensor<T>, mode: Mode) -> Result<Vec<T>> {
        let mut tape = Tape::new();
        self.forward(x, mode, Some(&mut tape))?;
        Ok(tape.0.expect("just recorded").logits)
    }

    /// Reverse-mode gradients given `d loss / d logits`.
    pub fn backward(&self, tape: &Tape<T>, grad_logits: &[T]) -> Result<CnnGradients<T>> {
        let tr = tape
            .0
            .as_ref()
            .ok_or_else(|| Error::Precondition("backward called before a recorded forward pass".into()))?;
        let out_g = dense_backward(&tr.out_input, &self.out, grad_logits)?;
        let g = Tensor::new(vec![self.arch.fc_dim], out_g.input)?;
        let g = dropout_backward(&g, tr.mask_fc.as_ref());
        let g = relu_backward(&tr.fc_output, &g);
        let fc_g = dense_backward(&tr.fc_input, &self.fc, g.data())?;
        let g = Tensor::new(tr.pooled_shape.clone(), fc_g.input)?;
        let mut g = dropout_backward(&g, tr.mask_flat.as_ref());

        let mut conv_grads = vec![None; self.convs.len()];
        for pair in (0..self.arch.conv_pairs).rev() {
            g = maxpool1d_backward(tr.pool_inputs_len[pair], &g, &tr.pool_argmax[pair])?;
            for idx in [2 * pair + 1, 2 * pair] {
                let g_pre = relu_backward(&tr.conv_outputs[idx], &g);
                let cg = conv1d_backward(&tr.conv_inputs[idx], &self.convs[idx], &g_pre)?;
                g = cg.input;
                conv_grads[idx] = Some((cg.kernels, cg.bias));
            }
        }
        let mut params = Vec::with_capacity(2 * self.convs.len() + 4);
        for (k, b) in conv_grads.into_iter().map(|c| c.expect("every conv visited")) {
            params.push(k);
            params.push(b);
        }
        params.extend([fc_g.weights, fc_g.bias, out_g.weights, out_g.bias]);
        Ok(CnnGradients { params, input: g })
    }

    /// Cross-entropy loss and its gradients for one labelled example.
    pub fn loss_and_gradients(&self, x: &Tensor<T>, label: usize, mode: Mode) -> Result<(T, CnnGradients<T>)> {
        let mut tape = Tape::new();
        let probs = self.forward(x, mode, Some(&mut tape))?;
        let grad_logits = softmax_cross_entropy_grad(&probs, label)?;
        let grads = self.backward(&tape, &grad_logits)?;
        let trace = tape.0.as_ref().expect("just recorded");
        Ok((cross_entropy_from_logits(&trace.logits, label)?, grads))
    }

    /// Loss only; used by finite-difference checks.
    pub fn loss(&self, x: &Tensor<T>, label: usize, mode: Mode) -> Result<T> {
        let mut tape = Tape::new();
        self.forward(x, mode, Some(&mut tape))?;
        cross_entropy_from_logits(&tape.0.expect("just recorded").logits, label)
    }

    /// Recorded probabilities of the last forward pass on `tape`.
    pub fn recorded_probs<'a>(&self, tape: &'a Tape<T>) -> Option<&'a [T]> {
        tape.0.as_ref().map(|t| t.probs.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{grad_check, softmax};
    use rand::Rng;

    pub(crate) fn toy_arch() -> CnnArch {
        CnnArch {
            max_len: 8,
            embed_dim: 6,
            conv_pairs: 1,
            filters: 4,
            kernel: 3,
            pool: 2,
            dropout_p: 0.5,
            fc_dim: 5,
            n_classes: 3,
        }
    }

    fn flat(net: &Cnn<f64>) -> Vec<f64> {
        net.params().iter().flat_map(|t| t.data().to_vec()).collect()
    }

    fn unflat(net: &Cnn<f64>, theta: &[f64]) -> Cnn<f64> {
        let mut offset = 0;
        let params = net
            .params()
            .iter()
            .map(|t| {
                let n = t.len();
                offset += n;
                Tensor::new(t.shape().to_vec(), theta[offset - n..offset].to_vec()).unwrap()
            })
            .collect();
        Cnn::from_params(*net.arch(), params).unwrap()
    }

    #[test]
    fn toy_parameter_count() {
        let arch = toy_arch();
        assert_eq!(arch.parameter_count(), 231);
        let net = Cnn::<f64>::new(arch, 1).unwrap();
        assert_eq!(net.allocated_params(), 231);
    }

    #[test]
    fn rejects_infeasible_arch() {
        let mut arch = toy_arch();
        arch.conv_pairs = 4;
        assert!(Cnn::<f32>::new(arch, 0).is_err());
        arch.conv_pairs = 1;
        arch.kernel = 4;
        assert!(Cnn::<f32>::new(arch, 0).is_err());
    }

    #[test]
    fn backward_without_forward_fails() {
        let net = Cnn::<f64>::new(toy_arch(), 3).unwrap();
        let err = net.backward(&Tape::new(), &[0.0; 3]).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn logits_gradient_is_p_minus_onehot() {
        let net = Cnn::<f64>::new(toy_arch(), 3).unwrap();
        let mut r = rng::seeded(8);
        let x = Tensor::from_fn(&[8, 6], |_| r.gen_range(-1.0..1.0));
        let mut tape = Tape::new();
        let p = net.forward(&x, Mode::Eval, Some(&mut tape)).unwrap();
        let g = softmax_cross_entropy_grad(&p, 1).unwrap();
        assert!((g[1] - (p[1] - 1.0)).abs() < 1e-15);
        assert_eq!(net.recorded_probs(&tape).unwrap(), p.as_slice());
        let total: f64 = softmax(&net.logits(&x, Mode::Eval).unwrap()).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences_with_frozen_dropout() {
        let net = Cnn::<f64>::new(toy_arch(), 11).unwrap();
        let mut r = rng::seeded(12);
        let x = Tensor::from_fn(&[8, 6], |_| r.gen_range(-1.0..1.0));
        let mode = Mode::Train { seed: 99 };
        let report = grad_check(
            |theta| {
                let n = unflat(&net, theta);
                let (loss, g) = n.loss_and_gradients(&x, 2, mode).unwrap();
                (loss, g.params.iter().flat_map(|t| t.data().to_vec()).collect())
            },
            &flat(&net),
            1e-3,
        );
        assert!(report.max < 1e-4, "max relative error {}", report.max);
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let net = Cnn::<f64>::new(toy_arch(), 21).unwrap();
        let mut r = rng::seeded(22);
        let x = Tensor::from_fn(&[8, 6], |_| r.gen_range(-1.0..1.0));
        let report = grad_check(
            |xs| {
                let xt = Tensor::new(vec![8, 6], xs.to_vec()).unwrap();
                let (loss, g) = net.loss_and_gradients(&xt, 0, Mode::Eval).unwrap();
                (loss, g.input.into_data())
            },
            x.data(),
            1e-3,
        );
        assert!(report.max < 1e-4, "max relative error {}", report.max);
    }

    #[test]
    fn eval_dropout_passes_gradient_unchanged() {
        let mut arch = toy_arch();
        arch.dropout_p = 0.0;
        let net = Cnn::<f64>::new(arch, 5).unwrap();
        let mut with_p = toy_arch();
        with_p.dropout_p = 0.9;
        let net_p = Cnn::from_params(with_p, net.params().into_iter().cloned().collect()).unwrap();
        let mut r = rng::seeded(6);
        let x = Tensor::from_fn(&[8, 6], |_| r.gen_range(-1.0..1.0));
        let (_, a) = net.loss_and_gradients(&x, 0, Mode::Eval).unwrap();
        let (_, b) = net_p.loss_and_gradients(&x, 0, Mode::Eval).unwrap();
        for (ga, gb) in a.params.iter().zip(&b.params) {
            assert_eq!(ga, gb);
        }
    }
}
