use crate::error::{Error, Result};

use super::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// `v <- momentum * v + g; θ <- θ - lr * v`
    SgdMomentum { momentum: f64 },
    /// Bias-corrected Adam.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer with one accumulator set per parameter tensor.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    learning_rate: f64,
    steps: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, learning_rate: f64, shapes: &[&[usize]]) -> Self {
        let sizes: Vec<usize> = shapes.iter().map(|s| s.iter().product()).collect();
        let second = match kind {
            OptimizerKind::Adam { .. } => sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            OptimizerKind::SgdMomentum { .. } => Vec::new(),
        };
        Optimizer {
            kind,
            learning_rate,
            steps: 0,
            first: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second,
        }
    }

    pub fn for_params(kind: OptimizerKind, learning_rate: f64, params: &[&Tensor<T>]) -> Self {
        let shapes: Vec<&[usize]> = params.iter().map(|p| p.shape()).collect();
        Self::new(kind, learning_rate, &shapes)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.len() != self.first[i].len() {
                return Err(Error::Shape(format!(
                    "tensor {i}: param {:?}, grad {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        self.steps += 1;
        let lr = T::of(self.learning_rate);
        match self.kind {
            OptimizerKind::SgdMomentum { momentum } => {
                let mu = T::of(momentum);
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.first) {
                    for ((pv, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.iter_mut()) {
                        *vv = mu * *vv + gv;
                        *pv = *pv - lr * *vv;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.steps as i32;
                let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(eps));
                let c1 = T::one() - T::of(beta1.powi(t));
                let c2 = T::one() - T::of(beta2.powi(t));
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
                    for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mv = b1 * *mv + (T::one() - b1) * gv;
                        *vv = b2 * *vv + (T::one() - b2) * gv * gv;
                        let m_hat = *mv / c1;
                        let v_hat = *vv / c2;
                        *pv = *pv - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor<f64> {
        Tensor::new(vec![1], vec![v]).unwrap()
    }

    #[test]
    fn plain_sgd_arithmetic() {
        let mut theta = scalar(1.0);
        let mut opt = Optimizer::new(OptimizerKind::SgdMomentum { momentum: 0.0 }, 0.1, &[&[1]]);
        opt.step(&mut [&mut theta], &[scalar(2.0)]).unwrap();
        assert!((theta.data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut theta = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = theta.clone();
        let mut opt = Optimizer::new(OptimizerKind::SgdMomentum { momentum: 0.9 }, 0.1, &[&[3]]);
        opt.step(&mut [&mut theta], &[Tensor::zeros(&[3])]).unwrap();
        assert_eq!(theta, before);
    }

    #[test]
    fn momentum_accumulates() {
        let mut theta = scalar(0.0);
        let mut opt = Optimizer::new(OptimizerKind::SgdMomentum { momentum: 0.5 }, 1.0, &[&[1]]);
        opt.step(&mut [&mut theta], &[scalar(1.0)]).unwrap();
        opt.step(&mut [&mut theta], &[scalar(1.0)]).unwrap();
        assert!((theta.data()[0] + 2.5).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_has_magnitude_lr() {
        for scale in [1e-3, 1.0, 250.0] {
            let mut theta = Tensor::new(vec![4], vec![0.0; 4]).unwrap();
            let g = Tensor::new(vec![4], vec![scale, -scale, scale * 2.0, -scale * 0.5]).unwrap();
            let mut opt = Optimizer::new(OptimizerKind::adam(), 1e-3, &[&[4]]);
            opt.step(&mut [&mut theta], &[g]).unwrap();
            for v in theta.data() {
                assert!((f64::abs(*v) - 1e-3).abs() < 1e-7, "scale {scale}: step {v}");
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut theta = scalar(0.0);
        let mut opt = Optimizer::new(OptimizerKind::adam(), 1e-3, &[&[1]]);
        assert!(opt.step(&mut [&mut theta], &[Tensor::zeros(&[2])]).is_err());
    }
}
