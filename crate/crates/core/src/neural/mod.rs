//! A small differentiable kernel library for the text CNN: same-padded 1D
//! convolution, max pooling, dense layers, inverted dropout, softmax
//! cross-entropy, hand-written backward passes, optimizers and a
//! finite-difference gradient checker.
//!
//! Kernels are generic over [`Real`] so training runs in `f32` while
//! gradient checks run the identical code in `f64`.

mod gradcheck;
mod layers;
mod loss;
mod network;
mod optim;
mod tensor;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign};

use num_traits::{Float, FromPrimitive};

pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use layers::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, dropout, dropout_backward, maxpool1d,
    maxpool1d_backward, relu, relu_backward, ConvGrads, ConvLayer, DenseGrads, DenseLayer, DropoutMask,
};
pub use loss::{cross_entropy, cross_entropy_from_logits, log_softmax, softmax, softmax_cross_entropy_grad};
pub use network::{Cnn, CnnArch, CnnGradients, Mode, Tape};
pub use optim::{Optimizer, OptimizerKind};
pub use tensor::Tensor;

/// Floating-point scalar usable by every kernel.
pub trait Real: Float + FromPrimitive + Debug + Default + Send + Sync + Sum + AddAssign + MulAssign + 'static {
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Uniform Glorot/Xavier bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
