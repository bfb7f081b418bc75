//! The negative-sampling objective shared by skip-gram and PV-DM.
//!
//! For a predictor vector `h` and output vectors `u_i` with labels `y_i`
//! (one positive, the rest sampled negatives), the loss is
//! `-sum_i log σ(±h·u_i)`. Both the training update and the pure gradient
//! below go through [`descent_coefficient`].

use crate::neural::Real;

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn log_sigmoid<T: Real>(x: T) -> T {
    let zero = T::zero();
    -((-x).max(zero) + (T::one() + (-x.abs()).exp()).ln())
}

/// `-dL/d(score)` for one logistic term: `y - σ(score)`.
#[inline]
pub(crate) fn descent_coefficient<T: Real>(score: T, positive: bool) -> T {
    let y = if positive { T::one() } else { T::zero() };
    y - sigmoid(score)
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsGradients<T> {
    pub loss: T,
    pub input: Vec<T>,
    pub outputs: Vec<Vec<T>>,
}

/// Loss and exact gradients for a single (predictor, targets) update.
pub fn ns_loss_and_grad<T: Real>(input: &[T], outputs: &[&[T]], positive: &[bool]) -> NsGradients<T> {
    assert_eq!(outputs.len(), positive.len());
    let mut loss = T::zero();
    let mut g_in = vec![T::zero(); input.len()];
    let mut g_out = Vec::with_capacity(outputs.len());
    for (&u, &y) in outputs.iter().zip(positive) {
        let s = dot(input, u);
        loss += -log_sigmoid(if y { s } else { -s });
        let c = descent_coefficient(s, y);
        for (g, &uv) in g_in.iter_mut().zip(u) {
            *g += -c * uv;
        }
        g_out.push(input.iter().map(|&h| -c * h).collect());
    }
    NsGradients {
        loss,
        input: g_in,
        outputs: g_out,
    }
}

/// In-place SGD step on the output rows of `targets`. The descent step for
/// the predictor (`-lr * dL/dh`) is added to `input_step`; the caller applies
/// it once all targets are processed.
pub(crate) fn ns_update(
    input: &[f32],
    output_matrix: &mut [f32],
    dim: usize,
    targets: &[(usize, bool)],
    lr: f32,
    input_step: &mut [f32],
) {
    for &(id, positive) in targets {
        let row = &mut output_matrix[id * dim..(id + 1) * dim];
        let g = descent_coefficient(dot(input, row), positive) * lr;
        for ((step, r), &h) in input_step.iter_mut().zip(row.iter_mut()).zip(input) {
            *step += g * *r;
            *r += g * h;
        }
    }
}

/// Like [`ns_update`] but with the output rows frozen: only the predictor
/// step is accumulated.
pub(crate) fn ns_input_step(
    input: &[f32],
    output_matrix: &[f32],
    dim: usize,
    targets: &[(usize, bool)],
    lr: f32,
    input_step: &mut [f32],
) {
    for &(id, positive) in targets {
        let row = &output_matrix[id * dim..(id + 1) * dim];
        let g = descent_coefficient(dot(input, row), positive) * lr;
        for (step, &r) in input_step.iter_mut().zip(row) {
            *step += g * r;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::grad_check;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn gradients_match_central_differences() {
        let mut r = rng::seeded(17);
        let dim = 8;
        let n_targets = 6;
        for _ in 0..20 {
            let theta: Vec<f64> = (0..dim * (n_targets + 1)).map(|_| r.gen_range(-0.8..0.8)).collect();
            let labels: Vec<bool> = (0..n_targets).map(|i| i == 0).collect();
            let f = |t: &[f64]| {
                let (h, rest) = t.split_at(dim);
                let outs: Vec<&[f64]> = rest.chunks(dim).collect();
                let g = ns_loss_and_grad(h, &outs, &labels);
                let mut flat = g.input.clone();
                for o in g.outputs {
                    flat.extend(o);
                }
                (g.loss, flat)
            };
            let report = grad_check(f, &theta, 1e-5);
            assert!(report.max < 1e-4, "max relative error {}", report.max);
        }
    }

    #[test]
    fn update_steps_against_gradient() {
        let dim = 3;
        let input = [0.2f32, -0.1, 0.4];
        let mut out = vec![0.1f32, 0.3, -0.2, 0.0, 0.5, 0.1];
        let before = out.clone();
        let mut step = vec![0.0f32; dim];
        let lr = 0.05;
        ns_update(&input, &mut out, dim, &[(0, true), (1, false)], lr, &mut step);
        let rows: Vec<&[f32]> = before.chunks(dim).collect();
        let g = ns_loss_and_grad(&input, &rows, &[true, false]);
        let mut frozen_step = vec![0.0f32; dim];
        ns_input_step(&input, &before, dim, &[(0, true), (1, false)], lr, &mut frozen_step);
        assert_eq!(frozen_step, step);
        for i in 0..dim {
            assert!((step[i] + lr * g.input[i]).abs() < 1e-6);
            assert!((out[i] - (before[i] - lr * g.outputs[0][i])).abs() < 1e-6);
        }
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!(log_sigmoid(-800.0f64).is_finite());
        assert!((log_sigmoid(800.0f64)).abs() < 1e-300);
        assert!((log_sigmoid(0.0f64) + 2f64.ln()).abs() < 1e-15);
    }
}
