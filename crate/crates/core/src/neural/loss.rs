use crate::error::{Error, Result};

use super::Real;

/// Max-subtracted softmax.
pub fn softmax<T: Real>(z: &[T]) -> Vec<T> {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_softmax<T: Real>(z: &[T]) -> Vec<T> {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let log_total = z.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
    z.iter().map(|&v| v - log_total).collect()
}

fn check_label(label: usize, n: usize) -> Result<()> {
    if label >= n {
        return Err(Error::InvalidArgument(format!("label {label} out of range for {n} classes")));
    }
    Ok(())
}

/// `-ln p[label]`.
pub fn cross_entropy<T: Real>(p: &[T], label: usize) -> Result<T> {
    check_label(label, p.len())?;
    Ok(-p[label].ln())
}

/// Cross-entropy of `softmax(z)` computed through log-softmax.
pub fn cross_entropy_from_logits<T: Real>(z: &[T], label: usize) -> Result<T> {
    check_label(label, z.len())?;
    Ok(-log_softmax(z)[label])
}

/// Gradient of `cross_entropy(softmax(z), label)` with respect to `z`.
pub fn softmax_cross_entropy_grad<T: Real>(p: &[T], label: usize) -> Result<Vec<T>> {
    check_label(label, p.len())?;
    let mut g = p.to_vec();
    g[label] = g[label] - T::one();
    Ok(g)
}
