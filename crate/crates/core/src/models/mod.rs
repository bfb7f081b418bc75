//! The CNN classifier, the logistic-regression classifier shared by the
//! baselines, evaluation helpers and model persistence.

mod cnn;
mod logreg;
mod persist;

pub use cnn::{cnn_forward, parameter_count, train_cnn, train_cnn_encoded, CnnConfig, CnnModel, EncodedExample};
pub use logreg::{logreg_loss_and_grad, train_logreg, LogRConfig, LogRModel};
pub use persist::{load_model, save_model, Model};

use crate::error::{Error, Result};
use crate::neural::Real;

/// Per-epoch training record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
    pub valid_accuracy: Vec<f64>,
    pub seconds: f64,
}

/// Index of the largest probability; the lowest index wins ties.
pub fn predict_class<T: Real>(probs: &[T]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::InvalidArgument("cannot score an empty evaluation set".into()));
    }
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", predicted.len(), truth.len())));
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / predicted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_and_ties() {
        assert_eq!(predict_class(&[0.2f32, 0.5, 0.3]), 1);
        assert_eq!(predict_class(&[0.5f64, 0.5]), 0);
        assert_eq!(predict_class(&[0.1f32, 0.45, 0.45]), 1);
    }

    #[test]
    fn accuracy_ratio() {
        assert_eq!(accuracy(&[0, 1, 2, 2], &[0, 1, 2, 0]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[0], &[0, 1]).is_err());
    }
}
