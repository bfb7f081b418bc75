use std::time::Instant;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::format::TensorFile;
use crate::neural::{softmax, Real};
use crate::rng;

use super::{accuracy, predict_class, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRConfig {
    pub n_features: usize,
    pub n_classes: usize,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl LogRConfig {
    pub fn new(n_features: usize, n_classes: usize) -> Self {
        LogRConfig {
            n_features,
            n_classes,
            l2_lambda: 1e-4,
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 64,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 || self.n_classes == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(format!("logistic regression counts must be positive: {self:?}")));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("l2_lambda {} must be non-negative", self.l2_lambda)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }

    pub(crate) fn write_to(&self, f: &mut TensorFile) {
        f.set("logreg.n_features", self.n_features);
        f.set("logreg.n_classes", self.n_classes);
        f.set("logreg.l2_lambda", self.l2_lambda);
        f.set("logreg.learning_rate", self.learning_rate);
        f.set("logreg.epochs", self.epochs);
        f.set("logreg.batch_size", self.batch_size);
        f.set("logreg.seed", self.seed);
    }

    pub(crate) fn read_from(f: &TensorFile) -> Result<Self> {
        let cfg = LogRConfig {
            n_features: f.parse("logreg.n_features")?,
            n_classes: f.parse("logreg.n_classes")?,
            l2_lambda: f.parse("logreg.l2_lambda")?,
            learning_rate: f.parse("logreg.learning_rate")?,
            epochs: f.parse("logreg.epochs")?,
            batch_size: f.parse("logreg.batch_size")?,
            seed: f.parse("logreg.seed")?,
        };
        cfg.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(cfg)
    }
}

/// Multinomial logistic regression; `weights` is `n_classes x n_features`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRModel {
    pub config: LogRConfig,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl LogRModel {
    pub fn probabilities(&self, x: &[f32]) -> Result<Vec<f32>> {
        let f = self.config.n_features;
        if x.len() != f {
            return Err(Error::Shape(format!("feature vector has {} entries, model expects {f}", x.len())));
        }
        let logits: Vec<f32> = self
            .weights
            .chunks(f)
            .zip(&self.bias)
            .map(|(w, &b)| w.iter().zip(x).map(|(a, b)| a * b).sum::<f32>() + b)
            .collect();
        Ok(softmax(&logits))
    }

    pub fn predict(&self, x: &[f32]) -> Result<usize> {
        Ok(predict_class(&self.probabilities(x)?))
    }

    pub fn evaluate(&self, features: &[Vec<f32>], labels: &[usize]) -> Result<f64> {
        let predicted = features.iter().map(|x| self.predict(x)).collect::<Result<Vec<_>>>()?;
        accuracy(&predicted, labels)
    }
}

/// Mean softmax cross-entropy over `rows` plus `(l2_lambda / 2) * ||W||^2`,
/// with gradients for `weights` and `bias`. The bias is not regularised.
pub fn logreg_loss_and_grad<T: Real>(
    weights: &[T],
    bias: &[T],
    rows: &[&[T]],
    labels: &[usize],
    l2_lambda: T,
) -> Result<(T, Vec<T>, Vec<T>)> {
    let c = bias.len();
    if c == 0 || !weights.len().is_multiple_of(c) || rows.len() != labels.len() || rows.is_empty() {
        return Err(Error::Shape(format!(
            "{} weights, {c} classes, {} rows, {} labels",
            weights.len(),
            rows.len(),
            labels.len()
        )));
    }
    let f = weights.len() / c;
    let mut gw = vec![T::zero(); weights.len()];
    let mut gb = vec![T::zero(); c];
    let mut loss = T::zero();
    let inv_n = T::one() / T::of(rows.len() as f64);
    for (x, &y) in rows.iter().zip(labels) {
        if x.len() != f {
            return Err(Error::Shape(format!("row has {} features, expected {f}", x.len())));
        }
        if y >= c {
            return Err(Error::InvalidArgument(format!("label {y} out of range for {c} classes")));
        }
        let logits: Vec<T> = weights
            .chunks(f)
            .zip(bias)
            .map(|(w, &b)| w.iter().zip(*x).map(|(&a, &v)| a * v).sum::<T>() + b)
            .collect();
        let p = softmax(&logits);
        loss += -p[y].max(T::min_positive_value()).ln() * inv_n;
        for k in 0..c {
            let delta = (p[k] - if k == y { T::one() } else { T::zero() }) * inv_n;
            gb[k] += delta;
            for (g, &v) in gw[k * f..(k + 1) * f].iter_mut().zip(*x) {
                *g += delta * v;
            }
        }
    }
    let half = T::of(0.5);
    for (g, &w) in gw.iter_mut().zip(weights) {
        loss += half * l2_lambda * w * w;
        *g += l2_lambda * w;
    }
    Ok((loss, gw, gb))
}

/// Mini-batch gradient descent from zero weights. Arithmetic is done in
/// double precision; the stored model is single precision.
///
/// The per-epoch accuracy in the report is measured on `valid` when given,
/// otherwise on the training rows.
pub fn train_logreg(
    features: &[Vec<f32>],
    labels: &[usize],
    valid: Option<(&[Vec<f32>], &[usize])>,
    cfg: &LogRConfig,
) -> Result<(LogRModel, TrainReport)> {
    let started = Instant::now();
    cfg.validate()?;
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Shape(format!("{} feature rows for {} labels", features.len(), labels.len())));
    }
    if let Some(row) = features.iter().find(|r| r.len() != cfg.n_features) {
        return Err(Error::Shape(format!("feature row of width {}, expected {}", row.len(), cfg.n_features)));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= cfg.n_classes) {
        return Err(Error::InvalidArgument(format!("label {y} out of range for {} classes", cfg.n_classes)));
    }
    let rows: Vec<Vec<f64>> = features.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
    let mut w = vec![0.0f64; cfg.n_classes * cfg.n_features];
    let mut b = vec![0.0f64; cfg.n_classes];
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut report = TrainReport::default();
    let snapshot = |w: &[f64], b: &[f64]| LogRModel {
        config: *cfg,
        weights: w.iter().map(|&v| v as f32).collect(),
        bias: b.iter().map(|&v| v as f32).collect(),
    };

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng::seeded(rng::derive(cfg.seed, &[3, epoch as u64])));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| rows[i].as_slice()).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (loss, gw, gb) = logreg_loss_and_grad(&w, &b, &xs, &ys, cfg.l2_lambda)?;
            epoch_loss += loss * batch.len() as f64;
            for (p, g) in w.iter_mut().zip(&gw) {
                *p -= cfg.learning_rate * g;
            }
            for (p, g) in b.iter_mut().zip(&gb) {
                *p -= cfg.learning_rate * g;
            }
        }
        if !w.iter().chain(&b).all(|v| v.is_finite()) {
            return Err(Error::Invariant(format!("non-finite logistic regression weights after epoch {epoch}")));
        }
        report.epoch_loss.push(epoch_loss / rows.len() as f64);
        let model = snapshot(&w, &b);
        let acc = match valid {
            Some((vx, vy)) => model.evaluate(vx, vy)?,
            None => model.evaluate(features, labels)?,
        };
        report.valid_accuracy.push(acc);
    }
    report.seconds = started.elapsed().as_secs_f64();
    Ok((snapshot(&w, &b), report))
}
