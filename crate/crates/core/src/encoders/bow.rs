use crate::embeddings::{Vocabulary, WordEmbeddings};
use crate::error::{Error, Result};

use super::kmeans::{squared_distance, Codebook};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BowConfig {
    pub k: usize,
    pub k_soft: usize,
    pub normalize: bool,
}

impl Default for BowConfig {
    fn default() -> Self {
        BowConfig {
            k: 1000,
            k_soft: 50,
            normalize: true,
        }
    }
}

impl BowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k_soft == 0 {
            return Err(Error::InvalidArgument(format!(
                "codebook size ({}) and soft neighbour count ({}) must be positive",
                self.k, self.k_soft
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: Vec<f64>,
}

impl Histogram {
    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }
}

/// Soft-assignment histogram: every in-vocabulary token adds `1/R` to the
/// bin of its R-th nearest center for R up to `k_soft`.
pub fn bow_histogram<S: AsRef<str>>(
    cb: &Codebook,
    e: &WordEmbeddings,
    vocab: &Vocabulary,
    tokens: &[S],
    cfg: &BowConfig,
) -> Result<Histogram> {
    cfg.validate()?;
    if cb.dim() != e.dim() {
        return Err(Error::Shape(format!(
            "codebook dimension {} does not match embedding dimension {}",
            cb.dim(),
            e.dim()
        )));
    }
    if cb.k() != cfg.k {
        return Err(Error::Shape(format!("codebook has {} centers, config expects {}", cb.k(), cfg.k)));
    }
    let reach = cfg.k_soft.min(cb.k());
    let mut bins = vec![0.0f64; cb.k()];
    let mut point = vec![0.0f64; cb.dim()];
    let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(cb.k());
    for tok in tokens {
        let Some(v) = e.lookup(vocab, tok.as_ref()) else { continue };
        for (p, &x) in point.iter_mut().zip(v) {
            *p = f64::from(x);
        }
        ranked.clear();
        ranked.extend((0..cb.k()).map(|c| (squared_distance(cb.center(c), &point), c)));
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if reach < ranked.len() {
            ranked.select_nth_unstable_by(reach - 1, order);
        }
        ranked[..reach].sort_unstable_by(order);
        for (r, &(_, c)) in ranked[..reach].iter().enumerate() {
            bins[c] += 1.0 / (r + 1) as f64;
        }
    }
    if cfg.normalize {
        let total: f64 = bins.iter().sum();
        if total > 0.0 {
            for b in &mut bins {
                *b /= total;
            }
        }
    }
    Ok(Histogram { bins })
}
