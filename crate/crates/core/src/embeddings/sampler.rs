use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{Error, Result};

/// Negative-sample distribution `P(w) ∝ count(w)^0.75`.
#[derive(Debug, Clone)]
pub struct UnigramSampler {
    probs: Vec<f64>,
    dist: WeightedIndex<f64>,
}

impl UnigramSampler {
    /// `excluded` ids get zero probability regardless of their counts.
    pub fn new(counts: &[u64], excluded: &[usize]) -> Result<Self> {
        let weights: Vec<f64> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| if excluded.contains(&i) { 0.0 } else { (c as f64).powf(0.75) })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Precondition("no token has positive frequency to sample from".into()));
        }
        let dist = WeightedIndex::new(&weights).map_err(|e| Error::Invariant(format!("sampler weights: {e}")))?;
        Ok(UnigramSampler {
            probs: weights.iter().map(|w| w / total).collect(),
            dist,
        })
    }

    pub fn probability(&self, id: usize) -> f64 {
        self.probs.get(id).copied().unwrap_or(0.0)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        self.dist.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn empirical_frequencies_match() {
        let counts = [0, 7, 100, 3, 40, 1, 250];
        let sampler = UnigramSampler::new(&counts, &[0, 1]).unwrap();
        let weights: Vec<f64> = counts.iter().enumerate().map(|(i, &c)| if i < 2 { 0.0 } else { (c as f64).powf(0.75) }).collect();
        let total: f64 = weights.iter().sum();
        let mut r = rng::seeded(42);
        let draws = 1_000_000;
        let mut hits = vec![0usize; counts.len()];
        for _ in 0..draws {
            hits[sampler.sample(&mut r)] += 1;
        }
        for (i, &h) in hits.iter().enumerate() {
            let expected = weights[i] / total;
            assert!((sampler.probability(i) - expected).abs() < 1e-15);
            let empirical = h as f64 / draws as f64;
            assert!((empirical - expected).abs() < 0.01, "token {i}: {empirical} vs {expected}");
        }
        assert_eq!(hits[0] + hits[1], 0);
    }

    #[test]
    fn all_zero_counts_rejected() {
        assert!(UnigramSampler::new(&[0, 0, 0], &[]).is_err());
        assert!(UnigramSampler::new(&[0, 5], &[1]).is_err());
    }
}
