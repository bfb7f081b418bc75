//! Word and sentence embeddings: vocabulary construction, skip-gram word
//! vectors trained with negative sampling, PV-DM sentence vectors, and the
//! plain-text embedding file format.

mod doc2vec;
mod io;
mod negative;
mod sampler;
mod vocab;
mod word2vec;

pub use doc2vec::{infer_doc_vector, train_doc2vec, Doc2vecConfig, Doc2vecModel};
pub use io::{load_embeddings, read_embeddings, save_embeddings, write_embeddings};
pub(crate) use io::{format_matrix, parse_matrix};
pub use negative::{ns_loss_and_grad, NsGradients};
pub use sampler::UnigramSampler;
pub use vocab::{build_vocab, Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};
pub use word2vec::{train_word2vec, Word2vecConfig, WordEmbeddings};

/// Learning rate after `done` of `total` updates: linear decay from
/// `initial` down to a floor of 10% of `initial`.
pub(crate) fn decayed_rate(initial: f64, done: u64, total: u64) -> f64 {
    let progress = if total == 0 { 0.0 } else { (done as f64 / total as f64).min(1.0) };
    initial * (1.0 - 0.9 * progress)
}

/// Cosine similarity; zero vectors give 0.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_floor_is_ten_percent() {
        assert_eq!(decayed_rate(0.025, 0, 100), 0.025);
        assert!((decayed_rate(0.025, 100, 100) - 0.0025).abs() < 1e-15);
        assert!((decayed_rate(0.025, 500, 100) - 0.0025).abs() < 1e-15);
        assert!((decayed_rate(1.0, 50, 100) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn cosine_basics() {
        assert!((cosine(&[1.0, 0.0], &[2.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!(cosine(&[1.0, 0.0], &[0.0, 3.0]).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }
}
