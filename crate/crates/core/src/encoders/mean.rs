use crate::embeddings::{Vocabulary, WordEmbeddings};

/// How out-of-vocabulary tokens enter the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanMode {
    /// OOV tokens count as zero vectors; the denominator is the token count.
    Zero,
    /// OOV tokens are dropped; the denominator is the in-vocabulary count.
    Elim,
}

/// Arithmetic mean of the token vectors. Empty or all-OOV input gives the
/// zero vector in both modes.
pub fn mean_embedding<S: AsRef<str>>(e: &WordEmbeddings, vocab: &Vocabulary, tokens: &[S], mode: MeanMode) -> Vec<f32> {
    let mut sum = vec![0.0f64; e.dim()];
    let mut known = 0usize;
    for t in tokens {
        if let Some(v) = e.lookup(vocab, t.as_ref()) {
            known += 1;
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += f64::from(x);
            }
        }
    }
    if known == 0 {
        return vec![0.0; e.dim()];
    }
    let denom = match mode {
        MeanMode::Zero => tokens.len(),
        MeanMode::Elim => known,
    } as f64;
    sum.into_iter().map(|s| (s / denom) as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::build_vocab;
    use proptest::prelude::*;

    /// a = (2, 0), b = (0, 2)
    fn toy() -> (WordEmbeddings, Vocabulary) {
        let vocab = build_vocab(&[vec!["a", "a", "b"]], 1);
        let e = WordEmbeddings::new(2, vec![0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 2.0]).unwrap();
        (e, vocab)
    }

    #[test]
    fn two_point_mean() {
        let (e, v) = toy();
        for mode in [MeanMode::Zero, MeanMode::Elim] {
            assert_eq!(mean_embedding(&e, &v, &["a", "b"], mode), [1.0, 1.0]);
        }
    }

    #[test]
    fn oov_policies() {
        let (e, v) = toy();
        assert_eq!(mean_embedding(&e, &v, &["a", "zzz"], MeanMode::Zero), [1.0, 0.0]);
        assert_eq!(mean_embedding(&e, &v, &["a", "zzz"], MeanMode::Elim), [2.0, 0.0]);
        for mode in [MeanMode::Zero, MeanMode::Elim] {
            assert_eq!(mean_embedding(&e, &v, &["zzz"], mode), [0.0, 0.0]);
            assert_eq!(mean_embedding::<&str>(&e, &v, &[], mode), [0.0, 0.0]);
        }
    }

    proptest! {
        #[test]
        fn permutation_invariant(values in proptest::collection::vec(-5.0f32..5.0, 8), order in Just((0..7).collect::<Vec<usize>>()).prop_shuffle()) {
            let words = ["a", "b", "c", "d"];
            let vocab = build_vocab(&[words.to_vec()], 1);
            let mut data = vec![0.0f32; 4];
            data.extend(values);
            let e = WordEmbeddings::new(2, data).unwrap();
            let tokens = ["a", "b", "oov", "c", "d", "a", "x"];
            let shuffled: Vec<&str> = order.iter().map(|&i| tokens[i]).collect();
            for mode in [MeanMode::Zero, MeanMode::Elim] {
                let a = mean_embedding(&e, &vocab, &tokens, mode);
                let b = mean_embedding(&e, &vocab, &shuffled, mode);
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() <= 1e-6);
                }
            }
        }
    }
}
