use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

use super::negative::ns_update;
use super::sampler::UnigramSampler;
use super::vocab::{Vocabulary, PAD, UNK};
use super::decayed_rate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Word2vecConfig {
    pub dim: usize,
    /// Context radius on each side of the centre word.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: u64,
}

impl Default for Word2vecConfig {
    fn default() -> Self {
        Word2vecConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 2,
        }
    }
}

impl Word2vecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 || self.epochs == 0 || self.min_count == 0 {
            return Err(Error::InvalidArgument(format!("word2vec settings must all be positive: {self:?}")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

/// `V x dim` token vectors; rows `PAD` and `UNK` are all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddings {
    dim: usize,
    data: Vec<f32>,
}

impl WordEmbeddings {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!("{} values do not form rows of width {dim}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding values must be finite".into()));
        }
        Ok(WordEmbeddings { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, id: usize) -> &[f32] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Vector for `token`, or `None` when it is out of vocabulary.
    pub fn lookup(&self, vocab: &Vocabulary, token: &str) -> Option<&[f32]> {
        vocab.id(token).filter(|&id| id > UNK).map(|id| self.row(id))
    }
}

/// Encodes sentences to in-vocabulary ids, dropping reserved and unknown tokens.
pub(super) fn encode_known<S: AsRef<str>>(sentences: &[Vec<S>], vocab: &Vocabulary) -> Vec<Vec<usize>> {
    sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.id(t.as_ref())).filter(|&id| id > UNK).collect())
        .collect()
}

pub(super) fn init_uniform(rows: usize, dim: usize, skip: &[usize], rng: &mut impl Rng) -> Vec<f32> {
    let bound = 0.5 / dim as f32;
    let mut data = vec![0.0f32; rows * dim];
    for (r, row) in data.chunks_mut(dim).enumerate() {
        if skip.contains(&r) {
            continue;
        }
        for v in row {
            *v = rng.gen_range(-bound..bound);
        }
    }
    data
}

/// Skip-gram with negative sampling. Each centre word's vector predicts every
/// word within `window` positions; negatives come from the unigram^0.75
/// distribution. Single-threaded and fully determined by `seed`.
pub fn train_word2vec<S: AsRef<str>>(
    sentences: &[Vec<S>],
    vocab: &Vocabulary,
    cfg: &Word2vecConfig,
    seed: u64,
) -> Result<WordEmbeddings> {
    cfg.validate()?;
    let corpus = encode_known(sentences, vocab);
    let total_tokens: u64 = corpus.iter().map(|s| s.len() as u64).sum();
    if total_tokens == 0 {
        return Err(Error::Precondition("word2vec corpus has no in-vocabulary tokens".into()));
    }
    let sampler = UnigramSampler::new(vocab.counts(), &[PAD, UNK])?;
    let dim = cfg.dim;
    let mut r = rng::seeded(seed);
    let mut input = init_uniform(vocab.len(), dim, &[PAD, UNK], &mut r);
    let mut output = vec![0.0f32; vocab.len() * dim];

    let total_updates = total_tokens * cfg.epochs as u64;
    let mut done = 0u64;
    let mut targets = Vec::with_capacity(cfg.negatives + 1);
    let mut step = vec![0.0f32; dim];
    for _ in 0..cfg.epochs {
        for sentence in &corpus {
            for (t, &center) in sentence.iter().enumerate() {
                let lr = decayed_rate(cfg.learning_rate, done, total_updates) as f32;
                done += 1;
                let lo = t.saturating_sub(cfg.window);
                let hi = (t + cfg.window + 1).min(sentence.len());
                for (c, &context) in sentence.iter().enumerate().take(hi).skip(lo) {
                    if c == t {
                        continue;
                    }
                    targets.clear();
                    targets.push((context, true));
                    for _ in 0..cfg.negatives {
                        let neg = sampler.sample(&mut r);
                        if neg != context {
                            targets.push((neg, false));
                        }
                    }
                    step.iter_mut().for_each(|v| *v = 0.0);
                    let row = &mut input[center * dim..(center + 1) * dim];
                    ns_update(row, &mut output, dim, &targets, lr, &mut step);
                    for (v, s) in row.iter_mut().zip(&step) {
                        *v += s;
                    }
                }
            }
        }
    }
    let emb = WordEmbeddings::new(dim, input)?;
    if emb.row(PAD).iter().chain(emb.row(UNK)).any(|&v| v != 0.0) {
        return Err(Error::Invariant("reserved embedding rows were modified".into()));
    }
    Ok(emb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{build_vocab, cosine};

    /// Two disjoint topics; every sentence draws all its tokens from one.
    pub(crate) fn two_topic_corpus(seed: u64, sentences: usize) -> (Vec<Vec<String>>, Vec<String>, Vec<String>) {
        let topic_a: Vec<String> = (0..8).map(|i| format!("alpha{i}")).collect();
        let topic_b: Vec<String> = (0..8).map(|i| format!("beta{i}")).collect();
        let mut r = rng::seeded(seed);
        let corpus = (0..sentences)
            .map(|i| {
                let topic = if i % 2 == 0 { &topic_a } else { &topic_b };
                (0..10).map(|_| topic[r.gen_range(0..topic.len())].clone()).collect()
            })
            .collect();
        (corpus, topic_a, topic_b)
    }

    fn small_cfg() -> Word2vecConfig {
        Word2vecConfig {
            dim: 16,
            window: 3,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 1,
        }
    }

    #[test]
    fn topics_separate() {
        let (corpus, a, b) = two_topic_corpus(3, 400);
        let vocab = build_vocab(&corpus, 1);
        let emb = train_word2vec(&corpus, &vocab, &small_cfg(), 9).unwrap();
        let vec = |t: &String| emb.lookup(&vocab, t).unwrap();
        let mean = |pairs: Vec<(&String, &String)>| {
            let n = pairs.len() as f64;
            pairs.into_iter().map(|(x, y)| cosine(vec(x), vec(y))).sum::<f64>() / n
        };
        let mut intra = Vec::new();
        for topic in [&a, &b] {
            for i in 0..topic.len() {
                for j in i + 1..topic.len() {
                    intra.push((&topic[i], &topic[j]));
                }
            }
        }
        let inter: Vec<_> = a.iter().flat_map(|x| b.iter().map(move |y| (x, y))).collect();
        let gap = mean(intra) - mean(inter);
        assert!(gap >= 0.2, "intra-inter gap {gap}");
    }

    #[test]
    fn deterministic_and_reserved_rows_zero() {
        let (corpus, _, _) = two_topic_corpus(5, 60);
        let vocab = build_vocab(&corpus, 1);
        let cfg = Word2vecConfig { dim: 100, ..small_cfg() };
        let e1 = train_word2vec(&corpus, &vocab, &cfg, 1).unwrap();
        let e2 = train_word2vec(&corpus, &vocab, &cfg, 1).unwrap();
        assert_eq!(e1.dim(), 100);
        assert!(e1.data().iter().zip(e2.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(e1.row(PAD).iter().chain(e1.row(UNK)).all(|&v| v == 0.0));
        assert_ne!(e1, train_word2vec(&corpus, &vocab, &cfg, 2).unwrap());
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let corpus: Vec<Vec<String>> = vec![vec![]];
        let vocab = build_vocab(&corpus, 1);
        assert!(train_word2vec(&corpus, &vocab, &small_cfg(), 0).is_err());
    }
}
