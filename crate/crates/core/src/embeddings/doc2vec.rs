use crate::error::{Error, Result};
use crate::format::{NamedTensor, TensorFile};
use crate::rng;

use super::negative::{ns_input_step, ns_update};
use super::sampler::UnigramSampler;
use super::vocab::{Vocabulary, PAD, UNK};
use super::word2vec::init_uniform;
use super::decayed_rate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Doc2vecConfig {
    pub dim: usize,
    pub epochs: usize,
    pub window: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub infer_epochs: usize,
}

impl Default for Doc2vecConfig {
    fn default() -> Self {
        Doc2vecConfig {
            dim: 100,
            epochs: 60,
            window: 5,
            negatives: 5,
            learning_rate: 0.025,
            infer_epochs: 60,
        }
    }
}

impl Doc2vecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.epochs == 0 || self.window == 0 || self.negatives == 0 || self.infer_epochs == 0 {
            return Err(Error::InvalidArgument(format!("doc2vec settings must all be positive: {self:?}")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

/// A trained PV-DM model. Unlike [`super::WordEmbeddings`], `UNK` is a
/// regular trainable row here: out-of-vocabulary tokens are predicted and
/// used as context through it.
#[derive(Debug, Clone, PartialEq)]
pub struct Doc2vecModel {
    pub config: Doc2vecConfig,
    pub seed: u64,
    pub vocab: Vocabulary,
    pub word_vectors: Vec<f32>,
    pub output_weights: Vec<f32>,
    pub doc_vectors: Vec<f32>,
}

impl Doc2vecModel {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn doc_count(&self) -> usize {
        self.doc_vectors.len() / self.config.dim
    }

    pub fn doc_vector(&self, n: usize) -> &[f32] {
        let d = self.config.dim;
        &self.doc_vectors[n * d..(n + 1) * d]
    }

    pub fn to_tensor_file(&self) -> Result<TensorFile> {
        let c = &self.config;
        let mut f = TensorFile::default();
        f.set("kind", "doc2vec");
        f.set("doc2vec.dim", c.dim);
        f.set("doc2vec.epochs", c.epochs);
        f.set("doc2vec.window", c.window);
        f.set("doc2vec.negatives", c.negatives);
        f.set("doc2vec.learning_rate", c.learning_rate);
        f.set("doc2vec.infer_epochs", c.infer_epochs);
        f.set("seed", self.seed);
        f.set("vocab.tokens", json(&self.vocab.tokens())?);
        f.set("vocab.counts", json(&self.vocab.counts())?);
        let v = self.vocab.len();
        f.tensors.push(NamedTensor::new("word_vectors", vec![v, c.dim], self.word_vectors.clone())?);
        f.tensors.push(NamedTensor::new("output_weights", vec![v, c.dim], self.output_weights.clone())?);
        f.tensors.push(NamedTensor::new("doc_vectors", vec![self.doc_count(), c.dim], self.doc_vectors.clone())?);
        Ok(f)
    }

    pub fn from_tensor_file(f: &TensorFile) -> Result<Self> {
        if f.get("kind")? != "doc2vec" {
            return Err(Error::Format(format!("expected a doc2vec model, found kind {:?}", f.get("kind")?)));
        }
        let config = Doc2vecConfig {
            dim: f.parse("doc2vec.dim")?,
            epochs: f.parse("doc2vec.epochs")?,
            window: f.parse("doc2vec.window")?,
            negatives: f.parse("doc2vec.negatives")?,
            learning_rate: f.parse("doc2vec.learning_rate")?,
            infer_epochs: f.parse("doc2vec.infer_epochs")?,
        };
        config.validate().map_err(|e| Error::Format(e.to_string()))?;
        let tokens: Vec<String> = unjson(f.get("vocab.tokens")?)?;
        let counts: Vec<u64> = unjson(f.get("vocab.counts")?)?;
        if tokens.len() != counts.len() || tokens.len() < 2 {
            return Err(Error::Format("doc2vec vocabulary is malformed".into()));
        }
        let vocab = Vocabulary::from_parts(tokens, counts);
        let take = |name: &str, rows: Option<usize>| -> Result<Vec<f32>> {
            let t = f.tensor(name)?;
            let ok = t.dims.len() == 2 && t.dims[1] == config.dim && rows.is_none_or(|r| t.dims[0] == r);
            if !ok {
                return Err(Error::Format(format!("tensor {name:?} has dims {:?}", t.dims)));
            }
            Ok(t.values.clone())
        };
        Ok(Doc2vecModel {
            seed: f.parse("seed")?,
            word_vectors: take("word_vectors", Some(vocab.len()))?,
            output_weights: take("output_weights", Some(vocab.len()))?,
            doc_vectors: take("doc_vectors", None)?,
            vocab,
            config,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.to_tensor_file()?.save(path)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_tensor_file(&TensorFile::load(path)?)
    }
}

fn json<T: serde::Serialize + ?Sized>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| Error::Format(e.to_string()))
}

fn unjson<T: serde::de::DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
}

fn encode_with_unk<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Vec<usize> {
    tokens
        .iter()
        .map(|t| match vocab.id_or_unk(t.as_ref()) {
            PAD => UNK,
            id => id,
        })
        .collect()
}

/// Fills `h` with the mean of the doc vector and the context word vectors
/// around position `t`; returns the number of averaged vectors.
fn predictor(doc: &[f32], words: &[f32], sentence: &[usize], t: usize, window: usize, ctx: &mut Vec<usize>, h: &mut [f32]) -> usize {
    let dim = doc.len();
    ctx.clear();
    let lo = t.saturating_sub(window);
    let hi = (t + window + 1).min(sentence.len());
    ctx.extend((lo..hi).filter(|&c| c != t).map(|c| sentence[c]));
    h.copy_from_slice(doc);
    for &w in ctx.iter() {
        for (hv, &wv) in h.iter_mut().zip(&words[w * dim..(w + 1) * dim]) {
            *hv += wv;
        }
    }
    let count = ctx.len() + 1;
    let inv = 1.0 / count as f32;
    h.iter_mut().for_each(|v| *v *= inv);
    count
}

fn draw_targets(target: usize, negatives: usize, sampler: &UnigramSampler, r: &mut rng::Rng, out: &mut Vec<(usize, bool)>) {
    out.clear();
    out.push((target, true));
    for _ in 0..negatives {
        let neg = sampler.sample(r);
        if neg != target {
            out.push((neg, false));
        }
    }
}

/// PV-DM with a mean combiner and negative sampling. Sentences are visited
/// in order for `cfg.epochs` passes.
pub fn train_doc2vec<S: AsRef<str>>(
    sentences: &[Vec<S>],
    vocab: &Vocabulary,
    cfg: &Doc2vecConfig,
    seed: u64,
) -> Result<Doc2vecModel> {
    cfg.validate()?;
    let corpus: Vec<Vec<usize>> = sentences.iter().map(|s| encode_with_unk(s, vocab)).collect();
    let total_tokens: u64 = corpus.iter().map(|s| s.len() as u64).sum();
    if total_tokens == 0 {
        return Err(Error::Precondition("doc2vec corpus has no tokens".into()));
    }
    let sampler = UnigramSampler::new(vocab.counts(), &[PAD])?;
    let dim = cfg.dim;
    let mut r = rng::seeded(seed);
    let mut words = init_uniform(vocab.len(), dim, &[PAD], &mut r);
    let mut docs = init_uniform(corpus.len(), dim, &[], &mut r);
    let mut output = vec![0.0f32; vocab.len() * dim];

    let total_updates = total_tokens * cfg.epochs as u64;
    let mut done = 0u64;
    let (mut ctx, mut targets) = (Vec::new(), Vec::new());
    let mut h = vec![0.0f32; dim];
    let mut step = vec![0.0f32; dim];
    for _ in 0..cfg.epochs {
        for (n, sentence) in corpus.iter().enumerate() {
            for (t, &target) in sentence.iter().enumerate() {
                let lr = decayed_rate(cfg.learning_rate, done, total_updates) as f32;
                done += 1;
                let doc = &mut docs[n * dim..(n + 1) * dim];
                let count = predictor(doc, &words, sentence, t, cfg.window, &mut ctx, &mut h);
                draw_targets(target, cfg.negatives, &sampler, &mut r, &mut targets);
                step.iter_mut().for_each(|v| *v = 0.0);
                ns_update(&h, &mut output, dim, &targets, lr, &mut step);
                let share = 1.0 / count as f32;
                for (d, s) in doc.iter_mut().zip(&step) {
                    *d += s * share;
                }
                for &w in &ctx {
                    for (wv, s) in words[w * dim..(w + 1) * dim].iter_mut().zip(&step) {
                        *wv += s * share;
                    }
                }
            }
        }
    }
    Ok(Doc2vecModel {
        config: *cfg,
        seed,
        vocab: vocab.clone(),
        word_vectors: words,
        output_weights: output,
        doc_vectors: docs,
    })
}

/// Fits a vector for an unseen sentence with word and output weights frozen.
pub fn infer_doc_vector<S: AsRef<str>>(m: &Doc2vecModel, tokens: &[S], seed: u64) -> Vec<f32> {
    let dim = m.config.dim;
    let mut r = rng::seeded(seed);
    let mut doc = init_uniform(1, dim, &[], &mut r);
    let sentence = encode_with_unk(tokens, &m.vocab);
    let Ok(sampler) = UnigramSampler::new(m.vocab.counts(), &[PAD]) else {
        return doc;
    };
    let total_updates = (sentence.len() * m.config.infer_epochs) as u64;
    let mut done = 0u64;
    let (mut ctx, mut targets) = (Vec::new(), Vec::new());
    let mut h = vec![0.0f32; dim];
    let mut step = vec![0.0f32; dim];
    for _ in 0..m.config.infer_epochs {
        for (t, &target) in sentence.iter().enumerate() {
            let lr = decayed_rate(m.config.learning_rate, done, total_updates) as f32;
            done += 1;
            let count = predictor(&doc, &m.word_vectors, &sentence, t, m.config.window, &mut ctx, &mut h);
            draw_targets(target, m.config.negatives, &sampler, &mut r, &mut targets);
            step.iter_mut().for_each(|v| *v = 0.0);
            ns_input_step(&h, &m.output_weights, dim, &targets, lr, &mut step);
            let share = 1.0 / count as f32;
            for (d, s) in doc.iter_mut().zip(&step) {
                *d += s * share;
            }
        }
    }
    doc
}
