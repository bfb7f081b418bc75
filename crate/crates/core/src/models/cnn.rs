use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::corpus::{tokenize, Dataset, TokenizerPolicy};
use crate::embeddings::{Vocabulary, WordEmbeddings};
use crate::encoders::{encode_sentence_matrix, EncoderConfig, SentenceMatrix};
use crate::error::{Error, Result};
use crate::format::TensorFile;
use crate::neural::{Cnn, CnnArch, Mode, Optimizer, OptimizerKind, Tensor};
use crate::rng;

use super::{accuracy, predict_class, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnnConfig {
    pub arch: CnnArch,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            arch: CnnArch {
                max_len: 50,
                embed_dim: 100,
                conv_pairs: 2,
                filters: 256,
                kernel: 5,
                pool: 2,
                dropout_p: 0.5,
                fc_dim: 128,
                n_classes: 26,
            },
            epochs: 10,
            batch_size: 32,
            optimizer: OptimizerKind::adam(),
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }

    pub(crate) fn write_to(&self, f: &mut TensorFile) {
        let a = &self.arch;
        f.set("cnn.max_len", a.max_len);
        f.set("cnn.embed_dim", a.embed_dim);
        f.set("cnn.conv_pairs", a.conv_pairs);
        f.set("cnn.filters", a.filters);
        f.set("cnn.kernel", a.kernel);
        f.set("cnn.pool", a.pool);
        f.set("cnn.dropout_p", a.dropout_p);
        f.set("cnn.fc_dim", a.fc_dim);
        f.set("cnn.n_classes", a.n_classes);
        f.set("cnn.epochs", self.epochs);
        f.set("cnn.batch_size", self.batch_size);
        f.set("cnn.learning_rate", self.learning_rate);
        f.set("cnn.seed", self.seed);
        match self.optimizer {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                f.set("cnn.optimizer", "adam");
                f.set("cnn.adam.beta1", beta1);
                f.set("cnn.adam.beta2", beta2);
                f.set("cnn.adam.eps", eps);
            }
            OptimizerKind::SgdMomentum { momentum } => {
                f.set("cnn.optimizer", "sgd");
                f.set("cnn.sgd.momentum", momentum);
            }
        }
    }

    pub(crate) fn read_from(f: &TensorFile) -> Result<Self> {
        let optimizer = match f.get("cnn.optimizer")? {
            "adam" => OptimizerKind::Adam {
                beta1: f.parse("cnn.adam.beta1")?,
                beta2: f.parse("cnn.adam.beta2")?,
                eps: f.parse("cnn.adam.eps")?,
            },
            "sgd" => OptimizerKind::SgdMomentum {
                momentum: f.parse("cnn.sgd.momentum")?,
            },
            other => return Err(Error::Format(format!("unknown optimizer {other:?}"))),
        };
        let cfg = CnnConfig {
            arch: CnnArch {
                max_len: f.parse("cnn.max_len")?,
                embed_dim: f.parse("cnn.embed_dim")?,
                conv_pairs: f.parse("cnn.conv_pairs")?,
                filters: f.parse("cnn.filters")?,
                kernel: f.parse("cnn.kernel")?,
                pool: f.parse("cnn.pool")?,
                dropout_p: f.parse("cnn.dropout_p")?,
                fc_dim: f.parse("cnn.fc_dim")?,
                n_classes: f.parse("cnn.n_classes")?,
            },
            epochs: f.parse("cnn.epochs")?,
            batch_size: f.parse("cnn.batch_size")?,
            optimizer,
            learning_rate: f.parse("cnn.learning_rate")?,
            seed: f.parse("cnn.seed")?,
        };
        cfg.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(cfg)
    }
}

pub fn parameter_count(cfg: &CnnConfig) -> usize {
    cfg.arch.parameter_count()
}

/// A trained CNN. The word embeddings it was trained on are not part of
/// the model; callers keep them alongside (the model file records their path).
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub net: Cnn<f32>,
}

impl CnnModel {
    /// Freshly initialised, untrained model.
    pub fn new(config: CnnConfig) -> Result<Self> {
        config.validate()?;
        Ok(CnnModel {
            net: Cnn::new(config.arch, rng::derive(config.seed, &[0]))?,
            config,
        })
    }

    pub fn probabilities(&self, x: &Tensor<f32>) -> Result<Vec<f32>> {
        self.net.forward(x, Mode::Eval, None)
    }

    pub fn predict(&self, x: &Tensor<f32>) -> Result<usize> {
        Ok(predict_class(&self.probabilities(x)?))
    }

    pub fn evaluate(&self, examples: &[EncodedExample]) -> Result<f64> {
        let predicted = examples
            .par_iter()
            .map(|e| self.predict(&e.input))
            .collect::<Result<Vec<_>>>()?;
        let truth: Vec<usize> = examples.iter().map(|e| e.label).collect();
        accuracy(&predicted, &truth)
    }
}

/// Class probabilities for one sentence matrix; dropout is applied only
/// when `train` is set, with masks drawn from `seed`.
pub fn cnn_forward(m: &CnnModel, s: &SentenceMatrix, train: bool, seed: u64) -> Result<Vec<f32>> {
    let a = &m.config.arch;
    if s.max_len != a.max_len || s.dim != a.embed_dim {
        return Err(Error::Shape(format!(
            "sentence matrix is {}x{}, model expects {}x{}",
            s.max_len, s.dim, a.max_len, a.embed_dim
        )));
    }
    let mode = if train { Mode::Train { seed } } else { Mode::Eval };
    m.net.forward(&s.to_tensor(), mode, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub input: Tensor<f32>,
    pub label: usize,
}

fn encode_dataset(
    d: &Dataset,
    emb: &WordEmbeddings,
    vocab: &Vocabulary,
    policy: &TokenizerPolicy,
    max_len: usize,
) -> Result<Vec<EncodedExample>> {
    let cfg = EncoderConfig { max_len };
    d.examples()
        .iter()
        .map(|ex| {
            let tokens = tokenize(&ex.text, policy);
            Ok(EncodedExample {
                input: encode_sentence_matrix(emb, vocab, &tokens, &cfg)?.to_tensor(),
                label: ex.label,
            })
        })
        .collect()
}

/// Tokenizes and encodes both datasets, then trains with [`train_cnn_encoded`].
/// The embeddings are only read.
pub fn train_cnn(
    train: &Dataset,
    valid: &Dataset,
    emb: &WordEmbeddings,
    vocab: &Vocabulary,
    policy: &TokenizerPolicy,
    cfg: &CnnConfig,
) -> Result<(CnnModel, TrainReport)> {
    cfg.validate()?;
    if train.label_map().len() != cfg.arch.n_classes {
        return Err(Error::InvalidArgument(format!(
            "corpus has {} classes, model is configured for {}",
            train.label_map().len(),
            cfg.arch.n_classes
        )));
    }
    if valid.label_map() != train.label_map() {
        return Err(Error::InvalidArgument("validation labels differ from training labels".into()));
    }
    if emb.dim() != cfg.arch.embed_dim {
        return Err(Error::Shape(format!(
            "embeddings have dimension {}, model expects {}",
            emb.dim(),
            cfg.arch.embed_dim
        )));
    }
    let tr = encode_dataset(train, emb, vocab, policy, cfg.arch.max_len)?;
    let va = encode_dataset(valid, emb, vocab, policy, cfg.arch.max_len)?;
    train_cnn_encoded(&tr, &va, cfg)
}

/// Mini-batch training on pre-encoded inputs.
///
/// Per-example gradients within a batch are computed in parallel, collected
/// in batch order and summed sequentially, so results do not depend on the
/// number of threads.
pub fn train_cnn_encoded(
    train: &[EncodedExample],
    valid: &[EncodedExample],
    cfg: &CnnConfig,
) -> Result<(CnnModel, TrainReport)> {
    let started = Instant::now();
    cfg.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be non-empty".into()));
    }
    if let Some(bad) = train.iter().chain(valid).find(|e| e.label >= cfg.arch.n_classes) {
        return Err(Error::InvalidArgument(format!(
            "label {} out of range for {} classes",
            bad.label, cfg.arch.n_classes
        )));
    }
    let mut model = CnnModel::new(*cfg)?;
    let mut opt = Optimizer::for_params(cfg.optimizer, cfg.learning_rate, &model.net.params());
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng::seeded(rng::derive(cfg.seed, &[2, epoch as u64])));
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let net = &model.net;
            let results = batch
                .par_iter()
                .map(|&i| {
                    let seed = rng::derive(cfg.seed, &[1, epoch as u64, i as u64]);
                    net.loss_and_gradients(&train[i].input, train[i].label, Mode::Train { seed })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut grads: Vec<Tensor<f32>> = net.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
            for (loss, g) in results {
                epoch_loss += f64::from(loss);
                for (acc, part) in grads.iter_mut().zip(&g.params) {
                    for (a, &b) in acc.data_mut().iter_mut().zip(part.data()) {
                        *a += b;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f32;
            for g in &mut grads {
                g.data_mut().iter_mut().for_each(|v| *v *= scale);
            }
            opt.step(&mut model.net.params_mut(), &grads)?;
        }
        if !model.net.params().iter().all(|p| p.all_finite()) {
            return Err(Error::Invariant(format!("non-finite CNN parameters after epoch {epoch}")));
        }
        report.epoch_loss.push(epoch_loss / train.len() as f64);
        report.valid_accuracy.push(model.evaluate(valid)?);
    }
    report.seconds = started.elapsed().as_secs_f64();
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelMap, LabeledExample};
    use crate::embeddings::build_vocab;
    use proptest::prelude::*;
    use rand::Rng;

    pub(crate) fn toy_arch() -> CnnArch {
        CnnArch {
            max_len: 8,
            embed_dim: 6,
            conv_pairs: 1,
            filters: 4,
            kernel: 3,
            pool: 2,
            dropout_p: 0.5,
            fc_dim: 5,
            n_classes: 3,
        }
    }

    #[test]
    fn closed_form_count() {
        let cfg = CnnConfig { arch: toy_arch(), ..CnnConfig::default() };
        assert_eq!(parameter_count(&cfg), 231);
        let wider = CnnConfig {
            arch: CnnArch { filters: 8, ..toy_arch() },
            ..cfg
        };
        assert!(parameter_count(&wider) > 231);
    }

    #[test]
    fn zero_input_with_zero_output_layer_is_uniform() {
        let mut m = CnnModel::new(CnnConfig { arch: toy_arch(), ..CnnConfig::default() }).unwrap();
        let n = m.net.params().len();
        m.net.params_mut()[n - 2].data_mut().iter_mut().for_each(|v| *v = 0.0);
        let s = SentenceMatrix { max_len: 8, dim: 6, true_len: 0, data: vec![0.0; 48] };
        let p = cnn_forward(&m, &s, false, 0).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-7);
        }
    }

    #[test]
    fn eval_forward_is_repeatable_and_shape_checked() {
        let m = CnnModel::new(CnnConfig { arch: toy_arch(), ..CnnConfig::default() }).unwrap();
        let mut r = rng::seeded(5);
        let s = SentenceMatrix {
            max_len: 8,
            dim: 6,
            true_len: 8,
            data: (0..48).map(|_| r.gen_range(-1.0..1.0)).collect(),
        };
        assert_eq!(cnn_forward(&m, &s, false, 1).unwrap(), cnn_forward(&m, &s, false, 2).unwrap());
        assert_ne!(cnn_forward(&m, &s, true, 1).unwrap(), cnn_forward(&m, &s, true, 2).unwrap());
        let bad = SentenceMatrix { max_len: 7, dim: 6, true_len: 0, data: vec![0.0; 42] };
        assert!(cnn_forward(&m, &bad, false, 0).is_err());
    }

    /// Two classes with disjoint vocabularies: one filter that fires on
    /// either word family is enough to separate them.
    fn disjoint_corpus(n: usize, seed: u64) -> (Dataset, WordEmbeddings, Vocabulary) {
        let labels = LabelMap::new(vec!["left".into(), "right".into()]).unwrap();
        let mut r = rng::seeded(seed);
        let mut examples = Vec::new();
        for i in 0..n {
            let label = i % 2;
            let prefix = if label == 0 { "l" } else { "r" };
            let len = r.gen_range(3..7);
            let words: Vec<String> = (0..len).map(|_| format!("{prefix}{}", r.gen_range(0..4))).collect();
            examples.push(LabeledExample { text: words.join(" "), label });
        }
        let d = Dataset::new(examples, labels).unwrap();
        let sentences: Vec<Vec<String>> =
            d.examples().iter().map(|e| tokenize(&e.text, &TokenizerPolicy::default())).collect();
        let vocab = build_vocab(&sentences, 1);
        let dim = 4;
        let mut data = vec![0.0f32; 2 * dim];
        data.extend((0..(vocab.len() - 2) * dim).map(|_| r.gen_range(-1.0f32..1.0)));
        (d, WordEmbeddings::new(dim, data).unwrap(), vocab)
    }

    fn toy_training_config() -> CnnConfig {
        CnnConfig {
            arch: CnnArch {
                max_len: 8,
                embed_dim: 4,
                conv_pairs: 1,
                filters: 4,
                kernel: 3,
                pool: 2,
                dropout_p: 0.2,
                fc_dim: 8,
                n_classes: 2,
            },
            epochs: 5,
            batch_size: 8,
            learning_rate: 1e-2,
            seed: 11,
            ..CnnConfig::default()
        }
    }

    #[test]
    fn separable_corpus_is_learned() {
        let (train, emb, vocab) = disjoint_corpus(200, 1);
        let (valid, _, _) = disjoint_corpus(60, 2);
        let before = emb.clone();
        let (_, report) = train_cnn(&train, &valid, &emb, &vocab, &TokenizerPolicy::default(), &toy_training_config()).unwrap();
        assert_eq!(report.epoch_loss.len(), 5);
        assert_eq!(report.valid_accuracy.len(), 5);
        assert_eq!(*report.valid_accuracy.last().unwrap(), 1.0);
        assert!(report.epoch_loss[0] <= 2f64.ln() + 0.1);
        assert_eq!(emb, before);
    }

    #[test]
    fn training_is_deterministic() {
        let (train, emb, vocab) = disjoint_corpus(80, 3);
        let cfg = CnnConfig { epochs: 2, ..toy_training_config() };
        let policy = TokenizerPolicy::default();
        let (m1, r1) = train_cnn(&train, &train, &emb, &vocab, &policy, &cfg).unwrap();
        let (m2, r2) = train_cnn(&train, &train, &emb, &vocab, &policy, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!((r1.epoch_loss, r1.valid_accuracy), (r2.epoch_loss, r2.valid_accuracy));
    }

    #[test]
    fn class_count_mismatch_is_rejected() {
        let (train, emb, vocab) = disjoint_corpus(20, 4);
        let mut cfg = toy_training_config();
        cfg.arch.n_classes = 3;
        assert!(train_cnn(&train, &train, &emb, &vocab, &TokenizerPolicy::default(), &cfg).is_err());
    }

    #[test]
    fn config_roundtrips_through_key_values() {
        for cfg in [
            CnnConfig::default(),
            CnnConfig {
                optimizer: OptimizerKind::SgdMomentum { momentum: 0.9 },
                learning_rate: 0.1 + 0.2,
                ..toy_training_config()
            },
        ] {
            let mut f = TensorFile::default();
            cfg.write_to(&mut f);
            assert_eq!(CnnConfig::read_from(&f).unwrap(), cfg);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn count_matches_allocation(
            max_len in 4usize..40,
            embed_dim in 1usize..10,
            conv_pairs in 1usize..3,
            filters in 1usize..9,
            half_k in 0usize..3,
            pool in 1usize..4,
            fc_dim in 1usize..10,
            n_classes in 1usize..6,
        ) {
            let arch = CnnArch { max_len, embed_dim, conv_pairs, filters, kernel: 2 * half_k + 1, pool, dropout_p: 0.5, fc_dim, n_classes };
            prop_assume!(arch.validate().is_ok());
            let cfg = CnnConfig { arch, ..CnnConfig::default() };
            let m = CnnModel::new(cfg).unwrap();
            prop_assert_eq!(m.net.allocated_params(), parameter_count(&cfg));
        }
    }
}
