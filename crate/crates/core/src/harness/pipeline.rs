use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{tokenize, Dataset, LabelMap, TokenizerPolicy};
use crate::embeddings::{infer_doc_vector, load_embeddings, Doc2vecModel, Vocabulary, WordEmbeddings};
use crate::encoders::{
    bow_histogram, encode_sentence_matrix, load_codebook, mean_embedding, BowConfig, Codebook, EncoderConfig, MeanMode,
};
use crate::error::{Error, Result};
use crate::models::{
    load_model, predict_class, save_model, train_cnn_encoded, train_logreg, CnnConfig, EncodedExample, LogRConfig, Model,
    TrainReport,
};
use crate::neural::Tensor;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MethodTag {
    Cnn,
    Doc2vecLogr,
    ZeromeanLogr,
    ElimmeanLogr,
    BowLogr,
}

impl MethodTag {
    pub const ALL: [MethodTag; 5] = [
        MethodTag::Cnn,
        MethodTag::Doc2vecLogr,
        MethodTag::ZeromeanLogr,
        MethodTag::ElimmeanLogr,
        MethodTag::BowLogr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::Cnn => "cnn",
            MethodTag::Doc2vecLogr => "doc2vec_logr",
            MethodTag::ZeromeanLogr => "zeromean_logr",
            MethodTag::ElimmeanLogr => "elimmean_logr",
            MethodTag::BowLogr => "bow_logr",
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodTag::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// Pre-trained inputs a pipeline may draw on. Which ones are required
/// depends on the method.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub words: Option<(WordEmbeddings, Vocabulary)>,
    pub codebook: Option<Codebook>,
    pub doc2vec: Option<Doc2vecModel>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub policy: TokenizerPolicy,
    pub max_len: usize,
    pub k_soft: usize,
    pub normalize: bool,
    /// Base seed for per-sentence Doc2vec inference.
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        let bow = BowConfig::default();
        PipelineOptions {
            policy: TokenizerPolicy::default(),
            max_len: EncoderConfig::default().max_len,
            k_soft: bow.k_soft,
            normalize: bow.normalize,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
enum Featurizer {
    Matrix(WordEmbeddings, Vocabulary),
    Mean(WordEmbeddings, Vocabulary, MeanMode),
    Bow(WordEmbeddings, Vocabulary, Codebook),
    Doc2vec(Doc2vecModel),
}

/// Text to model input for one method.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub method: MethodTag,
    pub options: PipelineOptions,
    featurizer: Featurizer,
}

fn require<T>(v: Option<T>, method: MethodTag, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::Precondition(format!("method {method} needs {what}")))
}

impl Pipeline {
    /// Checks that the method's artifacts are present and dimensionally
    /// consistent before any encoding happens.
    pub fn new(method: MethodTag, artifacts: Artifacts, options: PipelineOptions) -> Result<Self> {
        let words = || require(artifacts.words.clone(), method, "word embeddings");
        let featurizer = match method {
            MethodTag::Cnn => {
                if options.max_len == 0 {
                    return Err(Error::InvalidArgument("max_len must be at least 1".into()));
                }
                let (e, v) = words()?;
                Featurizer::Matrix(e, v)
            }
            MethodTag::ZeromeanLogr | MethodTag::ElimmeanLogr => {
                let (e, v) = words()?;
                let mode = if method == MethodTag::ZeromeanLogr { MeanMode::Zero } else { MeanMode::Elim };
                Featurizer::Mean(e, v, mode)
            }
            MethodTag::BowLogr => {
                let cb = require(artifacts.codebook.clone(), method, "a codebook")?;
                let (e, v) = words()?;
                if cb.dim() != e.dim() {
                    return Err(Error::Shape(format!(
                        "codebook dimension {} does not match embedding dimension {}",
                        cb.dim(),
                        e.dim()
                    )));
                }
                BowConfig { k: cb.k(), k_soft: options.k_soft, normalize: options.normalize }.validate()?;
                Featurizer::Bow(e, v, cb)
            }
            MethodTag::Doc2vecLogr => Featurizer::Doc2vec(require(artifacts.doc2vec, method, "a doc2vec model")?),
        };
        Ok(Pipeline { method, options, featurizer })
    }

    pub fn tokens(&self, text: &str) -> Vec<String> {
        tokenize(text, &self.options.policy)
    }

    /// Width of the feature vector (per row, for the CNN).
    pub fn feature_dim(&self) -> usize {
        match &self.featurizer {
            Featurizer::Matrix(e, _) | Featurizer::Mean(e, _, _) => e.dim(),
            Featurizer::Bow(_, _, cb) => cb.k(),
            Featurizer::Doc2vec(m) => m.dim(),
        }
    }

    /// Feature vector for the logistic-regression methods.
    pub fn vector(&self, tokens: &[String]) -> Result<Vec<f32>> {
        match &self.featurizer {
            Featurizer::Matrix(..) => Err(Error::Precondition("the cnn method takes sentence matrices".into())),
            Featurizer::Mean(e, v, mode) => Ok(mean_embedding(e, v, tokens, *mode)),
            Featurizer::Bow(e, v, cb) => {
                let cfg = BowConfig { k: cb.k(), k_soft: self.options.k_soft, normalize: self.options.normalize };
                Ok(bow_histogram(cb, e, v, tokens, &cfg)?.bins.into_iter().map(|b| b as f32).collect())
            }
            Featurizer::Doc2vec(m) => {
                let seed = rng::derive(self.options.seed, &[rng::hash_tokens(tokens)]);
                Ok(infer_doc_vector(m, tokens, seed))
            }
        }
    }

    /// Sentence matrix for the CNN.
    pub fn matrix(&self, tokens: &[String]) -> Result<Tensor<f32>> {
        match &self.featurizer {
            Featurizer::Matrix(e, v) => {
                let cfg = EncoderConfig { max_len: self.options.max_len };
                Ok(encode_sentence_matrix(e, v, tokens, &cfg)?.to_tensor())
            }
            _ => Err(Error::Precondition(format!("method {} takes feature vectors", self.method))),
        }
    }

    pub fn vectors(&self, d: &Dataset) -> Result<Vec<Vec<f32>>> {
        d.examples().par_iter().map(|ex| self.vector(&self.tokens(&ex.text))).collect()
    }

    pub fn matrices(&self, d: &Dataset) -> Result<Vec<EncodedExample>> {
        d.examples()
            .par_iter()
            .map(|ex| {
                Ok(EncodedExample {
                    input: self.matrix(&self.tokens(&ex.text))?,
                    label: ex.label,
                })
            })
            .collect()
    }

    pub fn probabilities(&self, model: &Model, text: &str) -> Result<Vec<f32>> {
        let tokens = self.tokens(text);
        match model {
            Model::Cnn(m) => m.probabilities(&self.matrix(&tokens)?),
            Model::LogR(m) => m.probabilities(&self.vector(&tokens)?),
        }
    }

    /// Pipeline settings recorded next to a trained model.
    pub fn describe(&self) -> BTreeMap<String, String> {
        let o = &self.options;
        BTreeMap::from([
            ("method".to_string(), self.method.to_string()),
            ("policy.lowercase".to_string(), o.policy.lowercase.to_string()),
            ("policy.punctuation_split".to_string(), o.policy.punctuation_split.to_string()),
            ("max_len".to_string(), o.max_len.to_string()),
            ("bow.k_soft".to_string(), o.k_soft.to_string()),
            ("bow.normalize".to_string(), o.normalize.to_string()),
            ("seed".to_string(), o.seed.to_string()),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    /// `arch.embed_dim`, `arch.max_len` and `arch.n_classes` are overwritten
    /// from the pipeline and data.
    pub cnn: CnnConfig,
    /// `n_features` and `n_classes` are overwritten from the pipeline and data.
    pub logr: LogRConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            cnn: CnnConfig::default(),
            logr: LogRConfig::new(1, 1),
        }
    }
}

/// Encodes both datasets with `pipeline` and trains the method's model.
/// `valid` must already use `train`'s label map.
pub fn train_method(pipeline: &Pipeline, train: &Dataset, valid: &Dataset, settings: &TrainSettings) -> Result<(Model, TrainReport)> {
    if valid.label_map() != train.label_map() {
        return Err(Error::Precondition("validation set must share the training label map".into()));
    }
    let n_classes = train.label_map().len();
    match pipeline.method {
        MethodTag::Cnn => {
            let mut cfg = settings.cnn;
            cfg.arch.embed_dim = pipeline.feature_dim();
            cfg.arch.max_len = pipeline.options.max_len;
            cfg.arch.n_classes = n_classes;
            cfg.validate()?;
            let tr = pipeline.matrices(train)?;
            let va = pipeline.matrices(valid)?;
            let (m, report) = train_cnn_encoded(&tr, &va, &cfg)?;
            Ok((Model::Cnn(m), report))
        }
        _ => {
            let cfg = LogRConfig {
                n_features: pipeline.feature_dim(),
                n_classes,
                ..settings.logr
            };
            cfg.validate()?;
            let xs = pipeline.vectors(train)?;
            let vx = pipeline.vectors(valid)?;
            let (m, report) = train_logreg(&xs, &train.labels(), Some((&vx, &valid.labels())), &cfg)?;
            Ok((Model::LogR(m), report))
        }
    }
}

/// A trained model together with everything needed to classify raw text.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub model: Model,
    pub labels: LabelMap,
    pub pipeline: Pipeline,
    pub meta: BTreeMap<String, String>,
}

fn meta_get<'a>(meta: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    meta.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Format(format!("model file lacks {key:?}")))
}

fn meta_parse<T: FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = meta_get(meta, key)?;
    raw.parse().map_err(|_| Error::Format(format!("model file has bad {key:?} value {raw:?}")))
}

impl Classifier {
    /// Writes the model with its labels, pipeline settings and the
    /// canonical paths of the artifacts it was trained with.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_model(&self.model, &self.meta, path)
    }

    pub fn new(model: Model, labels: LabelMap, pipeline: Pipeline, artifact_paths: &BTreeMap<String, PathBuf>) -> Result<Self> {
        let mut meta = pipeline.describe();
        let names = serde_json::to_string(labels.names()).map_err(|e| Error::Format(e.to_string()))?;
        meta.insert("labels".into(), names);
        for (key, p) in artifact_paths {
            let canon = p.canonicalize().map_err(|e| Error::io(p, e))?;
            let s = canon
                .to_str()
                .ok_or_else(|| Error::InvalidArgument(format!("path {} is not UTF-8", canon.display())))?;
            meta.insert(format!("path.{key}"), s.to_string());
        }
        if model.n_classes() != labels.len() {
            return Err(Error::Shape(format!("model has {} classes, label map {}", model.n_classes(), labels.len())));
        }
        Ok(Classifier { model, labels, pipeline, meta })
    }

    /// Loads a model file and the artifacts it references.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (model, meta) = load_model(path)?;
        let method: MethodTag = meta_get(&meta, "method")?.parse()?;
        let names: Vec<String> =
            serde_json::from_str(meta_get(&meta, "labels")?).map_err(|e| Error::Format(format!("labels: {e}")))?;
        let labels = LabelMap::new(names)?;
        let options = PipelineOptions {
            policy: TokenizerPolicy {
                lowercase: meta_parse(&meta, "policy.lowercase")?,
                punctuation_split: meta_parse(&meta, "policy.punctuation_split")?,
            },
            max_len: meta_parse(&meta, "max_len")?,
            k_soft: meta_parse(&meta, "bow.k_soft")?,
            normalize: meta_parse(&meta, "bow.normalize")?,
            seed: meta_parse(&meta, "seed")?,
        };
        let mut artifacts = Artifacts::default();
        if let Some(p) = meta.get("path.embeddings") {
            artifacts.words = Some(load_embeddings(p)?);
        }
        if let Some(p) = meta.get("path.codebook") {
            artifacts.codebook = Some(load_codebook(p)?);
        }
        if let Some(p) = meta.get("path.doc2vec") {
            artifacts.doc2vec = Some(Doc2vecModel::load(p)?);
        }
        let pipeline = Pipeline::new(method, artifacts, options)?;
        if model.n_classes() != labels.len() {
            return Err(Error::Format(format!("model has {} classes, label map {}", model.n_classes(), labels.len())));
        }
        Ok(Classifier { model, labels, pipeline, meta })
    }

    pub fn method(&self) -> MethodTag {
        self.pipeline.method
    }

    pub fn probabilities(&self, text: &str) -> Result<Vec<f32>> {
        self.pipeline.probabilities(&self.model, text)
    }

    pub fn predict(&self, text: &str) -> Result<usize> {
        Ok(predict_class(&self.probabilities(text)?))
    }

    /// Predictions in dataset order.
    pub fn predict_all(&self, d: &Dataset) -> Result<Vec<usize>> {
        d.examples().par_iter().map(|ex| self.predict(&ex.text)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledExample;
    use crate::embeddings::build_vocab;
    use crate::models::accuracy;

    fn words() -> (WordEmbeddings, Vocabulary) {
        let vocab = build_vocab(&[vec!["alpha", "beta", "gamma"]], 1);
        let mut data = vec![0.0f32; 4];
        data.extend([1.0, 0.0, 0.0, 1.0, -1.0, -1.0]);
        (WordEmbeddings::new(2, data).unwrap(), vocab)
    }

    fn dataset() -> Dataset {
        let labels = LabelMap::new(vec!["x".into(), "y".into()]).unwrap();
        let examples = (0..40)
            .map(|i| LabeledExample {
                text: if i % 2 == 0 { "alpha alpha gamma".into() } else { "beta beta gamma".into() },
                label: i % 2,
            })
            .collect();
        Dataset::new(examples, labels).unwrap()
    }

    #[test]
    fn method_tags_roundtrip() {
        for m in MethodTag::ALL {
            assert_eq!(m.as_str().parse::<MethodTag>().unwrap(), m);
        }
        assert!("svm".parse::<MethodTag>().is_err());
    }

    #[test]
    fn missing_artifacts_are_precondition_errors() {
        let err = Pipeline::new(MethodTag::BowLogr, Artifacts { words: Some(words()), ..Artifacts::default() }, PipelineOptions::default());
        assert!(matches!(err, Err(Error::Precondition(_))));
        assert!(matches!(
            Pipeline::new(MethodTag::Doc2vecLogr, Artifacts::default(), PipelineOptions::default()),
            Err(Error::Precondition(_))
        ));
        let wide = Codebook::new(3, vec![0.0; 6]).unwrap();
        let mismatched = Artifacts { words: Some(words()), codebook: Some(wide), doc2vec: None };
        assert!(matches!(Pipeline::new(MethodTag::BowLogr, mismatched, PipelineOptions::default()), Err(Error::Shape(_))));
    }

    #[test]
    fn mean_policies_agree_without_oov() {
        let d = dataset();
        let art = Artifacts { words: Some(words()), ..Artifacts::default() };
        let settings = TrainSettings { logr: LogRConfig { epochs: 20, ..LogRConfig::new(1, 1) }, ..TrainSettings::default() };
        let zero = Pipeline::new(MethodTag::ZeromeanLogr, art.clone(), PipelineOptions::default()).unwrap();
        let elim = Pipeline::new(MethodTag::ElimmeanLogr, art, PipelineOptions::default()).unwrap();
        assert_eq!(zero.vectors(&d).unwrap(), elim.vectors(&d).unwrap());
        let (mz, _) = train_method(&zero, &d, &d, &settings).unwrap();
        let (me, _) = train_method(&elim, &d, &d, &settings).unwrap();
        assert_eq!(mz, me);
    }

    #[test]
    fn classifier_survives_a_save_load_cycle() {
        let dir = tempfile::tempdir().unwrap();
        let emb_path = dir.path().join("emb.txt");
        let (e, v) = words();
        crate::embeddings::save_embeddings(&e, &v, &emb_path).unwrap();
        let d = dataset();
        let pipeline = Pipeline::new(MethodTag::ElimmeanLogr, Artifacts { words: Some((e, v)), ..Artifacts::default() }, PipelineOptions::default()).unwrap();
        let (model, _) = train_method(&pipeline, &d, &d, &TrainSettings::default()).unwrap();
        let paths = BTreeMap::from([("embeddings".to_string(), emb_path)]);
        let c = Classifier::new(model, d.label_map().clone(), pipeline, &paths).unwrap();
        let model_path = dir.path().join("m.bin");
        c.save(&model_path).unwrap();
        let back = Classifier::load(&model_path).unwrap();
        assert_eq!(back.method(), MethodTag::ElimmeanLogr);
        assert_eq!(back.model, c.model);
        let predicted = back.predict_all(&d).unwrap();
        assert_eq!(accuracy(&predicted, &d.labels()).unwrap(), 1.0);
        let p = back.probabilities("").unwrap();
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }
}
