use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::corpus::{load_dataset, split, CorpusFormat, Dataset, TokenizerPolicy};
use crate::embeddings::{
    build_vocab, load_embeddings, save_embeddings, train_doc2vec, train_word2vec, Doc2vecConfig, Doc2vecModel,
    Word2vecConfig, UNK,
};
use crate::encoders::{fit_codebook, load_codebook, save_codebook};
use crate::error::{Error, Result};
use crate::format::TensorFile;
use crate::models::{accuracy, CnnConfig, LogRConfig, TrainReport};
use crate::neural::{CnnArch, OptimizerKind};

use super::grid::{grid_search, GridSpec};
use super::pipeline::{train_method, Artifacts, Classifier, MethodTag, Pipeline, PipelineOptions, TrainSettings};
use super::report::{dataset_fingerprint, ComparisonReport, MethodRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "medtext",
    version,
    about = "Sentence-level medical text classification",
    after_help = "Every subcommand accepts --config FILE with `key = value` lines naming long flags; flags given on the command line win."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train Word2vec embeddings or a Doc2vec model on a corpus.
    TrainEmbeddings(TrainEmbeddingsArgs),
    /// Fit a k-means codebook over word vectors.
    FitCodebook(FitCodebookArgs),
    /// Train one classification method.
    Train(TrainArgs),
    /// Compare trained models on one validation corpus.
    Evaluate(EvaluateArgs),
    /// Classify a single sentence.
    Classify(ClassifyArgs),
    /// Grid-search CNN filter counts, kernel sizes and depths.
    GridSearch(GridSearchArgs),
}

#[derive(Args, Debug, Clone, Copy)]
struct TokenizerArgs {
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    lowercase: bool,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    punctuation_split: bool,
}

impl TokenizerArgs {
    fn policy(&self) -> TokenizerPolicy {
        TokenizerPolicy {
            lowercase: self.lowercase,
            punctuation_split: self.punctuation_split,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Algo {
    Word2vec,
    Doc2vec,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum InputFormat {
    Tsv,
    Jsonl,
    /// One unlabelled sentence per line.
    Text,
}

#[derive(Args, Debug)]
struct TrainEmbeddingsArgs {
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "word2vec")]
    algo: Algo,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    /// Defaults to 5 for word2vec and 60 for doc2vec.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0.025)]
    learning_rate: f64,
    #[arg(long, default_value_t = 2)]
    min_count: u64,
    #[arg(long, default_value_t = 60)]
    infer_epochs: usize,
    /// Guessed from the extension when omitted (.tsv, .jsonl, otherwise text).
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FitCodebookArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = 1000)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum OptimizerName {
    Adam,
    Sgd,
}

#[derive(Args, Debug, Clone, Copy)]
struct CnnArgs {
    #[arg(long, default_value_t = 50)]
    max_len: usize,
    #[arg(long, default_value_t = 2)]
    conv_pairs: usize,
    #[arg(long, default_value_t = 256)]
    filters: usize,
    #[arg(long, default_value_t = 5)]
    kernel: usize,
    #[arg(long, default_value_t = 2)]
    pool: usize,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, default_value_t = 128)]
    fc_dim: usize,
    #[arg(long, default_value_t = 10)]
    cnn_epochs: usize,
    #[arg(long, default_value_t = 32)]
    cnn_batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    cnn_learning_rate: f64,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerName,
    /// Momentum for the sgd optimizer.
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
}

impl CnnArgs {
    /// Embedding width and class count are filled in later from the data.
    fn config(&self, seed: u64) -> CnnConfig {
        CnnConfig {
            arch: CnnArch {
                max_len: self.max_len,
                embed_dim: 1,
                conv_pairs: self.conv_pairs,
                filters: self.filters,
                kernel: self.kernel,
                pool: self.pool,
                dropout_p: self.dropout,
                fc_dim: self.fc_dim,
                n_classes: 1,
            },
            epochs: self.cnn_epochs,
            batch_size: self.cnn_batch_size,
            optimizer: match self.optimizer {
                OptimizerName::Adam => OptimizerKind::adam(),
                OptimizerName::Sgd => OptimizerKind::SgdMomentum { momentum: self.momentum },
            },
            learning_rate: self.cnn_learning_rate,
            seed,
        }
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct LogrArgs {
    #[arg(long, default_value_t = 1e-4)]
    l2_lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    logr_learning_rate: f64,
    #[arg(long, default_value_t = 200)]
    logr_epochs: usize,
    #[arg(long, default_value_t = 64)]
    logr_batch_size: usize,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    #[arg(long)]
    train: PathBuf,
    /// Held-out corpus; when omitted, a stratified split of --train is used.
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    valid_fraction: f64,
    /// Corpus format; guessed from each file's extension when omitted.
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    method: String,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[arg(long)]
    doc2vec: Option<PathBuf>,
    #[command(flatten)]
    cnn: CnnArgs,
    #[command(flatten)]
    logr: LogrArgs,
    #[arg(long, default_value_t = 50)]
    k_soft: usize,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    normalize: bool,
    #[arg(long)]
    seed: u64,
    /// Model file to write; the training report goes to `<out>.report.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Model files, comma-separated or repeated.
    #[arg(long = "model", required = true, value_delimiter = ',', action = ArgAction::Append)]
    models: Vec<PathBuf>,
    #[arg(long)]
    valid: PathBuf,
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// Output prefix: writes `<out>.tsv` and `<out>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(default_value = "")]
    text: String,
}

#[derive(Args, Debug)]
struct GridSearchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    grid_filters: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "3,5,7")]
    grid_kernels: Vec<usize>,
    /// Total convolution layers per network (pairs x 2).
    #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
    grid_conv_layers: Vec<usize>,
    #[command(flatten)]
    cnn: CnnArgs,
    #[arg(long, default_value_t = false, action = ArgAction::Set)]
    parallel: bool,
    #[arg(long)]
    seed: u64,
    /// Output prefix: writes `<out>.tsv`, `<out>.json` and `<out>.best.conf`.
    #[arg(long)]
    out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => return report_error(&e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::TrainEmbeddings(a) => cmd_train_embeddings(a),
        Command::FitCodebook(a) => cmd_fit_codebook(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Classify(a) => cmd_classify(a),
        Command::GridSearch(a) => cmd_grid_search(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &Error) -> i32 {
    eprintln!("error: {e}");
    match e {
        Error::Invariant(_) => EXIT_INVARIANT,
        _ => EXIT_INPUT,
    }
}

/// Replaces `--config FILE` with the file's `key = value` entries as long
/// flags, skipping any flag the command line already sets.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.to_string_lossy().starts_with("--config=")) else {
        return Ok(args);
    };
    let mut rest = args;
    let flag = rest.remove(pos).to_string_lossy().into_owned();
    let path = match flag.strip_prefix("--config=") {
        Some(p) => PathBuf::from(p),
        None if pos < rest.len() => PathBuf::from(rest.remove(pos)),
        None => return Err(Error::InvalidArgument("--config needs a file path".into())),
    };
    let content = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let given: HashSet<String> = rest
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let mut injected = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path.display().to_string(), i + 1, "expected `key = value`"))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(Error::parse(path.display().to_string(), i + 1, "empty key"));
        }
        if given.contains(&key) {
            continue;
        }
        injected.push(OsString::from(format!("--{key}")));
        injected.push(OsString::from(value.trim()));
    }
    // Flags follow the subcommand name, which sits right after the program name.
    let at = rest.len().min(2);
    rest.splice(at..at, injected);
    Ok(rest)
}

fn labelled_format(path: &Path, fmt: Option<InputFormat>) -> Result<CorpusFormat> {
    match fmt {
        Some(InputFormat::Tsv) => Ok(CorpusFormat::Tsv),
        Some(InputFormat::Jsonl) => Ok(CorpusFormat::Jsonl),
        Some(InputFormat::Text) => Err(Error::InvalidArgument("labelled corpora must be tsv or jsonl".into())),
        None => Ok(CorpusFormat::from_path(path)),
    }
}

fn load_labelled(path: &Path, fmt: Option<InputFormat>) -> Result<Dataset> {
    load_dataset(path, labelled_format(path, fmt)?)
}

fn load_sentences(path: &Path, fmt: Option<InputFormat>, policy: &TokenizerPolicy) -> Result<Vec<Vec<String>>> {
    let fmt = fmt.unwrap_or(match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => InputFormat::Tsv,
        Some("jsonl") | Some("json") => InputFormat::Jsonl,
        _ => InputFormat::Text,
    });
    let texts: Vec<String> = match fmt {
        InputFormat::Text => fs::read_to_string(path)
            .map_err(|e| Error::io(path, e))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect(),
        _ => load_labelled(path, Some(fmt))?.examples().iter().map(|e| e.text.clone()).collect(),
    };
    Ok(texts.iter().map(|t| crate::corpus::tokenize(t, policy)).collect())
}

/// Training and validation sets, the latter expressed in the former's labels.
fn load_train_valid(d: &DataArgs, seed: u64) -> Result<(Dataset, Dataset)> {
    let train = load_labelled(&d.train, d.format)?;
    match &d.valid {
        Some(p) => {
            let valid = load_labelled(p, d.format)?.remap_to(train.label_map())?;
            Ok((train, valid))
        }
        None => split(&train, d.valid_fraction, crate::rng::derive(seed, &[4])),
    }
}

fn write(path: &Path, content: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn to_json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data");
    s.push('\n');
    s
}

fn cmd_train_embeddings(a: TrainEmbeddingsArgs) -> Result<()> {
    let policy = a.tokenizer.policy();
    let sentences = load_sentences(&a.corpus, a.format, &policy)?;
    let vocab = build_vocab(&sentences, a.min_count);
    let config = match a.algo {
        Algo::Word2vec => {
            let cfg = Word2vecConfig {
                dim: a.dim,
                window: a.window,
                negatives: a.negatives,
                epochs: a.epochs.unwrap_or(5),
                learning_rate: a.learning_rate,
                min_count: a.min_count,
            };
            let e = train_word2vec(&sentences, &vocab, &cfg, a.seed)?;
            save_embeddings(&e, &vocab, &a.out)?;
            json!({
                "dim": cfg.dim, "window": cfg.window, "negatives": cfg.negatives, "epochs": cfg.epochs,
                "learning_rate": cfg.learning_rate, "min_count": cfg.min_count,
            })
        }
        Algo::Doc2vec => {
            let cfg = Doc2vecConfig {
                dim: a.dim,
                epochs: a.epochs.unwrap_or(60),
                window: a.window,
                negatives: a.negatives,
                learning_rate: a.learning_rate,
                infer_epochs: a.infer_epochs,
            };
            let m = train_doc2vec(&sentences, &vocab, &cfg, a.seed)?;
            m.save(&a.out)?;
            json!({
                "dim": cfg.dim, "window": cfg.window, "negatives": cfg.negatives, "epochs": cfg.epochs,
                "learning_rate": cfg.learning_rate, "infer_epochs": cfg.infer_epochs, "min_count": a.min_count,
            })
        }
    };
    let manifest = json!({
        "command": "train-embeddings",
        "algo": format!("{:?}", a.algo).to_lowercase(),
        "corpus": a.corpus.display().to_string(),
        "sentences": sentences.len(),
        "vocabulary": vocab.len(),
        "tokenizer": { "lowercase": policy.lowercase, "punctuation_split": policy.punctuation_split },
        "config": config,
        "seed": a.seed,
    });
    write(&with_suffix(&a.out, ".manifest.json"), to_json(&manifest))?;
    println!("wrote {} ({} tokens, dimension {})", a.out.display(), vocab.len(), a.dim);
    Ok(())
}

fn cmd_fit_codebook(a: FitCodebookArgs) -> Result<()> {
    let (e, vocab) = load_embeddings(&a.embeddings)?;
    let points: Vec<f64> = (UNK + 1..vocab.len())
        .flat_map(|id| e.row(id).iter().map(|&v| f64::from(v)))
        .collect();
    let cb = fit_codebook(&points, e.dim(), a.k, a.max_iters, a.tol, a.seed)?;
    save_codebook(&cb, &a.out)?;
    let manifest = json!({
        "command": "fit-codebook",
        "embeddings": a.embeddings.display().to_string(),
        "points": points.len() / e.dim(),
        "config": { "k": a.k, "max_iters": a.max_iters, "tol": a.tol },
        "seed": a.seed,
    });
    write(&with_suffix(&a.out, ".manifest.json"), to_json(&manifest))?;
    println!("wrote {} ({} centers, dimension {})", a.out.display(), cb.k(), cb.dim());
    Ok(())
}

fn report_json(method: MethodTag, config: &BTreeMap<String, String>, seed: u64, r: &TrainReport) -> serde_json::Value {
    let epochs: Vec<_> = r
        .epoch_loss
        .iter()
        .zip(&r.valid_accuracy)
        .enumerate()
        .map(|(i, (l, acc))| json!({ "epoch": i + 1, "loss": l, "valid_accuracy": acc }))
        .collect();
    json!({
        "method": method.as_str(),
        "seed": seed,
        "config": config,
        "epochs": epochs,
        "timing": { "seconds": r.seconds },
    })
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let method: MethodTag = a.method.parse()?;
    let mut paths = BTreeMap::new();
    let mut artifacts = Artifacts::default();
    // Only the artifacts this method reads are loaded and recorded.
    let needs_words = !matches!(method, MethodTag::Doc2vecLogr);
    if needs_words {
        if let Some(p) = &a.embeddings {
            artifacts.words = Some(load_embeddings(p)?);
            paths.insert("embeddings".to_string(), p.clone());
        }
    }
    if method == MethodTag::BowLogr {
        if let Some(p) = &a.codebook {
            artifacts.codebook = Some(load_codebook(p)?);
            paths.insert("codebook".to_string(), p.clone());
        }
    }
    if method == MethodTag::Doc2vecLogr {
        if let Some(p) = &a.doc2vec {
            artifacts.doc2vec = Some(Doc2vecModel::load(p)?);
            paths.insert("doc2vec".to_string(), p.clone());
        }
    }
    let options = PipelineOptions {
        policy: a.data.tokenizer.policy(),
        max_len: a.cnn.max_len,
        k_soft: a.k_soft,
        normalize: a.normalize,
        seed: a.seed,
    };
    let pipeline = Pipeline::new(method, artifacts, options)?;
    let (train, valid) = load_train_valid(&a.data, a.seed)?;
    let settings = TrainSettings {
        cnn: a.cnn.config(a.seed),
        logr: LogRConfig {
            l2_lambda: a.logr.l2_lambda,
            learning_rate: a.logr.logr_learning_rate,
            epochs: a.logr.logr_epochs,
            batch_size: a.logr.logr_batch_size,
            seed: a.seed,
            ..LogRConfig::new(1, 1)
        },
    };
    let (model, report) = train_method(&pipeline, &train, &valid, &settings)?;
    let classifier = Classifier::new(model, train.label_map().clone(), pipeline, &paths)?;
    classifier.save(&a.out)?;
    let snapshot = classifier.model.to_tensor_file(&classifier.meta)?.config;
    let report_path = with_suffix(&a.out, ".report.json");
    write(&report_path, to_json(&report_json(method, &snapshot, a.seed, &report)))?;
    println!(
        "{method}: final validation accuracy {:.4} after {} epochs; wrote {} and {}",
        report.valid_accuracy.last().copied().unwrap_or(0.0),
        report.valid_accuracy.len(),
        a.out.display(),
        report_path.display()
    );
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let classifiers = a.models.iter().map(Classifier::load).collect::<Result<Vec<_>>>()?;
    let labels = classifiers[0].labels.clone();
    for (c, p) in classifiers.iter().zip(&a.models) {
        if c.labels != labels {
            return Err(Error::Precondition(format!(
                "{} uses labels {:?}, {} uses {:?}",
                p.display(),
                c.labels.names(),
                a.models[0].display(),
                labels.names()
            )));
        }
    }
    let valid = load_labelled(&a.valid, a.format)?.remap_to(&labels)?;
    let truth = valid.labels();
    let mut rows = Vec::new();
    let mut configs = BTreeMap::new();
    let mut seeds = Vec::new();
    for c in &classifiers {
        let method = c.method().to_string();
        let predicted = c.predict_all(&valid)?;
        rows.push(MethodRow {
            method: method.clone(),
            accuracy: accuracy(&predicted, &truth)?,
            n_eval: truth.len(),
        });
        let snapshot = c.model.to_tensor_file(&c.meta)?.config;
        if configs.insert(method.clone(), snapshot).is_some() {
            return Err(Error::InvalidArgument(format!("method {method} given more than once")));
        }
        seeds.push(c.pipeline.options.seed);
    }
    let report = ComparisonReport::new(rows, dataset_fingerprint(&valid), configs, &seeds)?;
    let tsv = report.to_tsv();
    write(&with_suffix(&a.out, ".tsv"), &tsv)?;
    write(&with_suffix(&a.out, ".json"), report.to_json())?;
    print!("{tsv}");
    Ok(())
}

fn cmd_classify(a: ClassifyArgs) -> Result<()> {
    let c = Classifier::load(&a.model)?;
    let probs = c.probabilities(&a.text)?;
    let mut ranked: Vec<(usize, f32)> = probs.iter().copied().enumerate().collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let name = |i: usize| c.labels.name(i).expect("model classes match labels");
    println!("predicted\t{}", name(ranked[0].0));
    for (i, p) in ranked {
        println!("{}\t{p}", name(i));
    }
    Ok(())
}

fn cmd_grid_search(a: GridSearchArgs) -> Result<()> {
    let spec = GridSpec {
        filters: a.grid_filters.clone(),
        kernels: a.grid_kernels.clone(),
        conv_layers: a.grid_conv_layers.clone(),
    };
    spec.validate()?;
    let words = load_embeddings(&a.embeddings)?;
    let options = PipelineOptions {
        policy: a.data.tokenizer.policy(),
        max_len: a.cnn.max_len,
        seed: a.seed,
        ..PipelineOptions::default()
    };
    let pipeline = Pipeline::new(MethodTag::Cnn, Artifacts { words: Some(words), ..Artifacts::default() }, options)?;
    let (train, valid) = load_train_valid(&a.data, a.seed)?;
    let mut base = a.cnn.config(a.seed);
    base.arch.embed_dim = pipeline.feature_dim();
    base.arch.n_classes = train.label_map().len();
    let tr = pipeline.matrices(&train)?;
    let va = pipeline.matrices(&valid)?;
    let outcome = grid_search(&tr, &va, &base, &spec, a.parallel)?;

    write(&with_suffix(&a.out, ".tsv"), outcome.to_tsv())?;
    let mut base_file = TensorFile::default();
    base.write_to(&mut base_file);
    let summary = json!({
        "grid": spec,
        "base_config": base_file.config,
        "results": outcome.results,
        "skipped": outcome.skipped,
        "dataset": { "train": dataset_fingerprint(&train), "valid": dataset_fingerprint(&valid) },
        "seed": a.seed,
    });
    write(&with_suffix(&a.out, ".json"), to_json(&summary))?;
    if let Some(best) = outcome.best() {
        let p = best.point;
        let mut conf = String::new();
        conf.push_str("method = cnn\n");
        conf.push_str(&format!("embeddings = {}\n", a.embeddings.display()));
        conf.push_str(&format!("filters = {}\nkernel = {}\nconv-pairs = {}\n", p.filters, p.kernel, p.conv_layers / 2));
        let c = &a.cnn;
        conf.push_str(&format!(
            "max-len = {}\npool = {}\ndropout = {}\nfc-dim = {}\ncnn-epochs = {}\ncnn-batch-size = {}\ncnn-learning-rate = {}\nseed = {}\n",
            c.max_len, c.pool, c.dropout, c.fc_dim, c.cnn_epochs, c.cnn_batch_size, c.cnn_learning_rate, a.seed
        ));
        write(&with_suffix(&a.out, ".best.conf"), conf)?;
    }
    print!("{}", outcome.to_tsv());
    for s in &outcome.skipped {
        eprintln!(
            "skipped filters={} kernel={} conv_layers={}: {}",
            s.point.filters, s.point.kernel, s.point.conv_layers, s.reason
        );
    }
    Ok(())
}
