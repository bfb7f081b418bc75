//! Corpus ingestion: tokenization, label maps, balanced sampling and
//! stratified train/validation splits.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::rng;

/// Category names; ids are positions in `names`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelMap {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidArgument("label map needs at least one category".into()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (id, name) in names.iter().enumerate() {
            if index.insert(name.clone(), id).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate category name {name:?}")));
            }
        }
        Ok(LabelMap { names, index })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub text: String,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
    label_map: LabelMap,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>, label_map: LabelMap) -> Result<Self> {
        if let Some(bad) = examples.iter().find(|e| e.label >= label_map.len()) {
            return Err(Error::InvalidArgument(format!(
                "label id {} out of range for {} categories",
                bad.label,
                label_map.len()
            )));
        }
        Ok(Dataset { examples, label_map })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn label_map(&self) -> &LabelMap {
        &self.label_map
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Example count per class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_map.len()];
        for e in &self.examples {
            counts[e.label] += 1;
        }
        counts
    }

    /// Indices of each class's examples, in corpus order.
    fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.label_map.len()];
        for (i, e) in self.examples.iter().enumerate() {
            by_class[e.label].push(i);
        }
        by_class
    }

    /// Re-expresses label ids under another label map, matching by name.
    pub fn remap_to(&self, target: &LabelMap) -> Result<Dataset> {
        let translate: Vec<usize> = self
            .label_map
            .names()
            .iter()
            .map(|name| {
                target.id(name).ok_or_else(|| {
                    Error::Precondition(format!("category {name:?} is not known to the target label map"))
                })
            })
            .collect::<Result<_>>()?;
        let examples = self
            .examples
            .iter()
            .map(|e| LabeledExample {
                text: e.text.clone(),
                label: translate[e.label],
            })
            .collect();
        Dataset::new(examples, target.clone())
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            label_map: self.label_map.clone(),
        }
    }
}

/// Tokenizer switches. Stop-words are never removed and nothing is stemmed,
/// whatever the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerPolicy {
    pub lowercase: bool,
    pub punctuation_split: bool,
}

impl Default for TokenizerPolicy {
    fn default() -> Self {
        TokenizerPolicy {
            lowercase: true,
            punctuation_split: true,
        }
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}' | '\u{2013}' | '\u{2014}' | '\u{2026}' | '\u{ab}' | '\u{bb}'
        )
}

/// Splits on Unicode whitespace, then detaches leading and trailing
/// punctuation characters as single-character tokens.
pub fn tokenize(text: &str, policy: &TokenizerPolicy) -> Vec<String> {
    let folded;
    let text = if policy.lowercase {
        folded = text.to_lowercase();
        folded.as_str()
    } else {
        text
    };
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        if !policy.punctuation_split {
            tokens.push(word.to_string());
            continue;
        }
        let chars: Vec<char> = word.chars().collect();
        let mut start = 0;
        while start < chars.len() && is_punctuation(chars[start]) {
            tokens.push(chars[start].to_string());
            start += 1;
        }
        let mut end = chars.len();
        while end > start && is_punctuation(chars[end - 1]) {
            end -= 1;
        }
        if end > start {
            tokens.push(chars[start..end].iter().collect());
        }
        tokens.extend(chars[end..].iter().map(|c| c.to_string()));
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Tsv,
    Jsonl,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(CorpusFormat::Tsv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(Error::InvalidArgument(format!("unknown corpus format {other:?} (expected tsv or jsonl)"))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::Tsv => "tsv",
            CorpusFormat::Jsonl => "jsonl",
        })
    }
}

impl CorpusFormat {
    /// Guesses the format from a file extension, defaulting to TSV.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Tsv,
        }
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    text: String,
    label: String,
}

pub fn load_dataset(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&content, format, &path.display().to_string())
}

/// Parses corpus text; `source_name` is used in error messages.
pub fn parse_dataset(content: &str, format: CorpusFormat, source_name: &str) -> Result<Dataset> {
    let mut names: Vec<String> = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut examples = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = match format {
            CorpusFormat::Tsv => {
                let (label, text) = line
                    .split_once('\t')
                    .ok_or_else(|| Error::parse(source_name, line_no, "expected `label<TAB>text`"))?;
                if label.is_empty() {
                    return Err(Error::parse(source_name, line_no, "empty label"));
                }
                (label.to_string(), text.to_string())
            }
            CorpusFormat::Jsonl => {
                let rec: JsonRecord = serde_json::from_str(line)
                    .map_err(|e| Error::parse(source_name, line_no, format!("bad JSON record: {e}")))?;
                (rec.label, rec.text)
            }
        };
        let next = names.len();
        let id = *ids.entry(label.clone()).or_insert_with(|| {
            names.push(label);
            next
        });
        examples.push(LabeledExample { text, label: id });
    }
    if names.is_empty() {
        return Err(Error::parse(source_name, 0, "corpus contains no records"));
    }
    Dataset::new(examples, LabelMap::new(names)?)
}

/// Draws exactly `n_per_class` examples of every class without replacement.
/// Output is grouped by class id.
pub fn balanced_sample(d: &Dataset, n_per_class: usize, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be positive".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut chosen = Vec::with_capacity(n_per_class * d.label_map.len());
    for (class, mut members) in d.indices_by_class().into_iter().enumerate() {
        if members.len() < n_per_class {
            return Err(Error::Precondition(format!(
                "category {:?} has {} examples, fewer than the {} requested",
                d.label_map.names[class],
                members.len(),
                n_per_class
            )));
        }
        let (picked, _) = members.partial_shuffle(&mut rng, n_per_class);
        chosen.extend_from_slice(picked);
    }
    Ok(d.subset(&chosen))
}

/// Per-class stratified split. Each class sends
/// `round(valid_fraction * class_count)` examples to the validation side.
pub fn split(d: &Dataset, valid_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(valid_fraction > 0.0 && valid_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("valid_fraction {valid_fraction} must lie in (0, 1)")));
    }
    let mut rng = rng::seeded(seed);
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for (class, mut members) in d.indices_by_class().into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let n_valid = (valid_fraction * members.len() as f64).round() as usize;
        if n_valid == 0 || n_valid == members.len() {
            return Err(Error::Precondition(format!(
                "category {:?} with {} examples leaves an empty side at fraction {valid_fraction}",
                d.label_map.names[class],
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        valid.extend_from_slice(&members[..n_valid]);
        train.extend_from_slice(&members[n_valid..]);
    }
    Ok((d.subset(&train), d.subset(&valid)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(text: &str) -> Vec<String> {
        tokenize(text, &TokenizerPolicy::default())
    }

    fn synthetic(per_class: &[usize]) -> Dataset {
        let names = (0..per_class.len()).map(|c| format!("c{c}")).collect();
        let mut examples = Vec::new();
        for (label, &n) in per_class.iter().enumerate() {
            for i in 0..n {
                examples.push(LabeledExample {
                    text: format!("class {label} sentence {i}"),
                    label,
                });
            }
        }
        Dataset::new(examples, LabelMap::new(names).unwrap()).unwrap()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            toks("The patient lives with their mother."),
            ["the", "patient", "lives", "with", "their", "mother", "."]
        );
        assert!(toks("").is_empty());
        assert_eq!(toks("A  B"), ["a", "b"]);
    }

    #[test]
    fn tokenize_keeps_stop_words_and_inner_punctuation() {
        assert_eq!(toks("(it's a U.S. thing)"), ["(", "it's", "a", "u.s", ".", "thing", ")"]);
        let raw = TokenizerPolicy {
            lowercase: false,
            punctuation_split: false,
        };
        assert_eq!(tokenize("Of the, And", &raw), ["Of", "the,", "And"]);
    }

    #[test]
    fn label_map_rejects_duplicates() {
        assert!(LabelMap::new(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn tsv_labels_in_first_appearance_order() {
        let d = parse_dataset("brain\tone\ncancer\ttwo\nbrain\tthree\n", CorpusFormat::Tsv, "mem").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.label_map().names(), ["brain", "cancer"]);
        assert_eq!(d.labels(), [0, 1, 0]);
    }

    #[test]
    fn jsonl_single_record() {
        let d = parse_dataset("{\"text\":\"x\",\"label\":\"brain\"}\n", CorpusFormat::Jsonl, "mem").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.examples()[0].label, 0);
        assert_eq!(d.examples()[0].text, "x");
    }

    #[test]
    fn tsv_without_tab_reports_line() {
        let err = parse_dataset("a\tok\n\nno tab here\n", CorpusFormat::Tsv, "corpus.tsv").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err_string("a\tok\nbroken") .contains("corpus.tsv:2"));
    }

    fn err_string(content: &str) -> String {
        parse_dataset(content, CorpusFormat::Tsv, "corpus.tsv").unwrap_err().to_string()
    }

    #[test]
    fn unknown_format_tag() {
        assert!("xml".parse::<CorpusFormat>().is_err());
        assert_eq!("jsonl".parse::<CorpusFormat>().unwrap(), CorpusFormat::Jsonl);
    }

    #[test]
    fn balanced_sample_cardinality_and_determinism() {
        let d = synthetic(&[10, 10, 10]);
        let a = balanced_sample(&d, 4, 7).unwrap();
        assert_eq!(a.len(), 12);
        assert_eq!(a.class_counts(), [4, 4, 4]);
        let b = balanced_sample(&d, 4, 7).unwrap();
        assert_eq!(a, b);
        let mut texts: Vec<_> = a.examples().iter().map(|e| &e.text).collect();
        texts.sort();
        texts.dedup();
        assert_eq!(texts.len(), 12);
    }

    #[test]
    fn balanced_sample_names_deficient_class() {
        let d = synthetic(&[10, 10, 10]);
        let msg = balanced_sample(&d, 11, 7).unwrap_err().to_string();
        assert!(msg.contains("\"c0\""), "{msg}");
    }

    #[test]
    fn split_per_class_counts() {
        let d = synthetic(&[10, 10]);
        let (train, valid) = split(&d, 0.2, 3).unwrap();
        assert_eq!(valid.class_counts(), [2, 2]);
        assert_eq!(train.class_counts(), [8, 8]);
    }

    #[test]
    fn split_at_full_scale() {
        let d = synthetic(&[5000, 5000]);
        let (train, valid) = split(&d, 0.2, 11).unwrap();
        assert_eq!(valid.class_counts(), [1000, 1000]);
        assert_eq!(train.class_counts(), [4000, 4000]);
    }

    #[test]
    fn split_rejects_empty_side() {
        let d = synthetic(&[4, 1]);
        assert!(split(&d, 0.5, 1).is_err());
        assert!(split(&d, 0.0, 1).is_err());
    }

    #[test]
    fn remap_matches_names() {
        let a = parse_dataset("x\t1\ny\t2\n", CorpusFormat::Tsv, "a").unwrap();
        let b = parse_dataset("y\t3\nx\t4\n", CorpusFormat::Tsv, "b").unwrap();
        let remapped = b.remap_to(a.label_map()).unwrap();
        assert_eq!(remapped.labels(), [1, 0]);
        let c = parse_dataset("z\t5\n", CorpusFormat::Tsv, "c").unwrap();
        assert!(c.remap_to(a.label_map()).is_err());
    }

    proptest! {
        #[test]
        fn tokens_never_contain_whitespace(text in "\\PC{0,60}") {
            let tokens = toks(&text);
            for t in &tokens {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
            }
            let joined: String = tokens.concat();
            let expected: String = text.to_lowercase().chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(joined, expected);
        }

        #[test]
        fn tokenize_idempotent_on_joined_output(text in "[a-zA-Z0-9 .,;:!?()'\"\\-]{0,60}") {
            let once = toks(&text);
            let again = toks(&once.join(" "));
            prop_assert_eq!(once, again);
        }

        #[test]
        fn split_partitions(sizes in proptest::collection::vec(2usize..30, 1..5), frac in 0.1f64..0.5, seed: u64) {
            let d = synthetic(&sizes);
            if let Ok((train, valid)) = split(&d, frac, seed) {
                prop_assert_eq!(train.len() + valid.len(), d.len());
                let mut all: Vec<_> = train.examples().iter().chain(valid.examples()).map(|e| e.text.clone()).collect();
                all.sort();
                let mut orig: Vec<_> = d.examples().iter().map(|e| e.text.clone()).collect();
                orig.sort();
                prop_assert_eq!(all, orig);
                prop_assert_eq!(split(&d, frac, seed).unwrap(), (train, valid));
            }
        }
    }
}
