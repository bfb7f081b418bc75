use std::collections::HashMap;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<PAD>";
pub const UNK_TOKEN: &str = "<UNK>";

/// Token index with reserved `PAD = 0` and `UNK = 1`.
///
/// Regular tokens are ordered by descending frequency, ties broken
/// lexicographically. The `UNK` count records how many corpus occurrences
/// fell below `min_count`. A vocabulary read back from an embedding file has
/// no frequency information and reports zero counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
}

impl Vocabulary {
    pub(crate) fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Self {
        debug_assert_eq!(tokens.len(), counts.len());
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index, counts }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Never true: `PAD` and `UNK` are always present.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or `UNK`.
    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK)
    }

    /// True for tokens with their own (non-reserved) row.
    pub fn contains(&self, token: &str) -> bool {
        self.id(token).is_some_and(|id| id > UNK)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id_or_unk(t.as_ref())).collect()
    }
}

/// Keeps every token seen at least `min_count` times, plus `PAD` and `UNK`.
pub fn build_vocab<S: AsRef<str>>(sentences: &[Vec<S>], min_count: u64) -> Vocabulary {
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for t in s {
            *freq.entry(t.as_ref()).or_default() += 1;
        }
    }
    let mut unk = 0;
    let mut kept: Vec<(&str, u64)> = Vec::new();
    for (tok, n) in freq {
        if n >= min_count.max(1) && tok != PAD_TOKEN && tok != UNK_TOKEN {
            kept.push((tok, n));
        } else {
            unk += n;
        }
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    let mut counts = vec![0, unk];
    for (tok, n) in kept {
        tokens.push(tok.to_string());
        counts.push(n);
    }
    Vocabulary::from_parts(tokens, counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_count_filters() {
        let corpus = vec![vec!["a", "b", "a"]];
        let v = build_vocab(&corpus, 2);
        assert_eq!(v.len(), 3);
        assert_eq!(v.tokens(), [PAD_TOKEN, UNK_TOKEN, "a"]);
        assert_eq!(v.counts(), [0, 1, 2]);
        assert_eq!(build_vocab(&corpus, 1).len(), 4);
    }

    #[test]
    fn empty_corpus_keeps_reserved() {
        let v = build_vocab::<&str>(&[], 1);
        assert_eq!(v.len(), 2);
        assert_eq!(v.id(PAD_TOKEN), Some(PAD));
        assert_eq!(v.id(UNK_TOKEN), Some(UNK));
    }

    #[test]
    fn frequency_then_lexicographic_order() {
        let v = build_vocab(&[vec!["b", "c", "a", "c"]], 1);
        assert_eq!(v.tokens(), [PAD_TOKEN, UNK_TOKEN, "c", "a", "b"]);
        assert_eq!(v.encode(&["a", "zzz"]), [3, UNK]);
        assert!(v.contains("a"));
        assert!(!v.contains("zzz"));
        assert!(!v.contains(UNK_TOKEN));
    }

    #[test]
    fn reserved_strings_in_corpus_are_not_duplicated() {
        let v = build_vocab(&[vec![PAD_TOKEN, PAD_TOKEN, "x", "x"]], 1);
        assert_eq!(v.tokens(), [PAD_TOKEN, UNK_TOKEN, "x"]);
    }
}
