use crate::embeddings::{Vocabulary, WordEmbeddings, UNK};
use crate::error::{Error, Result};
use crate::neural::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub max_len: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { max_len: 50 }
    }
}

/// `max_len x dim` sentence matrix. Rows at or beyond `true_len` are the
/// all-zero padding row.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMatrix {
    pub max_len: usize,
    pub dim: usize,
    pub true_len: usize,
    pub data: Vec<f32>,
}

impl SentenceMatrix {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::new(vec![self.max_len, self.dim], self.data.clone()).expect("matrix holds max_len x dim values")
    }
}

/// Looks up each of the first `max_len` tokens (OOV tokens take the zero
/// `UNK` row) and pads the rest with zeros. Tokens past `max_len` are
/// discarded.
pub fn encode_sentence_matrix<S: AsRef<str>>(
    e: &WordEmbeddings,
    vocab: &Vocabulary,
    tokens: &[S],
    cfg: &EncoderConfig,
) -> Result<SentenceMatrix> {
    if cfg.max_len == 0 {
        return Err(Error::InvalidArgument("max_len must be at least 1".into()));
    }
    if e.rows() != vocab.len() {
        return Err(Error::Shape(format!("{} embedding rows for {} vocabulary entries", e.rows(), vocab.len())));
    }
    let dim = e.dim();
    let true_len = tokens.len().min(cfg.max_len);
    let mut data = vec![0.0f32; cfg.max_len * dim];
    for (row, tok) in data.chunks_mut(dim).zip(&tokens[..true_len]) {
        let id = vocab.id(tok.as_ref()).unwrap_or(UNK);
        row.copy_from_slice(e.row(id));
    }
    Ok(SentenceMatrix {
        max_len: cfg.max_len,
        dim,
        true_len,
        data,
    })
}
