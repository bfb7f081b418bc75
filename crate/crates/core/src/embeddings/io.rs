//! Plain-text matrix files: a `rows dim` header, then one line per row of
//! `name v1 ... vdim`. Values are printed in shortest round-trip form, so a
//! save/load cycle is bit-exact.

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::vocab::{Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};
use super::word2vec::WordEmbeddings;

pub(crate) fn format_matrix<T: Display>(names: &[String], dim: usize, values: &[T]) -> String {
    let mut out = format!("{} {}\n", names.len(), dim);
    for (name, row) in names.iter().zip(values.chunks(dim.max(1))) {
        out.push_str(name);
        for v in row {
            out.push(' ');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub(crate) fn parse_matrix<T: FromStr>(content: &str, source: &str) -> Result<(Vec<String>, usize, Vec<T>)> {
    let mut lines = content.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(source, 1, "missing `rows dim` header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [rows, dim] = fields[..] else {
        return Err(Error::parse(source, 1, format!("header {header:?} is not `rows dim`")));
    };
    let rows: usize = rows.parse().map_err(|_| Error::parse(source, 1, format!("bad row count {rows:?}")))?;
    let dim: usize = dim.parse().map_err(|_| Error::parse(source, 1, format!("bad dimension {dim:?}")))?;
    if dim == 0 {
        return Err(Error::parse(source, 1, "dimension must be positive"));
    }
    let mut names = Vec::with_capacity(rows);
    let mut values = Vec::with_capacity(rows * dim);
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let name = parts.next().expect("non-empty line has a first field");
        let before = values.len();
        for p in parts {
            let v = p
                .parse()
                .map_err(|_| Error::parse(source, line_no, format!("row {:?}: bad value {p:?}", name)))?;
            values.push(v);
        }
        let got = values.len() - before;
        if got != dim {
            return Err(Error::parse(
                source,
                line_no,
                format!("row {} ({name:?}) has {got} values, header says {dim}", names.len()),
            ));
        }
        names.push(name.to_string());
    }
    if names.len() != rows {
        return Err(Error::parse(source, 1, format!("header says {rows} rows, file has {}", names.len())));
    }
    Ok((names, dim, values))
}

pub fn write_embeddings(e: &WordEmbeddings, vocab: &Vocabulary) -> Result<String> {
    if e.rows() != vocab.len() {
        return Err(Error::Shape(format!("{} embedding rows for {} vocabulary entries", e.rows(), vocab.len())));
    }
    Ok(format_matrix(vocab.tokens(), e.dim(), e.data()))
}

pub fn read_embeddings(content: &str, source: &str) -> Result<(WordEmbeddings, Vocabulary)> {
    let (tokens, dim, values) = parse_matrix::<f32>(content, source)?;
    if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
        return Err(Error::parse(source, 2, format!("first rows must be {PAD_TOKEN} and {UNK_TOKEN}")));
    }
    let emb = WordEmbeddings::new(dim, values)?;
    if emb.row(PAD).iter().chain(emb.row(UNK)).any(|&v| v != 0.0) {
        return Err(Error::parse(source, 2, "reserved rows must be all zero"));
    }
    let n = tokens.len();
    let vocab = Vocabulary::from_parts(tokens, vec![0; n]);
    if (0..n).any(|i| vocab.id(vocab.token(i).unwrap()) != Some(i)) {
        return Err(Error::parse(source, 0, "duplicate token in embedding file"));
    }
    Ok((emb, vocab))
}

pub fn save_embeddings(e: &WordEmbeddings, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_embeddings(e, vocab)?).map_err(|err| Error::io(path, err))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<(WordEmbeddings, Vocabulary)> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|err| Error::io(path, err))?;
    read_embeddings(&content, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::build_vocab;
    use proptest::prelude::*;

    #[test]
    fn reserved_only_roundtrips() {
        let vocab = build_vocab::<&str>(&[], 1);
        let e = WordEmbeddings::new(3, vec![0.0; 6]).unwrap();
        let text = write_embeddings(&e, &vocab).unwrap();
        assert_eq!(text, "2 3\n<PAD> 0 0 0\n<UNK> 0 0 0\n");
        let (e2, v2) = read_embeddings(&text, "mem").unwrap();
        assert_eq!((e2, v2.tokens().to_vec()), (e, vocab.tokens().to_vec()));
    }

    #[test]
    fn short_row_names_the_row() {
        let mut text = String::from("3 100\n");
        text.push_str(&format!("<PAD>{}\n", " 0".repeat(100)));
        text.push_str(&format!("<UNK>{}\n", " 0".repeat(100)));
        text.push_str(&format!("fever{}\n", " 0.5".repeat(99)));
        let msg = read_embeddings(&text, "emb.txt").unwrap_err().to_string();
        assert!(msg.contains("emb.txt:4"), "{msg}");
        assert!(msg.contains("\"fever\"") && msg.contains("99 values"), "{msg}");
    }

    #[test]
    fn row_count_checked() {
        assert!(read_embeddings("3 1\n<PAD> 0\n<UNK> 0\n", "m").is_err());
        assert!(read_embeddings("2 1\n<UNK> 0\n<PAD> 0\n", "m").is_err());
        assert!(read_embeddings("2 1\n<PAD> 1\n<UNK> 0\n", "m").is_err());
    }

    proptest! {
        #[test]
        fn values_roundtrip_bit_exact(bits in proptest::collection::vec(any::<u32>(), 6)) {
            let mut data = vec![0.0f32; 4];
            data.extend(bits.iter().map(|&b| {
                let v = f32::from_bits(b);
                if v.is_finite() { v } else { 1.5 }
            }));
            prop_assert_eq!(data.len(), 10);
            let vocab = build_vocab(&[vec!["x", "y", "y", "z", "z", "z"]], 1);
            let e = WordEmbeddings::new(2, data).unwrap();
            let (back, v) = read_embeddings(&write_embeddings(&e, &vocab).unwrap(), "m").unwrap();
            prop_assert_eq!(v.tokens(), vocab.tokens());
            let a: Vec<u32> = e.data().iter().map(|x| x.to_bits()).collect();
            let b: Vec<u32> = back.data().iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
