//! Binary tensor container shared by every persisted model.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"MTCF" | version: u32 | config_len: u64 | config: UTF-8 `key=value\n` lines
//! tensor_count: u64
//! per tensor: name_len: u64 | name bytes | rank: u64 | dims: rank x u64 | values: f32 x prod(dims)
//! ```
//!
//! Config lines are written in key order so equal contents give equal bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MTCF";
pub const FORMAT_VERSION: u32 = 1;

/// Upper bound on any single length field; guards allocations on corrupt input.
const MAX_LEN: u64 = 1 << 34;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let expected: usize = dims.iter().product();
        if expected != values.len() {
            return Err(Error::Shape(format!(
                "tensor {name:?}: dims {dims:?} need {expected} values, got {}",
                values.len()
            )));
        }
        Ok(NamedTensor { name, dims, values })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorFile {
    pub config: BTreeMap<String, String>,
    pub tensors: Vec<NamedTensor>,
}

impl TensorFile {
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.config.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.config
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("missing config key {key:?}")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::Format(format!("config key {key:?} has unparseable value {raw:?}")))
    }

    pub fn tensor(&self, name: &str) -> Result<&NamedTensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Format(format!("missing tensor {name:?}")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let mut block = String::new();
        for (k, v) in &self.config {
            if k.is_empty() || k.contains(['=', '\n']) || v.contains(['\n', '\r']) {
                return Err(Error::Format(format!("config entry {k:?} cannot be encoded")));
            }
            block.push_str(k);
            block.push('=');
            block.push_str(v);
            block.push('\n');
        }
        put_u64(&mut out, block.len() as u64);
        out.extend_from_slice(block.as_bytes());
        put_u64(&mut out, self.tensors.len() as u64);
        for t in &self.tensors {
            put_u64(&mut out, t.name.len() as u64);
            out.extend_from_slice(t.name.as_bytes());
            put_u64(&mut out, t.dims.len() as u64);
            for &d in &t.dims {
                put_u64(&mut out, d as u64);
            }
            for v in &t.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}; not a model file")));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {version} (this build reads {FORMAT_VERSION})"
            )));
        }
        let block_len = r.len_field()?;
        let block = std::str::from_utf8(r.take(block_len)?)
            .map_err(|_| Error::Format("config block is not UTF-8".into()))?;
        let mut config = BTreeMap::new();
        for line in block.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("config line {line:?} lacks '='")))?;
            config.insert(k.to_string(), v.to_string());
        }
        let count = r.len_field()?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name_len = r.len_field()?;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = r.len_field()?;
            let mut dims = Vec::with_capacity(rank.min(16));
            for _ in 0..rank {
                dims.push(r.len_field()?);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| (n as u64) < MAX_LEN)
                .ok_or_else(|| Error::Format(format!("tensor {name:?} dims overflow")))?;
            let raw = r.take(n * 4)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push(NamedTensor { name, dims, values });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes after last tensor", bytes.len() - r.pos)));
        }
        Ok(TensorFile { config, tensors })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let bytes = self.to_bytes()?;
        w.write_all(&bytes)
            .map_err(|e| Error::Format(format!("write failed: {e}")))
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::Format(format!("read failed: {e}")))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated file: needed {n} bytes at offset {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn len_field(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if v > MAX_LEN {
            return Err(Error::Format(format!("length field {v} is implausibly large")));
        }
        Ok(v as usize)
    }
}
