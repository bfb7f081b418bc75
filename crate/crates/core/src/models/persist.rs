use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::format::{NamedTensor, TensorFile};
use crate::neural::{Cnn, Tensor};

use super::cnn::{CnnConfig, CnnModel};
use super::logreg::{LogRConfig, LogRModel};

const META_PREFIX: &str = "meta.";

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Model {
    Cnn(CnnModel),
    LogR(LogRModel),
}

impl Model {
    pub fn n_classes(&self) -> usize {
        match self {
            Model::Cnn(m) => m.config.arch.n_classes,
            Model::LogR(m) => m.config.n_classes,
        }
    }

    /// Serialises the model. `meta` entries are stored under a `meta.`
    /// prefix next to the config snapshot.
    pub fn to_tensor_file(&self, meta: &BTreeMap<String, String>) -> Result<TensorFile> {
        let mut f = TensorFile::default();
        match self {
            Model::Cnn(m) => {
                f.set("kind", "cnn");
                m.config.write_to(&mut f);
                for (name, t) in m.net.param_names().into_iter().zip(m.net.params()) {
                    f.tensors.push(NamedTensor::new(name, t.shape().to_vec(), t.data().to_vec())?);
                }
            }
            Model::LogR(m) => {
                f.set("kind", "logreg");
                m.config.write_to(&mut f);
                let c = m.config.n_classes;
                f.tensors.push(NamedTensor::new("weights", vec![c, m.config.n_features], m.weights.clone())?);
                f.tensors.push(NamedTensor::new("bias", vec![c], m.bias.clone())?);
            }
        }
        for (k, v) in meta {
            f.set(format!("{META_PREFIX}{k}"), v);
        }
        Ok(f)
    }

    pub fn from_tensor_file(f: &TensorFile) -> Result<(Model, BTreeMap<String, String>)> {
        let model = match f.get("kind")? {
            "cnn" => {
                let config = CnnConfig::read_from(f)?;
                let template = Cnn::<f32>::from_params(config.arch, zero_params(&config)?)?;
                let params = template
                    .param_names()
                    .iter()
                    .map(|name| {
                        let t = f.tensor(name)?;
                        Tensor::new(t.dims.clone(), t.values.clone())
                    })
                    .collect::<Result<Vec<_>>>()?;
                let net = Cnn::from_params(config.arch, params).map_err(|e| Error::Format(e.to_string()))?;
                Model::Cnn(CnnModel { config, net })
            }
            "logreg" => {
                let config = LogRConfig::read_from(f)?;
                let w = f.tensor("weights")?;
                let b = f.tensor("bias")?;
                if w.dims != [config.n_classes, config.n_features] || b.dims != [config.n_classes] {
                    return Err(Error::Format(format!("logreg tensors have dims {:?} and {:?}", w.dims, b.dims)));
                }
                Model::LogR(LogRModel {
                    config,
                    weights: w.values.clone(),
                    bias: b.values.clone(),
                })
            }
            other => return Err(Error::Format(format!("unknown model kind {other:?}"))),
        };
        let meta = f
            .config
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(META_PREFIX).map(|k| (k.to_string(), v.clone())))
            .collect();
        Ok((model, meta))
    }
}

fn zero_params(cfg: &CnnConfig) -> Result<Vec<Tensor<f32>>> {
    let a = &cfg.arch;
    let mut shapes = Vec::new();
    let mut c_in = a.embed_dim;
    for _ in 0..2 * a.conv_pairs {
        shapes.push(vec![a.filters, a.kernel, c_in]);
        shapes.push(vec![a.filters]);
        c_in = a.filters;
    }
    shapes.extend([
        vec![a.fc_dim, a.flatten_dim()],
        vec![a.fc_dim],
        vec![a.n_classes, a.fc_dim],
        vec![a.n_classes],
    ]);
    Ok(shapes.iter().map(|s| Tensor::zeros(s)).collect())
}

pub fn save_model(model: &Model, meta: &BTreeMap<String, String>, path: impl AsRef<Path>) -> Result<()> {
    model.to_tensor_file(meta)?.save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(Model, BTreeMap<String, String>)> {
    Model::from_tensor_file(&TensorFile::load(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{CnnArch, Mode};
    use crate::rng;
    use rand::Rng;

    fn cnn() -> CnnModel {
        let arch = CnnArch {
            max_len: 8,
            embed_dim: 6,
            conv_pairs: 1,
            filters: 4,
            kernel: 3,
            pool: 2,
            dropout_p: 0.5,
            fc_dim: 5,
            n_classes: 3,
        };
        CnnModel::new(CnnConfig { arch, seed: 3, ..CnnConfig::default() }).unwrap()
    }

    fn meta() -> BTreeMap<String, String> {
        BTreeMap::from([("method".to_string(), "cnn".to_string()), ("labels".to_string(), "[\"a\"]".to_string())])
    }

    #[test]
    fn cnn_roundtrip_is_bit_exact() {
        let m = cnn();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&Model::Cnn(m.clone()), &meta(), &path).unwrap();
        let (back, got_meta) = load_model(&path).unwrap();
        assert_eq!(got_meta, meta());
        let Model::Cnn(back) = back else { panic!("wrong kind") };
        let mut r = rng::seeded(1);
        let x = Tensor::from_fn(&[8, 6], |_| r.gen_range(-1.0f32..1.0));
        let a = m.net.forward(&x, Mode::Eval, None).unwrap();
        let b = back.net.forward(&x, Mode::Eval, None).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(back, m);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(Model::Cnn(back).to_tensor_file(&meta()).unwrap().to_bytes().unwrap(), bytes);
    }

    #[test]
    fn logreg_roundtrip_is_bit_exact() {
        let m = LogRModel {
            config: LogRConfig::new(2, 3),
            weights: vec![0.1, -0.2, f32::MIN_POSITIVE, 3.5, -0.0, 1e-30],
            bias: vec![0.5, 0.25, -1.0],
        };
        let f = Model::LogR(m.clone()).to_tensor_file(&BTreeMap::new()).unwrap();
        let (back, meta) = Model::from_tensor_file(&TensorFile::from_bytes(&f.to_bytes().unwrap()).unwrap()).unwrap();
        assert!(meta.is_empty());
        assert_eq!(back, Model::LogR(m));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let f = Model::Cnn(cnn()).to_tensor_file(&meta()).unwrap();
        let mut bytes = f.to_bytes().unwrap();
        bytes[1] = b'X';
        assert!(TensorFile::from_bytes(&bytes).is_err());
        let mut missing = f.clone();
        missing.tensors.pop();
        assert!(Model::from_tensor_file(&missing).is_err());
        let mut reshaped = f;
        reshaped.tensors[0].dims = vec![4, 6, 3];
        assert!(Model::from_tensor_file(&reshaped).is_err());
    }
}
