//! Named parameter storage with seeded initialization and a safetensors
//! container carrying one JSON metadata record.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Device, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{de::DeserializeOwned, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ModelError, Result};

const METADATA_KEY: &str = "glyphtag";

/// Trainable tensors by dotted name. Lookups of an existing name return the
/// stored tensor, so a model built over a loaded store reuses its weights.
pub struct ParamStore {
    vars: BTreeMap<String, Var>,
    dtype: DType,
    device: Device,
    rng: ChaCha8Rng,
}

impl ParamStore {
    pub fn new(dtype: DType, seed: u64) -> Self {
        ParamStore {
            vars: BTreeMap::new(),
            dtype,
            device: Device::Cpu,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Restarts the initializer stream, e.g. after loading a checkpoint.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }

    pub fn var(&self, name: &str) -> Result<&Var> {
        self.vars
            .get(name)
            .ok_or_else(|| ModelError::MissingParam(name.to_string()))
    }

    fn existing(&self, name: &str, shape: &[usize]) -> Result<Option<Tensor>> {
        match self.vars.get(name) {
            Some(v) if v.dims() == shape => Ok(Some(v.as_tensor().clone())),
            Some(v) => Err(ModelError::Shape(format!(
                "parameter `{name}` has shape {:?}, expected {shape:?}",
                v.dims()
            ))),
            None => Ok(None),
        }
    }

    fn insert(&mut self, name: &str, shape: &[usize], values: Vec<f64>) -> Result<Tensor> {
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let v = Var::from_tensor(&t)?;
        let out = v.as_tensor().clone();
        self.vars.insert(name.to_string(), v);
        Ok(out)
    }

    /// Parameter drawn from N(mean, std) unless already present.
    pub fn normal(&mut self, name: &str, shape: &[usize], mean: f64, std: f64) -> Result<Tensor> {
        if let Some(t) = self.existing(name, shape)? {
            return Ok(t);
        }
        let n: usize = shape.iter().product();
        let values = if std == 0.0 {
            vec![mean; n]
        } else {
            let dist = Normal::new(mean, std).map_err(|e| ModelError::Config(e.to_string()))?;
            (0..n).map(|_| dist.sample(&mut self.rng)).collect()
        };
        self.insert(name, shape, values)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Tensor> {
        self.normal(name, shape, value, 0.0)
    }

    /// Parameter with explicit initial values unless already present.
    pub fn with_values(&mut self, name: &str, shape: &[usize], values: Vec<f64>) -> Result<Tensor> {
        if let Some(t) = self.existing(name, shape)? {
            return Ok(t);
        }
        self.insert(name, shape, values)
    }

    /// Variables whose name starts with `prefix`, in name order.
    pub fn vars_with_prefix(&self, prefix: &str) -> Vec<Var> {
        self.vars
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v.clone())
            .collect()
    }

    /// SHA-256 over names and raw values of the parameters under `prefix`.
    pub fn fingerprint(&self, prefix: &str) -> Result<String> {
        let mut h = Sha256::new();
        for (name, v) in self.vars.iter().filter(|(k, _)| k.starts_with(prefix)) {
            h.update(name.as_bytes());
            let values = v.as_tensor().flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
            for x in values {
                h.update(x.to_le_bytes());
            }
        }
        Ok(hex::encode(h.finalize()))
    }

    /// Copies every parameter of `other` under `prefix` into this store,
    /// replacing existing entries.
    pub fn absorb(&mut self, other: &ParamStore, prefix: &str) -> Result<()> {
        for (name, v) in other.vars.iter().filter(|(k, _)| k.starts_with(prefix)) {
            let t = v.as_tensor().to_dtype(self.dtype)?.copy()?;
            self.vars.insert(name.clone(), Var::from_tensor(&t)?);
        }
        Ok(())
    }

    /// Serializes all parameters as little-endian f32 plus a metadata record.
    pub fn to_bytes<M: Serialize>(&self, metadata: &M) -> Result<Vec<u8>> {
        let mut raw: Vec<(String, Vec<usize>, Vec<u8>)> = Vec::with_capacity(self.vars.len());
        for (name, v) in &self.vars {
            let values = v.as_tensor().flatten_all()?.to_dtype(DType::F32)?.to_vec1::<f32>()?;
            let bytes = values.iter().flat_map(|x| x.to_le_bytes()).collect();
            raw.push((name.clone(), v.dims().to_vec(), bytes));
        }
        let views = raw
            .iter()
            .map(|(name, shape, bytes)| {
                Ok((
                    name.clone(),
                    safetensors::tensor::TensorView::new(safetensors::Dtype::F32, shape.clone(), bytes)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let meta = HashMap::from([(METADATA_KEY.to_string(), serde_json::to_string(metadata)?)]);
        Ok(safetensors::serialize(views, Some(meta))?)
    }

    pub fn from_bytes<M: DeserializeOwned>(
        bytes: &[u8],
        dtype: DType,
        seed: u64,
        origin: &Path,
    ) -> Result<(Self, M)> {
        let bad = |message: String| ModelError::Checkpoint {
            path: origin.to_path_buf(),
            message,
        };
        let (_, header) = safetensors::SafeTensors::read_metadata(bytes)?;
        let meta_json = header
            .metadata()
            .as_ref()
            .and_then(|m| m.get(METADATA_KEY))
            .ok_or_else(|| bad("no metadata record".into()))?;
        let meta: M = serde_json::from_str(meta_json).map_err(|e| bad(format!("metadata: {e}")))?;
        let st = safetensors::SafeTensors::deserialize(bytes)?;
        let mut store = ParamStore::new(dtype, seed);
        for (name, view) in st.tensors() {
            if view.dtype() != safetensors::Dtype::F32 {
                return Err(bad(format!("tensor `{name}` is {:?}, expected F32", view.dtype())));
            }
            let values: Vec<f64> = view
                .data()
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            store.insert(&name, view.shape(), values)?;
        }
        Ok((store, meta))
    }

    pub fn save<M: Serialize>(&self, path: &Path, metadata: &M) -> Result<()> {
        std::fs::write(path, self.to_bytes(metadata)?).map_err(|e| ModelError::io(path, e))
    }

    pub fn load<M: DeserializeOwned>(path: &Path, dtype: DType, seed: u64) -> Result<(Self, M)> {
        let bytes = std::fs::read(path).map_err(|e| ModelError::io(path, e))?;
        Self::from_bytes(&bytes, dtype, seed, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn existing_names_are_reused() {
        let mut s = ParamStore::new(DType::F32, 1);
        let a = s.normal("w", &[2, 3], 0.0, 1.0).unwrap();
        let b = s.normal("w", &[2, 3], 5.0, 1.0).unwrap();
        assert_eq!(a.to_vec2::<f32>().unwrap(), b.to_vec2::<f32>().unwrap());
        assert!(s.normal("w", &[3, 2], 0.0, 1.0).is_err());
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let draw = |seed| {
            let mut s = ParamStore::new(DType::F32, seed);
            s.normal("w", &[4], 0.0, 1.0).unwrap().to_vec1::<f32>().unwrap()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn bytes_roundtrip_with_metadata() {
        let mut s = ParamStore::new(DType::F32, 2);
        s.normal("a.w", &[3, 2], 0.0, 1.0).unwrap();
        s.constant("a.b", &[3], 0.25).unwrap();
        let bytes = s.to_bytes(&("meta", 7)).unwrap();
        assert_eq!(bytes, s.to_bytes(&("meta", 7)).unwrap());
        let (back, meta): (ParamStore, (String, i32)) =
            ParamStore::from_bytes(&bytes, DType::F32, 0, Path::new("mem")).unwrap();
        assert_eq!(meta, ("meta".to_string(), 7));
        assert_eq!(back.fingerprint("").unwrap(), s.fingerprint("").unwrap());
        assert_eq!(back.vars_with_prefix("a.").len(), 2);
    }
}
