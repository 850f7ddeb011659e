//! Dense little tensors and the named parameter store.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Dense row-major tensor of `f64` values. Rank 0 is a scalar.
///
/// Values are immutable once built; clones share storage.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Arc<Vec<f64>>,
}

impl Tensor {
    /// Builds a tensor, checking the element count and that all values are
    /// finite. Panics on violation: constructing a non-finite tensor is a
    /// caller bug, not a recoverable error.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match {} values",
            data.len()
        );
        assert!(
            data.iter().all(|v| v.is_finite()),
            "tensor values must be finite"
        );
        Tensor {
            shape,
            data: Arc::new(data),
        }
    }

    /// Internal constructor for op outputs; skips the finiteness scan so a
    /// numerical overflow propagates to the loss value, where training
    /// reports it as a recoverable error.
    pub(crate) fn from_raw(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            shape,
            data: Arc::new(data),
        }
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor::from_raw(vec![], vec![value])
    }

    pub fn vector(values: Vec<f64>) -> Tensor {
        let n = values.len();
        Tensor::new(vec![n], values)
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Tensor {
        Tensor::new(vec![rows, cols], values)
    }

    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_raw(shape, vec![0.0; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    pub fn as_scalar(&self) -> f64 {
        assert!(self.is_scalar(), "not a scalar: shape {:?}", self.shape);
        self.data[0]
    }

    /// Number of rows of a rank-2 tensor, or the length of a rank-1 tensor.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            1 | 2 => self.shape[0],
            r => panic!("rows() on rank-{r} tensor"),
        }
    }

    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "cols() on non-matrix");
        self.shape[1]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    /// Elementwise sum; shapes must match.
    pub fn add(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.shape, other.shape, "shape mismatch in add");
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        Tensor::from_raw(self.shape.clone(), data)
    }

    /// Copy of this tensor with one value replaced (used by finite
    /// differences).
    pub fn with_value(&self, index: usize, value: f64) -> Tensor {
        let mut data = self.data.as_ref().clone();
        data[index] = value;
        Tensor::from_raw(self.shape.clone(), data)
    }
}

/// Draws a tensor from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub fn init_uniform(shape: Vec<usize>, fan_in: usize, rng: &mut impl Rng) -> Tensor {
    assert!(fan_in > 0, "fan_in must be positive");
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(shape, data)
}

const PARAM_MAGIC: &[u8; 4] = b"CVPM";
const PARAM_VERSION: u32 = 1;

/// Named map from parameter path to tensor.
///
/// Paths are unique and shapes stay stable across training steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterMap {
    entries: BTreeMap<String, Tensor>,
}

impl ParameterMap {
    pub fn new() -> ParameterMap {
        ParameterMap::default()
    }

    pub fn insert(&mut self, path: impl Into<String>, tensor: Tensor) {
        let path = path.into();
        let prior = self.entries.insert(path.clone(), tensor);
        assert!(prior.is_none(), "duplicate parameter path {path}");
    }

    pub fn get(&self, path: &str) -> &Tensor {
        self.entries
            .get(path)
            .unwrap_or_else(|| panic!("missing parameter {path}"))
    }

    /// Replaces a parameter value; the shape must not change.
    pub fn set(&mut self, path: &str, tensor: Tensor) {
        let slot = self
            .entries
            .get_mut(path)
            .unwrap_or_else(|| panic!("missing parameter {path}"));
        assert_eq!(slot.shape(), tensor.shape(), "shape change for {path}");
        *slot = tensor;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.entries.iter()
    }

    pub fn paths(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serializes as `CVPM`, a version word, and per entry the path, the
    /// shape, and the values as little-endian `f64`. Round-trips
    /// bit-identically.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(PARAM_MAGIC)?;
        w.write_all(&PARAM_VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (path, tensor) in &self.entries {
            let bytes = path.as_bytes();
            w.write_all(&(bytes.len() as u32).to_le_bytes())?;
            w.write_all(bytes)?;
            w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
            for &dim in tensor.shape() {
                w.write_all(&(dim as u32).to_le_bytes())?;
            }
            for &v in tensor.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<ParameterMap> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != PARAM_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = read_u32(r)?;
        if version != PARAM_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported parameter format version {version}"
            )));
        }
        let count = read_u32(r)? as usize;
        let mut map = ParameterMap::new();
        for _ in 0..count {
            let path_len = read_u32(r)? as usize;
            let mut path_bytes = vec![0u8; path_len];
            r.read_exact(&mut path_bytes)
                .map_err(|_| bad("truncated path"))?;
            let path =
                String::from_utf8(path_bytes).map_err(|_| bad("parameter path not utf-8"))?;
            let rank = read_u32(r)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u32(r)? as usize);
            }
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            let mut buf = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut buf).map_err(|_| bad("truncated values"))?;
                data.push(f64::from_le_bytes(buf));
            }
            if map.entries.contains_key(&path) {
                return Err(Error::Checkpoint(format!("duplicate parameter {path}")));
            }
            map.entries.insert(path, Tensor::from_raw(shape, data));
        }
        Ok(map)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Checkpoint("truncated integer".to_string()))?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    #[should_panic(expected = "finite")]
    fn rejects_non_finite() {
        Tensor::new(vec![2], vec![1.0, f64::NAN]);
    }

    #[test]
    #[should_panic(expected = "does not match")]
    fn rejects_shape_mismatch() {
        Tensor::new(vec![3], vec![1.0]);
    }

    #[test]
    fn init_uniform_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = init_uniform(vec![10, 16], 16, &mut rng);
        let bound = 1.0 / 4.0;
        assert!(t.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn parameter_map_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut map = ParameterMap::new();
        map.insert("a.w", init_uniform(vec![3, 4], 4, &mut rng));
        map.insert("a.b", init_uniform(vec![3], 4, &mut rng));
        map.insert("scalarish", Tensor::scalar(0.25));
        let mut bytes = Vec::new();
        map.write_to(&mut bytes).unwrap();
        let loaded = ParameterMap::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(map.len(), loaded.len());
        for (path, tensor) in map.iter() {
            let other = loaded.get(path);
            assert_eq!(tensor.shape(), other.shape());
            for (a, b) in tensor.data().iter().zip(other.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn parameter_map_rejects_unknown_version() {
        let mut map = ParameterMap::new();
        map.insert("x", Tensor::scalar(1.0));
        let mut bytes = Vec::new();
        map.write_to(&mut bytes).unwrap();
        bytes[4] = 99;
        assert!(ParameterMap::read_from(&mut bytes.as_slice()).is_err());
    }

    #[test]
    #[should_panic(expected = "duplicate parameter path")]
    fn parameter_map_rejects_duplicate_path() {
        let mut map = ParameterMap::new();
        map.insert("x", Tensor::scalar(1.0));
        map.insert("x", Tensor::scalar(2.0));
    }
}
