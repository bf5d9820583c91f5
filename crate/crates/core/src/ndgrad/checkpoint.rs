//! Named parameter collections and their binary checkpoint format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "DGRD" | version u32
//! repeated until EOF:
//!   name_len u32 | name bytes (utf-8) | rank u32 | dims u64 * rank | data f64 * prod(dims)
//! ```

use std::fs;
use std::path::Path;

use super::tensor::{numel, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DGRD";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Ordered, named set of tensors. Order is insertion order and is the order
/// written to disk.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<(String, Tensor)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a trainable parameter and returns a handle to it.
    pub fn add(&mut self, name: &str, data: Vec<f64>, shape: &[usize]) -> Tensor {
        assert!(self.get(name).is_none(), "duplicate parameter {name}");
        let t = Tensor::param(data, shape);
        self.entries.push((name.to_string(), t.clone()));
        t
    }

    /// Registers a non-trainable entry (configuration metadata and the like).
    pub fn add_constant(&mut self, name: &str, data: Vec<f64>, shape: &[usize]) -> Tensor {
        assert!(self.get(name).is_none(), "duplicate parameter {name}");
        let t = Tensor::new(data, shape);
        self.entries.push((name.to_string(), t.clone()));
        t
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Trainable tensors in registration order.
    pub fn trainable(&self) -> Vec<Tensor> {
        self.entries
            .iter()
            .filter(|(_, t)| t.requires_grad())
            .map(|(_, t)| t.clone())
            .collect()
    }

    pub fn zero_grad(&self) {
        self.entries.iter().for_each(|(_, t)| t.zero_grad());
    }

    /// Copies values from `other` into this store. Names and shapes must
    /// match exactly.
    pub fn load_from(&self, other: &ParamStore) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, checkpoint has {}",
                self.len(),
                other.len()
            )));
        }
        for (name, t) in &self.entries {
            let src = other.require(name)?;
            if src.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name}: expected shape {:?}, checkpoint has {:?}",
                    t.shape(),
                    src.shape()
                )));
            }
            t.set_data(&src.data());
        }
        Ok(())
    }

    /// Bitwise equality of names, shapes and values.
    pub fn same_values(&self, other: &ParamStore) -> bool {
        self.len() == other.len()
            && self.entries.iter().zip(&other.entries).all(|((na, a), (nb, b))| {
                na == nb
                    && a.shape() == b.shape()
                    && a.data().iter().zip(b.data().iter()).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data().iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a checkpoint. Every entry is loaded as a constant; use
    /// [`ParamStore::load_from`] to copy values into live parameters.
    pub fn from_bytes(bytes: &[u8]) -> Result<ParamStore> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let mut store = ParamStore::new();
        while r.pos < bytes.len() {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Checkpoint("parameter name is not utf-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            if rank > 8 {
                return Err(Error::Checkpoint(format!("{name}: rank {rank} too large")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
            let n = n.filter(|&n| n.checked_mul(8).is_some_and(|b| b <= bytes.len() - r.pos));
            let Some(n) = n else {
                return Err(Error::Checkpoint(format!("{name}: truncated data for shape {shape:?}")));
            };
            debug_assert_eq!(n, numel(&shape));
            let data = r
                .take(n * 8)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if store.get(&name).is_some() {
                return Err(Error::Checkpoint(format!("duplicate parameter {name}")));
            }
            store.add_constant(&name, data, &shape);
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ParamStore> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        ParamStore::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("conv.weight", vec![1.0, -2.5, 3.25, 0.0, 1e-300, -0.0], &[1, 2, 3]);
        s.add("conv.bias", vec![0.125], &[1]);
        s.add_constant("meta.ratio", vec![320.0], &[]);
        s
    }

    #[test]
    fn bytes_round_trip() {
        let s = sample();
        let back = ParamStore::from_bytes(&s.to_bytes()).unwrap();
        assert!(s.same_values(&back));
        assert_eq!(back.get("meta.ratio").unwrap().shape(), &[] as &[usize]);
    }

    #[test]
    fn header_layout() {
        let b = sample().to_bytes();
        assert_eq!(&b[0..4], b"DGRD");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 11);
        assert_eq!(&b[12..23], b"conv.weight");
    }

    #[test]
    fn truncation_and_magic_are_rejected() {
        let b = sample().to_bytes();
        assert!(ParamStore::from_bytes(&b[..b.len() - 3]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(ParamStore::from_bytes(&bad).is_err());
    }

    #[test]
    fn load_from_checks_shapes() {
        let s = sample();
        let mut other = ParamStore::new();
        other.add("conv.weight", vec![0.0; 6], &[2, 3]);
        other.add("conv.bias", vec![0.0], &[1]);
        other.add_constant("meta.ratio", vec![0.0], &[]);
        assert!(other.load_from(&s).is_err());
    }
}
