//! `ZSNN` checkpoint container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      4 bytes   "ZSNN"
//! version    u16       1
//! meta_len   u32       length of the metadata block
//! meta       bytes     UTF-8 JSON (feature config, hyperparameters, ...)
//! count      u32       number of tensors
//! count × {
//!   name_len u16
//!   name     bytes     UTF-8, dotted path such as "projection.layer1.weight"
//!   ndim     u8
//!   dims     u32 × ndim
//!   data     f64 × prod(dims), row-major
//! }
//! ```

use std::path::Path;

use super::Params;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ZSNN";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: String,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(meta: String) -> Self {
        Checkpoint {
            meta,
            tensors: Vec::new(),
        }
    }

    /// Appends every tensor of `params`, names prefixed with `prefix`.
    pub fn push_params(&mut self, prefix: &str, params: &impl Params) {
        for ((name, shape), data) in params.shapes().into_iter().zip(params.slices()) {
            self.tensors.push(Tensor {
                name: format!("{prefix}.{name}"),
                shape,
                data: data.to_vec(),
            });
        }
    }

    /// Copies the tensors named `prefix.*` into `params`, checking names and
    /// shapes.
    pub fn load_params(&self, prefix: &str, params: &mut impl Params) -> Result<()> {
        let shapes = params.shapes();
        let mut slices = params.slices_mut();
        for ((name, shape), dst) in shapes.iter().zip(slices.iter_mut()) {
            let full = format!("{prefix}.{name}");
            let t = self
                .tensors
                .iter()
                .find(|t| t.name == full)
                .ok_or_else(|| Error::invalid(format!("checkpoint has no tensor {full}")))?;
            if &t.shape != shape {
                return Err(Error::invalid(format!(
                    "tensor {full} has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
            dst.copy_from_slice(&t.data);
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        out.extend_from_slice(self.meta.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.shape.len() as u8);
            for d in &t.shape {
                out.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != MAGIC {
            return Err(Error::format(path, "bad magic (expected ZSNN)"));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
        }
        let meta_len = r.u32()? as usize;
        let meta = String::from_utf8(r.take(meta_len)?.to_vec())
            .map_err(|_| Error::format(path, "metadata is not UTF-8"))?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::format(path, "tensor name is not UTF-8"))?;
            let ndim = r.take(1)?[0] as usize;
            let shape = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            tensors.push(Tensor { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::format(
                path,
                format!("{} trailing bytes after offset {}", bytes.len() - r.pos, r.pos),
            ));
        }
        Ok(Checkpoint { meta, tensors })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

pub(crate) struct Reader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
    pub path: &'a Path,
}

impl<'a> Reader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(
                self.path,
                format!(
                    "truncated at byte offset {} (needed {n} more bytes, {} available)",
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            )
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Activation, DenseLayer};
    use rand::SeedableRng;

    #[test]
    fn round_trip_and_truncation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let layer = DenseLayer::new(3, 2, Activation::Relu, &mut rng);
        let mut ck = Checkpoint::new(r#"{"k":1}"#.into());
        ck.push_params("l", &layer);
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..4], b"ZSNN");
        let back = Checkpoint::from_bytes(&bytes, Path::new("x")).unwrap();
        assert_eq!(back, ck);
        let mut fresh = layer.zeros_like();
        back.load_params("l", &mut fresh).unwrap();
        assert_eq!(fresh, layer);

        let err = Checkpoint::from_bytes(&bytes[..bytes.len() - 3], Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("offset"));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad, Path::new("x")).is_err());
        let mut wrong = DenseLayer::zeros(4, 2, Activation::Relu);
        assert!(back.load_params("l", &mut wrong).is_err());
    }
}
