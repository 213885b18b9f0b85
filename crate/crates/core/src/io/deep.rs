//! `ZSDF` snippet feature files.
//!
//! ```text
//! magic    4 bytes  "ZSDF"
//! version  u16      1
//! dim      u32      snippet vector length
//! count    u32      number of snippets
//! data     f32 × dim × count, little-endian, snippet-major
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::neural::checkpoint::Reader;

pub const DEEP_MAGIC: &[u8; 4] = b"ZSDF";
pub const DEEP_VERSION: u16 = 1;

pub fn write_deep_features(path: &Path, vectors: &[Vec<f32>]) -> Result<()> {
    let dim = vectors.first().map(Vec::len).unwrap_or(0);
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid("snippet vectors differ in dimension"));
    }
    let mut out = Vec::with_capacity(14 + 4 * dim * vectors.len());
    out.extend_from_slice(DEEP_MAGIC);
    out.extend_from_slice(&DEEP_VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(vectors.len() as u32).to_le_bytes());
    for v in vectors.iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Snippets of sample `id`, stored as `<dir>/<id>.zsdf`.
pub fn load_deep_features(dir: &Path, id: &str) -> Result<Vec<Vec<f32>>> {
    read_deep_features(&dir.join(format!("{id}.zsdf")))
}

pub fn read_deep_features(path: &Path) -> Result<Vec<Vec<f32>>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if r.take(4)? != DEEP_MAGIC {
        return Err(Error::format(path, "bad magic (expected ZSDF)"));
    }
    let version = r.u16()?;
    if version != DEEP_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    let count = r.u32()? as usize;
    if count == 0 {
        return Err(Error::format(path, "no snippets"));
    }
    if dim == 0 {
        return Err(Error::format(path, "snippet dimension is zero"));
    }
    let mut out = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let raw = r.take(dim * 4)?;
        let v: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::format(path, format!("snippet {} is not finite", out.len())));
        }
        out.push(v);
    }
    if r.pos != bytes.len() {
        return Err(Error::format(
            path,
            format!("{} trailing bytes after offset {}", bytes.len() - r.pos, r.pos),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_truncation_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.zsdf");
        let v = vec![vec![1.5f32, -2.0, 0.25], vec![0.0, 3.0, 1e-7]];
        write_deep_features(&p, &v).unwrap();
        assert_eq!(read_deep_features(&p).unwrap(), v);

        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 5]).unwrap();
        let err = read_deep_features(&p).unwrap_err().to_string();
        assert!(err.contains("byte offset 26"), "{err}");

        write_deep_features(&p, &[]).unwrap();
        assert!(read_deep_features(&p).unwrap_err().to_string().contains("no snippets"));
    }
}
