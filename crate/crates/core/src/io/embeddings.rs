//! Tab-separated class embeddings: `label \t v1 \t v2 ...`, one class per line.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ClassEmbedding, EmbeddingSet};

pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    let mut dim = None;
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let label = fields.next().unwrap_or_default().trim().to_string();
        if label.is_empty() {
            return Err(Error::format(path, format!("line {line_no}: empty label")));
        }
        let vector = fields
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::format(path, format!("line {line_no}: bad number {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(Error::format(
                    path,
                    format!("line {line_no}: {} values, expected {d}", vector.len()),
                ));
            }
            _ => {}
        }
        entries.push(ClassEmbedding { label, vector });
    }
    EmbeddingSet::new(entries).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_embeddings(path: &Path, set: &EmbeddingSet) -> Result<()> {
    let mut out = String::new();
    for e in set.entries() {
        out.push_str(&e.label);
        for v in &e.vector {
            write!(out, "\t{v}").expect("string write");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsv");
        let set = EmbeddingSet::new(vec![
            ClassEmbedding {
                label: "hello".into(),
                vector: vec![0.1, -1.0 / 3.0, 1e-300],
            },
            ClassEmbedding {
                label: "thank you".into(),
                vector: vec![2.0, 0.0, -7.25],
            },
        ])
        .unwrap();
        save_embeddings(&p, &set).unwrap();
        assert_eq!(load_embeddings(&p).unwrap(), set);
    }

    #[test]
    fn ragged_rows_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsv");
        std::fs::write(&p, "a\t1\t2\nb\t1\n").unwrap();
        assert!(load_embeddings(&p).unwrap_err().to_string().contains("line 2"));
        std::fs::write(&p, "a\t0\t0\n").unwrap();
        assert!(load_embeddings(&p).is_err());
    }
}
