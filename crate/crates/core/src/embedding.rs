//! Node embedding matrices and their text format.
//!
//! The text format is `N dim` on the first line followed by one row per
//! node: `TYPE:name v1 … v_dim`, with spaces and `%` in labels escaped.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hetgraph::{decode_token, encode_token};

/// Map from node label (`TYPE:name`) to a dense `dim`-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    labels: Vec<String>,
    dim: usize,
    values: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(labels: Vec<String>, dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "embedding dimension must be positive".into(),
            ));
        }
        if values.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value in row {}",
                labels[i / dim]
            )));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate embedding label {l}"
                )));
            }
        }
        Ok(EmbeddingMatrix {
            labels,
            dim,
            values,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, label: &str) -> Option<&[f32]> {
        self.index.get(label).map(|&i| self.row(i))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Keep only rows whose label satisfies `keep`, preserving order.
    pub fn filter(&self, keep: impl Fn(&str) -> bool) -> EmbeddingMatrix {
        let mut labels = Vec::new();
        let mut values = Vec::new();
        for (i, l) in self.labels.iter().enumerate() {
            if keep(l) {
                labels.push(l.clone());
                values.extend_from_slice(self.row(i));
            }
        }
        EmbeddingMatrix::new(labels, self.dim, values).expect("subset of a valid matrix")
    }

    /// Rows whose label carries the given `TYPE:` prefix.
    pub fn of_type(&self, node_type: &str) -> EmbeddingMatrix {
        let prefix = format!("{node_type}:");
        self.filter(|l| l.starts_with(&prefix))
    }

    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.labels.len(), self.dim)?;
        let mut line = String::new();
        for (i, l) in self.labels.iter().enumerate() {
            line.clear();
            line.push_str(&encode_token(l));
            for v in self.row(i) {
                line.push(' ');
                // Display for f32 prints the shortest string that parses back exactly.
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing `N dim` header".into()))?;
        let header = header.map_err(|e| parse_err(1, e.to_string()))?;
        let mut it = header.split_whitespace().map(str::parse::<usize>);
        let (n, dim) = match (it.next(), it.next(), it.next()) {
            (Some(Ok(n)), Some(Ok(d)), None) => (n, d),
            _ => return Err(parse_err(1, format!("bad header {header:?}"))),
        };
        let mut labels = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n * dim);
        for (i, line) in lines {
            let line = line.map_err(|e| parse_err(i + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let label = decode_token(fields.next().expect("non-empty line"));
            let before = values.len();
            for f in fields {
                values.push(
                    f.parse::<f32>()
                        .map_err(|_| parse_err(i + 1, format!("bad number {f:?}")))?,
                );
            }
            if values.len() - before != dim {
                return Err(parse_err(
                    i + 1,
                    format!("expected {dim} values, got {}", values.len() - before),
                ));
            }
            labels.push(label);
        }
        if labels.len() != n {
            return Err(parse_err(
                1,
                format!("header promises {n} rows, found {}", labels.len()),
            ));
        }
        EmbeddingMatrix::new(labels, dim, values)
    }

    pub fn content_hash(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("write to Vec");
        hex::encode(Sha256::digest(&buf))
    }
}

/// Concatenate per-node vectors in list order. All inputs must cover the
/// same node set; the output follows the row order of the first matrix.
pub fn concat_embeddings(matrices: &[&EmbeddingMatrix]) -> Result<EmbeddingMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::InvalidInput("nothing to concatenate".into()))?;
    let reference: BTreeSet<&str> = first.labels().iter().map(String::as_str).collect();
    let mut offending = BTreeSet::new();
    for m in &matrices[1..] {
        let other: BTreeSet<&str> = m.labels().iter().map(String::as_str).collect();
        offending.extend(
            reference
                .symmetric_difference(&other)
                .map(|s| s.to_string()),
        );
    }
    if !offending.is_empty() {
        return Err(Error::NodeSetMismatch(offending.into_iter().collect()));
    }
    let dim: usize = matrices.iter().map(|m| m.dim()).sum();
    let mut values = Vec::with_capacity(first.len() * dim);
    for label in first.labels() {
        for m in matrices {
            values.extend_from_slice(m.get(label).expect("node sets checked"));
        }
    }
    EmbeddingMatrix::new(first.labels().to_vec(), dim, values)
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(labels: &[&str], dim: usize, values: &[f32]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(
            labels.iter().map(|s| s.to_string()).collect(),
            dim,
            values.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn concat_cases() {
        let a = m(&["A:x", "A:y"], 2, &[1., 2., 3., 4.]);
        let b = m(&["A:y", "A:x"], 1, &[9., 8.]);
        let c = concat_embeddings(&[&a, &b]).unwrap();
        assert_eq!(c.dim(), 3);
        assert_eq!(c.get("A:x").unwrap(), &[1., 2., 8.]);
        assert_eq!(c.get("A:y").unwrap(), &[3., 4., 9.]);
        assert_eq!(concat_embeddings(&[&a]).unwrap(), a);
        let d = m(&["A:z"], 1, &[0.]);
        match concat_embeddings(&[&a, &d]) {
            Err(Error::NodeSetMismatch(nodes)) => assert_eq!(nodes, ["A:x", "A:y", "A:z"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(EmbeddingMatrix::new(vec!["A:x".into()], 2, vec![1.0]).is_err());
        assert!(EmbeddingMatrix::new(vec!["A:x".into()], 1, vec![f32::NAN]).is_err());
        assert!(EmbeddingMatrix::read_text("2 1\nA:x 1\n".as_bytes()).is_err());
        assert!(EmbeddingMatrix::read_text("1 2\nA:x 1\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn text_format_round_trips(rows in prop::collection::vec(prop::collection::vec(-1e6f32..1e6, 3), 1..8)) {
            let labels: Vec<String> = (0..rows.len()).map(|i| format!("A:name {i}%")).collect();
            let e = EmbeddingMatrix::new(labels, 3, rows.concat()).unwrap();
            let mut buf = Vec::new();
            e.write_text(&mut buf).unwrap();
            prop_assert_eq!(EmbeddingMatrix::read_text(buf.as_slice()).unwrap(), e);
        }

        #[test]
        fn concat_preserves_blocks(rows in prop::collection::vec(prop::collection::vec(-10f32..10., 5), 1..6)) {
            let labels: Vec<String> = (0..rows.len()).map(|i| format!("A:{i}")).collect();
            let left = EmbeddingMatrix::new(labels.clone(), 2, rows.iter().flat_map(|r| r[..2].to_vec()).collect()).unwrap();
            let right = EmbeddingMatrix::new(labels.clone(), 3, rows.iter().flat_map(|r| r[2..].to_vec()).collect()).unwrap();
            let c = concat_embeddings(&[&left, &right]).unwrap();
            for (i, l) in labels.iter().enumerate() {
                prop_assert_eq!(&c.get(l).unwrap()[..2], left.row(i));
                prop_assert_eq!(&c.get(l).unwrap()[2..], right.row(i));
            }
        }
    }
}
