//! Word vectors in the common text format and seeded vectors for unseen words.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Bound of the uniform distribution used for words without a vector.
pub const OOV_INIT_BOUND: f64 = 0.1;

/// Insertion-ordered string vocabulary.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    index: HashMap<String, usize>,
    words: Vec<String>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `word` if absent; returns its index.
    pub fn insert(&mut self, word: &str) -> usize {
        if let Some(&i) = self.index.get(word) {
            return i;
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
        self.words.len() - 1
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Word vectors keyed by form.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub vocab: Vocab,
    /// `V × d`
    pub vectors: Array2<f64>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<ndarray::ArrayView1<'_, f64>> {
        self.vocab.get(word).map(|i| self.vectors.row(i))
    }
}

/// Result of reading an embedding file.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedEmbeddings {
    pub table: EmbeddingTable,
    /// Rows skipped because their word had already been read.
    pub duplicates: usize,
}

fn is_header(fields: &[&str]) -> bool {
    fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok())
}

/// Parses `word v1 … vd` lines with an optional `V d` header line.
///
/// The dimension comes from `expected_dim`, else the header, else the first
/// row. Repeated words keep their first vector.
pub fn load_embeddings(text: &str, expected_dim: Option<usize>) -> Result<LoadedEmbeddings> {
    let mut dim = expected_dim;
    let mut vocab = Vocab::new();
    let mut values: Vec<f64> = Vec::new();
    let mut duplicates = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if idx == 0 && is_header(&fields) {
            let header_dim: usize = fields[1].parse().expect("checked");
            match dim {
                Some(d) if d != header_dim => {
                    return Err(Error::format(
                        line_no,
                        format!("header declares dimension {header_dim}, expected {d}"),
                    ))
                }
                _ => dim = Some(header_dim),
            }
            continue;
        }
        let d = *dim.get_or_insert(fields.len() - 1);
        if d == 0 {
            return Err(Error::format(line_no, "embedding rows need at least one component"));
        }
        if fields.len() - 1 != d {
            return Err(Error::format(
                line_no,
                format!("row has {} components, expected {d}", fields.len() - 1),
            ));
        }
        let mut row = Vec::with_capacity(d);
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::format(line_no, format!("non-numeric component `{f}`")))?;
            if !v.is_finite() {
                return Err(Error::format(line_no, format!("non-finite component `{f}`")));
            }
            row.push(v);
        }
        if vocab.get(fields[0]).is_some() {
            duplicates += 1;
            continue;
        }
        vocab.insert(fields[0]);
        values.extend(row);
    }
    let d = dim.unwrap_or(0);
    let vectors = Array2::from_shape_vec((vocab.len(), d), values).expect("rows have equal length");
    Ok(LoadedEmbeddings {
        table: EmbeddingTable { vocab, vectors },
        duplicates,
    })
}

/// Writes the table in the text format with a `V d` header.
pub fn write_embeddings(table: &EmbeddingTable) -> String {
    let mut out = format!("{} {}\n", table.len(), table.dim());
    for (word, row) in table.vocab.words().iter().zip(table.vectors.rows()) {
        out.push_str(word);
        for v in row {
            out.push(' ');
            out.push_str(&format!("{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Deterministic vector for a word without an embedding: uniform in
/// `±OOV_INIT_BOUND`, seeded by `seed` and the word's bytes.
pub fn oov_vector(seed: u64, word: &str, dim: usize) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(word.as_bytes()));
    Array1::from_shape_simple_fn(dim, || rng.gen_range(-OOV_INIT_BOUND..=OOV_INIT_BOUND))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn with_header() {
        let e = load_embeddings("2 3\na 1 0 0\nb 0 1 0\n", None).unwrap();
        assert_eq!(e.table.len(), 2);
        assert_eq!(e.table.dim(), 3);
        assert_eq!(e.table.get("b").unwrap().to_vec(), [0.0, 1.0, 0.0]);
        assert_eq!(e.duplicates, 0);
    }

    #[test]
    fn without_header() {
        let e = load_embeddings("a 0.5 -1\nb 2 3\n", None).unwrap();
        assert_eq!((e.table.len(), e.table.dim()), (2, 2));
    }

    #[test]
    fn duplicates_keep_first() {
        let mut text = String::from("100 2\n");
        for i in 0..97 {
            text.push_str(&format!("w{i} {i} 1\n"));
        }
        for i in [3, 50, 96] {
            text.push_str(&format!("w{i} -1 -1\n"));
        }
        let e = load_embeddings(&text, Some(2)).unwrap();
        assert_eq!(e.table.len(), 97);
        assert_eq!(e.duplicates, 3);
        assert_eq!(e.table.get("w50").unwrap().to_vec(), [50.0, 1.0]);
    }

    #[test]
    fn dimension_errors() {
        let err = load_embeddings("a 1 2\nb 1 2 3\n", None).unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }));
        let err = load_embeddings("a 1 x\n", None).unwrap_err();
        assert!(matches!(err, Error::Format { line: 1, .. }));
        assert!(load_embeddings("a 1 2\n", Some(3)).is_err());
        assert!(load_embeddings("2 3\na 1 2 3\n", Some(4)).is_err());
    }

    #[test]
    fn round_trip() {
        let e = load_embeddings("x 0.1 0.2\ny -3 4e-5\n", None).unwrap();
        let again = load_embeddings(&write_embeddings(&e.table), None).unwrap();
        assert_eq!(again.table, e.table);
    }

    #[test]
    fn oov_vectors_are_reproducible() {
        let a = oov_vector(7, "ಮನೆ", 5);
        assert_eq!(a, oov_vector(7, "ಮನೆ", 5));
        assert_ne!(a, oov_vector(8, "ಮನೆ", 5));
        assert_ne!(a, oov_vector(7, "ಮರ", 5));
        assert!(a.iter().all(|v| v.abs() <= OOV_INIT_BOUND));
    }
}
