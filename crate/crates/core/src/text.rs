//! Tokenization, word-embedding tables and word-list files.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{fnv1a, Rng, Tensor};

/// Lowercases and splits on anything that is not a letter, digit or an
/// apostrophe between two letters/digits. Punctuation is dropped.
///
/// ```
/// use affect_core::text::tokenize;
/// assert_eq!(tokenize("Don't stop, PENNY!"), vec!["don't", "stop", "penny"]);
/// ```
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let is_word = c.is_alphanumeric();
        let inner_apostrophe = (c == '\'' || c == '\u{2019}')
            && !cur.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if is_word {
            cur.extend(c.to_lowercase());
        } else if inner_apostrophe {
            cur.push('\'');
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// What an embedding lookup returns for a token not in the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OovPolicy {
    Zero,
    /// Uniform in `±0.25`, seeded by the FNV-1a hash of the token, so the
    /// same token always gets the same vector.
    HashSeeded,
}

pub const OOV_SCALE: f64 = 0.25;

pub fn hashed_vector(token: &str, dim: usize) -> Vec<f64> {
    let mut rng = Rng::new(fnv1a(token.as_bytes()));
    (0..dim).map(|_| rng.uniform_range(-OOV_SCALE, OOV_SCALE)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    dim: usize,
    pub oov: OovPolicy,
}

impl EmbeddingTable {
    pub fn new(dim: usize, oov: OovPolicy) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        Ok(EmbeddingTable { tokens: Vec::new(), index: HashMap::new(), vectors: Vec::new(), dim, oov })
    }

    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::dim("embedding row", &[self.dim], &[vector.len()]));
        }
        if self.index.contains_key(token) {
            return Err(Error::config(format!("duplicate embedding token {token:?}")));
        }
        self.index.insert(token.to_string(), self.tokens.len());
        self.tokens.push(token.to_string());
        self.vectors.extend_from_slice(vector);
        Ok(())
    }

    /// Parses `token v1 ... vd` lines. Blank lines are skipped; every row
    /// must have the dimension of the first.
    pub fn parse(text: &str, oov: OovPolicy) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values = parts
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line: line_no, msg: format!("bad embedding value: {e}") })?;
            if values.is_empty() {
                return Err(Error::Parse { line: line_no, msg: format!("token {token:?} has no values") });
            }
            let t = match &mut table {
                Some(t) => t,
                None => table.insert(EmbeddingTable::new(values.len(), oov)?),
            };
            if values.len() != t.dim {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {} values, found {}", t.dim, values.len()),
                });
            }
            if t.index.contains_key(token) {
                return Err(Error::Parse { line: line_no, msg: format!("duplicate token {token:?}") });
            }
            t.insert(token, &values)?;
        }
        table.ok_or(Error::EmptyInput("embedding file has no rows"))
    }

    pub fn load(path: impl AsRef<Path>, oov: OovPolicy) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::path(path, e))?;
        Self::parse(&text, oov)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            s.push_str(t);
            for v in self.row(i) {
                s.push(' ');
                s.push_str(&v.to_string());
            }
            s.push('\n');
        }
        s
    }

    /// Random table over `vocab`, entries uniform in `±scale`.
    pub fn random(vocab: &[&str], dim: usize, scale: f64, rng: &mut Rng) -> Result<Self> {
        let mut t = EmbeddingTable::new(dim, OovPolicy::HashSeeded)?;
        for w in vocab {
            let v: Vec<f64> = (0..dim).map(|_| rng.uniform_range(-scale, scale)).collect();
            t.insert(w, &v)?;
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.vectors[id * self.dim..(id + 1) * self.dim]
    }

    pub fn lookup(&self, token: &str) -> Vec<f64> {
        match self.id(token) {
            Some(i) => self.row(i).to_vec(),
            None => match self.oov {
                OovPolicy::Zero => vec![0.0; self.dim],
                OovPolicy::HashSeeded => hashed_vector(token, self.dim),
            },
        }
    }

    /// One row per token, then zero rows up to `min_rows`.
    pub fn embed_sentence(&self, tokens: &[String], min_rows: usize) -> Result<Tensor> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("empty sentence"));
        }
        let rows = tokens.len().max(min_rows);
        let mut data = Vec::with_capacity(rows * self.dim);
        for t in tokens {
            data.extend(self.lookup(t));
        }
        data.resize(rows * self.dim, 0.0);
        Tensor::matrix(rows, self.dim, data)
    }
}

/// Reads a one-term-per-line word list. Terms are lowercased; blank lines
/// and lines starting with `#` are ignored.
pub fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_lowercase())
        .collect()
}

pub fn load_word_list(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::path(path, e))?;
    Ok(parse_word_list(&text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Hello, WORLD!!"), vec!["hello", "world"]);
        assert_eq!(tokenize("it's 72.1 percent"), vec!["it's", "72", "1", "percent"]);
        assert_eq!(tokenize("'quoted' rock'n'roll"), vec!["quoted", "rock'n'roll"]);
        assert!(tokenize("  ... ").is_empty());
    }

    #[test]
    fn parse_and_lookup() {
        let t = EmbeddingTable::parse("good 1 2\nbad -1 -2\n\n", OovPolicy::Zero).unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.lookup("bad"), vec![-1.0, -2.0]);
        assert_eq!(t.lookup("meh"), vec![0.0, 0.0]);
        let again = EmbeddingTable::parse(&t.to_text(), OovPolicy::Zero).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn duplicates_and_ragged_rows_fail() {
        assert!(matches!(EmbeddingTable::parse("a 1\na 2\n", OovPolicy::Zero), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(EmbeddingTable::parse("a 1 2\nb 2\n", OovPolicy::Zero), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(EmbeddingTable::parse("a x\n", OovPolicy::Zero), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn oov_vectors_replay() {
        let t = EmbeddingTable::parse("a 1 2 3\n", OovPolicy::HashSeeded).unwrap();
        let v = t.lookup("zebra");
        assert_eq!(v, t.lookup("zebra"));
        assert_ne!(v, t.lookup("zebras"));
        assert!(v.iter().all(|x| x.abs() <= OOV_SCALE));
    }

    #[test]
    fn sentence_padding() {
        let t = EmbeddingTable::parse("a 1\nb 2\n", OovPolicy::Zero).unwrap();
        let m = t.embed_sentence(&["a".into(), "b".into()], 5).unwrap();
        assert_eq!(m.shape(), &[5, 1]);
        assert_eq!(m.data(), &[1.0, 2.0, 0.0, 0.0, 0.0]);
        assert!(matches!(t.embed_sentence(&[], 5), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn word_lists() {
        let w = parse_word_list("# comment\nGood\n\n great \n");
        assert_eq!(w.len(), 2);
        assert!(w.contains("good") && w.contains("great"));
    }
}
