use std::fs;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};

/// Pretrained word vectors, all of the same dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: IndexMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }
}

/// Loads a text embedding file, optionally keeping only the first
/// `truncate_to` components of every vector.
pub fn load_embeddings(path: impl AsRef<Path>, truncate_to: Option<usize>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text, truncate_to)
}

/// Parses `word v1 v2 ... vd` lines with an optional `count dim` header.
pub fn parse_embeddings(text: &str, truncate_to: Option<usize>) -> Result<EmbeddingTable> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    let mut header: Option<(usize, usize)> = None;
    if let Some((_, first)) = lines.peek() {
        let fields: Vec<&str> = first.split_whitespace().collect();
        if let [count, dim] = fields.as_slice() {
            if let (Ok(count), Ok(dim)) = (count.parse::<usize>(), dim.parse::<usize>()) {
                header = Some((count, dim));
                lines.next();
            }
        }
    }

    let mut dim = header.map(|(_, d)| d);
    let mut vectors = IndexMap::new();
    for (idx, line) in lines {
        let mut fields = line.split_whitespace();
        let word = fields.next().unwrap_or_default();
        let values = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::Format(format!("line {}: `{f}` is not a number", idx + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::Format(format!(
                    "line {}: vector for `{word}` has {} components, expected {d}",
                    idx + 1,
                    values.len()
                )))
            }
            _ => {}
        }
        if values.is_empty() {
            return Err(Error::Format(format!("line {}: `{word}` has no vector", idx + 1)));
        }
        vectors.entry(word.to_string()).or_insert(values);
    }

    if let Some((count, _)) = header {
        if count != vectors.len() {
            return Err(Error::Format(format!(
                "header announces {count} vectors but the file has {}",
                vectors.len()
            )));
        }
    }

    let source_dim = dim.unwrap_or(0);
    let dim = match truncate_to {
        Some(0) => return Err(Error::Config("cannot truncate embeddings to 0 dimensions".into())),
        Some(t) if t > source_dim => {
            return Err(Error::Config(format!(
                "cannot truncate {source_dim}-dimensional embeddings to {t} dimensions"
            )))
        }
        Some(t) => {
            for v in vectors.values_mut() {
                v.truncate(t);
            }
            t
        }
        None => source_dim,
    };
    Ok(EmbeddingTable { dim, vectors })
}
