//! Pretrained token-embedding tables and their concatenation.
//!
//! The text file format is one entry per line: token, then the vector
//! components, separated by single spaces. A first line of exactly two
//! integers is treated as a `count dim` header (word2vec text convention);
//! otherwise the file is headerless (GloVe convention). Tokens are folded
//! to lowercase at load and queries are folded before lookup; transcripts
//! are lowercase speech, so case never carries signal here.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    name: String,
    dim: usize,
    vocab: HashMap<String, usize>,
    matrix: Matrix,
}

impl EmbeddingTable {
    /// Builds a table from (token, vector) rows; tokens are folded to
    /// lowercase and must be unique after folding.
    pub fn from_rows(name: &str, rows: Vec<(String, Vec<f64>)>) -> Result<EmbeddingTable> {
        if rows.is_empty() {
            return Err(Error::Data(format!("embedding table {} is empty", name)));
        }
        let dim = rows[0].1.len();
        let mut vocab = HashMap::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (idx, (token, vector)) in rows.into_iter().enumerate() {
            let token = token.to_lowercase();
            if vector.len() != dim {
                return Err(Error::Data(format!(
                    "embedding row {} has dim {}, expected {}",
                    token,
                    vector.len(),
                    dim
                )));
            }
            if vocab.insert(token.clone(), idx).is_some() {
                return Err(Error::Data(format!("duplicate token {}", token)));
            }
            data.extend(vector);
        }
        let rows_n = vocab.len();
        Ok(EmbeddingTable {
            name: name.to_string(),
            dim,
            vocab,
            matrix: Matrix::from_vec(rows_n, dim, data)?,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.contains_key(&token.to_lowercase())
    }

    /// Vector for `token` after lowercase folding; None when out of vocab.
    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vocab
            .get(&token.to_lowercase())
            .map(|&idx| self.matrix.row(idx))
    }

    /// Row index for `token` after lowercase folding.
    pub fn index(&self, token: &str) -> Option<usize> {
        self.vocab.get(&token.to_lowercase()).copied()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

/// Parses an embedding text file. Header detection: a first line of exactly
/// two fields, both unsigned integers.
pub fn load_table(path: impl AsRef<Path>, name: &str) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    let reader = BufReader::new(file);

    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut seen: std::collections::HashSet<String> = std::collections::HashSet::new();
    let mut dim: Option<usize> = None;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(' ').filter(|f| !f.is_empty()).collect();
        if line_no == 0
            && fields.len() == 2
            && fields.iter().all(|f| f.parse::<usize>().is_ok())
        {
            continue; // word2vec-style count/dim header
        }
        let token = fields[0].to_lowercase();
        let values: Vec<f64> = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::format(&display, line_no + 1, format!("bad number {:?}", f))
                })
            })
            .collect::<Result<_>>()?;
        if values.is_empty() {
            return Err(Error::format(&display, line_no + 1, "no vector components"));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::format(
                    &display,
                    line_no + 1,
                    format!("{} components, expected {}", values.len(), d),
                ));
            }
            _ => {}
        }
        if !seen.insert(token.clone()) {
            return Err(Error::format(
                &display,
                line_no + 1,
                format!("duplicate token {}", token),
            ));
        }
        rows.push((token, values));
    }
    if rows.is_empty() {
        return Err(Error::format(&display, 1, "empty embedding file"));
    }
    EmbeddingTable::from_rows(name, rows)
}

/// What to substitute when a token is missing from one space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OovPolicy {
    /// Contribute an all-zero block.
    ZeroFill,
    /// Contribute a learned UNK row; the row itself lives in the model's
    /// parameter set, so plain lookups fall back to zeros.
    TrainableUnk,
}

/// Whether a token must be present in every space to count as in-vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VocabMode {
    #[default]
    Union,
    /// Tokens absent from any space are treated as out-of-vocabulary in all.
    Intersection,
}

/// An ordered concatenation of embedding spaces.
#[derive(Debug, Clone)]
pub struct CompositeEmbedder {
    spaces: Vec<EmbeddingTable>,
    policies: Vec<OovPolicy>,
    mode: VocabMode,
    total_dim: usize,
}

impl CompositeEmbedder {
    pub fn new(spaces: Vec<EmbeddingTable>, policies: Vec<OovPolicy>) -> Result<CompositeEmbedder> {
        Self::with_mode(spaces, policies, VocabMode::Union)
    }

    pub fn with_mode(
        spaces: Vec<EmbeddingTable>,
        policies: Vec<OovPolicy>,
        mode: VocabMode,
    ) -> Result<CompositeEmbedder> {
        if spaces.is_empty() {
            return Err(Error::EmptyInput("composite embedder needs at least one space".into()));
        }
        if spaces.len() != policies.len() {
            return Err(Error::Shape(format!(
                "{} spaces but {} OOV policies",
                spaces.len(),
                policies.len()
            )));
        }
        let total_dim = spaces.iter().map(|s| s.dim()).sum();
        Ok(CompositeEmbedder {
            spaces,
            policies,
            mode,
            total_dim,
        })
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn spaces(&self) -> &[EmbeddingTable] {
        &self.spaces
    }

    pub fn policies(&self) -> &[OovPolicy] {
        &self.policies
    }

    pub fn space_names(&self) -> Vec<&str> {
        self.spaces.iter().map(|s| s.name()).collect()
    }

    /// Per-space vectors for `token`, None where out of vocabulary (subject
    /// to the vocab mode). Order matches the declared space order.
    pub fn lookup_parts(&self, token: &str) -> Vec<Option<&[f64]>> {
        let parts: Vec<Option<&[f64]>> = self.spaces.iter().map(|s| s.vector(token)).collect();
        if self.mode == VocabMode::Intersection && parts.iter().any(|p| p.is_none()) {
            return vec![None; self.spaces.len()];
        }
        parts
    }

    /// Per-space row indices for `token` under the same vocab-mode rules as
    /// [`lookup_parts`].
    pub fn resolve(&self, token: &str) -> Vec<Option<usize>> {
        let indices: Vec<Option<usize>> = self.spaces.iter().map(|s| s.index(token)).collect();
        if self.mode == VocabMode::Intersection && indices.iter().any(|p| p.is_none()) {
            return vec![None; self.spaces.len()];
        }
        indices
    }

    /// Concatenated vector with zero blocks for missing spaces. Model code
    /// that owns trainable UNK rows substitutes them via `lookup_parts`.
    pub fn lookup(&self, token: &str) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_dim);
        for (part, space) in self.lookup_parts(token).into_iter().zip(&self.spaces) {
            match part {
                Some(v) => out.extend_from_slice(v),
                None => out.extend(std::iter::repeat(0.0).take(space.dim())),
            }
        }
        out
    }
}

/// Per-space coverage against a corpus vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceCoverage {
    pub space: String,
    pub covered: usize,
    pub oov_rate: f64,
}

pub fn coverage_report(
    embedder: &CompositeEmbedder,
    corpus_vocab: &[String],
) -> Result<Vec<SpaceCoverage>> {
    if corpus_vocab.is_empty() {
        return Err(Error::EmptyInput("coverage report over empty vocabulary".into()));
    }
    Ok(embedder
        .spaces
        .iter()
        .map(|space| {
            let covered = corpus_vocab.iter().filter(|t| space.contains(t)).count();
            SpaceCoverage {
                space: space.name().to_string(),
                covered,
                oov_rate: (corpus_vocab.len() - covered) as f64 / corpus_vocab.len() as f64,
            }
        })
        .collect())
}
