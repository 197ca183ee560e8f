//! Pre-trained word vectors and ground-metric cost matrices.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use ndarray::Array2;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Exponent applied to the Euclidean ground distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GroundPower {
    #[default]
    One,
    Two,
}

impl GroundPower {
    pub fn from_int(p: u32) -> Result<Self> {
        match p {
            1 => Ok(GroundPower::One),
            2 => Ok(GroundPower::Two),
            _ => Err(Error::InvalidParameter(format!("ground power {p} not in {{1, 2}}"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            GroundPower::One => 1,
            GroundPower::Two => 2,
        }
    }

    #[inline]
    pub fn apply(self, d: f64) -> f64 {
        match self {
            GroundPower::One => d,
            GroundPower::Two => d * d,
        }
    }

    /// Inverse of [`apply`](Self::apply) on nonnegative values.
    #[inline]
    pub fn root(self, x: f64) -> f64 {
        match self {
            GroundPower::One => x,
            GroundPower::Two => x.max(0.0).sqrt(),
        }
    }
}

/// Word vectors for the vocabulary ids that have one.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: Vec<Option<Box<[f64]>>>,
    words: Vec<String>,
    embedded: usize,
}

impl EmbeddingTable {
    /// Builds a table from per-id vectors (`None` for words without one).
    pub fn from_vectors(vocab: &Vocabulary, vectors: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if vectors.len() != vocab.len() {
            return Err(Error::Shape(format!(
                "{} vectors for vocabulary of size {}",
                vectors.len(),
                vocab.len()
            )));
        }
        let mut dimension = None;
        for v in vectors.iter().flatten() {
            match dimension {
                None => dimension = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::Shape(format!(
                        "vector of length {} in table of dimension {d}",
                        v.len()
                    )))
                }
                _ => {}
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("non-finite embedding component".into()));
            }
        }
        let dimension = dimension.ok_or(Error::ZeroCoverage)?;
        if dimension == 0 {
            return Err(Error::InvalidParameter("zero-dimensional embeddings".into()));
        }
        let embedded = vectors.iter().filter(|v| v.is_some()).count();
        Ok(EmbeddingTable {
            dimension,
            vectors: vectors
                .into_iter()
                .map(|v| v.map(Vec::into_boxed_slice))
                .collect(),
            words: vocab.words().to_vec(),
            embedded,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Fraction of the vocabulary with a vector.
    pub fn coverage(&self) -> f64 {
        self.embedded as f64 / self.vectors.len() as f64
    }

    pub fn vocab_size(&self) -> usize {
        self.vectors.len()
    }

    pub fn get(&self, id: usize) -> Option<&[f64]> {
        self.vectors.get(id).and_then(|v| v.as_deref())
    }

    pub fn contains(&self, id: usize) -> bool {
        self.get(id).is_some()
    }

    pub fn vector(&self, id: usize) -> Result<&[f64]> {
        self.get(id).ok_or_else(|| Error::MissingEmbedding {
            id,
            word: self.words.get(id).cloned().unwrap_or_default(),
        })
    }

    pub fn distance(&self, a: usize, b: usize) -> Result<f64> {
        Ok(euclidean(self.vector(a)?, self.vector(b)?))
    }

    /// Ids of all embedded words, ascending.
    pub fn embedded_ids(&self) -> Vec<usize> {
        (0..self.vectors.len()).filter(|&i| self.contains(i)).collect()
    }
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Reads whitespace-separated `token v1 ... vD` lines. A leading
/// `count dimension` header line (as in word2vec text output) is skipped.
/// Only vocabulary tokens are kept and the first occurrence wins.
pub fn load_embeddings<R: BufRead>(reader: R, vocab: &Vocabulary) -> Result<EmbeddingTable> {
    let mut dimension: Option<usize> = None;
    let mut vectors: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        if lineno == 1 && values.len() == 1 && token.parse::<usize>().is_ok() {
            if let Ok(d) = values[0].parse::<usize>() {
                dimension = Some(d);
                continue;
            }
        }
        match dimension {
            None => dimension = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::DimensionMismatch {
                    line: lineno,
                    expected: d,
                    found: values.len(),
                })
            }
            _ => {}
        }
        let Some(id) = vocab.id(token) else { continue };
        if vectors[id].is_some() {
            continue;
        }
        let parsed = values
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::EmbeddingFormat {
                line: lineno,
                reason: e.to_string(),
            })?;
        vectors[id] = Some(parsed);
    }
    if vectors.iter().all(Option::is_none) {
        return Err(Error::ZeroCoverage);
    }
    EmbeddingTable::from_vectors(vocab, vectors)
}

/// Opens a vector file, transparently decompressing gzip input.
pub fn load_embeddings_path(path: &Path, vocab: &Vocabulary) -> Result<EmbeddingTable> {
    let mut file = BufReader::new(File::open(path)?);
    let gz = {
        let buf = file.fill_buf()?;
        buf.len() >= 2 && buf[0] == 0x1f && buf[1] == 0x8b
    };
    if gz {
        let reader: Box<dyn Read> = Box::new(MultiGzDecoder::new(file));
        load_embeddings(BufReader::new(reader), vocab)
    } else {
        load_embeddings(file, vocab)
    }
}

/// Dense cost matrix between two word lists.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub entries: Array2<f64>,
    pub ground_power: GroundPower,
}

impl CostMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }
}

/// `entry(i, j) = |v(a_i) - v(b_j)|^power`.
pub fn cost_matrix(
    a: &[usize],
    b: &[usize],
    table: &EmbeddingTable,
    power: GroundPower,
) -> Result<CostMatrix> {
    Ok(CostMatrix {
        entries: distance_matrix(a, b, table)?.mapv(|d| power.apply(d)),
        ground_power: power,
    })
}

/// Plain Euclidean distances between two word lists.
pub fn distance_matrix(a: &[usize], b: &[usize], table: &EmbeddingTable) -> Result<Array2<f64>> {
    let va = a.iter().map(|&i| table.vector(i)).collect::<Result<Vec<_>>>()?;
    let vb = b.iter().map(|&i| table.vector(i)).collect::<Result<Vec<_>>>()?;
    let mut out = Array2::zeros((a.len(), b.len()));
    for (i, x) in va.iter().enumerate() {
        for (j, y) in vb.iter().enumerate() {
            out[[i, j]] = euclidean(x, y);
        }
    }
    Ok(out)
}
