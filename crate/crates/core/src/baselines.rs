//! Vector-space document representations (nBOW, TF-IDF, LSI, topic
//! proportions) and the Euclidean and cosine distances between them.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::container::Container;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::topics::{corpus_proportions, TopicModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VectorMethod {
    Nbow,
    Tfidf,
    Lsi { dim: usize },
    Lda,
}

impl fmt::Display for VectorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorMethod::Nbow => f.write_str("nbow"),
            VectorMethod::Tfidf => f.write_str("tfidf"),
            VectorMethod::Lsi { dim } => write!(f, "lsi:d={dim}"),
            VectorMethod::Lda => f.write_str("lda"),
        }
    }
}

impl FromStr for VectorMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nbow" => Ok(VectorMethod::Nbow),
            "tfidf" => Ok(VectorMethod::Tfidf),
            "lda" => Ok(VectorMethod::Lda),
            _ => {
                let dim = s
                    .strip_prefix("lsi:d=")
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown vector method {s:?}")))?;
                Ok(VectorMethod::Lsi { dim })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VectorKind {
    Euclidean,
    Cosine,
}

impl fmt::Display for VectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VectorKind::Euclidean => "euclidean",
            VectorKind::Cosine => "cosine",
        })
    }
}

impl FromStr for VectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(VectorKind::Euclidean),
            "cosine" => Ok(VectorKind::Cosine),
            _ => Err(Error::InvalidParameter(format!("unknown vector distance {s:?}"))),
        }
    }
}

/// Document vectors, one row per document.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorRepresentation {
    pub method: VectorMethod,
    pub vectors: Array2<f64>,
}

impl VectorRepresentation {
    pub fn to_container(&self) -> Container {
        let mut c = Container::new("vectors");
        c.push("method", self.method);
        c.push_array("vectors", self.vectors.clone());
        c
    }

    pub fn from_container(mut c: Container) -> Result<Self> {
        c.expect_kind("vectors")?;
        let method = c.require("method")?.parse()?;
        let vectors = c.take_array("vectors")?;
        Ok(VectorRepresentation { method, vectors })
    }
}

/// A representation fitted on training documents and applicable to new ones.
/// IDF weights and the LSI projection come from the training corpus only.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorModel {
    pub method: VectorMethod,
    pub vocab_size: usize,
    idf: Vec<f64>,
    /// `|V| x dim` projection applied to TF-IDF rows.
    projection: Option<Array2<f64>>,
}

fn counts_matrix(corpus: &Corpus) -> Array2<f64> {
    let mut x = Array2::zeros((corpus.len(), corpus.vocabulary.len()));
    for (i, doc) in corpus.documents.iter().enumerate() {
        for (&w, &c) in doc.support.iter().zip(&doc.counts) {
            x[[i, w]] = c as f64;
        }
    }
    x
}

fn nbow_matrix(corpus: &Corpus) -> Array2<f64> {
    let mut x = Array2::zeros((corpus.len(), corpus.vocabulary.len()));
    for (i, doc) in corpus.documents.iter().enumerate() {
        for (&w, &m) in doc.support.iter().zip(&doc.mass) {
            x[[i, w]] = m;
        }
    }
    x
}

impl VectorModel {
    pub fn fit(train: &Corpus, method: VectorMethod) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let v = train.vocabulary.len();
        let mut model = VectorModel {
            method,
            vocab_size: v,
            idf: Vec::new(),
            projection: None,
        };
        match method {
            VectorMethod::Nbow => {}
            VectorMethod::Lda => {
                return Err(Error::InvalidParameter(
                    "topic-proportion vectors come from a topic model, use build_vectors".into(),
                ))
            }
            VectorMethod::Tfidf | VectorMethod::Lsi { .. } => {
                let n = train.len() as f64;
                let mut df = vec![0usize; v];
                for doc in &train.documents {
                    for &w in &doc.support {
                        df[w] += 1;
                    }
                }
                model.idf = df.iter().map(|&d| 1.0 + ((1.0 + n) / (1.0 + d as f64)).ln()).collect();
            }
        }
        if let VectorMethod::Lsi { dim } = method {
            if dim == 0 || dim > train.len().min(v) {
                return Err(Error::InvalidParameter(format!(
                    "LSI dimension {dim} must lie in 1..={}",
                    train.len().min(v)
                )));
            }
            let x = model.tfidf(train);
            model.projection = Some(lsi_projection(&x, dim));
        }
        Ok(model)
    }

    fn tfidf(&self, corpus: &Corpus) -> Array2<f64> {
        let mut x = counts_matrix(corpus);
        for mut row in x.outer_iter_mut() {
            for (w, val) in row.iter_mut().enumerate() {
                *val *= self.idf[w];
            }
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|a| a / norm);
            }
        }
        x
    }

    pub fn transform(&self, corpus: &Corpus) -> Result<VectorRepresentation> {
        if corpus.vocabulary.len() != self.vocab_size {
            return Err(Error::Shape(format!(
                "corpus vocabulary has {} words, model expects {}",
                corpus.vocabulary.len(),
                self.vocab_size
            )));
        }
        let vectors = match self.method {
            VectorMethod::Nbow => nbow_matrix(corpus),
            VectorMethod::Tfidf => self.tfidf(corpus),
            VectorMethod::Lsi { .. } => {
                let p = self.projection.as_ref().expect("LSI model has a projection");
                self.tfidf(corpus).dot(p)
            }
            VectorMethod::Lda => unreachable!("rejected in fit"),
        };
        Ok(VectorRepresentation {
            method: self.method,
            vectors,
        })
    }
}

/// Right singular vectors `V_k` of `x` (as a `|V| x k` matrix) from a
/// symmetric eigendecomposition of the smaller Gram matrix. Each left
/// singular vector is signed so its largest-magnitude entry is positive.
fn lsi_projection(x: &Array2<f64>, k: usize) -> Array2<f64> {
    let (n, v) = x.dim();
    let xm = DMatrix::from_fn(n, v, |i, j| x[[i, j]]);
    let by_rows = n <= v;
    let gram = if by_rows { &xm * xm.transpose() } else { xm.transpose() * &xm };
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let smax = eig.eigenvalues[order[0]].max(0.0).sqrt();

    let mut proj = Array2::zeros((v, k));
    for (col, &e) in order.iter().take(k).enumerate() {
        let sigma = eig.eigenvalues[e].max(0.0).sqrt();
        if sigma <= 1e-12 * smax || sigma == 0.0 {
            continue;
        }
        let vec = eig.eigenvectors.column(e);
        let (u, vv): (Vec<f64>, Vec<f64>) = if by_rows {
            let u: Vec<f64> = vec.iter().copied().collect();
            let vv = (0..v).map(|j| (0..n).map(|i| xm[(i, j)] * u[i]).sum::<f64>() / sigma).collect();
            (u, vv)
        } else {
            let vv: Vec<f64> = vec.iter().copied().collect();
            let u = (0..n).map(|i| (0..v).map(|j| xm[(i, j)] * vv[j]).sum::<f64>() / sigma).collect();
            (u, vv)
        };
        let lead = u
            .iter()
            .copied()
            .reduce(|a, b| if b.abs() > a.abs() { b } else { a })
            .unwrap_or(0.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for (j, &val) in vv.iter().enumerate() {
            proj[[j, col]] = sign * val;
        }
    }
    proj
}

/// Representation of `corpus`. `nbow` is fitted on the corpus itself; the
/// TF-IDF and LSI weights are too (use [`VectorModel`] to fit on a training
/// split). `lda` uses the model's proportions, folding in documents the model
/// was not trained on.
pub fn build_vectors(
    corpus: &Corpus,
    method: VectorMethod,
    model: Option<&TopicModel>,
    infer_iterations: usize,
    seed: u64,
) -> Result<VectorRepresentation> {
    match method {
        VectorMethod::Lda => {
            let model = model.ok_or_else(|| Error::Missing("topic model for lda vectors".into()))?;
            Ok(VectorRepresentation {
                method,
                vectors: corpus_proportions(corpus, model, infer_iterations, seed)?,
            })
        }
        _ => VectorModel::fit(corpus, method)?.transform(corpus),
    }
}

pub fn vector_distance(u: &[f64], v: &[f64], kind: VectorKind) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("vectors of length {} and {}", u.len(), v.len())));
    }
    Ok(match kind {
        VectorKind::Euclidean => crate::embeddings::euclidean(u, v),
        VectorKind::Cosine => {
            let (mut uv, mut uu, mut vv) = (0.0, 0.0, 0.0);
            for (a, b) in u.iter().zip(v) {
                uv += a * b;
                uu += a * a;
                vv += b * b;
            }
            if uu == 0.0 && vv == 0.0 {
                0.0
            } else if uu == 0.0 || vv == 0.0 {
                1.0
            } else {
                1.0 - uv / (uu.sqrt() * vv.sqrt())
            }
        }
    })
}
