//! Kernel spectral clustering model: the normalized linear kernel on
//! adjacency lists, the centered dual eigenproblem, and out-of-sample
//! projection into the score-variable space.
//!
//! The dual problem `D⁻¹ M_D Ω α = λ α` is not symmetric, but with
//! `M_D = I − 1 1ᵀ D⁻¹ / (1ᵀ D⁻¹ 1)` the product `D⁻¹ M_D` factors as
//! `D^{-1/2} P D^{-1/2}`, where `P = I − u uᵀ` projects out
//! `u = D^{-1/2} 1 / ‖D^{-1/2} 1‖`. Substituting `α = D^{-1/2} β` turns every
//! eigenpair with `λ ≠ 0` into an eigenpair of the symmetric matrix
//! `P K P`, `K = D^{-1/2} Ω D^{-1/2}`, with `β ⊥ u`. The direction `u` itself
//! is the one annihilated by centering and is discarded.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use faer::{Mat, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sorted_intersection_len, Graph};

/// Default bound on the training set size (dense `N_tr × N_tr` kernel).
pub const DEFAULT_KERNEL_CAP: usize = 10_000;

/// Relative residual accepted for each kept dual eigenpair.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

#[inline]
fn cosine_from_counts(common: usize, dx: usize, dz: usize) -> f64 {
    if common == 0 {
        return 0.0;
    }
    common as f64 / ((dx * dz) as f64).sqrt()
}

/// Normalized linear kernel between two binary vectors given by their
/// sorted supports. Zero if either vector is empty.
pub fn cosine_similarity(x: &[usize], z: &[usize]) -> f64 {
    if x.is_empty() || z.is_empty() {
        return 0.0;
    }
    cosine_from_counts(sorted_intersection_len(x, z), x.len(), z.len())
}

/// Postings from a node id to the training columns that contain it.
#[derive(Debug, Clone, Default)]
struct InvertedIndex {
    postings: Vec<Vec<u32>>,
}

impl InvertedIndex {
    fn new(columns: &[Vec<usize>]) -> Self {
        let width = columns
            .iter()
            .filter_map(|c| c.last())
            .max()
            .map_or(0, |&m| m + 1);
        let mut postings = vec![Vec::new(); width];
        for (i, col) in columns.iter().enumerate() {
            for &v in col {
                postings[v].push(i as u32);
            }
        }
        InvertedIndex { postings }
    }

    /// Fills `counts[i] = |x ∩ columns[i]|` and returns the touched columns
    /// in ascending order. `counts` must be all zero on entry.
    fn intersect(&self, x: &[usize], counts: &mut [usize], touched: &mut Vec<usize>) {
        touched.clear();
        for &v in x {
            let Some(list) = self.postings.get(v) else {
                continue;
            };
            for &i in list {
                let i = i as usize;
                if counts[i] == 0 {
                    touched.push(i);
                }
                counts[i] += 1;
            }
        }
        touched.sort_unstable();
    }
}

/// Dense kernel matrix over the training nodes.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    nodes: Vec<usize>,
    columns: Vec<Vec<usize>>,
    values: Vec<f64>,
    degree: Vec<f64>,
}

impl KernelMatrix {
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.size();
        &self.values[i * n..(i + 1) * n]
    }

    /// Kernel degrees `d_i = Σ_j Ω_ij`.
    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// Graph indices of the training nodes, in kernel order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// `M_D v` for the degree-weighted centering matrix.
    pub fn center(&self, v: &[f64]) -> Vec<f64> {
        let s: f64 = self.degree.iter().map(|d| 1.0 / d).sum();
        let weighted: f64 = v.iter().zip(&self.degree).map(|(x, d)| x / d).sum();
        v.iter().map(|x| x - weighted / s).collect()
    }

    fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.size())
            .into_par_iter()
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Pairwise cosine similarities between the adjacency lists of `train`.
pub fn build_kernel_matrix(g: &Graph, train: &[usize], cap: usize) -> Result<KernelMatrix> {
    let n = train.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 training nodes, got {n}"
        )));
    }
    if n > cap {
        return Err(Error::CapExceeded {
            what: "training set",
            size: n,
            cap,
        });
    }
    let columns = train
        .iter()
        .map(|&u| g.adjacency_column(u).map(<[usize]>::to_vec))
        .collect::<Result<Vec<_>>>()?;
    let index = InvertedIndex::new(&columns);

    let mut values = vec![0.0; n * n];
    values
        .par_chunks_mut(n)
        .enumerate()
        .for_each_init(
            || (vec![0usize; n], Vec::new()),
            |(counts, touched), (i, row)| {
                index.intersect(&columns[i], counts, touched);
                let di = columns[i].len();
                for &j in touched.iter() {
                    row[j] = cosine_from_counts(counts[j], di, columns[j].len());
                    counts[j] = 0;
                }
            },
        );
    let degree = values.par_chunks(n).map(|r| r.iter().sum()).collect();
    Ok(KernelMatrix {
        nodes: train.to_vec(),
        columns,
        values,
        degree,
    })
}

/// Trained dual model.
#[derive(Debug, Clone)]
pub struct KscModel {
    maxk: usize,
    train_nodes: Vec<usize>,
    train_columns: Vec<Vec<usize>>,
    /// `maxk − 1` dual vectors of length `N_tr`.
    alphas: Vec<Vec<f64>>,
    biases: Vec<f64>,
    eigenvalues: Vec<f64>,
    // Derived, row-major `N_tr × (maxk − 1)` copy of the alphas.
    alpha_rows: Vec<f64>,
    index: InvertedIndex,
}

/// Solves the centered dual problem and keeps the `maxk − 1` leading
/// nontrivial eigenvectors.
pub fn train(kernel: &KernelMatrix, maxk: usize) -> Result<KscModel> {
    let n = kernel.size();
    if maxk < 2 {
        return Err(Error::InvalidConfig(format!("maxk must be at least 2, got {maxk}")));
    }
    if maxk > n {
        return Err(Error::InvalidConfig(format!(
            "maxk = {maxk} needs at least {maxk} training nodes, got {n}"
        )));
    }
    if let Some(i) = kernel.degree.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Numerical(format!(
            "training node {} has zero kernel degree",
            kernel.nodes[i]
        )));
    }
    let dim = maxk - 1;
    let inv_sqrt: Vec<f64> = kernel.degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let norm = inv_sqrt.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u: Vec<f64> = inv_sqrt.iter().map(|x| x / norm).collect();

    // w = K u, c = uᵀ K u
    let w: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = kernel.row(i);
            inv_sqrt[i]
                * (0..n)
                    .map(|j| row[j] * inv_sqrt[j] * u[j])
                    .sum::<f64>()
        })
        .collect();
    let c: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();

    // P K P = K − u wᵀ − w uᵀ + c u uᵀ
    let projected = Mat::<f64>::from_fn(n, n, |i, j| {
        kernel.values[i * n + j] * inv_sqrt[i] * inv_sqrt[j] - u[i] * w[j] - w[i] * u[j]
            + c * u[i] * u[j]
    });
    let eig = projected
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    drop(projected);
    let s = eig.S();
    let vecs = eig.U();

    let trivial = (0..n)
        .max_by(|&a, &b| {
            let da: f64 = (0..n).map(|i| vecs[(i, a)] * u[i]).sum::<f64>().abs();
            let db: f64 = (0..n).map(|i| vecs[(i, b)] * u[i]).sum::<f64>().abs();
            da.total_cmp(&db)
        })
        .expect("n >= 2");
    // Ascending from the solver; walk backwards for the largest.
    let kept: Vec<usize> = (0..n).rev().filter(|&j| j != trivial).take(dim).collect();

    let mut alphas = Vec::with_capacity(dim);
    let mut eigenvalues = Vec::with_capacity(dim);
    for &j in &kept {
        let mut alpha: Vec<f64> = (0..n).map(|i| vecs[(i, j)] * inv_sqrt[i]).collect();
        let nrm = alpha.iter().map(|x| x * x).sum::<f64>().sqrt();
        let pivot = alpha
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > alpha[best].abs() { i } else { best });
        let sign = if alpha[pivot] < 0.0 { -1.0 } else { 1.0 };
        alpha.iter_mut().for_each(|x| *x *= sign / nrm);
        alphas.push(alpha);
        eigenvalues.push(s[j]);
    }

    let s_inv: f64 = kernel.degree.iter().map(|d| 1.0 / d).sum();
    let mut biases = Vec::with_capacity(dim);
    for (alpha, &lambda) in alphas.iter().zip(&eigenvalues) {
        let omega_alpha = kernel.matvec(alpha);
        let weighted: f64 = omega_alpha
            .iter()
            .zip(&kernel.degree)
            .map(|(x, d)| x / d)
            .sum();
        biases.push(-weighted / s_inv);

        let residual = dual_residual(kernel, alpha, lambda);
        if !(residual <= EIGEN_RESIDUAL_TOL) {
            return Err(Error::Numerical(format!(
                "dual eigenpair with λ = {lambda} has relative residual {residual:e}"
            )));
        }
    }

    Ok(KscModel::assemble(
        maxk,
        kernel.nodes.clone(),
        kernel.columns.clone(),
        alphas,
        biases,
        eigenvalues,
    ))
}

/// `‖D⁻¹ M_D Ω α − λ α‖ / ‖α‖`.
pub fn dual_residual(kernel: &KernelMatrix, alpha: &[f64], lambda: f64) -> f64 {
    let centered = kernel.center(&kernel.matvec(alpha));
    let r: f64 = centered
        .iter()
        .zip(&kernel.degree)
        .zip(alpha)
        .map(|((m, d), a)| (m / d - lambda * a).powi(2))
        .sum::<f64>()
        .sqrt();
    let nrm = alpha.iter().map(|x| x * x).sum::<f64>().sqrt();
    r / nrm
}

impl KscModel {
    fn assemble(
        maxk: usize,
        train_nodes: Vec<usize>,
        train_columns: Vec<Vec<usize>>,
        alphas: Vec<Vec<f64>>,
        biases: Vec<f64>,
        eigenvalues: Vec<f64>,
    ) -> Self {
        let dim = maxk - 1;
        let n = train_nodes.len();
        let mut alpha_rows = vec![0.0; n * dim];
        for (l, alpha) in alphas.iter().enumerate() {
            for (i, &a) in alpha.iter().enumerate() {
                alpha_rows[i * dim + l] = a;
            }
        }
        let index = InvertedIndex::new(&train_columns);
        KscModel {
            maxk,
            train_nodes,
            train_columns,
            alphas,
            biases,
            eigenvalues,
            alpha_rows,
            index,
        }
    }

    pub fn maxk(&self) -> usize {
        self.maxk
    }

    /// Dimension of the projection space, `maxk − 1`.
    pub fn dim(&self) -> usize {
        self.maxk - 1
    }

    pub fn n_train(&self) -> usize {
        self.train_nodes.len()
    }

    pub fn train_nodes(&self) -> &[usize] {
        &self.train_nodes
    }

    pub fn train_column(&self, i: usize) -> &[usize] {
        &self.train_columns[i]
    }

    pub fn alphas(&self) -> &[Vec<f64>] {
        &self.alphas
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Non-increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Out-of-sample score vector `ê(x) = Σ_i α_i K(x, x_i) + b`.
    pub fn project(&self, x: &[usize]) -> Vec<f64> {
        let dim = self.dim();
        let mut acc = vec![0.0; dim];
        if !x.is_empty() {
            for (i, col) in self.train_columns.iter().enumerate() {
                let common = sorted_intersection_len(x, col);
                if common == 0 {
                    continue;
                }
                let k = cosine_from_counts(common, x.len(), col.len());
                let a = &self.alpha_rows[i * dim..(i + 1) * dim];
                for l in 0..dim {
                    acc[l] += a[l] * k;
                }
            }
        }
        for (e, b) in acc.iter_mut().zip(&self.biases) {
            *e += b;
        }
        acc
    }

    /// Same arithmetic as [`KscModel::project`] with the intersections
    /// gathered through the inverted index.
    fn project_indexed(
        &self,
        x: &[usize],
        counts: &mut [usize],
        touched: &mut Vec<usize>,
        out: &mut [f64],
    ) {
        let dim = self.dim();
        out.iter_mut().for_each(|e| *e = 0.0);
        if !x.is_empty() {
            self.index.intersect(x, counts, touched);
            for &i in touched.iter() {
                let k = cosine_from_counts(counts[i], x.len(), self.train_columns[i].len());
                counts[i] = 0;
                let a = &self.alpha_rows[i * dim..(i + 1) * dim];
                for l in 0..dim {
                    out[l] += a[l] * k;
                }
            }
        }
        for (e, b) in out.iter_mut().zip(&self.biases) {
            *e += b;
        }
    }

    /// Projections `Ω α + b` of the training nodes themselves.
    pub fn training_projections(&self, kernel: &KernelMatrix) -> LatentMatrix {
        let dim = self.dim();
        let n = kernel.size();
        let mut rows = vec![0.0; n * dim];
        for (l, alpha) in self.alphas.iter().enumerate() {
            let oa = kernel.matvec(alpha);
            for i in 0..n {
                rows[i * dim + l] = oa[i] + self.biases[l];
            }
        }
        LatentMatrix {
            dim,
            rows,
            node_ids: kernel.nodes.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let stored = StoredModel {
            format: MODEL_FORMAT.to_string(),
            maxk: self.maxk,
            n_train: self.n_train(),
            train_nodes: self.train_nodes.clone(),
            train_columns: self.train_columns.clone(),
            alphas: self.alphas.clone(),
            biases: self.biases.clone(),
            eigenvalues: self.eigenvalues.clone(),
        };
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, &stored)
            .map_err(|e| Error::io(path, e.into()))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let stored: StoredModel =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        let bad = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        if stored.format != MODEL_FORMAT {
            return Err(bad(format!("unknown format tag {:?}", stored.format)));
        }
        let n = stored.n_train;
        let dim = stored.maxk.saturating_sub(1);
        if stored.maxk < 2
            || stored.train_nodes.len() != n
            || stored.train_columns.len() != n
            || stored.alphas.len() != dim
            || stored.biases.len() != dim
            || stored.eigenvalues.len() != dim
            || stored.alphas.iter().any(|a| a.len() != n)
        {
            return Err(bad("inconsistent model dimensions".into()));
        }
        if stored
            .train_columns
            .iter()
            .any(|c| c.windows(2).any(|w| w[0] >= w[1]))
        {
            return Err(bad("training columns must be strictly sorted".into()));
        }
        Ok(KscModel::assemble(
            stored.maxk,
            stored.train_nodes,
            stored.train_columns,
            stored.alphas,
            stored.biases,
            stored.eigenvalues,
        ))
    }
}

const MODEL_FORMAT: &str = "mhksc-model/1";

#[derive(Serialize, Deserialize)]
struct StoredModel {
    format: String,
    maxk: usize,
    n_train: usize,
    train_nodes: Vec<usize>,
    train_columns: Vec<Vec<usize>>,
    alphas: Vec<Vec<f64>>,
    biases: Vec<f64>,
    eigenvalues: Vec<f64>,
}

/// Projects the given graph nodes, `chunk` nodes per parallel task.
///
/// Rows follow the order of `nodes`; the result does not depend on `chunk`
/// or on the number of threads.
pub fn project_batch(
    model: &KscModel,
    g: &Graph,
    nodes: &[usize],
    chunk: usize,
) -> Result<LatentMatrix> {
    if chunk == 0 {
        return Err(Error::InvalidConfig("chunk size must be at least 1".into()));
    }
    if let Some(&u) = nodes.iter().find(|&&u| u >= g.n_nodes()) {
        return Err(Error::NodeOutOfRange {
            index: u,
            n_nodes: g.n_nodes(),
        });
    }
    let dim = model.dim();
    let mut rows = vec![0.0; nodes.len() * dim];
    rows.par_chunks_mut(chunk * dim)
        .zip(nodes.par_chunks(chunk))
        .for_each(|(out, part)| {
            let mut counts = vec![0usize; model.n_train()];
            let mut touched = Vec::new();
            for (r, &u) in out.chunks_mut(dim).zip(part) {
                model.project_indexed(g.neighbors(u), &mut counts, &mut touched, r);
            }
        });
    Ok(LatentMatrix {
        dim,
        rows,
        node_ids: nodes.to_vec(),
    })
}

/// Stacked projection vectors, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMatrix {
    dim: usize,
    rows: Vec<f64>,
    node_ids: Vec<usize>,
}

impl LatentMatrix {
    pub fn new(dim: usize, rows: Vec<f64>, node_ids: Vec<usize>) -> Result<Self> {
        if dim == 0 || rows.len() != dim * node_ids.len() {
            return Err(Error::Mismatch(format!(
                "{} values for {} rows of dimension {dim}",
                rows.len(),
                node_ids.len()
            )));
        }
        Ok(LatentMatrix {
            dim,
            rows,
            node_ids,
        })
    }

    /// Builds a matrix from explicit rows, numbering them `0..n`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Mismatch("rows have different lengths".into()));
        }
        Self::new(dim, rows.concat(), (0..rows.len()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.node_ids.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rows
    }

    /// Tab-separated, one row per line: node id then the scores.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, id) in self.node_ids.iter().enumerate() {
            write!(out, "{id}")?;
            for x in self.row(i) {
                write!(out, "\t{x:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_tsv(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load_tsv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut dim = None;
        let mut rows = Vec::new();
        let mut ids = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let mut toks = line.split('\t');
            let id = toks
                .next()
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| parse_err("bad node id".into()))?;
            let vals = toks
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(e.to_string()))?;
            if *dim.get_or_insert(vals.len()) != vals.len() {
                return Err(parse_err("inconsistent row width".into()));
            }
            ids.push(id);
            rows.extend(vals);
        }
        Self::new(dim.unwrap_or(0), rows, ids)
    }
}
