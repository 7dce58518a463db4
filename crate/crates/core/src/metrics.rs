//! Partition quality: modularity and conductance against the graph,
//! adjusted Rand index and variation of information against a reference.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Assignment of every node to a cluster, with ids compacted to `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Compacts arbitrary labels to `0..k` in order of first appearance.
    pub fn from_labels<T: Eq + std::hash::Hash + Clone>(labels: &[T]) -> Self {
        let mut ids: HashMap<T, usize> = HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l.clone()).or_insert(next)
            })
            .collect();
        Partition {
            assignment,
            k: ids.len(),
        }
    }

    pub fn from_clusters(clusters: &[Vec<usize>], n: usize) -> Result<Self> {
        crate::hierarchy::check_partition(clusters, n)?;
        let mut labels = vec![0; n];
        for (c, members) in clusters.iter().enumerate() {
            for &m in members {
                labels[m] = c;
            }
        }
        Ok(Self::from_labels(&labels))
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Number of nonempty clusters.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Natural-log Shannon entropy of the cluster-size distribution.
    pub fn entropy(&self) -> f64 {
        let n = self.len() as f64;
        self.cluster_sizes()
            .into_iter()
            .map(|s| {
                let p = s as f64 / n;
                -p * p.ln()
            })
            .sum()
    }

    /// Reads `node_id<ws>cluster_id` lines, mapping node ids through the
    /// graph's labels. Every graph node must be assigned exactly once.
    pub fn load(path: &Path, g: &Graph) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let index = g.label_index();
        let mut labels: Vec<Option<String>> = vec![None; g.n_nodes()];
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let mut toks = t.split_whitespace();
            let (node, cluster) = match (toks.next(), toks.next(), toks.next()) {
                (Some(n), Some(c), None) => (n, c),
                _ => return Err(parse_err(format!("expected node and cluster, got {t:?}"))),
            };
            let &u = index
                .get(node)
                .ok_or_else(|| parse_err(format!("unknown node {node:?}")))?;
            if labels[u].replace(cluster.to_string()).is_some() {
                return Err(parse_err(format!("node {node:?} assigned twice")));
            }
        }
        let labels = labels
            .into_iter()
            .enumerate()
            .map(|(u, l)| {
                l.ok_or_else(|| {
                    Error::Mismatch(format!(
                        "{}: node {:?} has no cluster",
                        path.display(),
                        g.label(u)
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_labels(&labels))
    }

    pub fn save(&self, path: &Path, g: &Graph) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        (|| {
            for (u, c) in self.assignment.iter().enumerate() {
                writeln!(out, "{}\t{c}", g.label(u))?;
            }
            out.flush()
        })()
        .map_err(|e| Error::io(path, e))
    }
}

fn check_covers(g: &Graph, p: &Partition) -> Result<f64> {
    if p.len() != g.n_nodes() {
        return Err(Error::Mismatch(format!(
            "partition of {} nodes for graph of {}",
            p.len(),
            g.n_nodes()
        )));
    }
    if g.n_edges() == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok(g.n_edges() as f64)
}

/// Per-cluster intra-edge counts and degree volumes.
fn cluster_edge_stats(g: &Graph, p: &Partition) -> (Vec<usize>, Vec<usize>) {
    let a = p.assignment();
    let mut intra = vec![0; p.k()];
    let mut volume = vec![0; p.k()];
    for u in 0..g.n_nodes() {
        volume[a[u]] += g.degree(u);
    }
    for (u, v) in g.edges() {
        if a[u] == a[v] {
            intra[a[u]] += 1;
        }
    }
    (intra, volume)
}

/// Newman–Girvan modularity `Σ_c [e_c/m − (d_c/2m)²]`.
pub fn modularity(g: &Graph, p: &Partition) -> Result<f64> {
    let m = check_covers(g, p)?;
    let (intra, volume) = cluster_edge_stats(g, p);
    Ok(intra
        .iter()
        .zip(&volume)
        .map(|(&e, &d)| e as f64 / m - (d as f64 / (2.0 * m)).powi(2))
        .sum())
}

/// Mean over clusters of `cut(c) / min(vol(c), vol(V) − vol(c))`, with a
/// zero denominator giving zero.
pub fn cut_conductance(g: &Graph, p: &Partition) -> Result<f64> {
    check_covers(g, p)?;
    let (intra, volume) = cluster_edge_stats(g, p);
    let total = 2 * g.n_edges();
    let sum: f64 = intra
        .iter()
        .zip(&volume)
        .map(|(&e, &vol)| {
            let cut = vol - 2 * e;
            let denom = vol.min(total - vol);
            if denom == 0 {
                0.0
            } else {
                cut as f64 / denom as f64
            }
        })
        .sum();
    Ok(sum / p.k() as f64)
}

fn check_same_nodes(p1: &Partition, p2: &Partition) -> Result<()> {
    if p1.len() != p2.len() {
        return Err(Error::Mismatch(format!(
            "partitions cover {} and {} nodes",
            p1.len(),
            p2.len()
        )));
    }
    Ok(())
}

// Ordered so that floating-point sums over it are reproducible.
fn contingency(p1: &Partition, p2: &Partition) -> BTreeMap<(usize, usize), u64> {
    let mut table = BTreeMap::new();
    for (&a, &b) in p1.assignment().iter().zip(p2.assignment()) {
        *table.entry((a, b)).or_insert(0) += 1;
    }
    table
}

#[inline]
fn pairs(n: u64) -> i128 {
    let n = n as i128;
    n * (n - 1) / 2
}

/// Hubert–Arabie adjusted Rand index, evaluated with exact integer pair
/// counts. Two partitions that are both all-singletons or both a single
/// cluster score 1.
pub fn ari(p1: &Partition, p2: &Partition) -> Result<f64> {
    check_same_nodes(p1, p2)?;
    let index: i128 = contingency(p1, p2).values().map(|&c| pairs(c)).sum();
    let a: i128 = p1.cluster_sizes().iter().map(|&s| pairs(s as u64)).sum();
    let b: i128 = p2.cluster_sizes().iter().map(|&s| pairs(s as u64)).sum();
    let total = pairs(p1.len() as u64);
    // ARI = (index − ab/T) / ((a + b)/2 − ab/T), scaled by 2T.
    let num = 2 * (index * total - a * b);
    let den = (a + b) * total - 2 * a * b;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// Variation of information `H(p1) + H(p2) − 2 I(p1, p2)`, normalized by
/// `ln N`.
pub fn vi(p1: &Partition, p2: &Partition) -> Result<f64> {
    check_same_nodes(p1, p2)?;
    let n = p1.len();
    if n < 2 {
        return Err(Error::InvalidConfig("variation of information needs N >= 2".into()));
    }
    let nf = n as f64;
    let s1 = p1.cluster_sizes();
    let s2 = p2.cluster_sizes();
    // VI = −Σ_ij r_ij [ln(r_ij/p_i) + ln(r_ij/q_j)]
    let raw: f64 = contingency(p1, p2)
        .into_iter()
        .map(|((a, b), c)| {
            let r = c as f64 / nf;
            let p = s1[a] as f64 / nf;
            let q = s2[b] as f64 / nf;
            -r * ((r / p).ln() + (r / q).ln())
        })
        .sum();
    Ok((raw / nf.ln()).max(0.0))
}
