//! Immutable sparse undirected graph and edge-list ingestion.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Sparse undirected, unweighted graph in CSR layout.
///
/// Neighbor lists are sorted, free of duplicates and self-loops, and
/// symmetric. Nodes are indexed `0..n_nodes`; the original identifiers of a
/// graph read from a file are kept in `labels`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    n_edges: usize,
    labels: Option<Vec<String>>,
}

impl Graph {
    /// Builds a graph on `n_nodes` nodes from an arbitrary edge list.
    ///
    /// Edges are symmetrized and deduplicated; self-loops are dropped.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for &(u, v) in edges {
            for w in [u, v] {
                if w >= n_nodes {
                    return Err(Error::NodeOutOfRange { index: w, n_nodes });
                }
            }
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        Ok(Self::from_adjacency(adj))
    }

    fn from_adjacency(mut adj: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        let n_edges = neighbors.len() / 2;
        Graph {
            offsets,
            neighbors,
            n_edges,
            labels: None,
        }
    }

    /// Attaches original node identifiers, one per node index.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_nodes() {
            return Err(Error::Mismatch(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n_nodes()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges, each counted once.
    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    /// Sorted neighbor list of `u`.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Sparse adjacency column `A(:, i)`, as its sorted support.
    pub fn adjacency_column(&self, i: usize) -> Result<&[usize]> {
        if i >= self.n_nodes() {
            return Err(Error::NodeOutOfRange {
                index: i,
                n_nodes: self.n_nodes(),
            });
        }
        Ok(self.neighbors(i))
    }

    pub fn has_labels(&self) -> bool {
        self.labels.is_some()
    }

    /// Original identifier of node `u`; its decimal index when unlabeled.
    pub fn label(&self, u: usize) -> String {
        match &self.labels {
            Some(labels) => labels[u].clone(),
            None => u.to_string(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.n_nodes()).map(|u| self.label(u)).collect()
    }

    /// Map from original identifier to node index.
    pub fn label_index(&self) -> HashMap<String, usize> {
        (0..self.n_nodes()).map(|u| (self.label(u), u)).collect()
    }

    /// Iterates over each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Mean of the local clustering coefficients; nodes of degree < 2
    /// contribute zero.
    pub fn global_clustering_coefficient(&self) -> f64 {
        let n = self.n_nodes();
        if n == 0 {
            return 0.0;
        }
        let local: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|u| {
                let nu = self.neighbors(u);
                let d = nu.len();
                if d < 2 {
                    return 0.0;
                }
                // Each triangle through u is seen from both of its other corners.
                let closed: usize = nu
                    .iter()
                    .map(|&v| sorted_intersection_len(nu, self.neighbors(v)))
                    .sum();
                let triangles = closed as f64 / 2.0;
                triangles / (d * (d - 1)) as f64 * 2.0
            })
            .collect();
        // Sequential sum keeps the result independent of thread scheduling.
        local.iter().sum::<f64>() / n as f64
    }

    /// Writes the graph as an edge list that reloads to an identical graph.
    ///
    /// Lines are emitted in node order, each node listing its edges to
    /// lower-indexed neighbors; a node with no lower neighbor is declared by
    /// a self-loop line, which the loader drops while keeping the node.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for u in 0..self.n_nodes() {
            let lower: Vec<usize> = self
                .neighbors(u)
                .iter()
                .copied()
                .take_while(|&v| v < u)
                .collect();
            let lu = self.label(u);
            if lower.is_empty() {
                writeln!(out, "{lu}\t{lu}")?;
            }
            for v in lower {
                writeln!(out, "{}\t{}", lu, self.label(v))?;
            }
        }
        Ok(())
    }

    pub fn save_edge_list(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_edge_list(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Reads a whitespace-separated edge list, as used by SNAP.
///
/// Lines starting with `#` and blank lines are skipped. Node tokens are
/// arbitrary strings, densely reindexed in order of first appearance.
pub fn load_edge_list(path: &Path) -> Result<Graph> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_edge_list(BufReader::new(file), path)
}

pub fn read_edge_list<R: BufRead>(reader: R, source: &Path) -> Result<Graph> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    let mut intern = |tok: &str| -> usize {
        if let Some(&i) = index.get(tok) {
            return i;
        }
        let i = labels.len();
        labels.push(tok.to_string());
        index.insert(tok.to_string(), i);
        i
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let (u, v) = match (toks.next(), toks.next(), toks.next()) {
            (Some(u), Some(v), None) => (u, v),
            _ => {
                return Err(Error::Parse {
                    path: source.to_path_buf(),
                    line: lineno + 1,
                    message: format!("expected two node tokens, got {trimmed:?}"),
                })
            }
        };
        let (u, v) = (intern(u), intern(v));
        edges.push((u, v));
    }
    let graph = Graph::from_edges(labels.len(), &edges)?;
    if graph.n_edges() == 0 {
        return Err(Error::EmptyGraph);
    }
    graph.with_labels(labels)
}

/// Size of the intersection of two sorted index lists.
pub fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}
