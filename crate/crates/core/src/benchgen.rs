//! Two-level planted-partition benchmark graphs.
//!
//! Nodes are grouped into micro communities, which are grouped into macro
//! communities. A node expects `(1 − μ₂)·d̄` edges inside its micro
//! community, `(μ₂ − μ₁)·d̄` to the rest of its macro community and `μ₁·d̄`
//! outside it. Each block of node pairs gets one Bernoulli probability (the
//! mean of what the two endpoint communities ask for), and edges are drawn
//! by geometric skipping over the block, so generation is linear in the
//! number of edges.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::Partition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    /// Micro community sizes, grouped by macro community.
    pub micro_sizes: Vec<Vec<usize>>,
    /// Fraction of a node's edges leaving its macro community.
    pub mu1: f64,
    /// Fraction of a node's edges leaving its micro community.
    pub mu2: f64,
    pub avg_degree: f64,
    pub seed: u64,
}

impl BenchmarkSpec {
    /// Near-uniform layout: micro communities spread evenly over the macro
    /// communities, nodes spread evenly over the micro communities.
    pub fn uniform(
        nodes: usize,
        n_macro: usize,
        n_micro: usize,
        mu1: f64,
        mu2: f64,
        avg_degree: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_macro == 0 || n_micro < n_macro || nodes < n_micro {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= macro ({n_macro}) <= micro ({n_micro}) <= nodes ({nodes})"
            )));
        }
        let micro: Vec<usize> = even_split(nodes, n_micro);
        let mut it = micro.into_iter();
        let micro_sizes = even_split(n_micro, n_macro)
            .into_iter()
            .map(|m| it.by_ref().take(m).collect())
            .collect();
        Ok(BenchmarkSpec {
            micro_sizes,
            mu1,
            mu2,
            avg_degree,
            seed,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.micro_sizes.iter().flatten().sum()
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.mu1) || !(0.0..=1.0).contains(&self.mu2) {
            return bad(format!("mixing parameters must lie in [0, 1]: mu1={}, mu2={}", self.mu1, self.mu2));
        }
        if self.mu1 > self.mu2 {
            return bad(format!("mu1 ({}) must not exceed mu2 ({})", self.mu1, self.mu2));
        }
        if !(self.avg_degree > 0.0) {
            return bad("average degree must be positive".into());
        }
        let n = self.n_nodes();
        if n < 10 {
            return bad(format!("benchmark needs at least 10 nodes, got {n}"));
        }
        if self.micro_sizes.iter().any(Vec::is_empty) || self.micro_sizes.iter().flatten().any(|&s| s == 0) {
            return bad("community sizes must be at least 1".into());
        }
        let intra = (1.0 - self.mu2) * self.avg_degree;
        if intra < 1.0 {
            return bad(format!("expected intra-micro degree {intra} is below 1"));
        }
        Ok(())
    }
}

fn even_split(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total / parts + usize::from(i < total % parts))
        .collect()
}

/// A generated graph with its two ground-truth levels.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub graph: Graph,
    pub macro_truth: Partition,
    pub micro_truth: Partition,
}

struct Community {
    size: usize,
    macro_id: usize,
    macro_size: usize,
}

/// Per-pair probabilities that community `c` requests for its three blocks.
fn requested(c: &Community, n: usize, spec: &BenchmarkSpec) -> Result<[f64; 3]> {
    let d = spec.avg_degree;
    let budgets = [
        ((1.0 - spec.mu2) * d, c.size - 1, "its micro community"),
        ((spec.mu2 - spec.mu1) * d, c.macro_size - c.size, "the rest of its macro community"),
        (spec.mu1 * d, n - c.macro_size, "other macro communities"),
    ];
    let mut out = [0.0; 3];
    for (slot, (budget, room, what)) in out.iter_mut().zip(budgets) {
        if budget == 0.0 {
            continue;
        }
        if budget > room as f64 {
            return Err(Error::InvalidConfig(format!(
                "a community of {} nodes cannot place {budget:.2} expected edges in {what} ({room} candidates)",
                c.size
            )));
        }
        *slot = budget / room as f64;
    }
    Ok(out)
}

pub fn generate(spec: &BenchmarkSpec) -> Result<Benchmark> {
    spec.validate()?;
    let n = spec.n_nodes();
    let mut communities = Vec::new();
    for (macro_id, micros) in spec.micro_sizes.iter().enumerate() {
        let macro_size: usize = micros.iter().sum();
        for &size in micros {
            communities.push(Community {
                size,
                macro_id,
                macro_size,
            });
        }
    }
    let probs = communities
        .iter()
        .map(|c| requested(c, n, spec))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Community c occupies positions starts[c]..starts[c + 1] before relabeling.
    let mut starts = vec![0];
    for c in &communities {
        starts.push(starts.last().unwrap() + c.size);
    }
    let mut edges = Vec::new();
    for a in 0..communities.len() {
        for b in a..communities.len() {
            let kind = if a == b {
                0
            } else if communities[a].macro_id == communities[b].macro_id {
                1
            } else {
                2
            };
            let p = 0.5 * (probs[a][kind] + probs[b][kind]);
            sample_block(&mut rng, p, &starts, a, b, &mut edges)?;
        }
    }

    // Random node labels, so communities are not contiguous in index order.
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let edges: Vec<(usize, usize)> = edges.into_iter().map(|(u, v)| (perm[u], perm[v])).collect();
    let mut micro = vec![0; n];
    let mut macro_ = vec![0; n];
    for (c, comm) in communities.iter().enumerate() {
        for pos in starts[c]..starts[c + 1] {
            micro[perm[pos]] = c;
            macro_[perm[pos]] = comm.macro_id;
        }
    }
    let graph = Graph::from_edges(n, &edges)?;
    Ok(Benchmark {
        graph,
        macro_truth: Partition::from_labels(&macro_),
        micro_truth: Partition::from_labels(&micro),
    })
}

/// Bernoulli(p) over every pair of the block between communities `a` and
/// `b` (unordered pairs when `a == b`).
fn sample_block(
    rng: &mut ChaCha8Rng,
    p: f64,
    starts: &[usize],
    a: usize,
    b: usize,
    edges: &mut Vec<(usize, usize)>,
) -> Result<()> {
    if p <= 0.0 {
        return Ok(());
    }
    let (sa, na) = (starts[a], starts[a + 1] - starts[a]);
    let (sb, nb) = (starts[b], starts[b + 1] - starts[b]);
    let total = if a == b { na * (na - 1) / 2 } else { na * nb };
    let pair = |idx: usize| -> (usize, usize) {
        if a == b {
            // Row-major over the strict upper triangle: row i has na − 1 − i pairs.
            let mut i = 0;
            let mut rest = idx;
            while rest >= na - 1 - i {
                rest -= na - 1 - i;
                i += 1;
            }
            (sa + i, sa + i + 1 + rest)
        } else {
            (sa + idx / nb, sb + idx % nb)
        }
    };
    if p >= 1.0 {
        edges.extend((0..total).map(pair));
        return Ok(());
    }
    let skip = Geometric::new(p).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut idx = 0usize;
    loop {
        let gap = skip.sample(rng);
        idx = match usize::try_from(gap).ok().and_then(|g| idx.checked_add(g)) {
            Some(i) if i < total => i,
            _ => break,
        };
        edges.push(pair(idx));
        idx += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_layout() {
        let s = BenchmarkSpec::uniform(2000, 9, 37, 0.1, 0.2, 20.0, 1).unwrap();
        assert_eq!(s.micro_sizes.len(), 9);
        assert_eq!(s.micro_sizes.iter().map(Vec::len).sum::<usize>(), 37);
        assert_eq!(s.n_nodes(), 2000);
        assert!(BenchmarkSpec::uniform(5, 3, 2, 0.1, 0.2, 20.0, 1).is_err());
    }

    #[test]
    fn truth_levels_nest() {
        let s = BenchmarkSpec::uniform(600, 3, 9, 0.1, 0.2, 15.0, 3).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(b.macro_truth.k(), 3);
        assert_eq!(b.micro_truth.k(), 9);
        let mut parent = vec![None; 9];
        for (mi, ma) in b.micro_truth.assignment().iter().zip(b.macro_truth.assignment()) {
            assert_eq!(*parent[*mi].get_or_insert(*ma), *ma);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let s = BenchmarkSpec::uniform(300, 2, 6, 0.1, 0.2, 10.0, 5).unwrap();
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.micro_truth, b.micro_truth);
        let c = generate(&BenchmarkSpec { seed: 6, ..s }).unwrap();
        assert_ne!(a.graph, c.graph);
    }

    #[test]
    fn infeasible_specs() {
        // 5-node communities cannot host 16 intra edges per node.
        let s = BenchmarkSpec::uniform(20, 2, 4, 0.1, 0.2, 20.0, 1).unwrap();
        assert!(generate(&s).is_err());
        let s = BenchmarkSpec::uniform(100, 2, 4, 0.3, 0.2, 10.0, 1).unwrap();
        assert!(generate(&s).is_err());
        // One micro community per macro leaves no room for the (μ₂ − μ₁) share.
        let s = BenchmarkSpec::uniform(200, 4, 4, 0.1, 0.2, 10.0, 1).unwrap();
        assert!(generate(&s).is_err());
        let s = BenchmarkSpec::uniform(200, 4, 4, 0.1, 0.1, 10.0, 1).unwrap();
        assert!(generate(&s).is_ok());
    }

    #[test]
    fn upper_triangle_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut edges = Vec::new();
        sample_block(&mut rng, 1.0, &[0, 4], 0, 0, &mut edges).unwrap();
        assert_eq!(edges, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }
}
