//! Representative subset selection and the train/validation/test split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Sizes of the training and validation subsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub valid_fraction: f64,
    /// Upper bound on either subset; bounds the dense kernel and affinity matrices.
    pub cap: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.15,
            valid_fraction: 0.15,
            cap: 10_000,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("train_fraction", self.train_fraction),
            ("valid_fraction", self.valid_fraction),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in (0, 1], got {f}"
                )));
            }
        }
        if self.cap == 0 {
            return Err(Error::InvalidConfig("cap must be positive".into()));
        }
        Ok(())
    }

    /// Effective `(N_tr, N_valid)` for a graph of `n_nodes` nodes.
    pub fn sizes(&self, n_nodes: usize) -> (usize, usize) {
        let size = |f: f64| ((f * n_nodes as f64).round() as usize).min(self.cap);
        (size(self.train_fraction), size(self.valid_fraction))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    /// Always the whole node set.
    pub test: Vec<usize>,
}

/// Degree-greedy representative subset selection with neighborhood
/// deactivation.
///
/// Nodes are visited by decreasing degree (lowest index first on ties). A
/// visited node that is still active is selected and its neighbors are
/// deactivated for the rest of the round. When a round ends short of `size`,
/// every unselected node is reactivated and a new round starts. The result
/// is in selection order.
pub fn furs_select(g: &Graph, size: usize) -> Result<Vec<usize>> {
    furs_select_excluding(g, size, &[])
}

/// Same as [`furs_select`], with `excluded` nodes never eligible.
pub fn furs_select_excluding(g: &Graph, size: usize, excluded: &[usize]) -> Result<Vec<usize>> {
    let n = g.n_nodes();
    let mut eligible = vec![true; n];
    for &u in excluded {
        if u >= n {
            return Err(Error::NodeOutOfRange { index: u, n_nodes: n });
        }
        eligible[u] = false;
    }
    let available = eligible.iter().filter(|&&e| e).count();
    if size > available {
        return Err(Error::InvalidConfig(format!(
            "cannot select {size} nodes, only {available} available"
        )));
    }

    let mut order: Vec<usize> = (0..n).filter(|&u| eligible[u]).collect();
    order.sort_by_key(|&u| (std::cmp::Reverse(g.degree(u)), u));

    let mut selected = Vec::with_capacity(size);
    let mut taken = vec![false; n];
    let mut active = vec![true; n];
    while selected.len() < size {
        for &u in &order {
            if selected.len() == size {
                break;
            }
            if taken[u] || !active[u] {
                continue;
            }
            taken[u] = true;
            selected.push(u);
            for &v in g.neighbors(u) {
                active[v] = false;
            }
        }
        active.iter_mut().for_each(|a| *a = true);
        // Drop exhausted entries so later rounds only scan candidates.
        order.retain(|&u| !taken[u]);
    }
    Ok(selected)
}

/// Uniform random subset, for comparison against [`furs_select`].
pub fn uniform_select(g: &Graph, size: usize, seed: u64) -> Result<Vec<usize>> {
    let n = g.n_nodes();
    if size > n {
        return Err(Error::InvalidConfig(format!(
            "cannot select {size} of {n} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(&mut rng);
    nodes.truncate(size);
    Ok(nodes)
}

/// Selects disjoint training and validation sets; the test set is every node.
pub fn make_split(g: &Graph, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let n = g.n_nodes();
    let (n_tr, n_valid) = spec.sizes(n);
    if n_tr < 2 {
        return Err(Error::InvalidConfig(format!(
            "training set of {n_tr} nodes is too small (need at least 2)"
        )));
    }
    if n_valid < 1 {
        return Err(Error::InvalidConfig("validation set is empty".into()));
    }
    if n_tr + n_valid > n {
        return Err(Error::InvalidConfig(format!(
            "training ({n_tr}) and validation ({n_valid}) sets do not fit in {n} nodes"
        )));
    }
    let train = furs_select(g, n_tr)?;
    let valid = furs_select_excluding(g, n_valid, &train)?;
    Ok(Split {
        train,
        valid,
        test: (0..n).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> Graph {
        Graph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]).unwrap()
    }

    #[test]
    fn star_picks_hub() {
        let g = Graph::from_edges(5, &[(3, 0), (3, 1), (3, 2), (3, 4)]).unwrap();
        assert_eq!(furs_select(&g, 1).unwrap(), vec![3]);
    }

    #[test]
    fn two_triangles_one_each() {
        // Exhaustive: every pair inside one triangle is adjacent, so the
        // second pick of the first round must come from the other triangle.
        let sel = furs_select(&two_triangles(), 2).unwrap();
        assert_eq!(sel.len(), 2);
        assert_ne!(sel[0] / 3, sel[1] / 3);
        assert_eq!(sel, vec![0, 3]);
    }

    #[test]
    fn full_selection_and_reactivation() {
        let g = two_triangles();
        let mut sel = furs_select(&g, 6).unwrap();
        assert_eq!(sel[..2], [0, 3]);
        sel.sort();
        assert_eq!(sel, (0..6).collect::<Vec<_>>());
        assert!(furs_select(&g, 7).is_err());
    }

    #[test]
    fn excluded_nodes_are_never_picked() {
        let g = two_triangles();
        let sel = furs_select_excluding(&g, 2, &[0, 3]).unwrap();
        assert_eq!(sel, vec![1, 4]);
        assert!(furs_select_excluding(&g, 5, &[0, 3]).is_err());
    }

    fn ring(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn split_sizes() {
        let g = ring(100);
        let s = make_split(&g, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (15, 15, 100));
        assert!(s.train.iter().all(|u| !s.valid.contains(u)));
    }

    #[test]
    fn split_cap() {
        let spec = SplitSpec::default();
        assert_eq!(spec.sizes(1_134_890), (10_000, 10_000));
    }

    #[test]
    fn split_too_large() {
        let g = ring(10);
        let spec = SplitSpec {
            train_fraction: 1.0,
            ..SplitSpec::default()
        };
        assert!(matches!(make_split(&g, &spec), Err(Error::InvalidConfig(_))));
        let spec = SplitSpec {
            train_fraction: 0.0,
            ..SplitSpec::default()
        };
        assert!(make_split(&g, &spec).is_err());
    }

    #[test]
    fn uniform_is_seeded() {
        let g = ring(50);
        assert_eq!(uniform_select(&g, 10, 7).unwrap(), uniform_select(&g, 10, 7).unwrap());
        assert_ne!(uniform_select(&g, 10, 7).unwrap(), uniform_select(&g, 10, 8).unwrap());
    }
}
