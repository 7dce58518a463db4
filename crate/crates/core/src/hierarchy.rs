//! Threshold discovery on validation projections and bottom-up multilevel
//! clustering of the full network.
//!
//! Every level works on a dense cosine-distance affinity matrix. The ground
//! level of the full network is never materialized as an `N × N` matrix:
//! it is clustered by a first-order scan, and only the cluster-to-cluster
//! affinity is stored.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ksc::LatentMatrix;
use crate::tree::{ClusterTree, TreeLevel};

/// Default affinity-matrix bound, also the default ground-level caps.
pub const DEFAULT_AFFINITY_CAP: usize = 10_000;

/// Default base threshold.
pub const DEFAULT_T0: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub t0: f64,
    /// Largest ground-level cluster of the full network.
    pub max_cluster: usize,
    /// Largest number of ground-level clusters of the full network.
    pub max_ground: usize,
    /// Largest validation set for which a dense affinity is built.
    pub affinity_cap: usize,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            t0: DEFAULT_T0,
            max_cluster: DEFAULT_AFFINITY_CAP,
            max_ground: DEFAULT_AFFINITY_CAP,
            affinity_cap: DEFAULT_AFFINITY_CAP,
        }
    }
}

impl HierarchyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0 < 2.0) {
            return Err(Error::InvalidConfig(format!(
                "t0 must lie in (0, 2), got {}",
                self.t0
            )));
        }
        for (name, v) in [
            ("max_cluster", self.max_cluster),
            ("max_ground", self.max_ground),
            ("affinity_cap", self.affinity_cap),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Square symmetric matrix of cosine distances, zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    size: usize,
    values: Vec<f64>,
}

impl AffinityMatrix {
    /// Wraps a row-major `size × size` matrix; checks the shape only.
    pub fn new(size: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::Mismatch(format!(
                "{} values for a {size}×{size} matrix",
                values.len()
            )));
        }
        Ok(AffinityMatrix { size, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Mismatch("affinity rows must be square".into()));
        }
        Self::new(n, rows.concat())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }

    /// Smallest off-diagonal entry.
    pub fn min_off_diagonal(&self) -> Option<f64> {
        (0..self.size)
            .flat_map(|i| (0..self.size).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .min_by(f64::total_cmp)
    }
}

/// `1 − cos(e1, e2)`, in `[0, 2]`. A zero vector is treated as orthogonal
/// to everything, giving distance 1.
pub fn cos_dist(e1: &[f64], e2: &[f64]) -> f64 {
    debug_assert_eq!(e1.len(), e2.len());
    let dot: f64 = e1.iter().zip(e2).map(|(a, b)| a * b).sum();
    let n1 = e1.iter().map(|x| x * x).sum::<f64>().sqrt();
    let n2 = e2.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (n1 * n2)).clamp(0.0, 2.0)
}

/// Rows scaled to unit length; zero rows stay zero.
fn unit_rows(p: &LatentMatrix) -> Vec<f64> {
    let dim = p.dim();
    let mut out = p.as_slice().to_vec();
    out.par_chunks_mut(dim).for_each(|r| {
        let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            r.iter_mut().for_each(|x| *x /= n);
        }
    });
    out
}

#[inline]
fn unit_dist(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - dot).clamp(0.0, 2.0)
}

/// Full pairwise cosine-distance matrix between the rows of `p`.
pub fn build_affinity(p: &LatentMatrix, cap: usize) -> Result<AffinityMatrix> {
    let n = p.n_rows();
    if n > cap {
        return Err(Error::CapExceeded {
            what: "affinity matrix",
            size: n,
            cap,
        });
    }
    let dim = p.dim();
    let unit = unit_rows(p);
    let mut values = vec![0.0; n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let ui = &unit[i * dim..(i + 1) * dim];
        for (j, v) in row.iter_mut().enumerate() {
            if j != i {
                *v = unit_dist(ui, &unit[j * dim..(j + 1) * dim]);
            }
        }
    });
    Ok(AffinityMatrix { size: n, values })
}

/// Greedy clustering that always seeds on the remaining index with the most
/// remaining neighbors strictly closer than `t` (lowest index on ties).
///
/// Each cluster is the seed plus every remaining index within `t` of the
/// seed; members are sorted, clusters come in selection order.
pub fn greedy_max_order(s: &AffinityMatrix, t: f64) -> Vec<Vec<usize>> {
    let n = s.size();
    let mut counts: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|i| s.row(i).iter().enumerate().filter(|&(j, &d)| j == i || d < t).count())
        .collect();
    let mut alive = vec![true; n];
    let mut remaining = n;
    let mut clusters = Vec::new();
    while remaining > 0 {
        let mut seed = usize::MAX;
        for i in 0..n {
            if alive[i] && (seed == usize::MAX || counts[i] > counts[seed]) {
                seed = i;
            }
        }
        let row = s.row(seed);
        let members: Vec<usize> = (0..n)
            .filter(|&j| alive[j] && (j == seed || row[j] < t))
            .collect();
        for &j in &members {
            alive[j] = false;
        }
        remaining -= members.len();
        let alive_ref = &alive;
        counts.par_iter_mut().enumerate().for_each(|(i, c)| {
            if alive_ref[i] {
                let r = s.row(i);
                *c -= members.iter().filter(|&&j| r[j] < t).count();
            }
        });
        clusters.push(members);
    }
    clusters
}

/// Ground-level clustering of the full network.
///
/// The first unassigned row seeds a cluster of every unassigned row within
/// `t1` of it, keeping at most the first `max_cluster` by row order. Returns
/// the clusters and the cluster-level affinity: the mean pairwise cosine
/// distance between member projections.
pub fn greedy_first_order(
    p: &LatentMatrix,
    t1: f64,
    max_cluster: usize,
    max_ground: usize,
) -> Result<(AffinityMatrix, Vec<Vec<usize>>)> {
    if !(t1 > 0.0) {
        return Err(Error::InvalidConfig(format!("threshold must be positive, got {t1}")));
    }
    if max_cluster == 0 {
        return Err(Error::InvalidConfig("max_cluster must be positive".into()));
    }
    let dim = p.dim();
    let unit = unit_rows(p);
    let urow = |i: usize| &unit[i * dim..(i + 1) * dim];

    let mut remaining: Vec<usize> = (0..p.n_rows()).collect();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    while let Some(&seed) = remaining.first() {
        if clusters.len() == max_ground {
            return Err(Error::CapExceeded {
                what: "ground-level cluster count",
                size: clusters.len() + 1,
                cap: max_ground,
            });
        }
        let us = urow(seed);
        let mut members: Vec<usize> = remaining
            .par_iter()
            .copied()
            .filter(|&j| j == seed || unit_dist(us, urow(j)) < t1)
            .collect();
        members.truncate(max_cluster);
        let mut taken = members.iter().peekable();
        remaining.retain(|j| {
            if taken.peek() == Some(&j) {
                taken.next();
                false
            } else {
                true
            }
        });
        clusters.push(members);
    }

    // mean_{m∈A, l∈B} (1 − û_m·û_l) = 1 − ū_A·ū_B with ū the mean unit vector.
    let k = clusters.len();
    let centroids: Vec<f64> = clusters
        .par_iter()
        .flat_map_iter(|c| {
            let mut acc = vec![0.0; dim];
            for &m in c {
                for (a, x) in acc.iter_mut().zip(urow(m)) {
                    *a += x;
                }
            }
            let len = c.len() as f64;
            acc.into_iter().map(move |a| a / len)
        })
        .collect();
    let mut values = vec![0.0; k * k];
    values.par_chunks_mut(k).enumerate().for_each(|(a, row)| {
        let ca = &centroids[a * dim..(a + 1) * dim];
        for (b, v) in row.iter_mut().enumerate() {
            if b != a {
                *v = unit_dist(ca, &centroids[b * dim..(b + 1) * dim]);
            }
        }
    });
    Ok((AffinityMatrix { size: k, values }, clusters))
}

/// Checks that `clusters` is a partition of `0..n` into nonempty sets.
pub fn check_partition(clusters: &[Vec<usize>], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for c in clusters {
        if c.is_empty() {
            return Err(Error::NotAPartition("empty cluster".into()));
        }
        for &m in c {
            if m >= n {
                return Err(Error::NotAPartition(format!("index {m} out of range {n}")));
            }
            if std::mem::replace(&mut seen[m], true) {
                return Err(Error::NotAPartition(format!("index {m} assigned twice")));
            }
        }
    }
    if let Some(m) = seen.iter().position(|&s| !s) {
        return Err(Error::NotAPartition(format!("index {m} unassigned")));
    }
    Ok(())
}

/// Average-linkage affinity between the given clusters of `s`'s indices.
pub fn coarsen_affinity(s: &AffinityMatrix, clusters: &[Vec<usize>]) -> Result<AffinityMatrix> {
    let n = s.size();
    check_partition(clusters, n)?;
    let k = clusters.len();
    let mut values = vec![0.0; k * k];
    values.par_chunks_mut(k).enumerate().for_each(|(a, out)| {
        let mut sums = vec![0.0; n];
        for &m in &clusters[a] {
            for (acc, v) in sums.iter_mut().zip(s.row(m)) {
                *acc += v;
            }
        }
        let na = clusters[a].len() as f64;
        for (b, cb) in clusters.iter().enumerate().skip(a + 1) {
            let total: f64 = cb.iter().map(|&l| sums[l]).sum();
            out[b] = (total / (na * cb.len() as f64)).clamp(0.0, 2.0);
        }
    });
    // Mirror the upper triangle so the result is exactly symmetric.
    for a in 0..k {
        for b in 0..a {
            values[a * k + b] = values[b * k + a];
        }
    }
    Ok(AffinityMatrix { size: k, values })
}

/// Mean over rows of the smallest off-diagonal distance.
pub fn next_threshold(s: &AffinityMatrix) -> Result<f64> {
    let n = s.size();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "threshold needs at least 2 clusters, got {n}"
        )));
    }
    let total: f64 = (0..n)
        .map(|i| {
            s.row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &d)| d)
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / n as f64)
}

/// Distance thresholds, one per hierarchy level, starting at the base `t⁽⁰⁾`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdSet(Vec<f64>);

impl ThresholdSet {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::InvalidConfig("empty threshold set".into()));
        }
        if thresholds.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig("thresholds must be non-decreasing".into()));
        }
        Ok(ThresholdSet(thresholds))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn base(&self) -> f64 {
        self.0[0]
    }
}

/// Learns the threshold set from validation projections.
///
/// Level 0 clusters the validation rows at `t0`; each further level
/// coarsens the affinity, takes the next threshold as the mean row minimum
/// (raised to the previous threshold if lower) and clusters again, until a
/// single cluster remains. When a threshold produces no merge, which happens
/// only when every row minimum equals it, the threshold is raised just above
/// the closest pair so that the level makes progress.
pub fn determine_thresholds(
    p_valid: &LatentMatrix,
    t0: f64,
    cap: usize,
) -> Result<(ThresholdSet, ClusterTree)> {
    if !(t0 > 0.0 && t0 < 2.0) {
        return Err(Error::InvalidConfig(format!("t0 must lie in (0, 2), got {t0}")));
    }
    if p_valid.n_rows() == 0 {
        return Err(Error::InvalidConfig("validation set is empty".into()));
    }
    let mut s = build_affinity(p_valid, cap)?;
    let mut clusters = greedy_max_order(&s, t0);
    let mut thresholds = vec![t0];
    let mut levels = vec![TreeLevel::new(0, t0, clusters.clone())];
    while clusters.len() > 1 {
        let k = clusters.len();
        s = coarsen_affinity(&s, &clusters)?;
        let prev = *thresholds.last().expect("nonempty");
        let mut t = next_threshold(&s)?.max(prev);
        let mut next = greedy_max_order(&s, t);
        if next.len() == k {
            t = s.min_off_diagonal().expect("k >= 2").next_up().max(t);
            next = greedy_max_order(&s, t);
        }
        debug_assert!(next.len() < k);
        thresholds.push(t);
        levels.push(TreeLevel::new(levels.len(), t, next.clone()));
        clusters = next;
    }
    let tree = ClusterTree::new(p_valid.n_rows(), levels)?;
    Ok((ThresholdSet::new(thresholds)?, tree))
}

/// Builds the multilevel hierarchy of all projected nodes.
///
/// Level 1 is the first-order ground clustering at `t⁽¹⁾`; level `h > 1`
/// clusters the level-`h−1` clusters at `t⁽ʰ⁾`. Stops when one cluster
/// remains or the thresholds run out. A threshold set holding only the base
/// threshold uses it for level 1.
pub fn mh_ksc(p_test: &LatentMatrix, ts: &ThresholdSet, cfg: &HierarchyConfig) -> Result<ClusterTree> {
    cfg.validate()?;
    let th = ts.as_slice();
    let t1 = th.get(1).copied().unwrap_or(th[0]);
    let (mut s, ground) = greedy_first_order(p_test, t1, cfg.max_cluster, cfg.max_ground)?;
    let mut k = ground.len();
    let mut levels = vec![TreeLevel::new(1, t1, ground)];
    for (h, &t) in th.iter().enumerate().skip(2) {
        if k == 1 {
            break;
        }
        let next = greedy_max_order(&s, t);
        k = next.len();
        if k > 1 {
            s = coarsen_affinity(&s, &next)?;
        }
        levels.push(TreeLevel::new(h, t, next));
    }
    ClusterTree::new(p_test.n_rows(), levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aff(rows: &[&[f64]]) -> AffinityMatrix {
        AffinityMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn cos_dist_examples() {
        assert!(cos_dist(&[1.0, 2.0], &[1.0, 2.0]).abs() < 1e-15);
        assert!((cos_dist(&[1.0, -2.0], &[-1.0, 2.0]) - 2.0).abs() < 1e-15);
        assert_eq!(cos_dist(&[1.0, 0.0], &[0.0, 3.0]), 1.0);
        assert_eq!(cos_dist(&[0.0, 0.0], &[0.0, 3.0]), 1.0);
    }

    #[test]
    fn affinity_examples() {
        let p = LatentMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let s = build_affinity(&p, 10).unwrap();
        assert!(s.values.iter().all(|&v| v.abs() < 1e-15));
        let p = LatentMatrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, -2.0]]).unwrap();
        let s = build_affinity(&p, 10).unwrap();
        assert_eq!(s.get(0, 1), 2.0);
        assert_eq!(s.get(1, 0), 2.0);
        assert_eq!(s.get(0, 0), 0.0);
        assert!(matches!(build_affinity(&p, 1), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn gmo_examples() {
        let s = aff(&[&[0.0, 0.1, 0.9], &[0.1, 0.0, 0.9], &[0.9, 0.9, 0.0]]);
        assert_eq!(greedy_max_order(&s, 0.2), vec![vec![0, 1], vec![2]]);
        assert_eq!(greedy_max_order(&s, 0.05).len(), 3);
        assert_eq!(greedy_max_order(&s, 1.0), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn gmo_star_not_clique() {
        // 1 is close to 0 and 2, but 0 and 2 are far apart: seed 1 takes both.
        let s = aff(&[&[0.0, 0.1, 0.5], &[0.1, 0.0, 0.1], &[0.5, 0.1, 0.0]]);
        assert_eq!(greedy_max_order(&s, 0.2), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn first_order_examples() {
        let p = LatentMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 0.05],
            vec![1.0, -0.05],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let (s, c) = greedy_first_order(&p, 0.15, 10, 10).unwrap();
        assert_eq!(c, vec![vec![0, 1, 2], vec![3]]);
        assert_eq!(s.size(), 2);

        let p = LatentMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.01], vec![1.0, 0.02]]).unwrap();
        let (_, c) = greedy_first_order(&p, 0.15, 2, 10).unwrap();
        assert_eq!(c, vec![vec![0, 1], vec![2]]);

        let p = LatentMatrix::from_rows(&vec![vec![0.3, 0.4]; 5]).unwrap();
        let (s, c) = greedy_first_order(&p, 0.15, usize::MAX, 10).unwrap();
        assert_eq!(c, vec![vec![0, 1, 2, 3, 4]]);
        assert_eq!(s.size(), 1);
        assert_eq!(s.get(0, 0), 0.0);
    }

    #[test]
    fn first_order_ground_cap() {
        let p = LatentMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(matches!(
            greedy_first_order(&p, 0.15, 10, 2),
            Err(Error::CapExceeded { .. })
        ));
        assert!(greedy_first_order(&p, 0.15, 10, 3).is_ok());
    }

    #[test]
    fn first_order_zero_seed_joins_itself() {
        let p = LatentMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let (_, c) = greedy_first_order(&p, 0.15, 10, 10).unwrap();
        assert_eq!(c, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn coarsen_examples() {
        let s = aff(&[&[0.0, 0.2], &[0.2, 0.0]]);
        assert_eq!(coarsen_affinity(&s, &[vec![0], vec![1]]).unwrap(), s);

        let s = aff(&[&[0.0, 0.1, 0.7], &[0.1, 0.0, 0.4], &[0.7, 0.4, 0.0]]);
        let c = coarsen_affinity(&s, &[vec![0, 1], vec![2]]).unwrap();
        assert!((c.get(0, 1) - (0.7 + 0.4) / 2.0).abs() < 1e-15);
        assert_eq!(c.get(0, 1), c.get(1, 0));
        assert_eq!(c.get(0, 0), 0.0);

        assert!(coarsen_affinity(&s, &[vec![0, 1]]).is_err());
        assert!(coarsen_affinity(&s, &[vec![0, 1], vec![1, 2]]).is_err());
    }

    #[test]
    fn threshold_examples() {
        let s = aff(&[&[0.0, 0.2, 0.5], &[0.2, 0.0, 0.4], &[0.5, 0.4, 0.0]]);
        assert!((next_threshold(&s).unwrap() - 0.8 / 3.0).abs() < 1e-15);
        let s = aff(&[&[0.0, 0.3, 0.3], &[0.3, 0.0, 0.3], &[0.3, 0.3, 0.0]]);
        assert!((next_threshold(&s).unwrap() - 0.3).abs() < 1e-15);
        let s = aff(&[&[0.0, 0.7], &[0.7, 0.0]]);
        assert_eq!(next_threshold(&s).unwrap(), 0.7);
        assert!(next_threshold(&aff(&[&[0.0]])).is_err());
    }

    #[test]
    fn thresholds_identical_projections() {
        let p = LatentMatrix::from_rows(&vec![vec![1.0, 2.0]; 6]).unwrap();
        let (ts, tree) = determine_thresholds(&p, 0.15, 100).unwrap();
        assert_eq!(ts.as_slice(), &[0.15]);
        assert_eq!(tree.n_levels(), 1);
        assert_eq!(tree.cluster_counts(), vec![1]);
    }

    #[test]
    fn thresholds_two_groups() {
        let mut rows = vec![vec![1.0, 0.0]; 4];
        rows.extend(vec![vec![0.0, 1.0]; 3]);
        let p = LatentMatrix::from_rows(&rows).unwrap();
        let (ts, tree) = determine_thresholds(&p, 0.15, 100).unwrap();
        // Level 0: two groups at distance 1; level 1: the lone pair is at
        // exactly the mean row minimum, so the threshold is raised past it.
        assert_eq!(tree.cluster_counts(), vec![2, 1]);
        assert_eq!(ts.len(), 2);
        assert!(ts.as_slice()[1] > 1.0 && ts.as_slice()[1] < 1.0 + 1e-12);
    }

    #[test]
    fn thresholds_bad_t0() {
        let p = LatentMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(determine_thresholds(&p, 0.0, 10).is_err());
        assert!(determine_thresholds(&p, 2.0, 10).is_err());
    }

    #[test]
    fn threshold_set_must_be_sorted() {
        assert!(ThresholdSet::new(vec![0.15, 0.1]).is_err());
        assert!(ThresholdSet::new(vec![]).is_err());
    }

    #[test]
    fn mh_ksc_single_threshold_uses_base() {
        let p = LatentMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let ts = ThresholdSet::new(vec![0.15]).unwrap();
        let tree = mh_ksc(&p, &ts, &HierarchyConfig::default()).unwrap();
        assert_eq!(tree.n_levels(), 1);
        assert_eq!(tree.levels()[0].threshold, 0.15);
        assert_eq!(tree.cluster_counts(), vec![2]);
    }
}
