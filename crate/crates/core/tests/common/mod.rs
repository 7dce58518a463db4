#![allow(dead_code)]

use mhksc_core::{AffinityMatrix, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Erdős–Rényi graph plus a ring, so every node has degree at least 2.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = (0..n).map(|u| (u, (u + 1) % n)).collect();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

/// Dense planted partition: `blocks` groups of `size` nodes.
pub fn block_graph(blocks: usize, size: usize, p_in: f64, p_out: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = blocks * size;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if u / size == v / size { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    for u in 0..n {
        let v = (u / size) * size + (u + 1) % size;
        edges.push((u, v));
    }
    Graph::from_edges(n, &edges).unwrap()
}

/// Symmetric distance matrix with zero diagonal and values drawn from a
/// small grid, so ties and threshold-equal entries occur often.
pub fn random_affinity(n: usize, rng: &mut ChaCha8Rng) -> AffinityMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random_range(0..40) as f64 / 20.0;
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    AffinityMatrix::from_rows(&rows).unwrap()
}

/// Greedy max-order clustering, recounting every round from scratch.
pub fn naive_greedy_max_order(s: &AffinityMatrix, t: f64) -> Vec<Vec<usize>> {
    let n = s.size();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    while !remaining.is_empty() {
        let close = |i: usize, j: usize| i == j || s.get(i, j) < t;
        let mut best = remaining[0];
        let mut best_count = 0;
        for &i in &remaining {
            let c = remaining.iter().filter(|&&j| close(i, j)).count();
            if c > best_count {
                best = i;
                best_count = c;
            }
        }
        let members: Vec<usize> = remaining.iter().copied().filter(|&j| close(best, j)).collect();
        remaining.retain(|j| !members.contains(j));
        out.push(members);
    }
    out
}

/// Adjusted Rand index by explicit enumeration of all item pairs.
pub fn brute_ari(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut in_a, mut in_b) = (0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            both += (sa && sb) as u8 as f64;
            in_a += sa as u8 as f64;
            in_b += sb as u8 as f64;
        }
    }
    let total = (n * (n - 1) / 2) as f64;
    let expected = in_a * in_b / total;
    let max = 0.5 * (in_a + in_b);
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

/// Variation of information normalized by ln n, from joint probabilities.
pub fn brute_vi(a: &[usize], b: &[usize]) -> f64 {
    use std::collections::HashMap;
    let n = a.len() as f64;
    let mut pa: HashMap<usize, f64> = HashMap::new();
    let mut pb: HashMap<usize, f64> = HashMap::new();
    let mut pab: HashMap<(usize, usize), f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *pa.entry(x).or_default() += 1.0 / n;
        *pb.entry(y).or_default() += 1.0 / n;
        *pab.entry((x, y)).or_default() += 1.0 / n;
    }
    let mut vi = 0.0;
    for (&(x, y), &r) in &pab {
        vi -= r * ((r / pa[&x]).ln() + (r / pb[&y]).ln());
    }
    if a.len() < 2 {
        return 0.0;
    }
    vi / n.ln()
}
