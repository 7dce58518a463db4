//! Nested multilevel partitions and their file formats.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::check_partition;

/// One hierarchy level.
///
/// On the lowest stored level `clusters` hold item indices; on every higher
/// level they hold indices of clusters of the level below.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeLevel {
    /// Level number as reported to users (0-based for validation trees,
    /// 1-based for full-network trees).
    pub level: usize,
    pub threshold: f64,
    pub clusters: Vec<Vec<usize>>,
}

impl TreeLevel {
    pub fn new(level: usize, threshold: f64, clusters: Vec<Vec<usize>>) -> Self {
        TreeLevel {
            level,
            threshold,
            clusters,
        }
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }
}

/// Multilevel hierarchical clustering of `n_items` items, finest level first.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree {
    n_items: usize,
    levels: Vec<TreeLevel>,
}

impl ClusterTree {
    /// Validates that every level partitions the one below.
    pub fn new(n_items: usize, levels: Vec<TreeLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::NotAPartition("tree has no levels".into()));
        }
        let mut below = n_items;
        for lvl in &levels {
            check_partition(&lvl.clusters, below)
                .map_err(|e| Error::NotAPartition(format!("level {}: {e}", lvl.level)))?;
            below = lvl.k();
        }
        Ok(ClusterTree { n_items, levels })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[TreeLevel] {
        &self.levels
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.threshold).collect()
    }

    pub fn cluster_counts(&self) -> Vec<usize> {
        self.levels.iter().map(TreeLevel::k).collect()
    }

    /// Position in `levels()` of the level with the given user-facing number.
    pub fn position_of(&self, level: usize) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| l.level == level)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "level {level} not in tree (levels {}..={})",
                    self.levels[0].level,
                    self.levels[self.levels.len() - 1].level
                ))
            })
    }

    /// Cluster id of every item at level position `idx`.
    pub fn assignment(&self, idx: usize) -> Vec<usize> {
        let mut assign = vec![0; self.n_items];
        for (c, members) in self.levels[0].clusters.iter().enumerate() {
            for &m in members {
                assign[m] = c;
            }
        }
        for lvl in &self.levels[1..=idx] {
            let mut parent = vec![0; lvl.clusters.iter().map(Vec::len).sum()];
            for (c, children) in lvl.clusters.iter().enumerate() {
                for &ch in children {
                    parent[ch] = c;
                }
            }
            assign.iter_mut().for_each(|a| *a = parent[*a]);
        }
        assign
    }

    /// Item members of every cluster at level position `idx`, sorted.
    pub fn members(&self, idx: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.levels[idx].k()];
        for (item, c) in self.assignment(idx).into_iter().enumerate() {
            out[c].push(item);
        }
        out
    }

    /// The same tree without the levels below position `idx`; the level at
    /// `idx` becomes the lowest one and holds item indices.
    pub fn truncate_below(&self, idx: usize) -> ClusterTree {
        let mut levels = self.levels[idx..].to_vec();
        levels[0].clusters = self.members(idx);
        ClusterTree {
            n_items: self.n_items,
            levels,
        }
    }

    /// Parent cluster (at `idx + 1`) of every cluster at level position `idx`.
    pub fn parents(&self, idx: usize) -> Option<Vec<usize>> {
        let up = self.levels.get(idx + 1)?;
        let mut parent = vec![0; self.levels[idx].k()];
        for (c, children) in up.clusters.iter().enumerate() {
            for &ch in children {
                parent[ch] = c;
            }
        }
        Some(parent)
    }

    /// Full structural check: partitions at every level, strict nesting of
    /// consecutive levels, non-increasing cluster counts and thresholds.
    pub fn check_invariants(&self) -> Result<()> {
        let mut prev_assign: Option<Vec<usize>> = None;
        for (idx, lvl) in self.levels.iter().enumerate() {
            let assign = self.assignment(idx);
            let members = self.members(idx);
            check_partition(&members, self.n_items)?;
            if let Some(prev) = &prev_assign {
                // Each finer cluster must map into exactly one coarser cluster.
                let mut parent_of = vec![usize::MAX; self.levels[idx - 1].k()];
                for (item, &p) in prev.iter().enumerate() {
                    let slot = &mut parent_of[p];
                    if *slot == usize::MAX {
                        *slot = assign[item];
                    } else if *slot != assign[item] {
                        return Err(Error::NotAPartition(format!(
                            "cluster {p} of level {} splits across level {}",
                            self.levels[idx - 1].level,
                            lvl.level
                        )));
                    }
                }
                if lvl.k() > self.levels[idx - 1].k() {
                    return Err(Error::NotAPartition("cluster count increases".into()));
                }
                if lvl.threshold < self.levels[idx - 1].threshold {
                    return Err(Error::NotAPartition("thresholds decrease".into()));
                }
            }
            prev_assign = Some(assign);
        }
        Ok(())
    }

    /// Structured export with per-level clusters and membership tables.
    pub fn to_export(&self, labels: &[String]) -> Result<TreeExport> {
        if labels.len() != self.n_items {
            return Err(Error::Mismatch(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n_items
            )));
        }
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(idx, lvl)| ExportLevel {
                level: lvl.level,
                threshold: lvl.threshold,
                k: lvl.k(),
                clusters: lvl
                    .clusters
                    .iter()
                    .enumerate()
                    .map(|(id, c)| ExportCluster {
                        id,
                        members: (idx == 0).then(|| c.clone()),
                        children: (idx > 0).then(|| c.clone()),
                    })
                    .collect(),
                membership: self.assignment(idx),
            })
            .collect();
        Ok(TreeExport {
            format: TREE_FORMAT.to_string(),
            n_nodes: self.n_items,
            node_labels: labels.to_vec(),
            level_thresholds: self.thresholds(),
            levels,
        })
    }

    pub fn save_json(&self, path: &Path, labels: &[String]) -> Result<()> {
        let export = self.to_export(labels)?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, &export).map_err(|e| Error::io(path, e.into()))?;
        writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
    }

    /// Loads a tree export, returning the tree and the node labels.
    pub fn load_json(path: &Path) -> Result<(ClusterTree, Vec<String>)> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let export: TreeExport =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        export.into_tree().map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Graphviz description of the cluster tree, one vertex per cluster.
    /// A synthetic root joins the top level when it has several clusters.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph hierarchy {\n  rankdir=TB;\n  node [shape=ellipse];\n");
        let top = self.levels.len() - 1;
        let sizes: Vec<Vec<usize>> = (0..self.levels.len())
            .map(|idx| self.members(idx).iter().map(Vec::len).collect())
            .collect();
        if self.levels[top].k() > 1 {
            let _ = writeln!(s, "  root [label=\"root\\nn={}\"];", self.n_items);
            for c in 0..self.levels[top].k() {
                let _ = writeln!(s, "  root -> L{}_{c};", self.levels[top].level);
            }
        }
        for (idx, lvl) in self.levels.iter().enumerate().rev() {
            for (c, n) in sizes[idx].iter().enumerate() {
                let _ = writeln!(
                    s,
                    "  L{l}_{c} [label=\"L{l} #{c}\\nn={n}\"];",
                    l = lvl.level
                );
            }
            if idx > 0 {
                let below = self.levels[idx - 1].level;
                for (c, children) in lvl.clusters.iter().enumerate() {
                    for ch in children {
                        let _ = writeln!(s, "  L{}_{c} -> L{below}_{ch};", lvl.level);
                    }
                }
            }
        }
        s.push_str("}\n");
        s
    }

    /// Per-node cluster ids at every level, rows ordered coarsest level
    /// first so that clusters are contiguous at every level (the ordering
    /// that makes a reordered affinity matrix block diagonal).
    pub fn membership_matrix(&self, labels: &[String]) -> String {
        let assigns: Vec<Vec<usize>> = (0..self.levels.len()).map(|i| self.assignment(i)).collect();
        let mut order: Vec<usize> = (0..self.n_items).collect();
        order.sort_by(|&a, &b| {
            assigns
                .iter()
                .rev()
                .map(|asg| asg[a].cmp(&asg[b]))
                .find(|o| o.is_ne())
                .unwrap_or(a.cmp(&b))
        });
        let mut s = String::from("node");
        for lvl in &self.levels {
            let _ = write!(s, "\tL{}", lvl.level);
        }
        s.push('\n');
        for u in order {
            s.push_str(&labels[u]);
            for asg in &assigns {
                let _ = write!(s, "\t{}", asg[u]);
            }
            s.push('\n');
        }
        s
    }
}

const TREE_FORMAT: &str = "mhksc-tree/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeExport {
    pub format: String,
    pub n_nodes: usize,
    pub node_labels: Vec<String>,
    pub level_thresholds: Vec<f64>,
    pub levels: Vec<ExportLevel>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportLevel {
    pub level: usize,
    pub threshold: f64,
    pub k: usize,
    pub clusters: Vec<ExportCluster>,
    /// Cluster id of each node at this level.
    pub membership: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportCluster {
    pub id: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub members: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub children: Option<Vec<usize>>,
}

impl TreeExport {
    pub fn into_tree(self) -> Result<(ClusterTree, Vec<String>)> {
        if self.format != TREE_FORMAT {
            return Err(Error::InvalidConfig(format!("unknown tree format {:?}", self.format)));
        }
        let levels = self
            .levels
            .into_iter()
            .enumerate()
            .map(|(idx, lvl)| {
                let clusters = lvl
                    .clusters
                    .into_iter()
                    .map(|c| if idx == 0 { c.members } else { c.children })
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| {
                        Error::NotAPartition(format!("level {} lacks cluster contents", lvl.level))
                    })?;
                Ok(TreeLevel::new(lvl.level, lvl.threshold, clusters))
            })
            .collect::<Result<Vec<_>>>()?;
        if self.node_labels.len() != self.n_nodes {
            return Err(Error::Mismatch("label count differs from n_nodes".into()));
        }
        Ok((ClusterTree::new(self.n_nodes, levels)?, self.node_labels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ClusterTree {
        ClusterTree::new(
            5,
            vec![
                TreeLevel::new(1, 0.2, vec![vec![0, 3], vec![1], vec![2, 4]]),
                TreeLevel::new(2, 0.4, vec![vec![0, 2], vec![1]]),
                TreeLevel::new(3, 0.6, vec![vec![0, 1]]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn propagation() {
        let t = sample();
        assert_eq!(t.assignment(0), vec![0, 1, 2, 0, 2]);
        assert_eq!(t.assignment(1), vec![0, 1, 0, 0, 0]);
        assert_eq!(t.members(1), vec![vec![0, 2, 3, 4], vec![1]]);
        assert_eq!(t.parents(0), Some(vec![0, 1, 0]));
        assert_eq!(t.parents(2), None);
        t.check_invariants().unwrap();
    }

    #[test]
    fn truncation_keeps_upper_levels() {
        let t = sample().truncate_below(1);
        assert_eq!(t.cluster_counts(), vec![2, 1]);
        assert_eq!(t.levels()[0].level, 2);
        assert_eq!(t.assignment(0), vec![0, 1, 0, 0, 0]);
        t.check_invariants().unwrap();
    }

    #[test]
    fn rejects_non_partitions() {
        let bad = ClusterTree::new(3, vec![TreeLevel::new(1, 0.1, vec![vec![0, 1]])]);
        assert!(bad.is_err());
        let bad = ClusterTree::new(
            2,
            vec![
                TreeLevel::new(1, 0.1, vec![vec![0], vec![1]]),
                TreeLevel::new(2, 0.2, vec![vec![0, 1, 2]]),
            ],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = sample();
        let labels: Vec<String> = ["a", "b", "c", "d", "e"].map(String::from).to_vec();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tree.json");
        t.save_json(&path, &labels).unwrap();
        let (back, l2) = ClusterTree::load_json(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(l2, labels);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"members\""));
        assert!(text.contains("\"children\""));
    }

    #[test]
    fn dot_has_single_root() {
        let t = sample();
        let dot = t.to_dot();
        assert!(!dot.contains("root"));
        assert!(dot.contains("L3_0 -> L2_0;"));
        let two = ClusterTree::new(
            5,
            vec![
                TreeLevel::new(1, 0.2, vec![vec![0, 3], vec![1], vec![2, 4]]),
                TreeLevel::new(2, 0.4, vec![vec![0, 2], vec![1]]),
            ],
        )
        .unwrap();
        let dot = two.to_dot();
        assert_eq!(dot.matches("root ->").count(), 2);
    }

    #[test]
    fn membership_matrix_is_level_ordered() {
        let t = sample();
        let labels: Vec<String> = (0..5).map(|i| i.to_string()).collect();
        let m = t.membership_matrix(&labels);
        let rows: Vec<&str> = m.lines().collect();
        assert_eq!(rows[0], "node\tL1\tL2\tL3");
        assert_eq!(rows.len(), 6);
        let order: Vec<&str> = rows[1..].iter().map(|r| r.split('\t').next().unwrap()).collect();
        assert_eq!(order, vec!["0", "3", "2", "4", "1"]);
    }

    #[test]
    fn level_lookup() {
        let t = sample();
        assert_eq!(t.position_of(2).unwrap(), 1);
        assert!(t.position_of(7).is_err());
    }
}
