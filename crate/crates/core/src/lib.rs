//! Multilevel hierarchical kernel spectral clustering for large sparse
//! undirected networks.
//!
//! The pipeline trains a kernel spectral clustering model on a
//! representative subgraph, projects every node into the model's score
//! space, learns a set of increasing cosine-distance thresholds on the
//! validation projections, and uses them to build a nested hierarchy of the
//! whole network from the bottom up.
//!
//! ```no_run
//! use mhksc_core::{graph, hierarchy, ksc, sampling};
//!
//! let g = graph::load_edge_list("edges.txt".as_ref())?;
//! let split = sampling::make_split(&g, &sampling::SplitSpec::default())?;
//! let kernel = ksc::build_kernel_matrix(&g, &split.train, ksc::DEFAULT_KERNEL_CAP)?;
//! let model = ksc::train(&kernel, 10)?;
//! let p_valid = ksc::project_batch(&model, &g, &split.valid, 1024)?;
//! let (thresholds, _) = hierarchy::determine_thresholds(&p_valid, 0.15, 10_000)?;
//! let p_test = ksc::project_batch(&model, &g, &split.test, 1024)?;
//! let tree = hierarchy::mh_ksc(&p_test, &thresholds, &Default::default())?;
//! println!("{:?}", tree.cluster_counts());
//! # Ok::<(), mhksc_core::Error>(())
//! ```

pub mod benchgen;
pub mod error;
pub mod graph;
pub mod hierarchy;
pub mod ksc;
pub mod metrics;
pub mod sampling;
pub mod tree;

pub use benchgen::{Benchmark, BenchmarkSpec};
pub use error::{Error, ErrorClass, Result};
pub use graph::Graph;
pub use hierarchy::{AffinityMatrix, HierarchyConfig, ThresholdSet};
pub use ksc::{KernelMatrix, KscModel, LatentMatrix};
pub use metrics::Partition;
pub use sampling::{Split, SplitSpec};
pub use tree::{ClusterTree, TreeLevel};
