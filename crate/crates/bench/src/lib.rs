//! Shared fixtures for the benchmarks.

use mhksc_core::sampling::{self, Split, SplitSpec};
use mhksc_core::{benchgen, BenchmarkSpec, Graph};

/// Two-level planted-partition graph with 9 macro and 37 micro communities.
pub fn planted(nodes: usize) -> Graph {
    let spec = BenchmarkSpec::uniform(nodes, 9, 37, 0.1, 0.2, 20.0, 1).expect("valid layout");
    benchgen::generate(&spec).expect("feasible benchmark").graph
}

pub fn default_split(g: &Graph) -> Split {
    sampling::make_split(g, &SplitSpec::default()).expect("split fits")
}
