//! End-to-end commands behind the `mhksc` binary: benchmark generation,
//! clustering, evaluation and export.

use std::fs::{self, File};
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mhksc_core::benchgen::{self, BenchmarkSpec};
use mhksc_core::error::{Error, Result};
use mhksc_core::graph::{self, Graph};
use mhksc_core::hierarchy::{self, HierarchyConfig};
use mhksc_core::ksc;
use mhksc_core::metrics::{self, Partition};
use mhksc_core::sampling::{self, SplitSpec};
use mhksc_core::tree::ClusterTree;

pub const EDGES_FILE: &str = "graph.edges";
pub const MACRO_TRUTH_FILE: &str = "truth_macro.part";
pub const MICRO_TRUTH_FILE: &str = "truth_micro.part";

pub const TREE_FILE: &str = "tree.json";
pub const TREE_DOT_FILE: &str = "tree.dot";
pub const MEMBERSHIP_FILE: &str = "membership.tsv";
pub const THRESHOLDS_FILE: &str = "thresholds.txt";
pub const MODEL_FILE: &str = "model.json";
pub const MANIFEST_FILE: &str = "manifest.json";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, &text)
}

/// Paths written by [`generate`].
#[derive(Debug, Clone)]
pub struct GeneratedFiles {
    pub edges: PathBuf,
    pub macro_truth: PathBuf,
    pub micro_truth: PathBuf,
}

/// Writes a benchmark graph and its two ground-truth partitions into `out`.
pub fn generate(spec: &BenchmarkSpec, out: &Path) -> Result<GeneratedFiles> {
    let bench = benchgen::generate(spec)?;
    create_dir(out)?;
    let files = GeneratedFiles {
        edges: out.join(EDGES_FILE),
        macro_truth: out.join(MACRO_TRUTH_FILE),
        micro_truth: out.join(MICRO_TRUTH_FILE),
    };
    bench.graph.save_edge_list(&files.edges)?;
    bench.macro_truth.save(&files.macro_truth, &bench.graph)?;
    bench.micro_truth.save(&files.micro_truth, &bench.graph)?;
    info!(
        "generated {} nodes, {} edges, {} macro / {} micro communities",
        bench.graph.n_nodes(),
        bench.graph.n_edges(),
        bench.macro_truth.k(),
        bench.micro_truth.k()
    );
    Ok(files)
}

/// Everything that determines a clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub t0: f64,
    pub maxk: usize,
    pub train_fraction: f64,
    pub valid_fraction: f64,
    /// Bound on training/validation sets and on every dense affinity.
    pub cap: usize,
    /// Largest ground-level cluster.
    pub max_cluster: usize,
    /// Largest number of ground-level clusters.
    pub max_ground: usize,
    /// Nodes per projection task.
    pub chunk: usize,
    pub seed: u64,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        RunConfig {
            input: input.into(),
            output: output.into(),
            t0: hierarchy::DEFAULT_T0,
            maxk: 10,
            train_fraction: 0.15,
            valid_fraction: 0.15,
            cap: 10_000,
            max_cluster: 10_000,
            max_ground: 10_000,
            chunk: 1024,
            seed: 0,
            threads: None,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            valid_fraction: self.valid_fraction,
            cap: self.cap,
            seed: self.seed,
        }
    }

    pub fn hierarchy_config(&self) -> HierarchyConfig {
        HierarchyConfig {
            t0: self.t0,
            max_cluster: self.max_cluster,
            max_ground: self.max_ground.min(self.cap),
            affinity_cap: self.cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.split_spec().validate()?;
        self.hierarchy_config().validate()?;
        if self.maxk < 2 {
            return Err(Error::InvalidConfig(format!("maxk must be at least 2, got {}", self.maxk)));
        }
        if self.chunk == 0 {
            return Err(Error::InvalidConfig("chunk must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: usize,
    pub threshold: f64,
    pub k: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputSummary {
    pub path: PathBuf,
    pub sha256: String,
    pub n_nodes: usize,
    pub n_edges: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub input: InputSummary,
    pub n_train: usize,
    pub n_valid: usize,
    pub eigenvalues: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub validation_levels: Vec<LevelSummary>,
    pub levels: Vec<LevelSummary>,
    pub timings_ms: Vec<(String, u128)>,
}

/// Result of a clustering run, as written to disk.
#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub tree: ClusterTree,
    pub labels: Vec<String>,
    pub manifest: Manifest,
}

fn sha256_file(path: &Path) -> Result<String> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn summarize(tree: &ClusterTree) -> Vec<LevelSummary> {
    tree.levels()
        .iter()
        .map(|l| LevelSummary {
            level: l.level,
            threshold: l.threshold,
            k: l.k(),
        })
        .collect()
}

fn write_node_list(path: &Path, g: &Graph, nodes: &[usize]) -> Result<()> {
    let mut s = String::new();
    for &u in nodes {
        s.push_str(&g.label(u));
        s.push('\n');
    }
    write_file(path, &s)
}

/// Runs the full pipeline: split, train, validation projection, threshold
/// discovery, full projection and multilevel clustering. Writes every
/// intermediate and the final tree into `config.output`.
pub fn cluster(config: &RunConfig) -> Result<ClusterOutcome> {
    config.validate()?;
    match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(|| run_cluster(config)),
        None => run_cluster(config),
    }
}

fn run_cluster(config: &RunConfig) -> Result<ClusterOutcome> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<(String, u128)>| {
        let ms = clock.elapsed().as_millis();
        info!("{name}: {ms} ms");
        timings.push((name.to_string(), ms));
        clock = Instant::now();
    };
    let out = &config.output;
    create_dir(out)?;

    let g = graph::load_edge_list(&config.input)?;
    let input = InputSummary {
        path: config.input.clone(),
        sha256: sha256_file(&config.input)?,
        n_nodes: g.n_nodes(),
        n_edges: g.n_edges(),
    };
    lap("load", &mut timings);

    let split = sampling::make_split(&g, &config.split_spec())?;
    write_node_list(&out.join("train_nodes.txt"), &g, &split.train)?;
    write_node_list(&out.join("valid_nodes.txt"), &g, &split.valid)?;
    lap("split", &mut timings);

    let model = {
        let kernel = ksc::build_kernel_matrix(&g, &split.train, config.cap)?;
        lap("kernel", &mut timings);
        ksc::train(&kernel, config.maxk)?
    };
    model.save(&out.join(MODEL_FILE))?;
    lap("train", &mut timings);

    let p_valid = ksc::project_batch(&model, &g, &split.valid, config.chunk)?;
    p_valid.save_tsv(&out.join("latent_valid.tsv"))?;
    let (thresholds, valid_tree) = hierarchy::determine_thresholds(&p_valid, config.t0, config.cap)?;
    drop(p_valid);
    let valid_labels: Vec<String> = split.valid.iter().map(|&u| g.label(u)).collect();
    valid_tree.save_json(&out.join("validation_tree.json"), &valid_labels)?;
    let mut th_text = String::new();
    for t in thresholds.as_slice() {
        th_text.push_str(&format!("{t:?}\n"));
    }
    write_file(&out.join(THRESHOLDS_FILE), &th_text)?;
    lap("thresholds", &mut timings);

    let p_test = ksc::project_batch(&model, &g, &split.test, config.chunk)?;
    p_test.save_tsv(&out.join("latent_test.tsv"))?;
    lap("project", &mut timings);

    let tree = hierarchy::mh_ksc(&p_test, &thresholds, &config.hierarchy_config())?;
    drop(p_test);
    let labels = g.labels();
    tree.save_json(&out.join(TREE_FILE), &labels)?;
    write_file(&out.join(TREE_DOT_FILE), &tree.to_dot())?;
    write_file(&out.join(MEMBERSHIP_FILE), &tree.membership_matrix(&labels))?;
    lap("hierarchy", &mut timings);

    let manifest = Manifest {
        tool: "mhksc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        input,
        n_train: split.train.len(),
        n_valid: split.valid.len(),
        eigenvalues: model.eigenvalues().to_vec(),
        thresholds: thresholds.as_slice().to_vec(),
        validation_levels: summarize(&valid_tree),
        levels: summarize(&tree),
        timings_ms: timings,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    info!("levels (k): {:?}", tree.cluster_counts());
    Ok(ClusterOutcome {
        tree,
        labels,
        manifest,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthScore {
    pub truth: String,
    pub ari: f64,
    pub vi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub level: usize,
    pub k: usize,
    pub threshold: f64,
    pub modularity: f64,
    pub cut_conductance: f64,
    pub truths: Vec<TruthScore>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("level\tk\tthreshold\tQ\tCC");
        if let Some(first) = self.rows.first() {
            for t in &first.truths {
                s.push_str(&format!("\tARI[{0}]\tVI[{0}]", t.truth));
            }
        }
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{}\t{}\t{:.6}\t{:.6}\t{:.6e}",
                r.level, r.k, r.threshold, r.modularity, r.cut_conductance
            ));
            for t in &r.truths {
                s.push_str(&format!("\t{:.6}\t{:.6}", t.ari, t.vi));
            }
            s.push('\n');
        }
        s
    }
}

/// Maps the tree's node order onto graph indices, checking both describe
/// the same node set.
fn align_tree(tree_labels: &[String], g: &Graph) -> Result<Vec<usize>> {
    if tree_labels.len() != g.n_nodes() {
        return Err(Error::Mismatch(format!(
            "tree has {} nodes, graph has {}",
            tree_labels.len(),
            g.n_nodes()
        )));
    }
    let index = g.label_index();
    tree_labels
        .iter()
        .map(|l| {
            index
                .get(l)
                .copied()
                .ok_or_else(|| Error::Mismatch(format!("tree node {l:?} not in graph")))
        })
        .collect()
}

/// Per-level quality table of a saved tree against its graph and optional
/// ground-truth partition files.
pub fn evaluate(tree_path: &Path, graph_path: &Path, truth_paths: &[PathBuf]) -> Result<Report> {
    let (tree, labels) = ClusterTree::load_json(tree_path)?;
    let g = graph::load_edge_list(graph_path)?;
    let to_graph = align_tree(&labels, &g)?;
    let truths = truth_paths
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string());
            Partition::load(p, &g).map(|part| (name, part))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (idx, lvl) in tree.levels().iter().enumerate() {
        let mut by_graph = vec![0; g.n_nodes()];
        for (item, c) in tree.assignment(idx).into_iter().enumerate() {
            by_graph[to_graph[item]] = c;
        }
        let p = Partition::from_labels(&by_graph);
        let truths = truths
            .iter()
            .map(|(name, t)| {
                Ok(TruthScore {
                    truth: name.clone(),
                    ari: metrics::ari(&p, t)?,
                    vi: metrics::vi(&p, t)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(ReportRow {
            level: lvl.level,
            k: lvl.k(),
            threshold: lvl.threshold,
            modularity: metrics::modularity(&g, &p)?,
            cut_conductance: metrics::cut_conductance(&g, &p)?,
            truths,
        });
    }
    Ok(Report { rows })
}

pub fn save_report(report: &Report, prefix: &Path) -> Result<()> {
    write_file(&prefix.with_extension("tsv"), &report.to_tsv())?;
    write_json(&prefix.with_extension("json"), report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    /// Graphviz tree of clusters.
    Dot,
    /// Level-ordered per-node membership table.
    Membership,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(ExportFormat::Dot),
            "membership" | "matrix" => Ok(ExportFormat::Membership),
            other => Err(Error::InvalidConfig(format!(
                "unknown export format {other:?} (expected dot or membership)"
            ))),
        }
    }
}

/// Renders a saved tree. `finest_level`, when given, drops every level
/// below it.
pub fn export(tree_path: &Path, format: ExportFormat, finest_level: Option<usize>) -> Result<String> {
    let (tree, labels) = ClusterTree::load_json(tree_path)?;
    let tree = match finest_level {
        Some(level) => tree.truncate_below(tree.position_of(level)?),
        None => tree,
    };
    Ok(match format {
        ExportFormat::Dot => tree.to_dot(),
        ExportFormat::Membership => tree.membership_matrix(&labels),
    })
}

/// Writes `contents` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| Error::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            }),
    }
}
