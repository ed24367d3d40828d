//! Node-classification datasets: local citation files, synthetic stochastic
//! block models, seeded splits and the propagation operator.
//!
//! On-disk layout for a dataset called `name` inside a directory:
//!
//! | file | format |
//! |------|--------|
//! | `name.edges` | edge list: `n directed(0|1)` then `i j w` per line |
//! | `name.features` | matrix text: `rows cols` then one row per line |
//! | `name.labels` | one class id per line |

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{input, Error, Result};
use crate::graph::{parse_edge_list, WeightedGraph};
use crate::linalg::{CsrMatrix, DenseMatrix};

/// Graph, features and labels before any split.
#[derive(Clone, Debug, PartialEq)]
pub struct RawGraphData {
    /// Undirected.
    pub graph: WeightedGraph,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl RawGraphData {
    pub fn new(graph: WeightedGraph, features: DenseMatrix, labels: Vec<usize>) -> Result<Self> {
        let n = graph.n();
        if features.rows() != n || labels.len() != n {
            return Err(Error::Format(format!(
                "inconsistent vertex counts: graph {n}, features {}, labels {}",
                features.rows(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::Format("no labels".into()));
        }
        let class_count = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Self {
            graph,
            features,
            labels,
            class_count,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count];
        for &y in &self.labels {
            sizes[y] += 1;
        }
        sizes
    }
}

/// What [`load_citation`] had to discard.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Reads `<name>.edges`, `<name>.features` and `<name>.labels` from `dir`.
///
/// Edges are treated as undirected; self-loops and repeated pairs are
/// dropped and counted. `class_count` is taken as `max label + 1` unless a
/// `<name>.classes` file gives it explicitly.
pub fn load_citation(dir: &Path, name: &str) -> Result<(RawGraphData, LoadReport)> {
    let read = |ext: &str| fs::read_to_string(dir.join(format!("{name}.{ext}")));
    let edges_text = read("edges")?;
    let features_text = read("features")?;
    let labels_text = read("labels")?;

    let parsed = parse_edge_list(&edges_text)?;
    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    let mut graph = WeightedGraph::empty(parsed.n, false);
    for (i, j, w) in parsed.edges {
        if i == j {
            report.self_loops_dropped += 1;
            continue;
        }
        if !seen.insert((i.min(j), i.max(j))) {
            report.duplicates_dropped += 1;
            continue;
        }
        graph.add_edge(i, j, w)?;
    }
    if report.self_loops_dropped + report.duplicates_dropped > 0 {
        warn!(
            "{name}: dropped {} self-loops and {} duplicate edges",
            report.self_loops_dropped, report.duplicates_dropped
        );
    }

    let features = DenseMatrix::from_text(&features_text)?;
    let labels = labels_text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<usize>()
                .map_err(|e| Error::Format(format!("bad label {l:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if labels.is_empty() {
        return Err(Error::Format(format!("{name}.labels is empty")));
    }
    let mut data = RawGraphData::new(graph, features, labels)?;
    if let Ok(text) = read("classes") {
        let declared: usize = text
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("bad class count: {e}")))?;
        if let Some(&bad) = data.labels.iter().find(|&&y| y >= declared) {
            return Err(Error::Format(format!(
                "label {bad} outside declared class range 0..{declared}"
            )));
        }
        data.class_count = declared;
    }
    Ok((data, report))
}

/// Writes the three dataset files plus `<name>.classes`.
pub fn save_citation(dir: &Path, name: &str, data: &RawGraphData) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join(format!("{name}.edges")),
        data.graph.to_edge_list_text(),
    )?;
    fs::write(
        dir.join(format!("{name}.features")),
        data.features.to_text(),
    )?;
    let labels: String = data.labels.iter().map(|y| format!("{y}\n")).collect();
    fs::write(dir.join(format!("{name}.labels")), labels)?;
    fs::write(
        dir.join(format!("{name}.classes")),
        format!("{}\n", data.class_count),
    )?;
    Ok(())
}

/// Stochastic block model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SbmParams {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Euclidean distance between any two class means.
    pub feature_gap: f64,
    pub seed: u64,
}

impl Default for SbmParams {
    fn default() -> Self {
        Self {
            blocks: 2,
            nodes_per_block: 100,
            p_in: 0.1,
            p_out: 0.01,
            feature_dim: 16,
            feature_gap: 2.0,
            seed: 0,
        }
    }
}

/// Planted-partition graph with Gaussian class features.
///
/// Block `c`'s features are `N(μ_c, I)` with `μ_c = (gap/√2)·e_c`, so any
/// two means sit exactly `gap` apart.
pub fn generate_sbm(p: &SbmParams) -> Result<RawGraphData> {
    if !(0.0 <= p.p_out && p.p_out < p.p_in && p.p_in <= 1.0) {
        return input(format!(
            "need 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
            p.p_in, p.p_out
        ));
    }
    if p.blocks == 0 || p.nodes_per_block == 0 {
        return input("blocks and nodes_per_block must be positive");
    }
    if p.blocks > p.feature_dim {
        return input(format!(
            "feature_dim {} cannot separate {} class means",
            p.feature_dim, p.blocks
        ));
    }
    if !(p.feature_gap >= 0.0) {
        return input("feature_gap must be non-negative");
    }
    let n = p.blocks * p.nodes_per_block;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let labels: Vec<usize> = (0..n).map(|v| v / p.nodes_per_block).collect();
    let mut graph = WeightedGraph::empty(n, false);
    for i in 0..n {
        for j in i + 1..n {
            let prob = if labels[i] == labels[j] {
                p.p_in
            } else {
                p.p_out
            };
            if rng.gen_bool(prob) {
                graph.add_edge(i, j, 1.0)?;
            }
        }
    }
    let offset = p.feature_gap / std::f64::consts::SQRT_2;
    let features = DenseMatrix::from_fn(n, p.feature_dim, |i, j| {
        let noise: f64 = rng.sample(StandardNormal);
        noise + if j == labels[i] { offset } else { 0.0 }
    });
    RawGraphData::new(graph, features, labels)
}

/// How the propagation operator is built from the adjacency matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Propagation {
    /// `D̃^{-1/2}(A + I)D̃^{-1/2}` with `D̃` the degrees of `A + I`.
    #[default]
    Renormalized,
    /// The adjacency matrix as is.
    Raw,
}

impl std::str::FromStr for Propagation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "renormalized" => Ok(Self::Renormalized),
            "raw" => Ok(Self::Raw),
            other => input(format!("unknown propagation {other:?} (renormalized, raw)")),
        }
    }
}

/// Builds the propagation operator for `graph`.
pub fn propagation_matrix(graph: &WeightedGraph, mode: Propagation) -> Result<CsrMatrix> {
    let n = graph.n();
    let mut triplets = Vec::with_capacity(2 * graph.edge_count() + n);
    for e in graph.edges() {
        triplets.push((e.j, e.i, e.w));
        if !graph.is_directed() {
            triplets.push((e.i, e.j, e.w));
        }
    }
    if mode == Propagation::Raw {
        return Ok(CsrMatrix::from_triplets(n, n, &triplets));
    }
    triplets.extend((0..n).map(|i| (i, i, 1.0)));
    let mut deg = vec![0.0; n];
    for &(i, _, w) in &triplets {
        deg[i] += w;
    }
    if let Some(v) = deg.iter().position(|&d| d <= 0.0) {
        return Err(Error::DegenerateDegree(v));
    }
    let inv: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let scaled: Vec<_> = triplets
        .into_iter()
        .map(|(i, j, w)| (i, j, inv[i] * w * inv[j]))
        .collect();
    Ok(CsrMatrix::from_triplets(n, n, &scaled))
}

/// Everything a model needs for one node-classification run.
#[derive(Clone, Debug)]
pub struct NodeDataset {
    pub propagation: CsrMatrix,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
}

impl NodeDataset {
    /// Checks mask disjointness and that every class has a training node.
    pub fn new(
        propagation: CsrMatrix,
        features: DenseMatrix,
        labels: Vec<usize>,
        class_count: usize,
        train_mask: Vec<bool>,
        val_mask: Vec<bool>,
        test_mask: Vec<bool>,
    ) -> Result<Self> {
        let n = labels.len();
        if propagation.rows() != n
            || propagation.cols() != n
            || features.rows() != n
            || [&train_mask, &val_mask, &test_mask]
                .iter()
                .any(|m| m.len() != n)
        {
            return input("dataset parts disagree on the node count");
        }
        if labels.iter().any(|&y| y >= class_count) {
            return input("label outside class range");
        }
        for i in 0..n {
            let hits = u8::from(train_mask[i]) + u8::from(val_mask[i]) + u8::from(test_mask[i]);
            if hits > 1 {
                return input(format!("node {i} is in more than one split"));
            }
        }
        let mut seen = vec![false; class_count];
        for i in (0..n).filter(|&i| train_mask[i]) {
            seen[labels[i]] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return input(format!("class {c} has no training node"));
        }
        Ok(Self {
            propagation,
            features,
            labels,
            class_count,
            train_mask,
            val_mask,
            test_mask,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn count(mask: &[bool]) -> usize {
        mask.iter().filter(|&&b| b).count()
    }
}

/// Split sizes. The defaults are the usual citation-benchmark protocol:
/// 20 training nodes per class, 100 validation, 1000 test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSizes {
    pub per_class_train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            per_class_train: 20,
            val: 100,
            test: 1000,
        }
    }
}

/// Seeded split. One shuffle of all nodes decides everything: the first
/// `per_class_train` nodes of each class (in shuffled order) train, and the
/// remaining nodes fill validation then test in the same order.
pub fn split(
    data: &RawGraphData,
    sizes: SplitSizes,
    seed: u64,
    propagation: Propagation,
) -> Result<NodeDataset> {
    let n = data.n();
    if sizes.per_class_train == 0 {
        return input("per_class_train must be at least 1");
    }
    let sizes_by_class = data.class_sizes();
    if let Some((c, &s)) = sizes_by_class
        .iter()
        .enumerate()
        .find(|(_, &s)| s < sizes.per_class_train)
    {
        return input(format!(
            "class {c} has {s} nodes, fewer than {} training nodes per class",
            sizes.per_class_train
        ));
    }
    let train_total = sizes.per_class_train * data.class_count;
    if train_total + sizes.val + sizes.test > n {
        return input(format!(
            "split needs {} nodes but the graph has {n}",
            train_total + sizes.val + sizes.test
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut train_mask = vec![false; n];
    let mut taken = vec![0usize; data.class_count];
    let mut rest = Vec::with_capacity(n);
    for &v in &order {
        let c = data.labels[v];
        if taken[c] < sizes.per_class_train {
            taken[c] += 1;
            train_mask[v] = true;
        } else {
            rest.push(v);
        }
    }
    let mut val_mask = vec![false; n];
    let mut test_mask = vec![false; n];
    for &v in &rest[..sizes.val] {
        val_mask[v] = true;
    }
    for &v in &rest[sizes.val..sizes.val + sizes.test] {
        test_mask[v] = true;
    }
    NodeDataset::new(
        propagation_matrix(&data.graph, propagation)?,
        data.features.clone(),
        data.labels.clone(),
        data.class_count,
        train_mask,
        val_mask,
        test_mask,
    )
}
