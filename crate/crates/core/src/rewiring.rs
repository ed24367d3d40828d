//! Modules in weight-derived graphs and algebraic-connectivity rewiring.
//!
//! Positive weights bind vertices into modules and negative weights separate
//! them. The first-order gain in `λ₂` from adding edge `(i, j)` with weight
//! `w` is `w·(vᵢ − vⱼ)²`, with `v` the Fiedler vector, which makes greedy
//! edge selection cheap. [`CoupledRewireHook`] watches module membership in
//! each layer during training and repairs vertices that drift out of their
//! module.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::NodeDataset;
use crate::error::{input, Result};
use crate::gnn::{EpochHook, GnnModel};
use crate::graph::{
    bipartite_weight_graph, components_where, weight_matrix_to_graph, WeightMode, WeightedGraph,
};
use crate::linalg::{format_f64, DenseMatrix};

/// Module membership per vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterPartition {
    /// Ids are contiguous from 0.
    pub assignment: Vec<usize>,
    pub cluster_count: usize,
}

impl ClusterPartition {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let cluster_count = assignment.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; cluster_count];
        for &c in &assignment {
            seen[c] = true;
        }
        if seen.iter().any(|s| !s) {
            return input("cluster ids must be contiguous from 0");
        }
        Ok(Self {
            assignment,
            cluster_count,
        })
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// Members of each cluster, ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count];
        for (v, &c) in self.assignment.iter().enumerate() {
            out[c].push(v);
        }
        out
    }
}

/// Connected components of the positive-weight subgraph.
pub fn detect_clusters(g: &WeightedGraph) -> ClusterPartition {
    let assignment = components_where(g, |e| e.w > 0.0);
    let cluster_count = assignment.iter().max().map_or(0, |m| m + 1);
    ClusterPartition {
        assignment,
        cluster_count,
    }
}

/// A proposed new edge. `score` is filled by [`greedy_scores`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeCandidate {
    pub i: usize,
    pub j: usize,
    pub w: f64,
    pub score: f64,
}

impl EdgeCandidate {
    pub fn new(i: usize, j: usize, w: f64) -> Self {
        Self {
            i,
            j,
            w,
            score: 0.0,
        }
    }
}

fn check_candidates(g: &WeightedGraph, candidates: &[EdgeCandidate]) -> Result<()> {
    if g.is_directed() {
        return input("edge scoring needs an undirected graph");
    }
    let mut seen = HashSet::new();
    for c in candidates {
        if c.i == c.j || c.i >= g.n() || c.j >= g.n() {
            return input(format!("invalid candidate ({}, {})", c.i, c.j));
        }
        if !(c.w > 0.0 && c.w.is_finite()) {
            return input(format!(
                "candidate ({}, {}) needs a positive weight",
                c.i, c.j
            ));
        }
        if g.has_edge(c.i, c.j) {
            return input(format!("({}, {}) is already an edge", c.i, c.j));
        }
        if !seen.insert((c.i.min(c.j), c.i.max(c.j))) {
            return input(format!("candidate ({}, {}) listed twice", c.i, c.j));
        }
    }
    Ok(())
}

/// Scores `w·(vᵢ − vⱼ)²` against the Fiedler vector of `g` under `|w|`,
/// sorted descending; ties keep `(i, j)` order.
pub fn greedy_scores(
    g: &WeightedGraph,
    candidates: &[EdgeCandidate],
) -> Result<Vec<EdgeCandidate>> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    check_candidates(g, candidates)?;
    let v = g.fiedler(WeightMode::Abs)?.vector;
    Ok(score_with(&v, candidates))
}

fn score_with(v: &[f64], candidates: &[EdgeCandidate]) -> Vec<EdgeCandidate> {
    let mut out: Vec<EdgeCandidate> = candidates
        .iter()
        .map(|c| {
            let d = v[c.i] - v[c.j];
            EdgeCandidate {
                score: c.w * d * d,
                ..*c
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then((a.i.min(a.j), a.i.max(a.j)).cmp(&(b.i.min(b.j), b.i.max(b.j))))
    });
    out
}

#[derive(Clone, Debug)]
pub struct RewireResult {
    pub graph: WeightedGraph,
    /// In the order added, with the score each had when chosen.
    pub added: Vec<EdgeCandidate>,
}

/// Adds up to `budget` candidates one at a time, rescoring against the
/// updated Fiedler vector after each addition.
pub fn rewire(
    g: &WeightedGraph,
    candidates: &[EdgeCandidate],
    budget: usize,
) -> Result<RewireResult> {
    if budget == 0 {
        return input("rewiring budget must be at least 1");
    }
    check_candidates(g, candidates)?;
    let mut graph = g.clone();
    let mut remaining = candidates.to_vec();
    let mut added = Vec::new();
    while added.len() < budget && !remaining.is_empty() {
        let best = greedy_scores(&graph, &remaining)?[0];
        remaining.retain(|c| (c.i, c.j) != (best.i, best.j));
        graph.add_edge(best.i, best.j, best.w)?;
        added.push(best);
    }
    Ok(RewireResult { graph, added })
}

/// `δ·Σ λ₂(|L_c|)` over the clusters' induced subgraphs of the weight graph
/// of `w` (see [`weight_matrix_to_graph`]). Singletons contribute 0.
pub fn fiedler_penalty(w: &DenseMatrix, partition: &ClusterPartition, delta: f64) -> Result<f64> {
    fiedler_penalty_graph(&weight_matrix_to_graph(w, 0.0), partition, delta)
}

pub fn fiedler_penalty_graph(
    g: &WeightedGraph,
    partition: &ClusterPartition,
    delta: f64,
) -> Result<f64> {
    if !(delta >= 0.0) {
        return input("delta must be non-negative");
    }
    if partition.n() != g.n() {
        return input(format!(
            "partition covers {} vertices, graph has {}",
            partition.n(),
            g.n()
        ));
    }
    if delta == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for members in partition.clusters().iter().filter(|m| m.len() >= 2) {
        total += g
            .induced_subgraph(members)
            .fiedler(WeightMode::Abs)?
            .lambda2
            .max(0.0);
    }
    Ok(delta * total)
}

/// `δ·λ₂(|L|)` of the whole weight graph of `w`, ignoring clusters. Zero
/// whenever the graph has more than one component.
pub fn fiedler_penalty_global(w: &DenseMatrix, delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return input("delta must be non-negative");
    }
    let g = weight_matrix_to_graph(w, 0.0);
    if delta == 0.0 || g.n() < 2 {
        return Ok(0.0);
    }
    Ok(delta * g.fiedler(WeightMode::Abs)?.lambda2.max(0.0))
}

/// Vertices whose cluster changed between snapshots, after matching cluster
/// labels.
///
/// Labels are matched greedily by largest overlap; equal overlaps go to the
/// pair whose shared vertices include the smallest vertex id. Both criteria
/// are symmetric in `prev` and `curr`, so the result is too. A vertex is
/// flagged when its (previous, current) cluster pair is not matched.
pub fn detect_erroneous(prev: &ClusterPartition, curr: &ClusterPartition) -> Result<Vec<usize>> {
    let matched = match_clusters(prev, curr)?;
    Ok((0..prev.n())
        .filter(|&v| matched[prev.assignment[v]] != Some(curr.assignment[v]))
        .collect())
}

/// For each previous cluster, the current cluster it was matched to.
fn match_clusters(prev: &ClusterPartition, curr: &ClusterPartition) -> Result<Vec<Option<usize>>> {
    if prev.n() != curr.n() {
        return input(format!(
            "partitions cover {} and {} vertices",
            prev.n(),
            curr.n()
        ));
    }
    // (overlap, smallest shared vertex) per co-occurring pair
    let mut pairs: std::collections::HashMap<(usize, usize), (usize, usize)> = Default::default();
    for v in 0..prev.n() {
        let e = pairs
            .entry((prev.assignment[v], curr.assignment[v]))
            .or_insert((0, v));
        e.0 += 1;
    }
    let mut ranked: Vec<((usize, usize), (usize, usize))> = pairs.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
    let mut forward = vec![None; prev.cluster_count];
    let mut used = vec![false; curr.cluster_count];
    for ((p, c), _) in ranked {
        if forward[p].is_none() && !used[c] {
            forward[p] = Some(c);
            used[c] = true;
        }
    }
    Ok(forward)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewireConfig {
    /// Scale of added weights; 0 disables the hook.
    pub delta: f64,
    pub warmup: usize,
    pub cadence: usize,
    /// Entries with `|w| ≤ threshold·max|W|` are not edges.
    pub threshold: f64,
    /// Edges added per flagged vertex.
    pub budget: usize,
    /// 0-based layer indices to watch; empty watches every layer.
    pub layers: Vec<usize>,
}

impl Default for RewireConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            warmup: 20,
            cadence: 10,
            threshold: 0.1,
            budget: 1,
            layers: Vec::new(),
        }
    }
}

impl RewireConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return input("delta must be a non-negative number");
        }
        if self.cadence == 0 || self.budget == 0 {
            return input("cadence and budget must be at least 1");
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return input("relative threshold must be in [0, 1)");
        }
        Ok(())
    }

    fn is_snapshot_epoch(&self, epoch: usize) -> bool {
        epoch >= self.warmup && (epoch - self.warmup).is_multiple_of(self.cadence)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewireAction {
    Zeroed,
    Added,
}

/// One edit. `vertex` is the flagged vertex of the layer's weight graph;
/// `i, j` index the weight matrix entry.
#[derive(Clone, Debug, PartialEq)]
pub struct RewireEvent {
    pub epoch: usize,
    pub layer: usize,
    pub vertex: usize,
    pub action: RewireAction,
    pub i: usize,
    pub j: usize,
    /// The new value of the entry.
    pub w: f64,
    /// Greedy score for additions, `NaN` for zeroings.
    pub score: f64,
}

/// Flagged vertices at one snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct FlagRecord {
    pub epoch: usize,
    pub layer: usize,
    pub vertices: Vec<usize>,
}

/// Training hook that snapshots module structure per layer and repairs
/// vertices that leave their module.
///
/// For a flagged vertex whose previous module had other members, edges that
/// contradict the previous module (negative inside it, positive outside
/// it) are zeroed, then the best-scoring new links into the previous
/// module are added with weight `δ` times the module's mean `|w|`.
#[derive(Clone, Debug)]
pub struct CoupledRewireHook {
    config: RewireConfig,
    snapshots: Vec<Option<ClusterPartition>>,
    pub events: Vec<RewireEvent>,
    pub flags: Vec<FlagRecord>,
}

impl CoupledRewireHook {
    pub fn new(config: RewireConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            snapshots: Vec::new(),
            events: Vec::new(),
            flags: Vec::new(),
        })
    }

    pub fn config(&self) -> &RewireConfig {
        &self.config
    }

    /// Union of every vertex flagged in `layer`.
    pub fn flagged_vertices(&self, layer: usize) -> BTreeSet<usize> {
        self.flags
            .iter()
            .filter(|f| f.layer == layer)
            .flat_map(|f| f.vertices.iter().copied())
            .collect()
    }

    /// `epoch,layer,vertex,action,i,j,w,score`
    pub fn events_csv(&self) -> String {
        let mut s = String::from("epoch,layer,vertex,action,i,j,w,score\n");
        for e in &self.events {
            let action = match e.action {
                RewireAction::Zeroed => "zeroed",
                RewireAction::Added => "added",
            };
            let score = if e.score.is_nan() {
                String::new()
            } else {
                format_f64(e.score)
            };
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                e.epoch,
                e.layer,
                e.vertex,
                action,
                e.i,
                e.j,
                format_f64(e.w),
                score
            )
            .unwrap();
        }
        s
    }

    fn threshold_for(&self, w: &DenseMatrix) -> f64 {
        self.config.threshold * w.max_abs()
    }

    fn partition(&self, w: &DenseMatrix) -> ClusterPartition {
        detect_clusters(&bipartite_weight_graph(w, self.threshold_for(w)))
    }

    /// Repairs one layer; returns whether the weights changed.
    fn repair(
        &mut self,
        epoch: usize,
        layer: usize,
        w: &mut DenseMatrix,
        prev: &ClusterPartition,
        flagged: &[usize],
    ) -> Result<bool> {
        let rows = w.rows();
        let entry = |a: usize, b: usize| {
            if a < rows {
                (a, b - rows)
            } else {
                (b, a - rows)
            }
        };
        let prev_members = prev.clusters();
        let mut changed = false;
        for &v in flagged {
            let module = &prev_members[prev.assignment[v]];
            if module.len() < 2 {
                continue;
            }
            let g = bipartite_weight_graph(w, self.threshold_for(w));
            let in_module: HashSet<usize> = module.iter().copied().collect();
            for e in g.edges().iter().filter(|e| e.i == v || e.j == v) {
                let u = if e.i == v { e.j } else { e.i };
                let contradicts = if in_module.contains(&u) {
                    e.w < 0.0
                } else {
                    e.w > 0.0
                };
                if contradicts {
                    let (r, c) = entry(v, u);
                    w.row_mut(r)[c] = 0.0;
                    changed = true;
                    self.events.push(RewireEvent {
                        epoch,
                        layer,
                        vertex: v,
                        action: RewireAction::Zeroed,
                        i: r,
                        j: c,
                        w: 0.0,
                        score: f64::NAN,
                    });
                }
            }

            let g = bipartite_weight_graph(w, self.threshold_for(w));
            let sub = g.induced_subgraph(module);
            let local = |x: usize| module.binary_search(&x).expect("module member");
            let mean_abs = if sub.edge_count() == 0 {
                w.max_abs() * self.config.threshold.max(f64::EPSILON)
            } else {
                sub.edges().iter().map(|e| e.w.abs()).sum::<f64>() / sub.edge_count() as f64
            };
            let weight = self.config.delta * mean_abs;
            if !(weight > 0.0) {
                continue;
            }
            let candidates: Vec<EdgeCandidate> = module
                .iter()
                .filter(|&&u| u != v && (u < rows) != (v < rows) && !g.has_edge(u, v))
                .map(|&u| EdgeCandidate::new(local(v), local(u), weight))
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let result = rewire(&sub, &candidates, self.config.budget)?;
            for c in result.added {
                let (r, col) = entry(module[c.i], module[c.j]);
                w.row_mut(r)[col] = c.w;
                changed = true;
                self.events.push(RewireEvent {
                    epoch,
                    layer,
                    vertex: v,
                    action: RewireAction::Added,
                    i: r,
                    j: col,
                    w: c.w,
                    score: c.score,
                });
            }
        }
        Ok(changed)
    }
}

impl EpochHook for CoupledRewireHook {
    fn after_epoch(
        &mut self,
        epoch: usize,
        model: &mut GnnModel,
        _data: &NodeDataset,
    ) -> Result<bool> {
        if self.config.delta == 0.0 || !self.config.is_snapshot_epoch(epoch) {
            return Ok(false);
        }
        let depth = model.depth();
        self.snapshots.resize(depth, None);
        let mut edited = false;
        for layer in 0..depth {
            if !self.config.layers.is_empty() && !self.config.layers.contains(&layer) {
                continue;
            }
            let curr = self.partition(&model.layers()[layer].weight);
            let Some(prev) = self.snapshots[layer].take() else {
                self.snapshots[layer] = Some(curr);
                continue;
            };
            if prev.n() != curr.n() {
                // the layer was resized; start over
                self.snapshots[layer] = Some(curr);
                continue;
            }
            let flagged = detect_erroneous(&prev, &curr)?;
            if flagged.is_empty() {
                self.snapshots[layer] = Some(curr);
                continue;
            }
            log::debug!(
                "epoch {epoch} layer {layer}: {} flagged vertices",
                flagged.len()
            );
            self.flags.push(FlagRecord {
                epoch,
                layer,
                vertices: flagged.clone(),
            });
            let w = model.weight_mut(layer);
            let changed = self.repair(epoch, layer, w, &prev, &flagged)?;
            edited |= changed;
            let after = self.partition(&model.layers()[layer].weight);
            self.snapshots[layer] = Some(after);
        }
        Ok(edited)
    }
}

/// Flips the sign of a random `fraction` of one layer's weights (at least
/// one entry). Returns the flipped `(row, col)` entries.
pub fn flip_weight_signs(
    model: &mut GnnModel,
    layer: usize,
    fraction: f64,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    if layer >= model.depth() {
        return input(format!(
            "layer {layer} out of range for depth {}",
            model.depth()
        ));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return input("flip fraction must be in (0, 1]");
    }
    let w = model.weight_mut(layer);
    let total = w.rows() * w.cols();
    let count = ((fraction * total as f64).round() as usize).clamp(1, total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = w.cols();
    let mut flipped: Vec<(usize, usize)> = sample(&mut rng, total, count)
        .into_iter()
        .map(|k| (k / cols, k % cols))
        .collect();
    flipped.sort_unstable();
    for &(r, c) in &flipped {
        w.row_mut(r)[c] = -w.row(r)[c];
    }
    Ok(flipped)
}

/// Hook that corrupts one layer once, at a fixed epoch.
#[derive(Clone, Debug)]
pub struct SignFlipInjector {
    pub epoch: usize,
    pub layer: usize,
    pub fraction: f64,
    pub seed: u64,
    /// Filled when the injection fires.
    pub flipped: Vec<(usize, usize)>,
}

impl EpochHook for SignFlipInjector {
    fn after_epoch(
        &mut self,
        epoch: usize,
        model: &mut GnnModel,
        _data: &NodeDataset,
    ) -> Result<bool> {
        if epoch != self.epoch {
            return Ok(false);
        }
        self.flipped = flip_weight_signs(model, self.layer, self.fraction, self.seed)?;
        Ok(false)
    }
}

/// Share of flipped entries with at least one endpoint among `flagged`
/// (vertex ids of the layer's bipartite weight graph with `rows` rows).
pub fn flip_recall(flipped: &[(usize, usize)], flagged: &BTreeSet<usize>, rows: usize) -> f64 {
    if flipped.is_empty() {
        return 1.0;
    }
    let hit = flipped
        .iter()
        .filter(|&&(r, c)| flagged.contains(&r) || flagged.contains(&(rows + c)))
        .count();
    hit as f64 / flipped.len() as f64
}

/// Data-graph mode: scores every non-edge of `g` with unit weight and
/// returns the `top` best, without modifying anything.
pub fn score_data_graph(g: &WeightedGraph, top: usize) -> Result<Vec<EdgeCandidate>> {
    let fiedler = g.fiedler(WeightMode::Abs)?;
    let candidates: Vec<EdgeCandidate> = crate::graph::non_edges(g)
        .into_iter()
        .map(|(i, j)| EdgeCandidate::new(i, j, 1.0))
        .collect();
    let mut scored = score_with(&fiedler.vector, &candidates);
    scored.truncate(top);
    Ok(scored)
}
