//! Weighted graphs and their spectral forms.
//!
//! For an undirected graph the Laplacian is `L = D − A` with `D` the row-sum
//! degree matrix. Every Laplacian satisfies `L·1 = 0`, so the constant vector
//! is always an eigenvector; the *algebraic connectivity* `λ₂` is the minimum
//! of the Rayleigh quotient `uᵀLu / uᵀu` over `u ⊥ 1`. This module computes it
//! by restricting `L` to an explicit orthonormal basis `Ũ` of `1⊥`
//! ([`complement_basis`]), which also covers the directed case through the
//! symmetric part `½(L + Lᵀ)`.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{input, Error, Result};
use crate::linalg::{fix_sign, format_f64, norm2, parse_f64, sym_eig, DenseMatrix};

/// A weighted edge. For undirected graphs `i < j`; for directed graphs the
/// edge points from `i` to `j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    directed: bool,
    edges: Vec<Edge>,
}

/// How a Laplacian treats negative edge weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeightMode {
    /// Use `|w|`; the Laplacian is then positive semidefinite.
    #[default]
    Abs,
    /// Use the weights as given; the Laplacian may be indefinite.
    Raw,
}

impl WeightedGraph {
    pub fn new(n: usize, directed: bool, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut g = Self::empty(n, directed);
        for e in edges {
            g.add_edge(e.i, e.j, e.w)?;
        }
        Ok(g)
    }

    /// Convenience constructor from `(i, j, w)` triples.
    pub fn from_triples(n: usize, directed: bool, triples: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(
            n,
            directed,
            triples.iter().map(|&(i, j, w)| Edge { i, j, w }),
        )
    }

    pub fn empty(n: usize, directed: bool) -> Self {
        Self {
            n,
            directed,
            edges: Vec::new(),
        }
    }

    /// Adds an edge. Undirected endpoints are stored sorted.
    pub fn add_edge(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        if i >= self.n || j >= self.n {
            return input(format!(
                "edge ({i}, {j}) out of range for {} vertices",
                self.n
            ));
        }
        if i == j {
            return input(format!("self-loop at vertex {i}"));
        }
        if !w.is_finite() {
            return input(format!("non-finite weight on edge ({i}, {j})"));
        }
        let (i, j) = if self.directed || i < j {
            (i, j)
        } else {
            (j, i)
        };
        if self.has_edge(i, j) {
            return input(format!("duplicate edge ({i}, {j})"));
        }
        self.edges.push(Edge { i, j, w });
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn key(&self, i: usize, j: usize) -> (usize, usize) {
        if self.directed || i < j {
            (i, j)
        } else {
            (j, i)
        }
    }

    pub fn edge_weight(&self, i: usize, j: usize) -> Option<f64> {
        let k = self.key(i, j);
        self.edges.iter().find(|e| (e.i, e.j) == k).map(|e| e.w)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge_weight(i, j).is_some()
    }

    /// Removes an edge if present, returning its weight.
    pub fn remove_edge(&mut self, i: usize, j: usize) -> Option<f64> {
        let k = self.key(i, j);
        let pos = self.edges.iter().position(|e| (e.i, e.j) == k)?;
        Some(self.edges.remove(pos).w)
    }

    /// Both directions of every edge become directed edges.
    pub fn to_directed(&self) -> Self {
        let mut edges = Vec::with_capacity(2 * self.edges.len());
        for e in &self.edges {
            edges.push(*e);
            if !self.directed {
                edges.push(Edge {
                    i: e.j,
                    j: e.i,
                    w: e.w,
                });
            }
        }
        Self {
            n: self.n,
            directed: true,
            edges,
        }
    }

    /// Subgraph induced by `vertices`, relabelled `0..vertices.len()` in the
    /// given order.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.n];
        for (k, &v) in vertices.iter().enumerate() {
            local[v] = k;
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| local[e.i] != usize::MAX && local[e.j] != usize::MAX)
            .map(|e| {
                let (a, b) = (local[e.i], local[e.j]);
                let (a, b) = if self.directed || a < b {
                    (a, b)
                } else {
                    (b, a)
                };
                Edge { i: a, j: b, w: e.w }
            })
            .collect();
        Self {
            n: vertices.len(),
            directed: self.directed,
            edges,
        }
    }

    /// Adjacency matrix with `A[j][i] = w` for an edge `(i, j)`; symmetric
    /// for undirected graphs.
    pub fn adjacency(&self) -> DenseMatrix {
        self.adjacency_with(WeightMode::Raw)
    }

    fn adjacency_with(&self, mode: WeightMode) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            let w = match mode {
                WeightMode::Abs => e.w.abs(),
                WeightMode::Raw => e.w,
            };
            a[(e.j, e.i)] += w;
            if !self.directed {
                a[(e.i, e.j)] += w;
            }
        }
        a
    }

    /// `L = D − A`.
    pub fn laplacian(&self) -> DenseMatrix {
        self.laplacian_with(WeightMode::Raw)
    }

    pub fn laplacian_with(&self, mode: WeightMode) -> DenseMatrix {
        let mut l = self.adjacency_with(mode).scale(-1.0);
        for i in 0..self.n {
            let deg: f64 = -l.row(i).iter().sum::<f64>();
            l[(i, i)] += deg;
        }
        l
    }

    /// Weighted degrees (row sums of the adjacency matrix).
    pub fn degrees(&self) -> Vec<f64> {
        let a = self.adjacency();
        (0..self.n).map(|i| a.row(i).iter().sum()).collect()
    }

    /// `D^{-1/2}·L·D^{-1/2}`. Fails on any vertex of non-positive degree.
    pub fn normalized_laplacian(&self) -> Result<DenseMatrix> {
        let deg = self.degrees();
        if let Some(v) = deg.iter().position(|&d| d <= 0.0) {
            return Err(Error::DegenerateDegree(v));
        }
        let inv: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
        let l = self.laplacian();
        Ok(DenseMatrix::from_fn(self.n, self.n, |i, j| {
            inv[i] * l[(i, j)] * inv[j]
        }))
    }

    /// Node-edge incidence matrix of an undirected graph.
    pub fn incidence(&self) -> Result<IncidenceMatrix> {
        if self.directed {
            return Err(Error::Unsupported(
                "incidence matrix is defined here for undirected graphs".into(),
            ));
        }
        let m = self.edges.len();
        let mut h = DenseMatrix::zeros(self.n, m);
        for (l, e) in self.edges.iter().enumerate() {
            h[(e.i, l)] = 1.0;
            h[(e.j, l)] = -1.0;
        }
        Ok(IncidenceMatrix {
            h,
            edge_order: (0..m).collect(),
            weights: self.edges.iter().map(|e| e.w).collect(),
        })
    }

    /// Algebraic connectivity and Fiedler vector of an undirected graph.
    ///
    /// `v` is unit-norm, orthogonal to `1`, with its largest-magnitude entry
    /// positive.
    pub fn fiedler(&self, mode: WeightMode) -> Result<Fiedler> {
        if self.directed {
            return Err(Error::Unsupported(
                "fiedler needs an undirected graph; see directed_algebraic_connectivity".into(),
            ));
        }
        if self.n < 2 {
            return input("algebraic connectivity needs at least 2 vertices");
        }
        let l = self.laplacian_with(mode);
        let (restricted, basis) = restrict_to_complement(&l);
        let eig = sym_eig(&restricted)?;
        let coords = eig.vectors.column(0);
        let mut v = basis.matvec(&coords).expect("basis shape");
        let nrm = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nrm);
        fix_sign(&mut v);
        Ok(Fiedler {
            lambda2: eig.values[0],
            vector: v,
        })
    }

    /// `λ_min(½·Ũᵀ(L + Lᵀ)Ũ)`. Accepts undirected graphs too, where it
    /// coincides with [`WeightedGraph::fiedler`] on raw weights.
    pub fn directed_algebraic_connectivity(&self) -> Result<f64> {
        if self.n < 2 {
            return input("algebraic connectivity needs at least 2 vertices");
        }
        let l = self.laplacian();
        let sym = l.add(&l.transpose()).expect("square").scale(0.5);
        let (restricted, _) = restrict_to_complement(&sym);
        Ok(sym_eig(&restricted)?.values[0])
    }

    pub fn to_edge_list_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {}", self.n, u8::from(self.directed)).unwrap();
        for e in &self.edges {
            writeln!(s, "{} {} {}", e.i, e.j, format_f64(e.w)).unwrap();
        }
        s
    }

    /// Strict parse of the edge-list format; duplicates and self-loops are
    /// errors. See [`parse_edge_list`] for the lenient form.
    pub fn from_edge_list_text(text: &str) -> Result<Self> {
        let parsed = parse_edge_list(text)?;
        let mut g = Self::empty(parsed.n, parsed.directed);
        for (i, j, w) in parsed.edges {
            g.add_edge(i, j, w)
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(g)
    }
}

/// Raw contents of an edge-list file.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeListFile {
    pub n: usize,
    pub directed: bool,
    pub edges: Vec<(usize, usize, f64)>,
}

/// Parses `n directed` then `i j w` lines without structural checks beyond
/// vertex range.
pub fn parse_edge_list(text: &str) -> Result<EdgeListFile> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("missing `n directed` header".into()))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    let (n, directed) = match toks[..] {
        [n, d] => {
            let n = n
                .parse::<usize>()
                .map_err(|e| Error::Format(format!("bad vertex count {n:?}: {e}")))?;
            let d = match d {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Format(format!(
                        "directed flag must be 0|1, got {other:?}"
                    )))
                }
            };
            (n, d)
        }
        _ => {
            return Err(Error::Format(format!(
                "header {header:?} must be `n directed`"
            )))
        }
    };
    let mut edges = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [i, j, w] = toks[..] else {
            return Err(Error::Format(format!(
                "edge line {} must be `i j w`: {line:?}",
                lineno + 2
            )));
        };
        let parse_v = |t: &str| {
            t.parse::<usize>()
                .map_err(|e| Error::Format(format!("bad vertex {t:?}: {e}")))
        };
        let (i, j) = (parse_v(i)?, parse_v(j)?);
        if i >= n || j >= n {
            return Err(Error::Format(format!(
                "edge ({i}, {j}) out of range for n={n}"
            )));
        }
        edges.push((i, j, parse_f64(w)?));
    }
    Ok(EdgeListFile { n, directed, edges })
}

#[derive(Clone, Debug)]
pub struct Fiedler {
    pub lambda2: f64,
    pub vector: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct IncidenceMatrix {
    /// n×m, one `+1` and one `−1` per column.
    pub h: DenseMatrix,
    /// Index into [`WeightedGraph::edges`] of each column.
    pub edge_order: Vec<usize>,
    pub weights: Vec<f64>,
}

impl IncidenceMatrix {
    /// `H·diag(w)·Hᵀ`, which equals the raw-weight Laplacian.
    pub fn weighted_gram(&self) -> DenseMatrix {
        let n = self.h.rows();
        let mut l = DenseMatrix::zeros(n, n);
        for (col, &w) in self.weights.iter().enumerate() {
            let h = self.h.column(col);
            for i in 0..n {
                if h[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    l[(i, j)] += w * h[i] * h[j];
                }
            }
        }
        l
    }
}

/// Householder vector mapping `1/√n` onto `e₁`; returns `(w, β)` with
/// `Q = I − β·w·wᵀ`.
fn householder_to_ones(n: usize) -> (Vec<f64>, f64) {
    let s = 1.0 / (n as f64).sqrt();
    let mut w = vec![s; n];
    w[0] -= 1.0;
    let ww: f64 = w.iter().map(|x| x * x).sum();
    (w, 2.0 / ww)
}

/// Orthonormal basis `Ũ` (n×(n−1)) of the complement of the constant
/// vector: `ŨᵀŨ = I` and `Ũᵀ1 = 0`.
///
/// The columns are the trailing columns of the Householder reflector that
/// sends `1/√n` to the first unit vector.
pub fn complement_basis(n: usize) -> Result<DenseMatrix> {
    if n < 2 {
        return input("complement basis needs n >= 2");
    }
    let (w, beta) = householder_to_ones(n);
    Ok(DenseMatrix::from_fn(n, n - 1, |i, j| {
        let col = j + 1;
        f64::from(u8::from(i == col)) - beta * w[i] * w[col]
    }))
}

/// `ŨᵀMŨ` for symmetric `M`, computed via the reflector in O(n²), together
/// with `Ũ`.
fn restrict_to_complement(m: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let n = m.rows();
    let (w, beta) = householder_to_ones(n);
    let mw = m.matvec(&w).expect("square");
    let wmw: f64 = w.iter().zip(&mw).map(|(a, b)| a * b).sum();
    // Q M Q = M − β w (Mw)ᵀ − β (Mw) wᵀ + β² (wᵀMw) w wᵀ
    let qmq = DenseMatrix::from_fn(n, n, |i, j| {
        m[(i, j)] - beta * (w[i] * mw[j] + mw[i] * w[j]) + beta * beta * wmw * w[i] * w[j]
    });
    let sub = DenseMatrix::from_fn(n - 1, n - 1, |i, j| {
        0.5 * (qmq[(i + 1, j + 1)] + qmq[(j + 1, i + 1)])
    });
    (sub, complement_basis(n).expect("n >= 2"))
}

/// Whether `w` is read as an adjacency matrix (square, symmetric, zero
/// diagonal) rather than a bipartite layer map.
pub fn is_adjacency_like(w: &DenseMatrix) -> bool {
    w.is_square() && w.is_symmetric(1e-12) && (0..w.rows()).all(|i| w[(i, i)] == 0.0)
}

/// Views a weight matrix as an undirected graph.
///
/// A rows×cols layer map becomes a bipartite graph on `rows + cols`
/// vertices (row `i` is vertex `i`, column `j` is vertex `rows + j`). A
/// square symmetric matrix with zero diagonal is read directly as an
/// adjacency matrix on `rows` vertices. Entries with `|w| ≤ threshold` are
/// dropped.
pub fn weight_matrix_to_graph(w: &DenseMatrix, threshold: f64) -> WeightedGraph {
    let mut edges = Vec::new();
    if is_adjacency_like(w) {
        for i in 0..w.rows() {
            for j in i + 1..w.cols() {
                let v = w[(i, j)];
                if v.abs() > threshold {
                    edges.push(Edge { i, j, w: v });
                }
            }
        }
        WeightedGraph {
            n: w.rows(),
            directed: false,
            edges,
        }
    } else {
        bipartite_weight_graph(w, threshold)
    }
}

/// The bipartite reading of [`weight_matrix_to_graph`], regardless of shape.
pub fn bipartite_weight_graph(w: &DenseMatrix, threshold: f64) -> WeightedGraph {
    let r = w.rows();
    let mut edges = Vec::new();
    for i in 0..r {
        for (j, &v) in w.row(i).iter().enumerate() {
            if v.abs() > threshold {
                edges.push(Edge { i, j: r + j, w: v });
            }
        }
    }
    WeightedGraph {
        n: r + w.cols(),
        directed: false,
        edges,
    }
}

/// Connected components of the subgraph made of edges that satisfy `keep`.
/// Component ids are contiguous and ordered by smallest member vertex.
pub(crate) fn components_where(g: &WeightedGraph, keep: impl Fn(&Edge) -> bool) -> Vec<usize> {
    let n = g.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let next = p[c];
            p[c] = r;
            c = next;
        }
        r
    }
    for e in g.edges().iter().filter(|e| keep(e)) {
        let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0; n];
    for v in 0..n {
        let r = find(&mut parent, v);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        out[v] = label[r];
    }
    out
}

/// Unordered vertex pairs `(i, j)`, `i < j`, that are not yet edges.
pub fn non_edges(g: &WeightedGraph) -> Vec<(usize, usize)> {
    let present: HashSet<(usize, usize)> = g
        .edges()
        .iter()
        .map(|e| (e.i.min(e.j), e.i.max(e.j)))
        .collect();
    let mut out = Vec::new();
    for i in 0..g.n() {
        for j in i + 1..g.n() {
            if !present.contains(&(i, j)) {
                out.push((i, j));
            }
        }
    }
    out
}
