//! Row and column graphs inferred from lagged correlations.
//!
//! For an `N x N` image `A` and lag `n`, the row correlation matrix is
//! `r_n = (1/N) A (C^n A)^T`, where `C^n A` rotates the rows of `A` so that
//! row `i` becomes row `(i + n) mod N`. Every unordered row pair `{i, j}`
//! (diagonal included) gets the vector of its symmetrized correlations across
//! all `N` lags, and a two-cluster Lloyd's k-means splits the pairs into edges
//! and non-edges. Column graphs run the same procedure on `A^T`.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1};
use thiserror::Error;

use crate::image_io::Image;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("lag {lag} out of range for dimension {n}")]
    LagOutOfRange { lag: usize, n: usize },
    #[error("expected {expected} pair labels, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("adjacency matrix is not square and symmetric with 0/1 entries")]
    NotSymmetricBinary,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Row,
    Column,
}

/// The cyclic shift permutation `C` of size `n`, with `C[i, (i + 1) mod n] = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CyclicShift {
    n: usize,
}

impl CyclicShift {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    /// Row of the source that lands in row `i` after applying `C^lag`.
    #[inline]
    pub fn source_index(&self, i: usize, lag: usize) -> usize {
        (i + lag) % self.n
    }

    /// Dense `C^lag`.
    pub fn matrix(&self, lag: usize) -> Array2<f64> {
        Array2::from_shape_fn((self.n, self.n), |(i, j)| {
            if j == self.source_index(i, lag) {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// `C^n A`: row `i` of the result is row `(i + n) mod N` of `A`.
pub fn lagged_image_rows(a: &Image, lag: usize) -> Result<Image, GraphError> {
    let n = a.side();
    if lag >= n {
        return Err(GraphError::LagOutOfRange { lag, n });
    }
    let shift = CyclicShift::new(n);
    let src = a.pixels();
    let out = Array2::from_shape_fn((n, n), |(i, u)| src[[shift.source_index(i, lag), u]]);
    Ok(Image::from_array(out).expect("row rotation preserves range"))
}

/// `N` lag-indexed `N x N` correlation matrices for one axis of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationStack {
    pub axis: Axis,
    pub mats: Vec<Array2<f64>>,
}

impl CorrelationStack {
    pub fn side(&self) -> usize {
        self.mats.len()
    }
}

fn lagged_correlations(pixels: &Array2<f64>, axis: Axis) -> CorrelationStack {
    let n = pixels.nrows();
    let shift = CyclicShift::new(n);
    let scale = 1.0 / n as f64;
    // Plain loops: every entry is summed in the same order regardless of its
    // position, which keeps shift-equivariance bit-exact.
    let mats = (0..n)
        .map(|lag| {
            Array2::from_shape_fn((n, n), |(i, j)| {
                let a = pixels.row(i);
                let b = pixels.row(shift.source_index(j, lag));
                let mut acc = 0.0;
                for (x, y) in a.iter().zip(b.iter()) {
                    acc += x * y;
                }
                acc * scale
            })
        })
        .collect();
    CorrelationStack { axis, mats }
}

/// `r_n = (1/N) A (C^n A)^T` for `n = 0..N`.
pub fn row_correlations(a: &Image) -> CorrelationStack {
    lagged_correlations(a.pixels(), Axis::Row)
}

/// Column-to-column correlations: [`row_correlations`] of `A^T`.
pub fn col_correlations(a: &Image) -> CorrelationStack {
    let t = a.pixels().t().to_owned();
    lagged_correlations(&t, Axis::Column)
}

pub fn correlations(a: &Image, axis: Axis) -> CorrelationStack {
    match axis {
        Axis::Row => row_correlations(a),
        Axis::Column => col_correlations(a),
    }
}

/// Number of unordered pairs `{i, j}`, `i <= j`, over `n` nodes.
pub fn pair_count(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Unordered node pairs in lexicographic order: `(0,0), (0,1), .., (1,1), ..`.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i..n).map(move |j| (i, j)))
}

/// One feature vector per unordered node pair, rows in [`pairs`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatureTable {
    pub n_nodes: usize,
    pub pairs: Vec<(usize, usize)>,
    pub features: Array2<f64>,
}

impl PairFeatureTable {
    /// Table with arbitrary rows; used by tests and by callers that cluster
    /// something other than correlation stacks.
    pub fn from_rows(pairs: Vec<(usize, usize)>, features: Array2<f64>) -> Self {
        assert_eq!(pairs.len(), features.nrows());
        let n_nodes = pairs.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0);
        Self {
            n_nodes,
            pairs,
            features,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn pair_features(stack: &CorrelationStack) -> PairFeatureTable {
    let n = stack.side();
    let pairs: Vec<_> = pairs(n).collect();
    let features = Array2::from_shape_fn((pairs.len(), n), |(p, lag)| {
        let (i, j) = pairs[p];
        let m = &stack.mats[lag];
        (m[[i, j]] + m[[j, i]]) / 2.0
    });
    PairFeatureTable {
        n_nodes: n,
        pairs,
        features,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    Edge,
    NonEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KMeansStatus {
    Converged,
    MaxIters,
    /// Every pair vector is identical; all pairs are labeled non-edge.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOutcome {
    /// One label per table row.
    pub labels: Vec<EdgeLabel>,
    pub iterations: usize,
    pub status: KMeansStatus,
}

pub const DEFAULT_KMEANS_ITERS: usize = 100;
const DEGENERATE_TOL: f64 = 1e-12;

fn lex_cmp(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn sq_dist(a: ArrayView1<f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Within-cluster sum of squared distances to cluster means.
pub fn partition_sse(features: &Array2<f64>, in_first: &[bool]) -> f64 {
    let dim = features.ncols();
    let mut sse = 0.0;
    for side in [true, false] {
        let members: Vec<_> = (0..features.nrows())
            .filter(|&r| in_first[r] == side)
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut mean = vec![0.0; dim];
        for &r in &members {
            for (m, x) in mean.iter_mut().zip(features.row(r)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= members.len() as f64);
        sse += members
            .iter()
            .map(|&r| sq_dist(features.row(r), &mean))
            .sum::<f64>();
    }
    sse
}

/// Two-cluster Lloyd's k-means over the rows of `table`.
///
/// Rows are visited in a canonical order (lexicographic by feature vector,
/// then by pair), so the result depends only on the multiset of
/// (pair, vector) rows and not on row order or node numbering. The first
/// centroid starts at the largest-norm vector, the second at the smallest;
/// ties go to the earliest row in canonical order. Pairs in the cluster whose
/// final centroid has the larger norm are edges.
pub fn kmeans2(table: &PairFeatureTable, max_iters: usize) -> KMeansOutcome {
    assert!(max_iters >= 1, "kmeans2 needs at least one iteration");
    let rows = table.len();
    let dim = table.features.ncols();
    let feats = &table.features;
    if rows == 0 {
        return KMeansOutcome {
            labels: Vec::new(),
            iterations: 0,
            status: KMeansStatus::Converged,
        };
    }

    let first = feats.row(0);
    let degenerate = (1..rows).all(|r| {
        feats
            .row(r)
            .iter()
            .zip(first.iter())
            .all(|(x, y)| (x - y).abs() <= DEGENERATE_TOL)
    });
    if degenerate {
        return KMeansOutcome {
            labels: vec![EdgeLabel::NonEdge; rows],
            iterations: 0,
            status: KMeansStatus::Degenerate,
        };
    }

    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| {
        lex_cmp(feats.row(a), feats.row(b)).then_with(|| table.pairs[a].cmp(&table.pairs[b]))
    });

    let norms: Vec<f64> = (0..rows)
        .map(|r| feats.row(r).iter().map(|x| x * x).sum())
        .collect();
    // `order` is canonical, so strict comparisons keep the earliest on ties.
    let mut hi = order[0];
    let mut lo = order[0];
    for &r in &order[1..] {
        if norms[r] > norms[hi] {
            hi = r;
        }
        if norms[r] < norms[lo] {
            lo = r;
        }
    }
    let mut centroids = [feats.row(hi).to_vec(), feats.row(lo).to_vec()];
    if centroids[0] == centroids[1] {
        // All norms equal: seed the second centroid at the farthest point.
        let mut far = order[0];
        let mut best = -1.0;
        for &r in &order {
            let d = sq_dist(feats.row(r), &centroids[0]);
            if d > best {
                best = d;
                far = r;
            }
        }
        centroids[1] = feats.row(far).to_vec();
    }

    let mut assign: Vec<u8> = vec![u8::MAX; rows];
    let mut iterations = 0;
    let mut status = KMeansStatus::MaxIters;
    while iterations < max_iters {
        iterations += 1;
        let mut changed = false;
        for r in 0..rows {
            let d0 = sq_dist(feats.row(r), &centroids[0]);
            let d1 = sq_dist(feats.row(r), &centroids[1]);
            let c = if d1 < d0 { 1 } else { 0 };
            if assign[r] != c {
                assign[r] = c;
                changed = true;
            }
        }
        if !changed {
            status = KMeansStatus::Converged;
            break;
        }
        let mut sums = [vec![0.0; dim], vec![0.0; dim]];
        let mut counts = [0usize; 2];
        for &r in &order {
            let c = assign[r] as usize;
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(feats.row(r)) {
                *s += x;
            }
        }
        for c in 0..2 {
            // An emptied cluster keeps its previous centroid.
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                centroids[c] = sums[c].iter().map(|s| s * inv).collect();
            }
        }
    }

    let edge_cluster = if sq_norm(&centroids[1]) > sq_norm(&centroids[0]) {
        1
    } else {
        0
    };
    let labels = assign
        .iter()
        .map(|&c| {
            if c == edge_cluster {
                EdgeLabel::Edge
            } else {
                EdgeLabel::NonEdge
            }
        })
        .collect();
    KMeansOutcome {
        labels,
        iterations,
        status,
    }
}

/// Undirected, unweighted graph stored as a sorted coordinate edge list.
///
/// Each edge appears once as `(i, j)` with `i <= j`; `(i, i)` is a self-loop.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GraphAdjacency {
    n: usize,
    edges: Vec<(u32, u32)>,
}

impl GraphAdjacency {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
        }
    }

    /// Builds from any collection of endpoint pairs; orientation and
    /// duplicates are normalized away.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut out = Vec::new();
        for (a, b) in edges {
            for node in [a, b] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            out.push((a.min(b) as u32, a.max(b) as u32));
        }
        out.sort_unstable();
        out.dedup();
        Ok(Self { n, edges: out })
    }

    pub(crate) fn from_sorted_unchecked(n: usize, edges: Vec<(u32, u32)>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(edges.iter().all(|&(i, j)| i <= j && (j as usize) < n));
        Self { n, edges }
    }

    /// Accepts a symmetric matrix with entries in `{0, 1}`.
    pub fn from_dense(m: &Array2<u8>) -> Result<Self, GraphError> {
        let (r, c) = m.dim();
        if r != c {
            return Err(GraphError::NotSymmetricBinary);
        }
        let mut edges = Vec::new();
        for i in 0..r {
            for j in i..r {
                let (x, y) = (m[[i, j]], m[[j, i]]);
                if x > 1 || x != y {
                    return Err(GraphError::NotSymmetricBinary);
                }
                if x == 1 {
                    edges.push((i as u32, j as u32));
                }
            }
        }
        Ok(Self { n: r, edges })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j) as u32, i.max(j) as u32);
        self.edges.binary_search(&key).is_ok()
    }

    pub fn has_self_loop(&self, i: usize) -> bool {
        self.contains(i, i)
    }

    /// Number of neighbors, counting a self-loop once.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i as usize] += 1;
            if i != j {
                deg[j as usize] += 1;
            }
        }
        deg
    }

    pub fn to_dense(&self) -> Array2<u8> {
        let mut m = Array2::zeros((self.n, self.n));
        for &(i, j) in &self.edges {
            m[[i as usize, j as usize]] = 1;
            m[[j as usize, i as usize]] = 1;
        }
        m
    }

    /// Graph with node `k` renamed to `perm[k]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        Self::from_edges(
            self.n,
            self.edges
                .iter()
                .map(|&(i, j)| (perm[i as usize], perm[j as usize])),
        )
        .expect("permutation stays in range")
    }
}

/// Assembles the graph from per-pair labels given in [`pairs`] order.
pub fn build_graph(labels: &[EdgeLabel], n: usize) -> Result<GraphAdjacency, GraphError> {
    let expected = pair_count(n);
    if labels.len() != expected {
        return Err(GraphError::LabelCount {
            expected,
            got: labels.len(),
        });
    }
    let edges = pairs(n)
        .zip(labels)
        .filter(|(_, &l)| l == EdgeLabel::Edge)
        .map(|((i, j), _)| (i as u32, j as u32))
        .collect();
    Ok(GraphAdjacency::from_sorted_unchecked(n, edges))
}

/// Row graph (`Axis::Row`) or column graph (`Axis::Column`) of an image.
pub fn infer_graph(a: &Image, axis: Axis, max_iters: usize) -> GraphAdjacency {
    let table = pair_features(&correlations(a, axis));
    let outcome = kmeans2(&table, max_iters);
    build_graph(&outcome.labels, a.side()).expect("table covers every pair")
}

/// 4-neighbor lattice on `n x n` pixels, node `(i, u)` at `i * n + u`.
pub fn grid_graph(n: usize) -> GraphAdjacency {
    let mut edges = Vec::with_capacity(2 * n * n.saturating_sub(1));
    for i in 0..n {
        for u in 0..n {
            let k = (i * n + u) as u32;
            if u + 1 < n {
                edges.push((k, k + 1));
            }
            if i + 1 < n {
                edges.push((k, k + n as u32));
            }
        }
    }
    edges.sort_unstable();
    GraphAdjacency::from_sorted_unchecked(n * n, edges)
}
