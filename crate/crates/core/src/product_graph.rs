//! Cartesian product of a row graph and a column graph.
//!
//! Pixel `(i, u)` (image row `i`, image column `u`) is node `i * N + u`. With
//! `A_r`, `A_c` the row and column adjacencies:
//!
//! ```text
//! A2 = A_r (x) I + I (x) A_c
//! M  = A_r (x) A_c + A_c (x) A_r
//! A_prod = binarize(A2 .* M)
//! ```
//!
//! `A2` is the plain Cartesian product; the elementwise mask keeps only those
//! Cartesian edges that the symmetrized Kronecker term also supports.

use ndarray::{Array2, LinalgScalar};

use crate::corrgraph::{GraphAdjacency, GraphError};

/// Kronecker product: `out[(i, u), (j, v)] = a[i, j] * b[u, v]`.
pub fn kron<T: LinalgScalar>(a: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::from_elem((ar * br, ac * bc), T::zero());
    for ((i, j), &x) in a.indexed_iter() {
        for ((u, v), &y) in b.indexed_iter() {
            out[[i * br + u, j * bc + v]] = x * y;
        }
    }
    out
}

fn check_dims(ar: &GraphAdjacency, ac: &GraphAdjacency) -> Result<usize, GraphError> {
    if ar.node_count() != ac.node_count() {
        return Err(GraphError::DimMismatch(ar.node_count(), ac.node_count()));
    }
    Ok(ar.node_count())
}

fn dense_u32(g: &GraphAdjacency) -> Array2<u32> {
    g.to_dense().mapv(u32::from)
}

/// `r (x) I + I (x) c` for any square matrices of equal size.
pub fn cartesian_sum_dense(r: &Array2<u32>, c: &Array2<u32>) -> Array2<u32> {
    assert_eq!(r.dim(), c.dim(), "factors must have equal shape");
    let eye = Array2::<u32>::eye(r.nrows());
    kron(r, &eye) + kron(&eye, c)
}

/// `r (x) c + c (x) r` for any square matrices of equal size.
pub fn kronecker_mask_dense(r: &Array2<u32>, c: &Array2<u32>) -> Array2<u32> {
    assert_eq!(r.dim(), c.dim(), "factors must have equal shape");
    kron(r, c) + kron(c, r)
}

/// `A_r (x) I + I (x) A_c`, unbinarized. Diagonal entries reach 2 when both
/// factors carry a self-loop.
pub fn cartesian_sum(ar: &GraphAdjacency, ac: &GraphAdjacency) -> Result<Array2<u32>, GraphError> {
    check_dims(ar, ac)?;
    Ok(cartesian_sum_dense(&dense_u32(ar), &dense_u32(ac)))
}

/// `A_r (x) A_c + A_c (x) A_r`.
pub fn kronecker_mask(ar: &GraphAdjacency, ac: &GraphAdjacency) -> Result<Array2<u32>, GraphError> {
    check_dims(ar, ac)?;
    Ok(kronecker_mask_dense(&dense_u32(ar), &dense_u32(ac)))
}

/// The integer matrix `A2 .* M` before binarization, built densely from the
/// definition. `O(N^4)` memory; meant for inspection and tests.
pub fn masked_product_raw(
    ar: &GraphAdjacency,
    ac: &GraphAdjacency,
) -> Result<Array2<u32>, GraphError> {
    Ok(cartesian_sum(ar, ac)? * kronecker_mask(ar, ac)?)
}

/// Product graph over `side * side` pixel nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductAdjacency {
    side: usize,
    graph: GraphAdjacency,
}

impl ProductAdjacency {
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn node_index(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    pub fn graph(&self) -> &GraphAdjacency {
        &self.graph
    }

    pub fn into_graph(self) -> GraphAdjacency {
        self.graph
    }
}

/// Binarized masked Cartesian product.
///
/// Only entries in the support of `A2` can survive the mask, so the edge set
/// is enumerated from the factor edges directly in `O(N * (|E_r| + |E_c|))`:
/// - `(i,u)-(j,u)` for row edge `i-j`: `A2 = A_r[i,j]`, mask `A_r[i,j] A_c[u,u] + A_c[i,j] A_r[u,u]`
/// - `(i,u)-(i,v)` for column edge `u-v`: `A2 = A_c[u,v]`, mask `A_r[i,i] A_c[u,v] + A_c[i,i] A_r[u,v]`
pub fn masked_product(
    ar: &GraphAdjacency,
    ac: &GraphAdjacency,
) -> Result<ProductAdjacency, GraphError> {
    let n = check_dims(ar, ac)?;
    let r_loop: Vec<bool> = (0..n).map(|k| ar.has_self_loop(k)).collect();
    let c_loop: Vec<bool> = (0..n).map(|k| ac.has_self_loop(k)).collect();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let node = |row: usize, col: usize| (row * n + col) as u32;

    for &(i, j) in ar.edges() {
        let (i, j) = (i as usize, j as usize);
        let c_ij = ac.contains(i, j);
        for u in 0..n {
            if c_loop[u] || (c_ij && r_loop[u]) {
                edges.push((node(i, u), node(j, u)));
            }
        }
    }
    for &(u, v) in ac.edges() {
        let (u, v) = (u as usize, v as usize);
        let r_uv = ar.contains(u, v);
        for i in 0..n {
            if r_loop[i] || (c_loop[i] && r_uv) {
                edges.push((node(i, u), node(i, v)));
            }
        }
    }
    // Diagonal entries come from both terms; `from_edges` merges them.
    let graph = GraphAdjacency::from_edges(
        n * n,
        edges.into_iter().map(|(a, b)| (a as usize, b as usize)),
    )?;
    Ok(ProductAdjacency { side: n, graph })
}
