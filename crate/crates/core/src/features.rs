//! Node feature builders.
//!
//! - pixel features: the raw intensities a node covers (a row, a column, or
//!   one pixel);
//! - standard features: per-pixel 3x3 mean and variance plus Sobel gradient
//!   magnitude and direction;
//! - correlation features: rows of `(G_r (x) G_c + G_c (x) G_r) / 2`, where
//!   `G_r` averages `(A + (C^l A)^T) / 2` over all lags `l` and `G_c` does the
//!   same for `A^T`.

use ndarray::{s, Array1, Array2, ArrayView2};
use thiserror::Error;

use crate::corrgraph::{Axis, CyclicShift};
use crate::image_io::Image;
use crate::kinds::{FeatureKind, GraphKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("standard features need an image side of at least 3, got {0}")]
    ImageTooSmall(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("{features} features are not defined for {graph} graphs")]
    Unsupported {
        graph: GraphKind,
        features: FeatureKind,
    },
}

/// A `num_nodes x feature_dim` matrix, possibly kept in factored form.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Dense(Array2<f64>),
    /// `(left (x) right + right (x) left) / 2` for square `left`, `right` of
    /// equal size, never materialized.
    KronMean {
        left: Array2<f64>,
        right: Array2<f64>,
    },
}

/// `(a (x) b) w` without forming the Kronecker product, for square `n x n`
/// factors and `w` of shape `(n*n) x k`.
fn kron_apply(a: ArrayView2<f64>, b: ArrayView2<f64>, w: ArrayView2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let k = w.ncols();
    // t[j, (u, c)] = sum_v b[u, v] w[(j, v), c]
    let mut t = Array2::<f64>::zeros((n, n * k));
    for j in 0..n {
        let block = w.slice(s![j * n..(j + 1) * n, ..]);
        let prod = b.dot(&block);
        t.row_mut(j)
            .assign(&prod.into_shape_with_order(n * k).expect("contiguous"));
    }
    // out[i, (u, c)] = sum_j a[i, j] t[j, (u, c)]
    a.dot(&t)
        .into_shape_with_order((n * n, k))
        .expect("contiguous")
}

impl FeatureMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            FeatureMatrix::Dense(m) => m.nrows(),
            FeatureMatrix::KronMean { left, .. } => left.nrows() * left.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            FeatureMatrix::Dense(m) => m.ncols(),
            FeatureMatrix::KronMean { left, .. } => left.ncols() * left.ncols(),
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            FeatureMatrix::Dense(m) => m.clone(),
            FeatureMatrix::KronMean { left, right } => {
                let n = left.nrows();
                Array2::from_shape_fn((n * n, n * n), |(r, c)| {
                    let (i, u) = (r / n, r % n);
                    let (j, v) = (c / n, c % n);
                    (left[[i, j]] * right[[u, v]] + right[[i, j]] * left[[u, v]]) / 2.0
                })
            }
        }
    }

    /// Writes row `r` into `out`, which must have `ncols()` entries.
    pub fn row_into(&self, r: usize, out: &mut [f64]) {
        match self {
            FeatureMatrix::Dense(m) => {
                for (o, x) in out.iter_mut().zip(m.row(r)) {
                    *o = *x;
                }
            }
            FeatureMatrix::KronMean { left, right } => {
                let n = left.nrows();
                let (i, u) = (r / n, r % n);
                for j in 0..n {
                    let (lij, rij) = (left[[i, j]], right[[i, j]]);
                    for v in 0..n {
                        out[j * n + v] = (lij * right[[u, v]] + rij * left[[u, v]]) / 2.0;
                    }
                }
            }
        }
    }

    pub fn row(&self, r: usize) -> Array1<f64> {
        let mut out = vec![0.0; self.ncols()];
        self.row_into(r, &mut out);
        Array1::from(out)
    }

    /// `self * w`.
    pub fn matmul(&self, w: &Array2<f64>) -> Array2<f64> {
        match self {
            FeatureMatrix::Dense(m) => m.dot(w),
            FeatureMatrix::KronMean { left, right } => {
                let lr = kron_apply(left.view(), right.view(), w.view());
                let rl = kron_apply(right.view(), left.view(), w.view());
                (lr + rl) * 0.5
            }
        }
    }

    /// `self^T * g`.
    pub fn t_matmul(&self, g: &Array2<f64>) -> Array2<f64> {
        match self {
            FeatureMatrix::Dense(m) => m.t().dot(g),
            FeatureMatrix::KronMean { left, right } => {
                let lr = kron_apply(left.t(), right.t(), g.view());
                let rl = kron_apply(right.t(), left.t(), g.view());
                (lr + rl) * 0.5
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        match self {
            FeatureMatrix::Dense(m) => m.iter().all(|x| x.is_finite()),
            FeatureMatrix::KronMean { left, right } => {
                left.iter().chain(right.iter()).all(|x| x.is_finite())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub kind: FeatureKind,
    pub matrix: FeatureMatrix,
}

impl NodeFeatures {
    pub fn num_nodes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.matrix.ncols()
    }
}

pub fn pixel_features(a: &Image, graph: GraphKind) -> NodeFeatures {
    let px = a.pixels();
    let n = a.side();
    let matrix = match graph {
        GraphKind::Row => px.clone(),
        GraphKind::Column => px.t().to_owned(),
        GraphKind::Grid | GraphKind::Product => px
            .to_owned()
            .into_shape_with_order((n * n, 1))
            .expect("square image"),
    };
    NodeFeatures {
        kind: FeatureKind::Pixel,
        matrix: FeatureMatrix::Dense(matrix),
    }
}

/// Per pixel, in order: 3x3 mean, 3x3 population variance, Sobel gradient
/// magnitude, gradient direction `atan2(gy, gx)` in `(-pi, pi]`. Borders
/// replicate the nearest pixel. `x` runs along columns, `y` down rows.
pub fn standard_features(a: &Image) -> Result<NodeFeatures, FeatureError> {
    let n = a.side();
    if n < 3 {
        return Err(FeatureError::ImageTooSmall(n));
    }
    let px = a.pixels();
    let clamp = |k: isize| k.clamp(0, n as isize - 1) as usize;
    let mut out = Array2::zeros((n * n, 4));
    for i in 0..n {
        for u in 0..n {
            let mut window = [[0.0; 3]; 3];
            for (di, row) in window.iter_mut().enumerate() {
                for (du, w) in row.iter_mut().enumerate() {
                    *w = px[[
                        clamp(i as isize + di as isize - 1),
                        clamp(u as isize + du as isize - 1),
                    ]];
                }
            }
            let flat = window.iter().flatten();
            let mean = flat.clone().sum::<f64>() / 9.0;
            let var = flat.map(|w| (w - mean) * (w - mean)).sum::<f64>() / 9.0;
            // Sobel as (far side - near side) so equal sides cancel exactly.
            let side_sum = |a: f64, b: f64, c: f64| a + 2.0 * b + c;
            let w = &window;
            let gx = side_sum(w[0][2], w[1][2], w[2][2]) - side_sum(w[0][0], w[1][0], w[2][0]);
            let gy = side_sum(w[2][0], w[2][1], w[2][2]) - side_sum(w[0][0], w[0][1], w[0][2]);
            let mut dir = gy.atan2(gx);
            if dir <= -std::f64::consts::PI {
                dir = std::f64::consts::PI;
            }
            let k = i * n + u;
            out[[k, 0]] = mean;
            out[[k, 1]] = var;
            out[[k, 2]] = (gx * gx + gy * gy).sqrt();
            out[[k, 3]] = dir;
        }
    }
    Ok(NodeFeatures {
        kind: FeatureKind::Standard,
        matrix: FeatureMatrix::Dense(out),
    })
}

/// `N x N` lag-averaged feature matrix for one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFeatureMatrix {
    pub axis: Axis,
    pub g: Array2<f64>,
}

/// `G = (1/N) sum_l (A + (C^l A)^T) / 2`, with `A` replaced by `A^T` for the
/// column axis.
pub fn correlation_feature_matrix(a: &Image, axis: Axis) -> CorrelationFeatureMatrix {
    let src = match axis {
        Axis::Row => a.pixels().clone(),
        Axis::Column => a.pixels().t().to_owned(),
    };
    let n = src.nrows();
    let shift = CyclicShift::new(n);
    let mut acc = Array2::<f64>::zeros((n, n));
    for lag in 0..n {
        // (C^l A)^T [i, j] = A[(j + l) mod n, i]
        for i in 0..n {
            for j in 0..n {
                acc[[i, j]] += (src[[i, j]] + src[[shift.source_index(j, lag), i]]) / 2.0;
            }
        }
    }
    acc /= n as f64;
    CorrelationFeatureMatrix { axis, g: acc }
}

/// Correlation node features `(G_r (x) G_c + G_c (x) G_r) / 2`, kept factored.
pub fn g_mean(
    g_r: &CorrelationFeatureMatrix,
    g_c: &CorrelationFeatureMatrix,
) -> Result<NodeFeatures, FeatureError> {
    for m in [&g_r.g, &g_c.g] {
        if m.nrows() != m.ncols() {
            return Err(FeatureError::DimMismatch(m.nrows(), m.ncols()));
        }
    }
    if g_r.g.nrows() != g_c.g.nrows() {
        return Err(FeatureError::DimMismatch(g_r.g.nrows(), g_c.g.nrows()));
    }
    Ok(NodeFeatures {
        kind: FeatureKind::Correlation,
        matrix: FeatureMatrix::KronMean {
            left: g_r.g.clone(),
            right: g_c.g.clone(),
        },
    })
}

pub fn correlation_features(a: &Image) -> NodeFeatures {
    let g_r = correlation_feature_matrix(a, Axis::Row);
    let g_c = correlation_feature_matrix(a, Axis::Column);
    g_mean(&g_r, &g_c).expect("both factors come from the same image")
}

/// Diagonal of `G_mean` as an `N x N` image, for visualization.
pub fn correlation_feature_map(a: &Image) -> Array2<f64> {
    let n = a.side();
    let g_r = correlation_feature_matrix(a, Axis::Row).g;
    let g_c = correlation_feature_matrix(a, Axis::Column).g;
    Array2::from_shape_fn((n, n), |(i, u)| {
        (g_r[[i, i]] * g_c[[u, u]] + g_c[[i, i]] * g_r[[u, u]]) / 2.0
    })
}

/// Features of `kind` for a graph of `graph` kind.
pub fn node_features(
    a: &Image,
    graph: GraphKind,
    kind: FeatureKind,
) -> Result<NodeFeatures, FeatureError> {
    if !crate::kinds::is_valid_combination(graph, kind) {
        return Err(FeatureError::Unsupported {
            graph,
            features: kind,
        });
    }
    match kind {
        FeatureKind::Pixel => Ok(pixel_features(a, graph)),
        FeatureKind::Standard => standard_features(a),
        FeatureKind::Correlation => Ok(correlation_features(a)),
    }
}
