//! A small graph convolutional classifier with hand-written gradients.
//!
//! Layer `l` computes `H[l+1] = relu(norm(A_hat H[l] W[l]))` with
//! `A_hat = D^-1/2 (A + I) D^-1/2`. The graph embedding is the mean of the
//! last layer's node rows, followed by one affine map to class logits and a
//! softmax cross-entropy loss. Training uses Adam on shuffled mini-batches;
//! per-sample gradients may be computed in parallel but are always summed in
//! batch order, so runs are bit-reproducible for a given seed.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corrgraph::GraphAdjacency;
use crate::features::FeatureMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum GnnError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("label {label} outside 0..{classes}")]
    LabelOutOfRange { label: u8, classes: usize },
    #[error("loading sample {index}: {message}")]
    Source { index: usize, message: String },
}

/// Per-layer normalization applied between propagation and ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    None,
    /// Standardize each channel over the nodes of the graph.
    Graph,
    /// Standardize each node's row over its channels.
    Layer,
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::None => "none",
            NormKind::Graph => "graph",
            NormKind::Layer => "layer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(NormKind::None),
            "graph" => Some(NormKind::Graph),
            "layer" => Some(NormKind::Layer),
            _ => None,
        }
    }
}

const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GcnConfig {
    /// Widths of the graph convolution layers, input side first.
    pub layer_dims: Vec<usize>,
    pub num_classes: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Multiplier on the Glorot bound `sqrt(6 / (fan_in + fan_out))`.
    pub weight_init_scale: f64,
    pub norm: NormKind,
}

impl Default for GcnConfig {
    fn default() -> Self {
        Self::desk(0)
    }
}

impl GcnConfig {
    /// Three width-64 layers, lr 1e-3, 30 epochs, batches of 32.
    pub fn desk(seed: u64) -> Self {
        Self {
            layer_dims: vec![64, 64, 64],
            num_classes: 10,
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 32,
            seed,
            weight_init_scale: 1.0,
            norm: NormKind::Graph,
        }
    }

    /// Seven-layer pyramid widening from 64 to 1024.
    pub fn pyramid(seed: u64) -> Self {
        Self {
            layer_dims: vec![64, 128, 256, 512, 1024, 1024, 1024],
            ..Self::desk(seed)
        }
    }

    pub fn validate(&self) -> Result<(), GnnError> {
        let bad = |m: &str| Err(GnnError::InvalidConfig(m.to_owned()));
        if self.layer_dims.is_empty() || self.layer_dims.contains(&0) {
            return bad("layer_dims must be non-empty and positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.num_classes < 2 {
            return bad("num_classes must be at least 2");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        Ok(())
    }
}

/// `A_hat` in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m[[i, self.indices[k] as usize]] = self.values[k];
            }
        }
        m
    }

    /// `A_hat * x`.
    pub fn matmul(&self, x: &Array2<f64>) -> Array2<f64> {
        let cols = x.ncols();
        let mut out = Array2::zeros((self.n, cols));
        for i in 0..self.n {
            let mut row = out.row_mut(i);
            for k in self.indptr[i]..self.indptr[i + 1] {
                row.scaled_add(self.values[k], &x.row(self.indices[k] as usize));
            }
        }
        out
    }

    /// Same matrix with nodes renamed by `perm` (node `k` becomes `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inv = vec![0; self.n];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        let mut indptr = vec![0];
        let mut indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for new_i in 0..self.n {
            let old_i = inv[new_i];
            let mut row: Vec<(u32, f64)> = (self.indptr[old_i]..self.indptr[old_i + 1])
                .map(|k| (perm[self.indices[k] as usize] as u32, self.values[k]))
                .collect();
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            n: self.n,
            indptr,
            indices,
            values,
        }
    }
}

/// `D^-1/2 (A + I) D^-1/2`, where `D` is the degree matrix of `A + I`.
///
/// A self-loop already present in `A` is kept, so that diagonal entry of
/// `A + I` is 2.
pub fn normalize_adjacency(a: &GraphAdjacency) -> NormalizedAdjacency {
    let n = a.node_count();
    let mut rows: Vec<Vec<(u32, f64)>> = (0..n).map(|i| vec![(i as u32, 1.0)]).collect();
    for &(i, j) in a.edges() {
        if i == j {
            rows[i as usize][0].1 += 1.0;
        } else {
            rows[i as usize].push((j, 1.0));
            rows[j as usize].push((i, 1.0));
        }
    }
    let degree: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|&(_, w)| w).sum())
        .collect();
    let mut indptr = Vec::with_capacity(n + 1);
    indptr.push(0);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for (i, mut row) in rows.into_iter().enumerate() {
        row.sort_by_key(|&(j, _)| j);
        for (j, w) in row {
            indices.push(j);
            values.push(w / (degree[i] * degree[j as usize]).sqrt());
        }
        indptr.push(indices.len());
    }
    NormalizedAdjacency {
        n,
        indptr,
        indices,
        values,
    }
}

/// One classification example.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGraph {
    pub adjacency: Arc<NormalizedAdjacency>,
    pub features: Arc<FeatureMatrix>,
    pub label: u8,
}

impl NormalizedGraph {
    pub fn new(
        adjacency: Arc<NormalizedAdjacency>,
        features: Arc<FeatureMatrix>,
        label: u8,
    ) -> Result<Self, GnnError> {
        if adjacency.node_count() != features.nrows() {
            return Err(GnnError::ShapeMismatch(format!(
                "{} nodes but {} feature rows",
                adjacency.node_count(),
                features.nrows()
            )));
        }
        Ok(Self {
            adjacency,
            features,
            label,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Random-access collection of training examples.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sample(&self, index: usize) -> Result<Cow<'_, NormalizedGraph>, GnnError>;
}

impl SampleSource for [NormalizedGraph] {
    fn len(&self) -> usize {
        <[NormalizedGraph]>::len(self)
    }

    fn sample(&self, index: usize) -> Result<Cow<'_, NormalizedGraph>, GnnError> {
        Ok(Cow::Borrowed(&self[index]))
    }
}

impl SampleSource for Vec<NormalizedGraph> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn sample(&self, index: usize) -> Result<Cow<'_, NormalizedGraph>, GnnError> {
        Ok(Cow::Borrowed(&self[index]))
    }
}

/// Weights of every layer; gradients use the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub layers: Vec<Array2<f64>>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

impl GcnParams {
    /// Glorot-uniform weights drawn in layer order, zero output bias.
    pub fn init(input_dim: usize, cfg: &GcnConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut glorot = |fan_in: usize, fan_out: usize| {
            let s = cfg.weight_init_scale * (6.0 / (fan_in + fan_out) as f64).sqrt();
            if s == 0.0 {
                return Array2::zeros((fan_in, fan_out));
            }
            let dist = Uniform::new(-s, s).expect("finite bound");
            Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(&mut rng))
        };
        let mut fan_in = input_dim;
        let mut layers = Vec::with_capacity(cfg.layer_dims.len());
        for &d in &cfg.layer_dims {
            layers.push(glorot(fan_in, d));
            fan_in = d;
        }
        let w_out = glorot(fan_in, cfg.num_classes);
        Self {
            layers,
            w_out,
            b_out: Array1::zeros(cfg.num_classes),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            w_out: Array2::zeros(self.w_out.raw_dim()),
            b_out: Array1::zeros(self.b_out.len()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.b_out.len()
    }

    /// Every parameter as a flat slice, in a fixed order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self
            .layers
            .iter()
            .map(|w| w.as_slice().expect("standard layout"))
            .collect();
        v.push(self.w_out.as_slice().expect("standard layout"));
        v.push(self.b_out.as_slice().expect("standard layout"));
        v
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self
            .layers
            .iter_mut()
            .map(|w| w.as_slice_mut().expect("standard layout"))
            .collect();
        v.push(self.w_out.as_slice_mut().expect("standard layout"));
        v.push(self.b_out.as_slice_mut().expect("standard layout"));
        v
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|x| x * x)
            .sum()
    }
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

struct LayerCache {
    /// Post-normalization, pre-ReLU activations.
    normed: Array2<f64>,
    /// `1 / sqrt(var + eps)` per normalized group.
    inv_std: Array1<f64>,
    /// Post-ReLU output.
    out: Array2<f64>,
}

struct ForwardPass {
    layers: Vec<LayerCache>,
    readout: Array1<f64>,
    logits: Array1<f64>,
}

fn norm_forward(z: Array2<f64>, kind: NormKind) -> (Array2<f64>, Array1<f64>) {
    let axis = match kind {
        NormKind::None => return (z, Array1::zeros(0)),
        NormKind::Graph => Axis(0),
        NormKind::Layer => Axis(1),
    };
    let mean = z.mean_axis(axis).expect("non-empty");
    let centered = match kind {
        NormKind::Graph => &z - &mean.view().insert_axis(Axis(0)),
        _ => &z - &mean.view().insert_axis(Axis(1)),
    };
    let var = centered.mapv(|x| x * x).mean_axis(axis).expect("non-empty");
    let inv_std = var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
    let y = match kind {
        NormKind::Graph => centered * inv_std.view().insert_axis(Axis(0)),
        _ => centered * inv_std.view().insert_axis(Axis(1)),
    };
    (y, inv_std)
}

/// `dz = inv_std * (dy - mean(dy) - y * mean(dy * y))` over the normalized axis.
fn norm_backward(
    dy: Array2<f64>,
    y: &Array2<f64>,
    inv_std: &Array1<f64>,
    kind: NormKind,
) -> Array2<f64> {
    let axis = match kind {
        NormKind::None => return dy,
        NormKind::Graph => Axis(0),
        NormKind::Layer => Axis(1),
    };
    let mean_dy = dy.mean_axis(axis).expect("non-empty").insert_axis(axis);
    let mean_dyy = (&dy * y)
        .mean_axis(axis)
        .expect("non-empty")
        .insert_axis(axis);
    let scaled = (dy - &mean_dy) - &(y * &mean_dyy);
    scaled * inv_std.view().insert_axis(axis)
}

fn log_softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let lse = max + logits.mapv(|x| (x - max).exp()).sum().ln();
    logits.mapv(|x| x - lse)
}

/// Softmax cross-entropy of `logits` against class `label`.
pub fn cross_entropy(logits: &Array1<f64>, label: usize) -> f64 {
    -log_softmax(logits)[label]
}

/// Index of the largest logit; ties go to the lowest class id.
pub fn argmax(logits: &Array1<f64>) -> usize {
    let mut best = 0;
    for (k, &x) in logits.iter().enumerate() {
        if x > logits[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub config: GcnConfig,
    pub params: GcnParams,
}

impl GcnModel {
    pub fn new(input_dim: usize, config: GcnConfig) -> Result<Self, GnnError> {
        config.validate()?;
        let params = GcnParams::init(input_dim, &config);
        Ok(Self { config, params })
    }

    fn check(&self, g: &NormalizedGraph) -> Result<(), GnnError> {
        if g.feature_dim() != self.params.input_dim() {
            return Err(GnnError::ShapeMismatch(format!(
                "feature dim {} but first layer expects {}",
                g.feature_dim(),
                self.params.input_dim()
            )));
        }
        if g.adjacency.node_count() == 0 {
            return Err(GnnError::ShapeMismatch("graph has no nodes".into()));
        }
        if g.label as usize >= self.params.num_classes() {
            return Err(GnnError::LabelOutOfRange {
                label: g.label,
                classes: self.params.num_classes(),
            });
        }
        Ok(())
    }

    fn forward_pass(&self, g: &NormalizedGraph) -> ForwardPass {
        let p = &self.params;
        let mut layers: Vec<LayerCache> = Vec::with_capacity(p.layers.len());
        for (l, w) in p.layers.iter().enumerate() {
            let hw = match layers.last() {
                None => g.features.matmul(w),
                Some(prev) => prev.out.dot(w),
            };
            let z = g.adjacency.matmul(&hw);
            let (normed, inv_std) = norm_forward(z, self.config.norm);
            let out = normed.mapv(|x| x.max(0.0));
            layers.push(LayerCache {
                normed,
                inv_std,
                out,
            });
            debug_assert_eq!(layers.len(), l + 1);
        }
        let readout = layers
            .last()
            .expect("at least one layer")
            .out
            .mean_axis(Axis(0))
            .expect("non-empty graph");
        let logits = readout.dot(&p.w_out) + &p.b_out;
        ForwardPass {
            layers,
            readout,
            logits,
        }
    }

    /// Class logits for one graph.
    pub fn forward(&self, g: &NormalizedGraph) -> Result<Array1<f64>, GnnError> {
        self.check(g)?;
        Ok(self.forward_pass(g).logits)
    }

    pub fn loss(&self, g: &NormalizedGraph) -> Result<f64, GnnError> {
        Ok(cross_entropy(&self.forward(g)?, g.label as usize))
    }

    /// Loss, logits and exact gradients of the cross-entropy for one graph.
    pub fn backward(&self, g: &NormalizedGraph) -> Result<(f64, Array1<f64>, GcnParams), GnnError> {
        self.check(g)?;
        let p = &self.params;
        let fwd = self.forward_pass(g);
        let label = g.label as usize;
        let log_probs = log_softmax(&fwd.logits);
        let loss = -log_probs[label];
        let mut dlogits = log_probs.mapv(f64::exp);
        dlogits[label] -= 1.0;

        let mut grads = p.zeros_like();
        grads.b_out.assign(&dlogits);
        grads.w_out = standard(
            fwd.readout
                .view()
                .insert_axis(Axis(1))
                .dot(&dlogits.view().insert_axis(Axis(0))),
        );
        let dreadout = p.w_out.dot(&dlogits);
        let n_nodes = g.adjacency.node_count();
        let width = dreadout.len();
        let mut dh = Array2::from_shape_fn((n_nodes, width), |(_, c)| dreadout[c] / n_nodes as f64);

        for l in (0..p.layers.len()).rev() {
            let cache = &fwd.layers[l];
            let mut dy = dh;
            dy.zip_mut_with(&cache.normed, |d, &y| {
                if y <= 0.0 {
                    *d = 0.0;
                }
            });
            let dz = norm_backward(dy, &cache.normed, &cache.inv_std, self.config.norm);
            // A_hat is symmetric.
            let dhw = g.adjacency.matmul(&dz);
            grads.layers[l] = standard(if l == 0 {
                g.features.t_matmul(&dhw)
            } else {
                fwd.layers[l - 1].out.t().dot(&dhw)
            });
            dh = if l > 0 {
                dhw.dot(&p.layers[l].t())
            } else {
                Array2::zeros((0, 0))
            };
        }
        Ok((loss, fwd.logits, grads))
    }

    pub fn predict(&self, g: &NormalizedGraph) -> Result<usize, GnnError> {
        Ok(argmax(&self.forward(g)?))
    }
}

/// Fraction of graphs whose argmax logit equals the label.
pub fn evaluate<S: SampleSource + ?Sized>(model: &GcnModel, test: &S) -> Result<f64, GnnError> {
    if test.is_empty() {
        return Err(GnnError::EmptyDataset);
    }
    let hits = (0..test.len())
        .into_par_iter()
        .map(|i| {
            let g = test.sample(i)?;
            Ok(usize::from(model.predict(&g)? == g.label as usize))
        })
        .collect::<Result<Vec<_>, GnnError>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / test.len() as f64)
}

/// Accuracy of fixed predictions against labels.
pub fn accuracy(predictions: &[usize], labels: &[u8]) -> Result<f64, GnnError> {
    if predictions.is_empty() {
        return Err(GnnError::EmptyDataset);
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(&p, &l)| p == l as usize)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

struct Adam {
    m: GcnParams,
    v: GcnParams,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &GcnParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut GcnParams, grads: &GcnParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((p, g), m), v) in params
            .slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(self.m.slices_mut())
            .zip(self.v.slices_mut())
        {
            for k in 0..p.len() {
                m[k] = Self::BETA1 * m[k] + (1.0 - Self::BETA1) * g[k];
                v[k] = Self::BETA2 * v[k] + (1.0 - Self::BETA2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + Self::EPS);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch, measured before each batch update.
    pub loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Free-form label of the representation, e.g. `product+correlation`.
    pub representation: String,
    pub config: GcnConfig,
    pub train_size: usize,
    pub test_size: usize,
    pub feature_dim: usize,
    pub epochs: Vec<EpochStats>,
    pub test_accuracy: f64,
    /// Not part of the serialized report.
    pub wall_seconds: f64,
}

/// Columns of [`TrainReport::tsv_row`].
pub const REPORT_TSV_HEADER: &str =
    "representation\tseed\tepochs\ttrain_size\ttest_size\tfinal_loss\tfinal_train_acc\ttest_acc";

impl TrainReport {
    pub fn final_epoch(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }

    /// `key=value` lines. Wall-clock time is left out so equal runs give
    /// equal bytes.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let dims: Vec<String> = c.layer_dims.iter().map(usize::to_string).collect();
        let mut s = String::new();
        let _ = writeln!(s, "format=imgraph-train-report-v1");
        let _ = writeln!(s, "representation={}", self.representation);
        let _ = writeln!(s, "layer_dims={}", dims.join(","));
        let _ = writeln!(s, "num_classes={}", c.num_classes);
        let _ = writeln!(s, "learning_rate={}", c.learning_rate);
        let _ = writeln!(s, "epochs={}", c.epochs);
        let _ = writeln!(s, "batch_size={}", c.batch_size);
        let _ = writeln!(s, "seed={}", c.seed);
        let _ = writeln!(s, "weight_init_scale={}", c.weight_init_scale);
        let _ = writeln!(s, "norm={}", c.norm.name());
        let _ = writeln!(s, "readout=mean");
        let _ = writeln!(s, "self_loops=kept");
        let _ = writeln!(s, "train_size={}", self.train_size);
        let _ = writeln!(s, "test_size={}", self.test_size);
        let _ = writeln!(s, "feature_dim={}", self.feature_dim);
        for e in &self.epochs {
            let _ = writeln!(s, "epoch.{}.loss={}", e.epoch, e.loss);
            let _ = writeln!(s, "epoch.{}.train_acc={}", e.epoch, e.train_accuracy);
        }
        let _ = writeln!(s, "test_acc={}", self.test_accuracy);
        s
    }

    pub fn tsv_row(&self) -> String {
        let (loss, acc) = self
            .final_epoch()
            .map_or((f64::NAN, f64::NAN), |e| (e.loss, e.train_accuracy));
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.representation,
            self.config.seed,
            self.config.epochs,
            self.train_size,
            self.test_size,
            loss,
            acc,
            self.test_accuracy
        )
    }
}

pub struct TrainOutcome {
    pub model: GcnModel,
    pub report: TrainReport,
}

/// Trains a fresh model on `train` and scores it on `test`.
///
/// Initialization draws from `ChaCha8(seed)`; batch order from the same seed
/// on a separate stream.
pub fn train<S, T>(train: &S, test: &T, cfg: &GcnConfig) -> Result<TrainOutcome, GnnError>
where
    S: SampleSource + ?Sized,
    T: SampleSource + ?Sized,
{
    cfg.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(GnnError::EmptyDataset);
    }
    let started = Instant::now();
    let feature_dim = train.sample(0)?.feature_dim();
    let mut model = GcnModel::new(feature_dim, cfg.clone())?;
    let mut adam = Adam::new(&model.params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let results = batch
                .par_iter()
                .map(|&i| {
                    let g = train.sample(i)?;
                    let (loss, logits, grads) = model.backward(&g)?;
                    Ok((loss, argmax(&logits) == g.label as usize, grads))
                })
                .collect::<Result<Vec<_>, GnnError>>()?;
            let mut total = model.params.zeros_like();
            for (loss, hit, grads) in &results {
                loss_sum += loss;
                hits += usize::from(*hit);
                total.add_assign(grads);
            }
            let scale = 1.0 / batch.len() as f64;
            for s in total.slices_mut() {
                s.iter_mut().for_each(|x| *x *= scale);
            }
            adam.step(&mut model.params, &total, cfg.learning_rate);
        }
        epochs.push(EpochStats {
            epoch,
            loss: loss_sum / train.len() as f64,
            train_accuracy: hits as f64 / train.len() as f64,
        });
    }

    let test_accuracy = evaluate(&model, test)?;
    let report = TrainReport {
        representation: String::new(),
        config: cfg.clone(),
        train_size: train.len(),
        test_size: test.len(),
        feature_dim,
        epochs,
        test_accuracy,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome { model, report })
}
