//! Image to (graph, features) construction for every supported representation.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::corrgraph::{self, Axis, GraphAdjacency, DEFAULT_KMEANS_ITERS};
use crate::dataset_store::GraphRecord;
use crate::features::{self, FeatureError, NodeFeatures};
use crate::gnn::{normalize_adjacency, GnnError, NormalizedGraph};
use crate::image_io::{Image, LabeledDataset};
use crate::kinds::{is_valid_combination, FeatureKind, GraphKind};
use crate::product_graph::masked_product;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{features} features cannot be paired with {graph} graphs")]
    InvalidCombination {
        graph: GraphKind,
        features: FeatureKind,
    },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Graph(#[from] corrgraph::GraphError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("images of side {found} mixed with side {expected}")]
    MixedSides { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Representation {
    pub graph: GraphKind,
    pub features: FeatureKind,
}

impl Representation {
    pub fn new(graph: GraphKind, features: FeatureKind) -> Result<Self, PipelineError> {
        if !is_valid_combination(graph, features) {
            return Err(PipelineError::InvalidCombination { graph, features });
        }
        Ok(Self { graph, features })
    }

    /// `graph+features`, e.g. `product+correlation`.
    pub fn label(&self) -> String {
        format!("{}+{}", self.graph, self.features)
    }

    /// Every valid (graph, feature) pair in a fixed order.
    pub fn all() -> Vec<Representation> {
        GraphKind::ALL
            .iter()
            .flat_map(|&graph| {
                FeatureKind::ALL
                    .iter()
                    .map(move |&features| (graph, features))
            })
            .filter(|&(g, f)| is_valid_combination(g, f))
            .map(|(graph, features)| Representation { graph, features })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildConfig {
    pub representation: Representation,
    pub kmeans_iters: usize,
}

impl BuildConfig {
    pub fn new(representation: Representation) -> Self {
        Self {
            representation,
            kmeans_iters: DEFAULT_KMEANS_ITERS,
        }
    }
}

/// The adjacency for one image. Grid graphs do not depend on the image.
pub fn image_graph(img: &Image, graph: GraphKind, kmeans_iters: usize) -> GraphAdjacency {
    match graph {
        GraphKind::Grid => corrgraph::grid_graph(img.side()),
        GraphKind::Row => corrgraph::infer_graph(img, Axis::Row, kmeans_iters),
        GraphKind::Column => corrgraph::infer_graph(img, Axis::Column, kmeans_iters),
        GraphKind::Product => {
            let ar = corrgraph::infer_graph(img, Axis::Row, kmeans_iters);
            let ac = corrgraph::infer_graph(img, Axis::Column, kmeans_iters);
            masked_product(&ar, &ac)
                .expect("row and column graphs share the image side")
                .into_graph()
        }
    }
}

pub fn build_image(
    img: &Image,
    cfg: &BuildConfig,
) -> Result<(GraphAdjacency, NodeFeatures), PipelineError> {
    let rep = cfg.representation;
    let features = features::node_features(img, rep.graph, rep.features)?;
    Ok((image_graph(img, rep.graph, cfg.kmeans_iters), features))
}

fn common_side(ds: &LabeledDataset) -> Result<usize, PipelineError> {
    let expected = ds.images.first().ok_or(PipelineError::EmptyDataset)?.side();
    if let Some(img) = ds.images.iter().find(|im| im.side() != expected) {
        return Err(PipelineError::MixedSides {
            expected,
            found: img.side(),
        });
    }
    Ok(expected)
}

/// Training samples for a whole dataset, built in parallel, in dataset order.
pub fn build_samples(
    ds: &LabeledDataset,
    cfg: &BuildConfig,
) -> Result<Vec<NormalizedGraph>, PipelineError> {
    let side = common_side(ds)?;
    let rep = cfg.representation;
    Representation::new(rep.graph, rep.features)?;
    let shared_grid = (rep.graph == GraphKind::Grid)
        .then(|| Arc::new(normalize_adjacency(&corrgraph::grid_graph(side))));
    ds.images
        .par_iter()
        .zip(ds.labels.par_iter())
        .map(|(img, &label)| {
            let features = features::node_features(img, rep.graph, rep.features)?;
            let adjacency = match &shared_grid {
                Some(a) => Arc::clone(a),
                None => Arc::new(normalize_adjacency(&image_graph(
                    img,
                    rep.graph,
                    cfg.kmeans_iters,
                ))),
            };
            Ok(NormalizedGraph::new(
                adjacency,
                Arc::new(features.matrix),
                label,
            )?)
        })
        .collect()
}

/// Encodes a dataset as storage records, in dataset order.
///
/// Images are processed `chunk` at a time in parallel; `sink` sees records
/// sequentially, so output does not depend on the thread count.
pub fn for_each_record<E>(
    ds: &LabeledDataset,
    cfg: &BuildConfig,
    chunk: usize,
    mut sink: impl FnMut(GraphRecord) -> Result<(), E>,
) -> Result<(), E>
where
    E: From<PipelineError>,
{
    common_side(ds)?;
    let rep = cfg.representation;
    Representation::new(rep.graph, rep.features)?;
    let items: Vec<(&Image, u8)> = ds.images.iter().zip(ds.labels.iter().copied()).collect();
    for block in items.chunks(chunk.max(1)) {
        let records = block
            .par_iter()
            .map(|&(img, label)| {
                let (adj, feats) = build_image(img, cfg)?;
                Ok(GraphRecord::from_parts(&adj, &feats.matrix, label))
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        for r in records {
            sink(r)?;
        }
    }
    Ok(())
}
