//! Correlation-derived graph representations of grayscale images.
//!
//! The pipeline turns an `N x N` image into one of four graphs (pixel grid,
//! row graph, column graph, or their masked Cartesian product), attaches node
//! features, stores the result in the CGDS1 binary format and evaluates the
//! representation with a small graph convolutional classifier.

pub mod corrgraph;
pub mod dataset_store;
pub mod experiment;
pub mod features;
pub mod gnn;
pub mod image_io;
pub mod kinds;
pub mod pipeline;
pub mod product_graph;

pub use corrgraph::{Axis, GraphAdjacency};
pub use image_io::{Image, LabeledDataset, RawImage, Split};
pub use kinds::{FeatureKind, GraphKind};
