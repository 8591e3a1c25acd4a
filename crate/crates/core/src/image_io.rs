//! IDX parsing, intensity normalization and stratified subsetting.
//!
//! The IDX container is the big-endian format MNIST and Fashion-MNIST are
//! distributed in: a 4-byte magic (`0x00000803` for images, `0x00000801`
//! for labels), one 4-byte count per dimension, then the raw `u8` payload.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { found: u32, expected: u32 },
    #[error("truncated IDX data: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("non-square images ({rows}x{cols}) are not supported")]
    NonSquare { rows: usize, cols: usize },
    #[error("image side must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("label {label} at index {index} is outside 0..{NUM_CLASSES}")]
    LabelOutOfRange { index: usize, label: u8 },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("class {class} has {available} items, {requested} requested")]
    InsufficientClass {
        class: u8,
        available: usize,
        requested: usize,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// An `N x N` image of 8-bit intensities, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    side: usize,
    pixels: Vec<u8>,
}

impl RawImage {
    pub fn new(side: usize, pixels: Vec<u8>) -> Result<Self, IdxError> {
        if side < 2 {
            return Err(IdxError::TooSmall(side));
        }
        if pixels.len() != side * side {
            return Err(IdxError::Truncated {
                needed: side * side,
                available: pixels.len(),
            });
        }
        Ok(Self { side, pixels })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
}

/// An `N x N` image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Array2<f64>,
}

impl Image {
    /// Wraps a square matrix. Entries outside `[0, 1]` are rejected.
    pub fn from_array(pixels: Array2<f64>) -> Option<Self> {
        let (r, c) = pixels.dim();
        if r != c || r < 2 || pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return None;
        }
        Some(Self { pixels })
    }

    pub fn side(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    pub fn transposed(&self) -> Image {
        Image {
            pixels: self.pixels.t().to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub images: Vec<Image>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl LabeledDataset {
    pub fn new(images: Vec<Image>, labels: Vec<u8>, split: Split) -> Result<Self, IdxError> {
        if images.len() != labels.len() {
            return Err(IdxError::CountMismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        if let Some((index, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= NUM_CLASSES)
        {
            return Err(IdxError::LabelOutOfRange { index, label });
        }
        Ok(Self {
            images,
            labels,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn class_histogram(&self) -> [usize; NUM_CLASSES] {
        let mut hist = [0; NUM_CLASSES];
        for &l in &self.labels {
            hist[l as usize] += 1;
        }
        hist
    }
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32, IdxError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated {
            needed: offset + 4,
            available: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), IdxError> {
    let found = read_u32_be(bytes, 0)?;
    if found != expected {
        return Err(IdxError::BadMagic { found, expected });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<RawImage>, IdxError> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = read_u32_be(bytes, 4)? as usize;
    let rows = read_u32_be(bytes, 8)? as usize;
    let cols = read_u32_be(bytes, 12)? as usize;
    if rows != cols {
        return Err(IdxError::NonSquare { rows, cols });
    }
    if rows < 2 {
        return Err(IdxError::TooSmall(rows));
    }
    let stride = rows * cols;
    let payload = &bytes[16..];
    let needed = count * stride;
    if payload.len() < needed {
        return Err(IdxError::Truncated {
            needed: 16 + needed,
            available: bytes.len(),
        });
    }
    Ok(payload[..needed]
        .chunks_exact(stride)
        .map(|px| RawImage {
            side: rows,
            pixels: px.to_vec(),
        })
        .collect())
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = read_u32_be(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(IdxError::Truncated {
            needed: 8 + count,
            available: bytes.len(),
        });
    }
    Ok(payload[..count].to_vec())
}

/// Inverse of [`parse_idx_images`]. All images must share a side length.
pub fn encode_idx_images(images: &[RawImage]) -> Vec<u8> {
    let side = images.first().map_or(0, |im| im.side) as u32;
    let mut out = Vec::with_capacity(16 + images.iter().map(|im| im.pixels.len()).sum::<usize>());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&side.to_be_bytes());
    out.extend_from_slice(&side.to_be_bytes());
    for im in images {
        debug_assert_eq!(im.side as u32, side);
        out.extend_from_slice(&im.pixels);
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn normalize(raw: &RawImage) -> Image {
    let pixels = Array2::from_shape_fn((raw.side, raw.side), |(i, j)| {
        f64::from(raw.pixels[i * raw.side + j]) / 255.0
    });
    Image { pixels }
}

/// Draws exactly `per_class` items of every class.
///
/// Each class's indices are shuffled with a ChaCha8 stream seeded by `seed`
/// (one stream, classes visited in order 0..10) and the first `per_class`
/// kept. The output lists the kept items in their original dataset order.
pub fn stratified_subset(
    ds: &LabeledDataset,
    per_class: usize,
    seed: u64,
) -> Result<LabeledDataset, IdxError> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (idx, &label) in ds.labels.iter().enumerate() {
        by_class[label as usize].push(idx);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::with_capacity(per_class * NUM_CLASSES);
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.len() < per_class {
            return Err(IdxError::InsufficientClass {
                class: class as u8,
                available: members.len(),
                requested: per_class,
            });
        }
        members.shuffle(&mut rng);
        keep.extend_from_slice(&members[..per_class]);
    }
    keep.sort_unstable();
    Ok(LabeledDataset {
        images: keep.iter().map(|&i| ds.images[i].clone()).collect(),
        labels: keep.iter().map(|&i| ds.labels[i]).collect(),
        split: ds.split,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>, IdxError> {
    fs::read(path).map_err(|source| IdxError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads and normalizes an image/label file pair.
pub fn load_dataset(
    images: &Path,
    labels: &Path,
    split: Split,
) -> Result<LabeledDataset, IdxError> {
    let raw = parse_idx_images(&read_file(images)?)?;
    let labels = parse_idx_labels(&read_file(labels)?)?;
    LabeledDataset::new(raw.iter().map(normalize).collect(), labels, split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image_header(count: u32, rows: u32, cols: u32) -> Vec<u8> {
        let mut b = IMAGE_MAGIC.to_be_bytes().to_vec();
        b.extend_from_slice(&count.to_be_bytes());
        b.extend_from_slice(&rows.to_be_bytes());
        b.extend_from_slice(&cols.to_be_bytes());
        b
    }

    #[test]
    fn zero_payload_gives_black_image() {
        let mut bytes = image_header(1, 28, 28);
        bytes.extend(std::iter::repeat_n(0u8, 784));
        let imgs = parse_idx_images(&bytes).unwrap();
        assert_eq!(imgs.len(), 1);
        assert_eq!(imgs[0].side(), 28);
        assert!(imgs[0].pixels().iter().all(|&p| p == 0));
    }

    #[test]
    fn declared_count_beyond_payload_is_truncated() {
        let mut bytes = image_header(2, 28, 28);
        bytes.extend(std::iter::repeat_n(0u8, 784));
        assert!(matches!(
            parse_idx_images(&bytes),
            Err(IdxError::Truncated { .. })
        ));
    }

    #[test]
    fn wrong_magic_and_non_square() {
        let mut bytes = image_header(0, 28, 28);
        bytes[3] = 0x01;
        assert!(matches!(
            parse_idx_images(&bytes),
            Err(IdxError::BadMagic { .. })
        ));
        let bytes = image_header(0, 28, 27);
        assert!(matches!(
            parse_idx_images(&bytes),
            Err(IdxError::NonSquare { rows: 28, cols: 27 })
        ));
        assert!(matches!(
            parse_idx_images(&[0, 0, 8]),
            Err(IdxError::Truncated { .. })
        ));
    }

    #[test]
    fn labels_parse() {
        let mut bytes = LABEL_MAGIC.to_be_bytes().to_vec();
        bytes.extend_from_slice(&3u32.to_be_bytes());
        bytes.extend_from_slice(&[5, 0, 4]);
        assert_eq!(parse_idx_labels(&bytes).unwrap(), vec![5, 0, 4]);

        let empty = encode_idx_labels(&[]);
        assert!(parse_idx_labels(&empty).unwrap().is_empty());

        let mut short = LABEL_MAGIC.to_be_bytes().to_vec();
        short.extend_from_slice(&1u32.to_be_bytes());
        assert!(matches!(
            parse_idx_labels(&short),
            Err(IdxError::Truncated { .. })
        ));

        assert!(matches!(
            parse_idx_labels(&image_header(0, 2, 2)),
            Err(IdxError::BadMagic { .. })
        ));
    }

    #[test]
    fn normalize_values() {
        let raw = RawImage::new(2, vec![255, 0, 51, 102]).unwrap();
        let img = normalize(&raw);
        assert_eq!(img.pixels()[[0, 0]], 1.0);
        assert_eq!(img.pixels()[[0, 1]], 0.0);
        assert_eq!(img.pixels()[[1, 0]], 0.2);
        assert_eq!(img.pixels()[[1, 1]], 0.4);
    }

    fn toy_dataset(per_class: usize) -> LabeledDataset {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for k in 0..per_class * NUM_CLASSES {
            let raw = RawImage::new(2, vec![k as u8, 0, 0, 0]).unwrap();
            images.push(normalize(&raw));
            labels.push((k % NUM_CLASSES) as u8);
        }
        LabeledDataset::new(images, labels, Split::Train).unwrap()
    }

    #[test]
    fn stratified_subset_counts_and_determinism() {
        let ds = toy_dataset(20);
        assert!(stratified_subset(&ds, 0, 1).unwrap().is_empty());

        let a = stratified_subset(&ds, 7, 7).unwrap();
        let b = stratified_subset(&ds, 7, 7).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.images, b.images);
        assert_eq!(a.class_histogram(), [7; NUM_CLASSES]);

        let c = stratified_subset(&ds, 7, 8).unwrap();
        assert_ne!(a.images, c.images);

        assert!(matches!(
            stratified_subset(&ds, 21, 0),
            Err(IdxError::InsufficientClass { requested: 21, .. })
        ));
    }

    #[test]
    fn dataset_rejects_bad_labels() {
        let img = normalize(&RawImage::new(2, vec![0; 4]).unwrap());
        assert!(matches!(
            LabeledDataset::new(vec![img.clone()], vec![10], Split::Test),
            Err(IdxError::LabelOutOfRange { label: 10, .. })
        ));
        assert!(matches!(
            LabeledDataset::new(vec![img], vec![], Split::Test),
            Err(IdxError::CountMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn idx_round_trip(side in 2usize..6, count in 0usize..5, seed in any::<u64>()) {
            let mut state = seed;
            let images: Vec<RawImage> = (0..count)
                .map(|_| {
                    let px = (0..side * side)
                        .map(|_| {
                            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                            (state >> 56) as u8
                        })
                        .collect();
                    RawImage::new(side, px).unwrap()
                })
                .collect();
            let bytes = encode_idx_images(&images);
            if count > 0 {
                let parsed = parse_idx_images(&bytes).unwrap();
                prop_assert_eq!(&parsed, &images);
                prop_assert_eq!(encode_idx_images(&parsed), bytes);
            }
        }

        #[test]
        fn normalize_is_monotone(a in any::<u8>(), b in any::<u8>()) {
            let img = normalize(&RawImage::new(2, vec![a, b, 0, 255]).unwrap());
            let p = img.pixels();
            prop_assert_eq!(a <= b, p[[0, 0]] <= p[[0, 1]]);
            prop_assert_eq!(p[[1, 0]], 0.0);
            prop_assert_eq!(p[[1, 1]], 1.0);
        }
    }
}
