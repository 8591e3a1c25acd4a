//! CGDS1: a binary container for graph classification datasets.
//!
//! All integers are little-endian. The file is a fixed 36-byte header
//! followed by `record_count` records.
//!
//! ```text
//! header
//!   0   5  magic "CGDS1"
//!   5   1  graph tag     (0 grid, 1 row, 2 column, 3 product)
//!   6   1  feature tag   (0 pixel, 1 standard, 2 correlation)
//!   7   1  source tag    (0 mnist, 1 fashion-mnist, 2 synthetic)
//!   8   4  u32 image side N
//!  12   8  u64 record count
//!  20   8  u64 config hash
//!  28   4  u32 CRC32 of every byte after the header
//!  32   4  u32 CRC32 of header bytes 0..32
//! record
//!       4  u32 node count
//!       4  u32 edge count E
//!    8*E   (u32 i, u32 j) per edge, i <= j, strictly ascending, self-loops as (i, i)
//!       4  u32 feature dim D
//!  4*n*D   f32 features, row-major (node-major)
//!       1  u8 label
//! ```

use std::borrow::Cow;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corrgraph::GraphAdjacency;
use crate::features::FeatureMatrix;
use crate::gnn::{normalize_adjacency, GnnError, NormalizedGraph, SampleSource};
use crate::kinds::{FeatureKind, GraphKind};

pub const MAGIC: &[u8; 5] = b"CGDS1";
pub const HEADER_LEN: usize = 36;
pub const DOT_MAX_NODES: usize = 10_000;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 5]),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("corrupt record {index}: {reason}")]
    CorruptRecord { index: u64, reason: String },
    #[error("payload checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("file truncated")]
    TruncatedFile,
    #[error("header promises {declared} records, {given} supplied")]
    CountMismatch { declared: u64, given: u64 },
    #[error("graph with {0} nodes is too large to export")]
    TooLarge(usize),
    #[error("record {index} out of range ({len} records)")]
    OutOfRange { index: usize, len: usize },
    #[error("I/O failure: {0}")]
    IoFailure(#[from] io::Error),
}

impl StoreError {
    /// Whether the error means the bytes on disk are not a valid dataset.
    pub fn is_corruption(&self) -> bool {
        matches!(
            self,
            StoreError::BadMagic(_)
                | StoreError::CorruptHeader(_)
                | StoreError::CorruptRecord { .. }
                | StoreError::ChecksumMismatch { .. }
                | StoreError::TruncatedFile
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceTag {
    Mnist,
    FashionMnist,
    Synthetic,
}

impl SourceTag {
    pub const ALL: &'static [SourceTag] = &[
        SourceTag::Mnist,
        SourceTag::FashionMnist,
        SourceTag::Synthetic,
    ];

    pub fn tag(self) -> u8 {
        match self {
            SourceTag::Mnist => 0,
            SourceTag::FashionMnist => 1,
            SourceTag::Synthetic => 2,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        Self::ALL.get(t as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SourceTag::Mnist => "mnist",
            SourceTag::FashionMnist => "fashion-mnist",
            SourceTag::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| t.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetHeader {
    pub graph: GraphKind,
    pub features: FeatureKind,
    pub source: SourceTag,
    pub side: u32,
    pub record_count: u64,
    pub config_hash: u64,
}

impl DatasetHeader {
    fn encode(&self, payload_crc: u32) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..5].copy_from_slice(MAGIC);
        b[5] = self.graph.tag();
        b[6] = self.features.tag();
        b[7] = self.source.tag();
        b[8..12].copy_from_slice(&self.side.to_le_bytes());
        b[12..20].copy_from_slice(&self.record_count.to_le_bytes());
        b[20..28].copy_from_slice(&self.config_hash.to_le_bytes());
        b[28..32].copy_from_slice(&payload_crc.to_le_bytes());
        let crc = crc32fast::hash(&b[0..32]);
        b[32..36].copy_from_slice(&crc.to_le_bytes());
        b
    }

    /// Returns the header and the stored payload CRC.
    fn decode(b: &[u8; HEADER_LEN]) -> Result<(Self, u32), StoreError> {
        if &b[0..5] != MAGIC {
            let mut m = [0u8; 5];
            m.copy_from_slice(&b[0..5]);
            return Err(StoreError::BadMagic(m));
        }
        let stored = u32::from_le_bytes(b[32..36].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(&b[0..32]);
        if stored != computed {
            return Err(StoreError::CorruptHeader(format!(
                "header checksum {stored:#010x} != {computed:#010x}"
            )));
        }
        let bad_tag =
            |what: &str, t: u8| StoreError::CorruptHeader(format!("unknown {what} tag {t}"));
        let header = DatasetHeader {
            graph: GraphKind::from_tag(b[5]).ok_or_else(|| bad_tag("graph", b[5]))?,
            features: FeatureKind::from_tag(b[6]).ok_or_else(|| bad_tag("feature", b[6]))?,
            source: SourceTag::from_tag(b[7]).ok_or_else(|| bad_tag("source", b[7]))?,
            side: u32::from_le_bytes(b[8..12].try_into().expect("4 bytes")),
            record_count: u64::from_le_bytes(b[12..20].try_into().expect("8 bytes")),
            config_hash: u64::from_le_bytes(b[20..28].try_into().expect("8 bytes")),
        };
        let payload_crc = u32::from_le_bytes(b[28..32].try_into().expect("4 bytes"));
        Ok((header, payload_crc))
    }
}

/// First 8 bytes (little-endian) of the SHA-256 of a canonical config string.
pub fn config_hash(canonical: &str) -> u64 {
    let digest = Sha256::digest(canonical.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphRecord {
    pub node_count: u32,
    pub edges: Vec<(u32, u32)>,
    pub feature_dim: u32,
    pub features: Vec<f32>,
    pub label: u8,
}

impl GraphRecord {
    pub fn from_parts(adj: &GraphAdjacency, features: &FeatureMatrix, label: u8) -> Self {
        let n = adj.node_count();
        let d = features.ncols();
        assert_eq!(features.nrows(), n, "one feature row per node");
        let mut flat = Vec::with_capacity(n * d);
        let mut row = vec![0.0; d];
        for r in 0..n {
            features.row_into(r, &mut row);
            flat.extend(row.iter().map(|&x| x as f32));
        }
        Self {
            node_count: n as u32,
            edges: adj.edges().to_vec(),
            feature_dim: d as u32,
            features: flat,
            label,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            if i > j {
                return Err(format!("edge {k} ({i}, {j}) is not ordered i <= j"));
            }
            if j >= self.node_count {
                return Err(format!(
                    "edge {k} ({i}, {j}) exceeds node count {}",
                    self.node_count
                ));
            }
            if k > 0 && self.edges[k - 1] >= (i, j) {
                return Err(format!("edge {k} ({i}, {j}) breaks strict ascending order"));
            }
        }
        let expect = self.node_count as usize * self.feature_dim as usize;
        if self.features.len() != expect {
            return Err(format!(
                "{} feature values, expected {expect}",
                self.features.len()
            ));
        }
        Ok(())
    }

    pub fn adjacency(&self) -> GraphAdjacency {
        GraphAdjacency::from_edges(
            self.node_count as usize,
            self.edges.iter().map(|&(i, j)| (i as usize, j as usize)),
        )
        .expect("validated record")
    }

    /// Features widened to `f64`.
    pub fn feature_matrix(&self) -> FeatureMatrix {
        let shape = (self.node_count as usize, self.feature_dim as usize);
        let data = self.features.iter().map(|&x| f64::from(x)).collect();
        FeatureMatrix::Dense(
            ndarray::Array2::from_shape_vec(shape, data).expect("validated record"),
        )
    }

    pub fn to_sample(&self) -> Result<NormalizedGraph, GnnError> {
        NormalizedGraph::new(
            Arc::new(normalize_adjacency(&self.adjacency())),
            Arc::new(self.feature_matrix()),
            self.label,
        )
    }

    fn encoded_len(&self) -> usize {
        13 + 8 * self.edges.len() + 4 * self.features.len()
    }
}

/// Writes the record body; `sink` sees exactly the bytes that go to disk.
fn encode_record<W: Write>(rec: &GraphRecord, sink: &mut W) -> io::Result<()> {
    let mut buf = Vec::with_capacity(rec.encoded_len());
    buf.extend_from_slice(&rec.node_count.to_le_bytes());
    buf.extend_from_slice(&(rec.edges.len() as u32).to_le_bytes());
    for &(i, j) in &rec.edges {
        buf.extend_from_slice(&i.to_le_bytes());
        buf.extend_from_slice(&j.to_le_bytes());
    }
    buf.extend_from_slice(&rec.feature_dim.to_le_bytes());
    for &x in &rec.features {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf.push(rec.label);
    sink.write_all(&buf)
}

struct CrcWriter<W> {
    inner: W,
    hasher: crc32fast::Hasher,
    written: u64,
}

impl<W: Write> Write for CrcWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Writes a whole dataset; returns the number of bytes written.
pub fn write_dataset<W: Write>(
    header: &DatasetHeader,
    records: &[GraphRecord],
    sink: &mut W,
) -> Result<u64, StoreError> {
    if header.record_count != records.len() as u64 {
        return Err(StoreError::CountMismatch {
            declared: header.record_count,
            given: records.len() as u64,
        });
    }
    for (index, r) in records.iter().enumerate() {
        r.validate().map_err(|reason| StoreError::CorruptRecord {
            index: index as u64,
            reason,
        })?;
    }
    let mut crc = CrcWriter {
        inner: io::sink(),
        hasher: crc32fast::Hasher::new(),
        written: 0,
    };
    for r in records {
        encode_record(r, &mut crc)?;
    }
    let payload_crc = crc.hasher.finalize();
    sink.write_all(&header.encode(payload_crc))?;
    for r in records {
        encode_record(r, sink)?;
    }
    sink.flush()?;
    Ok(HEADER_LEN as u64 + crc.written)
}

/// Streams records to a seekable sink and patches the header at the end.
/// Produces the same bytes as [`write_dataset`].
pub struct DatasetWriter<W: Write + Seek> {
    out: CrcWriter<BufWriter<W>>,
    header: DatasetHeader,
    count: u64,
}

impl<W: Write + Seek> DatasetWriter<W> {
    /// `header.record_count` is ignored and replaced by the number of pushes.
    pub fn new(sink: W, header: DatasetHeader) -> Result<Self, StoreError> {
        let mut inner = BufWriter::new(sink);
        inner.write_all(&[0u8; HEADER_LEN])?;
        Ok(Self {
            out: CrcWriter {
                inner,
                hasher: crc32fast::Hasher::new(),
                written: 0,
            },
            header,
            count: 0,
        })
    }

    pub fn push(&mut self, record: &GraphRecord) -> Result<(), StoreError> {
        record
            .validate()
            .map_err(|reason| StoreError::CorruptRecord {
                index: self.count,
                reason,
            })?;
        encode_record(record, &mut self.out)?;
        self.count += 1;
        Ok(())
    }

    /// Returns the sink and the total number of bytes written.
    pub fn finish(self) -> Result<(W, u64), StoreError> {
        let CrcWriter {
            inner,
            hasher,
            written,
        } = self.out;
        let mut header = self.header;
        header.record_count = self.count;
        let mut sink = inner.into_inner().map_err(|e| e.into_error())?;
        sink.seek(SeekFrom::Start(0))?;
        sink.write_all(&header.encode(hasher.finalize()))?;
        sink.seek(SeekFrom::End(0))?;
        sink.flush()?;
        Ok((sink, HEADER_LEN as u64 + written))
    }
}

fn read_exact_or_truncated<R: Read>(src: &mut R, buf: &mut [u8]) -> Result<(), StoreError> {
    src.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => StoreError::TruncatedFile,
        _ => StoreError::IoFailure(e),
    })
}

fn read_u32<R: Read>(src: &mut R) -> Result<u32, StoreError> {
    let mut b = [0u8; 4];
    read_exact_or_truncated(src, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

struct CrcReader<R> {
    inner: R,
    hasher: crc32fast::Hasher,
}

impl<R: Read> Read for CrcReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
}

/// Upper bound on a single allocation driven by on-disk counts.
const MAX_FIELD_ELEMS: u64 = 1 << 31;

fn decode_record<R: Read>(
    src: &mut R,
    index: u64,
    max_nodes: Option<u32>,
) -> Result<GraphRecord, StoreError> {
    let corrupt = |reason: String| StoreError::CorruptRecord { index, reason };
    let node_count = read_u32(src)?;
    if let Some(limit) = max_nodes {
        if node_count > limit {
            return Err(corrupt(format!(
                "{node_count} nodes, header allows at most {limit}"
            )));
        }
    }
    let edge_count = read_u32(src)?;
    let mut raw = vec![0u8; 8 * edge_count as usize];
    read_exact_or_truncated(src, &mut raw)?;
    let edges = raw
        .chunks_exact(8)
        .map(|c| {
            (
                u32::from_le_bytes(c[0..4].try_into().expect("4 bytes")),
                u32::from_le_bytes(c[4..8].try_into().expect("4 bytes")),
            )
        })
        .collect();
    let feature_dim = read_u32(src)?;
    let n_feat = u64::from(node_count) * u64::from(feature_dim);
    if n_feat > MAX_FIELD_ELEMS {
        return Err(corrupt(format!("{n_feat} feature values is implausible")));
    }
    let mut raw = vec![0u8; 4 * n_feat as usize];
    read_exact_or_truncated(src, &mut raw)?;
    let features = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let mut label = [0u8; 1];
    read_exact_or_truncated(src, &mut label)?;
    let rec = GraphRecord {
        node_count,
        edges,
        feature_dim,
        features,
        label: label[0],
    };
    rec.validate().map_err(corrupt)?;
    Ok(rec)
}

fn max_nodes(header: &DatasetHeader) -> Option<u32> {
    let n = u64::from(header.side);
    u32::try_from(n * n).ok()
}

fn read_header<R: Read>(src: &mut R) -> Result<(DatasetHeader, u32), StoreError> {
    let mut hb = [0u8; HEADER_LEN];
    read_exact_or_truncated(src, &mut hb)?;
    DatasetHeader::decode(&hb)
}

/// Reads and fully validates a dataset.
pub fn read_dataset<R: Read>(source: R) -> Result<(DatasetHeader, Vec<GraphRecord>), StoreError> {
    let mut src = BufReader::new(source);
    let (header, payload_crc) = read_header(&mut src)?;
    let mut crc = CrcReader {
        inner: src,
        hasher: crc32fast::Hasher::new(),
    };
    let limit = max_nodes(&header);
    let mut records = Vec::new();
    for index in 0..header.record_count {
        records.push(decode_record(&mut crc, index, limit)?);
    }
    let mut trailing = [0u8; 1];
    if crc.read(&mut trailing)? != 0 {
        return Err(StoreError::CorruptRecord {
            index: header.record_count,
            reason: "trailing bytes after last record".into(),
        });
    }
    let computed = crc.hasher.finalize();
    if computed != payload_crc {
        return Err(StoreError::ChecksumMismatch {
            stored: payload_crc,
            computed,
        });
    }
    Ok((header, records))
}

/// Reads only the header (checksummed, but the payload is not verified).
pub fn read_header_only(path: &Path) -> Result<DatasetHeader, StoreError> {
    let mut f = File::open(path)?;
    Ok(read_header(&mut f)?.0)
}

/// Random access to the records of a dataset file.
///
/// Opening scans the whole file once to validate it and index record
/// offsets; records are then decoded on demand.
pub struct DatasetFile {
    header: DatasetHeader,
    offsets: Vec<u64>,
    file: Mutex<BufReader<File>>,
}

impl DatasetFile {
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let mut reader = BufReader::new(File::open(path)?);
        let (header, payload_crc) = read_header(&mut reader)?;
        let limit = max_nodes(&header);
        let mut crc = CrcReader {
            inner: reader,
            hasher: crc32fast::Hasher::new(),
        };
        let mut offsets = Vec::with_capacity(header.record_count as usize);
        let mut pos = HEADER_LEN as u64;
        for index in 0..header.record_count {
            offsets.push(pos);
            let rec = decode_record(&mut crc, index, limit)?;
            pos += rec.encoded_len() as u64;
        }
        let mut trailing = [0u8; 1];
        if crc.read(&mut trailing)? != 0 {
            return Err(StoreError::CorruptRecord {
                index: header.record_count,
                reason: "trailing bytes after last record".into(),
            });
        }
        let computed = crc.hasher.finalize();
        if computed != payload_crc {
            return Err(StoreError::ChecksumMismatch {
                stored: payload_crc,
                computed,
            });
        }
        Ok(Self {
            header,
            offsets,
            file: Mutex::new(crc.inner),
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn record(&self, index: usize) -> Result<GraphRecord, StoreError> {
        let offset = *self.offsets.get(index).ok_or(StoreError::OutOfRange {
            index,
            len: self.len(),
        })?;
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.seek(SeekFrom::Start(offset))?;
        decode_record(&mut *f, index as u64, max_nodes(&self.header))
    }
}

impl SampleSource for DatasetFile {
    fn len(&self) -> usize {
        self.offsets.len()
    }

    fn sample(&self, index: usize) -> Result<Cow<'_, NormalizedGraph>, GnnError> {
        let source = |message: String| GnnError::Source { index, message };
        let rec = self.record(index).map_err(|e| source(e.to_string()))?;
        Ok(Cow::Owned(rec.to_sample()?))
    }
}

/// Decodes every record of a dataset file into training samples.
pub fn load_samples(path: &Path) -> Result<(DatasetHeader, Vec<NormalizedGraph>), StoreError> {
    let (header, records) = read_dataset(File::open(path)?)?;
    let samples = records
        .iter()
        .enumerate()
        .map(|(index, r)| {
            r.to_sample().map_err(|e| StoreError::CorruptRecord {
                index: index as u64,
                reason: e.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok((header, samples))
}

/// Undirected DOT text: every node in index order, then every edge.
pub fn export_dot(record: &GraphRecord) -> Result<String, StoreError> {
    let n = record.node_count as usize;
    if n > DOT_MAX_NODES {
        return Err(StoreError::TooLarge(n));
    }
    let mut s = String::new();
    let _ = writeln!(s, "graph G {{");
    let _ = writeln!(s, "  label=\"class {}\";", record.label);
    for k in 0..n {
        let _ = writeln!(s, "  {k};");
    }
    for &(i, j) in &record.edges {
        let _ = writeln!(s, "  {i} -- {j};");
    }
    s.push_str("}\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn header(count: u64) -> DatasetHeader {
        DatasetHeader {
            graph: GraphKind::Row,
            features: FeatureKind::Pixel,
            source: SourceTag::Synthetic,
            side: 3,
            record_count: count,
            config_hash: 0xDEAD_BEEF,
        }
    }

    fn record(label: u8) -> GraphRecord {
        GraphRecord {
            node_count: 3,
            edges: vec![(0, 0), (0, 2), (1, 2)],
            feature_dim: 2,
            features: vec![0.0, 0.5, 1.0, -1.5, 2.25, 3.0],
            label,
        }
    }

    #[test]
    fn empty_dataset_is_header_only() {
        let mut buf = Vec::new();
        let n = write_dataset(&header(0), &[], &mut buf).unwrap();
        assert_eq!(n, HEADER_LEN as u64);
        assert_eq!(buf.len(), HEADER_LEN);
        let (h, recs) = read_dataset(Cursor::new(buf)).unwrap();
        assert_eq!(h, header(0));
        assert!(recs.is_empty());
    }

    #[test]
    fn round_trip_and_streaming_writer_agree() {
        let recs = vec![record(1), record(7), record(9)];
        let mut buf = Vec::new();
        let n = write_dataset(&header(3), &recs, &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        let (h, back) = read_dataset(Cursor::new(&buf)).unwrap();
        assert_eq!(h, header(3));
        assert_eq!(back, recs);

        let mut w = DatasetWriter::new(Cursor::new(Vec::new()), header(0)).unwrap();
        for r in &recs {
            w.push(r).unwrap();
        }
        let (cursor, m) = w.finish().unwrap();
        assert_eq!(cursor.into_inner(), buf);
        assert_eq!(m, n);
    }

    #[test]
    fn count_mismatch_rejected() {
        let mut buf = Vec::new();
        assert!(matches!(
            write_dataset(&header(2), &[record(0)], &mut buf),
            Err(StoreError::CountMismatch {
                declared: 2,
                given: 1
            })
        ));
    }

    #[test]
    fn bad_magic() {
        let mut buf = Vec::new();
        write_dataset(&header(0), &[], &mut buf).unwrap();
        buf[0..5].copy_from_slice(b"XXXXX");
        assert!(
            matches!(read_dataset(Cursor::new(buf)), Err(StoreError::BadMagic(m)) if &m == b"XXXXX")
        );
    }

    #[test]
    fn unsorted_edges_are_corrupt() {
        let mut bad = record(0);
        bad.edges = vec![(1, 2), (0, 2)];
        let mut buf = Vec::new();
        assert!(matches!(
            write_dataset(&header(1), &[bad.clone()], &mut buf),
            Err(StoreError::CorruptRecord { .. })
        ));
        // Hand-encode it to exercise the reader.
        let mut payload = Vec::new();
        encode_record(&bad, &mut payload).unwrap();
        let mut file = header(1).encode(crc32fast::hash(&payload)).to_vec();
        file.extend_from_slice(&payload);
        assert!(matches!(
            read_dataset(Cursor::new(file)),
            Err(StoreError::CorruptRecord { index: 0, .. })
        ));
    }

    #[test]
    fn truncation_and_payload_corruption() {
        let mut buf = Vec::new();
        write_dataset(&header(2), &[record(0), record(1)], &mut buf).unwrap();
        let short = buf[..buf.len() - 3].to_vec();
        assert!(matches!(
            read_dataset(Cursor::new(short)),
            Err(StoreError::TruncatedFile)
        ));
        let mut flipped = buf.clone();
        let k = HEADER_LEN + 40;
        flipped[k] ^= 0x10;
        assert!(read_dataset(Cursor::new(flipped))
            .unwrap_err()
            .is_corruption());
        let mut longer = buf.clone();
        longer.push(0);
        assert!(matches!(
            read_dataset(Cursor::new(longer)),
            Err(StoreError::CorruptRecord { .. })
        ));
    }

    #[test]
    fn every_header_byte_flip_is_detected() {
        let mut buf = Vec::new();
        write_dataset(&header(1), &[record(4)], &mut buf).unwrap();
        for k in 0..HEADER_LEN {
            for bit in 0..8 {
                let mut b = buf.clone();
                b[k] ^= 1 << bit;
                let err = read_dataset(Cursor::new(b)).unwrap_err();
                assert!(err.is_corruption(), "byte {k} bit {bit}: {err}");
            }
        }
    }

    #[test]
    fn dot_export() {
        let rec = GraphRecord {
            node_count: 2,
            edges: vec![(0, 1)],
            feature_dim: 0,
            features: vec![],
            label: 3,
        };
        let dot = export_dot(&rec).unwrap();
        assert_eq!(dot.matches(" -- ").count(), 1);
        assert!(dot.starts_with("graph G {"));
        assert_eq!(dot, export_dot(&rec).unwrap());

        let looped = GraphRecord {
            edges: vec![(1, 1)],
            ..rec.clone()
        };
        assert!(export_dot(&looped).unwrap().contains("  1 -- 1;\n"));

        let big = GraphRecord {
            node_count: 10_001,
            edges: vec![],
            ..rec
        };
        assert!(matches!(
            export_dot(&big),
            Err(StoreError::TooLarge(10_001))
        ));
    }

    #[test]
    fn config_hash_is_stable() {
        assert_eq!(config_hash("a=1"), config_hash("a=1"));
        assert_ne!(config_hash("a=1"), config_hash("a=2"));
    }
}
