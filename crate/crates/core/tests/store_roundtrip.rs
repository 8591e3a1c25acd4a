use std::io::Cursor;

use imgraph::dataset_store::{
    read_dataset, write_dataset, DatasetFile, DatasetHeader, DatasetWriter, GraphRecord, SourceTag,
    HEADER_LEN,
};
use imgraph::gnn::SampleSource;
use imgraph::{FeatureKind, GraphKind};
use proptest::prelude::*;

fn record_strategy() -> impl Strategy<Value = GraphRecord> {
    (1u32..12, 0u32..4, any::<u8>()).prop_flat_map(|(n, d, label)| {
        let all_pairs: Vec<(u32, u32)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let m = all_pairs.len();
        (
            prop::collection::vec(any::<bool>(), m),
            prop::collection::vec(
                any::<f32>().prop_filter("finite", |x| x.is_finite()),
                (n * d) as usize,
            ),
        )
            .prop_map(move |(keep, features)| GraphRecord {
                node_count: n,
                edges: all_pairs
                    .iter()
                    .zip(&keep)
                    .filter(|(_, k)| **k)
                    .map(|(p, _)| *p)
                    .collect(),
                feature_dim: d,
                features,
                label,
            })
    })
}

fn header_strategy() -> impl Strategy<Value = DatasetHeader> {
    (
        prop::sample::select(GraphKind::ALL.to_vec()),
        prop::sample::select(FeatureKind::ALL.to_vec()),
        prop::sample::select(SourceTag::ALL.to_vec()),
        any::<u64>(),
    )
        .prop_map(|(graph, features, source, config_hash)| DatasetHeader {
            graph,
            features,
            source,
            side: 4,
            record_count: 0,
            config_hash,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_read_round_trip(mut header in header_strategy(), records in prop::collection::vec(record_strategy(), 0..6)) {
        header.record_count = records.len() as u64;
        let mut a = Vec::new();
        let n = write_dataset(&header, &records, &mut a).unwrap();
        prop_assert_eq!(n as usize, a.len());
        let mut b = Vec::new();
        write_dataset(&header, &records, &mut b).unwrap();
        prop_assert_eq!(&a, &b);
        let (h, back) = read_dataset(Cursor::new(&a)).unwrap();
        prop_assert_eq!(h, header.clone());
        prop_assert_eq!(back, records.clone());

        let mut w = DatasetWriter::new(Cursor::new(Vec::new()), DatasetHeader { record_count: 99, ..header }).unwrap();
        for r in &records {
            w.push(r).unwrap();
        }
        prop_assert_eq!(w.finish().unwrap().0.into_inner(), a);
    }

    #[test]
    fn any_header_byte_change_is_rejected(record in record_strategy(), pos in 0usize..HEADER_LEN, delta in 1u8..=255) {
        let header = DatasetHeader {
            graph: GraphKind::Product,
            features: FeatureKind::Pixel,
            source: SourceTag::Mnist,
            side: 4,
            record_count: 1,
            config_hash: 17,
        };
        let mut bytes = Vec::new();
        write_dataset(&header, &[record], &mut bytes).unwrap();
        bytes[pos] = bytes[pos].wrapping_add(delta);
        let err = read_dataset(Cursor::new(bytes)).unwrap_err();
        prop_assert!(err.is_corruption(), "{}", err);
    }
}

#[test]
fn indexed_file_serves_records_in_any_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.cgds");
    let records: Vec<GraphRecord> = (0..5u32)
        .map(|k| GraphRecord {
            node_count: 3,
            edges: vec![(0, 1), (k % 3, 2)]
                .into_iter()
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect(),
            feature_dim: 2,
            features: (0..6).map(|v| (v + k) as f32 * 0.25).collect(),
            label: k as u8,
        })
        .collect();
    let header = DatasetHeader {
        graph: GraphKind::Row,
        features: FeatureKind::Pixel,
        source: SourceTag::Synthetic,
        side: 3,
        record_count: 5,
        config_hash: 0,
    };
    write_dataset(
        &header,
        &records,
        &mut std::fs::File::create(&path).unwrap(),
    )
    .unwrap();
    let file = DatasetFile::open(&path).unwrap();
    assert_eq!(file.header(), &header);
    for k in [4, 0, 2, 2, 1, 3] {
        assert_eq!(file.record(k).unwrap(), records[k]);
        let s = file.sample(k).unwrap();
        assert_eq!(s.label, k as u8);
        assert_eq!(
            s.features.to_dense()[[1, 1]],
            f64::from(records[k].features[3])
        );
    }
    assert!(file.record(5).is_err());
}
