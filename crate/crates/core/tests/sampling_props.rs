//! Property tests for the drawing strategies and the dataset file formats.

use proptest::prelude::*;
use synthpower::linalg::Mat;
use synthpower::sampling::{
    draw, parse_f32d, parse_tag_sidecar, split_by_tag, write_f32d, write_tag_sidecar, F32d,
    SourceDistribution, Strategy, TaggedDataset,
};

fn finite_f32() -> impl proptest::strategy::Strategy<Value = f32> {
    prop::num::f32::NORMAL | prop::num::f32::SUBNORMAL | prop::num::f32::ZERO
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f32d_files_round_trip(
        dims in prop::collection::vec(1usize..6, 1..4),
        seed in any::<u64>(),
    ) {
        let count: usize = dims.iter().product();
        let data: Vec<f32> = {
            let mut r = synthpower::rng::prng(seed);
            synthpower::rng::standard_normals(&mut r, count).iter().map(|&v| v as f32).collect()
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("payload.f32d");
        write_f32d(&path, &F32d { dims: dims.clone(), data: data.clone() }).unwrap();
        let back = parse_f32d(&std::fs::read(&path).unwrap()).unwrap();
        prop_assert_eq!(back.dims, dims);
        let bits: Vec<u32> = data.iter().map(|v| v.to_bits()).collect();
        let back_bits: Vec<u32> = back.data.iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(bits, back_bits);
    }

    #[test]
    fn f32d_values_survive_even_for_odd_payloads(values in prop::collection::vec(finite_f32(), 1..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("payload.f32d");
        let payload = F32d { dims: vec![values.len()], data: values.clone() };
        write_f32d(&path, &payload).unwrap();
        let back = parse_f32d(&std::fs::read(&path).unwrap()).unwrap();
        for (a, b) in values.iter().zip(&back.data) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn sidecars_round_trip(
        entries in prop::collection::vec(
            prop::collection::vec("[a-z]{1,8}", 0..4),
            1..12,
        ),
    ) {
        let mut vocab: Vec<String> = Vec::new();
        for set in &entries {
            for tag in set {
                if !vocab.contains(tag) {
                    vocab.push(tag.clone());
                }
            }
        }
        // Tag sets as written: duplicates within one entry collapse on parse.
        let keyed: Vec<(String, Vec<String>)> = entries
            .iter()
            .enumerate()
            .map(|(i, set)| {
                let mut dedup: Vec<String> = Vec::new();
                for t in set {
                    if !dedup.contains(t) {
                        dedup.push(t.clone());
                    }
                }
                (i.to_string(), dedup)
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("payload.tags");
        write_tag_sidecar(&path, &vocab, &keyed).unwrap();
        let back = parse_tag_sidecar(&std::fs::read_to_string(&path).unwrap()).unwrap();
        prop_assert_eq!(back.vocab, vocab);
        prop_assert_eq!(back.entries, keyed);
        prop_assert!(back.warnings.is_empty());
    }

    #[test]
    fn bootstrap_draws_stay_inside_the_pool(
        rows in 1usize..20,
        cols in 1usize..5,
        seed in any::<u64>(),
    ) {
        let pool = {
            let mut r = synthpower::rng::prng(seed ^ 0xabcd);
            Mat::from_vec(rows, cols, synthpower::rng::standard_normals(&mut r, rows * cols))
        };
        let n = 1 + (seed as usize) % rows;
        let source = SourceDistribution::Empirical { pool: pool.clone() };
        let drawn = draw(&source, Strategy::Bootstrap, n, seed).unwrap();
        prop_assert_eq!(drawn.rows(), n);
        let mut members: Vec<Vec<u64>> =
            (0..rows).map(|i| pool.row(i).iter().map(|v| v.to_bits()).collect()).collect();
        members.sort();
        for i in 0..n {
            let row: Vec<u64> = drawn.row(i).iter().map(|v| v.to_bits()).collect();
            prop_assert!(members.binary_search(&row).is_ok());
        }
    }

    #[test]
    fn tag_splits_partition_the_dataset(
        memberships in prop::collection::vec(0u8..4, 1..16),
    ) {
        // Two tags; membership bits choose {}, {x}, {y}, {x, y} per row.
        let n = memberships.len();
        let rows = Mat::from_vec(n, 1, (0..n).map(|i| i as f64).collect());
        let tags: Vec<Vec<String>> = memberships
            .iter()
            .map(|m| {
                let mut set = Vec::new();
                if m & 1 != 0 { set.push("x".to_string()); }
                if m & 2 != 0 { set.push("y".to_string()); }
                set
            })
            .collect();
        let ds = TaggedDataset::new(rows, tags, vec!["x".into(), "y".into()]).unwrap();
        for tag in ["x", "y"] {
            let (d1, d0) = split_by_tag(&ds, tag).unwrap();
            prop_assert_eq!(d1.rows() + d0.rows(), n);
            let mut seen: Vec<u64> = (0..d1.rows()).map(|i| d1[(i, 0)].to_bits()).collect();
            seen.extend((0..d0.rows()).map(|i| d0[(i, 0)].to_bits()));
            seen.sort();
            let mut expect: Vec<u64> = (0..n).map(|i| ds.rows[(i, 0)].to_bits()).collect();
            expect.sort();
            prop_assert_eq!(seen, expect);
            prop_assert_eq!(d1.rows(), ds.count_tagged(tag));
        }
    }
}
