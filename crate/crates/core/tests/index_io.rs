mod common;

use std::fs;

use common::{random_page, random_query};
use strata_core::index::{read_query_dir, write_query_dir, Budget, IndexOptions};
use strata_core::{
    build_index, compress_corpus, load_index, search, storage_report, CompressionConfig, Error,
    NestedPageRep, Selector, SplitMix64,
};

fn corpus(seed: u64, n: usize) -> Vec<NestedPageRep> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|i| random_page(&mut rng, &format!("p{i:03}"), &[2, 4, 8], 8))
        .collect()
}

#[test]
fn full_index_roundtrips_pages_and_levels() {
    let dir = tempfile::tempdir().unwrap();
    let pages = corpus(31, 10);
    build_index(&pages, dir.path(), &IndexOptions::new(Budget::Full)).unwrap();
    let index = load_index(dir.path()).unwrap();
    assert_eq!(index.nested_pages().unwrap(), pages);
    let mut rng = SplitMix64::new(32);
    let q = random_query(&mut rng, "q", 3, 8);
    for sel in [Selector::Full, Selector::Level(1), Selector::Level(2)] {
        assert_eq!(
            search(&q, &index.pages, 10, sel).unwrap(),
            search(&q, &pages, 10, sel).unwrap()
        );
    }
}

#[test]
fn compressed_index_matches_in_memory_compression() {
    let dir = tempfile::tempdir().unwrap();
    let pages = corpus(33, 8);
    build_index(&pages, dir.path(), &IndexOptions::new(Budget::Tokens(5))).unwrap();
    let index = load_index(dir.path()).unwrap();
    let compressed = compress_corpus(&pages, &CompressionConfig::new(5).unwrap()).unwrap();
    for (stored, mem) in index.pages.iter().zip(&compressed) {
        assert_eq!(stored.page_id, mem.page_id);
        assert_eq!(stored.tokens, mem.centroids);
    }
}

#[test]
fn truncated_page_file_fails_to_load() {
    let dir = tempfile::tempdir().unwrap();
    build_index(&corpus(34, 3), dir.path(), &IndexOptions::new(Budget::Full)).unwrap();
    let victim = dir.path().join("docs/p001.mvtx");
    let bytes = fs::read(&victim).unwrap();
    fs::write(&victim, &bytes[..bytes.len() - 7]).unwrap();
    let err = load_index(dir.path()).unwrap_err();
    assert!(matches!(err, Error::Format { .. }), "{err}");
}

#[test]
fn flipped_payload_byte_fails_checksum() {
    let dir = tempfile::tempdir().unwrap();
    build_index(&corpus(35, 3), dir.path(), &IndexOptions::new(Budget::Full)).unwrap();
    let victim = dir.path().join("docs/p002.mvtx");
    let mut bytes = fs::read(&victim).unwrap();
    bytes[30] ^= 0x40;
    fs::write(&victim, &bytes).unwrap();
    let err = load_index(dir.path()).unwrap_err();
    assert!(matches!(err, Error::ChecksumMismatch { .. }), "{err}");
}

#[test]
fn page_with_foreign_dim_fails_to_load() {
    let dir = tempfile::tempdir().unwrap();
    build_index(&corpus(36, 3), dir.path(), &IndexOptions::new(Budget::Full)).unwrap();
    let other = tempfile::tempdir().unwrap();
    let mut rng = SplitMix64::new(37);
    let wide = vec![random_page(&mut rng, "p000", &[2, 4, 8], 16)];
    build_index(&wide, other.path(), &IndexOptions::new(Budget::Full)).unwrap();
    fs::copy(
        other.path().join("docs/p000.mvtx"),
        dir.path().join("docs/p000.mvtx"),
    )
    .unwrap();
    let err = load_index(dir.path()).unwrap_err();
    assert!(
        matches!(
            err,
            Error::InconsistentDim {
                expected: 8,
                found: 16,
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn storage_for_512_tokens_of_dim_128() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SplitMix64::new(38);
    let page = random_page(&mut rng, "p", &[512], 128);
    build_index(&[page], dir.path(), &IndexOptions::new(Budget::Full)).unwrap();
    let report = storage_report(&load_index(dir.path()).unwrap());
    assert_eq!(report.data_bytes, 262_144);
    assert_eq!(report.file_bytes, 262_144 + 26);
    let on_disk = fs::metadata(dir.path().join("docs/p.mvtx")).unwrap().len();
    assert_eq!(on_disk, report.file_bytes);
}

#[test]
fn manifest_records_budget_and_pages() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = build_index(
        &corpus(39, 4),
        dir.path(),
        &IndexOptions::new(Budget::Tokens(6)),
    )
    .unwrap();
    let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["budget"], 6);
    assert_eq!(json["pages"].as_array().unwrap().len(), 4);
    assert_eq!(manifest.pages.len(), 4);
    assert!(manifest.pages.iter().all(|p| p.rows == 6));
}

#[test]
fn query_dir_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SplitMix64::new(40);
    let queries: Vec<_> = (0..5)
        .map(|i| random_query(&mut rng, &format!("q{i}"), 3, 8))
        .collect();
    write_query_dir(dir.path(), &queries).unwrap();
    assert_eq!(read_query_dir(dir.path()).unwrap(), queries);
}

#[test]
fn empty_corpus_index_loads_and_search_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = IndexOptions::new(Budget::Full);
    opts.dim = Some(8);
    build_index(&[], dir.path(), &opts).unwrap();
    let index = load_index(dir.path()).unwrap();
    let mut rng = SplitMix64::new(41);
    let q = random_query(&mut rng, "q", 2, 8);
    assert!(matches!(
        search(&q, &index.pages, 5, Selector::Full),
        Err(Error::EmptyCorpus)
    ));
}
