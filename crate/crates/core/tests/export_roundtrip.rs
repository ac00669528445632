mod common;

use std::collections::BTreeSet;
use std::io::Cursor;

use ciff_kit::export::average_doclength_matches;
use ciff_kit::stream::{open_export, ExportSink};
use ciff_kit::{compute_stats, read_export, validate, write_export, ExportReader};

fn bytes(index: &ciff_kit::InMemoryIndex, filter: Option<&BTreeSet<String>>) -> Vec<u8> {
    index.write_ciff(filter, "test", Vec::new()).unwrap()
}

#[test]
fn t1_header_and_stats() {
    let data = bytes(&common::t1(), None);
    let export = read_export(Cursor::new(&data)).unwrap();
    let h = &export.header;
    assert_eq!((h.num_postings_lists, h.num_docs, h.total_terms_in_collection), (6, 3, 12));
    assert_eq!(h.average_doclength, 4.0);
    assert!(average_doclength_matches(h));
    let terms: Vec<&str> = export.postings_lists.iter().map(|l| l.term.as_str()).collect();
    assert_eq!(terms, ["apple", "banana", "cherry", "date", "fig", "grape"]);
    assert_eq!(export.postings_lists[0].df, 2);
    assert_eq!(export.postings_lists[0].cf, 3);

    let stats = compute_stats(Cursor::new(&data), 3).unwrap();
    assert_eq!(stats.vocabulary, 6);
    assert_eq!(stats.postings, 10);
    assert_eq!(stats.doclength_sum, 12);
    assert!(stats.doclength_matches_header());
    assert_eq!(stats.top_terms[0].0, "cherry");
}

#[test]
fn read_then_write_is_identity() {
    for index in [common::t1(), common::synthetic(7, 300, 2000)] {
        let data = bytes(&index, None);
        let again = write_export(&read_export(Cursor::new(&data)).unwrap(), Vec::new()).unwrap();
        assert_eq!(data, again);
    }
}

#[test]
fn repeated_builds_are_identical() {
    assert_eq!(bytes(&common::t1(), None), bytes(&common::t1(), None));
    assert_eq!(bytes(&common::synthetic(3, 200, 500), None), bytes(&common::synthetic(3, 200, 500), None));
}

#[test]
fn filtered_export_keeps_docs_and_totals() {
    let filter: BTreeSet<String> = ["apple".to_string()].into();
    let data = bytes(&common::t1(), Some(&filter));
    let export = read_export(Cursor::new(&data)).unwrap();
    let h = &export.header;
    assert_eq!((h.num_postings_lists, h.num_docs, h.total_terms_in_collection), (1, 3, 12));
    assert_eq!(h.total_postings_lists, 6);
    assert_eq!(export.doc_records.len(), 3);
    assert!(validate(Cursor::new(&data)).is_empty());
}

#[test]
fn streaming_reader_matches_materialized() {
    let data = bytes(&common::synthetic(11, 100, 300), None);
    let export = read_export(Cursor::new(&data)).unwrap();
    let mut reader = ExportReader::new(Cursor::new(&data)).unwrap();
    let lists: Vec<_> = reader.postings_lists().collect::<Result<_, _>>().unwrap();
    let docs: Vec<_> = reader.doc_records().collect::<Result<_, _>>().unwrap();
    reader.finish().unwrap();
    assert_eq!(lists, export.postings_lists);
    assert_eq!(docs, export.doc_records);
}

#[test]
fn gzip_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let index = common::t1();
    let plain = bytes(&index, None);
    let path = dir.path().join("t1.ciff.gz");
    let sink = ExportSink::create(&path).unwrap();
    index.write_ciff(None, "test", sink).unwrap().finish().unwrap();
    let raw = std::fs::read(&path).unwrap();
    assert_eq!(&raw[..2], &[0x1f, 0x8b]);
    assert_eq!(read_export(open_export(&path).unwrap()).unwrap(), read_export(Cursor::new(&plain)).unwrap());
    assert!(validate(open_export(&path).unwrap()).is_empty());
}

#[test]
fn header_totals_hold_for_generated_exports() {
    for seed in 0..20 {
        let index = common::synthetic(seed, 50 + seed as usize * 10, 400);
        let data = bytes(&index, None);
        let stats = compute_stats(Cursor::new(&data), 0).unwrap();
        assert_eq!(stats.doclength_sum, stats.header.total_terms_in_collection);
        assert!(average_doclength_matches(&stats.header));
    }
}
