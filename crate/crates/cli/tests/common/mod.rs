#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ciff_kit::codec::encode_varint_to;
use ciff_kit::model::CiffExport;
use ciff_kit::stream::write_delimited;
use ciff_kit::{build_index, AnalysisConfig, CorpusDocument, InMemoryIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BIN: &str = env!("CARGO_BIN_EXE_ciff");

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn ciff(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("run ciff")
}

pub fn t1_docs() -> Vec<CorpusDocument> {
    vec![
        CorpusDocument::new("d0", "apple banana apple cherry"),
        CorpusDocument::new("d1", "banana banana cherry date fig grape"),
        CorpusDocument::new("d2", "apple cherry"),
    ]
}

pub fn t1() -> InMemoryIndex {
    build_index(t1_docs(), AnalysisConfig::default()).unwrap()
}

/// Letters-only spelling of `i`, so analysis leaves it untouched.
pub fn word(i: usize) -> String {
    let mut s = String::from("w");
    let mut n = i;
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    s
}

/// `num_docs` documents over exactly `vocab` distinct terms: term `i` is
/// planted once in document `i % num_docs`, the rest of each document is
/// drawn from a skewed distribution over the vocabulary.
pub fn synthetic_docs(seed: u64, num_docs: usize, vocab: usize) -> Vec<CorpusDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs: Vec<Vec<String>> = vec![Vec::new(); num_docs];
    for i in 0..vocab {
        docs[i % num_docs].push(word(i));
    }
    for words in docs.iter_mut() {
        for _ in 0..rng.gen_range(10..70) {
            let u: f64 = rng.gen();
            words.push(word(((vocab as f64).powf(u) as usize).saturating_sub(1).min(vocab - 1)));
        }
        let n = words.len();
        for i in (1..n).rev() {
            words.swap(i, rng.gen_range(0..=i));
        }
    }
    docs.into_iter()
        .enumerate()
        .map(|(d, words)| CorpusDocument::new(format!("doc{d:04}"), words.join(" ")))
        .collect()
}

pub fn synthetic(seed: u64, num_docs: usize, vocab: usize) -> InMemoryIndex {
    build_index(synthetic_docs(seed, num_docs, vocab), AnalysisConfig::default()).unwrap()
}

/// Random queries of 1 to 4 terms from the first `vocab` words.
pub fn random_queries(seed: u64, count: usize, vocab: usize) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let len = rng.gen_range(1..=4);
            (0..len)
                .map(|_| {
                    // half the draws favour frequent terms
                    if rng.gen_bool(0.5) {
                        word(rng.gen_range(0..50.min(vocab)))
                    } else {
                        word(rng.gen_range(0..vocab))
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OracleVariant {
    Lucene,
    Atire,
}

/// Scores every document straight from the in-memory dictionary with the
/// closed-form weights; ties go to the lower docid.
pub fn oracle_search(
    index: &InMemoryIndex,
    query: &[String],
    k: usize,
    k1: f64,
    b: f64,
    variant: OracleVariant,
) -> Vec<(u32, f64)> {
    let n = index.num_docs() as f64;
    let avdl = index.total_terms() as f64 / n;
    let terms: BTreeSet<&String> = query.iter().collect();
    let mut scored = Vec::new();
    for (d, doc) in index.docs().iter().enumerate() {
        let mut score = 0.0f64;
        let mut matched = false;
        for term in &terms {
            let Some(entry) = index.term(term) else { continue };
            let Some(&(_, tf)) = entry.postings.iter().find(|p| p.0 == d as u32) else { continue };
            matched = true;
            let (tf, df, dl) = (f64::from(tf), entry.postings.len() as f64, f64::from(doc.doclength));
            let norm = k1 * (1.0 - b + b * dl / avdl);
            score += match variant {
                OracleVariant::Lucene => (1.0 + (n - df + 0.5) / (df + 0.5)).ln() * (tf / (tf + norm)),
                OracleVariant::Atire => (n / df).ln() * (tf * (k1 + 1.0) / (tf + norm)),
            };
        }
        if matched {
            scored.push((d as u32, score));
        }
    }
    scored.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    scored.truncate(k);
    scored
}

fn string_field(field: u64, value: &str, out: &mut Vec<u8>) {
    encode_varint_to(field << 3 | 2, out);
    encode_varint_to(value.len() as u64, out);
    out.extend_from_slice(value.as_bytes());
}

fn int_field(field: u64, value: i64, out: &mut Vec<u8>) {
    if value != 0 {
        encode_varint_to(field << 3, out);
        // negative values sign-extend, as int32 does on the wire
        encode_varint_to(value as u64, out);
    }
}

/// Hand-rolled postings-list record that accepts any gaps, including
/// negative ones the library encoder refuses.
pub fn postings_list_bytes(term: &str, df: i64, cf: i64, gaps: &[(i64, i64)]) -> Vec<u8> {
    let mut out = Vec::new();
    string_field(1, term, &mut out);
    int_field(2, df, &mut out);
    int_field(3, cf, &mut out);
    for &(gap, tf) in gaps {
        let mut posting = Vec::new();
        int_field(1, gap, &mut posting);
        int_field(2, tf, &mut posting);
        encode_varint_to(4 << 3 | 2, &mut out);
        encode_varint_to(posting.len() as u64, &mut out);
        out.extend_from_slice(&posting);
    }
    out
}

/// Frames every record of `export` without any consistency checks.
/// Returns the bytes and the start offset of each postings-list frame.
pub fn raw_export(export: &CiffExport) -> (Vec<u8>, Vec<usize>) {
    raw_export_with(export, |_| None)
}

/// Like [`raw_export`], with `replace(i)` able to supply the body of
/// postings list `i`.
pub fn raw_export_with(
    export: &CiffExport,
    replace: impl Fn(usize) -> Option<Vec<u8>>,
) -> (Vec<u8>, Vec<usize>) {
    let mut out = Vec::new();
    let mut starts = Vec::new();
    write_delimited(&export.header.encode().unwrap(), &mut out).unwrap();
    for (i, list) in export.postings_lists.iter().enumerate() {
        starts.push(out.len());
        let body = replace(i).unwrap_or_else(|| {
            let gaps: Vec<(i64, i64)> = list
                .postings
                .iter()
                .scan(0i64, |prev, p| {
                    let gap = i64::from(p.docid) - *prev;
                    *prev = i64::from(p.docid);
                    Some((gap, i64::from(p.tf)))
                })
                .collect();
            postings_list_bytes(&list.term, list.df, list.cf, &gaps)
        });
        write_delimited(&body, &mut out).unwrap();
    }
    for doc in &export.doc_records {
        write_delimited(&doc.encode().unwrap(), &mut out).unwrap();
    }
    (out, starts)
}

pub const CORRUPTIONS: [&str; 8] = [
    "df+1 and df-1",
    "tf set to 0",
    "cf mismatch",
    "docid regression",
    "truncation after header",
    "truncation mid-postings",
    "version 2",
    "posting references missing doc",
];

/// Applies corruption `which` (an index into [`CORRUPTIONS`]) to a valid
/// export, returning one or more corrupted byte streams.
pub fn corrupt(export: &CiffExport, which: usize) -> Vec<Vec<u8>> {
    // a list with at least two postings to tamper with
    let target =
        export.postings_lists.iter().position(|l| l.postings.len() >= 2).expect("list with 2 postings");
    let mut e = export.clone();
    match which {
        0 => {
            let mut minus = export.clone();
            e.postings_lists[target].df += 1;
            minus.postings_lists[target].df -= 1;
            vec![raw_export(&e).0, raw_export(&minus).0]
        }
        1 => {
            e.postings_lists[target].postings[1].tf = 0;
            vec![raw_export(&e).0]
        }
        2 => {
            e.postings_lists[target].cf += 1;
            vec![raw_export(&e).0]
        }
        3 => {
            let list = &export.postings_lists[target];
            let (a, b) = (i64::from(list.postings[0].docid), i64::from(list.postings[1].docid));
            let mut gaps = vec![(b, i64::from(list.postings[1].tf)), (a - b, i64::from(list.postings[0].tf))];
            let mut prev = a;
            for p in &list.postings[2..] {
                gaps.push((i64::from(p.docid) - prev, i64::from(p.tf)));
                prev = i64::from(p.docid);
            }
            let body = postings_list_bytes(&list.term, list.df, list.cf, &gaps);
            vec![raw_export_with(export, |i| (i == target).then(|| body.clone())).0]
        }
        4 => {
            let (bytes, starts) = raw_export(export);
            vec![bytes[..starts[0]].to_vec()]
        }
        5 => {
            let (bytes, starts) = raw_export(export);
            let start = starts[starts.len() / 2];
            let end = starts.get(starts.len() / 2 + 1).copied().unwrap_or(bytes.len());
            vec![bytes[..start + (end - start) / 2].to_vec()]
        }
        6 => {
            e.header.version = 2;
            vec![raw_export(&e).0]
        }
        7 => {
            let last = e.postings_lists.len() - 1;
            let list = &mut e.postings_lists[last];
            list.postings.push(ciff_kit::CiffPosting { docid: export.header.num_docs + 5, tf: 1 });
            list.df += 1;
            list.cf += 1;
            vec![raw_export(&e).0]
        }
        _ => panic!("no corruption {which}"),
    }
}
