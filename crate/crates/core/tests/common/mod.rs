#![allow(dead_code)]

use ciff_kit::{build_index, AnalysisConfig, CorpusDocument, InMemoryIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

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

/// Zipf-ish vocabulary word `i`: alphabetic so the analyzer keeps it intact.
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

pub fn synthetic_docs(seed: u64, num_docs: usize, vocab: usize) -> Vec<CorpusDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_docs)
        .map(|d| {
            let len = rng.gen_range(5..60);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    let u: f64 = rng.gen();
                    word(((vocab as f64).powf(u) as usize).saturating_sub(1).min(vocab - 1))
                })
                .collect();
            CorpusDocument::new(format!("doc{d:04}"), words.join(" "))
        })
        .collect()
}

pub fn synthetic(seed: u64, num_docs: usize, vocab: usize) -> InMemoryIndex {
    build_index(synthetic_docs(seed, num_docs, vocab), AnalysisConfig::default()).unwrap()
}
