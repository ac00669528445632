//! Exhaustive document-at-a-time top-k evaluation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::bm25::Bm25Params;
use super::native::{NativeIndex, PostingsView};

/// Default result depth.
pub const DEFAULT_K: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredDoc {
    pub docid: u32,
    pub score: f64,
}

impl ScoredDoc {
    /// Result order: score descending, then docid ascending.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other.score.total_cmp(&self.score).then(self.docid.cmp(&other.docid))
    }
}

// heap key where Greater means "ranks worse", so the heap top is the
// current k-th result
struct Candidate {
    slot: u32,
    score: f64,
}

impl Candidate {
    fn cmp_rank(&self, other: &Self) -> Ordering {
        other.score.total_cmp(&self.score).then(self.slot.cmp(&other.slot))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_rank(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_rank(other)
    }
}

struct Cursor<'a> {
    postings: PostingsView<'a>,
    pos: usize,
    idf: f64,
}

impl Cursor<'_> {
    fn current(&self) -> Option<u32> {
        self.postings.slots.get(self.pos).copied()
    }
}

/// Top-`k` documents for `terms` (already analyzed).
///
/// A document's score sums the weights of the distinct query terms it
/// contains, added in term byte order. Every document containing at least
/// one query term is a candidate. Unknown terms contribute nothing.
pub fn search(index: &NativeIndex, terms: &[String], k: usize, params: &Bm25Params) -> Vec<ScoredDoc> {
    if k == 0 {
        return Vec::new();
    }
    let mut distinct: Vec<&str> = terms.iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();

    let stats = index.stats();
    let mut cursors: Vec<Cursor<'_>> = distinct
        .iter()
        .filter_map(|t| index.view(t))
        .filter(|v| v.df > 0)
        .map(|postings| Cursor { idf: params.idf(postings.df, stats.total_docs), postings, pos: 0 })
        .collect();

    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    while let Some(slot) = cursors.iter().filter_map(Cursor::current).min() {
        let doclength = index.slot_doclength(slot);
        let mut score = 0.0f64;
        for cursor in cursors.iter_mut() {
            if cursor.current() == Some(slot) {
                let tf = cursor.postings.tfs[cursor.pos];
                score += cursor.idf * params.tf_part(tf, doclength, stats.average_doclength);
                cursor.pos += 1;
            }
        }
        let candidate = Candidate { slot, score };
        if heap.len() < k {
            heap.push(candidate);
        } else if heap.peek().is_some_and(|worst| candidate < *worst) {
            heap.pop();
            heap.push(candidate);
        }
    }

    heap.into_sorted_vec()
        .into_iter()
        .map(|c| ScoredDoc { docid: index.slot_docid(c.slot), score: c.score })
        .collect()
}
