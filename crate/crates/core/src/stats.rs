//! Single-pass inspection of an export.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::io::Read;

use crate::export::{ExportError, ExportReader};
use crate::model::CiffHeader;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsSummary {
    pub header: CiffHeader,
    pub postings_lists: u64,
    pub vocabulary: u64,
    pub postings: u64,
    pub collection_frequency: i64,
    pub doc_records: u64,
    pub doclength_sum: i64,
    pub min_doclength: Option<i32>,
    pub max_doclength: Option<i32>,
    /// Highest-df terms, df descending then term ascending.
    pub top_terms: Vec<(String, i64)>,
}

impl StatsSummary {
    pub fn doclength_matches_header(&self) -> bool {
        self.doclength_sum == self.header.total_terms_in_collection
    }
}

pub fn compute_stats<R: Read>(source: R, top_k: usize) -> Result<StatsSummary, ExportError> {
    let mut reader = ExportReader::new(source)?;
    let mut summary = StatsSummary { header: reader.header().clone(), ..Default::default() };
    let mut seen = HashSet::new();
    // min-heap on (df, Reverse(term)) keeps the k best
    let mut heap: BinaryHeap<Reverse<(i64, Reverse<String>)>> = BinaryHeap::new();

    for list in reader.postings_lists() {
        let list = list?;
        summary.postings_lists += 1;
        summary.postings += list.postings.len() as u64;
        summary.collection_frequency += list.cf;
        if top_k > 0 {
            heap.push(Reverse((list.df, Reverse(list.term.clone()))));
            if heap.len() > top_k {
                heap.pop();
            }
        }
        seen.insert(list.term);
    }
    summary.vocabulary = seen.len() as u64;

    for doc in reader.doc_records() {
        let doc = doc?;
        summary.doc_records += 1;
        summary.doclength_sum += i64::from(doc.doclength);
        summary.min_doclength = Some(summary.min_doclength.map_or(doc.doclength, |m| m.min(doc.doclength)));
        summary.max_doclength = Some(summary.max_doclength.map_or(doc.doclength, |m| m.max(doc.doclength)));
    }
    reader.finish()?;

    let mut top: Vec<_> = heap.into_iter().map(|Reverse((df, Reverse(term)))| (term, df)).collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    summary.top_terms = top;
    Ok(summary)
}

impl fmt::Display for StatsSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = &self.header;
        writeln!(f, "description\t{}", h.description)?;
        writeln!(f, "num_postings_lists\t{}", h.num_postings_lists)?;
        writeln!(f, "total_postings_lists\t{}", h.total_postings_lists)?;
        writeln!(f, "num_docs\t{}", h.num_docs)?;
        writeln!(f, "total_docs\t{}", h.total_docs)?;
        writeln!(f, "total_terms_in_collection\t{}", h.total_terms_in_collection)?;
        writeln!(f, "average_doclength\t{}", h.average_doclength)?;
        writeln!(f, "vocabulary\t{}", self.vocabulary)?;
        writeln!(f, "postings\t{}", self.postings)?;
        writeln!(f, "sum_cf\t{}", self.collection_frequency)?;
        writeln!(f, "doc_records\t{}", self.doc_records)?;
        writeln!(f, "sum_doclength\t{}", self.doclength_sum)?;
        writeln!(f, "sum_doclength_matches_header\t{}", self.doclength_matches_header())?;
        let opt = |v: Option<i32>| v.map_or("-".to_string(), |v| v.to_string());
        writeln!(f, "min_doclength\t{}", opt(self.min_doclength))?;
        writeln!(f, "max_doclength\t{}", opt(self.max_doclength))?;
        for (rank, (term, df)) in self.top_terms.iter().enumerate() {
            writeln!(f, "top_df\t{}\t{term}\t{df}", rank + 1)?;
        }
        Ok(())
    }
}
