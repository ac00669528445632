//! Streaming structural validation of CIFF exports.
//!
//! Malformed input never fails the validator; every problem becomes a
//! [`Finding`]. Memory stays bounded apart from two docid bitsets and the
//! set of terms seen (for duplicate detection).

use std::collections::HashSet;
use std::fmt;
use std::io::Read;

use crate::export::average_doclength_matches;
use crate::model::{CiffDocRecord, CiffHeader, CiffPostingsList, CIFF_VERSION};
use crate::stream::{DelimitedReader, DEFAULT_MAX_RECORD_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "ERROR",
            Severity::Warning => "WARNING",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.severity, self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    fn push(&mut self, severity: Severity, location: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding { severity, location: location.into(), message: message.into() });
    }

    fn error(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Error, location, message);
    }

    fn warning(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Warning, location, message);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "{finding}")?;
        }
        Ok(())
    }
}

struct DocidSet {
    bits: Vec<u64>,
}

impl DocidSet {
    fn new(bound: usize) -> Self {
        Self { bits: vec![0; bound.div_ceil(64)] }
    }

    fn contains_slot(&self, docid: i32) -> bool {
        docid >= 0 && (docid as usize) < self.bits.len() * 64
    }

    fn insert(&mut self, docid: i32) {
        let d = docid as usize;
        self.bits[d / 64] |= 1 << (d % 64);
    }

    fn get(&self, docid: usize) -> bool {
        self.bits[docid / 64] & (1 << (docid % 64)) != 0
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.bits.len() * 64).filter(|&d| self.get(d))
    }
}

pub fn validate<R: Read>(source: R) -> ValidationReport {
    validate_with_max_record_bytes(source, DEFAULT_MAX_RECORD_BYTES)
}

pub fn validate_with_max_record_bytes<R: Read>(source: R, cap: u64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut stream = DelimitedReader::with_max_len(source, cap);

    let header = match stream.read_delimited() {
        Ok(Some(bytes)) => match CiffHeader::decode(&bytes) {
            Ok(h) => h,
            Err(e) => {
                report.error("header", format!("undecodable header: {e}"));
                return report;
            }
        },
        Ok(None) => {
            report.error("stream", "empty stream: no header record");
            return report;
        }
        Err(e) => {
            report.error("stream", format!("header: {e}"));
            return report;
        }
    };
    check_header(&header, &mut report);

    let bound = header.total_docs.max(header.num_docs).max(0) as usize;
    let mut referenced = DocidSet::new(bound);
    let mut present = DocidSet::new(bound);
    let mut terms: HashSet<String> = HashSet::new();
    let mut previous_term: Option<String> = None;
    let mut warned_order = false;

    let num_lists = header.num_postings_lists.max(0);
    for i in 0..num_lists {
        let bytes = match stream.read_delimited() {
            Ok(Some(b)) => b,
            Ok(None) => {
                report.error("stream", format!("stream ended after {i} of {num_lists} postings lists"));
                return report;
            }
            Err(e) => {
                report.error(format!("postings_list[{i}]"), format!("unreadable record: {e}"));
                return report;
            }
        };
        let list = match CiffPostingsList::decode(&bytes) {
            Ok(l) => l,
            Err(e) => {
                report.error(format!("postings_list[{i}]"), format!("undecodable record: {e}"));
                continue;
            }
        };
        let location = format!("postings_list[{i}] term={}", list.term);
        check_postings_list(&list, &location, &mut referenced, &mut report);

        if list.term.is_empty() {
            report.error(&location, "empty term");
        }
        if !terms.insert(list.term.clone()) {
            report.error(&location, "duplicate term");
        } else if let Some(prev) = &previous_term {
            if !warned_order && prev.as_bytes() > list.term.as_bytes() {
                warned_order = true;
                report.warning(
                    &location,
                    format!("terms not in byte order: {prev:?} precedes {:?}", list.term),
                );
            }
        }
        previous_term = Some(list.term);
    }

    let num_docs = header.num_docs.max(0);
    let full = header.num_docs == header.total_docs;
    let mut last_docid: Option<i32> = None;
    let mut doclength_sum = 0i64;
    for j in 0..num_docs {
        let bytes = match stream.read_delimited() {
            Ok(Some(b)) => b,
            Ok(None) => {
                report.error("stream", format!("stream ended after {j} of {num_docs} doc records"));
                return report;
            }
            Err(e) => {
                report.error(format!("doc_record[{j}]"), format!("unreadable record: {e}"));
                return report;
            }
        };
        let doc = match CiffDocRecord::decode(&bytes) {
            Ok(d) => d,
            Err(e) => {
                report.error(format!("doc_record[{j}]"), format!("undecodable record: {e}"));
                continue;
            }
        };
        let location = format!("doc_record[{j}] docid={}", doc.docid);
        if doc.docid < 0 {
            report.error(&location, "negative docid");
        } else if last_docid.is_some_and(|prev| doc.docid <= prev) {
            report.error(&location, "doc records not sorted by docid");
        } else if full && i64::from(doc.docid) != i64::from(j) {
            report.error(&location, format!("full export docids must be contiguous from 0, expected {j}"));
        }
        if doc.collection_docid.is_empty() {
            report.error(&location, "empty collection_docid");
        }
        if doc.doclength < 0 {
            report.error(&location, format!("negative doclength {}", doc.doclength));
        }
        if present.contains_slot(doc.docid) {
            present.insert(doc.docid);
        }
        last_docid = Some(doc.docid);
        doclength_sum += i64::from(doc.doclength);
    }

    match stream.at_end() {
        Ok(true) => {}
        Ok(false) => report.error("stream", "trailing bytes after the last declared doc record"),
        Err(e) => report.error("stream", format!("after last doc record: {e}")),
    }

    let mut missing = referenced.iter().filter(|&d| !present.get(d));
    if let Some(first) = missing.next() {
        let more = missing.count();
        report.error(
            "doc_records",
            format!("posting references docid {first} with no doc record ({} docids missing)", more + 1),
        );
    }

    if full && doclength_sum != header.total_terms_in_collection {
        report.warning(
            "doc_records",
            format!(
                "sum of doclength {doclength_sum} != header.total_terms_in_collection {}",
                header.total_terms_in_collection
            ),
        );
    }
    report
}

fn check_header(h: &CiffHeader, report: &mut ValidationReport) {
    if h.version != CIFF_VERSION {
        report.error("header", format!("unsupported version {} (expected 1)", h.version));
    }
    let counts = [
        ("num_postings_lists", i64::from(h.num_postings_lists)),
        ("num_docs", i64::from(h.num_docs)),
        ("total_postings_lists", i64::from(h.total_postings_lists)),
        ("total_docs", i64::from(h.total_docs)),
        ("total_terms_in_collection", h.total_terms_in_collection),
    ];
    for (name, value) in counts {
        if value < 0 {
            report.error("header", format!("{name} is negative ({value})"));
        }
    }
    for (num_name, num, total_name, total) in [
        ("num_postings_lists", h.num_postings_lists, "total_postings_lists", h.total_postings_lists),
        ("num_docs", h.num_docs, "total_docs", h.total_docs),
    ] {
        if total == 0 && num > 0 {
            report.warning("header", format!("{total_name} is 0 (unknown) while {num_name} = {num}"));
        } else if num > total {
            report.error("header", format!("{num_name} {num} > {total_name} {total}"));
        }
    }
    if !h.average_doclength.is_finite() || h.average_doclength < 0.0 {
        report.error("header", format!("invalid average_doclength {}", h.average_doclength));
    } else if !average_doclength_matches(h) {
        report.warning(
            "header",
            format!(
                "average_doclength {} differs from total_terms_in_collection / total_docs = {}",
                h.average_doclength,
                h.total_terms_in_collection as f64 / f64::from(h.total_docs)
            ),
        );
    }
}

fn check_postings_list(
    list: &CiffPostingsList,
    location: &str,
    referenced: &mut DocidSet,
    report: &mut ValidationReport,
) {
    if list.df != list.postings.len() as i64 {
        report.error(location, format!("df {} != number of postings {}", list.df, list.postings.len()));
    }
    let tf_sum: i64 = list.postings.iter().map(|p| i64::from(p.tf)).sum();
    if list.cf != tf_sum {
        report.error(location, format!("cf {} != sum of tf {tf_sum}", list.cf));
    }
    if let Some(p) = list.postings.iter().find(|p| p.tf < 1) {
        report.error(location, format!("docid {} has tf {} < 1", p.docid, p.tf));
    }
    if let Some(w) = list.postings.windows(2).find(|w| w[1].docid <= w[0].docid) {
        report.error(location, format!("docids not strictly increasing: {} then {}", w[0].docid, w[1].docid));
    }
    let mut out_of_range = None;
    for p in &list.postings {
        if referenced.contains_slot(p.docid) {
            referenced.insert(p.docid);
        } else if out_of_range.is_none() {
            out_of_range = Some(p.docid);
        }
    }
    if let Some(d) = out_of_range {
        report.error(location, format!("posting references docid {d} with no doc record"));
    }
}
