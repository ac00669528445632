//! Import, BM25 retrieval and run output.

mod bm25;
mod native;
mod run;
mod search;

use std::io;

use thiserror::Error;

use crate::export::ExportError;

pub use bm25::{bm25_weight, Bm25Params, Bm25Variant, ScoringStats};
pub use native::{import_ciff, import_ciff_with_max_record_bytes, IndexStats, NativeIndex};
pub use run::{parse_topics, write_run, write_topic_run, Topic};
pub use search::{search, ScoredDoc, DEFAULT_K};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("invalid export: {0}")]
    InvalidExport(String),
    #[error("term {term:?} references docid {docid} with no doc record")]
    MissingDocRecord { term: String, docid: u32 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("docid {0} not in index")]
    UnknownDocid(u32),
    #[error("corrupt native index: {0}")]
    CorruptIndex(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}
