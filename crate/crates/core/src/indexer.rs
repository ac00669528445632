//! Corpus ingestion and in-memory inverted index construction.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::analysis::{analyze, AnalysisConfig};
use crate::export::{write_streaming, ExportError};
use crate::model::{CiffDocRecord, CiffExport, CiffHeader, CiffPosting, CiffPostingsList, CIFF_VERSION};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate collection docid {0:?}")]
    DuplicateCollectionDocid(String),
    #[error("empty collection docid")]
    EmptyCollectionDocid,
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("too many documents for 32-bit docids")]
    TooManyDocuments,
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusDocument {
    pub collection_docid: String,
    pub contents: String,
}

impl CorpusDocument {
    pub fn new(collection_docid: impl Into<String>, contents: impl Into<String>) -> Self {
        Self { collection_docid: collection_docid.into(), contents: contents.into() }
    }
}

/// Reads `collection_docid<TAB>contents` lines. Empty lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> impl Iterator<Item = Result<CorpusDocument, IndexError>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(IndexError::Io(e))),
        };
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            return None;
        }
        Some(match line.split_once('\t') {
            Some(("", _)) => {
                Err(IndexError::MalformedLine { line: i + 1, message: "empty collection docid".into() })
            }
            Some((id, contents)) => Ok(CorpusDocument::new(id, contents)),
            None => Err(IndexError::MalformedLine {
                line: i + 1,
                message: "expected collection_docid<TAB>contents".into(),
            }),
        })
    })
}

/// One term per line; blank lines ignored.
pub fn read_stopwords<R: BufRead>(reader: R) -> io::Result<Vec<String>> {
    let mut words = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let word = line.trim();
        if !word.is_empty() {
            words.push(word.to_string());
        }
    }
    Ok(words)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TermEntry {
    pub cf: u64,
    /// (docid, tf), ascending docid
    pub postings: Vec<(u32, u32)>,
}

impl TermEntry {
    pub fn df(&self) -> u32 {
        self.postings.len() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocEntry {
    pub collection_docid: String,
    pub doclength: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InMemoryIndex {
    config: AnalysisConfig,
    dictionary: BTreeMap<String, TermEntry>,
    docs: Vec<DocEntry>,
    total_terms: u64,
}

impl InMemoryIndex {
    pub fn config(&self) -> &AnalysisConfig {
        &self.config
    }

    /// Terms in UTF-8 byte order.
    pub fn dictionary(&self) -> &BTreeMap<String, TermEntry> {
        &self.dictionary
    }

    pub fn term(&self, term: &str) -> Option<&TermEntry> {
        self.dictionary.get(term)
    }

    /// Indexed by docid.
    pub fn docs(&self) -> &[DocEntry] {
        &self.docs
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn total_terms(&self) -> u64 {
        self.total_terms
    }

    pub fn average_doclength(&self) -> f64 {
        if self.docs.is_empty() {
            0.0
        } else {
            self.total_terms as f64 / self.docs.len() as f64
        }
    }

    fn header(&self, num_postings_lists: usize, description: &str) -> CiffHeader {
        CiffHeader {
            version: CIFF_VERSION,
            num_postings_lists: num_postings_lists as i32,
            num_docs: self.docs.len() as i32,
            total_postings_lists: self.dictionary.len() as i32,
            total_docs: self.docs.len() as i32,
            total_terms_in_collection: self.total_terms as i64,
            average_doclength: self.average_doclength(),
            description: description.to_string(),
        }
    }

    fn selected<'a>(
        &'a self,
        filter: Option<&'a BTreeSet<String>>,
    ) -> impl Iterator<Item = (&'a String, &'a TermEntry)> + 'a {
        self.dictionary.iter().filter(move |(t, _)| filter.is_none_or(|f| f.contains(*t)))
    }

    fn doc_records(&self) -> impl Iterator<Item = CiffDocRecord> + '_ {
        self.docs.iter().enumerate().map(|(d, doc)| CiffDocRecord {
            docid: d as i32,
            collection_docid: doc.collection_docid.clone(),
            doclength: doc.doclength as i32,
        })
    }

    /// Streams the index as CIFF. With a filter, only postings lists for
    /// terms in `filter` are written; doc records and header totals always
    /// describe the whole index.
    pub fn write_ciff<W: Write>(
        &self,
        filter: Option<&BTreeSet<String>>,
        description: &str,
        sink: W,
    ) -> Result<W, ExportError> {
        let header = self.header(self.selected(filter).count(), description);
        let lists = self.selected(filter).map(|(t, e)| to_postings_list(t, e));
        write_streaming(sink, header, lists, self.doc_records())
    }

    /// Materialized form of [`InMemoryIndex::write_ciff`].
    pub fn export_ciff(&self, filter: Option<&BTreeSet<String>>, description: &str) -> CiffExport {
        let postings_lists: Vec<_> = self.selected(filter).map(|(t, e)| to_postings_list(t, e)).collect();
        CiffExport {
            header: self.header(postings_lists.len(), description),
            postings_lists,
            doc_records: self.doc_records().collect(),
        }
    }
}

fn to_postings_list(term: &str, entry: &TermEntry) -> CiffPostingsList {
    CiffPostingsList {
        term: term.to_string(),
        df: entry.postings.len() as i64,
        cf: entry.cf as i64,
        postings: entry
            .postings
            .iter()
            .map(|&(docid, tf)| CiffPosting { docid: docid as i32, tf: tf as i32 })
            .collect(),
    }
}

/// Accumulates documents in ingestion order; docids are assigned 0, 1, 2, ...
pub struct IndexBuilder {
    index: InMemoryIndex,
    seen: HashSet<String>,
}

impl IndexBuilder {
    pub fn new(config: AnalysisConfig) -> Self {
        Self {
            index: InMemoryIndex { config, dictionary: BTreeMap::new(), docs: Vec::new(), total_terms: 0 },
            seen: HashSet::new(),
        }
    }

    pub fn add(&mut self, doc: CorpusDocument) -> Result<u32, IndexError> {
        if doc.collection_docid.is_empty() {
            return Err(IndexError::EmptyCollectionDocid);
        }
        if self.seen.contains(&doc.collection_docid) {
            return Err(IndexError::DuplicateCollectionDocid(doc.collection_docid));
        }
        let docid = u32::try_from(self.index.docs.len())
            .ok()
            .filter(|&d| d < i32::MAX as u32)
            .ok_or(IndexError::TooManyDocuments)?;

        let tokens = analyze(&doc.contents, &self.index.config);
        let mut tfs: HashMap<String, u32> = HashMap::new();
        for token in tokens.iter() {
            *tfs.entry(token.clone()).or_default() += 1;
        }
        for (term, tf) in tfs {
            let entry = self.index.dictionary.entry(term).or_default();
            entry.cf += u64::from(tf);
            entry.postings.push((docid, tf));
        }
        self.index.total_terms += tokens.len() as u64;
        self.seen.insert(doc.collection_docid.clone());
        self.index
            .docs
            .push(DocEntry { collection_docid: doc.collection_docid, doclength: tokens.len() as u32 });
        Ok(docid)
    }

    pub fn finish(self) -> InMemoryIndex {
        self.index
    }
}

pub fn build_index<I>(corpus: I, config: AnalysisConfig) -> Result<InMemoryIndex, IndexError>
where
    I: IntoIterator<Item = CorpusDocument>,
{
    let mut builder = IndexBuilder::new(config);
    for doc in corpus {
        builder.add(doc)?;
    }
    Ok(builder.finish())
}
