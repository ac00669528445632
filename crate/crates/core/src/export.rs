//! Streaming reader and writer for whole CIFF exports: one header, then
//! exactly `num_postings_lists` postings lists, then exactly `num_docs` doc
//! records.

use std::collections::HashSet;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::model::{CiffDocRecord, CiffExport, CiffHeader, CiffPostingsList, ModelError, CIFF_VERSION};
use crate::stream::{write_delimited, DelimitedReader, StreamError, DEFAULT_MAX_RECORD_BYTES};

/// Relative tolerance between `average_doclength` and the ratio it summarizes.
pub const AVERAGE_DOCLENGTH_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unsupported CIFF version {0} (expected 1)")]
    UnsupportedVersion(i32),
    #[error("empty stream: no header record")]
    MissingHeader,
    #[error("header field {0} is negative")]
    NegativeCount(&'static str),
    #[error("count mismatch: expected {expected} {what}, stream ended after {found}")]
    CountMismatch { what: &'static str, expected: i64, found: i64 },
    #[error("trailing bytes after the last declared record")]
    TrailingBytes,
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// Relative difference check used for `average_doclength`.
pub fn average_doclength_matches(header: &CiffHeader) -> bool {
    if header.total_docs <= 0 {
        return true;
    }
    let expected = header.total_terms_in_collection as f64 / f64::from(header.total_docs);
    let scale = expected.abs().max(f64::MIN_POSITIVE);
    (header.average_doclength - expected).abs() / scale <= AVERAGE_DOCLENGTH_TOLERANCE
        || (expected == 0.0 && header.average_doclength == 0.0)
}

/// Reads an export record by record. Postings lists must be drained (or
/// skipped) before doc records are read.
pub struct ExportReader<R> {
    stream: DelimitedReader<R>,
    header: CiffHeader,
    lists_read: i64,
    docs_read: i64,
}

impl<R: Read> ExportReader<R> {
    pub fn new(source: R) -> Result<Self, ExportError> {
        Self::with_max_record_bytes(source, DEFAULT_MAX_RECORD_BYTES)
    }

    pub fn with_max_record_bytes(source: R, cap: u64) -> Result<Self, ExportError> {
        let mut stream = DelimitedReader::with_max_len(source, cap);
        let bytes = stream.read_delimited()?.ok_or(ExportError::MissingHeader)?;
        let header = CiffHeader::decode(&bytes)?;
        if header.version != CIFF_VERSION {
            return Err(ExportError::UnsupportedVersion(header.version));
        }
        for (name, value) in
            [("num_postings_lists", header.num_postings_lists), ("num_docs", header.num_docs)]
        {
            if value < 0 {
                return Err(ExportError::NegativeCount(name));
            }
        }
        Ok(Self { stream, header, lists_read: 0, docs_read: 0 })
    }

    pub fn header(&self) -> &CiffHeader {
        &self.header
    }

    fn next_record(&mut self, what: &'static str, expected: i64, found: i64) -> Result<Vec<u8>, ExportError> {
        self.stream.read_delimited()?.ok_or(ExportError::CountMismatch { what, expected, found })
    }

    pub fn next_postings_list(&mut self) -> Result<Option<CiffPostingsList>, ExportError> {
        let expected = i64::from(self.header.num_postings_lists);
        if self.lists_read >= expected {
            return Ok(None);
        }
        let bytes = self.next_record("postings lists", expected, self.lists_read)?;
        self.lists_read += 1;
        Ok(Some(CiffPostingsList::decode(&bytes)?))
    }

    pub fn next_doc_record(&mut self) -> Result<Option<CiffDocRecord>, ExportError> {
        while self.next_postings_list()?.is_some() {}
        let expected = i64::from(self.header.num_docs);
        if self.docs_read >= expected {
            return Ok(None);
        }
        let bytes = self.next_record("doc records", expected, self.docs_read)?;
        self.docs_read += 1;
        Ok(Some(CiffDocRecord::decode(&bytes)?))
    }

    pub fn postings_lists(&mut self) -> impl Iterator<Item = Result<CiffPostingsList, ExportError>> + '_ {
        std::iter::from_fn(move || self.next_postings_list().transpose())
    }

    pub fn doc_records(&mut self) -> impl Iterator<Item = Result<CiffDocRecord, ExportError>> + '_ {
        std::iter::from_fn(move || self.next_doc_record().transpose())
    }

    /// Drains anything left and requires the stream to end exactly after
    /// the last declared doc record.
    pub fn finish(mut self) -> Result<(), ExportError> {
        while self.next_doc_record()?.is_some() {}
        if self.stream.at_end()? {
            Ok(())
        } else {
            Err(ExportError::TrailingBytes)
        }
    }
}

pub fn read_export<R: Read>(source: R) -> Result<CiffExport, ExportError> {
    let mut reader = ExportReader::new(source)?;
    let postings_lists = reader.postings_lists().collect::<Result<Vec<_>, _>>()?;
    let doc_records = reader.doc_records().collect::<Result<Vec<_>, _>>()?;
    let header = reader.header().clone();
    reader.finish()?;
    Ok(CiffExport { header, postings_lists, doc_records })
}

fn violation(msg: impl Into<String>) -> ExportError {
    ExportError::InvariantViolation(msg.into())
}

/// Writes an export in canonical form, refusing anything that breaks the
/// export invariants. Call [`ExportWriter::finish`] to check the declared
/// counts were met.
pub struct ExportWriter<W: Write> {
    sink: W,
    header: CiffHeader,
    lists_written: i64,
    docs_written: i64,
    last_term: Option<String>,
    last_docid: Option<i32>,
    max_referenced: Option<i32>,
    // only needed when doc records are partial (not contiguous from 0)
    unmatched: Option<HashSet<i32>>,
}

impl<W: Write> ExportWriter<W> {
    pub fn new(mut sink: W, header: CiffHeader) -> Result<Self, ExportError> {
        let h = &header;
        if h.version != CIFF_VERSION {
            return Err(violation(format!("header.version must be 1, got {}", h.version)));
        }
        if h.num_postings_lists < 0 || h.num_postings_lists > h.total_postings_lists {
            return Err(violation("0 <= num_postings_lists <= total_postings_lists"));
        }
        if h.num_docs < 0 || h.num_docs > h.total_docs {
            return Err(violation("0 <= num_docs <= total_docs"));
        }
        if h.total_terms_in_collection < 0 {
            return Err(violation("total_terms_in_collection >= 0"));
        }
        if h.average_doclength.is_nan() || h.average_doclength < 0.0 || !average_doclength_matches(h) {
            return Err(violation("average_doclength = total_terms_in_collection / total_docs"));
        }
        write_delimited(&h.encode()?, &mut sink)?;
        let partial_docs = h.num_docs != h.total_docs;
        Ok(Self {
            sink,
            header,
            lists_written: 0,
            docs_written: 0,
            last_term: None,
            last_docid: None,
            max_referenced: None,
            unmatched: partial_docs.then(HashSet::new),
        })
    }

    pub fn write_postings_list(&mut self, list: &CiffPostingsList) -> Result<(), ExportError> {
        if self.lists_written >= i64::from(self.header.num_postings_lists) {
            return Err(violation("more postings lists than header.num_postings_lists"));
        }
        let term = &list.term;
        if list.df != list.postings.len() as i64 {
            return Err(violation(format!(
                "term {term:?}: df {} != number of postings {}",
                list.df,
                list.postings.len()
            )));
        }
        let mut cf = 0i64;
        let mut previous: Option<i32> = None;
        for p in &list.postings {
            if p.tf < 1 {
                return Err(violation(format!("term {term:?}: docid {} has tf {} < 1", p.docid, p.tf)));
            }
            if p.docid < 0 || previous.is_some_and(|prev| p.docid <= prev) {
                return Err(violation(format!(
                    "term {term:?}: docids not strictly increasing at {}",
                    p.docid
                )));
            }
            previous = Some(p.docid);
            cf += i64::from(p.tf);
        }
        if cf != list.cf {
            return Err(violation(format!("term {term:?}: cf {} != sum of tf {cf}", list.cf)));
        }
        if let Some(last) = &self.last_term {
            if last.as_bytes() >= term.as_bytes() {
                return Err(violation(format!("terms not strictly increasing: {last:?} then {term:?}")));
            }
        }
        write_delimited(&list.encode()?, &mut self.sink)?;
        if let Some(max) = previous {
            self.max_referenced = Some(self.max_referenced.map_or(max, |m| m.max(max)));
        }
        if let Some(set) = &mut self.unmatched {
            set.extend(list.postings.iter().map(|p| p.docid));
        }
        self.last_term = Some(term.clone());
        self.lists_written += 1;
        Ok(())
    }

    pub fn write_doc_record(&mut self, doc: &CiffDocRecord) -> Result<(), ExportError> {
        if self.lists_written != i64::from(self.header.num_postings_lists) {
            return Err(violation("doc record written before all postings lists"));
        }
        if self.docs_written >= i64::from(self.header.num_docs) {
            return Err(violation("more doc records than header.num_docs"));
        }
        if doc.docid < 0 || self.last_docid.is_some_and(|prev| doc.docid <= prev) {
            return Err(violation(format!("doc records not sorted by docid at {}", doc.docid)));
        }
        if self.unmatched.is_none() && i64::from(doc.docid) != self.docs_written {
            return Err(violation(format!(
                "full export doc records must be contiguous from 0, got docid {} at position {}",
                doc.docid, self.docs_written
            )));
        }
        if doc.collection_docid.is_empty() {
            return Err(violation(format!("docid {} has empty collection_docid", doc.docid)));
        }
        if doc.doclength < 0 {
            return Err(violation(format!("docid {} has negative doclength", doc.docid)));
        }
        write_delimited(&doc.encode()?, &mut self.sink)?;
        if let Some(set) = &mut self.unmatched {
            set.remove(&doc.docid);
        }
        self.last_docid = Some(doc.docid);
        self.docs_written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, ExportError> {
        if self.lists_written != i64::from(self.header.num_postings_lists) {
            return Err(violation(format!(
                "wrote {} postings lists, header declares {}",
                self.lists_written, self.header.num_postings_lists
            )));
        }
        if self.docs_written != i64::from(self.header.num_docs) {
            return Err(violation(format!(
                "wrote {} doc records, header declares {}",
                self.docs_written, self.header.num_docs
            )));
        }
        let uncovered = match &self.unmatched {
            Some(set) => set.iter().min().copied(),
            None => self.max_referenced.filter(|&m| i64::from(m) >= self.docs_written),
        };
        if let Some(docid) = uncovered {
            return Err(violation(format!("posting references docid {docid} with no doc record")));
        }
        self.sink.flush()?;
        Ok(self.sink)
    }
}

pub fn write_export<W: Write>(export: &CiffExport, sink: W) -> Result<W, ExportError> {
    if export.postings_lists.len() as i64 != i64::from(export.header.num_postings_lists) {
        return Err(violation("postings_lists length != header.num_postings_lists"));
    }
    if export.doc_records.len() as i64 != i64::from(export.header.num_docs) {
        return Err(violation("doc_records length != header.num_docs"));
    }
    let mut writer = ExportWriter::new(sink, export.header.clone())?;
    for list in &export.postings_lists {
        writer.write_postings_list(list)?;
    }
    for doc in &export.doc_records {
        writer.write_doc_record(doc)?;
    }
    writer.finish()
}

/// Streams `lists` and `docs` behind `header` through an [`ExportWriter`].
pub fn write_streaming<W, L, D>(sink: W, header: CiffHeader, lists: L, docs: D) -> Result<W, ExportError>
where
    W: Write,
    L: IntoIterator<Item = CiffPostingsList>,
    D: IntoIterator<Item = CiffDocRecord>,
{
    let mut writer = ExportWriter::new(sink, header)?;
    for list in lists {
        writer.write_postings_list(&list)?;
    }
    for doc in docs {
        writer.write_doc_record(&doc)?;
    }
    writer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CiffPosting;
    use std::io::Cursor;

    fn tiny() -> CiffExport {
        let lists = vec![
            CiffPostingsList::from_postings("a", vec![CiffPosting { docid: 0, tf: 2 }]),
            CiffPostingsList::from_postings(
                "b",
                vec![CiffPosting { docid: 0, tf: 1 }, CiffPosting { docid: 1, tf: 1 }],
            ),
        ];
        let docs = vec![
            CiffDocRecord { docid: 0, collection_docid: "x".into(), doclength: 3 },
            CiffDocRecord { docid: 1, collection_docid: "y".into(), doclength: 1 },
        ];
        CiffExport {
            header: CiffHeader {
                version: 1,
                num_postings_lists: 2,
                num_docs: 2,
                total_postings_lists: 2,
                total_docs: 2,
                total_terms_in_collection: 4,
                average_doclength: 2.0,
                description: "tiny".into(),
            },
            postings_lists: lists,
            doc_records: docs,
        }
    }

    #[test]
    fn round_trip() {
        let e = tiny();
        let bytes = write_export(&e, Vec::new()).unwrap();
        assert_eq!(read_export(Cursor::new(&bytes)).unwrap(), e);
        let again = write_export(&read_export(Cursor::new(&bytes)).unwrap(), Vec::new()).unwrap();
        assert_eq!(again, bytes);
    }

    #[test]
    fn df_mismatch_is_refused() {
        let mut e = tiny();
        e.postings_lists[1].df = 3;
        let err = write_export(&e, Vec::new()).unwrap_err();
        assert!(err.to_string().contains("df 3"), "{err}");
    }

    #[test]
    fn writer_checks() {
        let mut e = tiny();
        e.postings_lists.swap(0, 1);
        assert!(write_export(&e, Vec::new()).unwrap_err().to_string().contains("terms not strictly"));

        let mut e = tiny();
        e.doc_records[1].docid = 5;
        assert!(write_export(&e, Vec::new()).unwrap_err().to_string().contains("contiguous"));

        let mut e = tiny();
        e.header.average_doclength = 2.5;
        assert!(write_export(&e, Vec::new()).is_err());

        let mut e = tiny();
        e.postings_lists[0].postings[0].tf = 0;
        e.postings_lists[0].cf = 0;
        assert!(write_export(&e, Vec::new()).unwrap_err().to_string().contains("tf 0"));

        // partial doc records must still cover every referenced docid
        let mut e = tiny();
        e.header.total_docs = 3;
        e.header.total_terms_in_collection = 6;
        e.header.num_docs = 1;
        e.doc_records.truncate(1);
        let err = write_export(&e, Vec::new()).unwrap_err();
        assert!(err.to_string().contains("docid 1 with no doc record"), "{err}");
    }

    #[test]
    fn reader_errors() {
        let bytes = write_export(&tiny(), Vec::new()).unwrap();
        let header_len = 1 + bytes[0] as usize;
        let cut = &bytes[..header_len];
        let err = read_export(Cursor::new(cut)).unwrap_err();
        assert!(matches!(err, ExportError::CountMismatch { what: "postings lists", expected: 2, found: 0 }));

        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(matches!(read_export(Cursor::new(&trailing)), Err(ExportError::TrailingBytes)));

        assert!(matches!(read_export(Cursor::new(&[][..])), Err(ExportError::MissingHeader)));

        let mut h = tiny().header;
        h.version = 2;
        let mut v2 = Vec::new();
        write_delimited(&h.encode().unwrap(), &mut v2).unwrap();
        assert!(matches!(read_export(Cursor::new(&v2)), Err(ExportError::UnsupportedVersion(2))));
    }

    #[test]
    fn doc_records_skip_unread_lists() {
        let bytes = write_export(&tiny(), Vec::new()).unwrap();
        let mut reader = ExportReader::new(Cursor::new(&bytes)).unwrap();
        let docs: Vec<_> = reader.doc_records().map(Result::unwrap).collect();
        assert_eq!(docs.len(), 2);
        reader.finish().unwrap();
    }

    #[test]
    fn empty_collection() {
        let e = CiffExport { header: CiffHeader { version: 1, ..Default::default() }, ..Default::default() };
        let bytes = write_export(&e, Vec::new()).unwrap();
        // header holds only version = 1
        assert_eq!(bytes, vec![2, 0x08, 0x01]);
        assert_eq!(read_export(Cursor::new(&bytes)).unwrap(), e);
    }
}
