//! Query-ready index rebuilt from a CIFF export (or directly from an
//! [`InMemoryIndex`]).
//!
//! Documents live in "slots": positions in the doc-record order. Because doc
//! records are sorted by docid, slot order and docid order coincide, so
//! postings stored by slot stay sorted and tie-breaking by slot is
//! tie-breaking by docid.

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::analysis::{analyze, AnalysisConfig};
use crate::codec::{decode_varint, encode_varint_to};
use crate::export::{write_streaming, ExportError, ExportReader};
use crate::indexer::InMemoryIndex;
use crate::model::{CiffDocRecord, CiffHeader, CiffPosting, CiffPostingsList, CIFF_VERSION};
use crate::stream::DEFAULT_MAX_RECORD_BYTES;

const META_FILE: &str = "meta.json";
const DATA_FILE: &str = "postings.bin";
const DATA_MAGIC: &[u8; 4] = b"CKNI";
const FORMAT_VERSION: u32 = 1;

/// Global statistics carried over from the export header. Scoring always
/// uses these, so a filtered export scores exactly like the full one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub total_docs: u32,
    pub total_postings_lists: u32,
    pub total_terms: u64,
    pub average_doclength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TermInfo {
    offset: usize,
    df: u32,
    cf: u64,
}

/// Borrowed view of one term's postings.
#[derive(Debug, Clone, Copy)]
pub struct PostingsView<'a> {
    pub df: u32,
    pub cf: u64,
    pub(crate) slots: &'a [u32],
    pub(crate) tfs: &'a [u32],
}

#[derive(Debug, Clone, PartialEq)]
pub struct NativeIndex {
    terms: Vec<String>,
    lookup: HashMap<String, usize>,
    info: Vec<TermInfo>,
    posting_slots: Vec<u32>,
    posting_tfs: Vec<u32>,
    docids: Vec<u32>,
    collection_docids: Vec<String>,
    doclengths: Vec<u32>,
    stats: IndexStats,
    description: String,
    analysis: AnalysisConfig,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    description: String,
    stats: IndexStats,
    analysis: AnalysisConfig,
}

fn invalid(msg: impl Into<String>) -> EngineError {
    EngineError::InvalidExport(msg.into())
}

// term, cf, (docid or slot, tf) postings
type ImportedList = (String, u64, Vec<(u32, u32)>);

impl NativeIndex {
    fn assemble(
        mut lists: Vec<ImportedList>,
        docs: Vec<(u32, String, u32)>,
        stats: IndexStats,
        description: String,
        analysis: AnalysisConfig,
    ) -> Self {
        lists.sort_by(|a, b| a.0.cmp(&b.0));
        let mut index = NativeIndex {
            terms: Vec::with_capacity(lists.len()),
            lookup: HashMap::with_capacity(lists.len()),
            info: Vec::with_capacity(lists.len()),
            posting_slots: Vec::new(),
            posting_tfs: Vec::new(),
            docids: Vec::with_capacity(docs.len()),
            collection_docids: Vec::with_capacity(docs.len()),
            doclengths: Vec::with_capacity(docs.len()),
            stats,
            description,
            analysis,
        };
        for (docid, collection_docid, doclength) in docs {
            index.docids.push(docid);
            index.collection_docids.push(collection_docid);
            index.doclengths.push(doclength);
        }
        for (term, cf, postings) in lists {
            index.lookup.insert(term.clone(), index.terms.len());
            index.info.push(TermInfo { offset: index.posting_slots.len(), df: postings.len() as u32, cf });
            for (slot, tf) in postings {
                index.posting_slots.push(slot);
                index.posting_tfs.push(tf);
            }
            index.terms.push(term);
        }
        index
    }

    /// Direct conversion, without a CIFF round trip.
    pub fn from_index(index: &InMemoryIndex) -> Self {
        let lists = index.dictionary().iter().map(|(t, e)| (t.clone(), e.cf, e.postings.clone())).collect();
        let docs = index
            .docs()
            .iter()
            .enumerate()
            .map(|(d, doc)| (d as u32, doc.collection_docid.clone(), doc.doclength))
            .collect();
        let stats = IndexStats {
            total_docs: index.num_docs() as u32,
            total_postings_lists: index.dictionary().len() as u32,
            total_terms: index.total_terms(),
            average_doclength: index.average_doclength(),
        };
        Self::assemble(lists, docs, stats, index.config().describe(), index.config().clone())
    }

    pub fn analysis(&self) -> &AnalysisConfig {
        &self.analysis
    }

    pub fn set_analysis(&mut self, analysis: AnalysisConfig) {
        self.analysis = analysis;
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn set_description(&mut self, description: impl Into<String>) {
        self.description = description.into();
    }

    pub fn stats(&self) -> &IndexStats {
        &self.stats
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Number of doc records held (may be fewer than `stats().total_docs`).
    pub fn num_docs(&self) -> usize {
        self.docids.len()
    }

    /// Terms in byte order.
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub(crate) fn view(&self, term: &str) -> Option<PostingsView<'_>> {
        let &t = self.lookup.get(term)?;
        let info = self.info[t];
        let range = info.offset..info.offset + info.df as usize;
        Some(PostingsView {
            df: info.df,
            cf: info.cf,
            slots: &self.posting_slots[range.clone()],
            tfs: &self.posting_tfs[range],
        })
    }

    /// (docid, tf) pairs for `term`, ascending docid.
    pub fn lookup(&self, term: &str) -> Option<Vec<(u32, u32)>> {
        let view = self.view(term)?;
        Some(view.slots.iter().zip(view.tfs).map(|(&s, &tf)| (self.docids[s as usize], tf)).collect())
    }

    pub fn df(&self, term: &str) -> Option<u32> {
        self.view(term).map(|v| v.df)
    }

    pub(crate) fn slot_docid(&self, slot: u32) -> u32 {
        self.docids[slot as usize]
    }

    pub(crate) fn slot_doclength(&self, slot: u32) -> u32 {
        self.doclengths[slot as usize]
    }

    fn slot_of(&self, docid: u32) -> Option<usize> {
        self.docids.binary_search(&docid).ok()
    }

    pub fn collection_docid(&self, docid: u32) -> Option<&str> {
        self.slot_of(docid).map(|s| self.collection_docids[s].as_str())
    }

    pub fn doclength(&self, docid: u32) -> Option<u32> {
        self.slot_of(docid).map(|s| self.doclengths[s])
    }

    /// Analyzes query text with the pipeline the index was built with.
    pub fn analyze_query(&self, text: &str) -> Vec<String> {
        analyze(text, &self.analysis)
    }

    /// Re-exports as CIFF. Header totals are the stored ones, so an imported
    /// filtered export re-exports as the same filtered export.
    pub fn write_ciff<W: Write>(
        &self,
        filter: Option<&BTreeSet<String>>,
        description: Option<&str>,
        sink: W,
    ) -> Result<W, ExportError> {
        let selected = |t: &&String| filter.is_none_or(|f| f.contains(*t));
        let header = CiffHeader {
            version: CIFF_VERSION,
            num_postings_lists: self.terms.iter().filter(selected).count() as i32,
            num_docs: self.docids.len() as i32,
            total_postings_lists: self.stats.total_postings_lists as i32,
            total_docs: self.stats.total_docs as i32,
            total_terms_in_collection: self.stats.total_terms as i64,
            average_doclength: if self.stats.total_docs == 0 {
                0.0
            } else {
                self.stats.total_terms as f64 / f64::from(self.stats.total_docs)
            },
            description: description.unwrap_or(&self.description).to_string(),
        };
        let lists = self.terms.iter().filter(selected).map(|term| {
            let view = self.view(term).expect("term from dictionary");
            CiffPostingsList {
                term: term.clone(),
                df: i64::from(view.df),
                cf: view.cf as i64,
                postings: view
                    .slots
                    .iter()
                    .zip(view.tfs)
                    .map(|(&s, &tf)| CiffPosting { docid: self.slot_docid(s) as i32, tf: tf as i32 })
                    .collect(),
            }
        });
        let docs = (0..self.docids.len()).map(|s| CiffDocRecord {
            docid: self.docids[s] as i32,
            collection_docid: self.collection_docids[s].clone(),
            doclength: self.doclengths[s] as i32,
        });
        write_streaming(sink, header, lists, docs)
    }

    /// Writes the index into `dir` (created if missing).
    pub fn save(&self, dir: &Path) -> Result<(), EngineError> {
        fs::create_dir_all(dir)?;
        let meta = Meta {
            format_version: FORMAT_VERSION,
            description: self.description.clone(),
            stats: self.stats,
            analysis: self.analysis.clone(),
        };
        let json =
            serde_json::to_string_pretty(&meta).map_err(|e| EngineError::CorruptIndex(e.to_string()))?;
        fs::write(dir.join(META_FILE), json + "\n")?;

        let mut buf = Vec::new();
        buf.extend_from_slice(DATA_MAGIC);
        let put = |v: u64, buf: &mut Vec<u8>| encode_varint_to(v, buf);
        let put_str = |s: &str, buf: &mut Vec<u8>| {
            encode_varint_to(s.len() as u64, buf);
            buf.extend_from_slice(s.as_bytes());
        };
        put(self.docids.len() as u64, &mut buf);
        for s in 0..self.docids.len() {
            put(u64::from(self.docids[s]), &mut buf);
            put(u64::from(self.doclengths[s]), &mut buf);
            put_str(&self.collection_docids[s], &mut buf);
        }
        put(self.terms.len() as u64, &mut buf);
        for (t, term) in self.terms.iter().enumerate() {
            let info = self.info[t];
            put_str(term, &mut buf);
            put(u64::from(info.df), &mut buf);
            put(info.cf, &mut buf);
            let range = info.offset..info.offset + info.df as usize;
            let mut previous = 0u32;
            for (&slot, &tf) in self.posting_slots[range.clone()].iter().zip(&self.posting_tfs[range]) {
                put(u64::from(slot - previous), &mut buf);
                put(u64::from(tf), &mut buf);
                previous = slot;
            }
        }
        let mut out = BufWriter::new(File::create(dir.join(DATA_FILE))?);
        out.write_all(&buf)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, EngineError> {
        let meta: Meta = serde_json::from_slice(&fs::read(dir.join(META_FILE))?)
            .map_err(|e| EngineError::CorruptIndex(format!("{META_FILE}: {e}")))?;
        if meta.format_version != FORMAT_VERSION {
            return Err(EngineError::CorruptIndex(format!(
                "unsupported native index format {}",
                meta.format_version
            )));
        }
        let mut data = Vec::new();
        BufReader::new(File::open(dir.join(DATA_FILE))?).read_to_end(&mut data)?;
        let corrupt = || EngineError::CorruptIndex(format!("{DATA_FILE} is truncated or corrupt"));
        if !data.starts_with(DATA_MAGIC) {
            return Err(corrupt());
        }
        let mut pos = DATA_MAGIC.len();
        let get = |pos: &mut usize| -> Result<u64, EngineError> {
            if *pos >= data.len() {
                return Err(corrupt());
            }
            let (v, n) = decode_varint(&data, *pos).map_err(|_| corrupt())?;
            *pos += n;
            Ok(v)
        };
        let get32 = |v: u64| u32::try_from(v).map_err(|_| corrupt());

        let num_docs = get(&mut pos)? as usize;
        let mut docs = Vec::with_capacity(num_docs.min(1 << 20));
        for _ in 0..num_docs {
            let docid = get32(get(&mut pos)?)?;
            let doclength = get32(get(&mut pos)?)?;
            let len = get(&mut pos)? as usize;
            let bytes = data.get(pos..pos.checked_add(len).ok_or_else(corrupt)?).ok_or_else(corrupt)?;
            let id = String::from_utf8(bytes.to_vec()).map_err(|_| corrupt())?;
            pos += len;
            docs.push((docid, id, doclength));
        }
        let num_terms = get(&mut pos)? as usize;
        let mut lists = Vec::with_capacity(num_terms.min(1 << 20));
        for _ in 0..num_terms {
            let len = get(&mut pos)? as usize;
            let bytes = data.get(pos..pos.checked_add(len).ok_or_else(corrupt)?).ok_or_else(corrupt)?;
            let term = String::from_utf8(bytes.to_vec()).map_err(|_| corrupt())?;
            pos += len;
            let df = get(&mut pos)?;
            let cf = get(&mut pos)?;
            let mut postings = Vec::with_capacity((df as usize).min(1 << 20));
            let mut slot = 0u32;
            for _ in 0..df {
                slot = slot.checked_add(get32(get(&mut pos)?)?).ok_or_else(corrupt)?;
                let tf = get32(get(&mut pos)?)?;
                if slot as usize >= num_docs {
                    return Err(corrupt());
                }
                postings.push((slot, tf));
            }
            lists.push((term, cf, postings));
        }
        if pos != data.len() {
            return Err(corrupt());
        }
        Ok(Self::assemble(lists, docs, meta.stats, meta.description, meta.analysis))
    }
}

/// Reads a CIFF export into a native index, checking the structure it
/// relies on as it goes.
pub fn import_ciff<R: std::io::Read>(
    source: R,
    analysis: AnalysisConfig,
) -> Result<NativeIndex, EngineError> {
    import_ciff_with_max_record_bytes(source, analysis, DEFAULT_MAX_RECORD_BYTES)
}

pub fn import_ciff_with_max_record_bytes<R: std::io::Read>(
    source: R,
    analysis: AnalysisConfig,
    cap: u64,
) -> Result<NativeIndex, EngineError> {
    let mut reader = ExportReader::with_max_record_bytes(source, cap)?;
    let header = reader.header().clone();
    let count = |name: &str, v: i64| u32::try_from(v).map_err(|_| invalid(format!("header.{name} = {v}")));
    let stats = IndexStats {
        total_docs: count("total_docs", header.total_docs.into())?,
        total_postings_lists: count("total_postings_lists", header.total_postings_lists.into())?,
        total_terms: u64::try_from(header.total_terms_in_collection)
            .map_err(|_| invalid("negative total_terms_in_collection"))?,
        average_doclength: header.average_doclength,
    };

    let mut lists: Vec<ImportedList> = Vec::new();
    let mut seen_terms = std::collections::HashSet::new();
    for list in reader.postings_lists() {
        let list = list?;
        let term = &list.term;
        if !seen_terms.insert(term.clone()) {
            return Err(invalid(format!("duplicate term {term:?}")));
        }
        if list.df != list.postings.len() as i64 {
            return Err(invalid(format!(
                "term {term:?}: df {} != {} postings",
                list.df,
                list.postings.len()
            )));
        }
        if list.df > i64::from(stats.total_docs) {
            return Err(invalid(format!("term {term:?}: df {} > total_docs {}", list.df, stats.total_docs)));
        }
        let mut postings = Vec::with_capacity(list.postings.len());
        let mut cf = 0u64;
        let mut previous: Option<i32> = None;
        for p in &list.postings {
            if p.tf < 1 {
                return Err(invalid(format!("term {term:?}: docid {} has tf {}", p.docid, p.tf)));
            }
            if p.docid < 0 || previous.is_some_and(|prev| p.docid <= prev) {
                return Err(invalid(format!("term {term:?}: docids not strictly increasing")));
            }
            previous = Some(p.docid);
            cf += p.tf as u64;
            postings.push((p.docid as u32, p.tf as u32));
        }
        if list.cf < 0 || cf != list.cf as u64 {
            return Err(invalid(format!("term {term:?}: cf {} != sum of tf {cf}", list.cf)));
        }
        lists.push((list.term, cf, postings));
    }

    let mut docs: Vec<(u32, String, u32)> = Vec::with_capacity(header.num_docs.max(0) as usize);
    for doc in reader.doc_records() {
        let doc = doc?;
        if doc.docid < 0 || docs.last().is_some_and(|last| doc.docid as u32 <= last.0) {
            return Err(invalid(format!("doc records not sorted by docid at {}", doc.docid)));
        }
        if doc.doclength < 0 {
            return Err(invalid(format!("docid {} has negative doclength", doc.docid)));
        }
        docs.push((doc.docid as u32, doc.collection_docid, doc.doclength as u32));
    }
    reader.finish()?;

    let has_postings = lists.iter().any(|l| !l.2.is_empty());
    if has_postings && (stats.average_doclength.is_nan() || stats.average_doclength <= 0.0) {
        return Err(invalid(format!("average_doclength {} must be positive", stats.average_doclength)));
    }

    // docids -> slots
    for (term, _, postings) in &mut lists {
        for posting in postings.iter_mut() {
            let slot = docs
                .binary_search_by_key(&posting.0, |d| d.0)
                .map_err(|_| EngineError::MissingDocRecord { term: term.clone(), docid: posting.0 })?;
            posting.0 = slot as u32;
        }
    }
    Ok(NativeIndex::assemble(lists, docs, stats, header.description, analysis))
}
