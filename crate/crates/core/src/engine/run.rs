//! Topic files in, TREC run files out.

use std::io::{BufRead, Write};

use super::native::NativeIndex;
use super::search::ScoredDoc;
use super::EngineError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub qid: String,
    pub query: String,
}

/// Parses `qid<TAB>query text` lines, skipping blank ones.
pub fn parse_topics<R: BufRead>(source: R) -> Result<Vec<Topic>, EngineError> {
    let mut topics = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        match line.split_once('\t') {
            Some((qid, query)) if !qid.trim().is_empty() => {
                topics.push(Topic { qid: qid.trim().to_string(), query: query.to_string() })
            }
            _ => {
                return Err(EngineError::MalformedLine {
                    line: i + 1,
                    message: "expected qid<TAB>query text".into(),
                })
            }
        }
    }
    Ok(topics)
}

/// Writes `qid Q0 collection_docid rank score tag` lines, topics in the
/// order given, ranks from 1, scores to six decimals.
pub fn write_run<W: Write>(
    results: &[(String, Vec<ScoredDoc>)],
    index: &NativeIndex,
    tag: &str,
    sink: &mut W,
) -> Result<(), EngineError> {
    for (qid, hits) in results {
        write_topic_run(qid, hits, index, tag, sink)?;
    }
    Ok(())
}

pub fn write_topic_run<W: Write>(
    qid: &str,
    hits: &[ScoredDoc],
    index: &NativeIndex,
    tag: &str,
    sink: &mut W,
) -> Result<(), EngineError> {
    for (rank, hit) in hits.iter().enumerate() {
        let docid = index.collection_docid(hit.docid).ok_or(EngineError::UnknownDocid(hit.docid))?;
        writeln!(sink, "{qid} Q0 {docid} {} {:.6} {tag}", rank + 1, hit.score)?;
    }
    Ok(())
}
