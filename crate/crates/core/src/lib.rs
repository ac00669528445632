//! Reading, writing, validating and searching CIFF inverted-index exports.

pub mod analysis;
pub mod codec;
pub mod engine;
pub mod eval;
pub mod export;
pub mod indexer;
pub mod model;
pub mod porter;
pub mod stats;
pub mod stream;
pub mod validate;

pub use analysis::{analyze, AnalysisConfig, StemmerKind};
pub use engine::{import_ciff, search, Bm25Params, Bm25Variant, EngineError, NativeIndex, ScoredDoc};
pub use eval::{evaluate_run, parse_qrels, parse_run, EvalError, Metric, MetricReport, Qrels, Run};
pub use export::{read_export, write_export, ExportError, ExportReader, ExportWriter};
pub use indexer::{build_index, CorpusDocument, InMemoryIndex, IndexBuilder, IndexError};
pub use model::{CiffDocRecord, CiffExport, CiffHeader, CiffPosting, CiffPostingsList};
pub use stats::{compute_stats, StatsSummary};
pub use validate::{validate, Finding, Severity, ValidationReport};
