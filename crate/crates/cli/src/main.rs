use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use ciff_kit::engine::{import_ciff_with_max_record_bytes, parse_topics, write_topic_run, Topic, DEFAULT_K};
use ciff_kit::eval::{evaluate_run, parse_qrels, parse_run, Metric};
use ciff_kit::indexer::{read_corpus, read_stopwords, IndexBuilder};
use ciff_kit::stream::{max_record_bytes_from_env, open_export, ExportSink};
use ciff_kit::validate::validate_with_max_record_bytes;
use ciff_kit::{compute_stats, search, AnalysisConfig, Bm25Params, Bm25Variant, NativeIndex, StemmerKind};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;

/// Build, exchange, validate and search CIFF inverted indexes.
#[derive(Parser)]
#[command(name = "ciff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index a `docid<TAB>text` corpus into a native index directory.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Write a native index as a CIFF export (gzip when OUT ends in .gz).
    Export {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Topic file; only postings lists for its analyzed terms are written.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        description: Option<String>,
    },
    /// Read a CIFF export (plain or gzip) into a native index directory.
    Import {
        ciff: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Run BM25 over a topic file and write a TREC run.
    Search {
        #[arg(long)]
        index: PathBuf,
        /// `qid<TAB>query text` lines.
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = Bm25Variant::Lucene)]
        bm25: Bm25Variant,
        #[arg(long, default_value_t = 0.9)]
        k1: f64,
        #[arg(long, default_value_t = 0.4)]
        b: f64,
        /// Run file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "ciff-kit")]
        tag: String,
    },
    /// Check a CIFF export; exits 1 when any ERROR is found.
    Validate { ciff: PathBuf },
    /// Summarize a CIFF export.
    Stats {
        ciff: PathBuf,
        /// Number of highest-df terms to list.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Score a run against TREC qrels.
    Eval {
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        run: PathBuf,
        /// Comma-separated, e.g. `map,p@30,ndcg@10,err@10`.
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<Metric>,
        /// Grade ceiling for ERR; defaults to the largest grade in the qrels.
        #[arg(long)]
        gmax: Option<u32>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
}

#[derive(Args)]
struct AnalysisArgs {
    /// Keep token case.
    #[arg(long)]
    no_lowercase: bool,
    #[arg(long, default_value_t = StemmerKind::None)]
    stemmer: StemmerKind,
    /// One stopword per line.
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

impl AnalysisArgs {
    fn config(&self) -> Result<AnalysisConfig> {
        let mut config =
            AnalysisConfig { lowercase: !self.no_lowercase, ..Default::default() }.with_stemmer(self.stemmer);
        if let Some(path) = &self.stopwords {
            let words =
                read_stopwords(BufReader::new(open(path)?)).with_context(|| format!("{}", path.display()))?;
            config = config.with_stopwords(words);
        }
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Lines,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn load_index(dir: &Path) -> Result<NativeIndex> {
    NativeIndex::load(dir).with_context(|| format!("cannot load index {}", dir.display()))
}

fn load_topics(path: &Path) -> Result<Vec<Topic>> {
    parse_topics(BufReader::new(open(path)?)).with_context(|| format!("{}", path.display()))
}

fn build(corpus: &Path, index_dir: &Path, analysis: &AnalysisArgs) -> Result<()> {
    let mut builder = IndexBuilder::new(analysis.config()?);
    for doc in read_corpus(BufReader::new(open(corpus)?)) {
        builder.add(doc.with_context(|| format!("{}", corpus.display()))?)?;
    }
    let index = NativeIndex::from_index(&builder.finish());
    index.save(index_dir)?;
    info!("indexed {} documents, {} terms", index.num_docs(), index.num_terms());
    Ok(())
}

fn export(index_dir: &Path, out: &Path, queries: Option<&Path>, description: Option<&str>) -> Result<()> {
    let index = load_index(index_dir)?;
    let filter = match queries {
        Some(path) => Some(
            load_topics(path)?
                .iter()
                .flat_map(|t| index.analyze_query(&t.query))
                .collect::<BTreeSet<String>>(),
        ),
        None => None,
    };
    let sink = ExportSink::create(out).with_context(|| format!("cannot create {}", out.display()))?;
    index.write_ciff(filter.as_ref(), description, sink)?.finish()?;
    Ok(())
}

fn import(ciff: &Path, index_dir: &Path, analysis: &AnalysisArgs) -> Result<()> {
    let source = open_export(ciff).with_context(|| format!("cannot open {}", ciff.display()))?;
    let index = import_ciff_with_max_record_bytes(source, analysis.config()?, max_record_bytes_from_env())
        .with_context(|| format!("{}", ciff.display()))?;
    index.save(index_dir)?;
    info!("imported {} documents, {} terms", index.num_docs(), index.num_terms());
    Ok(())
}

fn run_search(
    index_dir: &Path,
    topics: &Path,
    k: usize,
    params: Bm25Params,
    out: Option<&Path>,
    tag: &str,
) -> Result<()> {
    let index = load_index(index_dir)?;
    let topics = load_topics(topics)?;
    let blocks = topics
        .par_iter()
        .map(|topic| {
            let hits = search(&index, &index.analyze_query(&topic.query), k, &params);
            let mut block = Vec::new();
            write_topic_run(&topic.qid, &hits, &index, tag, &mut block)?;
            Ok(block)
        })
        .collect::<Result<Vec<Vec<u8>>>>()?;
    let mut sink: Box<dyn Write> = match out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    for block in blocks {
        sink.write_all(&block)?;
    }
    sink.flush()?;
    Ok(())
}

fn run_validate(ciff: &Path) -> Result<ExitCode> {
    let source = open_export(ciff).with_context(|| format!("cannot open {}", ciff.display()))?;
    let report = validate_with_max_record_bytes(source, max_record_bytes_from_env());
    print!("{report}");
    Ok(if report.has_errors() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn stats(ciff: &Path, top: usize) -> Result<()> {
    let source = open_export(ciff).with_context(|| format!("cannot open {}", ciff.display()))?;
    let summary = compute_stats(source, top).with_context(|| format!("{}", ciff.display()))?;
    if !summary.doclength_matches_header() {
        warn!("sum of doclengths differs from total_terms_in_collection");
    }
    print!("{summary}");
    Ok(())
}

fn eval(qrels: &Path, run: &Path, metrics: &[Metric], gmax: Option<u32>, format: ReportFormat) -> Result<()> {
    let parsed = parse_qrels(BufReader::new(open(qrels)?)).with_context(|| format!("{}", qrels.display()))?;
    for w in &parsed.warnings {
        warn!("{}: {w}", qrels.display());
    }
    let run = parse_run(BufReader::new(open(run)?)).with_context(|| format!("{}", run.display()))?;
    let metrics = if metrics.is_empty() { Metric::defaults() } else { metrics.to_vec() };
    let report = evaluate_run(&run, &parsed.value, &metrics, gmax)?;
    for w in &report.warnings {
        warn!("{w}");
    }
    match format {
        ReportFormat::Table => print!("{}", report.to_table()),
        ReportFormat::Lines => print!("{}", report.to_lines()),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Build { corpus, index, analysis } => build(&corpus, &index, &analysis)?,
        Command::Export { index, out, queries, description } => {
            export(&index, &out, queries.as_deref(), description.as_deref())?
        }
        Command::Import { ciff, index, analysis } => import(&ciff, &index, &analysis)?,
        Command::Search { index, topics, k, bm25, k1, b, out, tag } => {
            let params = Bm25Params::new(k1, b, bm25)
                .unwrap_or_else(|e| Cli::command().error(ErrorKind::ValueValidation, e).exit());
            run_search(&index, &topics, k, params, out.as_deref(), &tag)?
        }
        Command::Validate { ciff } => return run_validate(&ciff),
        Command::Stats { ciff, top } => stats(&ciff, top)?,
        Command::Eval { qrels, run, metrics, gmax, format } => eval(&qrels, &run, &metrics, gmax, format)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
