//! Relevance judgments, run files and effectiveness metrics.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{self, BufRead};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("qrels line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("run line {line}: {message}")]
    MalformedRun { line: usize, message: String },
    #[error("grade {grade} exceeds gmax {gmax}")]
    GradeExceedsGmax { grade: u32, gmax: u32 },
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// Judgments for one topic: collection docid to grade.
pub type Judgments = BTreeMap<String, u32>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    topics: BTreeMap<String, Judgments>,
}

impl Qrels {
    pub fn topic(&self, qid: &str) -> Option<&Judgments> {
        self.topics.get(qid)
    }

    pub fn topics(&self) -> impl Iterator<Item = (&String, &Judgments)> {
        self.topics.iter()
    }

    /// Absent pairs are grade 0.
    pub fn grade(&self, qid: &str, docid: &str) -> u32 {
        self.topics.get(qid).and_then(|j| j.get(docid)).copied().unwrap_or(0)
    }

    pub fn max_grade(&self) -> u32 {
        self.topics.values().flat_map(|j| j.values()).copied().max().unwrap_or(0)
    }

    pub fn insert(&mut self, qid: impl Into<String>, docid: impl Into<String>, grade: u32) -> Option<u32> {
        self.topics.entry(qid.into()).or_default().insert(docid.into(), grade)
    }
}

/// Parsed value plus non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

/// Parses TREC qrels: `qid 0 docid grade`. Negative grades are clamped to
/// 0; for duplicate pairs the last line wins. Both produce warnings.
pub fn parse_qrels<R: BufRead>(source: R) -> Result<Parsed<Qrels>, EvalError> {
    let mut qrels = Qrels::default();
    let mut warnings = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let malformed = |message: &str| EvalError::MalformedLine { line: i + 1, message: message.into() };
        if fields.len() != 4 {
            return Err(malformed("expected 4 fields: qid iteration docid grade"));
        }
        let grade: i64 = fields[3].parse().map_err(|_| malformed("grade is not an integer"))?;
        let grade = if grade < 0 {
            warnings.push(format!("line {}: negative grade {grade} clamped to 0", i + 1));
            0
        } else {
            u32::try_from(grade).map_err(|_| malformed("grade out of range"))?
        };
        if qrels.insert(fields[0], fields[2], grade).is_some() {
            warnings.push(format!(
                "line {}: duplicate judgment for ({}, {}); last one wins",
                i + 1,
                fields[0],
                fields[2]
            ));
        }
    }
    Ok(Parsed { value: qrels, warnings })
}

/// A run: per topic, collection docids in rank order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Run {
    topics: BTreeMap<String, Vec<String>>,
}

impl Run {
    pub fn topic(&self, qid: &str) -> Option<&[String]> {
        self.topics.get(qid).map(Vec::as_slice)
    }

    pub fn topics(&self) -> impl Iterator<Item = (&String, &Vec<String>)> {
        self.topics.iter()
    }

    pub fn insert(&mut self, qid: impl Into<String>, ranking: Vec<String>) {
        self.topics.insert(qid.into(), ranking);
    }
}

/// Parses a six-column TREC run, ordering each topic by the rank column.
pub fn parse_run<R: BufRead>(source: R) -> Result<Run, EvalError> {
    let mut ranked: BTreeMap<String, Vec<(u64, String)>> = BTreeMap::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let malformed = |message: &str| EvalError::MalformedRun { line: i + 1, message: message.into() };
        if fields.len() != 6 {
            return Err(malformed("expected 6 fields: qid Q0 docid rank score tag"));
        }
        let rank: u64 = fields[3].parse().map_err(|_| malformed("rank is not an integer"))?;
        fields[4].parse::<f64>().map_err(|_| malformed("score is not a number"))?;
        ranked.entry(fields[0].to_string()).or_default().push((rank, fields[2].to_string()));
    }
    let topics = ranked
        .into_iter()
        .map(|(qid, mut docs)| {
            docs.sort_by_key(|(rank, _)| *rank);
            (qid, docs.into_iter().map(|(_, d)| d).collect())
        })
        .collect();
    Ok(Run { topics })
}

/// First occurrence of each docid within the cutoff, in rank order.
fn distinct_prefix<S: AsRef<str>>(ranking: &[S], cutoff: usize) -> impl Iterator<Item = &str> {
    let mut seen = HashSet::new();
    ranking.iter().take(cutoff).map(AsRef::as_ref).filter(move |d| seen.insert(*d))
}

fn relevant_count(judged: &Judgments) -> usize {
    judged.values().filter(|&&g| g >= 1).count()
}

/// Average precision over the first `cutoff` results; 0 when the topic has
/// no relevant documents.
pub fn average_precision<S: AsRef<str>>(ranking: &[S], judged: &Judgments, cutoff: usize) -> f64 {
    let relevant = relevant_count(judged);
    if relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, docid) in distinct_prefix(ranking, cutoff).enumerate() {
        if judged.get(docid).is_some_and(|&g| g >= 1) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant as f64
}

/// Relevant results among the first `k`, divided by `k`.
pub fn precision_at_k<S: AsRef<str>>(ranking: &[S], judged: &Judgments, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = distinct_prefix(ranking, k).filter(|d| judged.get(*d).is_some_and(|&g| g >= 1)).count();
    hits as f64 / k as f64
}

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

/// NDCG@k with exponential gain and log2 discount.
pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], judged: &Judgments, k: usize) -> f64 {
    let dcg: f64 = distinct_prefix(ranking, k)
        .enumerate()
        .map(|(i, d)| gain(judged.get(d).copied().unwrap_or(0)) / discount(i + 1))
        .sum();
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal.iter().take(k).enumerate().map(|(i, &g)| gain(g) / discount(i + 1)).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Expected reciprocal rank at `k` with stop probability
/// (2^grade - 1) / 2^gmax.
pub fn err_at_k<S: AsRef<str>>(
    ranking: &[S],
    judged: &Judgments,
    k: usize,
    gmax: u32,
) -> Result<f64, EvalError> {
    if let Some(&grade) = judged.values().find(|&&g| g > gmax) {
        return Err(EvalError::GradeExceedsGmax { grade, gmax });
    }
    let scale = 2f64.powi(gmax as i32);
    let mut not_stopped = 1.0;
    let mut err = 0.0;
    for (i, docid) in distinct_prefix(ranking, k).enumerate() {
        let stop = gain(judged.get(docid).copied().unwrap_or(0)) / scale;
        err += not_stopped * stop / (i + 1) as f64;
        not_stopped *= 1.0 - stop;
    }
    Ok(err)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    AveragePrecision { cutoff: usize },
    Precision { k: usize },
    Ndcg { k: usize },
    Err { k: usize },
}

impl Metric {
    /// AP@1000, P@30, NDCG@10, ERR@10.
    pub fn defaults() -> Vec<Metric> {
        vec![
            Metric::AveragePrecision { cutoff: 1000 },
            Metric::Precision { k: 30 },
            Metric::Ndcg { k: 10 },
            Metric::Err { k: 10 },
        ]
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::AveragePrecision { cutoff } => write!(f, "ap@{cutoff}"),
            Metric::Precision { k } => write!(f, "p@{k}"),
            Metric::Ndcg { k } => write!(f, "ndcg@{k}"),
            Metric::Err { k } => write!(f, "err@{k}"),
        }
    }
}

impl FromStr for Metric {
    type Err = EvalError;

    /// `ap`, `map`, `p`, `ndcg`, `err`, optionally with `@depth`.
    fn from_str(s: &str) -> Result<Self, EvalError> {
        let unknown = || EvalError::UnknownMetric(s.to_string());
        let lower = s.trim().to_ascii_lowercase();
        let (name, depth) = match lower.split_once('@') {
            Some((n, d)) => (n.to_string(), Some(d.parse::<usize>().map_err(|_| unknown())?)),
            None => (lower.clone(), None),
        };
        if depth == Some(0) {
            return Err(unknown());
        }
        Ok(match name.as_str() {
            "ap" | "map" => Metric::AveragePrecision { cutoff: depth.unwrap_or(1000) },
            "p" => Metric::Precision { k: depth.unwrap_or(30) },
            "ndcg" => Metric::Ndcg { k: depth.unwrap_or(10) },
            "err" => Metric::Err { k: depth.unwrap_or(10) },
            _ => return Err(unknown()),
        })
    }
}

pub fn evaluate_topic<S: AsRef<str>>(
    metric: Metric,
    ranking: &[S],
    judged: &Judgments,
    gmax: u32,
) -> Result<f64, EvalError> {
    Ok(match metric {
        Metric::AveragePrecision { cutoff } => average_precision(ranking, judged, cutoff),
        Metric::Precision { k } => precision_at_k(ranking, judged, k),
        Metric::Ndcg { k } => ndcg_at_k(ranking, judged, k),
        Metric::Err { k } => err_at_k(ranking, judged, k, gmax)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub metrics: Vec<Metric>,
    /// Topics with at least one relevant document, with one value per metric.
    pub topics: Vec<(String, Vec<f64>)>,
    pub means: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Numeric qids sort numerically, others by string.
fn qid_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

/// Scores every judged topic. Topics missing from the run score 0; run
/// topics without judgments are skipped with a warning; topics without any
/// relevant document are left out of the report and the means.
pub fn evaluate_run(
    run: &Run,
    qrels: &Qrels,
    metrics: &[Metric],
    gmax: Option<u32>,
) -> Result<MetricReport, EvalError> {
    let gmax = gmax.unwrap_or_else(|| qrels.max_grade());
    let mut warnings = Vec::new();
    for (qid, _) in run.topics() {
        if qrels.topic(qid).is_none() {
            warnings.push(format!("topic {qid} has no judgments; skipped"));
        }
    }
    let mut qids: Vec<&String> = qrels.topics().map(|(q, _)| q).collect();
    qids.sort_by(|a, b| qid_order(a, b));

    let empty: Vec<String> = Vec::new();
    let mut topics = Vec::new();
    for qid in qids {
        let judged = qrels.topic(qid).expect("qid from qrels");
        if relevant_count(judged) == 0 {
            warnings.push(format!("topic {qid} has no relevant documents; excluded"));
            continue;
        }
        let ranking = run.topic(qid).unwrap_or(&empty);
        let values = metrics
            .iter()
            .map(|&m| evaluate_topic(m, ranking, judged, gmax))
            .collect::<Result<Vec<_>, _>>()?;
        topics.push((qid.clone(), values));
    }
    let means = (0..metrics.len())
        .map(|m| {
            if topics.is_empty() {
                0.0
            } else {
                topics.iter().map(|(_, v)| v[m]).sum::<f64>() / topics.len() as f64
            }
        })
        .collect();
    Ok(MetricReport { metrics: metrics.to_vec(), topics, means, warnings })
}

impl MetricReport {
    pub fn mean(&self, metric: Metric) -> Option<f64> {
        self.metrics.iter().position(|&m| m == metric).map(|i| self.means[i])
    }

    pub fn value(&self, metric: Metric, qid: &str) -> Option<f64> {
        let m = self.metrics.iter().position(|&x| x == metric)?;
        self.topics.iter().find(|(q, _)| q == qid).map(|(_, v)| v[m])
    }

    /// `metric<TAB>qid<TAB>value` lines, then the `all` means.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (m, metric) in self.metrics.iter().enumerate() {
            for (qid, values) in &self.topics {
                out.push_str(&format!("{metric}\t{qid}\t{:.6}\n", values[m]));
            }
            out.push_str(&format!("{metric}\tall\t{:.6}\n", self.means[m]));
        }
        out
    }

    /// Aligned text table, one row per topic plus the means.
    pub fn to_table(&self) -> String {
        let names: Vec<String> = self.metrics.iter().map(ToString::to_string).collect();
        let qid_width = self.topics.iter().map(|(q, _)| q.len()).max().unwrap_or(0).max(5);
        let widths: Vec<usize> = names.iter().map(|n| n.len().max(6)).collect();
        let mut out = format!("{:<qid_width$}", "topic");
        for (n, w) in names.iter().zip(&widths) {
            out.push_str(&format!("  {n:>w$}"));
        }
        out.push('\n');
        let mut row = |label: &str, values: &[f64]| {
            out.push_str(&format!("{label:<qid_width$}"));
            for (v, w) in values.iter().zip(&widths) {
                out.push_str(&format!("  {v:>w$.4}"));
            }
            out.push('\n');
        };
        for (qid, values) in &self.topics {
            row(qid, values);
        }
        row("all", &self.means);
        out
    }
}
