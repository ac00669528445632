use std::fmt;
use std::str::FromStr;

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bm25Variant {
    /// idf = ln(1 + (N - df + 0.5) / (df + 0.5)), tf part tf / (tf + K)
    #[default]
    Lucene,
    /// idf = ln(N / df), tf part tf (k1 + 1) / (tf + K)
    Atire,
}

impl fmt::Display for Bm25Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bm25Variant::Lucene => "lucene",
            Bm25Variant::Atire => "atire",
        })
    }
}

impl FromStr for Bm25Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lucene" => Ok(Bm25Variant::Lucene),
            "atire" => Ok(Bm25Variant::Atire),
            other => Err(format!("unknown BM25 variant {other:?} (expected lucene or atire)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub variant: Bm25Variant,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4, variant: Bm25Variant::Lucene }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64, variant: Bm25Variant) -> Result<Self, EngineError> {
        if !k1.is_finite() || k1 < 0.0 {
            return Err(EngineError::Domain(format!("k1 must be >= 0, got {k1}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(EngineError::Domain(format!("b must be in [0, 1], got {b}")));
        }
        Ok(Self { k1, b, variant })
    }

    pub(crate) fn idf(&self, df: u32, total_docs: u32) -> f64 {
        let (n, df) = (f64::from(total_docs), f64::from(df));
        match self.variant {
            Bm25Variant::Lucene => (1.0 + (n - df + 0.5) / (df + 0.5)).ln(),
            Bm25Variant::Atire => (n / df).ln(),
        }
    }

    pub(crate) fn tf_part(&self, tf: u32, doclength: u32, average_doclength: f64) -> f64 {
        let tf = f64::from(tf);
        let norm = self.k1 * ((1.0 - self.b) + self.b * f64::from(doclength) / average_doclength);
        match self.variant {
            Bm25Variant::Lucene => tf / (tf + norm),
            Bm25Variant::Atire => tf * (self.k1 + 1.0) / (tf + norm),
        }
    }
}

/// Collection statistics a BM25 weight depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringStats {
    pub total_docs: u32,
    pub average_doclength: f64,
}

/// Contribution of one term to one document's score.
pub fn bm25_weight(
    tf: u32,
    df: u32,
    doclength: u32,
    stats: ScoringStats,
    params: &Bm25Params,
) -> Result<f64, EngineError> {
    if tf < 1 {
        return Err(EngineError::Domain(format!("tf must be >= 1, got {tf}")));
    }
    if df < 1 || df > stats.total_docs {
        return Err(EngineError::Domain(format!("df must be in [1, {}], got {df}", stats.total_docs)));
    }
    if stats.average_doclength.is_nan() || stats.average_doclength <= 0.0 {
        return Err(EngineError::Domain(format!(
            "average doclength must be > 0, got {}",
            stats.average_doclength
        )));
    }
    Ok(params.idf(df, stats.total_docs) * params.tf_part(tf, doclength, stats.average_doclength))
}
