//! Text analysis: tokenization, case folding, stopword removal, stemming.
//!
//! The pipeline is explicit configuration that travels with every index so
//! queries are always analyzed exactly as the documents were.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::porter::porter_stem;

/// Tokens longer than this many code points are truncated.
pub const MAX_TOKEN_CHARS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StemmerKind {
    #[default]
    None,
    Porter,
}

impl fmt::Display for StemmerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StemmerKind::None => "none",
            StemmerKind::Porter => "porter",
        })
    }
}

impl FromStr for StemmerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(StemmerKind::None),
            "porter" => Ok(StemmerKind::Porter),
            other => Err(format!("unknown stemmer {other:?} (expected none or porter)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub lowercase: bool,
    pub stemmer: StemmerKind,
    /// Compared against tokens after case folding, before stemming.
    pub stopwords: BTreeSet<String>,
    pub max_token_chars: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            stemmer: StemmerKind::None,
            stopwords: BTreeSet::new(),
            max_token_chars: MAX_TOKEN_CHARS,
        }
    }
}

impl AnalysisConfig {
    pub fn with_stemmer(mut self, stemmer: StemmerKind) -> Self {
        self.stemmer = stemmer;
        self
    }

    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.stopwords = words
            .into_iter()
            .map(|w| {
                let w = w.as_ref().trim();
                if self.lowercase {
                    w.to_lowercase()
                } else {
                    w.to_string()
                }
            })
            .filter(|w| !w.is_empty())
            .collect();
        self
    }

    /// One-line description of the pipeline, recorded in export headers.
    pub fn describe(&self) -> String {
        format!(
            "tokens=split-non-alphanumeric lowercase={} stopwords={} stemmer={} max_token_chars={}",
            self.lowercase,
            self.stopwords.len(),
            self.stemmer,
            self.max_token_chars
        )
    }
}

/// Runs the full pipeline over `text`, preserving token order.
pub fn analyze(text: &str, config: &AnalysisConfig) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split(|c: char| !c.is_alphanumeric()) {
        if raw.is_empty() {
            continue;
        }
        let mut token = if config.lowercase { raw.to_lowercase() } else { raw.to_string() };
        if let Some((cut, _)) = token.char_indices().nth(config.max_token_chars) {
            token.truncate(cut);
        }
        if config.stopwords.contains(&token) {
            continue;
        }
        if config.stemmer == StemmerKind::Porter {
            token = porter_stem(&token);
        }
        out.push(token);
    }
    out
}
