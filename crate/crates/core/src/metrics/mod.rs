//! Automatic caption evaluation: BLEU-1..4, CIDEr, METEOR and ROUGE-L, plus
//! the seven-score summary.
//!
//! All metrics take a corpus of [`EvalPair`]s whose tokens are already
//! canonical (see [`crate::text::tokenize`]).

mod bleu;
mod cider;
mod meteor;
mod rouge;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bleu::{bleu, bleu_n, bleu_sentence_avg, modified_precision, BleuMode};
pub use cider::{cider, cider_with, CiderParams};
pub use meteor::{meteor, meteor_pair, meteor_with, MeteorParams, SynonymTable};
pub use rouge::{lcs_len, rouge_l, rouge_l_pair, ROUGE_BETA};

use crate::text;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("score undefined on an empty corpus")]
    EmptyCorpus,
    #[error("pair {0} has no reference sentences")]
    NoReferences(usize),
    #[error("BLEU order must be 1..=4, got {0}")]
    BadOrder(usize),
}

/// A candidate sentence with its references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl EvalPair {
    pub fn new(candidate: Vec<String>, references: Vec<Vec<String>>) -> Self {
        Self { candidate, references }
    }

    /// Tokenizes raw text.
    pub fn from_text<S: AsRef<str>>(candidate: &str, references: &[S]) -> Self {
        Self {
            candidate: text::tokenize(candidate),
            references: references.iter().map(|r| text::tokenize(r.as_ref())).collect(),
        }
    }
}

pub(crate) fn check_corpus(pairs: &[EvalPair]) -> Result<(), MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    match pairs.iter().position(|p| p.references.is_empty()) {
        Some(i) => Err(MetricError::NoReferences(i)),
        None => Ok(()),
    }
}

pub(crate) type NgramCounts<'a> = HashMap<&'a [String], usize>;

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> NgramCounts<'_> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// The seven scores and their mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub cider: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub mean: f64,
}

impl EvalReport {
    pub const COLUMNS: [&'static str; 8] = [
        "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "CIDEr", "METEOR", "ROUGE-L", "Mean",
    ];

    /// Builds a report from the seven scores in column order.
    pub fn from_scores(scores: [f64; 7]) -> Self {
        let mean = scores.iter().sum::<f64>() / 7.0;
        let [bleu1, bleu2, bleu3, bleu4, cider, meteor, rouge_l] = scores;
        Self {
            bleu1,
            bleu2,
            bleu3,
            bleu4,
            cider,
            meteor,
            rouge_l,
            mean,
        }
    }

    pub fn scores(&self) -> [f64; 7] {
        [
            self.bleu1,
            self.bleu2,
            self.bleu3,
            self.bleu4,
            self.cider,
            self.meteor,
            self.rouge_l,
        ]
    }

    /// Tab-separated header line matching [`EvalReport::table_row`].
    pub fn table_header() -> String {
        std::iter::once("Run")
            .chain(Self::COLUMNS)
            .collect::<Vec<_>>()
            .join("\t")
    }

    /// One table row, scores to three decimals.
    pub fn table_row(&self, label: &str) -> String {
        let mut row = vec![label.to_string()];
        row.extend(self.scores().iter().chain([&self.mean]).map(|s| format!("{s:.3}")));
        row.join("\t")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, value) in Self::COLUMNS.iter().zip(self.scores().iter().chain([&self.mean])) {
            writeln!(f, "{name:<8} {value:.3}")?;
        }
        Ok(())
    }
}

/// Corpus BLEU-1..4, CIDEr, METEOR (no synonym table), ROUGE-L and mean.
pub fn summarize(pairs: &[EvalPair]) -> Result<EvalReport, MetricError> {
    summarize_with(pairs, BleuMode::Corpus, &MeteorParams::default())
}

pub fn summarize_with(
    pairs: &[EvalPair],
    bleu_mode: BleuMode,
    meteor_params: &MeteorParams,
) -> Result<EvalReport, MetricError> {
    check_corpus(pairs)?;
    let b = bleu(pairs, bleu_mode)?;
    Ok(EvalReport::from_scores([
        b[0],
        b[1],
        b[2],
        b[3],
        cider(pairs)?,
        meteor_with(pairs, meteor_params)?,
        rouge_l(pairs)?,
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_score_rows() {
        let first = EvalReport::from_scores([0.669, 0.472, 0.324, 0.218, 0.257, 0.209, 0.462]);
        assert!((first.mean - 0.373).abs() <= 0.0005);
        let second = EvalReport::from_scores([0.561, 0.354, 0.206, 0.118, 0.143, 0.149, 0.374]);
        assert!((second.mean - 0.272).abs() <= 0.0005);
        assert_eq!(EvalReport::from_scores([0.0; 7]).mean, 0.0);
    }

    #[test]
    fn table_row_format() {
        let r = EvalReport::from_scores([0.669, 0.472, 0.324, 0.218, 0.257, 0.209, 0.462]);
        assert_eq!(
            r.table_row("demo"),
            "demo\t0.669\t0.472\t0.324\t0.218\t0.257\t0.209\t0.462\t0.373"
        );
        assert!(EvalReport::table_header().starts_with("Run\tBLEU-1"));
    }

    #[test]
    fn empty_corpus_and_missing_references() {
        assert_eq!(summarize(&[]).unwrap_err(), MetricError::EmptyCorpus);
        let p = EvalPair::from_text::<&str>("a b", &[]);
        assert_eq!(summarize(&[p]).unwrap_err(), MetricError::NoReferences(0));
    }

    #[test]
    fn perfect_candidate_summary() {
        let pairs = vec![
            EvalPair::from_text("a man is sitting at a table", &["a man is sitting at a table"]),
            EvalPair::from_text("i am typing on my laptop", &["i am typing on my laptop"]),
        ];
        let r = summarize(&pairs).unwrap();
        for b in [r.bleu1, r.bleu2, r.bleu3, r.bleu4, r.rouge_l] {
            assert_eq!(b, 1.0);
        }
        assert!(r.meteor > 0.99);
        assert!(r.cider > 0.0);
    }
}
