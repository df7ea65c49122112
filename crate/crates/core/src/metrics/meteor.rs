//! METEOR with staged unigram alignment.
//!
//! Candidate words are aligned to reference words in three stages: exact
//! match, Porter-stem match, then synonym match when a table is supplied.
//! Each stage only sees words left unaligned by earlier stages and matches
//! every candidate word, left to right, to the first free reference word it
//! agrees with.
//!
//! With `m` aligned words, `P = m/|cand|`, `R = m/|ref|`,
//! `Fmean = P·R / (α·P + (1−α)·R)` and `penalty = γ·(chunks/m)^β`, where a
//! chunk is a maximal run of aligned words adjacent and in the same order on
//! both sides. The pair score is `Fmean·(1 − penalty)` against the best
//! reference, and the corpus score is the mean over pairs.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use super::{check_corpus, EvalPair, MetricError};
use crate::text::porter_stem;
use crate::{Error, Result};

/// Symmetric word → synonyms relation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynonymTable {
    sets: HashMap<String, HashSet<String>>,
}

impl SynonymTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, a: &str, b: &str) {
        self.sets.entry(a.to_string()).or_default().insert(b.to_string());
        self.sets.entry(b.to_string()).or_default().insert(a.to_string());
    }

    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        self.sets.get(a).is_some_and(|s| s.contains(b))
    }

    /// One `word syn1 syn2 ...` line per entry; blank and `#` lines skipped.
    pub fn parse(reader: impl BufRead) -> std::io::Result<Self> {
        let mut table = Self::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut words = line.split_whitespace().map(str::to_lowercase);
            let head = words.next().expect("non-empty line");
            for syn in words {
                table.add(&head, &syn);
            }
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file)).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeteorParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub synonyms: Option<SynonymTable>,
}

impl Default for MeteorParams {
    /// `Fmean = 10PR/(R+9P)`, `penalty = 0.5·(chunks/m)^3`.
    fn default() -> Self {
        Self {
            alpha: 0.9,
            beta: 3.0,
            gamma: 0.5,
            synonyms: None,
        }
    }
}

pub fn meteor(pairs: &[EvalPair]) -> Result<f64, MetricError> {
    meteor_with(pairs, &MeteorParams::default())
}

pub fn meteor_with(pairs: &[EvalPair], params: &MeteorParams) -> Result<f64, MetricError> {
    check_corpus(pairs)?;
    let total: f64 = pairs.iter().map(|p| meteor_pair(p, params)).sum();
    Ok(total / pairs.len() as f64)
}

/// Best score of the candidate against any single reference.
pub fn meteor_pair(pair: &EvalPair, params: &MeteorParams) -> f64 {
    pair.references
        .iter()
        .map(|r| score_against(&pair.candidate, r, params))
        .fold(0.0, f64::max)
}

fn score_against(cand: &[String], reference: &[String], params: &MeteorParams) -> f64 {
    let alignment = align(cand, reference, params.synonyms.as_ref());
    let m = alignment.len();
    if m == 0 {
        return 0.0;
    }
    let precision = m as f64 / cand.len() as f64;
    let recall = m as f64 / reference.len() as f64;
    let fmean = precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);
    let penalty = params.gamma * (count_chunks(&alignment) as f64 / m as f64).powf(params.beta);
    fmean * (1.0 - penalty)
}

/// Aligned `(candidate index, reference index)` pairs sorted by candidate
/// index.
fn align(cand: &[String], reference: &[String], synonyms: Option<&SynonymTable>) -> Vec<(usize, usize)> {
    let cand_stems: Vec<String> = cand.iter().map(|w| porter_stem(w)).collect();
    let ref_stems: Vec<String> = reference.iter().map(|w| porter_stem(w)).collect();

    let mut cand_used = vec![false; cand.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut pairs = Vec::new();

    let mut stage = |matches: &dyn Fn(usize, usize) -> bool| {
        for (i, used) in cand_used.iter_mut().enumerate() {
            if *used {
                continue;
            }
            if let Some(j) = (0..reference.len()).find(|&j| !ref_used[j] && matches(i, j)) {
                *used = true;
                ref_used[j] = true;
                pairs.push((i, j));
            }
        }
    };
    stage(&|i, j| cand[i] == reference[j]);
    stage(&|i, j| cand_stems[i] == ref_stems[j]);
    if let Some(table) = synonyms {
        stage(&|i, j| table.are_synonyms(&cand[i], &reference[j]));
    }
    pairs.sort_unstable();
    pairs
}

fn count_chunks(alignment: &[(usize, usize)]) -> usize {
    if alignment.is_empty() {
        return 0;
    }
    1 + alignment
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}
