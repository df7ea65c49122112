use serde::{Deserialize, Serialize};

use super::{check_corpus, ngram_counts, EvalPair, MetricError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BleuMode {
    /// Clipped counts and lengths pooled over the corpus.
    #[default]
    Corpus,
    /// Mean of per-pair scores.
    Sentence,
}

/// Per-order clipped matches and totals, plus lengths for the brevity
/// penalty.
#[derive(Debug, Default, Clone, Copy)]
struct Stats {
    matches: [usize; 4],
    totals: [usize; 4],
    cand_len: usize,
    ref_len: usize,
}

impl Stats {
    fn add(&mut self, other: &Stats) {
        for n in 0..4 {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.cand_len += other.cand_len;
        self.ref_len += other.ref_len;
    }

    fn score(&self, order: usize) -> f64 {
        if self.cand_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for n in 0..order {
            if self.matches[n] == 0 {
                return 0.0;
            }
            log_sum += (self.matches[n] as f64 / self.totals[n] as f64).ln();
        }
        let ratio = self.ref_len as f64 / self.cand_len as f64;
        let log_bp = (1.0 - ratio).min(0.0);
        (log_sum / order as f64 + log_bp).exp()
    }
}

fn pair_stats(pair: &EvalPair) -> Stats {
    let cand = &pair.candidate;
    let mut stats = Stats {
        cand_len: cand.len(),
        ..Stats::default()
    };
    // Closest reference length, shorter on ties.
    stats.ref_len = pair
        .references
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(cand.len()), len))
        .unwrap_or(0);
    for n in 1..=4 {
        let counts = ngram_counts(cand, n);
        let ref_counts: Vec<_> = pair.references.iter().map(|r| ngram_counts(r, n)).collect();
        let mut clipped = 0;
        for (gram, &count) in &counts {
            let max_ref = ref_counts
                .iter()
                .filter_map(|rc| rc.get(gram))
                .copied()
                .max()
                .unwrap_or(0);
            clipped += count.min(max_ref);
        }
        stats.matches[n - 1] = clipped;
        stats.totals[n - 1] = cand.len().saturating_sub(n - 1);
    }
    stats
}

/// Clipped `n`-gram matches and candidate `n`-gram total for one pair.
pub fn modified_precision(pair: &EvalPair, n: usize) -> Result<(usize, usize), MetricError> {
    if !(1..=4).contains(&n) {
        return Err(MetricError::BadOrder(n));
    }
    let stats = pair_stats(pair);
    Ok((stats.matches[n - 1], stats.totals[n - 1]))
}

/// BLEU-1 through BLEU-4 in one pass.
pub fn bleu(pairs: &[EvalPair], mode: BleuMode) -> Result<[f64; 4], MetricError> {
    check_corpus(pairs)?;
    let per_pair: Vec<Stats> = pairs.iter().map(pair_stats).collect();
    let mut out = [0.0; 4];
    match mode {
        BleuMode::Corpus => {
            let mut total = Stats::default();
            per_pair.iter().for_each(|s| total.add(s));
            for (n, o) in out.iter_mut().enumerate() {
                *o = total.score(n + 1);
            }
        }
        BleuMode::Sentence => {
            for (n, o) in out.iter_mut().enumerate() {
                *o = per_pair.iter().map(|s| s.score(n + 1)).sum::<f64>() / pairs.len() as f64;
            }
        }
    }
    Ok(out)
}

/// Corpus-level BLEU-`order`: geometric mean of the clipped 1..=`order`-gram
/// precisions times the brevity penalty.
pub fn bleu_n(pairs: &[EvalPair], order: usize) -> Result<f64, MetricError> {
    if !(1..=4).contains(&order) {
        return Err(MetricError::BadOrder(order));
    }
    Ok(bleu(pairs, BleuMode::Corpus)?[order - 1])
}

pub fn bleu_sentence_avg(pairs: &[EvalPair], order: usize) -> Result<f64, MetricError> {
    if !(1..=4).contains(&order) {
        return Err(MetricError::BadOrder(order));
    }
    Ok(bleu(pairs, BleuMode::Sentence)?[order - 1])
}
