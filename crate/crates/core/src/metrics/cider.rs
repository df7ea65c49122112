//! Plain CIDEr (no length penalty, no count clipping).
//!
//! For each order `n`, every sentence becomes a vector of n-gram counts
//! weighted by `ln(N / df)`, where `N` is the number of pairs and `df` the
//! number of pairs whose references contain the n-gram (at least 1). The
//! pair score for order `n` is the cosine between the candidate vector and
//! each reference vector, averaged over references. Orders are averaged
//! with equal weight, the result is multiplied by `scale`, and the corpus
//! score is the mean over pairs.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::{check_corpus, ngram_counts, EvalPair, MetricError, NgramCounts};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiderParams {
    pub max_order: usize,
    pub scale: f64,
}

impl Default for CiderParams {
    fn default() -> Self {
        Self {
            max_order: 4,
            scale: 10.0,
        }
    }
}

pub fn cider(pairs: &[EvalPair]) -> Result<f64, MetricError> {
    cider_with(pairs, &CiderParams::default())
}

pub fn cider_with(pairs: &[EvalPair], params: &CiderParams) -> Result<f64, MetricError> {
    check_corpus(pairs)?;
    let n_docs = pairs.len() as f64;
    let mut per_pair = vec![0.0; pairs.len()];

    for order in 1..=params.max_order {
        let cand: Vec<NgramCounts> = pairs.iter().map(|p| ngram_counts(&p.candidate, order)).collect();
        let refs: Vec<Vec<NgramCounts>> = pairs
            .iter()
            .map(|p| p.references.iter().map(|r| ngram_counts(r, order)).collect())
            .collect();

        let mut df: HashMap<&[String], usize> = HashMap::new();
        for pair_refs in &refs {
            let present: HashSet<&[String]> = pair_refs.iter().flat_map(|c| c.keys().copied()).collect();
            for gram in present {
                *df.entry(gram).or_insert(0) += 1;
            }
        }
        let idf = |gram: &[String]| (n_docs / df.get(gram).copied().unwrap_or(0).max(1) as f64).ln();

        for (i, (c, rs)) in cand.iter().zip(&refs).enumerate() {
            let cv = weigh(c, &idf);
            let mean_cos = rs.iter().map(|r| cosine(&cv, &weigh(r, &idf))).sum::<f64>() / rs.len() as f64;
            per_pair[i] += mean_cos;
        }
    }

    let orders = params.max_order as f64;
    let total: f64 = per_pair.iter().map(|s| params.scale * s / orders).sum();
    Ok(total / pairs.len() as f64)
}

/// Ordered so every sum below runs in the same order on every run.
type Weighted<'a> = BTreeMap<&'a [String], f64>;

fn weigh<'a>(counts: &NgramCounts<'a>, idf: &impl Fn(&[String]) -> f64) -> Weighted<'a> {
    counts.iter().map(|(&g, &c)| (g, c as f64 * idf(g))).collect()
}

fn cosine(a: &Weighted, b: &Weighted) -> f64 {
    let norm = |v: &Weighted| v.values().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    dot / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(c: &str, refs: &[&str]) -> EvalPair {
        EvalPair::from_text(c, refs)
    }

    #[test]
    fn no_shared_ngrams_scores_zero() {
        let pairs = [pair("dogs bark", &["a man sits"]), pair("cats nap", &["i eat lunch"])];
        assert_eq!(cider(&pairs).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_corpus_has_zero_idf() {
        // Every reference n-gram occurs in all (one) documents: ln(1/1) = 0.
        let p = [pair("a man sits", &["a man sits"])];
        assert_eq!(cider(&p).unwrap(), 0.0);
        let other = [pair("a woman stands", &["a man sits"])];
        assert!(cider(&p).unwrap() >= cider(&other).unwrap());
    }

    #[test]
    fn self_similarity_is_one_per_weighted_order() {
        // Pair 0's n-grams never occur in pair 1's references, so each order
        // present in the sentence has a non-zero vector and cosine 1.
        let pairs = [pair("a b c d", &["a b c d"]), pair("x y", &["p q"])];
        let p0 = cider(&pairs[..1]).unwrap();
        assert_eq!(p0, 0.0);
        let both = cider(&pairs).unwrap();
        // Pair 0 contributes 10 * (1+1+1+1)/4 = 10, pair 1 contributes 0.
        assert!((both - 5.0).abs() < 1e-12);
    }

    #[test]
    fn reference_order_does_not_matter() {
        let a = [
            pair("a man at a table", &["a man sits at a table", "a person eating"]),
            pair("a dog", &["a cat"]),
        ];
        let b = [
            pair("a man at a table", &["a person eating", "a man sits at a table"]),
            pair("a dog", &["a cat"]),
        ];
        assert!((cider(&a).unwrap() - cider(&b).unwrap()).abs() < 1e-12);
    }
}
