use super::{check_corpus, EvalPair, MetricError};

/// Recall weight in the LCS F-measure.
pub const ROUGE_BETA: f64 = 1.2;

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Highest LCS F-measure over the references.
pub fn rouge_l_pair(pair: &EvalPair) -> f64 {
    pair.references
        .iter()
        .map(|r| f_measure(&pair.candidate, r))
        .fold(0.0, f64::max)
}

fn f_measure(cand: &[String], reference: &[String]) -> f64 {
    let lcs = lcs_len(cand, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / cand.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * r * p / (r + b2 * p)
}

/// Mean of [`rouge_l_pair`] over the corpus.
pub fn rouge_l(pairs: &[EvalPair]) -> Result<f64, MetricError> {
    check_corpus(pairs)?;
    Ok(pairs.iter().map(rouge_l_pair).sum::<f64>() / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    #[test]
    fn lcs_examples() {
        assert_eq!(lcs_len(&tokenize("a b c d"), &tokenize("a c d e")), 3);
        assert_eq!(lcs_len(&tokenize("a b"), &tokenize("")), 0);
        assert_eq!(lcs_len(&tokenize("x a y b"), &tokenize("a b")), 2);
    }

    #[test]
    fn equal_lengths_give_plain_ratio() {
        // P = R = 3/4, so F = 3/4 for any beta.
        let p = EvalPair::from_text("a b c d", &["a c d e"]);
        assert!((rouge_l_pair(&p) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn recall_weighted() {
        // P = 1, R = 1/2: F = 2.44 * 0.5 / (0.5 + 1.44).
        let p = EvalPair::from_text("a b", &["a b c d"]);
        let expected = 2.44 * 0.5 / 1.94;
        assert!((rouge_l_pair(&p) - expected).abs() < 1e-15);
    }

    #[test]
    fn identical_and_disjoint() {
        let same = EvalPair::from_text("a man sits", &["a man sits"]);
        let none = EvalPair::from_text("dogs bark", &["a man sits"]);
        assert_eq!(rouge_l(std::slice::from_ref(&same)).unwrap(), 1.0);
        assert_eq!(rouge_l(std::slice::from_ref(&none)).unwrap(), 0.0);
        assert_eq!(rouge_l(&[same, none]).unwrap(), 0.5);
    }
}
