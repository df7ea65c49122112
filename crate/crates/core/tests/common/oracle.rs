//! Exhaustive decoder oracle over tiny vocabularies.

use lifecap::decoder::{BiasTable, Predictor, TokenId, ToyPredictor, Vocabulary, START};

/// One-cluster toy predictor whose next-token activations depend on the
/// previous token only.
pub fn toy(words: usize, rows: &[Vec<f64>]) -> ToyPredictor {
    let names: Vec<String> = (0..words).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::from_words(&names).unwrap();
    let mut p = ToyPredictor::new(vocab.clone(), vec![vec![0.0]]).unwrap();
    let previous: Vec<&str> = std::iter::once(START).chain(names.iter().map(String::as_str)).collect();
    for (prev, row) in previous.iter().zip(rows) {
        p.set_bigram(0, prev, row.clone()).unwrap();
    }
    p
}

/// Every sentence the decoder can emit: up to `max_len - 1` words then
/// STOP, or `max_len` words cut off.
pub fn all_sentences(vocab: &Vocabulary, max_len: usize) -> Vec<Vec<TokenId>> {
    let words: Vec<TokenId> = (0..vocab.len()).filter(|&t| !vocab.is_reserved(t)).collect();
    let mut out = Vec::new();
    let mut frontier = vec![Vec::new()];
    for len in 0..max_len {
        let mut next = Vec::new();
        for prefix in &frontier {
            let mut stopped = prefix.clone();
            stopped.push(vocab.stop());
            out.push(stopped);
            for &w in &words {
                let mut p: Vec<TokenId> = prefix.clone();
                p.push(w);
                if len + 1 == max_len {
                    out.push(p);
                } else {
                    next.push(p);
                }
            }
        }
        frontier = next;
    }
    out
}

/// Log-probability of `tokens` with its own normalization: START excluded
/// from the partition function, and a per-position bias added after it.
pub fn oracle_score(p: &ToyPredictor, tokens: &[TokenId], bias: Option<&BiasTable>) -> f64 {
    let vocab = p.vocabulary();
    let mut total = 0.0;
    for (pos, &t) in tokens.iter().enumerate() {
        let acts = p.activations(&[0.0], &tokens[..pos]).unwrap();
        let z: f64 = acts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != vocab.start())
            .map(|(_, a)| a.exp())
            .sum();
        total += acts[t] - z.ln() + bias.map_or(0.0, |b| b.get(pos, t));
    }
    total
}

/// Number of sentences [`all_sentences`] returns.
pub fn sentence_count(words: usize, max_len: usize) -> usize {
    (0..max_len).map(|l| words.pow(l as u32)).sum::<usize>() + words.pow(max_len as u32)
}

/// Vocabulary START, STOP, A, B. At the first step A leads B by `gap`;
/// afterwards both words behave identically and STOP is preferred.
pub fn gap_predictor(gap: f64) -> ToyPredictor {
    let vocab = Vocabulary::from_words(["A", "B"]).unwrap();
    let mut p = ToyPredictor::new(vocab, vec![vec![0.0]]).unwrap();
    p.set_bigram(0, START, vec![0.0, -5.0, gap, 0.0]).unwrap();
    for w in ["A", "B"] {
        p.set_bigram(0, w, vec![0.0, 2.0, 0.0, 0.0]).unwrap();
    }
    p
}
