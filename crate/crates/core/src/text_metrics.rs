//! ROUGE-1, ROUGE-2 and ROUGE-L over lowercase word tokens.
//!
//! These scores supervise the summary re-ranker. Counts are clipped
//! multiset counts and no stemming is applied.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
}

/// Lowercased, punctuation-free word tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Wraps pre-split tokens, dropping empty strings.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(
            tokens
                .into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

/// Lowercases, strips every character that is neither alphanumeric nor
/// whitespace, and splits on whitespace.
pub fn tokenize(text: &str) -> TokenSequence {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    TokenSequence(cleaned.split_whitespace().map(str::to_owned).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub const ZERO: RougeScore = RougeScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        if candidate_total == 0 || reference_total == 0 {
            return Self::ZERO;
        }
        let precision = overlap as f64 / candidate_total as f64;
        let recall = overlap as f64 / reference_total as f64;
        Self {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

/// Harmonic mean with the `0` convention when both inputs are zero.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

pub fn rouge_n(
    candidate: &TokenSequence,
    reference: &TokenSequence,
    n: usize,
) -> Result<RougeScore, MetricError> {
    if n == 0 {
        return Err(MetricError::ZeroOrder);
    }
    let cand = ngram_counts(candidate.tokens(), n);
    let refs = ngram_counts(reference.tokens(), n);
    let overlap: usize = cand
        .iter()
        .map(|(gram, &c)| refs.get(gram).map_or(0, |&r| c.min(r)))
        .sum();
    let cand_total = candidate.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    Ok(RougeScore::from_counts(overlap, cand_total, ref_total))
}

/// Length of the longest common subsequence, two-row dynamic program.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> RougeScore {
    let lcs = lcs_len(candidate.tokens(), reference.tokens());
    RougeScore::from_counts(lcs, candidate.len(), reference.len())
}

/// A re-ranking supervision metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "rouge1")]
    Rouge1,
    #[serde(rename = "rouge2")]
    Rouge2,
    #[serde(rename = "rougeL")]
    RougeL,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Rouge1, Metric::Rouge2, Metric::RougeL];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rouge1 => "rouge1",
            Metric::Rouge2 => "rouge2",
            Metric::RougeL => "rougeL",
        }
    }

    pub fn from_name(name: &str) -> Option<Metric> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// F1 of the candidate against the reference.
    pub fn score(self, candidate: &TokenSequence, reference: &TokenSequence) -> f64 {
        match self {
            Metric::Rouge1 => rouge_n(candidate, reference, 1).map(|s| s.f1).unwrap_or(0.0),
            Metric::Rouge2 => rouge_n(candidate, reference, 2).map(|s| s.f1).unwrap_or(0.0),
            Metric::RougeL => rouge_l(candidate, reference).f1,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(words: &[&str]) -> TokenSequence {
        TokenSequence::from_tokens(words.iter().copied())
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("A b, C.").tokens(), ["a", "b", "c"]);
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("Google Docs for anything").tokens(),
            ["google", "docs", "for", "anything"]
        );
        assert_eq!(tokenize("  ...  !!").len(), 0);
    }

    #[test]
    fn rouge_n_examples() {
        let a = seq(&["a", "b", "c"]);
        let s = rouge_n(&a, &a, 1).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));

        let s = rouge_n(&seq(&["a", "b", "x", "d"]), &seq(&["a", "b", "c", "d"]), 2).unwrap();
        assert!((s.precision - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.recall - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.f1 - 1.0 / 3.0).abs() < 1e-15);

        let s = rouge_n(&seq(&["a", "b"]), &seq(&["c", "d"]), 1).unwrap();
        assert_eq!(s, RougeScore::ZERO);
    }

    #[test]
    fn rouge_n_rejects_zero_order() {
        assert_eq!(rouge_n(&seq(&["a"]), &seq(&["a"]), 0), Err(MetricError::ZeroOrder));
    }

    #[test]
    fn short_sequences_score_zero() {
        let s = rouge_n(&seq(&["a"]), &seq(&["a", "b"]), 2).unwrap();
        assert_eq!(s, RougeScore::ZERO);
    }

    #[test]
    fn clipped_counts() {
        // "the the the" vs "the": one clipped match out of three candidate unigrams.
        let s = rouge_n(&seq(&["the", "the", "the"]), &seq(&["the"]), 1).unwrap();
        assert!((s.precision - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.recall, 1.0);
    }

    #[test]
    fn rouge_l_examples() {
        let a = seq(&["a", "b", "c", "d"]);
        assert_eq!(rouge_l(&a, &a).f1, 1.0);
        let s = rouge_l(&seq(&["a", "c", "b", "d"]), &a);
        assert_eq!((s.precision, s.recall, s.f1), (0.75, 0.75, 0.75));
        assert_eq!(rouge_l(&seq(&[]), &seq(&["a"])), RougeScore::ZERO);
    }

    fn arb_seq() -> impl Strategy<Value = TokenSequence> {
        proptest::collection::vec(0u8..5, 0..30)
            .prop_map(|v| TokenSequence::from_tokens(v.into_iter().map(|t| format!("w{t}"))))
    }

    proptest! {
        #[test]
        fn f1_is_symmetric(a in arb_seq(), b in arb_seq(), n in 1usize..4) {
            let ab = rouge_n(&a, &b, n).unwrap();
            let ba = rouge_n(&b, &a, n).unwrap();
            prop_assert!((ab.f1 - ba.f1).abs() < 1e-12);
            prop_assert!((ab.precision - ba.recall).abs() < 1e-12);
            let lab = rouge_l(&a, &b);
            let lba = rouge_l(&b, &a);
            prop_assert!((lab.f1 - lba.f1).abs() < 1e-12);
        }

        #[test]
        fn lcs_bounded(a in arb_seq(), b in arb_seq()) {
            prop_assert!(lcs_len(a.tokens(), b.tokens()) <= a.len().min(b.len()));
        }

        #[test]
        fn self_score_is_one(a in arb_seq(), n in 1usize..4) {
            prop_assume!(a.len() >= n);
            prop_assert_eq!(rouge_n(&a, &a, n).unwrap().f1, 1.0);
            prop_assert_eq!(rouge_l(&a, &a).f1, 1.0);
        }

        #[test]
        fn scores_in_unit_interval(a in arb_seq(), b in arb_seq(), n in 1usize..4) {
            for s in [rouge_n(&a, &b, n).unwrap(), rouge_l(&a, &b)] {
                for v in [s.precision, s.recall, s.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
