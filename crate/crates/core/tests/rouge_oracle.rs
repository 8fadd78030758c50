use std::collections::HashMap;

use clickbait_core::text_metrics::{lcs_len, rouge_l, rouge_n, tokenize, Metric, RougeScore, TokenSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VOCAB: [&str; 8] = ["the", "cat", "sat", "on", "mat", "a", "dog", "ran"];

fn random_tokens(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<String> {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| VOCAB[rng.gen_range(0..VOCAB.len())].to_owned()).collect()
}

fn oracle_f(overlap: f64, cand_total: f64, ref_total: f64) -> RougeScore {
    let p = if cand_total > 0.0 { overlap / cand_total } else { 0.0 };
    let r = if ref_total > 0.0 { overlap / ref_total } else { 0.0 };
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    RougeScore { precision: p, recall: r, f1 }
}

fn oracle_rouge_n(cand: &[String], reference: &[String], n: usize) -> RougeScore {
    let grams = |toks: &[String]| {
        let mut counts: HashMap<Vec<String>, usize> = HashMap::new();
        if toks.len() >= n {
            for start in 0..=toks.len() - n {
                *counts.entry(toks[start..start + n].to_vec()).or_default() += 1;
            }
        }
        counts
    };
    let c = grams(cand);
    let r = grams(reference);
    let overlap: usize = c.iter().map(|(g, k)| (*k).min(*r.get(g).unwrap_or(&0))).sum();
    oracle_f(overlap as f64, c.values().sum::<usize>() as f64, r.values().sum::<usize>() as f64)
}

fn oracle_lcs(a: &[String], b: &[String]) -> usize {
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            table[i][j] = if a[i - 1] == b[j - 1] {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    table[a.len()][b.len()]
}

fn assert_close(a: RougeScore, b: RougeScore) {
    assert!((a.precision - b.precision).abs() < 1e-12, "{a:?} vs {b:?}");
    assert!((a.recall - b.recall).abs() < 1e-12, "{a:?} vs {b:?}");
    assert!((a.f1 - b.f1).abs() < 1e-12, "{a:?} vs {b:?}");
}

#[test]
fn matches_brute_force_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let c = random_tokens(&mut rng, 25);
        let r = random_tokens(&mut rng, 25);
        let (cs, rs) = (TokenSequence::from_tokens(c.clone()), TokenSequence::from_tokens(r.clone()));
        for n in [1, 2] {
            assert_close(rouge_n(&cs, &rs, n).unwrap(), oracle_rouge_n(&c, &r, n));
        }
        let l = oracle_lcs(&c, &r);
        assert_eq!(lcs_len(&c, &r), l);
        assert_close(rouge_l(&cs, &rs), oracle_f(l as f64, c.len() as f64, r.len() as f64));
    }
}

#[test]
fn metric_scores_are_f1_of_tokenized_text() {
    let cand = "The cat sat on the mat.";
    let reference = "the cat was on the MAT";
    let (c, r) = (tokenize(cand), tokenize(reference));
    assert_eq!(Metric::Rouge1.score(&c, &r), rouge_n(&c, &r, 1).unwrap().f1);
    assert_eq!(Metric::RougeL.score(&c, &r), rouge_l(&c, &r).f1);
}
