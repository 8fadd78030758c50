//! External resources behind small interfaces: a masked-LM scorer, word
//! embeddings, a Zipf frequency lexicon and an isA concept base.
//!
//! Every resource has a text file format and a deterministic in-memory
//! implementation. Real language-model scorers implement [`MaskScorer`].

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::prompt_templates::RenderedPrompt;

/// Tolerance on the total mass of a [`MaskDistribution`].
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// Floor applied before taking logs in [`masked_window_loss`].
pub const MIN_TOKEN_PROB: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("scorer `{scorer}` failed on prompt (template {template_id}): {message}")]
    Scorer {
        scorer: String,
        template_id: u32,
        message: String,
    },
    #[error("mask distribution sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("mask distribution has invalid probability {prob} for `{word}`")]
    InvalidProbability { word: String, prob: f64 },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("vector for `{0}` has a non-finite component")]
    NonFiniteVector(String),
    #[error("`{0}` has no embedding vector")]
    MissingEmbedding(String),
    #[error("mask index {index} out of range for {len} tokens")]
    BadIndex { index: usize, len: usize },
    #[error("window size must be at least 1")]
    ZeroWindow,
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn read_file(path: &Path) -> Result<String, BackendError> {
    std::fs::read_to_string(path).map_err(|source| BackendError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Probabilities over a vocabulary for one mask slot. Construction checks
/// non-negativity and unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskDistribution {
    word_probs: BTreeMap<String, f64>,
}

impl MaskDistribution {
    pub fn new(word_probs: BTreeMap<String, f64>) -> Result<Self, BackendError> {
        let mut total = 0.0;
        for (w, &p) in &word_probs {
            if !(p.is_finite() && p >= 0.0) {
                return Err(BackendError::InvalidProbability { word: w.clone(), prob: p });
            }
            total += p;
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(BackendError::NotNormalized(total));
        }
        Ok(Self { word_probs })
    }

    /// Normalizes non-negative weights to unit mass.
    pub fn from_weights<I, S>(weights: I) -> Result<Self, BackendError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (w, p) in weights {
            *map.entry(w.into()).or_insert(0.0) += p;
        }
        let total: f64 = map.values().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(BackendError::NotNormalized(total));
        }
        for p in map.values_mut() {
            *p /= total;
        }
        Self::new(map)
    }

    pub fn uniform<I, S>(vocab: I) -> Result<Self, BackendError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_weights(vocab.into_iter().map(|w| (w, 1.0)))
    }

    /// Probability of `word`; `0` when it is outside the vocabulary.
    pub fn prob(&self, word: &str) -> f64 {
        self.word_probs.get(word).copied().unwrap_or(0.0)
    }

    pub fn vocabulary_size(&self) -> usize {
        self.word_probs.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.word_probs.iter().map(|(w, &p)| (w.as_str(), p))
    }

    /// Top `k` words by probability; equal probabilities in lexicographic order.
    pub fn top_k(&self, k: usize) -> Vec<(String, f64)> {
        let mut all: Vec<(String, f64)> = self.word_probs.iter().map(|(w, &p)| (w.clone(), p)).collect();
        // BTreeMap order is lexicographic and sort_by is stable.
        all.sort_by(|a, b| b.1.total_cmp(&a.1));
        all.truncate(k);
        all
    }

    /// Mean of several distributions, still normalized.
    pub fn average(dists: &[MaskDistribution]) -> Result<Self, BackendError> {
        let n = dists.len() as f64;
        let mut map = BTreeMap::new();
        for d in dists {
            for (w, &p) in &d.word_probs {
                *map.entry(w.clone()).or_insert(0.0) += p / n;
            }
        }
        Self::new(map)
    }
}

/// Masked language model: the distribution over the vocabulary at one
/// masked position of a token sequence.
pub trait MaskScorer: Send + Sync {
    fn name(&self) -> &str;

    fn mask_token(&self) -> &str {
        "[MASK]"
    }

    /// Whether concurrent queries are allowed.
    fn concurrent_safe(&self) -> bool {
        true
    }

    /// Distribution for `tokens[mask_index]`; the token at that index is
    /// ignored and treated as masked.
    fn mask_fill(&self, tokens: &[String], mask_index: usize) -> Result<MaskDistribution, String>;
}

pub fn mask_distribution(
    prompt: &RenderedPrompt,
    scorer: &dyn MaskScorer,
) -> Result<MaskDistribution, BackendError> {
    let tokens = prompt.tokens();
    if prompt.mask_position >= tokens.len() {
        return Err(BackendError::BadIndex {
            index: prompt.mask_position,
            len: tokens.len(),
        });
    }
    scorer
        .mask_fill(&tokens, prompt.mask_position)
        .map_err(|message| BackendError::Scorer {
            scorer: scorer.name().to_owned(),
            template_id: prompt.template_id,
            message,
        })
}

/// Sum of `-ln p(true token)` with each position of the window
/// `[center - c, center + c]` (clipped to the sequence) masked in turn.
pub fn masked_window_loss(
    tokens: &[String],
    center: usize,
    c: usize,
    scorer: &dyn MaskScorer,
) -> Result<f64, BackendError> {
    if center >= tokens.len() {
        return Err(BackendError::BadIndex {
            index: center,
            len: tokens.len(),
        });
    }
    if c == 0 {
        return Err(BackendError::ZeroWindow);
    }
    let lo = center.saturating_sub(c);
    let hi = (center + c).min(tokens.len() - 1);
    let mut loss = 0.0;
    for pos in lo..=hi {
        let dist = scorer.mask_fill(tokens, pos).map_err(|message| BackendError::Scorer {
            scorer: scorer.name().to_owned(),
            template_id: 0,
            message,
        })?;
        loss -= dist.prob(&tokens[pos]).max(MIN_TOKEN_PROB).ln();
    }
    Ok(loss)
}

/// The same distribution for every query.
#[derive(Debug, Clone)]
pub struct UniformScorer {
    dist: MaskDistribution,
}

impl UniformScorer {
    pub fn new<I, S>(vocab: I) -> Result<Self, BackendError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Ok(Self {
            dist: MaskDistribution::uniform(vocab)?,
        })
    }
}

impl MaskScorer for UniformScorer {
    fn name(&self) -> &str {
        "uniform"
    }

    fn mask_fill(&self, _: &[String], _: usize) -> Result<MaskDistribution, String> {
        Ok(self.dist.clone())
    }
}

/// Scorer defined by a closure, handy for tests.
pub struct FnScorer<F> {
    name: String,
    f: F,
}

impl<F> FnScorer<F>
where
    F: Fn(&[String], usize) -> Result<MaskDistribution, String> + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f }
    }
}

impl<F> MaskScorer for FnScorer<F>
where
    F: Fn(&[String], usize) -> Result<MaskDistribution, String> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn mask_fill(&self, tokens: &[String], mask_index: usize) -> Result<MaskDistribution, String> {
        (self.f)(tokens, mask_index)
    }
}

#[derive(Debug, Deserialize)]
struct FixtureFile {
    #[serde(default = "default_fixture_name")]
    name: String,
    #[serde(default = "default_mask")]
    mask_token: String,
    default: BTreeMap<String, f64>,
    #[serde(default, rename = "rule")]
    rules: Vec<FixtureRuleFile>,
}

#[derive(Debug, Deserialize)]
struct FixtureRuleFile {
    contains: String,
    probs: BTreeMap<String, f64>,
}

fn default_fixture_name() -> String {
    "fixture".into()
}

fn default_mask() -> String {
    "[MASK]".into()
}

#[derive(Debug, Clone)]
struct FixtureRule {
    needle: String,
    dist: MaskDistribution,
}

/// Table-driven scorer. The masked context (tokens joined by spaces, mask
/// token in place) is lowercased and matched against each rule's
/// `contains` key in file order; the first hit supplies the distribution,
/// otherwise `default` does.
///
/// ```toml
/// mask_token = "[MASK]"
/// [default]
/// news = 0.6
/// clickbait = 0.4
///
/// [[rule]]
/// contains = "you won't believe"
/// probs = { clickbait = 0.8, news = 0.2 }
/// ```
#[derive(Debug, Clone)]
pub struct FixtureScorer {
    name: String,
    mask_token: String,
    default: MaskDistribution,
    rules: Vec<FixtureRule>,
}

impl FixtureScorer {
    pub fn parse(text: &str, origin: &str) -> Result<Self, BackendError> {
        let file: FixtureFile = toml::from_str(text).map_err(|e| BackendError::Parse {
            path: origin.to_owned(),
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_owned(),
        })?;
        let rules = file
            .rules
            .into_iter()
            .map(|r| {
                Ok(FixtureRule {
                    needle: r.contains.to_lowercase(),
                    dist: MaskDistribution::new(r.probs)?,
                })
            })
            .collect::<Result<Vec<_>, BackendError>>()?;
        Ok(Self {
            name: file.name,
            mask_token: file.mask_token,
            default: MaskDistribution::new(file.default)?,
            rules,
        })
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        Self::parse(&read_file(path)?, &path.display().to_string())
    }

    fn context_key(&self, tokens: &[String], mask_index: usize) -> String {
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| if i == mask_index { self.mask_token.as_str() } else { t.as_str() })
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase()
    }
}

impl MaskScorer for FixtureScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn mask_token(&self) -> &str {
        &self.mask_token
    }

    fn mask_fill(&self, tokens: &[String], mask_index: usize) -> Result<MaskDistribution, String> {
        if mask_index >= tokens.len() {
            return Err(format!("mask index {mask_index} beyond {} tokens", tokens.len()));
        }
        let key = self.context_key(tokens, mask_index);
        Ok(self
            .rules
            .iter()
            .find(|r| key.contains(&r.needle))
            .map_or(&self.default, |r| &r.dist)
            .clone())
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, BackendError> {
    if a.len() != b.len() {
        return Err(BackendError::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(BackendError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Word vectors of a fixed dimension.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<(), BackendError> {
        let word = word.into();
        if vector.len() != self.dim {
            return Err(BackendError::DimensionMismatch(vector.len(), self.dim));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(BackendError::NonFiniteVector(word));
        }
        self.vectors.insert(word, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Similarity of two words, `None` if either has no vector or is zero.
    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        cosine_similarity(self.get(a)?, self.get(b)?).ok()
    }

    /// Header `word_count dim`, then `token v1 .. v_dim` per line.
    pub fn parse(text: &str, origin: &str) -> Result<Self, BackendError> {
        let err = |line: usize, message: String| BackendError::Parse {
            path: origin.to_owned(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let [count, dim] = head[..] else {
            return Err(err(1, format!("header must be `word_count dim`, got `{header}`")));
        };
        let count: usize = count.parse().map_err(|_| err(1, format!("bad word count `{count}`")))?;
        let dim: usize = dim.parse().map_err(|_| err(1, format!("bad dimension `{dim}`")))?;
        if dim == 0 {
            return Err(err(1, "dimension must be positive".into()));
        }
        let mut table = Self::new(dim);
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line");
            let vector = parts
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(i + 1, format!("`{word}`: {e}")))?;
            if vector.len() != dim {
                return Err(err(i + 1, format!("`{word}` has {} values, expected {dim}", vector.len())));
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(err(i + 1, format!("`{word}` has a non-finite value")));
            }
            table.vectors.insert(word.to_owned(), vector);
        }
        if table.len() != count {
            log::warn!("{origin}: header announces {count} words, read {}", table.len());
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        Self::parse(&read_file(path)?, &path.display().to_string())
    }
}

fn split_columns(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Zipf value of a word: `log10` of its occurrences per billion words.
#[derive(Debug, Clone, Default)]
pub struct FrequencyLexicon {
    zipf: HashMap<String, f64>,
}

/// Zipf value for a raw per-billion occurrence count.
pub fn zipf_from_per_billion(per_billion: f64) -> f64 {
    per_billion.log10()
}

impl FrequencyLexicon {
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self {
            zipf: pairs.into_iter().map(|(w, z)| (w.into(), z)).collect(),
        }
    }

    pub fn zipf_of(&self, word: &str) -> f64 {
        self.zipf.get(word).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.zipf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zipf.is_empty()
    }

    /// Two columns, `word` and `zipf`, separated by a tab, comma or spaces.
    /// A non-numeric first row is treated as a header.
    pub fn parse(text: &str, origin: &str) -> Result<Self, BackendError> {
        let mut zipf = HashMap::new();
        for (n, (line_no, line)) in data_lines(text).enumerate() {
            let cols = split_columns(line);
            let err = |message: String| BackendError::Parse {
                path: origin.to_owned(),
                line: line_no,
                message,
            };
            if cols.len() < 2 {
                return Err(err(format!("expected 2 columns, got {}", cols.len())));
            }
            let value = match cols[1].parse::<f64>() {
                Ok(v) => v,
                Err(_) if n == 0 => continue,
                Err(e) => return Err(err(format!("bad zipf `{}`: {e}", cols[1]))),
            };
            if !(value.is_finite() && value >= 0.0) {
                return Err(err(format!("zipf value {value} must be finite and non-negative")));
            }
            zipf.insert(cols[0].to_owned(), value);
        }
        Ok(Self { zipf })
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        Self::parse(&read_file(path)?, &path.display().to_string())
    }
}

pub fn zipf_of(word: &str, lexicon: &FrequencyLexicon) -> f64 {
    lexicon.zipf_of(word)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptTriple {
    pub instance: String,
    pub concept: String,
    pub probability: f64,
}

/// isA pairs with the probability that an instance belongs to a concept.
/// Lookups return results by descending probability, ties by word.
#[derive(Debug, Clone, Default)]
pub struct ConceptBase {
    by_instance: HashMap<String, Vec<(String, f64)>>,
    by_concept: HashMap<String, Vec<(String, f64)>>,
}

impl ConceptBase {
    pub fn from_triples(triples: impl IntoIterator<Item = ConceptTriple>) -> Result<Self, BackendError> {
        let mut kb = Self::default();
        for t in triples {
            if !(t.probability > 0.0 && t.probability <= 1.0) {
                return Err(BackendError::InvalidProbability {
                    word: format!("{} -> {}", t.instance, t.concept),
                    prob: t.probability,
                });
            }
            kb.by_instance
                .entry(t.instance.clone())
                .or_default()
                .push((t.concept.clone(), t.probability));
            kb.by_concept
                .entry(t.concept)
                .or_default()
                .push((t.instance, t.probability));
        }
        for list in kb.by_instance.values_mut().chain(kb.by_concept.values_mut()) {
            list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        }
        Ok(kb)
    }

    pub fn concepts_of(&self, instance: &str) -> &[(String, f64)] {
        self.by_instance.get(instance).map_or(&[], Vec::as_slice)
    }

    pub fn instances_of(&self, concept: &str) -> &[(String, f64)] {
        self.by_concept.get(concept).map_or(&[], Vec::as_slice)
    }

    /// Both directions merged, keeping the higher probability for a word
    /// reachable both ways.
    pub fn related(&self, word: &str) -> Vec<(String, f64)> {
        let mut merged: BTreeMap<&str, f64> = BTreeMap::new();
        for (w, p) in self.concepts_of(word).iter().chain(self.instances_of(word)) {
            let e = merged.entry(w.as_str()).or_insert(0.0);
            *e = e.max(*p);
        }
        let mut out: Vec<(String, f64)> = merged.into_iter().map(|(w, p)| (w.to_owned(), p)).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1));
        out
    }

    pub fn is_empty(&self) -> bool {
        self.by_instance.is_empty()
    }

    /// Three columns: `instance`, `concept`, `probability`.
    pub fn parse(text: &str, origin: &str) -> Result<Self, BackendError> {
        let mut triples = Vec::new();
        for (line_no, line) in data_lines(text) {
            let cols = split_columns(line);
            let err = |message: String| BackendError::Parse {
                path: origin.to_owned(),
                line: line_no,
                message,
            };
            if cols.len() < 3 {
                return Err(err(format!("expected 3 columns, got {}", cols.len())));
            }
            let probability: f64 = cols[2]
                .parse()
                .map_err(|e| err(format!("bad probability `{}`: {e}", cols[2])))?;
            if !(probability > 0.0 && probability <= 1.0) {
                return Err(err(format!("probability {probability} outside (0, 1]")));
            }
            triples.push(ConceptTriple {
                instance: cols[0].to_owned(),
                concept: cols[1].to_owned(),
                probability,
            });
        }
        Self::from_triples(triples)
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        Self::parse(&read_file(path)?, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn distribution_validation() {
        let ok = MaskDistribution::new(BTreeMap::from([("a".into(), 0.25), ("b".into(), 0.75)])).unwrap();
        assert_eq!(ok.prob("a"), 0.25);
        assert_eq!(ok.prob("zzz"), 0.0);
        assert!(matches!(
            MaskDistribution::new(BTreeMap::from([("a".into(), 0.5)])),
            Err(BackendError::NotNormalized(_))
        ));
        assert!(matches!(
            MaskDistribution::new(BTreeMap::from([("a".into(), 1.5), ("b".into(), -0.5)])),
            Err(BackendError::InvalidProbability { .. })
        ));
    }

    #[test]
    fn uniform_over_four() {
        let s = UniformScorer::new(["a", "b", "c", "d"]).unwrap();
        let d = s.mask_fill(&toks("x [MASK]"), 1).unwrap();
        for w in ["a", "b", "c", "d"] {
            assert_eq!(d.prob(w), 0.25);
        }
    }

    #[test]
    fn fixture_echo_and_rules() {
        let text = r#"
name = "planted"
[default]
news = 0.7
clickbait = 0.3

[[rule]]
contains = "Shocking"
probs = { clickbait = 0.9, news = 0.1 }
"#;
        let s = FixtureScorer::parse(text, "inline").unwrap();
        let p = RenderedPrompt {
            text: "this is shocking stuff [MASK]".into(),
            mask_position: 4,
            template_id: 1,
        };
        let d = mask_distribution(&p, &s).unwrap();
        assert_eq!(d.prob("clickbait"), 0.9);
        assert_eq!(d.prob("news"), 0.1);
        assert_eq!(d.prob("unknown"), 0.0);
        let p = RenderedPrompt {
            text: "calm report [MASK]".into(),
            mask_position: 2,
            template_id: 1,
        };
        assert_eq!(mask_distribution(&p, &s).unwrap().prob("news"), 0.7);

        let bad = "[default]\nnews = 0.5\n";
        assert!(matches!(FixtureScorer::parse(bad, "x"), Err(BackendError::NotNormalized(_))));
    }

    #[test]
    fn scorer_failure_carries_template() {
        let s = FnScorer::new("broken", |_: &[String], _| Err("gpu on fire".to_string()));
        let p = RenderedPrompt {
            text: "a [MASK]".into(),
            mask_position: 1,
            template_id: 4,
        };
        match mask_distribution(&p, &s) {
            Err(BackendError::Scorer { scorer, template_id, message }) => {
                assert_eq!((scorer.as_str(), template_id, message.as_str()), ("broken", 4, "gpu on fire"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]), Err(BackendError::ZeroVector)));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 1.0]),
            Err(BackendError::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn zipf_examples() {
        let lex = FrequencyLexicon::from_pairs([
            ("once", zipf_from_per_billion(1.0)),
            ("often", zipf_from_per_billion(1e6)),
        ]);
        assert_eq!(zipf_of("once", &lex), 0.0);
        assert!((zipf_of("often", &lex) - 6.0).abs() < 1e-12);
        assert_eq!(zipf_of("never", &lex), 0.0);
    }

    #[test]
    fn window_loss_examples() {
        let one = FnScorer::new("oracle", |t: &[String], i: usize| {
            MaskDistribution::new(BTreeMap::from([(t[i].clone(), 1.0)])).map_err(|e| e.to_string())
        });
        let tokens = toks("a b c d e f g");
        assert_eq!(masked_window_loss(&tokens, 3, 5, &one).unwrap(), 0.0);

        // Planted per-token probabilities for "x y z".
        let planted = FnScorer::new("planted", |t: &[String], i: usize| {
            let p = match t[i].as_str() {
                "y" => 0.25,
                _ => 0.5,
            };
            MaskDistribution::from_weights([(t[i].clone(), p), ("<other>".to_string(), 1.0 - p)])
                .map_err(|e| e.to_string())
        });
        let loss = masked_window_loss(&toks("x y z"), 1, 1, &planted).unwrap();
        let expected = -(0.5f64.ln() + 0.25f64.ln() + 0.5f64.ln());
        assert!((loss - expected).abs() < 1e-12);
        assert!((loss - 2.7726).abs() < 1e-4);

        // Clipped at the start: window of 5 around index 0 of 3 tokens -> 3 positions.
        let counted = std::sync::atomic::AtomicUsize::new(0);
        let counting = FnScorer::new("count", |t: &[String], i: usize| {
            counted.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            MaskDistribution::new(BTreeMap::from([(t[i].clone(), 1.0)])).map_err(|e| e.to_string())
        });
        masked_window_loss(&toks("x y z"), 0, 5, &counting).unwrap();
        assert_eq!(counted.load(std::sync::atomic::Ordering::SeqCst), 3);

        assert!(matches!(masked_window_loss(&tokens, 9, 1, &one), Err(BackendError::BadIndex { .. })));
        assert!(matches!(masked_window_loss(&tokens, 0, 0, &one), Err(BackendError::ZeroWindow)));
    }

    #[test]
    fn embedding_file() {
        let text = "3 2\nclickbait 1 0\nmisleading 0.9 0.1\nhyperlink 0.1 0.9\n";
        let t = EmbeddingTable::parse(text, "e.txt").unwrap();
        assert_eq!((t.len(), t.dim()), (3, 2));
        assert!(t.similarity("clickbait", "misleading").unwrap() > t.similarity("clickbait", "hyperlink").unwrap());
        assert!(EmbeddingTable::parse("1 2\nw 1 2 3\n", "e").is_err());
        assert!(EmbeddingTable::parse("1 2\nw 1 x\n", "e").is_err());
        assert!(EmbeddingTable::parse("bogus\n", "e").is_err());
    }

    #[test]
    fn lexicon_and_concepts_files() {
        let lex = FrequencyLexicon::parse("word\tzipf\nnews\t5.8\nrare\t1.2\n", "l").unwrap();
        assert_eq!(lex.zipf_of("news"), 5.8);
        assert_eq!(lex.len(), 2);
        assert!(FrequencyLexicon::parse("a\t-1\n", "l").is_err());

        let kb = ConceptBase::parse(
            "# instance\tconcept\tprob\nclickbait\tmisleading\t0.7\nclickbait\thyperlink\t0.9\nnews\treport\t0.5\n",
            "kb",
        )
        .unwrap();
        let c: Vec<&str> = kb.concepts_of("clickbait").iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(c, ["hyperlink", "misleading"]);
        assert_eq!(kb.instances_of("report")[0].0, "news");
        assert!(kb.concepts_of("absent").is_empty());
        assert!(ConceptBase::parse("a\tb\t0\n", "kb").is_err());
        assert!(ConceptBase::parse("a\tb\n", "kb").is_err());
    }
}
