//! Label-word expansion.
//!
//! Each label name is expanded by up to five strategies:
//!
//! * `concepts`: isA neighbours from the concept base, re-ranked by embedding
//!   similarity to the label name;
//! * `mlm_prediction`: the most probable mask fillers for prompts of that label;
//! * `embedding_similarity`, `frequency` and `context`: re-rankings of the pool
//!   formed by the first two strategies, by cosine similarity to the label,
//!   by Zipf frequency, and by masked-window loss around the mask.
//!
//! Every strategy keeps at most `n_a` words after dropping morphological
//! derivations of the label names. [`integrate`] unions the results.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lm_backend::{
    cosine_similarity, mask_distribution, masked_window_loss, BackendError, ConceptBase, EmbeddingTable,
    FrequencyLexicon, MaskDistribution, MaskScorer,
};
use crate::prompt_templates::RenderedPrompt;

pub const DEFAULT_N_A: usize = 15;
pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Error)]
pub enum VerbalizerError {
    #[error("per-strategy cap n_a must be at least 1")]
    ZeroCap,
    #[error("label `{0}` has no embedding vector")]
    LabelNotEmbedded(String),
    #[error("no labels given")]
    NoLabels,
    #[error("label `{0}` has no prompts to probe the language model with")]
    NoProbes(String),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("verbalizer file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Concepts,
    MlmPrediction,
    EmbeddingSimilarity,
    Frequency,
    Context,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Concepts,
        Strategy::MlmPrediction,
        Strategy::EmbeddingSimilarity,
        Strategy::Frequency,
        Strategy::Context,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Concepts => "concepts",
            Strategy::MlmPrediction => "mlm_prediction",
            Strategy::EmbeddingSimilarity => "embedding_similarity",
            Strategy::Frequency => "frequency",
            Strategy::Context => "context",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = VerbalizerError;

    /// Accepts the canonical names plus the short forms `mlm`, `embedding`
    /// and `freq`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let found = match s.as_str() {
            "mlm" => Some(Strategy::MlmPrediction),
            "embedding" => Some(Strategy::EmbeddingSimilarity),
            "freq" => Some(Strategy::Frequency),
            _ => Strategy::ALL.into_iter().find(|x| x.name() == s),
        };
        found.ok_or(VerbalizerError::UnknownStrategy(s))
    }
}

/// Ranked output of one strategy; higher score ranks first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub strategy: Strategy,
    pub ranked_words: Vec<(String, f64)>,
}

impl StrategyResult {
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.ranked_words.iter().map(|(w, _)| w.as_str())
    }

    pub fn len(&self) -> usize {
        self.ranked_words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked_words.is_empty()
    }
}

fn light_stem(word: &str) -> &str {
    const SUFFIXES: [&str; 12] = [
        "ations", "ation", "ness", "ings", "ing", "ers", "ies", "er", "ed", "es", "ly", "s",
    ];
    for suf in SUFFIXES {
        if let Some(stem) = word.strip_suffix(suf) {
            if stem.chars().count() >= 3 {
                return stem;
            }
        }
    }
    word
}

/// Whether `word` is a surface variant of `label`: equal, sharing the first
/// four characters, or equal after light suffix stripping.
pub fn is_derivation(word: &str, label: &str) -> bool {
    let w = word.to_lowercase();
    let l = label.to_lowercase();
    if w == l {
        return true;
    }
    let prefix = |s: &str| s.chars().take(4).collect::<String>();
    if w.chars().count() >= 4 && l.chars().count() >= 4 && prefix(&w) == prefix(&l) {
        return true;
    }
    light_stem(&w) == light_stem(&l)
}

fn check_cap(n_a: usize) -> Result<(), VerbalizerError> {
    if n_a == 0 {
        Err(VerbalizerError::ZeroCap)
    } else {
        Ok(())
    }
}

fn sort_desc_stable(words: &mut [(String, f64)]) {
    words.sort_by(|a, b| b.1.total_cmp(&a.1));
}

fn dedup_words(words: Vec<(String, f64)>) -> Vec<(String, f64)> {
    let mut seen = HashSet::new();
    words.into_iter().filter(|(w, _)| seen.insert(w.clone())).collect()
}

fn label_vector<'e>(label: &str, embeddings: &'e EmbeddingTable) -> Result<&'e [f64], VerbalizerError> {
    embeddings
        .get(label)
        .ok_or_else(|| VerbalizerError::LabelNotEmbedded(label.to_owned()))
}

fn rank_by_similarity(label_vec: &[f64], words: &[String], embeddings: &EmbeddingTable) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = words
        .iter()
        .filter_map(|w| {
            let v = embeddings.get(w)?;
            cosine_similarity(label_vec, v).ok().map(|s| (w.clone(), s))
        })
        .collect();
    sort_desc_stable(&mut out);
    dedup_words(out)
}

/// Full ranking for the concepts strategy, before any filter or cap.
pub fn rank_concepts(
    label: &str,
    kb: &ConceptBase,
    embeddings: &EmbeddingTable,
) -> Result<Vec<(String, f64)>, VerbalizerError> {
    let lv = label_vector(label, embeddings)?;
    let retrieved: Vec<String> = kb.related(label).into_iter().map(|(w, _)| w).collect();
    Ok(rank_by_similarity(lv, &retrieved, embeddings))
}

pub fn strategy_concepts(
    label_name: &str,
    kb: &ConceptBase,
    embeddings: &EmbeddingTable,
    n_a: usize,
) -> Result<StrategyResult, VerbalizerError> {
    check_cap(n_a)?;
    let mut ranked = rank_concepts(label_name, kb, embeddings)?;
    ranked.retain(|(w, _)| !is_derivation(w, label_name));
    ranked.truncate(n_a);
    Ok(StrategyResult {
        strategy: Strategy::Concepts,
        ranked_words: ranked,
    })
}

pub fn strategy_mlm(
    prompt: &RenderedPrompt,
    scorer: &dyn MaskScorer,
    n_a: usize,
) -> Result<StrategyResult, VerbalizerError> {
    check_cap(n_a)?;
    let dist = mask_distribution(prompt, scorer)?;
    Ok(StrategyResult {
        strategy: Strategy::MlmPrediction,
        ranked_words: dist.top_k(n_a),
    })
}

pub fn strategy_embedding(
    label_name: &str,
    pool: &[String],
    embeddings: &EmbeddingTable,
    n_a: usize,
) -> Result<StrategyResult, VerbalizerError> {
    check_cap(n_a)?;
    let lv = label_vector(label_name, embeddings)?;
    let mut ranked = rank_by_similarity(lv, pool, embeddings);
    ranked.truncate(n_a);
    Ok(StrategyResult {
        strategy: Strategy::EmbeddingSimilarity,
        ranked_words: ranked,
    })
}

fn rank_frequency(pool: &[String], lexicon: &FrequencyLexicon) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = pool.iter().map(|w| (w.clone(), lexicon.zipf_of(w))).collect();
    sort_desc_stable(&mut ranked);
    dedup_words(ranked)
}

pub fn strategy_frequency(
    pool: &[String],
    lexicon: &FrequencyLexicon,
    n_a: usize,
) -> Result<StrategyResult, VerbalizerError> {
    check_cap(n_a)?;
    let mut ranked = rank_frequency(pool, lexicon);
    ranked.truncate(n_a);
    Ok(StrategyResult {
        strategy: Strategy::Frequency,
        ranked_words: ranked,
    })
}

/// Pool words ranked by mean masked-window loss over the given contexts.
/// Scores are negated losses so that higher still ranks first.
fn rank_context(
    contexts: &[(Vec<String>, usize)],
    pool: &[String],
    scorer: &dyn MaskScorer,
    c: usize,
) -> Result<Vec<(String, f64)>, VerbalizerError> {
    let mut ranked = Vec::with_capacity(pool.len());
    for word in pool {
        let mut total = 0.0;
        for (tokens, mask_index) in contexts {
            let mut filled = tokens.clone();
            if *mask_index >= filled.len() {
                return Err(BackendError::BadIndex {
                    index: *mask_index,
                    len: filled.len(),
                }
                .into());
            }
            filled[*mask_index] = word.clone();
            total += masked_window_loss(&filled, *mask_index, c, scorer)?;
        }
        ranked.push((word.clone(), -total / contexts.len().max(1) as f64));
    }
    sort_desc_stable(&mut ranked);
    Ok(dedup_words(ranked))
}

pub fn strategy_context(
    prompt_tokens: &[String],
    mask_index: usize,
    pool: &[String],
    scorer: &dyn MaskScorer,
    c: usize,
    n_a: usize,
) -> Result<StrategyResult, VerbalizerError> {
    check_cap(n_a)?;
    let mut ranked = rank_context(&[(prompt_tokens.to_vec(), mask_index)], pool, scorer, c)?;
    ranked.truncate(n_a);
    Ok(StrategyResult {
        strategy: Strategy::Context,
        ranked_words: ranked,
    })
}

/// One label word and the strategies that proposed it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelWord {
    pub word: String,
    pub provenance: BTreeSet<Strategy>,
    pub is_label_name: bool,
}

impl LabelWord {
    fn provenance_field(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if self.is_label_name {
            parts.push("label_name");
        }
        parts.extend(self.provenance.iter().map(|s| s.name()));
        parts.join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationMode {
    /// Every word proposed by any strategy.
    #[default]
    Union,
    /// Only words proposed by at least this many strategies.
    MinVotes(usize),
}

/// Label words per label, in label declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verbalizer {
    labels: Vec<String>,
    entries: Vec<Vec<LabelWord>>,
    n_a: usize,
}

impl Verbalizer {
    /// A verbalizer whose only label words are the label names.
    pub fn label_names_only(labels: &[String]) -> Self {
        Self {
            labels: labels.to_vec(),
            entries: labels
                .iter()
                .map(|l| {
                    vec![LabelWord {
                        word: l.clone(),
                        provenance: BTreeSet::new(),
                        is_label_name: true,
                    }]
                })
                .collect(),
            n_a: DEFAULT_N_A,
        }
    }

    /// Builds from explicit word lists; the first word of each list is
    /// not required to be the label name.
    pub fn from_words(labels: &[String], words: &[Vec<String>]) -> Self {
        Self {
            labels: labels.to_vec(),
            entries: labels
                .iter()
                .zip(words)
                .map(|(l, ws)| {
                    ws.iter()
                        .map(|w| LabelWord {
                            word: w.clone(),
                            provenance: BTreeSet::new(),
                            is_label_name: w == l,
                        })
                        .collect()
                })
                .collect(),
            n_a: DEFAULT_N_A,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn entries(&self, label: usize) -> &[LabelWord] {
        &self.entries[label]
    }

    pub fn words(&self, label: usize) -> impl Iterator<Item = &str> {
        self.entries[label].iter().map(|e| e.word.as_str())
    }

    /// Tab-separated `label word rank provenance` rows after a header.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# verbalizer n_a={}\nlabel\tword\trank\tprovenance\n", self.n_a);
        for (label, entries) in self.labels.iter().zip(&self.entries) {
            for (rank, e) in entries.iter().enumerate() {
                out.push_str(&format!("{label}\t{}\t{rank}\t{}\n", e.word, e.provenance_field()));
            }
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, VerbalizerError> {
        let mut n_a = DEFAULT_N_A;
        let mut labels: Vec<String> = Vec::new();
        let mut entries: Vec<Vec<LabelWord>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| VerbalizerError::Parse { line: i + 1, message };
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.split_whitespace().find_map(|t| t.strip_prefix("n_a=")) {
                    n_a = v.parse().map_err(|_| err(format!("bad n_a `{v}`")))?;
                }
                continue;
            }
            if line.trim().is_empty() || line.starts_with("label\t") {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(err(format!("expected 4 columns, got {}", cols.len())));
            }
            let idx = match labels.iter().position(|l| l == cols[0]) {
                Some(i) => i,
                None => {
                    labels.push(cols[0].to_owned());
                    entries.push(Vec::new());
                    labels.len() - 1
                }
            };
            let rank: usize = cols[2].parse().map_err(|_| err(format!("bad rank `{}`", cols[2])))?;
            if rank != entries[idx].len() {
                return Err(err(format!("rank {rank} out of order")));
            }
            let mut provenance = BTreeSet::new();
            let mut is_label_name = false;
            for p in cols[3].split(',').filter(|p| !p.is_empty()) {
                if p == "label_name" {
                    is_label_name = true;
                } else {
                    provenance.insert(p.parse().map_err(|e: VerbalizerError| err(e.to_string()))?);
                }
            }
            entries[idx].push(LabelWord {
                word: cols[1].to_owned(),
                provenance,
                is_label_name,
            });
        }
        if labels.is_empty() {
            return Err(VerbalizerError::NoLabels);
        }
        Ok(Self { labels, entries, n_a })
    }

    /// SHA-256 of the serialized form, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_tsv().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<(), VerbalizerError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_tsv().as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, VerbalizerError> {
        Self::from_tsv(&std::fs::read_to_string(path)?)
    }
}

/// Merges strategy outputs into a verbalizer. `results[y]` holds the
/// strategy outputs for label `y`.
///
/// Per label the label name comes first, followed by the other words ordered
/// by number of contributing strategies (descending), best rank in any
/// strategy (ascending) and the word itself. Derivations of other label
/// names are dropped.
pub fn integrate(results: &[Vec<StrategyResult>], label_names: &[String]) -> Verbalizer {
    integrate_with(results, label_names, IntegrationMode::Union, DEFAULT_N_A)
}

pub fn integrate_with(
    results: &[Vec<StrategyResult>],
    label_names: &[String],
    mode: IntegrationMode,
    n_a: usize,
) -> Verbalizer {
    let mut entries = Vec::with_capacity(label_names.len());
    for (y, label) in label_names.iter().enumerate() {
        let others: Vec<&String> = label_names.iter().filter(|l| *l != label).collect();
        // word -> (provenance, best rank)
        let mut merged: BTreeMap<&str, (BTreeSet<Strategy>, usize)> = BTreeMap::new();
        for result in results.get(y).map(Vec::as_slice).unwrap_or(&[]) {
            for (rank, (word, _)) in result.ranked_words.iter().enumerate() {
                let e = merged.entry(word.as_str()).or_insert((BTreeSet::new(), usize::MAX));
                e.0.insert(result.strategy);
                e.1 = e.1.min(rank);
            }
        }
        let label_prov = merged.remove(label.as_str()).map(|(p, _)| p).unwrap_or_default();
        let min_votes = match mode {
            IntegrationMode::Union => 1,
            IntegrationMode::MinVotes(k) => k.max(1),
        };
        let mut rest: Vec<(&str, BTreeSet<Strategy>, usize)> = merged
            .into_iter()
            .filter(|(w, (prov, _))| prov.len() >= min_votes && !others.iter().any(|o| is_derivation(w, o)))
            .map(|(w, (p, r))| (w, p, r))
            .collect();
        rest.sort_by(|a, b| {
            b.1.len()
                .cmp(&a.1.len())
                .then(a.2.cmp(&b.2))
                .then_with(|| a.0.cmp(b.0))
        });
        let mut words = vec![LabelWord {
            word: label.clone(),
            provenance: label_prov,
            is_label_name: true,
        }];
        words.extend(rest.into_iter().map(|(w, provenance, _)| LabelWord {
            word: w.to_owned(),
            provenance,
            is_label_name: false,
        }));
        entries.push(words);
    }
    Verbalizer {
        labels: label_names.to_vec(),
        entries,
        n_a,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerbalizerConfig {
    pub n_a: usize,
    pub window: usize,
    pub strategies: BTreeSet<Strategy>,
    pub integration: IntegrationMode,
    /// Prompts per label used by the context strategy.
    pub context_probes: usize,
}

impl Default for VerbalizerConfig {
    fn default() -> Self {
        Self {
            n_a: DEFAULT_N_A,
            window: DEFAULT_WINDOW,
            strategies: Strategy::ALL.into_iter().collect(),
            integration: IntegrationMode::Union,
            context_probes: 4,
        }
    }
}

pub struct VerbalizerResources<'a> {
    pub concepts: &'a ConceptBase,
    pub embeddings: &'a EmbeddingTable,
    pub lexicon: &'a FrequencyLexicon,
    pub scorer: &'a dyn MaskScorer,
}

#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub verbalizer: Verbalizer,
    /// Strategy outputs per label, after filtering and truncation.
    pub results: Vec<Vec<StrategyResult>>,
}

impl BuildOutcome {
    /// Number of words each strategy contributed, per label.
    pub fn contribution_counts(&self) -> Vec<Vec<(Strategy, usize)>> {
        self.results
            .iter()
            .map(|rs| rs.iter().map(|r| (r.strategy, r.len())).collect())
            .collect()
    }
}

/// Runs the enabled strategies for every label and integrates the results.
///
/// `probes[y]` are rendered prompts associated with label `y` (e.g. the
/// few-shot training examples of that class). They drive the MLM strategy
/// (averaged mask distribution) and the context strategy.
pub fn build_verbalizer(
    labels: &[String],
    probes: &[Vec<RenderedPrompt>],
    resources: &VerbalizerResources<'_>,
    config: &VerbalizerConfig,
) -> Result<BuildOutcome, VerbalizerError> {
    if labels.is_empty() {
        return Err(VerbalizerError::NoLabels);
    }
    check_cap(config.n_a)?;
    let enabled = |s: Strategy| config.strategies.contains(&s);
    let mut all_results = Vec::with_capacity(labels.len());

    for (y, label) in labels.iter().enumerate() {
        let keep = |w: &str| {
            w == label
                || !labels.iter().any(|l| is_derivation(w, l))
        };
        let finish = |strategy: Strategy, mut ranked: Vec<(String, f64)>| {
            ranked.retain(|(w, _)| keep(w));
            ranked.truncate(config.n_a);
            StrategyResult {
                strategy,
                ranked_words: ranked,
            }
        };
        let label_probes = probes.get(y).map(Vec::as_slice).unwrap_or(&[]);
        let mut results = Vec::new();

        if enabled(Strategy::Concepts) {
            let ranked = rank_concepts(label, resources.concepts, resources.embeddings)?;
            results.push(finish(Strategy::Concepts, ranked));
        }
        if enabled(Strategy::MlmPrediction) {
            if label_probes.is_empty() {
                return Err(VerbalizerError::NoProbes(label.clone()));
            }
            let dists = label_probes
                .iter()
                .map(|p| mask_distribution(p, resources.scorer))
                .collect::<Result<Vec<_>, _>>()?;
            let avg = MaskDistribution::average(&dists)?;
            let ranked = avg.top_k(avg.vocabulary_size());
            results.push(finish(Strategy::MlmPrediction, ranked));
        }

        let mut seen = HashSet::new();
        let pool: Vec<String> = results
            .iter()
            .flat_map(|r| r.words())
            .filter(|w| seen.insert(*w))
            .map(str::to_owned)
            .collect();

        if enabled(Strategy::EmbeddingSimilarity) {
            let lv = label_vector(label, resources.embeddings)?;
            let ranked = rank_by_similarity(lv, &pool, resources.embeddings);
            results.push(finish(Strategy::EmbeddingSimilarity, ranked));
        }
        if enabled(Strategy::Frequency) {
            results.push(finish(Strategy::Frequency, rank_frequency(&pool, resources.lexicon)));
        }
        if enabled(Strategy::Context) {
            if label_probes.is_empty() {
                return Err(VerbalizerError::NoProbes(label.clone()));
            }
            let contexts: Vec<(Vec<String>, usize)> = label_probes
                .iter()
                .take(config.context_probes.max(1))
                .map(|p| (p.tokens(), p.mask_position))
                .collect();
            let ranked = rank_context(&contexts, &pool, resources.scorer, config.window)?;
            results.push(finish(Strategy::Context, ranked));
        }
        all_results.push(results);
    }

    let verbalizer = integrate_with(&all_results, labels, config.integration, config.n_a);
    Ok(BuildOutcome {
        verbalizer,
        results: all_results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm_backend::{ConceptTriple, FnScorer};

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn fixture_embeddings() -> EmbeddingTable {
        let mut e = EmbeddingTable::new(2);
        e.insert("clickbait", vec![1.0, 0.0]).unwrap();
        e.insert("misleading", vec![0.9, 0.1]).unwrap();
        e.insert("hyperlink", vec![0.2, 0.9]).unwrap();
        e.insert("orthogonal", vec![0.0, 1.0]).unwrap();
        e
    }

    fn fixture_kb() -> ConceptBase {
        ConceptBase::from_triples([
            ConceptTriple {
                instance: "clickbait".into(),
                concept: "hyperlink".into(),
                probability: 0.9,
            },
            ConceptTriple {
                instance: "clickbait".into(),
                concept: "misleading".into(),
                probability: 0.7,
            },
        ])
        .unwrap()
    }

    #[test]
    fn derivation_rule() {
        assert!(is_derivation("clickbaits", "clickbait"));
        assert!(is_derivation("newsletter", "news"));
        assert!(is_derivation("New", "news"));
        assert!(!is_derivation("report", "news"));
        assert!(!is_derivation("misleading", "clickbait"));
    }

    #[test]
    fn concepts_reranked_by_embedding() {
        let r = strategy_concepts("clickbait", &fixture_kb(), &fixture_embeddings(), 15).unwrap();
        assert_eq!(r.words().collect::<Vec<_>>(), ["misleading", "hyperlink"]);
        let r = strategy_concepts("clickbait", &fixture_kb(), &fixture_embeddings(), 1).unwrap();
        assert_eq!(r.words().collect::<Vec<_>>(), ["misleading"]);
        let mut emb = fixture_embeddings();
        emb.insert("news", vec![0.5, 0.5]).unwrap();
        assert!(strategy_concepts("news", &fixture_kb(), &emb, 15).unwrap().is_empty());
        assert!(matches!(
            strategy_concepts("absent", &fixture_kb(), &fixture_embeddings(), 15),
            Err(VerbalizerError::LabelNotEmbedded(_))
        ));
        assert!(matches!(
            strategy_concepts("clickbait", &fixture_kb(), &fixture_embeddings(), 0),
            Err(VerbalizerError::ZeroCap)
        ));
    }

    fn planted(probs: &'static [(&'static str, f64)]) -> impl MaskScorer {
        FnScorer::new("planted", move |_: &[String], _| {
            MaskDistribution::from_weights(probs.iter().map(|(w, p)| (*w, *p))).map_err(|e| e.to_string())
        })
    }

    fn prompt() -> RenderedPrompt {
        RenderedPrompt {
            text: "it was [MASK]".into(),
            mask_position: 2,
            template_id: 0,
        }
    }

    #[test]
    fn mlm_top_words() {
        let scorer = planted(&[("a", 0.5), ("b", 0.3), ("c", 0.2)]);
        let r = strategy_mlm(&prompt(), &scorer, 2).unwrap();
        assert_eq!(r.words().collect::<Vec<_>>(), ["a", "b"]);
        let r = strategy_mlm(&prompt(), &scorer, 10).unwrap();
        assert_eq!(r.words().collect::<Vec<_>>(), ["a", "b", "c"]);
        let uniform = planted(&[("zeta", 1.0), ("alpha", 1.0), ("mid", 1.0)]);
        let r = strategy_mlm(&prompt(), &uniform, 3).unwrap();
        assert_eq!(r.words().collect::<Vec<_>>(), ["alpha", "mid", "zeta"]);
    }

    #[test]
    fn embedding_ranking() {
        let mut emb = fixture_embeddings();
        emb.insert("p9", vec![0.9, (1.0f64 - 0.81).sqrt()]).unwrap();
        emb.insert("p4", vec![0.4, (1.0f64 - 0.16).sqrt()]).unwrap();
        emb.insert("p7", vec![0.7, (1.0f64 - 0.49).sqrt()]).unwrap();
        let r = strategy_embedding("clickbait", &s(&["p9", "p4", "p7"]), &emb, 2).unwrap();
        assert_eq!(r.words().collect::<Vec<_>>(), ["p9", "p7"]);

        let r = strategy_embedding("clickbait", &s(&["misleading", "clickbait", "nowhere"]), &emb, 5).unwrap();
        assert_eq!(r.words().collect::<Vec<_>>(), ["clickbait", "misleading"]);

        let r = strategy_embedding("clickbait", &s(&["orthogonal", "hyperlink", "misleading"]), &emb, 5).unwrap();
        assert_eq!(r.words().last(), Some("orthogonal"));
    }

    #[test]
    fn frequency_ranking() {
        let lex = FrequencyLexicon::from_pairs([("rare", 1.2), ("common", 5.8)]);
        let r = strategy_frequency(&s(&["rare", "common"]), &lex, 2).unwrap();
        assert_eq!(r.words().collect::<Vec<_>>(), ["common", "rare"]);
        let r = strategy_frequency(&s(&["q", "b", "x"]), &lex, 3).unwrap();
        assert_eq!(r.words().collect::<Vec<_>>(), ["q", "b", "x"]);
        assert!(strategy_frequency(&[], &lex, 3).unwrap().is_empty());
    }

    #[test]
    fn context_ranking() {
        // "good" makes every true token certain; "bad" makes them 1/e-ish.
        let scorer = FnScorer::new("ctx", |t: &[String], i: usize| {
            let p = if t.contains(&"good".to_string()) { 1.0 } else { 0.2 };
            MaskDistribution::from_weights([(t[i].clone(), p), ("<rest>".to_string(), 1.0 - p)])
                .map_err(|e| e.to_string())
        });
        let tokens = s(&["it", "was", "[MASK]", "indeed"]);
        let r = strategy_context(&tokens, 2, &s(&["bad", "good"]), &scorer, 5, 2).unwrap();
        assert_eq!(r.words().collect::<Vec<_>>(), ["good", "bad"]);
        assert_eq!(r.ranked_words[0].1, 0.0);
        assert!(matches!(
            strategy_context(&tokens, 2, &s(&["good"]), &scorer, 5, 0),
            Err(VerbalizerError::ZeroCap)
        ));
    }

    fn result(strategy: Strategy, words: &[&str]) -> StrategyResult {
        StrategyResult {
            strategy,
            ranked_words: words.iter().enumerate().map(|(i, w)| (w.to_string(), -(i as f64))).collect(),
        }
    }

    #[test]
    fn integrate_union_arithmetic() {
        let a: Vec<String> = (0..15).map(|i| format!("a{i:02}")).collect();
        let b: Vec<String> = (0..15).map(|i| format!("b{i:02}")).collect();
        let ar: Vec<&str> = a.iter().map(String::as_str).collect();
        let br: Vec<&str> = b.iter().map(String::as_str).collect();
        let labels = s(&["clickbait", "news"]);
        let v = integrate(
            &[vec![result(Strategy::Concepts, &ar), result(Strategy::MlmPrediction, &br)], vec![]],
            &labels,
        );
        assert_eq!(v.entries(0).len(), 31);
        assert_eq!(v.words(0).next(), Some("clickbait"));
        assert_eq!(v.words(1).collect::<Vec<_>>(), ["news"]);
    }

    #[test]
    fn integrate_dedups_with_provenance_and_orders() {
        let labels = s(&["clickbait", "news"]);
        let v = integrate(
            &[
                vec![
                    result(Strategy::Concepts, &["misleading", "hype"]),
                    result(Strategy::MlmPrediction, &["hype", "misleading", "newsy"]),
                    result(Strategy::Frequency, &["hype"]),
                ],
                vec![result(Strategy::Concepts, &["report"])],
            ],
            &labels,
        );
        let words: Vec<&str> = v.words(0).collect();
        assert_eq!(words, ["clickbait", "hype", "misleading"]);
        assert_eq!(v.entries(0)[1].provenance.len(), 3);
        assert_eq!(v.words(1).collect::<Vec<_>>(), ["news", "report"]);
    }

    #[test]
    fn vote_threshold_mode() {
        let labels = s(&["clickbait"]);
        let v = integrate_with(
            &[vec![
                result(Strategy::Concepts, &["a", "b"]),
                result(Strategy::MlmPrediction, &["b"]),
            ]],
            &labels,
            IntegrationMode::MinVotes(2),
            15,
        );
        assert_eq!(v.words(0).collect::<Vec<_>>(), ["clickbait", "b"]);
    }

    #[test]
    fn tsv_round_trip_and_hash() {
        let labels = s(&["news", "clickbait"]);
        let v = integrate(
            &[
                vec![result(Strategy::Frequency, &["report", "story"])],
                vec![result(Strategy::Concepts, &["misleading"]), result(Strategy::Context, &["misleading"])],
            ],
            &labels,
        );
        let text = v.to_tsv();
        assert!(text.contains("clickbait\tmisleading\t1\tconcepts,context\n"));
        let back = Verbalizer::from_tsv(&text).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.content_hash(), v.content_hash());
        assert!(Verbalizer::from_tsv("x\ty\n").is_err());
    }

    #[test]
    fn strategy_names_parse() {
        assert_eq!("mlm".parse::<Strategy>().unwrap(), Strategy::MlmPrediction);
        assert_eq!("context".parse::<Strategy>().unwrap(), Strategy::Context);
        assert!("nope".parse::<Strategy>().is_err());
    }
}
