//! Candidate summary generation.
//!
//! A [`SummaryGenerator`] turns an article body into `m` candidate summaries.
//! The built-in [`ExtractiveGenerator`] is a deterministic lead-window
//! extractor; neural generators plug in through the same trait, either
//! in-process or as an external program via [`CommandGenerator`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text_metrics::tokenize;

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("document content is empty")]
    EmptyContent,
    #[error("generator `{tag}` failed: {message}")]
    Backend { tag: String, message: String },
    #[error("generator `{tag}` returned no candidates")]
    NoCandidates { tag: String },
    #[error("unknown summary generator `{0}`")]
    UnknownBackend(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("candidate record I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("candidate record on line {line}: {source}")]
    Record {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodingMode {
    Beam,
    DiverseBeam,
    ExtractiveFallback,
}

impl DecodingMode {
    pub fn name(self) -> &'static str {
        match self {
            DecodingMode::Beam => "beam",
            DecodingMode::DiverseBeam => "diverse_beam",
            DecodingMode::ExtractiveFallback => "extractive_fallback",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::Beam, Self::DiverseBeam, Self::ExtractiveFallback]
            .into_iter()
            .find(|m| m.name() == name)
    }
}

impl fmt::Display for DecodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub num_candidates: usize,
    pub decoding_mode: DecodingMode,
    pub max_summary_words: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_candidates: 8,
            decoding_mode: DecodingMode::ExtractiveFallback,
            max_summary_words: 41,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SummaryError> {
        if self.num_candidates == 0 {
            return Err(SummaryError::InvalidConfig("num_candidates must be >= 1".into()));
        }
        if self.max_summary_words == 0 {
            return Err(SummaryError::InvalidConfig("max_summary_words must be >= 1".into()));
        }
        Ok(())
    }
}

/// Candidate summaries for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryCandidateSet {
    #[serde(rename = "id")]
    pub source_id: String,
    pub generator_tag: String,
    pub candidates: Vec<String>,
}

/// Backend that produces raw candidate strings.
pub trait SummaryGenerator: Send + Sync {
    fn name(&self) -> &str;

    /// Whether `generate` may be called from several threads at once.
    fn concurrent_safe(&self) -> bool {
        true
    }

    fn generate(
        &self,
        content: &str,
        num_candidates: usize,
        mode: DecodingMode,
        max_words: usize,
        seed: u64,
    ) -> Result<Vec<String>, String>;
}

/// Splits on `.`, `!` and `?`, keeping the terminator with its sentence.
pub fn split_sentences(content: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in content.chars() {
        cur.push(ch);
        if matches!(ch, '.' | '!' | '?') {
            push_sentence(&mut out, &cur);
            cur.clear();
        }
    }
    push_sentence(&mut out, &cur);
    out
}

fn push_sentence(out: &mut Vec<String>, raw: &str) {
    let s = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    // Lone terminators ("...", "?!") are not sentences.
    if s.chars().any(char::is_alphanumeric) {
        out.push(s);
    }
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Lead-window extracts: candidate `i` starts at sentence `i` and greedily
/// appends following sentences while the total stays within `max_words`.
/// The starting sentence is always kept, whatever its length.
pub fn extractive_fallback(content: &str, m: usize, max_words: usize) -> Vec<String> {
    let sentences = split_sentences(content);
    let lengths: Vec<usize> = sentences.iter().map(|s| word_count(s)).collect();
    (0..sentences.len().min(m))
        .map(|start| {
            let mut words = lengths[start];
            let mut end = start + 1;
            while end < sentences.len() && words + lengths[end] <= max_words {
                words += lengths[end];
                end += 1;
            }
            sentences[start..end].join(" ")
        })
        .collect()
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ExtractiveGenerator;

impl SummaryGenerator for ExtractiveGenerator {
    fn name(&self) -> &str {
        "extractive"
    }

    fn generate(
        &self,
        content: &str,
        num_candidates: usize,
        mode: DecodingMode,
        max_words: usize,
        _seed: u64,
    ) -> Result<Vec<String>, String> {
        if mode != DecodingMode::ExtractiveFallback {
            return Err(format!("decoding mode `{mode}` needs a neural backend"));
        }
        Ok(extractive_fallback(content, num_candidates, max_words))
    }
}

/// Runs an external program per document. The request is one JSON object on
/// stdin (`content`, `num_candidates`, `mode`, `max_words`, `seed`) and the
/// program answers with a JSON array of strings on stdout.
#[derive(Debug, Clone)]
pub struct CommandGenerator {
    name: String,
    program: String,
    args: Vec<String>,
}

impl CommandGenerator {
    pub fn new(name: impl Into<String>, program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            name: name.into(),
            program: program.into(),
            args,
        }
    }
}

#[derive(Serialize)]
struct CommandRequest<'a> {
    content: &'a str,
    num_candidates: usize,
    mode: DecodingMode,
    max_words: usize,
    seed: u64,
}

impl SummaryGenerator for CommandGenerator {
    fn name(&self) -> &str {
        &self.name
    }

    fn concurrent_safe(&self) -> bool {
        false
    }

    fn generate(
        &self,
        content: &str,
        num_candidates: usize,
        mode: DecodingMode,
        max_words: usize,
        seed: u64,
    ) -> Result<Vec<String>, String> {
        let request = serde_json::to_vec(&CommandRequest {
            content,
            num_candidates,
            mode,
            max_words,
            seed,
        })
        .map_err(|e| e.to_string())?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("spawning {}: {e}", self.program))?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(&request)
            .map_err(|e| e.to_string())?;
        let output = child.wait_with_output().map_err(|e| e.to_string())?;
        if !output.status.success() {
            return Err(format!(
                "{} exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ));
        }
        serde_json::from_slice(&output.stdout).map_err(|e| format!("bad generator output: {e}"))
    }
}

/// Name-keyed generator lookup.
#[derive(Clone, Default)]
pub struct GeneratorRegistry {
    backends: BTreeMap<String, Arc<dyn SummaryGenerator>>,
}

impl GeneratorRegistry {
    pub fn with_builtins() -> Self {
        let mut reg = Self::default();
        reg.register(Arc::new(ExtractiveGenerator));
        reg
    }

    pub fn register(&mut self, backend: Arc<dyn SummaryGenerator>) {
        self.backends.insert(backend.name().to_owned(), backend);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SummaryGenerator>, SummaryError> {
        self.backends
            .get(name)
            .cloned()
            .ok_or_else(|| SummaryError::UnknownBackend(name.to_owned()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.backends.keys().map(String::as_str)
    }
}

/// Wraps a backend and serializes calls to it when it is not thread-safe.
pub struct SummaryEngine {
    backend: Arc<dyn SummaryGenerator>,
    gate: Mutex<()>,
}

impl SummaryEngine {
    pub fn new(backend: Arc<dyn SummaryGenerator>) -> Self {
        Self {
            backend,
            gate: Mutex::new(()),
        }
    }

    pub fn backend(&self) -> &dyn SummaryGenerator {
        self.backend.as_ref()
    }

    pub fn generate(
        &self,
        source_id: &str,
        content: &str,
        config: &GeneratorConfig,
    ) -> Result<SummaryCandidateSet, SummaryError> {
        if self.backend.concurrent_safe() {
            generate_candidates(source_id, content, config, self.backend.as_ref())
        } else {
            let _guard = self.gate.lock().unwrap_or_else(|p| p.into_inner());
            generate_candidates(source_id, content, config, self.backend.as_ref())
        }
    }
}

pub fn generator_tag(backend: &dyn SummaryGenerator, mode: DecodingMode) -> String {
    format!("{}:{}", backend.name(), mode)
}

/// Produces up to `config.num_candidates` distinct candidates, keeping the
/// backend's order.
pub fn generate_candidates(
    source_id: &str,
    content: &str,
    config: &GeneratorConfig,
    backend: &dyn SummaryGenerator,
) -> Result<SummaryCandidateSet, SummaryError> {
    config.validate()?;
    if tokenize(content).is_empty() {
        return Err(SummaryError::EmptyContent);
    }
    let tag = generator_tag(backend, config.decoding_mode);
    let raw = backend
        .generate(
            content,
            config.num_candidates,
            config.decoding_mode,
            config.max_summary_words,
            config.seed,
        )
        .map_err(|message| SummaryError::Backend {
            tag: tag.clone(),
            message,
        })?;
    let mut seen = HashSet::new();
    let candidates: Vec<String> = raw
        .into_iter()
        .filter(|c| !c.trim().is_empty() && seen.insert(c.clone()))
        .take(config.num_candidates)
        .collect();
    if candidates.is_empty() {
        return Err(SummaryError::NoCandidates { tag });
    }
    Ok(SummaryCandidateSet {
        source_id: source_id.to_owned(),
        generator_tag: tag,
        candidates,
    })
}

pub fn write_candidate_sets<W: Write>(
    mut out: W,
    sets: &[SummaryCandidateSet],
) -> Result<(), SummaryError> {
    for set in sets {
        serde_json::to_writer(&mut out, set).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_candidate_sets(path: &Path) -> Result<Vec<SummaryCandidateSet>, SummaryError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| SummaryError::Record { line: i + 1, source })?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(prefix: &str, n: usize) -> String {
        (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn greedy_windows() {
        let content = format!("{}. {}. {}.", words("a", 10), words("b", 10), words("c", 10));
        let out = extractive_fallback(&content, 2, 25);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], format!("{}. {}.", words("a", 10), words("b", 10)));
        assert_eq!(out[1], format!("{}. {}.", words("b", 10), words("c", 10)));
    }

    #[test]
    fn single_sentence_once() {
        assert_eq!(extractive_fallback("Only one here.", 5, 41), vec!["Only one here."]);
    }

    #[test]
    fn max_words_floor_keeps_one_sentence() {
        let out = extractive_fallback("First long sentence! Second one?", 2, 1);
        assert_eq!(out, vec!["First long sentence!", "Second one?"]);
    }

    #[test]
    fn engine_generates_distinct_lead_extracts() {
        let content = "One a. Two b. Three c. Four d. Five e.";
        let config = GeneratorConfig {
            num_candidates: 4,
            max_summary_words: 2,
            ..Default::default()
        };
        let set = generate_candidates("d1", content, &config, &ExtractiveGenerator).unwrap();
        assert_eq!(set.candidates, vec!["One a.", "Two b.", "Three c.", "Four d."]);
        assert_eq!(set.generator_tag, "extractive:extractive_fallback");
    }

    #[test]
    fn single_sentence_any_m() {
        let set = generate_candidates(
            "d",
            "Just this sentence",
            &GeneratorConfig::default(),
            &ExtractiveGenerator,
        )
        .unwrap();
        assert_eq!(set.candidates, vec!["Just this sentence"]);
    }

    #[test]
    fn empty_content_rejected() {
        let err = generate_candidates("d", "", &GeneratorConfig::default(), &ExtractiveGenerator);
        assert!(matches!(err, Err(SummaryError::EmptyContent)));
        let err = generate_candidates("d", " ... ", &GeneratorConfig::default(), &ExtractiveGenerator);
        assert!(matches!(err, Err(SummaryError::EmptyContent)));
    }

    struct Repeating;
    impl SummaryGenerator for Repeating {
        fn name(&self) -> &str {
            "repeat"
        }
        fn generate(&self, _: &str, m: usize, _: DecodingMode, _: usize, _: u64) -> Result<Vec<String>, String> {
            Ok(vec!["same".to_owned(); m + 2])
        }
    }

    struct Failing;
    impl SummaryGenerator for Failing {
        fn name(&self) -> &str {
            "broken"
        }
        fn generate(&self, _: &str, _: usize, _: DecodingMode, _: usize, _: u64) -> Result<Vec<String>, String> {
            Err("out of memory".into())
        }
    }

    #[test]
    fn duplicates_removed_and_failures_tagged() {
        let set = generate_candidates("d", "text here", &GeneratorConfig::default(), &Repeating).unwrap();
        assert_eq!(set.candidates, vec!["same"]);
        match generate_candidates("d", "text here", &GeneratorConfig::default(), &Failing) {
            Err(SummaryError::Backend { tag, message }) => {
                assert_eq!(tag, "broken:extractive_fallback");
                assert_eq!(message, "out of memory");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn extractive_rejects_neural_modes() {
        let config = GeneratorConfig {
            decoding_mode: DecodingMode::Beam,
            ..Default::default()
        };
        assert!(matches!(
            generate_candidates("d", "Some text.", &config, &ExtractiveGenerator),
            Err(SummaryError::Backend { .. })
        ));
    }

    #[test]
    fn registry_resolves_by_name() {
        let reg = GeneratorRegistry::with_builtins();
        assert_eq!(reg.get("extractive").unwrap().name(), "extractive");
        assert!(matches!(reg.get("pegasus"), Err(SummaryError::UnknownBackend(_))));
    }

    #[cfg(unix)]
    #[test]
    fn command_generator_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("gen.sh");
        std::fs::write(&script, "#!/bin/sh\ncat > /dev/null\necho '[\"alpha\", \"beta\", \"alpha\"]'\n").unwrap();
        let gen = CommandGenerator::new("script", "sh", vec![script.display().to_string()]);
        let config = GeneratorConfig {
            decoding_mode: DecodingMode::DiverseBeam,
            ..Default::default()
        };
        let engine = SummaryEngine::new(Arc::new(gen));
        let set = engine.generate("d", "Body text.", &config).unwrap();
        assert_eq!(set.candidates, vec!["alpha", "beta"]);
        assert_eq!(set.generator_tag, "script:diverse_beam");
    }

    #[test]
    fn candidate_records_round_trip() {
        let sets = vec![SummaryCandidateSet {
            source_id: "x1".into(),
            generator_tag: "extractive:extractive_fallback".into(),
            candidates: vec!["a.".into(), "b.".into()],
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_candidate_sets(std::fs::File::create(&path).unwrap(), &sets).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"id\":\"x1\""));
        assert_eq!(read_candidate_sets(&path).unwrap(), sets);
    }
}
