//! Run configuration: defaults, then the TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use clickbait_core::detector::DetectorTrainConfig;
use clickbait_core::eval_harness::{SummaryMode, SweepAxis, DEFAULT_CONTENT_WORDS};
use clickbait_core::reranker::RerankerHyperParams;
use clickbait_core::summary_engine::{DecodingMode, GeneratorConfig};
use clickbait_core::verbalizer_builder::VerbalizerConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const RESOURCE_ROOT_ENV: &str = "CLICKBAIT_RESOURCE_ROOT";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    /// `webis`, `news_clickbait` or `jsonl`; guessed from the file otherwise.
    pub dataset_format: Option<String>,
    /// Separate Webis truth file.
    pub truth: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub concepts: Option<PathBuf>,
    pub scorer: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub summaries: Option<PathBuf>,
    pub reranker: Option<PathBuf>,
    pub rerank_corpus: Option<PathBuf>,
    pub verbalizer: Option<PathBuf>,
    pub head: Option<PathBuf>,
    pub detections: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub backend: String,
    /// Program and arguments of an external generator registered under
    /// `backend`.
    pub command: Vec<String>,
    pub num_candidates: usize,
    pub decoding_mode: DecodingMode,
    pub max_summary_words: usize,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        Self {
            backend: "extractive".into(),
            command: Vec::new(),
            num_candidates: g.num_candidates,
            decoding_mode: g.decoding_mode,
            max_summary_words: g.max_summary_words,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Name used in report rows; the dataset file stem otherwise.
    pub name: Option<String>,
    pub shots: usize,
    /// Empty means five consecutive seeds starting at the global seed.
    pub seeds: Vec<u64>,
    pub modes: Vec<SummaryMode>,
    pub content_words: usize,
    pub sweep_axis: SweepAxis,
    pub grid: Vec<f64>,
    pub plot_metric: String,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            name: None,
            shots: 5,
            seeds: Vec::new(),
            modes: vec![SummaryMode::Summary],
            content_words: DEFAULT_CONTENT_WORDS,
            sweep_axis: SweepAxis::LearningRate,
            grid: vec![1e-5, 2e-5, 4e-5, 6e-5, 8e-5],
            plot_metric: "accuracy".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub resource_root: Option<PathBuf>,
    pub out: PathBuf,
    /// Mask scorer backend: `fixture` or `uniform`.
    pub backend: String,
    pub template: u32,
    pub labels: Vec<String>,
    pub paths: Paths,
    pub generator: GeneratorSection,
    pub reranker: RerankerHyperParams,
    pub verbalizer: VerbalizerConfig,
    pub detector: DetectorTrainConfig,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            resource_root: None,
            out: PathBuf::from("out"),
            backend: "fixture".into(),
            template: 1,
            labels: vec!["news".into(), "clickbait".into()],
            paths: Paths::default(),
            generator: GeneratorSection::default(),
            reranker: RerankerHyperParams::default(),
            verbalizer: VerbalizerConfig::default(),
            detector: DetectorTrainConfig::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|_| CliError::Missing {
            what: "config file",
            path: path.to_owned(),
        })?;
        toml::from_str(&text).map_err(|e| CliError::Resource {
            what: "config file",
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_else(|e| format!("# config not serializable: {e}\n"))
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.experiment.seeds.is_empty() {
            (0..5).map(|i| self.seed.wrapping_add(i)).collect()
        } else {
            self.experiment.seeds.clone()
        }
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            num_candidates: self.generator.num_candidates,
            decoding_mode: self.generator.decoding_mode,
            max_summary_words: self.generator.max_summary_words,
            seed: clickbait_core::seed::derive_seed(self.seed, "generator"),
        }
    }

    /// Resolves a resource path. Relative paths that do not exist from the
    /// working directory are looked up under the resource root.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() || path.exists() {
            return path.to_owned();
        }
        match &self.resource_root {
            Some(root) => root.join(path),
            None => path.to_owned(),
        }
    }

    /// Resolved path of a configured resource that must exist.
    pub fn require(&self, path: &Option<PathBuf>, what: &'static str) -> Result<PathBuf, CliError> {
        let path = path.as_ref().ok_or_else(|| CliError::Usage(format!("no {what} configured")))?;
        let resolved = self.resolve(path);
        if resolved.exists() {
            Ok(resolved)
        } else {
            Err(CliError::Missing { what, path: resolved })
        }
    }

    /// Resolved path of an optional resource; an explicitly configured path
    /// must exist.
    pub fn optional(&self, path: &Option<PathBuf>, what: &'static str) -> Result<Option<PathBuf>, CliError> {
        match path {
            None => Ok(None),
            Some(_) => self.require(path, what).map(Some),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.detector.learning_rate, 4e-5);
        assert_eq!(c.detector.batch_size, 32);
        assert_eq!(c.detector.epochs, 10);
        assert_eq!(c.detector.dropout, 0.5);
        assert_eq!(c.detector.weight_decay, 1e-5);
        assert_eq!(c.verbalizer.n_a, 15);
        assert_eq!(c.verbalizer.window, 5);
        assert_eq!(c.seeds(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.paths.dataset = Some("docs.jsonl".into());
        c.experiment.modes = SummaryMode::ALL.to_vec();
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c: RunConfig = toml::from_str("template = 3\n[detector]\nlearning_rate = 0.01\n").unwrap();
        assert_eq!(c.template, 3);
        assert_eq!(c.detector.learning_rate, 0.01);
        assert_eq!(c.detector.batch_size, 32);
        assert!(toml::from_str::<RunConfig>("bogus = 1\n").is_err());
    }
}
