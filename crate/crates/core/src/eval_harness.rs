//! Evaluation metrics, experiment runs, ablations and parameter sweeps.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{sample_few_shot, Document, LABEL_NAMES};
use crate::detector::{score_batch, train_head, DetectionRecord, DetectorTrainConfig};
use crate::lm_backend::MaskScorer;
use crate::prompt_templates::{RenderedPrompt, TemplateSet};
use crate::seed::derive_seed;
use crate::verbalizer_builder::{Strategy, Verbalizer};

/// Label treated as positive by the binary metrics.
pub const POSITIVE_LABEL: &str = "clickbait";

/// Default word budget for the full-content ablation.
pub const DEFAULT_CONTENT_WORDS: usize = 200;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no documents to evaluate")]
    Empty,
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("experiment needs at least one seed")]
    NoSeeds,
    #[error("experiment needs at least one mode")]
    NoModes,
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("verbalizer has no label `{0}`")]
    MissingLabel(String),
    #[error("record `{id}` has no gold label")]
    MissingGold { id: String },
    #[error("no summary for document `{0}`")]
    MissingSummary(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    /// Counts with `true` as the positive class.
    pub fn from_predictions(predicted: &[bool], gold: &[bool]) -> Result<Self, EvalError> {
        if predicted.len() != gold.len() {
            return Err(EvalError::LengthMismatch {
                predictions: predicted.len(),
                labels: gold.len(),
            });
        }
        let mut c = Self::default();
        for (&p, &g) in predicted.iter().zip(gold) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same counts with the other class as positive.
    pub fn flipped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Binary metrics for the positive class. Zero denominators give zero.
pub fn metrics(counts: &ConfusionCounts) -> Result<Metrics, EvalError> {
    if counts.total() == 0 {
        return Err(EvalError::Empty);
    }
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    Ok(Metrics {
        accuracy: ratio(counts.tp + counts.tn, counts.total()),
        precision,
        recall,
        f1: harmonic(precision, recall),
    })
}

/// Per-class precision, recall and F1 averaged with class support as weight.
pub fn weighted_metrics(counts: &ConfusionCounts) -> Result<Metrics, EvalError> {
    let pos = metrics(counts)?;
    let neg = metrics(&counts.flipped())?;
    let total = counts.total() as f64;
    let w_pos = (counts.tp + counts.fn_) as f64 / total;
    let w_neg = 1.0 - w_pos;
    Ok(Metrics {
        accuracy: pos.accuracy,
        precision: w_pos * pos.precision + w_neg * neg.precision,
        recall: w_pos * pos.recall + w_neg * neg.recall,
        f1: w_pos * pos.f1 + w_neg * neg.f1,
    })
}

/// Confusion counts over detection records carrying gold labels.
pub fn counts_from_records(records: &[DetectionRecord]) -> Result<ConfusionCounts, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut predicted = Vec::with_capacity(records.len());
    let mut gold = Vec::with_capacity(records.len());
    for r in records {
        let g = r.gold.as_deref().ok_or_else(|| EvalError::MissingGold { id: r.id.clone() })?;
        predicted.push(r.predicted == POSITIVE_LABEL);
        gold.push(g == POSITIVE_LABEL);
    }
    ConfusionCounts::from_predictions(&predicted, &gold)
}

/// What fills the summary slot of the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMode {
    /// The selected generated summary.
    Summary,
    /// Headline alone.
    NoSummary,
    /// Article body truncated to a word budget.
    FullContent,
}

impl SummaryMode {
    pub const ALL: [SummaryMode; 3] = [SummaryMode::Summary, SummaryMode::NoSummary, SummaryMode::FullContent];

    pub fn name(self) -> &'static str {
        match self {
            SummaryMode::Summary => "summary",
            SummaryMode::NoSummary => "no_summary",
            SummaryMode::FullContent => "full_content",
        }
    }

    /// Row label used in reports.
    pub fn row_label(self) -> &'static str {
        match self {
            SummaryMode::Summary => "Ours",
            SummaryMode::NoSummary => "-summary",
            SummaryMode::FullContent => "original news",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.trim() {
            "summary" | "Ours" | "ours" => Some(SummaryMode::Summary),
            "no_summary" | "-summary" | "no-summary" => Some(SummaryMode::NoSummary),
            "full_content" | "full-content" | "original news" | "original_news" => Some(SummaryMode::FullContent),
            _ => None,
        }
    }
}

/// First `budget` whitespace tokens of `text`.
pub fn truncate_words(text: &str, budget: usize) -> String {
    text.split_whitespace().take(budget).collect::<Vec<_>>().join(" ")
}

/// Renders the prompt for one document under a mode. Returns the prompt and
/// whether a summary artifact was read.
pub fn render_for_mode(
    doc: &Document,
    mode: SummaryMode,
    template: &crate::prompt_templates::PromptTemplate,
    summaries: Option<&HashMap<String, String>>,
    content_words: usize,
    mask_token: &str,
) -> Result<(RenderedPrompt, bool), crate::Error> {
    match mode {
        SummaryMode::NoSummary => Ok((template.render_headline_only(&doc.headline, mask_token)?, false)),
        SummaryMode::FullContent => {
            let body = truncate_words(&doc.content, content_words);
            let prompt = if body.is_empty() {
                template.render_headline_only(&doc.headline, mask_token)?
            } else {
                template.render(&doc.headline, &body, mask_token)?
            };
            Ok((prompt, false))
        }
        SummaryMode::Summary => {
            let summary = summaries
                .and_then(|m| m.get(&doc.id))
                .ok_or_else(|| EvalError::MissingSummary(doc.id.clone()))?;
            Ok((template.render(&doc.headline, summary, mask_token)?, true))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    LearningRate,
    BatchSize,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::LearningRate => "learning_rate",
            SweepAxis::BatchSize => "batch_size",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "learning_rate" | "lr" => Some(SweepAxis::LearningRate),
            "batch_size" | "batch" => Some(SweepAxis::BatchSize),
            _ => None,
        }
    }

    pub fn apply(self, config: &mut DetectorTrainConfig, value: f64) {
        match self {
            SweepAxis::LearningRate => config.learning_rate = value,
            SweepAxis::BatchSize => config.batch_size = value.round().max(1.0) as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub dataset: String,
    pub shots: usize,
    pub seeds: Vec<u64>,
    pub template_id: u32,
    pub strategies: Vec<Strategy>,
    pub modes: Vec<SummaryMode>,
    pub content_words: usize,
    pub train: DetectorTrainConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            dataset: "dataset".into(),
            shots: 5,
            seeds: vec![0],
            template_id: 1,
            strategies: Strategy::ALL.to_vec(),
            modes: vec![SummaryMode::Summary],
            content_words: DEFAULT_CONTENT_WORDS,
            train: DetectorTrainConfig::default(),
        }
    }
}

/// Everything a run needs besides the experiment description.
pub struct PipelineComponents<'a> {
    pub documents: &'a [Document],
    /// Selected summary per document id.
    pub summaries: Option<&'a HashMap<String, String>>,
    pub templates: &'a TemplateSet,
    pub verbalizer: &'a Verbalizer,
    pub scorer: &'a dyn MaskScorer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub shots: usize,
    pub mode: String,
    pub template_id: u32,
    /// `None` for the mean row.
    pub seed: Option<u64>,
    pub metrics: Option<Metrics>,
    pub weighted: Option<Metrics>,
    pub counts: Option<ConfusionCounts>,
    pub num_test: usize,
    pub summaries_used: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    /// At least one seed failed.
    pub partial: bool,
}

impl Report {
    pub fn mean_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.seed.is_none())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "dataset\tshots\tmode\ttemplate\tseed\taccuracy\tprecision\trecall\tf1\tw_precision\tw_recall\tw_f1\tn_test\terror\n",
        );
        for r in &self.rows {
            let seed = r.seed.map_or_else(|| "mean".to_owned(), |s| s.to_string());
            let m = |x: Option<Metrics>, f: fn(&Metrics) -> f64| x.map_or_else(|| "NA".to_owned(), |m| format!("{:.4}", f(&m)));
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.dataset,
                r.shots,
                r.mode,
                r.template_id,
                seed,
                m(r.metrics, |m| m.accuracy),
                m(r.metrics, |m| m.precision),
                m(r.metrics, |m| m.recall),
                m(r.metrics, |m| m.f1),
                m(r.weighted, |m| m.precision),
                m(r.weighted, |m| m.recall),
                m(r.weighted, |m| m.f1),
                r.num_test,
                r.error.as_deref().unwrap_or("")
            );
        }
        out
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), EvalError> {
        for r in &self.rows {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Verbalizer label index for each corpus label (0 news, 1 clickbait).
fn label_indices(verbalizer: &Verbalizer) -> Result<[usize; 2], EvalError> {
    let find = |name: &str| {
        verbalizer
            .labels()
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| EvalError::MissingLabel(name.to_owned()))
    };
    Ok([find(LABEL_NAMES[0])?, find(LABEL_NAMES[1])?])
}

struct SeedOutcome {
    counts: ConfusionCounts,
    records: Vec<DetectionRecord>,
    summaries_used: usize,
}

fn run_seed(
    spec: &ExperimentSpec,
    train_config: &DetectorTrainConfig,
    mode: SummaryMode,
    seed: u64,
    c: &PipelineComponents<'_>,
) -> Result<SeedOutcome, crate::Error> {
    let idx = label_indices(c.verbalizer)?;
    let template = c.templates.get(spec.template_id)?;
    let split = sample_few_shot(c.documents, spec.shots, seed)?;
    let mask = c.scorer.mask_token();
    let mut summaries_used = 0;
    let mut render = |docs: &[Document]| -> Result<Vec<RenderedPrompt>, crate::Error> {
        docs.iter()
            .map(|d| {
                let (p, used) = render_for_mode(d, mode, template, c.summaries, spec.content_words, mask)?;
                summaries_used += usize::from(used);
                Ok(p)
            })
            .collect()
    };
    let train_prompts = render(&split.train)?;
    let test_prompts = render(&split.test)?;
    if test_prompts.is_empty() {
        return Err(EvalError::Empty.into());
    }

    let label_of = |d: &Document| idx[usize::from(d.label.unwrap_or(0))];
    let train_scores = score_batch(&train_prompts, c.verbalizer, c.scorer)
        .into_iter()
        .map(|r| r.map(|d| d.per_label_score))
        .collect::<Result<Vec<_>, _>>()?;
    let train_labels: Vec<usize> = split.train.iter().map(label_of).collect();
    let mut config = train_config.clone();
    config.seed = derive_seed(seed, "detector");
    let head = train_head(&train_scores, &train_labels, c.verbalizer.labels().len(), &config)?.head;

    let hash = c.verbalizer.content_hash();
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    let mut records = Vec::new();
    for (doc, result) in split.test.iter().zip(score_batch(&test_prompts, c.verbalizer, c.scorer)) {
        let result = result?;
        let p = head.predict(&result.per_label_score);
        let g = label_of(doc);
        predicted.push(p == idx[1]);
        gold.push(g == idx[1]);
        records.push(DetectionRecord {
            id: doc.id.clone(),
            scores: c.verbalizer.labels().iter().cloned().zip(result.per_label_score).collect(),
            predicted: c.verbalizer.labels()[p].clone(),
            gold: Some(c.verbalizer.labels()[g].clone()),
            template_id: spec.template_id,
            verbalizer_hash: hash.clone(),
            mode: Some(mode.row_label().to_owned()),
        });
    }
    Ok(SeedOutcome {
        counts: ConfusionCounts::from_predictions(&predicted, &gold)?,
        records,
        summaries_used,
    })
}

fn mean_metrics(all: &[Metrics]) -> Option<Metrics> {
    if all.is_empty() {
        return None;
    }
    let n = all.len() as f64;
    let avg = |f: fn(&Metrics) -> f64| all.iter().map(f).sum::<f64>() / n;
    Some(Metrics {
        accuracy: avg(|m| m.accuracy),
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        f1: avg(|m| m.f1),
    })
}

/// Per-seed and mean report rows plus the detection records of every
/// successful seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: Report,
    pub records: Vec<DetectionRecord>,
}

/// Runs every (mode, seed) pair of the experiment. Seeds run in parallel when the
/// scorer allows it; rows come back in input order, each mode's seed rows
/// followed by its mean row. A failing seed yields a row with its error and
/// marks the report partial.
pub fn run_experiment(spec: &ExperimentSpec, components: &PipelineComponents<'_>) -> Result<ExperimentOutput, EvalError> {
    run_with_config(spec, &spec.train, components)
}

fn run_with_config(
    spec: &ExperimentSpec,
    train_config: &DetectorTrainConfig,
    c: &PipelineComponents<'_>,
) -> Result<ExperimentOutput, EvalError> {
    if spec.seeds.is_empty() {
        return Err(EvalError::NoSeeds);
    }
    if spec.modes.is_empty() {
        return Err(EvalError::NoModes);
    }
    let mut modes = spec.modes.clone();
    modes.dedup();
    let jobs: Vec<(SummaryMode, u64)> = modes
        .iter()
        .flat_map(|m| spec.seeds.iter().map(move |s| (*m, *s)))
        .collect();
    let run = |&(mode, seed): &(SummaryMode, u64)| run_seed(spec, train_config, mode, seed, c);
    let outcomes: Vec<_> = if c.scorer.concurrent_safe() {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };

    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut partial = false;
    for mode in &modes {
        let mut ok = Vec::new();
        let mut weighted = Vec::new();
        for ((m, seed), outcome) in jobs.iter().zip(&outcomes) {
            if m != mode {
                continue;
            }
            let base = ReportRow {
                dataset: spec.dataset.clone(),
                shots: spec.shots,
                mode: mode.row_label().to_owned(),
                template_id: spec.template_id,
                seed: Some(*seed),
                metrics: None,
                weighted: None,
                counts: None,
                num_test: 0,
                summaries_used: 0,
                error: None,
            };
            match outcome {
                Ok(o) => {
                    let bin = metrics(&o.counts)?;
                    let w = weighted_metrics(&o.counts)?;
                    ok.push(bin);
                    weighted.push(w);
                    records.extend(o.records.iter().cloned());
                    rows.push(ReportRow {
                        metrics: Some(bin),
                        weighted: Some(w),
                        counts: Some(o.counts),
                        num_test: o.counts.total(),
                        summaries_used: o.summaries_used,
                        ..base
                    });
                }
                Err(e) => {
                    partial = true;
                    log::warn!("seed {seed} mode {} failed: {e}", mode.row_label());
                    rows.push(ReportRow {
                        error: Some(e.to_string()),
                        ..base
                    });
                }
            }
        }
        let seed_rows = &rows[rows.len() - spec.seeds.len()..];
        rows.push(ReportRow {
            dataset: spec.dataset.clone(),
            shots: spec.shots,
            mode: mode.row_label().to_owned(),
            template_id: spec.template_id,
            seed: None,
            metrics: mean_metrics(&ok),
            weighted: mean_metrics(&weighted),
            counts: None,
            num_test: seed_rows.iter().map(|r| r.num_test).sum(),
            summaries_used: seed_rows.iter().map(|r| r.summaries_used).sum(),
            error: (ok.len() < spec.seeds.len()).then(|| format!("{} of {} seeds failed", spec.seeds.len() - ok.len(), spec.seeds.len())),
        });
    }
    Ok(ExperimentOutput {
        report: Report { rows, partial },
        records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub report: Report,
}

/// One experiment per grid value with everything else fixed.
pub fn sweep(
    spec: &ExperimentSpec,
    axis: SweepAxis,
    grid: &[f64],
    components: &PipelineComponents<'_>,
) -> Result<Vec<SweepPoint>, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    grid.iter()
        .map(|&value| {
            let mut config = spec.train.clone();
            axis.apply(&mut config, value);
            let report = run_with_config(spec, &config, components)?.report;
            Ok(SweepPoint { value, report })
        })
        .collect()
}

/// Two-column plot data: parameter value and the mean of `metric` over the
/// first mode's seeds (`NA` when every seed failed).
pub fn plot_data(axis: SweepAxis, points: &[SweepPoint], metric: &str) -> String {
    let mut out = format!("{}\t{metric}\n", axis.name());
    for p in points {
        let value = p.report.mean_rows().next().and_then(|r| r.metrics).map(|m| match metric {
            "precision" => m.precision,
            "recall" => m.recall,
            "f1" => m.f1,
            _ => m.accuracy,
        });
        let _ = match value {
            Some(v) => writeln!(out, "{}\t{v:.6}", p.value),
            None => writeln!(out, "{}\tNA", p.value),
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm_backend::{FnScorer, MaskDistribution};
    use proptest::prelude::*;

    fn counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> ConfusionCounts {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    #[test]
    fn metric_examples() {
        let m = metrics(&counts(5, 0, 5, 0)).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        let m = metrics(&counts(1, 1, 1, 1)).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (0.5, 0.5, 0.5, 0.5));
        let m = metrics(&counts(0, 0, 4, 0)).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 0.0, 0.0, 0.0));
        assert!(matches!(metrics(&counts(0, 0, 0, 0)), Err(EvalError::Empty)));
    }

    #[test]
    fn weighted_recall_equals_accuracy() {
        let c = counts(3, 2, 4, 1);
        let w = weighted_metrics(&c).unwrap();
        assert!((w.recall - w.accuracy).abs() < 1e-12);
    }

    #[test]
    fn mode_names() {
        for m in SummaryMode::ALL {
            assert_eq!(SummaryMode::from_name(m.name()), Some(m));
            assert_eq!(SummaryMode::from_name(m.row_label()), Some(m));
        }
        assert_eq!(truncate_words("a b  c d", 2), "a b");
    }

    fn corpus() -> Vec<Document> {
        (0..16)
            .map(|i| Document {
                id: format!("d{i}"),
                headline: if i % 2 == 0 { format!("you won't believe {i}") } else { format!("council report {i}") },
                content: format!("body text {i}"),
                label: Some((i % 2 == 0) as u8),
                truth_mean: None,
            })
            .collect()
    }

    fn planted() -> impl MaskScorer {
        FnScorer::new("planted", |tokens: &[String], _| {
            let bait = tokens.iter().any(|t| t == "believe");
            let (c, n) = if bait { (0.6, 0.1) } else { (0.1, 0.6) };
            MaskDistribution::from_weights([("clickbait", c), ("news", n), ("other", 0.3)]).map_err(|e| e.to_string())
        })
    }

    #[test]
    fn planted_signal_and_ablation_rows() {
        let docs = corpus();
        let summaries: HashMap<String, String> = docs.iter().map(|d| (d.id.clone(), "a summary".to_owned())).collect();
        let templates = TemplateSet::default();
        let verbalizer = Verbalizer::label_names_only(&["news".to_owned(), "clickbait".to_owned()]);
        let scorer = planted();
        let c = PipelineComponents {
            documents: &docs,
            summaries: Some(&summaries),
            templates: &templates,
            verbalizer: &verbalizer,
            scorer: &scorer,
        };
        let spec = ExperimentSpec {
            shots: 2,
            seeds: vec![1, 2, 3],
            modes: SummaryMode::ALL.to_vec(),
            ..Default::default()
        };
        let out = run_experiment(&spec, &c).unwrap();
        assert!(!out.report.partial);
        let means: Vec<&ReportRow> = out.report.mean_rows().collect();
        assert_eq!(means.len(), 3);
        for r in &means {
            assert_eq!(r.metrics.unwrap().accuracy, 1.0);
        }
        assert_eq!(means[1].mode, "-summary");
        assert_eq!(means[1].summaries_used, 0);
        assert!(means[0].summaries_used > 0);
        let again = run_experiment(&spec, &c).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn missing_summaries_mark_partial() {
        let docs = corpus();
        let templates = TemplateSet::default();
        let verbalizer = Verbalizer::label_names_only(&["news".to_owned(), "clickbait".to_owned()]);
        let scorer = planted();
        let c = PipelineComponents {
            documents: &docs,
            summaries: None,
            templates: &templates,
            verbalizer: &verbalizer,
            scorer: &scorer,
        };
        let spec = ExperimentSpec {
            shots: 2,
            ..Default::default()
        };
        let out = run_experiment(&spec, &c).unwrap();
        assert!(out.report.partial);
        assert!(out.report.rows[0].error.as_deref().unwrap().contains("no summary"));
    }

    #[test]
    fn sweep_rows_and_plot() {
        let docs = corpus();
        let templates = TemplateSet::default();
        let verbalizer = Verbalizer::label_names_only(&["news".to_owned(), "clickbait".to_owned()]);
        let scorer = planted();
        let c = PipelineComponents {
            documents: &docs,
            summaries: None,
            templates: &templates,
            verbalizer: &verbalizer,
            scorer: &scorer,
        };
        let spec = ExperimentSpec {
            shots: 2,
            modes: vec![SummaryMode::NoSummary],
            ..Default::default()
        };
        let points = sweep(&spec, SweepAxis::LearningRate, &[1e-5, 4e-5], &c).unwrap();
        assert_eq!(points.len(), 2);
        let plot = plot_data(SweepAxis::LearningRate, &points, "accuracy");
        assert_eq!(plot.lines().count(), 3);
        assert!(matches!(sweep(&spec, SweepAxis::BatchSize, &[], &c), Err(EvalError::EmptyGrid)));
    }

    proptest! {
        #[test]
        fn counts_match_direct_tally(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
            let (p, g): (Vec<bool>, Vec<bool>) = pairs.iter().copied().unzip();
            let c = ConfusionCounts::from_predictions(&p, &g).unwrap();
            prop_assert_eq!(c.total(), pairs.len());
            let correct = pairs.iter().filter(|(a, b)| a == b).count();
            prop_assert_eq!(metrics(&c).unwrap().accuracy, correct as f64 / pairs.len() as f64);
        }
    }
}
