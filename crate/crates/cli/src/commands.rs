//! Subcommand implementations.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::anyhow;
use clickbait_core::datasets::{
    load_documents_jsonl, load_news_clickbait, load_rerank_corpus, load_webis, load_webis_split, sample_few_shot,
    Document, Loaded, LABEL_NAMES,
};
use clickbait_core::detector::{
    read_records, score_batch, train_detector, write_records, CalibrationHead, DetectionRecord,
};
use clickbait_core::eval_harness::{
    counts_from_records, metrics, plot_data, render_for_mode, run_experiment, sweep as run_sweep, weighted_metrics,
    ExperimentSpec, PipelineComponents, Report, SummaryMode,
};
use clickbait_core::lm_backend::{ConceptBase, EmbeddingTable, FixtureScorer, FrequencyLexicon, MaskScorer, UniformScorer};
use clickbait_core::prompt_templates::{load_templates, RenderedPrompt, TemplateSet};
use clickbait_core::reranker::{select_best, train_reranker, OverlapFeaturizer, RerankerModel};
use clickbait_core::seed::derive_seed;
use clickbait_core::summary_engine::{
    write_candidate_sets, CommandGenerator, GeneratorRegistry, SummaryCandidateSet, SummaryEngine,
};
use clickbait_core::verbalizer_builder::{build_verbalizer as build, Strategy, Verbalizer, VerbalizerResources};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";
pub const RUN_LOG: &str = "run.log";

/// One selected summary per document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedSummary {
    pub id: String,
    pub summary: String,
    pub index: usize,
    pub generator_tag: String,
    pub selected_by: String,
}

/// One rendered prompt, written by `detect`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub template_id: u32,
    pub text: String,
    pub mask_position: usize,
}

fn resource_err(what: &'static str, path: &Path) -> impl FnOnce(String) -> CliError {
    let path = path.to_owned();
    move |message| CliError::Resource { what, path, message }
}

fn stage<E: Into<anyhow::Error>>(name: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Stage {
        stage: name,
        source: e.into(),
    }
}

pub fn prepare_out(c: &RunConfig, _command: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(&c.out).map_err(|e| resource_err("output directory", &c.out)(e.to_string()))?;
    write_out(c, EFFECTIVE_CONFIG, c.to_toml().as_bytes())
}

/// Appends one line to the sidecar log. This file is the only output that
/// carries a timestamp.
pub fn log_run(c: &RunConfig, command: &str, error: Option<&CliError>) {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let status = error.map_or_else(|| "ok".to_owned(), |e| format!("error: {e}"));
    let line = format!("{secs}\t{command}\tseed={}\t{status}\n", c.seed);
    let appended = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(c.out.join(RUN_LOG))
        .and_then(|mut f| f.write_all(line.as_bytes()));
    if let Err(e) = appended {
        log::warn!("cannot write {RUN_LOG}: {e}");
    }
}

fn write_out(c: &RunConfig, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = c.out.join(name);
    std::fs::write(&path, bytes).map_err(|e| resource_err("output file", &path)(e.to_string()))
}

fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("serializable record");
        out.push(b'\n');
    }
    out
}

/// A configured artifact path, or the default file in the output directory
/// when that exists.
fn artifact(c: &RunConfig, configured: &Option<PathBuf>, default_name: &str, what: &'static str) -> Result<Option<PathBuf>, CliError> {
    if configured.is_some() {
        return c.optional(configured, what);
    }
    let fallback = c.out.join(default_name);
    Ok(fallback.exists().then_some(fallback))
}

fn load_documents(c: &RunConfig) -> Result<(Vec<Document>, String), CliError> {
    let path = c.require(&c.paths.dataset, "dataset")?;
    let format = match &c.paths.dataset_format {
        Some(f) => f.clone(),
        None => guess_format(&path),
    };
    let err = resource_err("dataset", &path);
    let loaded: Loaded = match format.as_str() {
        "webis" => match c.optional(&c.paths.truth, "truth file")? {
            Some(truth) => load_webis_split(&path, &truth),
            None => load_webis(&path),
        },
        "news_clickbait" | "csv" | "tsv" => load_news_clickbait(&path),
        "jsonl" => load_documents_jsonl(&path),
        other => return Err(CliError::Usage(format!("unknown dataset format `{other}`"))),
    }
    .map_err(|e| err(e.to_string()))?;
    let r = &loaded.report;
    log::info!(
        "{}: {} documents ({} clickbait, {} news, {} unlabeled), {} skipped, {:.1} headline / {:.1} content words on average",
        path.display(),
        r.loaded,
        r.clickbait,
        r.news,
        r.unlabeled,
        r.skipped,
        r.avg_headline_words,
        r.avg_content_words
    );
    if loaded.documents.is_empty() {
        return Err(resource_err("dataset", &path)("no usable documents".into()));
    }
    let name = c.experiment.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map_or_else(|| "dataset".to_owned(), |s| s.to_string_lossy().into_owned())
    });
    Ok((loaded.documents, name))
}

fn guess_format(path: &Path) -> String {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("tsv") => "news_clickbait".into(),
        _ => {
            let first = std::fs::read_to_string(path)
                .ok()
                .and_then(|t| t.lines().find(|l| !l.trim().is_empty()).map(str::to_owned))
                .unwrap_or_default();
            if first.contains("\"postText\"") {
                "webis".into()
            } else {
                "jsonl".into()
            }
        }
    }
}

fn load_templates_set(c: &RunConfig) -> Result<TemplateSet, CliError> {
    let mut set = TemplateSet::default();
    if let Some(path) = c.optional(&c.paths.templates, "template file")? {
        set.extend(load_templates(&path).map_err(|e| resource_err("template file", &path)(e.to_string()))?);
    }
    set.get(c.template)
        .map_err(|_| CliError::Usage(format!("unknown template id {}", c.template)))?;
    Ok(set)
}

fn load_scorer(c: &RunConfig, vocab: &[String]) -> Result<Box<dyn MaskScorer>, CliError> {
    match c.backend.as_str() {
        "fixture" => {
            let path = c.require(&c.paths.scorer, "scorer fixture")?;
            let scorer = FixtureScorer::load(&path).map_err(|e| resource_err("scorer fixture", &path)(e.to_string()))?;
            Ok(Box::new(scorer))
        }
        "uniform" => Ok(Box::new(
            UniformScorer::new(vocab.iter().cloned()).map_err(|e| CliError::Usage(e.to_string()))?,
        )),
        other => Err(CliError::Usage(format!("unknown scorer backend `{other}` (available: fixture, uniform)"))),
    }
}

fn load_verbalizer(c: &RunConfig) -> Result<Verbalizer, CliError> {
    let path = artifact(c, &c.paths.verbalizer, "verbalizer.tsv", "verbalizer")?
        .ok_or_else(|| CliError::Usage("no verbalizer configured and none in the output directory".into()))?;
    Verbalizer::load(&path).map_err(|e| resource_err("verbalizer", &path)(e.to_string()))
}

fn load_summaries(c: &RunConfig) -> Result<Option<HashMap<String, String>>, CliError> {
    let Some(path) = artifact(c, &c.paths.summaries, "summaries.jsonl", "summaries")? else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| resource_err("summaries", &path)(e.to_string()))?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let s: SelectedSummary = serde_json::from_str(line)
            .map_err(|e| resource_err("summaries", &path)(format!("line {}: {e}", i + 1)))?;
        map.insert(s.id, s.summary);
    }
    Ok(Some(map))
}

fn first_mode(c: &RunConfig) -> SummaryMode {
    c.experiment.modes.first().copied().unwrap_or(SummaryMode::Summary)
}

/// Verbalizer label index of each corpus label.
fn label_map(verbalizer_labels: &[String]) -> Result<[usize; 2], CliError> {
    let find = |name: &str| {
        verbalizer_labels
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| CliError::Usage(format!("labels must include `{name}`")))
    };
    Ok([find(LABEL_NAMES[0])?, find(LABEL_NAMES[1])?])
}

fn render_all(
    c: &RunConfig,
    docs: &[Document],
    templates: &TemplateSet,
    summaries: Option<&HashMap<String, String>>,
    mask: &str,
) -> Result<Vec<RenderedPrompt>, CliError> {
    let template = templates.get(c.template).map_err(|e| CliError::Usage(e.to_string()))?;
    let mode = first_mode(c);
    docs.iter()
        .map(|d| {
            render_for_mode(d, mode, template, summaries, c.experiment.content_words, mask)
                .map(|(p, _)| p)
                .map_err(|e| CliError::Stage {
                    stage: "render",
                    source: anyhow!("document `{}`: {e}", d.id),
                })
        })
        .collect()
}

pub fn summarize(c: &RunConfig) -> Result<(), CliError> {
    let (docs, _) = load_documents(c)?;
    let mut registry = GeneratorRegistry::with_builtins();
    if let Some((program, args)) = c.generator.command.split_first() {
        registry.register(Arc::new(CommandGenerator::new(c.generator.backend.clone(), program.clone(), args.to_vec())));
    }
    let backend = registry.get(&c.generator.backend).map_err(|e| {
        let names: Vec<&str> = registry.names().collect();
        CliError::Usage(format!("{e} (available: {})", names.join(", ")))
    })?;
    let engine = SummaryEngine::new(backend);
    let reranker = match c.optional(&c.paths.reranker, "reranker checkpoint")? {
        Some(path) => Some(RerankerModel::load(&path).map_err(|e| resource_err("reranker checkpoint", &path)(e.to_string()))?),
        None => None,
    };
    let gen_config = c.generator_config();
    let mut sets: Vec<SummaryCandidateSet> = Vec::new();
    let mut selected = Vec::new();
    for doc in &docs {
        if doc.content.trim().is_empty() {
            log::warn!("document `{}` has no content; no summary", doc.id);
            continue;
        }
        let set = engine
            .generate(&doc.id, &doc.content, &gen_config)
            .map_err(|e| CliError::Stage {
                stage: "summarize",
                source: anyhow!("document `{}`: {e}", doc.id),
            })?;
        let (index, summary, by) = match &reranker {
            Some(model) => {
                let (i, s) = select_best(model, &OverlapFeaturizer, &set, &doc.content).map_err(stage("rerank"))?;
                (i, s, "reranker")
            }
            None => (0, set.candidates[0].clone(), "first"),
        };
        selected.push(SelectedSummary {
            id: doc.id.clone(),
            summary,
            index,
            generator_tag: set.generator_tag.clone(),
            selected_by: by.into(),
        });
        sets.push(set);
    }
    let mut buf = Vec::new();
    write_candidate_sets(&mut buf, &sets).map_err(stage("summarize"))?;
    write_out(c, "candidates.jsonl", &buf)?;
    write_out(c, "summaries.jsonl", &jsonl(&selected))?;
    println!("summarized {} of {} documents", selected.len(), docs.len());
    Ok(())
}

pub fn rerank_train(c: &RunConfig) -> Result<(), CliError> {
    let path = c.require(&c.paths.rerank_corpus, "re-ranker corpus")?;
    let corpus = load_rerank_corpus(&path).map_err(|e| resource_err("re-ranker corpus", &path)(e.to_string()))?;
    if corpus.is_empty() {
        return Err(resource_err("re-ranker corpus", &path)("no valid examples".into()));
    }
    let mut hp = c.reranker.clone();
    hp.seed = derive_seed(c.seed, "reranker");
    let trained = train_reranker(&corpus, &OverlapFeaturizer, &hp).map_err(stage("rerank-train"))?;
    let out = c.out.join("reranker.json");
    trained.model.save(&out).map_err(stage("rerank-train"))?;
    let mut history = String::from("epoch\tloss\n");
    for (i, l) in trained.history.iter().enumerate() {
        let _ = writeln!(history, "{i}\t{l:.8}");
    }
    write_out(c, "rerank_history.tsv", history.as_bytes())?;
    println!(
        "trained re-ranker on {} examples; loss {:.6} -> {:.6}",
        corpus.len(),
        trained.history[0],
        trained.history.iter().copied().fold(f64::INFINITY, f64::min)
    );
    Ok(())
}

pub fn build_verbalizer(c: &RunConfig) -> Result<(), CliError> {
    let needs_embeddings = c.verbalizer.strategies.contains(&Strategy::Concepts)
        || c.verbalizer.strategies.contains(&Strategy::EmbeddingSimilarity);
    let embeddings = match c.optional(&c.paths.embeddings, "embeddings")? {
        Some(p) => EmbeddingTable::load(&p).map_err(|e| resource_err("embeddings", &p)(e.to_string()))?,
        None if needs_embeddings => return Err(CliError::Usage("no embeddings configured".into())),
        None => EmbeddingTable::new(1),
    };
    let concepts = match c.optional(&c.paths.concepts, "concept base")? {
        Some(p) => ConceptBase::load(&p).map_err(|e| resource_err("concept base", &p)(e.to_string()))?,
        None => ConceptBase::default(),
    };
    let lexicon = match c.optional(&c.paths.lexicon, "frequency lexicon")? {
        Some(p) => FrequencyLexicon::load(&p).map_err(|e| resource_err("frequency lexicon", &p)(e.to_string()))?,
        None => FrequencyLexicon::default(),
    };
    let scorer = load_scorer(c, &c.labels)?;
    let idx = label_map(&c.labels)?;

    let mut probes: Vec<Vec<RenderedPrompt>> = vec![Vec::new(); c.labels.len()];
    if c.verbalizer.strategies.contains(&Strategy::MlmPrediction) || c.verbalizer.strategies.contains(&Strategy::Context) {
        let (docs, _) = load_documents(c)?;
        let split = sample_few_shot(&docs, c.experiment.shots, c.seed).map_err(stage("few-shot sampling"))?;
        let templates = load_templates_set(c)?;
        let summaries = if first_mode(c) == SummaryMode::Summary { load_summaries(c)? } else { None };
        let prompts = render_all(c, &split.train, &templates, summaries.as_ref(), scorer.mask_token())?;
        for (doc, prompt) in split.train.iter().zip(prompts) {
            probes[idx[usize::from(doc.label.unwrap_or(0))]].push(prompt);
        }
    }
    let resources = VerbalizerResources {
        concepts: &concepts,
        embeddings: &embeddings,
        lexicon: &lexicon,
        scorer: scorer.as_ref(),
    };
    let outcome = build(&c.labels, &probes, &resources, &c.verbalizer).map_err(stage("build-verbalizer"))?;
    write_out(c, "verbalizer.tsv", outcome.verbalizer.to_tsv().as_bytes())?;
    let mut table = String::from("label\tstrategy\twords\n");
    for (label, counts) in c.labels.iter().zip(outcome.contribution_counts()) {
        for (strategy, n) in counts {
            let _ = writeln!(table, "{label}\t{strategy}\t{n}");
        }
    }
    write_out(c, "verbalizer_contributions.tsv", table.as_bytes())?;
    print!("{table}");
    println!("verbalizer {}", outcome.verbalizer.content_hash());
    Ok(())
}

pub fn detect(c: &RunConfig) -> Result<(), CliError> {
    let (docs, _) = load_documents(c)?;
    let verbalizer = load_verbalizer(c)?;
    let vocab: Vec<String> = (0..verbalizer.labels().len())
        .flat_map(|y| verbalizer.words(y).map(str::to_owned).collect::<Vec<_>>())
        .collect();
    let scorer = load_scorer(c, &vocab)?;
    let templates = load_templates_set(c)?;
    let summaries = if first_mode(c) == SummaryMode::Summary { load_summaries(c)? } else { None };
    let idx = label_map(verbalizer.labels())?;
    let head = match artifact(c, &c.paths.head, "head.json", "detector head")? {
        Some(p) => Some(CalibrationHead::load(&p).map_err(|e| resource_err("detector head", &p)(e.to_string()))?),
        None => None,
    };
    let prompts = render_all(c, &docs, &templates, summaries.as_ref(), scorer.mask_token())?;
    let hash = verbalizer.content_hash();
    let mut records = Vec::with_capacity(docs.len());
    for ((doc, prompt), result) in docs.iter().zip(&prompts).zip(score_batch(&prompts, &verbalizer, scorer.as_ref())) {
        let result = result.map_err(|e| CliError::Stage {
            stage: "detect",
            source: anyhow!("document `{}`: {e}", doc.id),
        })?;
        let predicted = match &head {
            Some(h) => h.predict(&result.per_label_score),
            None => result.predicted,
        };
        records.push(DetectionRecord {
            id: doc.id.clone(),
            scores: verbalizer.labels().iter().cloned().zip(result.per_label_score).collect(),
            predicted: verbalizer.labels()[predicted].clone(),
            gold: doc.label.map(|y| verbalizer.labels()[idx[usize::from(y)]].clone()),
            template_id: prompt.template_id,
            verbalizer_hash: hash.clone(),
            mode: Some(first_mode(c).row_label().to_owned()),
        });
    }
    let prompt_records: Vec<PromptRecord> = docs
        .iter()
        .zip(&prompts)
        .map(|(d, p)| PromptRecord {
            id: d.id.clone(),
            template_id: p.template_id,
            text: p.text.clone(),
            mask_position: p.mask_position,
        })
        .collect();
    write_out(c, "prompts.jsonl", &jsonl(&prompt_records))?;
    let mut buf = Vec::new();
    write_records(&mut buf, &records).map_err(stage("detect"))?;
    write_out(c, "detections.jsonl", &buf)?;
    println!("scored {} documents with template {}", records.len(), c.template);
    Ok(())
}

pub fn train(c: &RunConfig) -> Result<(), CliError> {
    let (docs, _) = load_documents(c)?;
    let verbalizer = load_verbalizer(c)?;
    let scorer = load_scorer(c, verbalizer.labels())?;
    let templates = load_templates_set(c)?;
    let summaries = if first_mode(c) == SummaryMode::Summary { load_summaries(c)? } else { None };
    let idx = label_map(verbalizer.labels())?;
    let split = sample_few_shot(&docs, c.experiment.shots, c.seed).map_err(stage("few-shot sampling"))?;
    let prompts = render_all(c, &split.train, &templates, summaries.as_ref(), scorer.mask_token())?;
    let examples: Vec<(RenderedPrompt, usize)> = prompts
        .into_iter()
        .zip(&split.train)
        .map(|(p, d)| (p, idx[usize::from(d.label.unwrap_or(0))]))
        .collect();
    let mut config = c.detector.clone();
    config.seed = derive_seed(c.seed, "detector");
    let outcome = train_detector(&examples, &verbalizer, scorer.as_ref(), &config).map_err(stage("train"))?;
    outcome.head.save(&c.out.join("head.json")).map_err(stage("train"))?;
    let manifest = serde_json::to_string_pretty(&split.manifest()).map_err(stage("train"))?;
    write_out(c, "split.json", manifest.as_bytes())?;
    let mut history = String::from("epoch\tloss\n");
    for (i, l) in outcome.history.iter().enumerate() {
        let _ = writeln!(history, "{i}\t{l:.8}");
    }
    write_out(c, "train_history.tsv", history.as_bytes())?;
    println!(
        "trained detector head on {} examples; loss {:.6} -> {:.6}",
        examples.len(),
        outcome.history[0],
        outcome.final_loss()
    );
    Ok(())
}

fn metrics_table(records: &[DetectionRecord]) -> Result<String, CliError> {
    let counts = counts_from_records(records).map_err(stage("eval"))?;
    let bin = metrics(&counts).map_err(stage("eval"))?;
    let w = weighted_metrics(&counts).map_err(stage("eval"))?;
    let mut out = String::from("metric\tbinary\tweighted\n");
    for (name, a, b) in [
        ("accuracy", bin.accuracy, w.accuracy),
        ("precision", bin.precision, w.precision),
        ("recall", bin.recall, w.recall),
        ("f1", bin.f1, w.f1),
    ] {
        let _ = writeln!(out, "{name}\t{a:.6}\t{b:.6}");
    }
    let _ = writeln!(out, "tp\t{}\t", counts.tp);
    let _ = writeln!(out, "fp\t{}\t", counts.fp);
    let _ = writeln!(out, "tn\t{}\t", counts.tn);
    let _ = writeln!(out, "fn\t{}\t", counts.fn_);
    Ok(out)
}

fn experiment_spec(c: &RunConfig, dataset: String) -> ExperimentSpec {
    ExperimentSpec {
        dataset,
        shots: c.experiment.shots,
        seeds: c.seeds(),
        template_id: c.template,
        strategies: c.verbalizer.strategies.iter().copied().collect(),
        modes: c.experiment.modes.clone(),
        content_words: c.experiment.content_words,
        train: c.detector.clone(),
    }
}

struct ExperimentInputs {
    docs: Vec<Document>,
    name: String,
    verbalizer: Verbalizer,
    scorer: Box<dyn MaskScorer>,
    templates: TemplateSet,
    summaries: Option<HashMap<String, String>>,
}

fn experiment_inputs(c: &RunConfig) -> Result<ExperimentInputs, CliError> {
    let (docs, name) = load_documents(c)?;
    let verbalizer = load_verbalizer(c)?;
    let scorer = load_scorer(c, verbalizer.labels())?;
    let templates = load_templates_set(c)?;
    let summaries = if c.experiment.modes.contains(&SummaryMode::Summary) { load_summaries(c)? } else { None };
    Ok(ExperimentInputs {
        docs,
        name,
        verbalizer,
        scorer,
        templates,
        summaries,
    })
}

impl ExperimentInputs {
    fn components(&self) -> PipelineComponents<'_> {
        PipelineComponents {
            documents: &self.docs,
            summaries: self.summaries.as_ref(),
            templates: &self.templates,
            verbalizer: &self.verbalizer,
            scorer: self.scorer.as_ref(),
        }
    }
}

fn report_outputs(c: &RunConfig, report: &Report, prefix: &str) -> Result<(), CliError> {
    write_out(c, &format!("{prefix}.tsv"), report.to_tsv().as_bytes())?;
    let mut buf = Vec::new();
    report.write_jsonl(&mut buf).map_err(stage("eval"))?;
    write_out(c, &format!("{prefix}.jsonl"), &buf)?;
    if report.partial {
        log::warn!("report is partial: some seeds failed");
        println!("partial report: some seeds failed");
    }
    Ok(())
}

pub fn eval(c: &RunConfig) -> Result<(), CliError> {
    if let Some(path) = c.optional(&c.paths.detections, "detection records")? {
        let records = read_records(&path).map_err(|e| resource_err("detection records", &path)(e.to_string()))?;
        let table = metrics_table(&records)?;
        write_out(c, "metrics.tsv", table.as_bytes())?;
        print!("{table}");
        return Ok(());
    }
    let inputs = experiment_inputs(c)?;
    let spec = experiment_spec(c, inputs.name.clone());
    let output = run_experiment(&spec, &inputs.components()).map_err(stage("eval"))?;
    report_outputs(c, &output.report, "report")?;
    let mut buf = Vec::new();
    write_records(&mut buf, &output.records).map_err(stage("eval"))?;
    write_out(c, "experiment_detections.jsonl", &buf)?;
    print!("{}", output.report.to_tsv());
    Ok(())
}

pub fn sweep(c: &RunConfig) -> Result<(), CliError> {
    let inputs = experiment_inputs(c)?;
    let spec = experiment_spec(c, inputs.name.clone());
    let axis = c.experiment.sweep_axis;
    let points = run_sweep(&spec, axis, &c.experiment.grid, &inputs.components()).map_err(stage("sweep"))?;
    let plot = plot_data(axis, &points, &c.experiment.plot_metric);
    write_out(c, "sweep.tsv", plot.as_bytes())?;
    let mut table = String::new();
    for (i, p) in points.iter().enumerate() {
        for (j, line) in p.report.to_tsv().lines().enumerate() {
            if i > 0 && j == 0 {
                continue;
            }
            let value = if j == 0 { axis.name().to_owned() } else { p.value.to_string() };
            let _ = writeln!(table, "{value}\t{line}");
        }
    }
    write_out(c, "sweep_report.tsv", table.as_bytes())?;
    print!("{plot}");
    Ok(())
}
