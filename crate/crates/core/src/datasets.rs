//! Corpus loaders, few-shot sampling and re-ranker training corpora.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::reranker::RerankTrainingExample;
use crate::seed::rng_for;

/// Mean annotator score above which a post counts as clickbait.
pub const CLICKBAIT_THRESHOLD: f64 = 0.5;

pub const LABEL_NAMES: [&str; 2] = ["news", "clickbait"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("class {label} has {available} documents, {requested} requested")]
    InsufficientClass {
        label: u8,
        available: usize,
        requested: usize,
    },
    #[error("k_shot must be positive")]
    ZeroShot,
    #[error("split manifest: {0}")]
    Manifest(String),
    #[error("document id `{0}` in manifest is not in the corpus")]
    UnknownId(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub headline: String,
    pub content: String,
    #[serde(default)]
    pub label: Option<u8>,
    #[serde(default)]
    pub truth_mean: Option<f64>,
}

pub fn label_from_truth_mean(truth_mean: f64) -> u8 {
    u8::from(truth_mean > CLICKBAIT_THRESHOLD)
}

/// Counts and average lengths emitted by the loaders.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub skipped: usize,
    pub clickbait: usize,
    pub news: usize,
    pub unlabeled: usize,
    pub avg_headline_words: f64,
    pub avg_content_words: f64,
}

impl LoadReport {
    pub fn from_documents(docs: &[Document], skipped: usize) -> Self {
        let n = docs.len();
        let words = |s: &str| s.split_whitespace().count() as f64;
        let avg = |f: &dyn Fn(&Document) -> f64| {
            if n == 0 {
                0.0
            } else {
                docs.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            loaded: n,
            skipped,
            clickbait: docs.iter().filter(|d| d.label == Some(1)).count(),
            news: docs.iter().filter(|d| d.label == Some(0)).count(),
            unlabeled: docs.iter().filter(|d| d.label.is_none()).count(),
            avg_headline_words: avg(&|d| words(&d.headline)),
            avg_content_words: avg(&|d| words(&d.content)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub documents: Vec<Document>,
    pub report: LoadReport,
}

fn read_lines(path: &Path) -> Result<Vec<String>, DatasetError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    std::io::BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(io_err(path))
}

fn text_field(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => {
            let parts: Vec<&str> = items.iter().filter_map(Value::as_str).collect();
            Some(parts.join(" "))
        }
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn id_field(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn webis_document(record: &Value, truth: Option<&Value>) -> Result<Document, String> {
    let id = id_field(record.get("id")).ok_or("missing id")?;
    let headline = text_field(record.get("postText")).ok_or("missing postText")?;
    if headline.trim().is_empty() {
        return Err("empty postText".into());
    }
    let content = text_field(record.get("targetParagraphs")).unwrap_or_default();
    let truth = truth.unwrap_or(record);
    let truth_mean = match truth.get("truthMean") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_f64().ok_or("truthMean is not a number")?),
    };
    if let Some(t) = truth_mean {
        if !(0.0..=1.0).contains(&t) {
            return Err(format!("truthMean {t} outside [0, 1]"));
        }
    }
    let label = match truth_mean {
        Some(t) => Some(label_from_truth_mean(t)),
        None => match truth.get("truthClass").and_then(Value::as_str) {
            Some("clickbait") => Some(1),
            Some("no-clickbait") => Some(0),
            Some(other) => return Err(format!("unknown truthClass `{other}`")),
            None => None,
        },
    };
    Ok(Document {
        id,
        headline: headline.trim().to_owned(),
        content: content.trim().to_owned(),
        label,
        truth_mean,
    })
}

type NumberedRecord = (usize, Result<Value, String>);

fn parse_jsonl_records(path: &Path) -> Result<Vec<NumberedRecord>, DatasetError> {
    Ok(read_lines(path)?
        .into_iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, serde_json::from_str(&l).map_err(|e| e.to_string())))
        .collect())
}

/// Loads a Webis line-delimited file whose records carry both the post
/// fields and the truth fields.
pub fn load_webis(path: &Path) -> Result<Loaded, DatasetError> {
    load_webis_inner(path, None)
}

/// Loads the Webis instances file joined with its separate truth file.
pub fn load_webis_split(instances: &Path, truth: &Path) -> Result<Loaded, DatasetError> {
    let mut by_id = HashMap::new();
    for (line, rec) in parse_jsonl_records(truth)? {
        match rec {
            Ok(v) => match id_field(v.get("id")) {
                Some(id) => {
                    by_id.insert(id, v);
                }
                None => log::warn!("{}:{line}: truth record without id", truth.display()),
            },
            Err(e) => log::warn!("{}:{line}: {e}", truth.display()),
        }
    }
    load_webis_inner(instances, Some(&by_id))
}

fn load_webis_inner(path: &Path, truth: Option<&HashMap<String, Value>>) -> Result<Loaded, DatasetError> {
    let mut documents = Vec::new();
    let mut skipped = 0;
    for (line, rec) in parse_jsonl_records(path)? {
        let doc = rec.and_then(|v| {
            let t = match truth {
                Some(map) => id_field(v.get("id")).and_then(|id| map.get(&id)),
                None => None,
            };
            webis_document(&v, t)
        });
        match doc {
            Ok(d) => documents.push(d),
            Err(e) => {
                skipped += 1;
                log::warn!("{}:{line}: skipping record: {e}", path.display());
            }
        }
    }
    if skipped > 0 {
        log::warn!("{}: skipped {skipped} malformed records", path.display());
    }
    let report = LoadReport::from_documents(&documents, skipped);
    Ok(Loaded { documents, report })
}

const HEADLINE_COLUMNS: [&str; 4] = ["headline", "title", "posttext", "text"];
const CONTENT_COLUMNS: [&str; 5] = ["body", "content", "article", "text", "targetparagraphs"];
const LABEL_COLUMNS: [&str; 5] = ["label", "clickbait", "is_clickbait", "class", "truthclass"];
const ID_COLUMNS: [&str; 2] = ["id", "uid"];

fn find_column(headers: &[String], names: &[&str], exclude: Option<usize>) -> Option<usize> {
    names.iter().find_map(|name| {
        headers
            .iter()
            .position(|h| h == name)
            .filter(|i| Some(*i) != exclude)
    })
}

fn parse_label(raw: &str) -> Result<u8, String> {
    match raw.trim().to_lowercase().as_str() {
        "1" | "1.0" | "clickbait" | "true" | "yes" => Ok(1),
        "0" | "0.0" | "news" | "no-clickbait" | "non-clickbait" | "false" | "no" => Ok(0),
        other => Err(format!("unrecognised label `{other}`")),
    }
}

/// Loads delimited text with headline, body and binary label columns. The
/// delimiter is a tab for `.tsv` files and a comma otherwise; column names
/// are matched case-insensitively against common spellings.
pub fn load_news_clickbait(path: &Path) -> Result<Loaded, DatasetError> {
    let delimiter = if path.extension().is_some_and(|e| e == "tsv") {
        b'\t'
    } else {
        b','
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => DatasetError::Io {
                path: path.to_owned(),
                source,
            },
            other => DatasetError::Format {
                path: path.to_owned(),
                message: format!("{other:?}"),
            },
        })?;
    let format_err = |message: String| DatasetError::Format {
        path: path.to_owned(),
        message,
    };
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| format_err(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_lowercase())
        .collect();
    let headline_col = find_column(&headers, &HEADLINE_COLUMNS, None)
        .ok_or_else(|| format_err(format!("no headline column among {headers:?}")))?;
    let content_col = find_column(&headers, &CONTENT_COLUMNS, Some(headline_col));
    let label_col = find_column(&headers, &LABEL_COLUMNS, None);
    let id_col = find_column(&headers, &ID_COLUMNS, None);

    let mut documents = Vec::new();
    let mut skipped = 0;
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let parsed = record.map_err(|e| e.to_string()).and_then(|r| {
            let field = |c: usize| r.get(c).unwrap_or("").trim().to_owned();
            let headline = field(headline_col);
            if headline.is_empty() {
                return Err("empty headline".to_owned());
            }
            let label = match label_col {
                Some(c) if !field(c).is_empty() => Some(parse_label(&field(c))?),
                _ => None,
            };
            Ok(Document {
                id: id_col.map(field).filter(|s| !s.is_empty()).unwrap_or_else(|| format!("row{line}")),
                headline,
                content: content_col.map(field).unwrap_or_default(),
                label,
                truth_mean: None,
            })
        });
        match parsed {
            Ok(d) => documents.push(d),
            Err(e) => {
                skipped += 1;
                log::warn!("{}:{line}: skipping row: {e}", path.display());
            }
        }
    }
    if skipped > 0 {
        log::warn!("{}: skipped {skipped} rows", path.display());
    }
    let report = LoadReport::from_documents(&documents, skipped);
    Ok(Loaded { documents, report })
}

/// Loads documents serialized as one [`Document`] JSON object per line.
pub fn load_documents_jsonl(path: &Path) -> Result<Loaded, DatasetError> {
    let mut documents = Vec::new();
    let mut skipped = 0;
    for (line, rec) in parse_jsonl_records(path)? {
        let doc = rec.and_then(|v| serde_json::from_value::<Document>(v).map_err(|e| e.to_string()));
        match doc {
            Ok(mut d) if !d.headline.trim().is_empty() => {
                if let Some(t) = d.truth_mean {
                    d.label = Some(label_from_truth_mean(t));
                }
                documents.push(d);
            }
            Ok(_) => {
                skipped += 1;
                log::warn!("{}:{line}: skipping document with empty headline", path.display());
            }
            Err(e) => {
                skipped += 1;
                log::warn!("{}:{line}: skipping record: {e}", path.display());
            }
        }
    }
    let report = LoadReport::from_documents(&documents, skipped);
    Ok(Loaded { documents, report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FewShotSplit {
    pub k_shot: usize,
    pub seed: u64,
    pub train: Vec<Document>,
    pub test: Vec<Document>,
}

/// Draws `k_shot` documents per class without replacement. Unlabeled
/// documents are ignored; every labeled document not drawn goes to test, in
/// corpus order.
pub fn sample_few_shot(docs: &[Document], k_shot: usize, seed: u64) -> Result<FewShotSplit, DatasetError> {
    if k_shot == 0 {
        return Err(DatasetError::ZeroShot);
    }
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, d) in docs.iter().enumerate() {
        if let Some(y) = d.label {
            by_class.entry(y).or_default().push(i);
        }
    }
    for label in [0u8, 1] {
        let available = by_class.get(&label).map_or(0, Vec::len);
        if available < k_shot {
            return Err(DatasetError::InsufficientClass {
                label,
                available,
                requested: k_shot,
            });
        }
    }
    let mut rng = rng_for(seed, &format!("few-shot-{k_shot}"));
    let mut chosen = HashSet::new();
    let mut train = Vec::new();
    for indices in by_class.values() {
        for &i in indices.choose_multiple(&mut rng, k_shot) {
            chosen.insert(i);
            train.push(docs[i].clone());
        }
    }
    let test = docs
        .iter()
        .enumerate()
        .filter(|(i, d)| d.label.is_some() && !chosen.contains(i))
        .map(|(_, d)| d.clone())
        .collect();
    Ok(FewShotSplit {
        k_shot,
        seed,
        train,
        test,
    })
}

/// Serialized form of a split: ids plus the seed that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub k_shot: usize,
    pub seed: u64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl FewShotSplit {
    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            k_shot: self.k_shot,
            seed: self.seed,
            train: self.train.iter().map(|d| d.id.clone()).collect(),
            test: self.test.iter().map(|d| d.id.clone()).collect(),
        }
    }

    /// Rebuilds a split from a manifest and the corpus it was drawn from.
    pub fn from_manifest(manifest: &SplitManifest, docs: &[Document]) -> Result<Self, DatasetError> {
        let by_id: HashMap<&str, &Document> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
        let resolve = |ids: &[String]| {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .map(|d| (*d).clone())
                        .ok_or_else(|| DatasetError::UnknownId(id.clone()))
                })
                .collect::<Result<Vec<_>, _>>()
        };
        Ok(Self {
            k_shot: manifest.k_shot,
            seed: manifest.seed,
            train: resolve(&manifest.train)?,
            test: resolve(&manifest.test)?,
        })
    }
}

impl SplitManifest {
    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| DatasetError::Manifest(e.to_string()))?;
        std::fs::write(path, text).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Manifest(e.to_string()))
    }
}

/// Loads re-ranker training examples, one JSON object per line with
/// `document`, `candidates` and `reference_summary`. Invalid examples are
/// skipped with a warning.
pub fn load_rerank_corpus(path: &Path) -> Result<Vec<RerankTrainingExample>, DatasetError> {
    let mut out = Vec::new();
    for (line, rec) in parse_jsonl_records(path)? {
        let ex = rec
            .and_then(|v| serde_json::from_value::<RerankTrainingExample>(v).map_err(|e| e.to_string()))
            .and_then(|ex| ex.validate().map(|_| ex).map_err(|e| e.to_string()));
        match ex {
            Ok(ex) => out.push(ex),
            Err(e) => log::warn!("{}:{line}: skipping example: {e}", path.display()),
        }
    }
    Ok(out)
}
