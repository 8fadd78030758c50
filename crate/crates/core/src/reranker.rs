//! Multi-metric summary re-ranker.
//!
//! Every candidate is encoded by a shared one-layer `tanh` encoder over
//! document/candidate features, and one logistic head per metric predicts
//! whether the candidate is the best under that metric. Training minimizes
//! the mean over metrics of the per-head binary cross-entropy, with Adam.
//! At inference the head probabilities are averaged and the highest-scoring
//! candidate wins.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::Adam;
use crate::seed::rng_for;
use crate::summary_engine::SummaryCandidateSet;
use crate::text_metrics::{lcs_len, rouge_n, tokenize, Metric, TokenSequence};

/// Probability clamp used by [`bce_loss`].
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("candidate list is empty")]
    NoCandidates,
    #[error("reference summary is empty")]
    EmptyReference,
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("model expects {expected} features, featurizer `{featurizer}` produces {actual}")]
    FeatureDim {
        featurizer: String,
        expected: usize,
        actual: usize,
    },
    #[error("training diverged at epoch {epoch}: loss {loss} (history {history:?})")]
    Diverged {
        epoch: usize,
        loss: f64,
        history: Vec<f64>,
    },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankTrainingExample {
    pub document: String,
    pub candidates: Vec<String>,
    pub reference_summary: String,
}

impl RerankTrainingExample {
    pub fn validate(&self) -> Result<(), RerankError> {
        if self.candidates.is_empty() {
            return Err(RerankError::NoCandidates);
        }
        if tokenize(&self.reference_summary).is_empty() {
            return Err(RerankError::EmptyReference);
        }
        Ok(())
    }
}

/// Metric scores of each candidate against the reference, per metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricScores {
    pub per_metric: Vec<(Metric, Vec<f64>)>,
}

pub fn score_candidates(example: &RerankTrainingExample, metrics: &[Metric]) -> MetricScores {
    let reference = tokenize(&example.reference_summary);
    let cands: Vec<TokenSequence> = example.candidates.iter().map(|c| tokenize(c)).collect();
    MetricScores {
        per_metric: metrics
            .iter()
            .map(|&m| (m, cands.iter().map(|c| m.score(c, &reference)).collect()))
            .collect(),
    }
}

/// `1` for every candidate attaining the maximum score, `0` otherwise.
pub fn labels_from_scores(scores: &[f64]) -> Vec<u8> {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().map(|&s| u8::from(s == best)).collect()
}

pub fn label_candidates(
    example: &RerankTrainingExample,
    metric: Metric,
) -> Result<Vec<u8>, RerankError> {
    example.validate()?;
    let scores = score_candidates(example, &[metric]);
    Ok(labels_from_scores(&scores.per_metric[0].1))
}

pub fn bce_loss(prediction: f64, label: f64) -> f64 {
    let p = prediction.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -label * p.ln() - (1.0 - label) * (1.0 - p).ln()
}

/// Turns a document and its candidates into fixed-width feature rows.
/// Neural encoders plug in here.
pub trait CandidateFeaturizer: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn features(&self, document: &str, candidates: &[String]) -> Vec<Vec<f64>>;
}

/// Overlap statistics between candidate and document, plus relative length
/// and position.
#[derive(Debug, Default, Clone, Copy)]
pub struct OverlapFeaturizer;

impl OverlapFeaturizer {
    pub const DIM: usize = 6;
}

impl CandidateFeaturizer for OverlapFeaturizer {
    fn name(&self) -> &str {
        "overlap"
    }

    fn dim(&self) -> usize {
        Self::DIM
    }

    fn features(&self, document: &str, candidates: &[String]) -> Vec<Vec<f64>> {
        let doc = tokenize(document);
        let cands: Vec<TokenSequence> = candidates.iter().map(|c| tokenize(c)).collect();
        let max_len = cands.iter().map(TokenSequence::len).max().unwrap_or(0).max(1) as f64;
        let m = cands.len();
        cands
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let r1 = rouge_n(c, &doc, 1).expect("order 1");
                let r2 = rouge_n(c, &doc, 2).expect("order 2");
                let lcs_precision = if c.is_empty() {
                    0.0
                } else {
                    lcs_len(c.tokens(), doc.tokens()) as f64 / c.len() as f64
                };
                let position = if m > 1 { i as f64 / (m - 1) as f64 } else { 0.0 };
                vec![
                    r1.precision,
                    r2.precision,
                    lcs_precision,
                    r1.recall,
                    c.len() as f64 / max_len,
                    position,
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricHead {
    pub metric: Metric,
    /// `hidden_dim` weights followed by the bias.
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankerModel {
    pub featurizer: String,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    /// Row-major `hidden_dim x feature_dim` weights, then `hidden_dim` biases.
    pub encoder_weights: Vec<f64>,
    pub heads: Vec<MetricHead>,
}

impl RerankerModel {
    pub fn init(
        featurizer: &str,
        feature_dim: usize,
        hidden_dim: usize,
        metrics: &[Metric],
        seed: u64,
    ) -> Self {
        let mut rng = rng_for(seed, "reranker-init");
        let enc_scale = 1.0 / (feature_dim.max(1) as f64).sqrt();
        let head_scale = 1.0 / (hidden_dim.max(1) as f64).sqrt();
        let mut encoder_weights: Vec<f64> = (0..hidden_dim * feature_dim)
            .map(|_| rng.gen_range(-enc_scale..enc_scale))
            .collect();
        encoder_weights.extend(std::iter::repeat_n(0.0, hidden_dim));
        let heads = metrics
            .iter()
            .map(|&metric| {
                let mut params: Vec<f64> = (0..hidden_dim)
                    .map(|_| rng.gen_range(-head_scale..head_scale))
                    .collect();
                params.push(0.0);
                MetricHead { metric, params }
            })
            .collect();
        Self {
            featurizer: featurizer.to_owned(),
            feature_dim,
            hidden_dim,
            encoder_weights,
            heads,
        }
    }

    pub fn metrics(&self) -> Vec<Metric> {
        self.heads.iter().map(|h| h.metric).collect()
    }

    pub fn num_params(&self) -> usize {
        self.encoder_weights.len() + self.heads.iter().map(|h| h.params.len()).sum::<usize>()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = self.encoder_weights.clone();
        for h in &self.heads {
            out.extend_from_slice(&h.params);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "parameter vector length");
        let (enc, mut rest) = flat.split_at(self.encoder_weights.len());
        self.encoder_weights.copy_from_slice(enc);
        for h in &mut self.heads {
            let (p, r) = rest.split_at(h.params.len());
            h.params.copy_from_slice(p);
            rest = r;
        }
    }

    fn validate(&self) -> Result<(), RerankError> {
        let bad = |m: String| Err(RerankError::Checkpoint(m));
        if self.feature_dim == 0 || self.hidden_dim == 0 {
            return bad("zero dimension".into());
        }
        if self.encoder_weights.len() != self.hidden_dim * (self.feature_dim + 1) {
            return bad(format!(
                "encoder has {} weights, expected {}",
                self.encoder_weights.len(),
                self.hidden_dim * (self.feature_dim + 1)
            ));
        }
        if self.heads.is_empty() {
            return bad("no metric heads".into());
        }
        for h in &self.heads {
            if h.params.len() != self.hidden_dim + 1 {
                return bad(format!("head {} has {} params", h.metric, h.params.len()));
            }
        }
        if !self.params().iter().all(|v| v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let d = self.feature_dim;
        let (w, b) = self.encoder_weights.split_at(self.hidden_dim * d);
        (0..self.hidden_dim)
            .map(|j| {
                let z: f64 = w[j * d..(j + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum();
                (z + b[j]).tanh()
            })
            .collect()
    }

    fn head_logit(&self, head: usize, hidden: &[f64]) -> f64 {
        let p = &self.heads[head].params;
        p[..self.hidden_dim].iter().zip(hidden).map(|(a, b)| a * b).sum::<f64>() + p[self.hidden_dim]
    }

    /// Per-head probabilities for one feature row.
    pub fn head_probabilities(&self, features: &[f64]) -> Vec<f64> {
        let h = self.hidden(features);
        (0..self.heads.len()).map(|k| sigmoid(self.head_logit(k, &h))).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), RerankError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| RerankError::Checkpoint(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RerankError> {
        let text = std::fs::read_to_string(path)?;
        let model: Self = serde_json::from_str(&text).map_err(|e| RerankError::Checkpoint(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// An example after featurization and per-metric labelling.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedExample {
    pub features: Vec<Vec<f64>>,
    /// `labels[k][i]` is the label of candidate `i` for head `k`.
    pub labels: Vec<Vec<f64>>,
}

pub fn prepare(
    example: &RerankTrainingExample,
    metrics: &[Metric],
    featurizer: &dyn CandidateFeaturizer,
) -> Result<PreparedExample, RerankError> {
    example.validate()?;
    let scores = score_candidates(example, metrics);
    Ok(PreparedExample {
        features: featurizer.features(&example.document, &example.candidates),
        labels: scores
            .per_metric
            .iter()
            .map(|(_, s)| labels_from_scores(s).into_iter().map(f64::from).collect())
            .collect(),
    })
}

/// Average-over-heads BCE and its gradient with respect to [`RerankerModel::params`].
pub fn loss_and_grad(model: &RerankerModel, batch: &[&PreparedExample]) -> (f64, Vec<f64>) {
    let d = model.feature_dim;
    let h = model.hidden_dim;
    let n_heads = model.heads.len();
    let n_cands: usize = batch.iter().map(|e| e.features.len()).sum();
    let mut grad = vec![0.0; model.num_params()];
    if n_cands == 0 {
        return (0.0, grad);
    }
    let scale = 1.0 / (n_cands as f64 * n_heads as f64);
    let enc_len = model.encoder_weights.len();
    let mut loss = 0.0;
    for ex in batch {
        for (i, x) in ex.features.iter().enumerate() {
            let a = model.hidden(x);
            let mut da = vec![0.0; h];
            for k in 0..n_heads {
                let y = ex.labels[k][i];
                let p = sigmoid(model.head_logit(k, &a));
                loss += bce_loss(p, y) * scale;
                // Zero gradient where the clamp is active.
                if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
                    continue;
                }
                let g = (p - y) * scale;
                let off = enc_len + k * (h + 1);
                let head = &model.heads[k].params;
                for j in 0..h {
                    grad[off + j] += g * a[j];
                    da[j] += g * head[j];
                }
                grad[off + h] += g;
            }
            for j in 0..h {
                let dz = da[j] * (1.0 - a[j] * a[j]);
                for (c, xc) in x.iter().enumerate() {
                    grad[j * d + c] += dz * xc;
                }
                grad[h * d + j] += dz;
            }
        }
    }
    (loss, grad)
}

/// Mean over metric heads of each head's average BCE across all candidates.
pub fn multi_metric_loss(
    model: &RerankerModel,
    featurizer: &dyn CandidateFeaturizer,
    batch: &[RerankTrainingExample],
) -> Result<f64, RerankError> {
    if batch.is_empty() {
        return Err(RerankError::EmptyBatch);
    }
    check_dim(model, featurizer)?;
    let metrics = model.metrics();
    let prepared = batch
        .iter()
        .map(|e| prepare(e, &metrics, featurizer))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&PreparedExample> = prepared.iter().collect();
    Ok(loss_and_grad(model, &refs).0)
}

/// Combines per-metric losses the same way [`multi_metric_loss`] does.
pub fn average_metric_loss(per_metric: &[f64]) -> f64 {
    per_metric.iter().sum::<f64>() / per_metric.len() as f64
}

fn check_dim(model: &RerankerModel, featurizer: &dyn CandidateFeaturizer) -> Result<(), RerankError> {
    if featurizer.dim() != model.feature_dim {
        return Err(RerankError::FeatureDim {
            featurizer: featurizer.name().to_owned(),
            expected: model.feature_dim,
            actual: featurizer.dim(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RerankerHyperParams {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub metrics: Vec<Metric>,
}

impl Default for RerankerHyperParams {
    fn default() -> Self {
        Self {
            hidden_dim: 8,
            learning_rate: 0.02,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            metrics: Metric::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedReranker {
    pub model: RerankerModel,
    /// Full-corpus loss before training, then after each epoch.
    pub history: Vec<f64>,
}

/// Trains with mini-batch Adam and returns the parameters with the lowest
/// full-corpus loss seen, so the result never scores worse than the
/// initialization.
pub fn train_reranker(
    corpus: &[RerankTrainingExample],
    featurizer: &dyn CandidateFeaturizer,
    hp: &RerankerHyperParams,
) -> Result<TrainedReranker, RerankError> {
    if corpus.is_empty() {
        return Err(RerankError::EmptyBatch);
    }
    if hp.metrics.is_empty() || hp.hidden_dim == 0 || hp.batch_size == 0 {
        return Err(RerankError::Hyperparams(
            "metrics, hidden_dim and batch_size must be non-empty/positive".into(),
        ));
    }
    if !(hp.learning_rate >= 0.0 && hp.learning_rate.is_finite()) {
        return Err(RerankError::Hyperparams(format!("learning rate {}", hp.learning_rate)));
    }
    let prepared = corpus
        .iter()
        .map(|e| prepare(e, &hp.metrics, featurizer))
        .collect::<Result<Vec<_>, _>>()?;
    let all: Vec<&PreparedExample> = prepared.iter().collect();

    let mut model = RerankerModel::init(
        featurizer.name(),
        featurizer.dim(),
        hp.hidden_dim,
        &hp.metrics,
        hp.seed,
    );
    let mut params = model.params();
    let mut best = params.clone();
    let mut best_loss = loss_and_grad(&model, &all).0;
    let mut history = vec![best_loss];
    let mut adam = Adam::new(params.len(), hp.learning_rate);
    let mut rng = rng_for(hp.seed, "reranker-shuffle");
    let mut order: Vec<usize> = (0..prepared.len()).collect();

    for epoch in 1..=hp.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hp.batch_size) {
            let batch: Vec<&PreparedExample> = chunk.iter().map(|&i| &prepared[i]).collect();
            model.set_params(&params);
            let (_, grad) = loss_and_grad(&model, &batch);
            adam.step(&mut params, &grad);
        }
        model.set_params(&params);
        let loss = loss_and_grad(&model, &all).0;
        history.push(loss);
        if !loss.is_finite() {
            return Err(RerankError::Diverged { epoch, loss, history });
        }
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(&params);
        }
    }
    model.set_params(&best);
    Ok(TrainedReranker { model, history })
}

/// Index of the row with the highest mean head probability; first wins ties.
pub fn select_from_head_probs(head_probs: &[Vec<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, probs) in head_probs.iter().enumerate() {
        let mean = probs.iter().sum::<f64>() / probs.len().max(1) as f64;
        if best.is_none_or(|(_, b)| mean > b) {
            best = Some((i, mean));
        }
    }
    best.map(|(i, _)| i)
}

pub fn select_best(
    model: &RerankerModel,
    featurizer: &dyn CandidateFeaturizer,
    candidates: &SummaryCandidateSet,
    document: &str,
) -> Result<(usize, String), RerankError> {
    check_dim(model, featurizer)?;
    if candidates.candidates.is_empty() {
        return Err(RerankError::NoCandidates);
    }
    let probs: Vec<Vec<f64>> = featurizer
        .features(document, &candidates.candidates)
        .iter()
        .map(|x| model.head_probabilities(x))
        .collect();
    let idx = select_from_head_probs(&probs).ok_or(RerankError::NoCandidates)?;
    Ok((idx, candidates.candidates[idx].clone()))
}
