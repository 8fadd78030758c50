//! Verbalizer scoring and the trainable calibration head.
//!
//! A label's score is the mean mask probability of its label words, and the
//! untrained prediction is the label with the highest score. The calibration
//! head maps those scores to class probabilities with a per-label weight
//! and bias over the relative scores `s_y / sum(s)`; at its initialization
//! (weights 1, biases 0) it predicts exactly the untrained argmax.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm_backend::{mask_distribution, BackendError, MaskDistribution, MaskScorer};
use crate::optim::Adam;
use crate::prompt_templates::RenderedPrompt;
use crate::seed::rng_for;
use crate::verbalizer_builder::Verbalizer;

/// Clamp for the cross-entropy loss mode.
pub const CE_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("label `{0}` has no label words")]
    EmptyLabelWords(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
    #[error("training diverged at epoch {epoch}; loss history {history:?}")]
    Diverged { epoch: usize, history: Vec<f64> },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("label index {label} out of range for {num_labels} labels")]
    BadLabel { label: usize, num_labels: usize },
    #[error("head file: {0}")]
    HeadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("detection record on line {line}: {source}")]
    Record {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Mean label-word probability per label, in verbalizer label order.
    pub per_label_score: Vec<f64>,
    pub predicted: usize,
    /// Mask probabilities of the verbalizer words.
    pub mask_probs: BTreeMap<String, f64>,
    /// Every label scored zero.
    pub degenerate: bool,
}

/// Index of the largest value, first index on ties.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Averages label-word probabilities of an already computed distribution.
pub fn score_distribution(
    dist: &MaskDistribution,
    verbalizer: &Verbalizer,
) -> Result<DetectionResult, DetectError> {
    let mut per_label_score = Vec::with_capacity(verbalizer.labels().len());
    let mut mask_probs = BTreeMap::new();
    for (y, label) in verbalizer.labels().iter().enumerate() {
        let entries = verbalizer.entries(y);
        if entries.is_empty() {
            return Err(DetectError::EmptyLabelWords(label.clone()));
        }
        let mut sum = 0.0;
        for e in entries {
            let p = dist.prob(&e.word);
            mask_probs.insert(e.word.clone(), p);
            sum += p;
        }
        per_label_score.push(sum / entries.len() as f64);
    }
    let degenerate = per_label_score.iter().all(|s| *s == 0.0);
    if degenerate {
        log::warn!("no verbalizer word has mass at the mask; defaulting to the first label");
    } else if per_label_score
        .iter()
        .filter(|s| **s == per_label_score[argmax_first(&per_label_score)])
        .count()
        > 1
    {
        log::debug!("tied label scores {per_label_score:?}; taking the first label");
    }
    Ok(DetectionResult {
        predicted: argmax_first(&per_label_score),
        per_label_score,
        mask_probs,
        degenerate,
    })
}

pub fn score(
    prompt: &RenderedPrompt,
    verbalizer: &Verbalizer,
    scorer: &dyn MaskScorer,
) -> Result<DetectionResult, DetectError> {
    let dist = mask_distribution(prompt, scorer)?;
    score_distribution(&dist, verbalizer)
}

/// Scores many prompts, in parallel when the scorer allows it. Output order
/// follows input order.
pub fn score_batch(
    prompts: &[RenderedPrompt],
    verbalizer: &Verbalizer,
    scorer: &dyn MaskScorer,
) -> Vec<Result<DetectionResult, DetectError>> {
    if scorer.concurrent_safe() {
        prompts.par_iter().map(|p| score(p, verbalizer, scorer)).collect()
    } else {
        prompts.iter().map(|p| score(p, verbalizer, scorer)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean squared error between 1 and the true-class probability.
    #[default]
    SquaredError,
    /// Mean negative log true-class probability.
    CrossEntropy,
}

fn squared_norm(params: &[f64]) -> f64 {
    params.iter().map(|p| p * p).sum()
}

/// `(1/N) sum_i err_i + lambda * ||params||^2`, where `err_i` depends on
/// `kind` and the probability given to the true label of example `i`.
pub fn detection_loss(
    predictions: &[Vec<f64>],
    labels: &[usize],
    params: &[f64],
    lambda: f64,
    kind: LossKind,
) -> Result<f64, DetectError> {
    let n = predictions.len().max(1) as f64;
    let mut data = 0.0;
    for (pred, &y) in predictions.iter().zip(labels) {
        let p = *pred.get(y).ok_or(DetectError::BadLabel {
            label: y,
            num_labels: pred.len(),
        })?;
        data += match kind {
            LossKind::SquaredError => (1.0 - p).powi(2),
            LossKind::CrossEntropy => -p.max(CE_EPS).ln(),
        };
    }
    let loss = data / n + lambda * squared_norm(params);
    if !loss.is_finite() {
        return Err(DetectError::NonFiniteLoss(loss));
    }
    Ok(loss)
}

/// Per-label weights and biases over relative label scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationHead {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Label scores scaled to sum to one; uniform when all are zero.
pub fn relative_scores(scores: &[f64]) -> Vec<f64> {
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        scores.iter().map(|s| s / total).collect()
    } else {
        vec![1.0 / scores.len().max(1) as f64; scores.len()]
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

impl CalibrationHead {
    pub fn identity(num_labels: usize) -> Self {
        Self {
            weights: vec![1.0; num_labels],
            biases: vec![0.0; num_labels],
        }
    }

    pub fn num_labels(&self) -> usize {
        self.weights.len()
    }

    pub fn params(&self) -> Vec<f64> {
        self.weights.iter().chain(&self.biases).copied().collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let l = self.num_labels();
        assert_eq!(flat.len(), 2 * l, "parameter vector length");
        self.weights.copy_from_slice(&flat[..l]);
        self.biases.copy_from_slice(&flat[l..]);
    }

    fn logits(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.weights.iter().zip(&self.biases))
            .map(|(f, (w, b))| w * f + b)
            .collect()
    }

    /// Class probabilities from per-label verbalizer scores.
    pub fn probabilities(&self, per_label_score: &[f64]) -> Vec<f64> {
        softmax(&self.logits(&relative_scores(per_label_score)))
    }

    pub fn predict(&self, per_label_score: &[f64]) -> usize {
        argmax_first(&self.logits(&relative_scores(per_label_score)))
    }

    pub fn save(&self, path: &Path) -> Result<(), DetectError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| DetectError::HeadFile(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DetectError> {
        let head: Self = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| DetectError::HeadFile(e.to_string()))?;
        if head.weights.len() != head.biases.len() || head.weights.is_empty() {
            return Err(DetectError::HeadFile("weights and biases differ in length".into()));
        }
        if !head.params().iter().all(|p| p.is_finite()) {
            return Err(DetectError::HeadFile("non-finite parameter".into()));
        }
        Ok(head)
    }
}

/// Loss of the head over `(features, label)` pairs and its gradient with
/// respect to [`CalibrationHead::params`]. `features` are relative scores,
/// already dropped out when training.
pub fn head_loss_and_grad(
    head: &CalibrationHead,
    features: &[Vec<f64>],
    labels: &[usize],
    lambda: f64,
    kind: LossKind,
) -> Result<(f64, Vec<f64>), DetectError> {
    let l = head.num_labels();
    let n = features.len().max(1) as f64;
    let params = head.params();
    let mut grad: Vec<f64> = params.iter().map(|p| 2.0 * lambda * p).collect();
    let mut preds = Vec::with_capacity(features.len());
    for (f, &y) in features.iter().zip(labels) {
        if y >= l {
            return Err(DetectError::BadLabel { label: y, num_labels: l });
        }
        let p = softmax(&head.logits(f));
        let pt = p[y];
        for k in 0..l {
            let delta = if k == y { 1.0 } else { 0.0 };
            let dz = match kind {
                LossKind::SquaredError => -2.0 * (1.0 - pt) * pt * (delta - p[k]) / n,
                LossKind::CrossEntropy => {
                    if pt < CE_EPS {
                        0.0
                    } else {
                        (p[k] - delta) / n
                    }
                }
            };
            grad[k] += dz * f[k];
            grad[l + k] += dz;
        }
        preds.push(p);
    }
    let loss = detection_loss(&preds, labels, &params, lambda, kind)?;
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorTrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub weight_decay: f64,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for DetectorTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 4e-5,
            batch_size: 32,
            epochs: 10,
            dropout: 0.5,
            weight_decay: 1e-5,
            loss: LossKind::SquaredError,
            seed: 0,
        }
    }
}

impl DetectorTrainConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |m: &str| Err(DetectError::Config(m.to_owned()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub head: CalibrationHead,
    /// Training loss before the first epoch and after each epoch.
    pub history: Vec<f64>,
}

impl TrainOutcome {
    /// Loss of the returned head, the minimum of the history.
    pub fn final_loss(&self) -> f64 {
        self.history.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Trains the calibration head on per-label verbalizer scores.
///
/// Dropout is applied to the head inputs during training only. The returned
/// head is the snapshot with the lowest full-set loss, so its loss never
/// exceeds the initial one.
pub fn train_head(
    scores: &[Vec<f64>],
    labels: &[usize],
    num_labels: usize,
    config: &DetectorTrainConfig,
) -> Result<TrainOutcome, DetectError> {
    config.validate()?;
    if scores.is_empty() {
        return Err(DetectError::EmptyDataset);
    }
    let features: Vec<Vec<f64>> = scores.iter().map(|s| relative_scores(s)).collect();
    let mut head = CalibrationHead::identity(num_labels);
    let full_loss = |h: &CalibrationHead| {
        head_loss_and_grad(h, &features, labels, config.weight_decay, config.loss).map(|(l, _)| l)
    };
    let mut params = head.params();
    let mut best = params.clone();
    let mut best_loss = full_loss(&head)?;
    let mut history = vec![best_loss];
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut rng = rng_for(config.seed, "detector-train");
    let mut order: Vec<usize> = (0..features.len()).collect();
    let keep = 1.0 - config.dropout;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch_x: Vec<Vec<f64>> = chunk
                .iter()
                .map(|&i| {
                    features[i]
                        .iter()
                        .map(|f| {
                            if config.dropout > 0.0 && rng.gen::<f64>() >= keep {
                                0.0
                            } else {
                                f / keep
                            }
                        })
                        .collect()
                })
                .collect();
            let batch_y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            head.set_params(&params);
            let (_, grad) = head_loss_and_grad(&head, &batch_x, &batch_y, config.weight_decay, config.loss)?;
            adam.step(&mut params, &grad);
        }
        head.set_params(&params);
        let loss = match full_loss(&head) {
            Ok(l) => l,
            Err(_) => {
                history.push(f64::NAN);
                return Err(DetectError::Diverged { epoch, history });
            }
        };
        history.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(&params);
        }
    }
    head.set_params(&best);
    Ok(TrainOutcome { head, history })
}

/// Scores the labeled prompts with the verbalizer, then trains the head.
pub fn train_detector(
    examples: &[(RenderedPrompt, usize)],
    verbalizer: &Verbalizer,
    scorer: &dyn MaskScorer,
    config: &DetectorTrainConfig,
) -> Result<TrainOutcome, DetectError> {
    if examples.is_empty() {
        return Err(DetectError::EmptyDataset);
    }
    let prompts: Vec<RenderedPrompt> = examples.iter().map(|(p, _)| p.clone()).collect();
    let scores = score_batch(&prompts, verbalizer, scorer)
        .into_iter()
        .map(|r| r.map(|d| d.per_label_score))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<usize> = examples.iter().map(|(_, y)| *y).collect();
    train_head(&scores, &labels, verbalizer.labels().len(), config)
}

/// One line of detection output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub id: String,
    pub scores: BTreeMap<String, f64>,
    pub predicted: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    pub template_id: u32,
    pub verbalizer_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

pub fn write_records<W: Write>(mut out: W, records: &[DetectionRecord]) -> Result<(), DetectError> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<DetectionRecord>, DetectError> {
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| DetectError::Record { line: i + 1, source })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Vec<String> {
        vec!["clickbait".into(), "news".into()]
    }

    fn dist(pairs: &[(&str, f64)]) -> MaskDistribution {
        MaskDistribution::new(pairs.iter().map(|(w, p)| (w.to_string(), *p)).collect()).unwrap()
    }

    #[test]
    fn averaged_scores() {
        let v = Verbalizer::from_words(
            &labels(),
            &[vec!["clickbait".into(), "misleading".into()], vec!["news".into()]],
        );
        let d = dist(&[("clickbait", 0.10), ("misleading", 0.30), ("news", 0.15), ("other", 0.45)]);
        let r = score_distribution(&d, &v).unwrap();
        assert!((r.per_label_score[0] - 0.20).abs() < 1e-12);
        assert!((r.per_label_score[1] - 0.15).abs() < 1e-12);
        assert_eq!(r.predicted, 0);
        assert_eq!(r.mask_probs.len(), 3);
    }

    #[test]
    fn singleton_and_degenerate() {
        let v = Verbalizer::label_names_only(&labels());
        let d = dist(&[("clickbait", 0.2), ("news", 0.7), ("x", 0.1)]);
        let r = score_distribution(&d, &v).unwrap();
        assert_eq!(r.per_label_score, vec![0.2, 0.7]);
        assert_eq!(r.predicted, 1);

        let d = dist(&[("x", 1.0)]);
        let r = score_distribution(&d, &v).unwrap();
        assert_eq!(r.per_label_score, vec![0.0, 0.0]);
        assert!(r.degenerate);
        assert_eq!(r.predicted, 0);
    }

    #[test]
    fn empty_label_words_rejected() {
        let v = Verbalizer::from_words(&labels(), &[vec!["clickbait".into()], vec![]]);
        assert!(matches!(
            score_distribution(&dist(&[("x", 1.0)]), &v),
            Err(DetectError::EmptyLabelWords(l)) if l == "news"
        ));
    }

    #[test]
    fn loss_examples() {
        let k = LossKind::SquaredError;
        assert_eq!(detection_loss(&[vec![1.0, 0.0]], &[0], &[], 0.0, k).unwrap(), 0.0);
        let two = [vec![0.5, 0.5], vec![0.5, 0.5]];
        assert!((detection_loss(&two, &[0, 1], &[], 0.0, k).unwrap() - 0.25).abs() < 1e-12);
        let norm2 = [1.0, 1.0];
        assert!((detection_loss(&[vec![1.0, 0.0]], &[0], &norm2, 1.0, k).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            detection_loss(&[vec![1.0]], &[0], &[f64::INFINITY], 1.0, k),
            Err(DetectError::NonFiniteLoss(_))
        ));
        let ce = detection_loss(&[vec![0.5, 0.5]], &[1], &[], 0.0, LossKind::CrossEntropy).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn identity_head_matches_argmax() {
        let head = CalibrationHead::identity(2);
        assert_eq!(head.predict(&[0.2, 0.15]), 0);
        assert_eq!(head.predict(&[0.1, 0.15]), 1);
        assert_eq!(head.predict(&[0.0, 0.0]), 0);
    }

    #[test]
    fn zero_rate_leaves_head() {
        let config = DetectorTrainConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        let out = train_head(&[vec![0.3, 0.1], vec![0.1, 0.2]], &[0, 1], 2, &config).unwrap();
        assert_eq!(out.head, CalibrationHead::identity(2));
        assert_eq!(out.history.len(), 11);
    }

    #[test]
    fn heavy_regularization_shrinks_params() {
        let config = DetectorTrainConfig {
            learning_rate: 0.05,
            weight_decay: 1e6,
            epochs: 60,
            dropout: 0.0,
            ..Default::default()
        };
        let scores = vec![vec![0.3, 0.1], vec![0.1, 0.2], vec![0.25, 0.2]];
        let out = train_head(&scores, &[0, 1, 0], 2, &config).unwrap();
        let norm = squared_norm(&out.head.params()).sqrt();
        assert!(norm < 0.1, "norm {norm}");
        assert!(out.final_loss() <= out.history[0]);
    }

    #[test]
    fn learns_a_threshold_the_argmax_misses() {
        // Clickbait always scores higher; only the margin separates classes.
        let scores: Vec<Vec<f64>> = (0..10)
            .map(|i| if i % 2 == 0 { vec![0.30, 0.20] } else { vec![0.22, 0.20] })
            .collect();
        let labels: Vec<usize> = (0..10).map(|i| if i % 2 == 0 { 0 } else { 1 }).collect();
        let untrained = CalibrationHead::identity(2);
        let acc0 = scores.iter().zip(&labels).filter(|(s, y)| untrained.predict(s) == **y).count();
        assert_eq!(acc0, 5);
        let config = DetectorTrainConfig {
            learning_rate: 0.2,
            batch_size: 4,
            epochs: 10,
            dropout: 0.0,
            weight_decay: 0.0,
            loss: LossKind::CrossEntropy,
            seed: 1,
        };
        let out = train_head(&scores, &labels, 2, &config).unwrap();
        let acc = scores.iter().zip(&labels).filter(|(s, y)| out.head.predict(s) == **y).count();
        assert_eq!(acc, 10, "history {:?}", out.history);
    }

    #[test]
    fn head_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("head.json");
        let head = CalibrationHead {
            weights: vec![1.5, 0.5],
            biases: vec![-0.1, 0.1],
        };
        head.save(&path).unwrap();
        assert_eq!(CalibrationHead::load(&path).unwrap(), head);
    }
}
