//! Clickbait detection through summary re-ranking and prompt verbalizers.
//!
//! The pipeline has three stages:
//!
//! 1. [`summary_engine`] produces candidate summaries of the article body and
//!    [`reranker`] picks one using per-metric prediction heads trained against
//!    ROUGE supervision from [`text_metrics`].
//! 2. [`verbalizer_builder`] expands each label name into a set of label words
//!    using five strategies backed by the resources in [`lm_backend`].
//! 3. [`detector`] wraps headline and summary with a [`prompt_templates`]
//!    pattern, reads the mask distribution, and averages label-word
//!    probabilities to predict a label.
//!
//! [`datasets`] loads the corpora and draws few-shot splits; [`eval_harness`]
//! runs experiments, ablations and parameter sweeps over all of it.

pub mod datasets;
pub mod detector;
pub mod error;
pub mod eval_harness;
pub mod lm_backend;
pub mod optim;
pub mod prompt_templates;
pub mod reranker;
pub mod seed;
pub mod summary_engine;
pub mod text_metrics;
pub mod verbalizer_builder;

pub use error::{Error, Result};
