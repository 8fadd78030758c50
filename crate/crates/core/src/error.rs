use thiserror::Error;

use crate::datasets::DatasetError;
use crate::detector::DetectError;
use crate::eval_harness::EvalError;
use crate::lm_backend::BackendError;
use crate::prompt_templates::TemplateError;
use crate::reranker::RerankError;
use crate::summary_engine::SummaryError;
use crate::text_metrics::MetricError;
use crate::verbalizer_builder::VerbalizerError;

/// Crate-level error joining the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Verbalizer(#[from] VerbalizerError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
