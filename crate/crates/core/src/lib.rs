//! Interpretable text-quality scoring: LLM-judged and quantitative criteria
//! are weighted by how well they separate low- from high-quality texts, with
//! weights derived from a pairwise comparison matrix.

pub mod ahp;
pub mod dataset;
pub mod discriminate;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod partition;
pub mod pipeline;
pub mod scorer;
pub mod synth;

pub use ahp::{ComparisonMatrix, ConsistencyReport, EigenResult};
pub use dataset::{load_dataset, load_texts, DatasetSchema};
pub use discriminate::{CriterionReport, DiscriminativenessReport, DistributionPair};
pub use error::{Error, Result};
pub use inference::{BaselineAggregator, ScoredText};
pub use metrics::EvaluationReport;
pub use model::{
    load_criteria, load_model, save_model, CriterionKind, CriterionSpec, FitMetadata, Measure, MeasureSpec, PromptSpec,
    Scaling, ScoreMatrix, SignalKind, SignalValue, TextSample, WeightModel, WeightModelParts,
};
pub use partition::{GroupPair, PartitionConfig};
pub use pipeline::{FitConfig, FitOutcome};
pub use scorer::{JudgeResponse, Scorer, ScorerBackend};
