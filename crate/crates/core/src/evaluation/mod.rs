//! Ground-truth scoring and the synthetic corpus machinery behind it.

mod matching;
mod runner;
mod synth;

pub use matching::{
    match_points, precision, recall, score, EvalResult, FeatureLabel, FeaturePoint,
    FeaturePointSet, LabelTolerances, MatchCounts, Matching,
};
pub use runner::{
    evaluate_pipeline, report_to_feature_points, CorpusItem, EvalConfig, EvaluationReport,
    ItemReport,
};
pub use synth::{
    render_synthetic_trace, synthesize_signal, DistortionSpec, GroundTruth, PaperSpec,
    SyntheticTraceSpec, WaveComponent, WaveformSpec, GAIN_MM_PER_MV, PAPER_SPEED_MM_PER_S,
    TRACE_HEIGHT_MM,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("invalid synthetic trace spec: {0}")]
    InvalidSpec(String),
}
