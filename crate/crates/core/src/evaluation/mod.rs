//! Cross-validated evaluation: folds, metrics and reports.

mod cv;
mod folds;
mod metrics;
mod report;

pub use cv::{cross_validate, derive_seed, CvConfig, CvResult, FittedModel, FoldResult, ModelKind, PointPrediction};
pub use folds::{make_folds, FoldPlan};
pub use metrics::{accuracy, confusion, cs_discretize, icc31, mae, paired_t_test, Confusion, MeanSd, PairedTTest};
pub use report::{
    compare, conversion_stats, per_patient_report, summarize, Comparison, ConversionEvent, ConversionStats,
    DeltaSummary, FoldMetrics, MetricsReport, ModelSummary, PatientRow, PerPatientReport, Transition, METRICS_FORMAT,
    METRICS_VERSION,
};
