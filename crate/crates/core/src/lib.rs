//! Population and personalized Gaussian process forecasting of longitudinal
//! patient scores.

pub mod error;
pub mod evaluation;
pub mod features;
pub mod ingestion;
pub mod kernel;
pub mod optimize;
pub mod personalized;
pub mod population;
pub mod synth;

pub use error::{Error, Result};
pub use features::{ArInput, FeatureOptions, FoldTransform, PatientPairs, PatientSeries};
pub use ingestion::{PatientRecord, Schema, Visit};
pub use kernel::KernelParams;
pub use personalized::{adapt_predict, conditional_prior, run_patient, ConditionalPrior, PatientHistory};
pub use population::{fit, FitConfig, PairIndex, PopulationModel, Prediction, TrainingSet, Variant};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
