//! Run configuration: defaults, TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use pgp_core::evaluation::{CvConfig, ModelKind};
use pgp_core::ingestion::CohortCriteria;
use pgp_core::synth::SynthConfig;
use pgp_core::{ArInput, FeatureOptions, FitConfig};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Visit files read by `preprocess` and `evaluate`.
    pub input: Vec<PathBuf>,
    pub schema: Option<PathBuf>,
    /// Models to evaluate. Personalized models also run their population
    /// baseline.
    pub models: Vec<ModelKind>,
    pub folds: usize,
    pub seed: u64,
    pub pca_ratio: f64,
    pub min_visits: usize,
    pub max_missing: f64,
    pub restarts: usize,
    /// Feed the current clinical status into auto-regressive inputs.
    pub include_status: bool,
    pub jobs: usize,
    pub output: PathBuf,
    /// Generator settings for `synth`; its seed is replaced by `seed`.
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let criteria = CohortCriteria::default();
        Self {
            input: Vec::new(),
            schema: None,
            models: vec![ModelKind::PgpAr],
            folds: 10,
            seed: 0,
            pca_ratio: FeatureOptions::default().pca_ratio,
            min_visits: criteria.min_visits,
            max_missing: criteria.max_missing,
            restarts: FitConfig::default().restarts,
            include_status: ArInput::default().include_cs,
            jobs: 1,
            output: PathBuf::from("pgp-out"),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with the file at `path`, if any.
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::input(format!("config {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::input(m));
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if !(self.pca_ratio > 0.0 && self.pca_ratio <= 1.0) {
            return bad(format!("pca_ratio must lie in (0, 1], got {}", self.pca_ratio));
        }
        if !(0.0..=1.0).contains(&self.max_missing) {
            return bad(format!("max_missing must lie in [0, 1], got {}", self.max_missing));
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        if self.models.is_empty() {
            return bad("no models selected".into());
        }
        Ok(())
    }

    pub fn criteria(&self) -> CohortCriteria {
        CohortCriteria { min_visits: self.min_visits, max_missing: self.max_missing }
    }

    /// Requested models plus the baselines of personalized ones, in
    /// canonical order.
    pub fn evaluated_models(&self) -> Vec<ModelKind> {
        let mut models: Vec<ModelKind> = self.models.iter().flat_map(|m| [*m, m.baseline()]).collect();
        models.sort();
        models.dedup();
        models
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            folds: self.folds,
            seed: self.seed,
            models: self.evaluated_models(),
            features: FeatureOptions { pca_ratio: self.pca_ratio, ar: ArInput { include_cs: self.include_status } },
            fit: FitConfig { restarts: self.restarts, ..FitConfig::default() },
            jobs: self.jobs,
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig { seed: self.seed, ..self.synth.clone() }
    }

    pub fn schema_path(&self) -> Result<&Path, Failure> {
        self.schema.as_deref().ok_or_else(|| Failure::input("a schema file is required (--schema)"))
    }

    pub fn inputs(&self) -> Result<&[PathBuf], Failure> {
        if self.input.is_empty() {
            return Err(Failure::input("at least one input file is required (--input)"));
        }
        Ok(&self.input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_protocol() {
        let c = RunConfig::default();
        assert_eq!((c.folds, c.pca_ratio, c.min_visits, c.max_missing), (10, 0.95, 11, 0.825));
        assert_eq!(c.models, vec![ModelKind::PgpAr]);
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig {
            schema: Some("schema.toml".into()),
            input: vec!["a.csv".into(), "b.csv".into()],
            models: vec![ModelKind::Gp, ModelKind::Pgp],
            ..RunConfig::default()
        };
        c.synth.n_patients = 7;
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let c: RunConfig =
            toml::from_str("folds = 5\nmodels = [\"gp\", \"pgp-ar\"]\n[synth]\nn_patients = 12\n").unwrap();
        assert_eq!(c.folds, 5);
        assert_eq!(c.models, vec![ModelKind::Gp, ModelKind::PgpAr]);
        assert_eq!(c.synth.n_patients, 12);
        assert_eq!(c.synth.progression_rate, SynthConfig::default().progression_rate);
        assert_eq!(c.pca_ratio, 0.95);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("fold = 5\n").is_err());
    }

    #[test]
    fn personalized_models_bring_their_baseline() {
        let c = RunConfig { models: vec![ModelKind::PgpAr, ModelKind::Gp], ..RunConfig::default() };
        assert_eq!(c.evaluated_models(), vec![ModelKind::Gp, ModelKind::GpAr, ModelKind::PgpAr]);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        for c in [
            RunConfig { folds: 1, ..RunConfig::default() },
            RunConfig { pca_ratio: 0.0, ..RunConfig::default() },
            RunConfig { restarts: 0, ..RunConfig::default() },
            RunConfig { jobs: 0, ..RunConfig::default() },
            RunConfig { models: vec![], ..RunConfig::default() },
        ] {
            assert_eq!(c.validate().unwrap_err().code, 2);
        }
    }
}
