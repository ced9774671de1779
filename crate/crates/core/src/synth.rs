//! Seeded synthetic longitudinal cohorts.
//!
//! Each patient follows a latent severity
//!
//! ```text
//! s_i(τ) = s₀ + r·τ + g(τ) + h·(β_i + ρ_i·τ)
//! ```
//!
//! where `g` is a smooth population component drawn once from a GP, `h` is
//! the heterogeneity knob (`offset_scale`) and `β_i`, `ρ_i` are the patient's
//! level and rate deviations. Scores are linear in severity plus a persistent
//! per-patient offset (also scaled by `h`) and visit noise; clinical status
//! comes from fixed severity thresholds and never reverts. Time-varying features are noisy
//! linear read-outs of severity; static features are drawn once per patient
//! and the genetic ones partly encode the patient's rate deviation.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalDist};

use crate::error::{Error, Result};
use crate::ingestion::{Modality, ModalityKind, PatientRecord, Schema, Visit, GRID_MONTHS, N_TARGETS, TARGET_RANGES};

/// Visit-count distribution: a normal discretized to integers and truncated
/// to `[min, max]`, with its location and scale chosen so the truncated
/// distribution has the requested mean and standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisitCounts {
    pub mean: f64,
    pub sd: f64,
    pub min: usize,
    pub max: usize,
}

impl Default for VisitCounts {
    fn default() -> Self {
        Self { mean: 7.334, sd: 4.033, min: 1, max: 19 }
    }
}

impl VisitCounts {
    fn pmf_for(&self, loc: f64, scale: f64) -> Vec<f64> {
        let n = NormalDist::new(loc, scale).expect("positive scale");
        let raw: Vec<f64> = (self.min..=self.max).map(|k| n.cdf(k as f64 + 0.5) - n.cdf(k as f64 - 0.5)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / total).collect()
    }

    fn moments(&self, pmf: &[f64]) -> (f64, f64) {
        let mean: f64 = pmf.iter().enumerate().map(|(i, p)| (self.min + i) as f64 * p).sum();
        let var: f64 = pmf.iter().enumerate().map(|(i, p)| ((self.min + i) as f64 - mean).powi(2) * p).sum();
        (mean, var.sqrt())
    }

    /// Probability of each count `min..=max` after calibrating location and
    /// scale to the target moments.
    pub fn pmf(&self) -> Vec<f64> {
        let (mut loc, mut scale) = (self.mean, self.sd);
        for _ in 0..500 {
            let (m, s) = self.moments(&self.pmf_for(loc, scale));
            if (m - self.mean).abs() < 1e-12 && (s - self.sd).abs() < 1e-12 {
                break;
            }
            loc += self.mean - m;
            scale = (scale * self.sd / s).clamp(1e-3, 1e3);
        }
        self.pmf_for(loc, scale)
    }

    /// Mean and standard deviation of [`Self::pmf`].
    pub fn realized_moments(&self) -> (f64, f64) {
        self.moments(&self.pmf())
    }
}

/// Number of feature columns per modality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureCounts {
    pub demographics: usize,
    pub genetics: usize,
    pub cognitive: usize,
    pub csf: usize,
    pub mri: usize,
    pub dti: usize,
}

impl Default for FeatureCounts {
    fn default() -> Self {
        Self { demographics: 3, genetics: 3, cognitive: 6, csf: 3, mri: 12, dti: 8 }
    }
}

impl FeatureCounts {
    fn by_kind(&self) -> [(ModalityKind, usize, &'static str); 6] {
        [
            (ModalityKind::Demographics, self.demographics, "demo"),
            (ModalityKind::Genetics, self.genetics, "gene"),
            (ModalityKind::Cognitive, self.cognitive, "cog"),
            (ModalityKind::Csf, self.csf, "csf"),
            (ModalityKind::Mri, self.mri, "mri"),
            (ModalityKind::Dti, self.dti, "dti"),
        ]
    }

    pub fn total(&self) -> usize {
        self.by_kind().iter().map(|(_, n, _)| n).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub visits: VisitCounts,
    pub features: FeatureCounts,
    /// Population severity at enrollment.
    pub baseline_severity: f64,
    /// Population severity increase per year.
    pub progression_rate: f64,
    /// Amplitude (standard deviation) of the smooth population component.
    pub trend_amplitude: f64,
    /// Length scale of the smooth population component, in years.
    pub trend_lengthscale: f64,
    /// Scales every per-patient deviation; 0 makes all patients identical.
    pub offset_scale: f64,
    /// Scales all observation noise.
    pub noise_scale: f64,
    /// Probability that a feature cell is missing.
    pub missing_rate: f64,
    /// Probability that a visit is followed by a skipped grid slot.
    pub gap_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_patients: 100,
            visits: VisitCounts::default(),
            features: FeatureCounts::default(),
            baseline_severity: 0.9,
            progression_rate: 0.2,
            trend_amplitude: 0.15,
            trend_lengthscale: 3.0,
            offset_scale: 1.0,
            noise_scale: 1.0,
            missing_rate: 0.1,
            gap_rate: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let scales = [
            ("progression_rate", self.progression_rate),
            ("trend_amplitude", self.trend_amplitude),
            ("offset_scale", self.offset_scale),
            ("noise_scale", self.noise_scale),
        ];
        for (name, v) in scales {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Input(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.trend_lengthscale.is_finite() && self.trend_lengthscale > 0.0) {
            return Err(Error::Input("trend_lengthscale must be > 0".into()));
        }
        for (name, p) in [("missing_rate", self.missing_rate), ("gap_rate", self.gap_rate)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Input(format!("{name} must be in [0, 1), got {p}")));
            }
        }
        let v = &self.visits;
        if v.min < 1
            || v.min > v.max
            || v.sd.is_nan()
            || v.sd <= 0.0
            || !(v.min as f64..=v.max as f64).contains(&v.mean)
        {
            return Err(Error::Input(format!("invalid visit-count distribution {v:?}")));
        }
        Ok(())
    }
}

/// A generated cohort and the schema describing its columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthCohort {
    pub schema: Schema,
    pub records: Vec<PatientRecord>,
}

// Score = intercept + slope·severity; per-patient offset sd; visit noise sd.
const SCORE_MODEL: [(f64, f64, f64, f64); 3] = [(29.5, -5.0, 1.5, 0.8), (8.0, 11.0, 3.5, 2.0), (0.3, 2.8, 0.7, 0.4)];
const LEVEL_SD: f64 = 0.5;
const RATE_SD: f64 = 0.35;
const CS_THRESHOLDS: [f64; 2] = [1.0, 2.0];
const CS_NOISE: f64 = 0.05;
const FEATURE_NOISE: f64 = 0.3;
const FEATURE_OFFSET_SD: f64 = 1.0;

/// Population-level quantities shared by every patient.
struct Population {
    trend: Vec<f64>,
    loadings: Vec<f64>,
    intercepts: Vec<f64>,
    gene_weights: Vec<f64>,
}

fn population(cfg: &SynthConfig, kinds: &[ModalityKind], grid_len: usize) -> Result<Population> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);

    let trend = if cfg.trend_amplitude > 0.0 {
        let years: Vec<f64> = (0..grid_len).map(|i| i as f64 * f64::from(GRID_MONTHS) / 12.0).collect();
        let var = cfg.trend_amplitude.powi(2);
        let l2 = 2.0 * cfg.trend_lengthscale.powi(2);
        let k = DMatrix::from_fn(grid_len, grid_len, |i, j| {
            var * (-(years[i] - years[j]).powi(2) / l2).exp() + if i == j { 1e-8 * var } else { 0.0 }
        });
        let chol = k.cholesky().ok_or_else(|| Error::Input("trend covariance not positive definite".into()))?;
        let z = DMatrix::from_fn(grid_len, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let g = chol.l() * z;
        // anchor at enrollment so the baseline stays where configured
        (0..grid_len).map(|i| g[(i, 0)] - g[(0, 0)]).collect()
    } else {
        vec![0.0; grid_len]
    };

    let mut loadings = Vec::with_capacity(kinds.len());
    let mut intercepts = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let strength = match kind {
            ModalityKind::Demographics | ModalityKind::Genetics => 0.0,
            ModalityKind::Cognitive => 1.2,
            ModalityKind::Csf => 0.8,
            ModalityKind::Mri => 0.6,
            ModalityKind::Dti => 0.4,
        };
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        loadings.push(sign * strength * rng.random_range(0.5..1.5));
        intercepts.push(rng.random_range(-5.0..5.0));
    }
    let gene_weights = kinds.iter().map(|_| rng.random_range(0.5..1.0)).collect();
    Ok(Population { trend, loadings, intercepts, gene_weights })
}

fn patient(
    cfg: &SynthConfig,
    pop: &Population,
    kinds: &[ModalityKind],
    pmf: &WeightedIndex<f64>,
    index: usize,
    id: String,
) -> Result<PatientRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64 + 1);
    let std_normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    let n_visits = cfg.visits.min + pmf.sample(&mut rng);
    let h = cfg.offset_scale;
    let level = LEVEL_SD * std_normal(&mut rng);
    let rate = RATE_SD * std_normal(&mut rng);
    let score_offsets: Vec<f64> = SCORE_MODEL.iter().map(|m| m.2 * std_normal(&mut rng)).collect();
    let feature_offsets: Vec<f64> = kinds.iter().map(|_| FEATURE_OFFSET_SD * std_normal(&mut rng)).collect();
    let statics: Vec<f64> = kinds
        .iter()
        .zip(&pop.gene_weights)
        .map(|(k, w)| match k {
            ModalityKind::Genetics => h * w * rate / RATE_SD + (1.0 - w * w).sqrt() * std_normal(&mut rng),
            _ => std_normal(&mut rng),
        })
        .collect();

    let mut month = 0u32;
    let mut status = 0usize;
    let mut visits = Vec::with_capacity(n_visits);
    for _ in 0..n_visits {
        let slot = (month / GRID_MONTHS) as usize;
        let years = f64::from(month) / 12.0;
        let trend = pop.trend[slot.min(pop.trend.len() - 1)];
        let severity = cfg.baseline_severity + cfg.progression_rate * years + trend + h * (level + rate * years);

        let mut targets = [None; N_TARGETS];
        for (j, (a, b, _, noise)) in SCORE_MODEL.iter().enumerate() {
            let v = a + b * severity + h * score_offsets[j] + cfg.noise_scale * noise * std_normal(&mut rng);
            let (lo, hi) = TARGET_RANGES[j];
            targets[j] = Some(v.clamp(lo, hi));
        }
        let noisy = severity + cfg.noise_scale * CS_NOISE * std_normal(&mut rng);
        status = status.max(CS_THRESHOLDS.iter().filter(|&&t| noisy >= t).count());
        targets[N_TARGETS - 1] = Some(status as f64);

        let features = kinds
            .iter()
            .enumerate()
            .map(|(j, kind)| {
                let value = if kind.is_static() {
                    pop.intercepts[j] + statics[j]
                } else {
                    pop.intercepts[j]
                        + pop.loadings[j] * severity
                        + h * feature_offsets[j]
                        + cfg.noise_scale * FEATURE_NOISE * std_normal(&mut rng)
                };
                let missing = rng.random_bool(cfg.missing_rate);
                (!missing).then_some(value)
            })
            .collect();
        visits.push(Visit { month, features, targets });
        month += GRID_MONTHS * if rng.random_bool(cfg.gap_rate) { 2 } else { 1 };
    }
    PatientRecord::new(id, visits)
}

/// Builds the cohort. The same configuration always yields the same cohort,
/// and each patient depends only on the seed and its own position.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCohort> {
    cfg.validate()?;
    let mut modalities = Vec::new();
    for (kind, n, prefix) in cfg.features.by_kind() {
        if n > 0 {
            modalities.push(Modality { kind, features: (1..=n).map(|i| format!("{prefix}_{i}")).collect() });
        }
    }
    let schema = Schema::new(modalities)?;
    let kinds = schema.feature_kinds();
    // a patient can span at most twice its visit count in grid slots
    let grid_len = 2 * cfg.visits.max + 1;
    let pop = population(cfg, &kinds, grid_len)?;
    let pmf = WeightedIndex::new(cfg.visits.pmf()).map_err(|e| Error::Input(e.to_string()))?;
    let width = cfg.n_patients.to_string().len().max(4);
    let records = (0..cfg.n_patients)
        .map(|i| patient(cfg, &pop, &kinds, &pmf, i, format!("S{:0width$}", i + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthCohort { schema, records })
}
