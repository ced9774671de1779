//! Patient-independent cross-validation of the four model kinds.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::folds::{make_folds, FoldPlan};
use crate::error::{Error, Result};
use crate::features::{build_pairs, patient_pairs, FeatureOptions, FoldTransform, PatientSeries};
use crate::ingestion::{PatientRecord, N_TARGETS};
use crate::kernel::KernelParams;
use crate::personalized::run_patient;
use crate::population::{fit, FitConfig, PopulationModel, Prediction, Variant};

/// A model as compared in the reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Gp,
    GpAr,
    Pgp,
    PgpAr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Gp, ModelKind::GpAr, ModelKind::Pgp, ModelKind::PgpAr];

    pub fn variant(self) -> Variant {
        match self {
            ModelKind::Gp | ModelKind::Pgp => Variant::Standard,
            ModelKind::GpAr | ModelKind::PgpAr => Variant::AutoRegressive,
        }
    }

    pub fn personalized(self) -> bool {
        matches!(self, ModelKind::Pgp | ModelKind::PgpAr)
    }

    /// Display name used in tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Gp => "GP",
            ModelKind::GpAr => "GP(AR)",
            ModelKind::Pgp => "pGP",
            ModelKind::PgpAr => "pGP(AR)",
        }
    }

    /// Name used on the command line and in file names.
    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Gp => "gp",
            ModelKind::GpAr => "gp-ar",
            ModelKind::Pgp => "pgp",
            ModelKind::PgpAr => "pgp-ar",
        }
    }

    /// The population model this one personalizes, or itself.
    pub fn baseline(self) -> ModelKind {
        match self {
            ModelKind::Pgp => ModelKind::Gp,
            ModelKind::PgpAr => ModelKind::GpAr,
            other => other,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.slug() == s)
            .ok_or_else(|| Error::Input(format!("unknown model {s:?} (expected gp, gp-ar, pgp or pgp-ar)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    pub models: Vec<ModelKind>,
    pub features: FeatureOptions,
    /// Optimizer settings; the seed is replaced by one derived per fold.
    pub fit: FitConfig,
    /// Upper bound on folds evaluated concurrently.
    pub jobs: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            seed: 0,
            models: ModelKind::ALL.to_vec(),
            features: FeatureOptions::default(),
            fit: FitConfig::default(),
            jobs: 1,
        }
    }
}

/// One next-visit prediction in clinical units together with what was
/// actually recorded at that visit (`None` where the score was missing).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointPrediction {
    pub patient_id: String,
    /// Grid index of the predicted visit.
    pub visit: usize,
    pub mean: [f64; N_TARGETS],
    pub variance: [f64; N_TARGETS],
    pub truth: [Option<f64>; N_TARGETS],
}

/// Population model fitted in one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub variant: Variant,
    /// Optimizer seed derived for this fold and variant.
    pub seed: u64,
    pub params: KernelParams,
    pub nlml: f64,
    pub jitter: f64,
    pub training_rows: usize,
    pub input_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    /// Sorted ids of every patient the fold's models saw.
    pub training_patients: Vec<String>,
    pub test_patients: Vec<String>,
    pub pca_components: usize,
    pub fitted: Vec<FittedModel>,
    pub predictions: Vec<(ModelKind, Vec<PointPrediction>)>,
}

impl FoldResult {
    pub fn predictions_of(&self, model: ModelKind) -> Option<&[PointPrediction]> {
        self.predictions.iter().find(|(m, _)| *m == model).map(|(_, p)| p.as_slice())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub config: CvConfig,
    pub plan: FoldPlan,
    pub folds: Vec<FoldResult>,
}

impl CvResult {
    /// Every prediction of `model`, fold by fold.
    pub fn predictions_of(&self, model: ModelKind) -> Vec<&PointPrediction> {
        self.folds.iter().filter_map(|f| f.predictions_of(model)).flatten().collect()
    }
}

/// Stateless seed mixing so every fold and model draws an independent,
/// schedule-free random stream.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

fn to_point(ft: &FoldTransform, record: &PatientRecord, visit_pos: usize, pred: &Prediction) -> PointPrediction {
    let mut mean = [0.0; N_TARGETS];
    let mut variance = [0.0; N_TARGETS];
    for j in 0..N_TARGETS {
        mean[j] = ft.target_to_raw(j, pred.mean[j]);
        variance[j] = pred.variance[j] * ft.target_variance_scale(j);
    }
    let visit = &record.visits[visit_pos];
    PointPrediction {
        patient_id: record.patient_id.clone(),
        visit: visit.visit_index(),
        mean,
        variance,
        truth: visit.targets,
    }
}

fn run_fold(
    records: &[PatientRecord],
    n_features: usize,
    plan: &FoldPlan,
    fold: usize,
    config: &CvConfig,
) -> Result<FoldResult> {
    let (test, train): (Vec<&PatientRecord>, Vec<&PatientRecord>) =
        records.iter().partition(|r| plan.fold_of(&r.patient_id) == Some(fold));
    let train: Vec<PatientRecord> = train.into_iter().cloned().collect();
    let ft = FoldTransform::fit(&train, n_features, config.features)?;
    let train_series = train.iter().map(|r| ft.transform(r)).collect::<Result<Vec<_>>>()?;
    let test_series: Vec<(&PatientRecord, PatientSeries)> =
        test.iter().map(|r| Ok((*r, ft.transform(r)?))).collect::<Result<_>>()?;

    let mut fitted = Vec::new();
    let mut predictions = Vec::new();
    for (tag, variant) in [(0u64, Variant::Standard), (1, Variant::AutoRegressive)] {
        if !config.models.iter().any(|m| m.variant() == variant) {
            continue;
        }
        let set = build_pairs(&train_series, variant, config.features.ar)?;
        let fit_cfg = FitConfig { seed: derive_seed(config.seed, &[fold as u64, tag]), ..config.fit.clone() };
        let model = fit(&set, &fit_cfg)?;
        log::info!("fold {fold} {variant:?}: fitted on {} pairs, params {:?}", set.len(), model.params());
        fitted.push(FittedModel {
            variant,
            seed: fit_cfg.seed,
            params: *model.params(),
            nlml: model.fit_report().map_or(f64::NAN, |r| r.nlml),
            jitter: model.jitter(),
            training_rows: set.len(),
            input_dim: set.input_dim(),
        });
        for kind in config.models.iter().filter(|m| m.variant() == variant) {
            predictions.push((*kind, predict_patients(&model, &ft, &test_series, *kind)?));
        }
    }
    predictions.sort_by_key(|(m, _)| *m);

    let mut training_patients: Vec<String> = train.iter().map(|r| r.patient_id.clone()).collect();
    training_patients.sort();
    let mut test_patients: Vec<String> = test.iter().map(|r| r.patient_id.clone()).collect();
    test_patients.sort();
    Ok(FoldResult { fold, training_patients, test_patients, pca_components: ft.pca.k(), fitted, predictions })
}

fn predict_patients(
    model: &PopulationModel,
    ft: &FoldTransform,
    patients: &[(&PatientRecord, PatientSeries)],
    kind: ModelKind,
) -> Result<Vec<PointPrediction>> {
    let mut out = Vec::new();
    for (record, series) in patients {
        let pairs = patient_pairs(series, kind.variant(), ft.options.ar);
        let preds =
            if kind.personalized() { run_patient(model, &pairs)? } else { model.predict_many(&pairs.inputs)? };
        for (k, p) in preds.iter().enumerate() {
            out.push(to_point(ft, record, k + 1, p));
        }
    }
    Ok(out)
}

/// Runs every fold. Folds are independent, so they may be spread over up to
/// `config.jobs` threads without changing any result.
pub fn cross_validate(records: &[PatientRecord], n_features: usize, config: &CvConfig) -> Result<CvResult> {
    let mut config = config.clone();
    config.models.sort();
    config.models.dedup();
    let config = &config;
    if config.models.is_empty() {
        return Err(Error::Input("no models requested".into()));
    }
    let ids: Vec<String> = records.iter().map(|r| r.patient_id.clone()).collect();
    if BTreeSet::from_iter(ids.iter()).len() != ids.len() {
        return Err(Error::Input("duplicate patient ids in cohort".into()));
    }
    let plan = make_folds(&ids, config.folds, config.seed)?;

    let slots: Mutex<Vec<Option<Result<FoldResult>>>> = Mutex::new((0..config.folds).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = config.jobs.clamp(1, config.folds);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let fold = next.fetch_add(1, Ordering::SeqCst);
                if fold >= config.folds {
                    break;
                }
                let r = run_fold(records, n_features, &plan, fold, config);
                slots.lock().expect("fold results lock")[fold] = Some(r);
            });
        }
    });
    let folds = slots
        .into_inner()
        .expect("fold results lock")
        .into_iter()
        .map(|r| r.expect("every fold ran"))
        .collect::<Result<Vec<_>>>()?;
    Ok(CvResult { config: config.clone(), plan, folds })
}
