//! Fold aggregation and the written reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cv::{CvResult, ModelKind, PointPrediction};
use super::metrics::{confusion, cs_discretize, icc31, mae, paired_t_test, Confusion, MeanSd, PairedTTest};
use crate::error::{Error, Result};
use crate::ingestion::{PatientRecord, CS, N_TARGETS, TARGET_NAMES};

pub const METRICS_FORMAT: &str = "pgp-metrics";
pub const METRICS_VERSION: u32 = 1;

/// Scores of one model on one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    /// NaN where the fold has no observed value of the target.
    pub mae: [f64; N_TARGETS],
    pub icc: [f64; N_TARGETS],
    pub accuracy: f64,
    pub evaluated: [usize; N_TARGETS],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelKind,
    pub label: String,
    pub mae: [MeanSd; N_TARGETS],
    pub icc: [MeanSd; N_TARGETS],
    pub accuracy: MeanSd,
    /// Pooled over all folds.
    pub confusion: Confusion,
    pub folds: Vec<FoldMetrics>,
}

fn observed(preds: &[PointPrediction], j: usize) -> (Vec<f64>, Vec<f64>) {
    preds.iter().filter_map(|p| p.truth[j].map(|t| (p.mean[j], t))).unzip()
}

fn status_labels(preds: &[PointPrediction]) -> Result<(Vec<u8>, Vec<u8>)> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for p in preds {
        if let Some(t) = p.truth[CS] {
            pred.push(cs_discretize(p.mean[CS])?);
            truth.push(t as u8);
        }
    }
    Ok((pred, truth))
}

fn fold_metrics(fold: usize, preds: &[PointPrediction]) -> Result<(FoldMetrics, Confusion)> {
    let mut m = FoldMetrics {
        fold,
        mae: [f64::NAN; N_TARGETS],
        icc: [f64::NAN; N_TARGETS],
        accuracy: f64::NAN,
        evaluated: [0; N_TARGETS],
    };
    for j in 0..N_TARGETS {
        let (p, t) = observed(preds, j);
        m.evaluated[j] = p.len();
        if !p.is_empty() {
            m.mae[j] = mae(&p, &t)?;
        }
        if p.len() >= 2 {
            m.icc[j] = icc31(&p, &t)?;
        }
    }
    let (p, t) = status_labels(preds)?;
    let c = confusion(&p, &t)?;
    m.accuracy = c.accuracy();
    Ok((m, c))
}

pub fn summarize(cv: &CvResult, model: ModelKind) -> Result<ModelSummary> {
    let mut folds = Vec::new();
    let mut pooled = Confusion::default();
    for f in &cv.folds {
        let preds =
            f.predictions_of(model).ok_or_else(|| Error::Input(format!("model {} was not evaluated", model.slug())))?;
        let (m, c) = fold_metrics(f.fold, preds)?;
        pooled.add(&c);
        folds.push(m);
    }
    let column = |get: &dyn Fn(&FoldMetrics) -> f64| MeanSd::of(&folds.iter().map(get).collect::<Vec<_>>());
    let mut mae = [MeanSd { mean: f64::NAN, sd: f64::NAN }; N_TARGETS];
    let mut icc = mae;
    for j in 0..N_TARGETS {
        mae[j] = column(&|m| m.mae[j]);
        icc[j] = column(&|m| m.icc[j]);
    }
    let accuracy = column(&|m| m.accuracy);
    Ok(ModelSummary { model, label: model.label().into(), mae, icc, accuracy, confusion: pooled, folds })
}

/// `candidate` against `reference` on identical folds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub candidate: ModelKind,
    pub reference: ModelKind,
    /// Paired over folds on MAE, candidate minus reference.
    pub mae_tests: [PairedTTest; N_TARGETS],
    /// Mean accuracy difference in percentage points.
    pub accuracy_gain_points: f64,
    /// Mean accuracy difference relative to the reference, in percent.
    pub accuracy_gain_relative: f64,
}

pub fn compare(candidate: &ModelSummary, reference: &ModelSummary) -> Result<Comparison> {
    if candidate.folds.len() != reference.folds.len() {
        return Err(Error::Input("compared models were run on different folds".into()));
    }
    let per_fold = |s: &ModelSummary, j: usize| s.folds.iter().map(|f| f.mae[j]).collect::<Vec<_>>();
    let mut tests = Vec::with_capacity(N_TARGETS);
    for j in 0..N_TARGETS {
        tests.push(paired_t_test(&per_fold(candidate, j), &per_fold(reference, j))?);
    }
    let (a, b) = (candidate.accuracy.mean, reference.accuracy.mean);
    Ok(Comparison {
        candidate: candidate.model,
        reference: reference.model,
        mae_tests: tests.try_into().expect("one test per target"),
        accuracy_gain_points: 100.0 * (a - b),
        accuracy_gain_relative: 100.0 * (a - b) / b,
    })
}

/// Per-patient MAE of two models on the same predicted visits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientRow {
    pub patient_id: String,
    pub n: usize,
    pub candidate_mae: f64,
    pub reference_mae: f64,
    /// `reference_mae − candidate_mae`; positive when the candidate is better.
    pub improvement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerPatientReport {
    pub candidate: ModelKind,
    pub reference: ModelKind,
    /// One table per target, sorted by descending improvement.
    pub rows: Vec<Vec<PatientRow>>,
    /// Share of patients with strictly lower candidate MAE, per target.
    pub fraction_improved: [f64; N_TARGETS],
}

/// Builds per-patient tables. Clinical status uses the continuous prediction.
pub fn per_patient_report(
    candidate: (ModelKind, &[&PointPrediction]),
    reference: (ModelKind, &[&PointPrediction]),
) -> Result<PerPatientReport> {
    let (ck, cp) = candidate;
    let (rk, rp) = reference;
    let key = |p: &PointPrediction| (p.patient_id.clone(), p.visit);
    if cp.len() != rp.len() || cp.iter().zip(rp).any(|(a, b)| key(a) != key(b) || a.truth != b.truth) {
        return Err(Error::Input("models were evaluated on different prediction points".into()));
    }
    let mut rows = Vec::with_capacity(N_TARGETS);
    let mut fraction = [0.0; N_TARGETS];
    for j in 0..N_TARGETS {
        let mut per: BTreeMap<&str, (usize, f64, f64)> = BTreeMap::new();
        for (a, b) in cp.iter().zip(rp) {
            if let Some(t) = a.truth[j] {
                let e = per.entry(a.patient_id.as_str()).or_default();
                e.0 += 1;
                e.1 += (a.mean[j] - t).abs();
                e.2 += (b.mean[j] - t).abs();
            }
        }
        let mut table: Vec<PatientRow> = per
            .into_iter()
            .map(|(id, (n, ca, ra))| {
                let (c, r) = (ca / n as f64, ra / n as f64);
                PatientRow { patient_id: id.into(), n, candidate_mae: c, reference_mae: r, improvement: r - c }
            })
            .collect();
        table.sort_by(|a, b| b.improvement.total_cmp(&a.improvement).then_with(|| a.patient_id.cmp(&b.patient_id)));
        fraction[j] = if table.is_empty() {
            f64::NAN
        } else {
            table.iter().filter(|r| r.improvement > 0.0).count() as f64 / table.len() as f64
        };
        rows.push(table);
    }
    Ok(PerPatientReport { candidate: ck, reference: rk, rows, fraction_improved: fraction })
}

/// Change of clinical status between consecutive visits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Transition {
    #[serde(rename = "CN->MCI")]
    CnToMci,
    #[serde(rename = "MCI->AD")]
    MciToAd,
    #[serde(rename = "CN->AD")]
    CnToAd,
    #[serde(rename = "MCI->CN")]
    MciToCn,
    #[serde(rename = "AD->MCI")]
    AdToMci,
    #[serde(rename = "AD->CN")]
    AdToCn,
}

impl Transition {
    pub const ALL: [Transition; 6] = [
        Transition::CnToMci,
        Transition::MciToAd,
        Transition::CnToAd,
        Transition::MciToCn,
        Transition::AdToMci,
        Transition::AdToCn,
    ];

    pub fn between(from: u8, to: u8) -> Option<Self> {
        Some(match (from, to) {
            (0, 1) => Transition::CnToMci,
            (1, 2) => Transition::MciToAd,
            (0, 2) => Transition::CnToAd,
            (1, 0) => Transition::MciToCn,
            (2, 1) => Transition::AdToMci,
            (2, 0) => Transition::AdToCn,
            _ => return None,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            Transition::CnToMci => "CN->MCI",
            Transition::MciToAd => "MCI->AD",
            Transition::CnToAd => "CN->AD",
            Transition::MciToCn => "MCI->CN",
            Transition::AdToMci => "AD->MCI",
            Transition::AdToCn => "AD->CN",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConversionEvent {
    pub patient_id: String,
    /// Grid index of the visit at which the new status was recorded.
    pub visit: usize,
    pub transition: Transition,
    /// `|score_t − score_{t−1}|` for MMSE, ADAS13 and CDRSB where both exist.
    pub deltas: [Option<f64>; N_TARGETS - 1],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub transition: Transition,
    pub n: [usize; N_TARGETS - 1],
    pub deltas: [MeanSd; N_TARGETS - 1],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConversionStats {
    pub counts: BTreeMap<Transition, usize>,
    pub deltas: Vec<DeltaSummary>,
    pub events: Vec<ConversionEvent>,
}

/// Counts status changes between consecutive recorded visits (both labels
/// present) and summarizes the score changes at forward conversions.
pub fn conversion_stats(records: &[PatientRecord]) -> ConversionStats {
    let mut events = Vec::new();
    for r in records {
        for w in r.visits.windows(2) {
            let (Some(a), Some(b)) = (w[0].targets[CS], w[1].targets[CS]) else { continue };
            let Some(transition) = Transition::between(a as u8, b as u8) else { continue };
            let mut deltas = [None; N_TARGETS - 1];
            for (j, d) in deltas.iter_mut().enumerate() {
                if let (Some(x), Some(y)) = (w[0].targets[j], w[1].targets[j]) {
                    *d = Some((y - x).abs());
                }
            }
            events.push(ConversionEvent {
                patient_id: r.patient_id.clone(),
                visit: w[1].visit_index(),
                transition,
                deltas,
            });
        }
    }
    let counts = Transition::ALL.iter().map(|t| (*t, events.iter().filter(|e| e.transition == *t).count())).collect();
    let deltas = [Transition::CnToMci, Transition::MciToAd]
        .into_iter()
        .map(|t| {
            let mut n = [0; N_TARGETS - 1];
            let mut stats = [MeanSd { mean: f64::NAN, sd: f64::NAN }; N_TARGETS - 1];
            for j in 0..N_TARGETS - 1 {
                let v: Vec<f64> = events.iter().filter(|e| e.transition == t).filter_map(|e| e.deltas[j]).collect();
                n[j] = v.len();
                stats[j] = MeanSd::of(&v);
            }
            DeltaSummary { transition: t, n, deltas: stats }
        })
        .collect();
    ConversionStats { counts, deltas, events }
}

/// Everything one evaluation run reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format: String,
    pub version: u32,
    pub folds: usize,
    pub seed: u64,
    pub patients: usize,
    pub evaluated_predictions: usize,
    pub models: Vec<ModelSummary>,
    pub comparisons: Vec<Comparison>,
    pub per_patient: Vec<PerPatientReport>,
    pub conversions: ConversionStats,
    pub notes: Vec<String>,
}

/// Drops the padding before the final newline of `s`.
fn trim_line_end(s: &mut String) {
    s.pop();
    let keep = s.trim_end_matches(' ').len();
    s.truncate(keep);
    s.push('\n');
}

const NOTES: [&str; 3] = [
    "ICC is ICC(3,1): two-way mixed effects, single measure, consistency. It ignores a constant offset between prediction and truth, so it measures consistency rather than absolute agreement.",
    "Accuracy gains are given both in percentage points (accuracy_gain_points) and relative to the reference accuracy (accuracy_gain_relative).",
    "Clinical status accuracy uses predictions rounded half away from zero and clamped to 0..2; per-patient status MAE uses the unrounded prediction.",
];

/// Comparisons reported whenever both models were run.
const COMPARED: [(ModelKind, ModelKind); 4] = [
    (ModelKind::PgpAr, ModelKind::GpAr),
    (ModelKind::Pgp, ModelKind::Gp),
    (ModelKind::GpAr, ModelKind::Gp),
    (ModelKind::PgpAr, ModelKind::Pgp),
];

impl MetricsReport {
    pub fn build(cv: &CvResult, records: &[PatientRecord]) -> Result<Self> {
        let mut kinds: Vec<ModelKind> = cv.config.models.clone();
        kinds.sort();
        kinds.dedup();
        let models = kinds.iter().map(|m| summarize(cv, *m)).collect::<Result<Vec<_>>>()?;
        let find = |k: ModelKind| models.iter().find(|s| s.model == k);
        let mut comparisons = Vec::new();
        let mut per_patient = Vec::new();
        for (a, b) in COMPARED {
            if let (Some(sa), Some(sb)) = (find(a), find(b)) {
                comparisons.push(compare(sa, sb)?);
                per_patient.push(per_patient_report((a, &cv.predictions_of(a)), (b, &cv.predictions_of(b)))?);
            }
        }
        Ok(Self {
            format: METRICS_FORMAT.into(),
            version: METRICS_VERSION,
            folds: cv.folds.len(),
            seed: cv.config.seed,
            patients: records.len(),
            evaluated_predictions: kinds.first().map_or(0, |k| cv.predictions_of(*k).len()),
            models,
            comparisons,
            per_patient,
            conversions: conversion_stats(records),
            notes: NOTES.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn model(&self, kind: ModelKind) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.model == kind)
    }

    pub fn comparison(&self, candidate: ModelKind, reference: ModelKind) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.candidate == candidate && c.reference == reference)
    }

    pub fn per_patient(&self, candidate: ModelKind, reference: ModelKind) -> Option<&PerPatientReport> {
        self.per_patient.iter().find(|c| c.candidate == candidate && c.reference == reference)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.format != METRICS_FORMAT || r.version != METRICS_VERSION {
            return Err(Error::Serialization(format!("unsupported metrics document {} v{}", r.format, r.version)));
        }
        Ok(r)
    }

    /// Fixed-width comparison table followed by the tests and notes.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{}-fold patient-independent cross-validation, {} patients, seed {}",
            self.folds, self.patients, self.seed
        );
        let _ = writeln!(s);
        let _ = write!(s, "{:<9}", "Model");
        for name in TARGET_NAMES {
            let _ = write!(s, " | {:^27}", format!("{name} MAE / ICC"));
        }
        let _ = writeln!(s, " | {:^13}", "ACC");
        trim_line_end(&mut s);
        for m in &self.models {
            let _ = write!(s, "{:<9}", m.label);
            for j in 0..N_TARGETS {
                let cell = format!("{:.2}±{:.2} / {:.2}±{:.2}", m.mae[j].mean, m.mae[j].sd, m.icc[j].mean, m.icc[j].sd);
                let _ = write!(s, " | {cell:^27}");
            }
            let _ = writeln!(s, " | {:^13}", format!("{:.2}±{:.2}", m.accuracy.mean, m.accuracy.sd));
            trim_line_end(&mut s);
        }
        if !self.comparisons.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "Paired t-tests on per-fold MAE (candidate - reference):");
            for c in &self.comparisons {
                let _ = write!(s, "  {} vs {}:", c.candidate.label(), c.reference.label());
                for (j, t) in c.mae_tests.iter().enumerate() {
                    let _ = write!(s, " {} {:+.3} (p={:.2e})", TARGET_NAMES[j], t.mean_difference, t.p_value);
                }
                let _ = writeln!(
                    s,
                    "; ACC {:+.1} points ({:+.1}% relative)",
                    c.accuracy_gain_points, c.accuracy_gain_relative
                );
            }
        }
        if !self.per_patient.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "Share of patients with lower MAE:");
            for p in &self.per_patient {
                let _ = write!(s, "  {} vs {}:", p.candidate.label(), p.reference.label());
                for (j, f) in p.fraction_improved.iter().enumerate() {
                    let _ = write!(s, " {} {:.2}", TARGET_NAMES[j], f);
                }
                let _ = writeln!(s);
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "Status changes between consecutive visits:");
        for (t, n) in &self.conversions.counts {
            let _ = writeln!(s, "  {:<8} {n}", t.label());
        }
        for d in &self.conversions.deltas {
            let _ = write!(s, "  score change at {}:", d.transition.label());
            for j in 0..N_TARGETS - 1 {
                let _ = write!(s, " {} {:.2}±{:.2} (n={})", TARGET_NAMES[j], d.deltas[j].mean, d.deltas[j].sd, d.n[j]);
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s);
        for n in &self.notes {
            let _ = writeln!(s, "Note: {n}");
        }
        s
    }

    /// Writes `metrics.json`, `table.txt`, one confusion matrix per model,
    /// one per-patient table per comparison and the conversion events.
    pub fn write_files(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> Result<()> {
            std::fs::write(dir.join(&name), body)?;
            written.push(name);
            Ok(())
        };
        put("metrics.json".into(), self.to_json()?)?;
        put("table.txt".into(), self.table())?;
        for m in &self.models {
            let mut body = String::from("true\\predicted,CN,MCI,AD\n");
            for (i, name) in ["CN", "MCI", "AD"].iter().enumerate() {
                let r = m.confusion.0[i];
                let _ = writeln!(body, "{name},{},{},{}", r[0], r[1], r[2]);
            }
            put(format!("confusion_{}.csv", m.model.slug()), body)?;
        }
        for p in &self.per_patient {
            let mut body = String::from("target,rank,patient_id,n,candidate_mae,reference_mae,improvement\n");
            for (j, table) in p.rows.iter().enumerate() {
                for (rank, r) in table.iter().enumerate() {
                    let _ = writeln!(
                        body,
                        "{},{},{},{},{},{},{}",
                        TARGET_NAMES[j],
                        rank + 1,
                        r.patient_id,
                        r.n,
                        r.candidate_mae,
                        r.reference_mae,
                        r.improvement
                    );
                }
            }
            put(format!("per_patient_{}_vs_{}.csv", p.candidate.slug(), p.reference.slug()), body)?;
        }
        let mut body = String::from("patient_id,visit,transition,MMSE_delta,ADAS13_delta,CDRSB_delta\n");
        for e in &self.conversions.events {
            let cell = |d: Option<f64>| d.map_or_else(String::new, |v| v.to_string());
            let _ = writeln!(
                body,
                "{},{},{},{},{},{}",
                e.patient_id,
                e.visit,
                e.transition.label(),
                cell(e.deltas[0]),
                cell(e.deltas[1]),
                cell(e.deltas[2])
            );
        }
        put("conversions.csv".into(), body)?;
        Ok(written)
    }
}
