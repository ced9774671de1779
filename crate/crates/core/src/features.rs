//! Model inputs from filled visit records: z-normalization, PCA and
//! one-step-ahead pair construction. Every statistic is learned from training
//! patients only.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::{forward_fill, Fallback, PatientRecord, N_TARGETS};
use crate::population::{PairIndex, TrainingSet, Variant};

/// Per-column standardization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    mean: Vec<f64>,
    std: Vec<f64>,
    constant: Vec<bool>,
}

impl Scaler {
    /// Learns column means and (population) standard deviations. Constant
    /// columns keep a unit scale and are flagged.
    pub fn fit(rows: &DMatrix<f64>) -> Result<Self> {
        let n = rows.nrows();
        if n == 0 {
            return Err(Error::Input("cannot fit a scaler on zero rows".into()));
        }
        let mut mean = Vec::with_capacity(rows.ncols());
        let mut std = Vec::with_capacity(rows.ncols());
        let mut constant = Vec::with_capacity(rows.ncols());
        for col in rows.column_iter() {
            let m = col.sum() / n as f64;
            let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
            let flat = s.is_nan() || s <= 1e-12 * (1.0 + m.abs());
            mean.push(m);
            std.push(if flat { 1.0 } else { s });
            constant.push(flat);
        }
        Ok(Self { mean, std, constant })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn constant_columns(&self) -> &[bool] {
        &self.constant
    }

    fn check(&self, cols: usize) -> Result<()> {
        if cols != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: cols });
        }
        Ok(())
    }

    pub fn transform(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(rows.ncols())?;
        Ok(DMatrix::from_fn(rows.nrows(), rows.ncols(), |i, j| self.forward(j, rows[(i, j)])))
    }

    pub fn inverse_transform(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(rows.ncols())?;
        Ok(DMatrix::from_fn(rows.nrows(), rows.ncols(), |i, j| self.inverse(j, rows[(i, j)])))
    }

    /// Standardizes one value of column `j`.
    #[inline]
    pub fn forward(&self, j: usize, v: f64) -> f64 {
        (v - self.mean[j]) / self.std[j]
    }

    /// Maps one standardized value of column `j` back to original units.
    #[inline]
    pub fn inverse(&self, j: usize, v: f64) -> f64 {
        v * self.std[j] + self.mean[j]
    }
}

/// Projection onto the leading principal axes of the training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    mean: Vec<f64>,
    /// `k × d`, orthonormal rows.
    components: DMatrix<f64>,
    explained_variance: Vec<f64>,
    total_variance: f64,
}

impl PcaProjection {
    /// Keeps the fewest leading components whose explained variance reaches
    /// `ratio` of the total. Directions beyond the numerical rank are never
    /// kept. Each component is signed so its largest-magnitude entry is
    /// positive.
    pub fn fit(rows: &DMatrix<f64>, ratio: f64) -> Result<Self> {
        let (n, d) = rows.shape();
        if n < 2 {
            return Err(Error::Input(format!("PCA needs at least 2 rows, got {n}")));
        }
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::Input(format!("variance ratio must be in (0, 1], got {ratio}")));
        }
        let mean: Vec<f64> = rows.column_iter().map(|c| c.sum() / n as f64).collect();
        let centered = DMatrix::from_fn(n, d, |i, j| rows[(i, j)] - mean[j]);
        let cov = centered.transpose() * &centered / (n - 1) as f64;
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let total: f64 = values.iter().sum();
        let largest = values.first().copied().unwrap_or(0.0);
        let rank = values.iter().take_while(|&&v| v > largest * d as f64 * f64::EPSILON).count();

        let mut k = 0;
        let mut cumulative = 0.0;
        while k < rank && cumulative < ratio * total * (1.0 - 1e-12) {
            cumulative += values[k];
            k += 1;
        }

        let mut components = DMatrix::zeros(k, d);
        for (r, &i) in order.iter().take(k).enumerate() {
            let v = eig.eigenvectors.column(i);
            let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for j in 0..d {
                components[(r, j)] = sign * v[j];
            }
        }
        Ok(Self { mean, components, explained_variance: values[..k].to_vec(), total_variance: total })
    }

    /// Number of retained components.
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// Share of the training variance the retained components explain.
    pub fn explained_ratio(&self) -> f64 {
        if self.total_variance > 0.0 {
            self.explained_variance.iter().sum::<f64>() / self.total_variance
        } else {
            1.0
        }
    }

    pub fn transform(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if rows.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: rows.ncols() });
        }
        let centered = DMatrix::from_fn(rows.nrows(), rows.ncols(), |i, j| rows[(i, j)] - self.mean[j]);
        Ok(centered * self.components.transpose())
    }
}

/// One patient's visits in model space: every cell filled, targets possibly
/// rescaled. Row `t` is visit `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PatientSeries {
    pub patient_id: String,
    pub visit_indices: Vec<usize>,
    pub features: DMatrix<f64>,
    pub targets: DMatrix<f64>,
}

impl PatientSeries {
    /// Copies a fully filled record without transforming it.
    pub fn from_filled(record: &PatientRecord) -> Result<Self> {
        let t = record.n_visits();
        let d = record.visits.first().map_or(0, |v| v.features.len());
        let missing = || Error::Input(format!("patient {} still has missing cells", record.patient_id));
        let mut features = DMatrix::zeros(t, d);
        let mut targets = DMatrix::zeros(t, N_TARGETS);
        for (i, v) in record.visits.iter().enumerate() {
            for (j, c) in v.features.iter().enumerate() {
                features[(i, j)] = c.ok_or_else(missing)?;
            }
            for (j, c) in v.targets.iter().enumerate() {
                targets[(i, j)] = c.ok_or_else(missing)?;
            }
        }
        Ok(Self {
            patient_id: record.patient_id.clone(),
            visit_indices: record.visits.iter().map(|v| v.visit_index()).collect(),
            features,
            targets,
        })
    }

    pub fn n_visits(&self) -> usize {
        self.visit_indices.len()
    }
}

/// The next-visit pairs of a single patient, in visit order.
#[derive(Clone, Debug, PartialEq)]
pub struct PatientPairs {
    pub patient_id: String,
    /// Visit index of each pair's input.
    pub visits: Vec<usize>,
    pub inputs: DMatrix<f64>,
    pub targets: DMatrix<f64>,
}

impl PatientPairs {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }
}

/// Which previous-visit scores the auto-regressive input carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArInput {
    pub include_cs: bool,
}

impl Default for ArInput {
    fn default() -> Self {
        Self { include_cs: true }
    }
}

impl ArInput {
    pub fn n_columns(self) -> usize {
        if self.include_cs {
            N_TARGETS
        } else {
            N_TARGETS - 1
        }
    }
}

/// Pairs `x_t → y_{t+1}` (standard) or `[x_t ‖ y_t] → y_{t+1}`
/// (auto-regressive) for one patient. A single visit yields no pairs.
pub fn patient_pairs(series: &PatientSeries, variant: Variant, ar: ArInput) -> PatientPairs {
    let t = series.n_visits();
    let rows = t.saturating_sub(1);
    let d = series.features.ncols();
    let extra = match variant {
        Variant::Standard => 0,
        Variant::AutoRegressive => ar.n_columns(),
    };
    let inputs =
        DMatrix::from_fn(
            rows,
            d + extra,
            |i, j| {
                if j < d {
                    series.features[(i, j)]
                } else {
                    series.targets[(i, j - d)]
                }
            },
        );
    let targets = DMatrix::from_fn(rows, N_TARGETS, |i, j| series.targets[(i + 1, j)]);
    PatientPairs {
        patient_id: series.patient_id.clone(),
        visits: series.visit_indices[..rows].to_vec(),
        inputs,
        targets,
    }
}

/// Stacks the pairs of every patient, ordered by patient id then visit.
pub fn build_pairs(series: &[PatientSeries], variant: Variant, ar: ArInput) -> Result<TrainingSet> {
    let mut ordered: Vec<&PatientSeries> = series.iter().collect();
    ordered.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    let d = ordered.first().map_or(0, |s| s.features.ncols());
    let mut blocks = Vec::with_capacity(ordered.len());
    for s in ordered {
        if s.features.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: s.features.ncols() });
        }
        if s.n_visits() < 2 {
            log::warn!("patient {} has {} visit(s); contributes no pairs", s.patient_id, s.n_visits());
            continue;
        }
        blocks.push(patient_pairs(s, variant, ar));
    }
    let n: usize = blocks.iter().map(PatientPairs::len).sum();
    let width = blocks.first().map_or(d, |b| b.inputs.ncols());
    let mut inputs = DMatrix::zeros(n, width);
    let mut targets = DMatrix::zeros(n, N_TARGETS);
    let mut index = Vec::with_capacity(n);
    let mut row = 0;
    for b in &blocks {
        inputs.rows_mut(row, b.len()).copy_from(&b.inputs);
        targets.rows_mut(row, b.len()).copy_from(&b.targets);
        index.extend(b.visits.iter().map(|&v| PairIndex { patient_id: b.patient_id.clone(), visit: v }));
        row += b.len();
    }
    TrainingSet::new(variant, inputs, targets, index)
}

/// Settings of the per-fold feature pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Share of feature variance the PCA keeps.
    pub pca_ratio: f64,
    pub ar: ArInput,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { pca_ratio: 0.95, ar: ArInput::default() }
    }
}

/// Everything learned from one fold's training patients: fill values,
/// feature scaling, PCA and target scaling. Targets are modeled on the
/// standardized scale and mapped back for reporting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldTransform {
    pub fallback: Fallback,
    pub feature_scaler: Scaler,
    pub pca: PcaProjection,
    pub target_scaler: Scaler,
    pub options: FeatureOptions,
}

fn stack_filled(records: &[PatientRecord], n_features: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n: usize = records.iter().map(PatientRecord::n_visits).sum();
    let mut x = DMatrix::zeros(n, n_features);
    let mut y = DMatrix::zeros(n, N_TARGETS);
    for (i, v) in records.iter().flat_map(|r| &r.visits).enumerate() {
        for j in 0..n_features {
            x[(i, j)] = v.features[j].unwrap_or(0.0);
        }
        for j in 0..N_TARGETS {
            y[(i, j)] = v.targets[j].unwrap_or(0.0);
        }
    }
    (x, y)
}

impl FoldTransform {
    pub fn fit(training: &[PatientRecord], n_features: usize, options: FeatureOptions) -> Result<Self> {
        let fallback = Fallback::from_records(training, n_features);
        let filled = training.iter().map(|r| forward_fill(r, &fallback)).collect::<Result<Vec<_>>>()?;
        let (x, y) = stack_filled(&filled, n_features);
        let feature_scaler = Scaler::fit(&x)?;
        let pca = PcaProjection::fit(&feature_scaler.transform(&x)?, options.pca_ratio)?;
        let target_scaler = Scaler::fit(&y)?;
        Ok(Self { fallback, feature_scaler, pca, target_scaler, options })
    }

    /// Fills, scales and projects one patient with the fold's statistics.
    pub fn transform(&self, record: &PatientRecord) -> Result<PatientSeries> {
        let filled = forward_fill(record, &self.fallback)?;
        let raw = PatientSeries::from_filled(&filled)?;
        let features = self.pca.transform(&self.feature_scaler.transform(&raw.features)?)?;
        let targets = self.target_scaler.transform(&raw.targets)?;
        Ok(PatientSeries { features, targets, ..raw })
    }

    /// Maps a model-space value of target `j` back to clinical units.
    pub fn target_to_raw(&self, j: usize, v: f64) -> f64 {
        self.target_scaler.inverse(j, v)
    }

    /// Factor converting a model-space variance of target `j` to clinical units².
    pub fn target_variance_scale(&self, j: usize) -> f64 {
        self.target_scaler.std()[j].powi(2)
    }
}
