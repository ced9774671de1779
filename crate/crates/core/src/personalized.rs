//! Sequential domain adaptation of a fitted population GP to one patient.
//!
//! The population posterior evaluated at the patient's own inputs acts as the
//! prior for the patient; the patient's observed targets then correct the
//! population prediction:
//!
//! ```text
//! μ⁽ᵖ⁾ = μ⁽ˢ⁾(x*) + vᵀ (V + σ²I)⁻¹ (Y⁽ᵖ⁾ − μ⁽ᵖ|ˢ⁾)
//! V⁽ᵖ⁾ = V⁽ˢ⁾(x*) − vᵀ (V + σ²I)⁻¹ v
//! ```
//!
//! where `V` is the source-posterior covariance over the patient's inputs and
//! `v` its cross-covariance with the query. This equals conditioning the GP
//! jointly on source and patient data at fixed hyperparameters.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::PatientPairs;
use crate::kernel::{self, PsdFactor};
use crate::population::{clamp_variance, PopulationModel, Prediction};

/// A target patient's already-observed `(input, next target)` pairs, in visit
/// order. Entries can only be appended.
#[derive(Clone, Debug, PartialEq)]
pub struct PatientHistory {
    patient_id: String,
    visits: Vec<usize>,
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl PatientHistory {
    pub fn new(patient_id: impl Into<String>) -> Self {
        Self { patient_id: patient_id.into(), visits: Vec::new(), inputs: Vec::new(), targets: Vec::new() }
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    /// Appends a pair observed at `visit`, which must come after every visit
    /// already in the history.
    pub fn push(&mut self, visit: usize, input: Vec<f64>, target: Vec<f64>) -> Result<()> {
        if let Some(&last) = self.visits.last() {
            if visit <= last {
                return Err(Error::Input(format!("history visits must strictly increase: {visit} after {last}")));
            }
        }
        if let Some(first) = self.inputs.first() {
            if first.len() != input.len() {
                return Err(Error::DimensionMismatch { expected: first.len(), found: input.len() });
            }
            if self.targets[0].len() != target.len() {
                return Err(Error::DimensionMismatch { expected: self.targets[0].len(), found: target.len() });
            }
        }
        self.visits.push(visit);
        self.inputs.push(input);
        self.targets.push(target);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn visits(&self) -> &[usize] {
        &self.visits
    }

    fn input_matrix(&self) -> DMatrix<f64> {
        let d = self.inputs.first().map_or(0, Vec::len);
        DMatrix::from_fn(self.len(), d, |i, j| self.inputs[i][j])
    }

    fn target_matrix(&self) -> DMatrix<f64> {
        let m = self.targets.first().map_or(0, Vec::len);
        DMatrix::from_fn(self.len(), m, |i, j| self.targets[i][j])
    }

    fn check_against(&self, model: &PopulationModel) -> Result<()> {
        if let Some(x) = self.inputs.first() {
            if x.len() != model.input_dim() {
                return Err(Error::DimensionMismatch { expected: model.input_dim(), found: x.len() });
            }
            if self.targets[0].len() != model.output_dim() {
                return Err(Error::DimensionMismatch { expected: model.output_dim(), found: self.targets[0].len() });
            }
        }
        Ok(())
    }
}

/// Source posterior over the patient's observed inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalPrior {
    /// `t × outputs` posterior means.
    pub mu: DMatrix<f64>,
    /// `t × t` posterior covariance.
    pub cov: DMatrix<f64>,
}

/// Posterior means, covariance and whitened cross-kernel `L⁻¹k(X_s, P)` for
/// the rows of `points`.
struct SourcePosterior {
    mu: DMatrix<f64>,
    cov: DMatrix<f64>,
    whitened: DMatrix<f64>,
}

fn source_posterior(model: &PopulationModel, points: &DMatrix<f64>) -> Result<SourcePosterior> {
    let params = model.params();
    let xs = model.training().inputs();
    let k_sp = kernel::gram(xs, points, params)?;
    let mu = k_sp.transpose() * model.alpha();
    let whitened = model.factor().solve_lower(&k_sp)?;
    let cov = kernel::gram(points, points, params)? - whitened.transpose() * &whitened;
    Ok(SourcePosterior { mu, cov, whitened })
}

/// Population posterior mean and full covariance at every history input.
pub fn conditional_prior(model: &PopulationModel, history: &PatientHistory) -> Result<ConditionalPrior> {
    if history.is_empty() {
        return Err(Error::Input("conditional prior needs a nonempty history".into()));
    }
    history.check_against(model)?;
    let post = source_posterior(model, &history.input_matrix())?;
    Ok(ConditionalPrior { mu: post.mu, cov: post.cov })
}

/// Applies the patient correction to a population prediction.
fn correct(
    pop_mean: &[f64],
    pop_var: f64,
    cov: &DMatrix<f64>,
    cross: &DVector<f64>,
    residuals: &DMatrix<f64>,
    noise: f64,
) -> Result<Prediction> {
    let factor = PsdFactor::new(cov, noise)?;
    let w = DVector::from_vec(factor.solve_vec(cross.as_slice())?);
    let mean = pop_mean.iter().enumerate().map(|(c, m)| m + w.dot(&residuals.column(c))).collect();
    let var = pop_var - cross.dot(&w);
    Ok(Prediction { variance: vec![clamp_variance(var); pop_mean.len()], mean })
}

/// Personalized prediction at `x_star` given the patient's history. With an
/// empty history this is exactly the population prediction.
pub fn adapt_predict(model: &PopulationModel, history: &PatientHistory, x_star: &[f64]) -> Result<Prediction> {
    if history.is_empty() {
        return model.predict(x_star);
    }
    history.check_against(model)?;
    if x_star.len() != model.input_dim() {
        return Err(Error::DimensionMismatch { expected: model.input_dim(), found: x_star.len() });
    }
    let params = model.params();
    let xs = model.training().inputs();
    let xp = history.input_matrix();
    let post = source_posterior(model, &xp)?;

    let k_sq = kernel::cross_vector(xs, x_star, params)?;
    let v_q = DVector::from_vec(model.factor().solve_lower_vec(&k_sq)?);
    let pop_mean: Vec<f64> = (0..model.output_dim())
        .map(|c| k_sq.iter().zip(model.alpha().column(c).iter()).map(|(k, a)| k * a).sum())
        .collect();
    let pop_var = params.signal_variance() - v_q.norm_squared();
    let k_pq = DVector::from_vec(kernel::cross_vector(&xp, x_star, params)?);
    let cross = k_pq - post.whitened.transpose() * &v_q;

    let residuals = history.target_matrix() - &post.mu;
    correct(&pop_mean, pop_var, &post.cov, &cross, &residuals, params.noise_variance())
}

/// Predicts every next visit of a patient in order. The prediction for pair
/// `k` is adapted on pairs `0..k` only (the first one is the population
/// prediction). Patients without any pair yield an empty list.
pub fn run_patient(model: &PopulationModel, pairs: &PatientPairs) -> Result<Vec<Prediction>> {
    let count = pairs.len();
    if count == 0 {
        log::warn!("patient {} has fewer than 2 visits; skipped", pairs.patient_id);
        return Ok(Vec::new());
    }
    if pairs.inputs.ncols() != model.input_dim() {
        return Err(Error::DimensionMismatch { expected: model.input_dim(), found: pairs.inputs.ncols() });
    }
    if pairs.targets.ncols() != model.output_dim() {
        return Err(Error::DimensionMismatch { expected: model.output_dim(), found: pairs.targets.ncols() });
    }

    // One joint source posterior over all of the patient's inputs; each step
    // reads the leading block of it.
    let post = source_posterior(model, &pairs.inputs)?;
    let noise = model.params().noise_variance();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        if k == 0 {
            let x: Vec<f64> = pairs.inputs.row(0).iter().copied().collect();
            out.push(model.predict(&x)?);
            continue;
        }
        let pop_mean: Vec<f64> = post.mu.row(k).iter().copied().collect();
        let cov = post.cov.view((0, 0), (k, k)).into_owned();
        let cross = post.cov.view((0, k), (k, 1)).column(0).into_owned();
        let residuals = pairs.targets.rows(0, k) - post.mu.rows(0, k);
        out.push(correct(&pop_mean, post.cov[(k, k)], &cov, &cross, &residuals, noise)?);
    }
    Ok(out)
}
