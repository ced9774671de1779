//! Population-level GP regression over one-step-ahead visit pairs.
//!
//! All output columns share one set of kernel hyperparameters, so a single
//! factorization of `K + σ²I` serves every target and the predictive variance
//! is one scalar per query.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, KernelParams, PsdFactor};
use crate::optimize::{minimize_bfgs, BfgsOptions, Objective};

/// How the input of a visit pair is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `x_t → y_{t+1}`
    Standard,
    /// `[x_t ‖ y_t] → y_{t+1}`
    AutoRegressive,
}

/// Identifies the (patient, visit) an input row was taken from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairIndex {
    pub patient_id: String,
    /// 0-based position of the input visit within the patient's visit list.
    pub visit: usize,
}

/// Rows of `input → next-visit target` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    variant: Variant,
    inputs: DMatrix<f64>,
    targets: DMatrix<f64>,
    pair_index: Vec<PairIndex>,
}

impl TrainingSet {
    pub fn new(
        variant: Variant,
        inputs: DMatrix<f64>,
        targets: DMatrix<f64>,
        pair_index: Vec<PairIndex>,
    ) -> Result<Self> {
        if targets.nrows() != inputs.nrows() {
            return Err(Error::DimensionMismatch { expected: inputs.nrows(), found: targets.nrows() });
        }
        if pair_index.len() != inputs.nrows() {
            return Err(Error::DimensionMismatch { expected: inputs.nrows(), found: pair_index.len() });
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Input("training set contains non-finite values".into()));
        }
        Ok(Self { variant, inputs, targets, pair_index })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn pair_index(&self) -> &[PairIndex] {
        &self.pair_index
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.ncols()
    }
}

/// Predictive distribution at one query input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: Vec<f64>,
    /// One shared latent variance, replicated per output.
    pub variance: Vec<f64>,
}

impl Prediction {
    pub(crate) fn shared(mean: Vec<f64>, variance: f64) -> Self {
        let variance = vec![clamp_variance(variance); mean.len()];
        Self { mean, variance }
    }
}

pub(crate) fn clamp_variance(v: f64) -> f64 {
    if v < -1e-10 {
        log::warn!("predictive variance {v:e} below rounding tolerance; clamped to 0");
    }
    v.max(0.0)
}

const LOG_BOUND: f64 = 18.0;

/// NLML over all output columns, with the pairwise distances cached so that
/// repeated evaluations only redo the exponentials and the factorization.
struct NlmlObjective<'a> {
    sq_dists: DMatrix<f64>,
    targets: &'a DMatrix<f64>,
}

impl<'a> NlmlObjective<'a> {
    fn new(data: &'a TrainingSet) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Input("NLML needs at least one training row".into()));
        }
        Ok(Self { sq_dists: kernel::sq_dist_matrix(&data.inputs, &data.inputs)?, targets: &data.targets })
    }

    fn evaluate(&self, params: &KernelParams, with_grad: bool) -> Result<(f64, Option<[f64; 3]>)> {
        let n = self.sq_dists.nrows();
        let m = self.targets.ncols() as f64;
        let kf = self.sq_dists.map(|d| params.eval_sq_dist(d));
        let factor = PsdFactor::new(&kf, params.noise_variance())?;
        let alpha = factor.solve(self.targets)?;
        let data_fit = 0.5 * self.targets.component_mul(&alpha).sum();
        let value = data_fit + m * 0.5 * (factor.log_det() + n as f64 * (2.0 * PI).ln());
        if !with_grad {
            return Ok((value, None));
        }

        // ∂/∂θ = ½ Σ_ij ∂K_ij (m·A_ij − (ααᵀ)_ij),  A = (K + σ²I)⁻¹
        let a = factor.inverse();
        let w = &alpha * alpha.transpose();
        let inv_l2 = 1.0 / (params.lengthscale() * params.lengthscale());
        let (mut g_signal, mut g_length) = (0.0, 0.0);
        for j in 0..n {
            for i in 0..n {
                let c = m * a[(i, j)] - w[(i, j)];
                let k = kf[(i, j)];
                g_signal += k * c;
                g_length += k * self.sq_dists[(i, j)] * inv_l2 * c;
            }
        }
        let g_noise = 0.5 * params.noise_variance() * (m * a.trace() - w.trace());
        Ok((value, Some([0.5 * g_signal, 0.5 * g_length, g_noise])))
    }

    fn in_bounds(x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite() && v.abs() <= LOG_BOUND)
    }
}

impl Objective for NlmlObjective<'_> {
    fn value(&mut self, x: &[f64]) -> Option<f64> {
        if !Self::in_bounds(x) {
            return None;
        }
        let p = KernelParams::from_log([x[0], x[1], x[2]]);
        self.evaluate(&p, false).ok().map(|(v, _)| v)
    }

    fn value_and_gradient(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        if !Self::in_bounds(x) {
            return None;
        }
        let p = KernelParams::from_log([x[0], x[1], x[2]]);
        let (v, g) = self.evaluate(&p, true).ok()?;
        Some((v, g?.to_vec()))
    }
}

/// Negative log marginal likelihood summed over output columns.
pub fn nlml(params: &KernelParams, data: &TrainingSet) -> Result<f64> {
    Ok(NlmlObjective::new(data)?.evaluate(params, false)?.0)
}

/// Gradient of [`nlml`] with respect to `[ln σ_f², ln ℓ, ln σ²]`.
pub fn nlml_grad(params: &KernelParams, data: &TrainingSet) -> Result<[f64; 3]> {
    let (_, g) = NlmlObjective::new(data)?.evaluate(params, true)?;
    Ok(g.expect("gradient requested"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Number of random initializations; the lowest final NLML wins.
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { restarts: 5, seed: 0, max_iters: 200, grad_tol: 1e-6 }
    }
}

/// Outcome of one optimizer restart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub initial_log_params: [f64; 3],
    pub initial_nlml: Option<f64>,
    pub final_log_params: Option<[f64; 3]>,
    pub final_nlml: Option<f64>,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub nlml: f64,
    pub restarts: Vec<RestartOutcome>,
}

/// Initial points drawn log-uniformly: σ_f² ∈ [0.1, 10], ℓ ∈ [0.1, 10]·median
/// distance, σ² ∈ [1e-3, 1].
fn initial_points(data: &TrainingSet, config: &FitConfig) -> Vec<[f64; 3]> {
    let med = kernel::median_pairwise_distance(&data.inputs);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log_uniform = |lo: f64, hi: f64| rng.random_range(lo.ln()..=hi.ln());
    (0..config.restarts)
        .map(|_| {
            let s = log_uniform(0.1, 10.0);
            let l = log_uniform(0.1 * med, 10.0 * med);
            let n = log_uniform(1e-3, 1.0);
            [s, l, n]
        })
        .collect()
}

/// Chooses kernel hyperparameters by minimizing the NLML from several random
/// starts, then caches the factorization for prediction.
pub fn fit(data: &TrainingSet, config: &FitConfig) -> Result<PopulationModel> {
    if data.len() < 2 {
        return Err(Error::Input(format!("fit needs at least 2 rows, got {}", data.len())));
    }
    if config.restarts == 0 {
        return Err(Error::Input("fit needs at least one restart".into()));
    }
    let mut objective = NlmlObjective::new(data)?;
    let options = BfgsOptions { max_iters: config.max_iters, grad_tol: config.grad_tol, ..Default::default() };

    let mut restarts = Vec::with_capacity(config.restarts);
    let mut best: Option<([f64; 3], f64)> = None;
    for init in initial_points(data, config) {
        let initial_nlml = objective.value(&init);
        let result = minimize_bfgs(&mut objective, &init, &options);
        let outcome = RestartOutcome {
            initial_log_params: init,
            initial_nlml,
            final_log_params: result.as_ref().map(|m| [m.x[0], m.x[1], m.x[2]]),
            final_nlml: result.as_ref().map(|m| m.value),
            iterations: result.as_ref().map_or(0, |m| m.iterations),
        };
        if let (Some(x), Some(v)) = (outcome.final_log_params, outcome.final_nlml) {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((x, v));
            }
        }
        restarts.push(outcome);
    }

    let Some((log_params, value)) = best else {
        return Err(Error::Fit(format!("all {} restarts failed numerically", config.restarts)));
    };
    let mut model = PopulationModel::new(data.clone(), KernelParams::from_log(log_params))?;
    model.fit_report = Some(FitReport { nlml: value, restarts });
    Ok(model)
}

/// A GP conditioned on a training set at fixed hyperparameters.
#[derive(Clone, Debug)]
pub struct PopulationModel {
    training: TrainingSet,
    params: KernelParams,
    factor: PsdFactor,
    alpha: DMatrix<f64>,
    fit_report: Option<FitReport>,
}

impl PopulationModel {
    /// Conditions on `training` with the given hyperparameters (no fitting).
    pub fn new(training: TrainingSet, params: KernelParams) -> Result<Self> {
        let k = kernel::gram(&training.inputs, &training.inputs, &params)?;
        let factor = PsdFactor::new(&k, params.noise_variance())?;
        let alpha = factor.solve(&training.targets)?;
        Ok(Self { training, params, factor, alpha, fit_report: None })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    pub fn variant(&self) -> Variant {
        self.training.variant
    }

    pub fn input_dim(&self) -> usize {
        self.training.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.training.output_dim()
    }

    /// `(K + σ²I)⁻¹ Y`.
    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub(crate) fn factor(&self) -> &PsdFactor {
        &self.factor
    }

    /// Jitter that had to be added to factorize the training Gram matrix.
    pub fn jitter(&self) -> f64 {
        self.factor.jitter()
    }

    pub fn fit_report(&self) -> Option<&FitReport> {
        self.fit_report.as_ref()
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: len });
        }
        Ok(())
    }

    /// Predictive mean `k*ᵀ(K+σ²I)⁻¹Y` and variance `k** − k*ᵀ(K+σ²I)⁻¹k*`.
    pub fn predict(&self, x_star: &[f64]) -> Result<Prediction> {
        self.check_dim(x_star.len())?;
        let k_star = kernel::cross_vector(&self.training.inputs, x_star, &self.params)?;
        let mean = (0..self.output_dim())
            .map(|c| k_star.iter().zip(self.alpha.column(c).iter()).map(|(k, a)| k * a).sum())
            .collect();
        let v = self.factor.solve_lower_vec(&k_star)?;
        let var = self.params.signal_variance() - v.iter().map(|x| x * x).sum::<f64>();
        Ok(Prediction::shared(mean, var))
    }

    /// [`predict`](Self::predict) for every row of `queries`.
    pub fn predict_many(&self, queries: &DMatrix<f64>) -> Result<Vec<Prediction>> {
        self.check_dim(queries.ncols())?;
        let k_star = kernel::gram(&self.training.inputs, queries, &self.params)?;
        let means = k_star.transpose() * &self.alpha;
        let v = self.factor.solve_lower(&k_star)?;
        let sf2 = self.params.signal_variance();
        Ok((0..queries.nrows())
            .map(|q| {
                let mean = means.row(q).iter().copied().collect();
                Prediction::shared(mean, sf2 - v.column(q).norm_squared())
            })
            .collect())
    }

    pub fn nlml(&self) -> Result<f64> {
        nlml(&self.params, &self.training)
    }

    /// Writes the model as versioned JSON. The factorization is rebuilt on load.
    pub fn save_json<W: Write>(&self, writer: W) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            log_params: self.params.to_log(),
            training: self.training.clone(),
            fit_report: self.fit_report.clone(),
        };
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn load_json<R: Read>(reader: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(reader)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Serialization(format!("unsupported model file {} v{}", file.format, file.version)));
        }
        let mut model = Self::new(file.training, KernelParams::from_log(file.log_params))?;
        model.fit_report = file.fit_report;
        Ok(model)
    }
}

const MODEL_FORMAT: &str = "pgp-population-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    log_params: [f64; 3],
    training: TrainingSet,
    fit_report: Option<FitReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn set(inputs: DMatrix<f64>, targets: DMatrix<f64>) -> TrainingSet {
        let idx = (0..inputs.nrows()).map(|i| PairIndex { patient_id: "p".into(), visit: i }).collect();
        TrainingSet::new(Variant::Standard, inputs, targets, idx).unwrap()
    }

    fn random_set(rng: &mut ChaCha8Rng, n: usize, d: usize, m: usize) -> TrainingSet {
        let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
        let y = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        set(x, y)
    }

    #[test]
    fn nlml_single_point_scalar_density() {
        let data = set(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1));
        let p = KernelParams::new(1.0, 1.0, 1.0).unwrap();
        let v = nlml(&p, &data).unwrap();
        let oracle = 0.5 * (2.0 * PI * 2.0).ln();
        assert!((v - oracle).abs() < 1e-14);
        assert!((v - 1.2655).abs() < 1e-4);
    }

    #[test]
    fn nlml_grows_when_targets_double() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = random_set(&mut rng, 6, 2, 2);
        let doubled = set(data.inputs().clone(), data.targets() * 2.0);
        let p = KernelParams::new(1.0, 1.0, 0.2).unwrap();
        assert!(nlml(&p, &doubled).unwrap() > nlml(&p, &data).unwrap());
    }

    #[test]
    fn nlml_matches_dense_mvn_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = random_set(&mut rng, 8, 3, 1);
        let p = KernelParams::new(1.4, 0.9, 0.05).unwrap();
        // dense oracle: −log N(y | 0, K + σ²I) via LU inverse and determinant
        let mut c = DMatrix::from_fn(8, 8, |i, j| {
            let a: Vec<f64> = data.inputs().row(i).iter().copied().collect();
            let b: Vec<f64> = data.inputs().row(j).iter().copied().collect();
            let d2: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
            1.4 * (-d2 / (2.0 * 0.81)).exp()
        });
        c += DMatrix::identity(8, 8) * 0.05;
        let y = data.targets().column(0).into_owned();
        let quad = (y.transpose() * c.clone().try_inverse().unwrap() * &y)[(0, 0)];
        let oracle = 0.5 * quad + 0.5 * c.determinant().ln() + 4.0 * (2.0 * PI).ln();
        assert!((nlml(&p, &data).unwrap() - oracle).abs() < 1e-8);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = random_set(&mut rng, 12, 2, 4);
        let p = KernelParams::new(0.8, 1.1, 0.1).unwrap();
        let g = nlml_grad(&p, &data).unwrap();
        let h = 1e-5;
        for k in 0..3 {
            let mut up = p.to_log();
            let mut dn = p.to_log();
            up[k] += h;
            dn[k] -= h;
            let fd = (nlml(&KernelParams::from_log(up), &data).unwrap()
                - nlml(&KernelParams::from_log(dn), &data).unwrap())
                / (2.0 * h);
            assert!((g[k] - fd).abs() <= 1e-4 * fd.abs().max(1e-3), "k={k} {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn log_det_gradient_for_diagonal_kernel() {
        // points far apart -> K = σ_f² I; y = 0 removes the data-fit term
        let n = 5;
        let x = DMatrix::from_fn(n, 1, |i, _| 1e3 * i as f64);
        let data = set(x, DMatrix::zeros(n, 1));
        let (sf2, sn2) = (1.7, 0.3);
        let p = KernelParams::new(sf2, 1.0, sn2).unwrap();
        let g = nlml_grad(&p, &data).unwrap();
        let expected = 0.5 * n as f64 * sf2 / (sf2 + sn2);
        assert!((g[0] - expected).abs() < 1e-12, "{} vs {expected}", g[0]);
    }

    #[test]
    fn predict_single_pair_by_hand() {
        let data = set(DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, 1.0));
        let model = PopulationModel::new(data, KernelParams::new(1.0, 1.0, 1.0).unwrap()).unwrap();
        let pred = model.predict(&[0.0]).unwrap();
        assert!((pred.mean[0] - 0.5).abs() < 1e-15);
        assert!((pred.variance[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn predict_interpolates_with_tiny_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = random_set(&mut rng, 6, 2, 4);
        let model = PopulationModel::new(data.clone(), KernelParams::new(1.0, 1.0, 1e-9).unwrap()).unwrap();
        let x: Vec<f64> = data.inputs().row(2).iter().copied().collect();
        let pred = model.predict(&x).unwrap();
        for c in 0..4 {
            assert!((pred.mean[c] - data.targets()[(2, c)]).abs() < 1e-4);
        }
        assert!(pred.variance[0] < 1e-4);
    }

    #[test]
    fn predict_reverts_to_prior_far_away() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = random_set(&mut rng, 6, 2, 4);
        let model = PopulationModel::new(data, KernelParams::new(2.0, 0.5, 0.1).unwrap()).unwrap();
        let pred = model.predict(&[100.0, -100.0]).unwrap();
        assert!(pred.mean.iter().all(|m| m.abs() < 1e-6));
        assert!((pred.variance[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn predict_rejects_wrong_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model =
            PopulationModel::new(random_set(&mut rng, 4, 2, 1), KernelParams::new(1.0, 1.0, 0.1).unwrap()).unwrap();
        assert!(matches!(model.predict(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn predict_many_agrees_with_predict() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data = random_set(&mut rng, 10, 3, 4);
        let model = PopulationModel::new(data, KernelParams::new(1.2, 0.7, 0.05).unwrap()).unwrap();
        let q = DMatrix::from_fn(5, 3, |_, _| rng.random_range(-2.0..2.0));
        let many = model.predict_many(&q).unwrap();
        for (i, p) in many.iter().enumerate() {
            let x: Vec<f64> = q.row(i).iter().copied().collect();
            let single = model.predict(&x).unwrap();
            for c in 0..4 {
                assert!((p.mean[c] - single.mean[c]).abs() < 1e-12);
            }
            assert!((p.variance[0] - single.variance[0]).abs() < 1e-12);
        }
    }

    fn sample_gp_set(seed: u64, n: usize, params: &KernelParams) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(0.0..10.0));
        let k = kernel::gram(&x, &x, params).unwrap() + DMatrix::identity(n, n) * 1e-8;
        let l = k.cholesky().unwrap().l();
        let z = DMatrix::from_fn(n, 4, |_, _| StandardNormal.sample(&mut rng));
        let noise = DMatrix::from_fn(n, 4, |_, _| {
            params.noise_variance().sqrt() * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        set(x, l * z + noise)
    }

    #[test]
    fn fit_recovers_lengthscale() {
        let truth = KernelParams::new(1.0, 2.0, 0.1).unwrap();
        let data = sample_gp_set(10, 100, &truth);
        let model = fit(&data, &FitConfig::default()).unwrap();
        let l = model.params().lengthscale();
        assert!((l - 2.0).abs() <= 0.6, "recovered lengthscale {l}");

        let report = model.fit_report().unwrap();
        for r in &report.restarts {
            if let Some(init) = r.initial_nlml {
                assert!(report.nlml <= init);
            }
        }
        let g = nlml_grad(model.params(), &data).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "gradient norm at optimum {norm}");
    }

    #[test]
    fn fit_is_deterministic() {
        let truth = KernelParams::new(1.0, 1.5, 0.2).unwrap();
        let data = sample_gp_set(12, 40, &truth);
        let cfg = FitConfig { seed: 9, ..Default::default() };
        let a = fit(&data, &cfg).unwrap();
        let b = fit(&data, &cfg).unwrap();
        assert_eq!(a.params().to_log(), b.params().to_log());
        assert_eq!(a.fit_report(), b.fit_report());
    }

    #[test]
    fn fit_needs_two_rows() {
        let data = set(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1));
        assert!(matches!(fit(&data, &FitConfig::default()), Err(Error::Input(_))));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let truth = KernelParams::new(0.9, 1.3, 0.15).unwrap();
        let data = sample_gp_set(13, 15, &truth);
        let model = fit(&data, &FitConfig { restarts: 2, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        model.save_json(&mut buf).unwrap();
        let back = PopulationModel::load_json(buf.as_slice()).unwrap();
        assert_eq!(back.params().to_log(), model.params().to_log());
        assert_eq!(back.training(), model.training());
        let q = [3.0, 4.0];
        assert_eq!(back.predict(&q).unwrap(), model.predict(&q).unwrap());
    }
}
