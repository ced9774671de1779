//! Isotropic RBF kernel, Gram matrices and the factorized solves that every GP
//! computation in this crate goes through.

mod factor;

pub use factor::{solve_psd, PsdFactor, JITTER_BASE, JITTER_MAX};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the isotropic RBF kernel plus the observation noise.
///
/// Values are held in log-space so that any point an optimizer visits maps to
/// a valid (strictly positive) parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    log_signal_variance: f64,
    log_lengthscale: f64,
    log_noise_variance: f64,
}

impl KernelParams {
    pub fn new(signal_variance: f64, lengthscale: f64, noise_variance: f64) -> Result<Self> {
        for (name, v) in
            [("signal_variance", signal_variance), ("lengthscale", lengthscale), ("noise_variance", noise_variance)]
        {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Input(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(Self {
            log_signal_variance: signal_variance.ln(),
            log_lengthscale: lengthscale.ln(),
            log_noise_variance: noise_variance.ln(),
        })
    }

    /// Builds parameters from `[ln σ_f², ln ℓ, ln σ²]`.
    pub fn from_log(log: [f64; 3]) -> Self {
        Self { log_signal_variance: log[0], log_lengthscale: log[1], log_noise_variance: log[2] }
    }

    pub fn to_log(&self) -> [f64; 3] {
        [self.log_signal_variance, self.log_lengthscale, self.log_noise_variance]
    }

    pub fn signal_variance(&self) -> f64 {
        self.log_signal_variance.exp()
    }

    pub fn lengthscale(&self) -> f64 {
        self.log_lengthscale.exp()
    }

    pub fn noise_variance(&self) -> f64 {
        self.log_noise_variance.exp()
    }

    /// Kernel value for a precomputed squared Euclidean distance.
    #[inline]
    pub fn eval_sq_dist(&self, sq_dist: f64) -> f64 {
        let l = self.lengthscale();
        self.signal_variance() * (-sq_dist / (2.0 * l * l)).exp()
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `σ_f² · exp(−‖a−b‖² / 2ℓ²)`.
pub fn rbf(a: &[f64], b: &[f64], params: &KernelParams) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(params.eval_sq_dist(sq_dist(a, b)))
}

/// Copies the rows of `m` into contiguous row-major storage.
pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<f64> {
    let (n, d) = m.shape();
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n {
        out.extend(m.row(i).iter());
    }
    out
}

/// Squared distances between every row of `x` and every row of `z`.
pub fn sq_dist_matrix(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = x.ncols();
    if z.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: z.ncols() });
    }
    let xr = rows_of(x);
    let zr = rows_of(z);
    Ok(DMatrix::from_fn(x.nrows(), z.nrows(), |i, j| sq_dist(&xr[i * d..(i + 1) * d], &zr[j * d..(j + 1) * d])))
}

/// Cross-covariance matrix with entry `(i, j) = rbf(x_i, z_j)`; rows are points.
pub fn gram(x: &DMatrix<f64>, z: &DMatrix<f64>, params: &KernelParams) -> Result<DMatrix<f64>> {
    let mut k = sq_dist_matrix(x, z)?;
    k.apply(|v| *v = params.eval_sq_dist(*v));
    Ok(k)
}

/// Kernel vector between every row of `x` and a single point.
pub fn cross_vector(x: &DMatrix<f64>, point: &[f64], params: &KernelParams) -> Result<Vec<f64>> {
    if x.ncols() != point.len() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), found: point.len() });
    }
    Ok((0..x.nrows())
        .map(|i| {
            let s: f64 = x.row(i).iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
            params.eval_sq_dist(s)
        })
        .collect())
}

/// Median of the pairwise Euclidean distances between rows. Returns 1.0 when
/// fewer than two distinct points exist.
pub fn median_pairwise_distance(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let d = x.ncols();
    let rows = rows_of(x);
    let mut dists = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(sq_dist(&rows[i * d..(i + 1) * d], &rows[j * d..(j + 1) * d]).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    let mid = dists.len() / 2;
    let (_, m, _) = dists.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    if *m > 0.0 && m.is_finite() {
        *m
    } else {
        1.0
    }
}
