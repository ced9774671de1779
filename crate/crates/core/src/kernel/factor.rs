use faer::linalg::solvers::{DenseSolveCore, Llt, Solve};
use faer::{Mat, MatRef, Par, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// First jitter multiplier tried, relative to the mean diagonal.
pub const JITTER_BASE: f64 = 1e-8;
/// Largest jitter multiplier tried before giving up.
pub const JITTER_MAX: f64 = 1e-4;

/// Cholesky factor of `K + noise·I (+ jitter·I)`.
#[derive(Clone, Debug)]
pub struct PsdFactor {
    llt: Llt<f64>,
    jitter: f64,
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols()).to_owned()
}

fn to_nalgebra(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

impl PsdFactor {
    /// Factorizes `k + noise·I`. If that fails, diagonal jitter of
    /// `1e-8·mean(diag)` is added and grown by a decade per retry up to
    /// `1e-4·mean(diag)`.
    pub fn new(k: &DMatrix<f64>, noise: f64) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: k.ncols() });
        }
        let mean_diag = if n == 0 { 1.0 } else { (k.trace() + noise * n as f64) / n as f64 };
        let scale = if mean_diag.is_finite() && mean_diag > 0.0 { mean_diag } else { 1.0 };

        let mut jitter = 0.0;
        let mut multiplier = JITTER_BASE;
        loop {
            if let Some(llt) = Self::try_factor(k, noise + jitter) {
                return Ok(Self { llt, jitter });
            }
            if multiplier > JITTER_MAX * 1.000001 {
                return Err(Error::Factorization { jitter });
            }
            jitter = multiplier * scale;
            multiplier *= 10.0;
        }
    }

    fn try_factor(k: &DMatrix<f64>, diag: f64) -> Option<Llt<f64>> {
        let mut a = to_faer(k);
        for i in 0..a.nrows() {
            a[(i, i)] += diag;
        }
        let llt = Llt::new(a.as_ref(), Side::Lower).ok()?;
        let l = llt.L();
        (0..l.nrows()).all(|i| l[(i, i)].is_finite() && l[(i, i)] > 0.0).then_some(llt)
    }

    /// Diagonal jitter added on top of the requested noise (0 when none was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.llt.L().nrows()
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rows });
        }
        Ok(())
    }

    /// `(K + σ²I)⁻¹ B`.
    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(b.nrows())?;
        let mut rhs = to_faer(b);
        self.llt.solve_in_place(rhs.as_mut());
        Ok(to_nalgebra(rhs.as_ref()))
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_rows(b.len())?;
        let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        self.llt.solve_in_place(rhs.as_mut());
        Ok(rhs.col_as_slice(0).to_vec())
    }

    /// `L⁻¹ B` where `L Lᵀ = K + σ²I`.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(b.nrows())?;
        let mut rhs = to_faer(b);
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(self.llt.L(), rhs.as_mut(), Par::Seq);
        Ok(to_nalgebra(rhs.as_ref()))
    }

    pub fn solve_lower_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_rows(b.len())?;
        let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(self.llt.L(), rhs.as_mut(), Par::Seq);
        Ok(rhs.col_as_slice(0).to_vec())
    }

    /// Dense `(K + σ²I)⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        to_nalgebra(self.llt.inverse().as_ref())
    }

    /// `log det(K + σ²I)`.
    pub fn log_det(&self) -> f64 {
        let l = self.llt.L();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }
}

/// `(K + noise·I)⁻¹ B` via Cholesky with the jitter escalation of [`PsdFactor::new`].
pub fn solve_psd(k: &DMatrix<f64>, noise: f64, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    PsdFactor::new(k, noise)?.solve(b)
}
