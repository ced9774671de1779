//! Scalar agreement metrics and the paired comparison test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Input(format!("prediction/truth length mismatch: {} vs {}", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::Input("no predictions to score".into()));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// ICC(3,1): two-way mixed model, single measure, consistency, with
/// prediction and truth as the two raters. Returns NaN when there is no
/// variation between subjects.
pub fn icc31(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let n = pred.len();
    if n < 2 {
        return Err(Error::Input("ICC needs at least 2 paired observations".into()));
    }
    let k = 2.0;
    let nf = n as f64;
    let grand = (pred.iter().sum::<f64>() + truth.iter().sum::<f64>()) / (k * nf);
    let mean_pred = pred.iter().sum::<f64>() / nf;
    let mean_truth = truth.iter().sum::<f64>() / nf;

    let mut ss_rows = 0.0;
    let mut ss_total = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        let row_mean = (p + t) / k;
        ss_rows += (row_mean - grand).powi(2);
        ss_total += (p - grand).powi(2) + (t - grand).powi(2);
    }
    ss_rows *= k;
    let ss_cols = nf * ((mean_pred - grand).powi(2) + (mean_truth - grand).powi(2));
    let ss_err = (ss_total - ss_rows - ss_cols).max(0.0);

    let bms = ss_rows / (nf - 1.0);
    let ems = ss_err / ((nf - 1.0) * (k - 1.0));
    let denom = bms + (k - 1.0) * ems;
    if bms <= 1e-12 * ss_total / nf || denom.is_nan() || denom <= 0.0 {
        return Ok(f64::NAN);
    }
    Ok((bms - ems) / denom)
}

/// Maps a continuous status prediction to a label: rounded half away from
/// zero, then clamped to `0..=2`.
pub fn cs_discretize(value: f64) -> Result<u8> {
    if !value.is_finite() {
        return Err(Error::Input(format!("cannot discretize non-finite status {value}")));
    }
    Ok(value.round().clamp(0.0, 2.0) as u8)
}

/// 3×3 status confusion matrix; entry `[i][j]` counts true class `i`
/// predicted as `j`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion(pub [[u64; 3]; 3]);

impl Confusion {
    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..3).map(|i| self.0[i][i]).sum()
    }

    /// Share of correct labels; NaN when empty.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            f64::NAN
        } else {
            self.correct() as f64 / total as f64
        }
    }

    pub fn add(&mut self, other: &Confusion) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += other.0[i][j];
            }
        }
    }
}

pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<Confusion> {
    if pred.len() != truth.len() {
        return Err(Error::Input(format!("label length mismatch: {} vs {}", pred.len(), truth.len())));
    }
    let mut m = Confusion::default();
    for (&p, &t) in pred.iter().zip(truth) {
        if p > 2 || t > 2 {
            return Err(Error::Input(format!("status labels must be 0, 1 or 2, got {p} and {t}")));
        }
        m.0[t as usize][p as usize] += 1;
    }
    Ok(m)
}

pub fn accuracy(pred: &[u8], truth: &[u8]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::Input("no labels to score".into()));
    }
    Ok(confusion(pred, truth)?.accuracy())
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Over the finite values only; NaN for both when none are finite.
    pub fn of(values: &[f64]) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return Self { mean: f64::NAN, sd: f64::NAN };
        }
        let n = finite.len() as f64;
        let mean = finite.iter().sum::<f64>() / n;
        let sd = (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self { mean, sd }
    }
}

/// Two-sided paired t-test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub n: usize,
    /// Mean of `a − b`.
    pub mean_difference: f64,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::Input(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Input("paired t-test needs at least 2 pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let df = nf - 1.0;
    let se = (var / nf).sqrt();
    let (t, p) = if se > 0.0 {
        let t = mean / se;
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Input(e.to_string()))?;
        (t, 2.0 * dist.sf(t.abs()))
    } else if mean == 0.0 {
        (0.0, 1.0)
    } else {
        (mean.signum() * f64::INFINITY, 0.0)
    };
    Ok(PairedTTest { n, mean_difference: mean, t, df, p_value: p })
}
