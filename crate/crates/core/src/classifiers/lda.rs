//! Two-class linear discriminant with pooled covariance.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Lda {
    /// Discriminant direction `Σ⁺(μ_genuine − μ_impostor)`.
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl Lda {
    pub fn fit(x: ArrayView2<f64>, y: &[bool]) -> Result<Self> {
        let (n, d) = x.dim();
        let mut mean = [DVector::zeros(d), DVector::zeros(d)];
        let mut count = [0usize; 2];
        for (row, &label) in x.rows().into_iter().zip(y) {
            let c = label as usize;
            count[c] += 1;
            for (m, v) in mean[c].iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        for c in 0..2 {
            mean[c] /= count[c] as f64;
        }
        let mut scatter = DMatrix::<f64>::zeros(d, d);
        let mut centered = DVector::zeros(d);
        for (row, &label) in x.rows().into_iter().zip(y) {
            let m = &mean[label as usize];
            for j in 0..d {
                centered[j] = row[j] - m[j];
            }
            scatter.ger(1.0, &centered, &centered, 1.0);
        }
        let dof = if n > 2 { n - 2 } else { n };
        let cov = scatter / dof as f64;
        let svd = cov.svd(true, true);
        let smax = svd.singular_values.max();
        let tol = 1e-10 * smax.max(f64::MIN_POSITIVE);
        let pinv = svd
            .pseudo_inverse(tol)
            .map_err(|e| Error::Training(format!("LDA pseudo-inverse failed: {e}")))?;
        let diff = &mean[1] - &mean[0];
        let w = pinv * &diff;
        let mid = (&mean[1] + &mean[0]) * 0.5;
        let prior_log_odds = (count[1] as f64 / count[0] as f64).ln();
        let intercept = -w.dot(&mid) + prior_log_odds;
        Ok(Self {
            weights: w.iter().copied().collect(),
            intercept,
        })
    }

    pub fn decision(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.intercept)
            .collect()
    }

    pub fn score(&self, x: ArrayView2<f64>) -> Vec<f64> {
        self.decision(x).into_iter().map(super::sigmoid).collect()
    }
}
