//! L2-penalised logistic regression fitted by damped Newton iterations.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use crate::error::{Error, Result};

const TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;

#[derive(Debug, Clone)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Penalised log-likelihood before the first step and after every step.
    pub objective_history: Vec<f64>,
    pub final_gradient_norm: f64,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

struct Problem {
    /// Design matrix with a trailing column of ones.
    xa: DMatrix<f64>,
    target: Vec<f64>,
    weight: Vec<f64>,
    lambda: f64,
}

impl Problem {
    fn margins(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.xa * beta
    }

    fn objective(&self, beta: &DVector<f64>) -> f64 {
        let z = self.margins(beta);
        let d = beta.len() - 1;
        let mut ll = 0.0;
        for i in 0..z.len() {
            let nll = if self.target[i] > 0.5 { softplus(-z[i]) } else { softplus(z[i]) };
            ll -= self.weight[i] * nll;
        }
        let penalty: f64 = beta.rows(0, d).iter().map(|b| b * b).sum();
        ll - 0.5 * self.lambda * penalty
    }

    fn gradient_and_hessian(&self, beta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let (n, p) = self.xa.shape();
        let z = self.margins(beta);
        let mut resid = DVector::zeros(n);
        let mut xw = self.xa.clone();
        for i in 0..n {
            let pi = super::sigmoid(z[i]);
            resid[i] = self.weight[i] * (self.target[i] - pi);
            let s = (self.weight[i] * pi * (1.0 - pi)).sqrt();
            xw.row_mut(i).scale_mut(s);
        }
        let mut grad = self.xa.tr_mul(&resid);
        let mut hess = xw.tr_mul(&xw);
        for j in 0..p - 1 {
            grad[j] -= self.lambda * beta[j];
            hess[(j, j)] += self.lambda;
        }
        (grad, hess)
    }
}

impl LogisticRegression {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], lambda: f64, balanced: bool) -> Result<Self> {
        let (n, d) = x.dim();
        let (wg, wi) = if balanced { super::balanced_weights(y) } else { (1.0, 1.0) };
        let xa = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x[[i, j]] } else { 1.0 });
        let problem = Problem {
            xa,
            target: y.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect(),
            weight: y.iter().map(|&l| if l { wg } else { wi }).collect(),
            lambda,
        };
        let mut beta = DVector::zeros(d + 1);
        let mut obj = problem.objective(&beta);
        let mut history = vec![obj];
        let (mut grad, mut hess) = problem.gradient_and_hessian(&beta);
        for _ in 0..MAX_ITER {
            if grad.norm() < TOL {
                break;
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => hess
                    .clone()
                    .lu()
                    .solve(&grad)
                    .ok_or_else(|| Error::Training("singular Hessian in logistic regression".into()))?,
            };
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let cand = &beta + &step * t;
                let cand_obj = problem.objective(&cand);
                if cand_obj >= obj {
                    accepted = Some((cand, cand_obj));
                    break;
                }
                t *= 0.5;
            }
            let Some((next, next_obj)) = accepted else { break };
            let moved = (&next - &beta).norm();
            beta = next;
            obj = next_obj;
            history.push(obj);
            (grad, hess) = problem.gradient_and_hessian(&beta);
            if moved < TOL * (1.0 + beta.norm()) {
                break;
            }
        }
        Ok(Self {
            weights: beta.rows(0, d).iter().copied().collect(),
            intercept: beta[d],
            objective_history: history,
            final_gradient_norm: grad.norm(),
        })
    }

    pub fn score(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                let z = row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.intercept;
                super::sigmoid(z)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::tests::blobs;
    use proptest::prelude::*;

    #[test]
    fn separable_data_stays_finite() {
        let (x, y) = blobs(50, 2, 20.0, 1);
        let lr = LogisticRegression::fit(x.view(), &y, 1.0, true).unwrap();
        assert!(lr.weights.iter().all(|w| w.is_finite()));
        assert!(lr.final_gradient_norm < 1e-6, "{}", lr.final_gradient_norm);
    }

    #[test]
    fn gradient_vanishes_by_finite_difference() {
        let (x, y) = blobs(40, 3, 1.0, 2);
        let lr = LogisticRegression::fit(x.view(), &y, 0.5, true).unwrap();
        let (wg, wi) = crate::classifiers::balanced_weights(&y);
        let obj = |w: &[f64], b: f64| {
            let mut ll = 0.0;
            for (i, row) in x.rows().into_iter().enumerate() {
                let z: f64 = row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
                let p = 1.0 / (1.0 + (-z).exp());
                ll += if y[i] { wg * p.ln() } else { wi * (1.0 - p).ln() };
            }
            ll - 0.25 * w.iter().map(|v| v * v).sum::<f64>()
        };
        let h = 1e-5;
        for j in 0..3 {
            let mut up = lr.weights.clone();
            let mut dn = lr.weights.clone();
            up[j] += h;
            dn[j] -= h;
            let g = (obj(&up, lr.intercept) - obj(&dn, lr.intercept)) / (2.0 * h);
            assert!(g.abs() < 1e-5, "component {j}: {g}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn objective_monotone_and_converged(seed in any::<u64>(), sep in 0.0f64..6.0, lambda in 0.01f64..10.0) {
            let (x, y) = blobs(25, 4, sep, seed);
            let lr = LogisticRegression::fit(x.view(), &y, lambda, true).unwrap();
            for w in lr.objective_history.windows(2) {
                prop_assert!(w[1] >= w[0], "{:?}", lr.objective_history);
            }
            prop_assert!(lr.final_gradient_norm < 1e-6, "{}", lr.final_gradient_norm);
        }
    }
}
