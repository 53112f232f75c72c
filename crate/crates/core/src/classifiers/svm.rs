//! RBF support vector machine trained by SMO, with Platt-scaled scores.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

const TAU: f64 = 1e-12;
const EPS: f64 = 1e-3;
const PLATT_FOLDS: usize = 3;

/// Default RBF width `1 / (n_features · var(X))` over all entries of `X`.
pub fn default_gamma(x: ArrayView2<f64>) -> f64 {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (x.ncols() as f64 * var)
    } else {
        1.0
    }
}

/// `exp(−γ‖a_i − b_j‖²)` for all row pairs, via `‖a‖² + ‖b‖² − 2a·b`.
fn rbf_matrix(a: ArrayView2<f64>, b: ArrayView2<f64>, gamma: f64) -> Array2<f64> {
    let na: Vec<f64> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
    let nb: Vec<f64> = b.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut k = a.dot(&b.t());
    for ((i, j), v) in k.indexed_iter_mut() {
        let d2 = (na[i] + nb[j] - 2.0 * *v).max(0.0);
        *v = (-gamma * d2).exp();
    }
    k
}

#[derive(Debug, Clone)]
pub struct Svm {
    support: Array2<f64>,
    /// `α_i · y_i` for each support vector.
    coef: Vec<f64>,
    rho: f64,
    gamma: f64,
    pub iterations: usize,
}

impl Svm {
    /// Dual coordinate-pair solver with second-order working-set selection.
    pub fn fit(x: ArrayView2<f64>, labels: &[bool], c: f64, gamma: f64, balanced: bool) -> Self {
        let n = labels.len();
        let (wg, wi) = if balanced { super::balanced_weights(labels) } else { (1.0, 1.0) };
        let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let cap: Vec<f64> = labels.iter().map(|&l| c * if l { wg } else { wi }).collect();
        let k: Vec<f32> = rbf_matrix(x, x, gamma).iter().map(|v| *v as f32).collect();
        let kk = |i: usize, j: usize| k[i * n + j] as f64;
        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let upper = |a: f64, i: usize| a >= cap[i];
        let lower = |a: f64| a <= 0.0;
        let max_iter = (100 * n).max(1_000_000);
        let mut iterations = 0;
        while iterations < max_iter {
            iterations += 1;
            let mut gmax = f64::NEG_INFINITY;
            let mut i_sel = usize::MAX;
            for t in 0..n {
                let v = -y[t] * grad[t];
                let movable = if y[t] > 0.0 { !upper(alpha[t], t) } else { !lower(alpha[t]) };
                if movable && v >= gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
            if i_sel == usize::MAX {
                break;
            }
            let i = i_sel;
            let mut gmax2 = f64::NEG_INFINITY;
            let mut j_sel = usize::MAX;
            let mut best_obj = f64::INFINITY;
            for t in 0..n {
                let movable = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t], t) };
                if !movable {
                    continue;
                }
                let v = y[t] * grad[t];
                gmax2 = gmax2.max(v);
                let diff = gmax + v;
                if diff > 0.0 {
                    let quad = kk(i, i) + kk(t, t) - 2.0 * kk(i, t);
                    let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best_obj {
                        best_obj = obj;
                        j_sel = t;
                    }
                }
            }
            if gmax + gmax2 < EPS || j_sel == usize::MAX {
                break;
            }
            let j = j_sel;
            let (old_i, old_j) = (alpha[i], alpha[j]);
            let (ci, cj) = (cap[i], cap[j]);
            let qij = y[i] * y[j] * kk(i, j);
            if y[i] != y[j] {
                let quad = (kk(i, i) + kk(j, j) + 2.0 * qij).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > ci - cj {
                    if alpha[i] > ci {
                        alpha[i] = ci;
                        alpha[j] = ci - diff;
                    }
                } else if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = cj + diff;
                }
            } else {
                let quad = (kk(i, i) + kk(j, j) - 2.0 * qij).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > ci {
                    if alpha[i] > ci {
                        alpha[i] = ci;
                        alpha[j] = sum - ci;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > cj {
                    if alpha[j] > cj {
                        alpha[j] = cj;
                        alpha[i] = sum - cj;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..n {
                grad[t] += y[t] * (y[i] * kk(i, t) * di + y[j] * kk(j, t) * dj);
            }
        }
        // offset from free vectors, or the midpoint of the feasible interval
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free_sum, mut n_free) = (0.0, 0usize);
        for t in 0..n {
            let yg = y[t] * grad[t];
            if upper(alpha[t], t) {
                if y[t] < 0.0 {
                    ub = ub.min(yg)
                } else {
                    lb = lb.max(yg)
                }
            } else if lower(alpha[t]) {
                if y[t] > 0.0 {
                    ub = ub.min(yg)
                } else {
                    lb = lb.max(yg)
                }
            } else {
                free_sum += yg;
                n_free += 1;
            }
        }
        let rho = if n_free > 0 { free_sum / n_free as f64 } else { 0.5 * (ub + lb) };
        let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
        Self {
            support: x.select(Axis(0), &sv),
            coef: sv.iter().map(|&t| alpha[t] * y[t]).collect(),
            rho,
            gamma,
            iterations,
        }
    }

    pub fn n_support(&self) -> usize {
        self.coef.len()
    }

    pub fn decision(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let k = rbf_matrix(x, self.support.view(), self.gamma);
        k.rows()
            .into_iter()
            .map(|row| row.iter().zip(&self.coef).map(|(v, c)| c * v).sum::<f64>() - self.rho)
            .collect()
    }
}

/// Sigmoid `P(genuine | f) = 1 / (1 + exp(A·f + B))` fitted by Newton's
/// method with regularised targets.
pub fn platt_fit(decision: &[f64], labels: &[bool]) -> (f64, f64) {
    let n_pos = labels.iter().filter(|l| **l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let t: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| {
        decision
            .iter()
            .zip(&t)
            .map(|(f, ti)| {
                let z = a * f + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum::<f64>()
    };
    let (min_step, sigma) = (1e-10, 1e-12);
    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (f, ti) in decision.iter().zip(&t) {
            let z = a * f + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step *= 0.5;
        }
        if step < min_step {
            break;
        }
    }
    (a, b)
}

#[derive(Debug, Clone)]
pub struct PlattSvm {
    pub svm: Svm,
    pub a: f64,
    pub b: f64,
}

/// Stratified fold assignment after a seeded per-class shuffle.
fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let mut fold = vec![0; labels.len()];
    for (cls, key) in [(true, 1u64), (false, 0u64)] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == cls).collect();
        idx.shuffle(&mut rng::stream(seed, &[key]));
        for (r, i) in idx.into_iter().enumerate() {
            fold[i] = r % k;
        }
    }
    fold
}

impl PlattSvm {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], c: f64, gamma: Option<f64>, balanced: bool, seed: u64) -> Result<Self> {
        let gamma = gamma.unwrap_or_else(|| default_gamma(x));
        let svm = Svm::fit(x, y, c, gamma, balanced);
        let folds = stratified_folds(y, PLATT_FOLDS, seed);
        let mut decision = vec![f64::NAN; y.len()];
        for f in 0..PLATT_FOLDS {
            let train: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != f).collect();
            let held: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
            let ytr: Vec<bool> = train.iter().map(|&i| y[i]).collect();
            if held.is_empty() || ytr.iter().all(|v| *v) || ytr.iter().all(|v| !*v) {
                continue;
            }
            let inner = Svm::fit(x.select(Axis(0), &train).view(), &ytr, c, gamma, balanced);
            for (i, v) in held.iter().zip(inner.decision(x.select(Axis(0), &held).view())) {
                decision[*i] = v;
            }
        }
        let keep: Vec<usize> = (0..y.len()).filter(|&i| decision[i].is_finite()).collect();
        let kept_labels: Vec<bool> = keep.iter().map(|&i| y[i]).collect();
        let both = kept_labels.iter().any(|v| *v) && kept_labels.iter().any(|v| !*v);
        let (a, b) = if both {
            let d: Vec<f64> = keep.iter().map(|&i| decision[i]).collect();
            platt_fit(&d, &kept_labels)
        } else {
            (-1.0, 0.0)
        };
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Training("Platt sigmoid did not converge".into()));
        }
        Ok(Self { svm, a, b })
    }

    pub fn score(&self, x: ArrayView2<f64>) -> Vec<f64> {
        self.svm
            .decision(x)
            .into_iter()
            .map(|f| super::sigmoid(-(self.a * f + self.b)))
            .collect()
    }
}
