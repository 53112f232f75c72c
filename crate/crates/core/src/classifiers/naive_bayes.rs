//! Gaussian naive Bayes.

use ndarray::{Array1, ArrayView2, Axis};

#[derive(Debug, Clone)]
pub struct GaussianNb {
    /// Row 0 impostor, row 1 genuine.
    mean: [Array1<f64>; 2],
    var: [Array1<f64>; 2],
    log_prior: [f64; 2],
}

impl GaussianNb {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], var_floor: f64) -> Self {
        let class_stats = |label: bool| {
            let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
            let rows = x.select(Axis(0), &idx);
            let mean = rows.mean_axis(Axis(0)).expect("class present");
            let var = rows.var_axis(Axis(0), 0.0).mapv(|v| v.max(var_floor));
            (mean, var, idx.len() as f64 / y.len() as f64)
        };
        let (m0, v0, p0) = class_stats(false);
        let (m1, v1, p1) = class_stats(true);
        Self {
            mean: [m0, m1],
            var: [v0, v1],
            log_prior: [p0.ln(), p1.ln()],
        }
    }

    fn joint_log_likelihood(&self, c: usize, row: ndarray::ArrayView1<f64>) -> f64 {
        let mut ll = self.log_prior[c];
        for ((v, m), s2) in row.iter().zip(&self.mean[c]).zip(&self.var[c]) {
            ll -= 0.5 * ((2.0 * std::f64::consts::PI * s2).ln() + (v - m) * (v - m) / s2);
        }
        ll
    }

    pub fn score(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                let l0 = self.joint_log_likelihood(0, row);
                let l1 = self.joint_log_likelihood(1, row);
                super::sigmoid(l1 - l0)
            })
            .collect()
    }
}
