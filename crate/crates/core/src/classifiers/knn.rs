//! k-nearest-neighbour vote fraction.

use ndarray::{Array2, ArrayView1, ArrayView2};

#[derive(Debug, Clone)]
pub struct Knn {
    pub k: usize,
    train: Array2<f64>,
    labels: Vec<bool>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum()
}

impl Knn {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], k: usize) -> Self {
        Self {
            k: k.min(y.len()),
            train: x.to_owned(),
            labels: y.to_vec(),
        }
    }

    /// Indices of the `k` nearest training rows, closest first; ties go to
    /// the lower index.
    pub fn neighbors(&self, probe: ArrayView1<f64>) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .train
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| (sq_dist(row, probe), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn score(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                let nn = self.neighbors(row);
                nn.iter().filter(|&&i| self.labels[i]).count() as f64 / nn.len() as f64
            })
            .collect()
    }
}
