//! Random forest of fully grown Gini trees with bootstrap and balanced
//! class weights.

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use crate::rng;

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf(bool),
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: ArrayView1<f64>) -> bool {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature as usize] <= threshold { left } else { right } as usize,
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Tree>,
}

/// Per-feature dense ranks of the training values, column-major, plus the
/// sorted distinct values so split thresholds can be mapped back.
struct Columns {
    n: usize,
    d: usize,
    ranks: Vec<u32>,
    distinct: Vec<Vec<f64>>,
}

impl Columns {
    fn new(x: ArrayView2<f64>) -> Self {
        let (n, d) = x.dim();
        let mut ranks = vec![0u32; n * d];
        let mut distinct = Vec::with_capacity(d);
        for f in 0..d {
            let col = x.column(f);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            let mut values: Vec<f64> = Vec::new();
            for &i in &order {
                if values.last().is_none_or(|v| *v < col[i]) {
                    values.push(col[i]);
                }
                ranks[f * n + i] = (values.len() - 1) as u32;
            }
            distinct.push(values);
        }
        Self { n, d, ranks, distinct }
    }

    fn rank(&self, feature: usize, row: usize) -> u32 {
        self.ranks[feature * self.n + row]
    }
}

struct SplitCandidate {
    feature: usize,
    /// Rows with rank at or below this go left.
    rank: u32,
    score: f64,
}

struct Builder<'a> {
    cols: &'a Columns,
    y: &'a [bool],
    weight: Vec<f64>,
    mtry: usize,
    /// `rank << 32 | row`, sorted per candidate feature.
    scratch: Vec<u64>,
}

impl Builder<'_> {
    fn best_split_on(&mut self, feature: usize, samples: &[u32]) -> Option<SplitCandidate> {
        self.scratch.clear();
        self.scratch
            .extend(samples.iter().map(|&i| (u64::from(self.cols.rank(feature, i as usize)) << 32) | u64::from(i)));
        self.scratch.sort_unstable();
        let (mut tg, mut ti) = (0.0, 0.0);
        for &key in &self.scratch {
            let i = key as u32 as usize;
            if self.y[i] {
                tg += self.weight[i]
            } else {
                ti += self.weight[i]
            }
        }
        let (mut lg, mut li) = (0.0, 0.0);
        let mut best: Option<SplitCandidate> = None;
        for k in 0..self.scratch.len() - 1 {
            let key = self.scratch[k];
            let i = key as u32 as usize;
            if self.y[i] {
                lg += self.weight[i]
            } else {
                li += self.weight[i]
            }
            let rank = (key >> 32) as u32;
            if (self.scratch[k + 1] >> 32) as u32 == rank {
                continue;
            }
            let (rg, ri) = (tg - lg, ti - li);
            // maximising Σ_child (w_g² + w_i²) / W_child minimises weighted Gini
            let score = (lg * lg + li * li) / (lg + li) + (rg * rg + ri * ri) / (rg + ri);
            if best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(SplitCandidate { feature, rank, score });
            }
        }
        best
    }

    fn threshold(&self, split: &SplitCandidate) -> f64 {
        let values = &self.cols.distinct[split.feature];
        let (v, next) = (values[split.rank as usize], values[split.rank as usize + 1]);
        let mid = 0.5 * (v + next);
        if mid < next {
            mid
        } else {
            v
        }
    }

    fn grow(&mut self, mut samples: Vec<u32>, rng: &mut impl Rng) -> Tree {
        let mut nodes = vec![Node::Leaf(false)];
        let mut stack = vec![(0usize, 0usize, samples.len())];
        let mut order: Vec<usize> = (0..self.cols.d).collect();
        while let Some((id, lo, hi)) = stack.pop() {
            let part = &samples[lo..hi];
            let (mut wg, mut wi) = (0.0, 0.0);
            for &i in part {
                if self.y[i as usize] {
                    wg += self.weight[i as usize]
                } else {
                    wi += self.weight[i as usize]
                }
            }
            if wg == 0.0 || wi == 0.0 || part.len() < 2 {
                nodes[id] = Node::Leaf(wg > wi);
                continue;
            }
            // draw features without replacement; keep drawing past mtry only
            // while no valid split has turned up
            let mut best: Option<SplitCandidate> = None;
            for k in 0..order.len() {
                if k >= self.mtry && best.is_some() {
                    break;
                }
                let j = rng.random_range(k..order.len());
                order.swap(k, j);
                if let Some(c) = self.best_split_on(order[k], part) {
                    if best.as_ref().is_none_or(|b| c.score > b.score) {
                        best = Some(c);
                    }
                }
            }
            let Some(split) = best else {
                nodes[id] = Node::Leaf(wg > wi);
                continue;
            };
            let region = &mut samples[lo..hi];
            let mut mid = 0;
            for k in 0..region.len() {
                if self.cols.rank(split.feature, region[k] as usize) <= split.rank {
                    region.swap(k, mid);
                    mid += 1;
                }
            }
            let left = nodes.len();
            nodes.push(Node::Leaf(false));
            nodes.push(Node::Leaf(false));
            nodes[id] = Node::Split {
                feature: split.feature as u32,
                threshold: self.threshold(&split),
                left: left as u32,
                right: left as u32 + 1,
            };
            stack.push((left + 1, lo + mid, hi));
            stack.push((left, lo, lo + mid));
        }
        Tree { nodes }
    }
}

impl RandomForest {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], n_trees: usize, balanced: bool, seed: u64) -> Self {
        let cols = Columns::new(x);
        let (n, d) = (cols.n, cols.d);
        let (cg, ci) = if balanced { super::balanced_weights(y) } else { (1.0, 1.0) };
        let mtry = ((d as f64).sqrt().floor() as usize).max(1);
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng::stream(seed, &[t as u64]);
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                let samples: Vec<u32> = (0..n as u32).filter(|&i| counts[i as usize] > 0).collect();
                let weight = (0..n)
                    .map(|i| counts[i] as f64 * if y[i] { cg } else { ci })
                    .collect();
                let mut builder = Builder {
                    cols: &cols,
                    y,
                    weight,
                    mtry,
                    scratch: Vec::with_capacity(samples.len()),
                };
                builder.grow(samples, &mut rng)
            })
            .collect();
        Self { trees }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn score(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                let votes = self.trees.iter().filter(|t| t.predict(row)).count();
                votes as f64 / self.trees.len() as f64
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::tests::blobs;
    use ndarray::array;

    #[test]
    fn scores_on_vote_lattice() {
        let (x, y) = blobs(40, 4, 1.0, 3);
        let (probe, _) = blobs(20, 4, 1.0, 4);
        for n_trees in [1, 7, 100] {
            let rf = RandomForest::fit(x.view(), &y, n_trees, true, 5);
            for s in rf.score(probe.view()) {
                let k = s * n_trees as f64;
                assert!((k - k.round()).abs() < 1e-9, "{s} with {n_trees} trees");
            }
        }
    }

    #[test]
    fn forest_recovers_training_labels() {
        // every fully grown tree reproduces its in-bag labels
        let x = array![[0.0, 1.0], [1.0, 0.0], [2.0, 3.0], [3.0, 2.0], [4.0, 4.0], [5.0, 0.5]];
        let y = [true, false, true, false, true, false];
        let rf = RandomForest::fit(x.view(), &y, 50, true, 1);
        let s = rf.score(x.view());
        for (v, l) in s.iter().zip(&y) {
            assert_eq!(*v > 0.5, *l, "{s:?}");
        }
    }

    #[test]
    fn constant_features_give_leaf() {
        let x = ndarray::Array2::<f64>::zeros((6, 3));
        let y = [true, false, true, false, true, true];
        let rf = RandomForest::fit(x.view(), &y, 10, true, 0);
        let s = rf.score(x.view());
        assert!(s.iter().all(|v| *v == s[0]));
    }

    #[test]
    fn seed_changes_forest() {
        let (x, y) = blobs(30, 4, 0.5, 6);
        let (probe, _) = blobs(30, 4, 0.5, 7);
        let a = RandomForest::fit(x.view(), &y, 20, true, 1).score(probe.view());
        let b = RandomForest::fit(x.view(), &y, 20, true, 2).score(probe.view());
        assert_ne!(a, b);
    }
}
