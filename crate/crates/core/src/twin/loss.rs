//! Triplet loss on squared Euclidean distances with batch-hard mining.

use ndarray::{Array2, ArrayView1, ArrayView2};

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// `mean_i max(0, |a_i − p_i|² − |a_i − n_i|² + margin)`.
pub fn triplet_loss(anchor: ArrayView2<f64>, positive: ArrayView2<f64>, negative: ArrayView2<f64>, margin: f64) -> f64 {
    let n = anchor.nrows();
    if n == 0 {
        return 0.0;
    }
    (0..n)
        .map(|i| (sq_dist(anchor.row(i), positive.row(i)) - sq_dist(anchor.row(i), negative.row(i)) + margin).max(0.0))
        .sum::<f64>()
        / n as f64
}

/// Gradients of [`triplet_loss`] with respect to anchor, positive and
/// negative embeddings.
pub fn triplet_loss_grad(
    anchor: ArrayView2<f64>,
    positive: ArrayView2<f64>,
    negative: ArrayView2<f64>,
    margin: f64,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let n = anchor.nrows();
    let mut ga = Array2::zeros(anchor.raw_dim());
    let mut gp = Array2::zeros(anchor.raw_dim());
    let mut gn = Array2::zeros(anchor.raw_dim());
    for i in 0..n {
        let (a, p, q) = (anchor.row(i), positive.row(i), negative.row(i));
        if sq_dist(a, p) - sq_dist(a, q) + margin <= 0.0 {
            continue;
        }
        let s = 2.0 / n as f64;
        for j in 0..a.len() {
            ga[[i, j]] = s * (q[j] - p[j]);
            gp[[i, j]] = -s * (a[j] - p[j]);
            gn[[i, j]] = s * (a[j] - q[j]);
        }
    }
    (ga, gp, gn)
}

/// For each anchor with at least one positive and one negative in the
/// batch: `(anchor, hardest positive, hardest negative)`. First index wins
/// ties.
pub fn batch_hard(emb: ArrayView2<f64>, labels: &[usize]) -> Vec<(usize, usize, usize)> {
    let n = emb.nrows();
    let mut out = Vec::new();
    for a in 0..n {
        let mut pos: Option<(usize, f64)> = None;
        let mut neg: Option<(usize, f64)> = None;
        for b in 0..n {
            if b == a {
                continue;
            }
            let d = sq_dist(emb.row(a), emb.row(b));
            if labels[b] == labels[a] {
                if pos.is_none_or(|(_, best)| d > best) {
                    pos = Some((b, d));
                }
            } else if neg.is_none_or(|(_, best)| d < best) {
                neg = Some((b, d));
            }
        }
        if let (Some((p, _)), Some((q, _))) = (pos, neg) {
            out.push((a, p, q));
        }
    }
    out
}

/// Batch-hard loss and its gradient with respect to every embedding row.
pub fn batch_hard_loss(emb: ArrayView2<f64>, labels: &[usize], margin: f64) -> (f64, Array2<f64>) {
    let triplets = batch_hard(emb, labels);
    let mut grad = Array2::zeros(emb.raw_dim());
    if triplets.is_empty() {
        return (0.0, grad);
    }
    let m = triplets.len() as f64;
    let mut loss = 0.0;
    for &(a, p, q) in &triplets {
        let l = sq_dist(emb.row(a), emb.row(p)) - sq_dist(emb.row(a), emb.row(q)) + margin;
        if l <= 0.0 {
            continue;
        }
        loss += l;
        for j in 0..emb.ncols() {
            let (ea, ep, eq) = (emb[[a, j]], emb[[p, j]], emb[[q, j]]);
            grad[[a, j]] += 2.0 * (eq - ep) / m;
            grad[[p, j]] -= 2.0 * (ea - ep) / m;
            grad[[q, j]] += 2.0 * (ea - eq) / m;
        }
    }
    (loss / m, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn satisfied_margin_gives_zero() {
        let a = array![[1.0, 0.0]];
        let n = array![[-1.0, 0.0]];
        assert_eq!(triplet_loss(a.view(), a.view(), n.view(), 1.0), 0.0);
    }

    #[test]
    fn direct_formula() {
        // d(a,p)² = 0.5, d(a,n)² = 0.2
        let a = array![[0.0, 0.0]];
        let p = array![[0.5, 0.5]];
        let n = array![[0.2f64.sqrt(), 0.0]];
        let l = triplet_loss(a.view(), p.view(), n.view(), 1.0);
        assert!((l - 1.3).abs() < 1e-12, "{l}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = || Array2::from_shape_fn((6, 4), |_| rng.random_range(-1.0..1.0));
        let (a, p, q) = (m(), m(), m());
        let (ga, gp, gn) = triplet_loss_grad(a.view(), p.view(), q.view(), 1.0);
        let h = 1e-6;
        let mut worst = 0.0f64;
        for (which, g) in [(0, &ga), (1, &gp), (2, &gn)] {
            for i in 0..6 {
                for j in 0..4 {
                    let bump = |delta: f64| {
                        let mut v = [a.clone(), p.clone(), q.clone()];
                        v[which][[i, j]] += delta;
                        triplet_loss(v[0].view(), v[1].view(), v[2].view(), 1.0)
                    };
                    let fd = (bump(h) - bump(-h)) / (2.0 * h);
                    let err = (fd - g[[i, j]]).abs() / fd.abs().max(g[[i, j]].abs()).max(1e-8);
                    if fd.abs() > 1e-8 || g[[i, j]].abs() > 1e-8 {
                        worst = worst.max(err);
                    }
                }
            }
        }
        assert!(worst < 1e-4, "{worst}");
    }

    proptest! {
        #[test]
        fn mining_matches_brute_force(seed in any::<u64>(), n in 2usize..20, classes in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let emb = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
            let got = batch_hard(emb.view(), &labels);
            let d = |i: usize, j: usize| sq_dist(emb.row(i), emb.row(j));
            let mut expected = Vec::new();
            for a in 0..n {
                let pos: Vec<usize> = (0..n).filter(|&b| b != a && labels[b] == labels[a]).collect();
                let neg: Vec<usize> = (0..n).filter(|&b| labels[b] != labels[a]).collect();
                if pos.is_empty() || neg.is_empty() {
                    continue;
                }
                let maxd = pos.iter().map(|&b| d(a, b)).fold(f64::NEG_INFINITY, f64::max);
                let mind = neg.iter().map(|&b| d(a, b)).fold(f64::INFINITY, f64::min);
                let p = *pos.iter().find(|&&b| d(a, b) == maxd).unwrap();
                let q = *neg.iter().find(|&&b| d(a, b) == mind).unwrap();
                expected.push((a, p, q));
            }
            prop_assert_eq!(got, expected);
        }
    }
}
