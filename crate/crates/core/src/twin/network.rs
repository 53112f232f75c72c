//! Five-stage temporal convolution network producing unit-norm embeddings.
//!
//! Activations for a batch are stored as `[channels × (batch · time)]`, each
//! sample occupying a contiguous run of columns, so every convolution is one
//! matrix product over an im2col buffer.

use ndarray::{s, Array1, Array2, ArrayView3, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

pub const N_STAGES: usize = 5;

/// Output length of one `conv(k) → pool(2)` stage.
pub fn stage_output_len(input_len: usize, kernel: usize) -> usize {
    if input_len < kernel {
        0
    } else {
        (input_len - kernel + 1) / 2
    }
}

/// Smallest admissible input length for the given kernel width.
pub fn min_times(kernel: usize) -> usize {
    (1 << N_STAGES) * kernel
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv {
    /// `[out × (in · kernel)]`, column index `c · kernel + j`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub kernel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub convs: Vec<Conv>,
    /// `[embedding_dim × last_filters]`
    pub dense: Array2<f64>,
    pub dense_bias: Array1<f64>,
    pub n_channels: usize,
    pub n_times: usize,
}

/// Parameter-shaped gradient container.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub convs: Vec<(Array2<f64>, Array1<f64>)>,
    pub dense: Array2<f64>,
    pub dense_bias: Array1<f64>,
}

/// Cached intermediate values of one forward pass.
pub struct Trace {
    batch: usize,
    /// im2col buffer per stage.
    cols: Vec<Array2<f64>>,
    /// Pre-activation per stage.
    pre: Vec<Array2<f64>>,
    /// Pooled output lengths per stage (index 0 is the input length).
    lens: Vec<usize>,
    pooled_mean: Array2<f64>,
    raw: Array2<f64>,
    pub embedding: Array2<f64>,
}

fn im2col(h: &Array2<f64>, batch: usize, len: usize, kernel: usize) -> Array2<f64> {
    let cin = h.nrows();
    let lout = len - kernel + 1;
    let mut cols = Array2::zeros((cin * kernel, batch * lout));
    for c in 0..cin {
        let src = h.row(c);
        let src = src.as_slice().expect("standard layout");
        for j in 0..kernel {
            let mut dst = cols.row_mut(c * kernel + j);
            let dst = dst.as_slice_mut().expect("standard layout");
            for b in 0..batch {
                dst[b * lout..(b + 1) * lout].copy_from_slice(&src[b * len + j..b * len + j + lout]);
            }
        }
    }
    cols
}

fn col2im(dcols: &Array2<f64>, cin: usize, batch: usize, len: usize, kernel: usize) -> Array2<f64> {
    let lout = len - kernel + 1;
    let mut dh = Array2::zeros((cin, batch * len));
    for c in 0..cin {
        let mut dst = dh.row_mut(c);
        let dst = dst.as_slice_mut().expect("standard layout");
        for j in 0..kernel {
            let src = dcols.row(c * kernel + j);
            let src = src.as_slice().expect("standard layout");
            for b in 0..batch {
                let d = &mut dst[b * len + j..b * len + j + lout];
                for (x, y) in d.iter_mut().zip(&src[b * lout..(b + 1) * lout]) {
                    *x += y;
                }
            }
        }
    }
    dh
}

impl Network {
    pub fn build(filters: &[usize], kernel: usize, embedding_dim: usize, n_channels: usize, n_times: usize, seed: u64) -> Result<Self> {
        if filters.len() != N_STAGES || filters.contains(&0) {
            return Err(Error::Param(format!("need {N_STAGES} positive filter counts, got {filters:?}")));
        }
        if kernel == 0 {
            return Err(Error::Param("kernel width must be at least 1".into()));
        }
        if n_times < min_times(kernel) {
            return Err(Error::Param(format!(
                "epochs of {n_times} samples are too short for kernel {kernel}; need at least {}",
                min_times(kernel)
            )));
        }
        if n_channels == 0 || embedding_dim < 2 {
            return Err(Error::Param("need at least one channel and embedding_dim >= 2".into()));
        }
        let mut rng = rng::stream(seed, &[0x7717]);
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
        };
        let mut convs = Vec::with_capacity(N_STAGES);
        let mut cin = n_channels;
        for &cout in filters {
            convs.push(Conv {
                weight: uniform(cout, cin * kernel, cin * kernel),
                bias: Array1::zeros(cout),
                kernel,
            });
            cin = cout;
        }
        Ok(Self {
            convs,
            dense: uniform(embedding_dim, cin, cin),
            dense_bias: Array1::zeros(embedding_dim),
            n_channels,
            n_times,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.dense.nrows()
    }

    /// Forward pass over `[batch × channels × times]`, keeping what the
    /// backward pass needs.
    pub fn forward(&self, x: ArrayView3<f64>, input_scale: f64) -> Result<Trace> {
        let (batch, c, t) = x.dim();
        if c != self.n_channels || t != self.n_times {
            return Err(Error::validation(
                "epochs",
                format!("network expects {}×{}, got {c}×{t}", self.n_channels, self.n_times),
            ));
        }
        let mut h = Array2::zeros((c, batch * t));
        for b in 0..batch {
            h.slice_mut(s![.., b * t..(b + 1) * t]).assign(&x.index_axis(Axis(0), b));
        }
        h.mapv_inplace(|v| v * input_scale);
        let mut len = t;
        let mut lens = vec![t];
        let mut cols_all = Vec::with_capacity(N_STAGES);
        let mut pre_all = Vec::with_capacity(N_STAGES);
        for conv in &self.convs {
            let k = conv.kernel;
            let lout = len - k + 1;
            let cols = im2col(&h, batch, len, k);
            let mut z = conv.weight.dot(&cols);
            for (mut row, b) in z.rows_mut().into_iter().zip(conv.bias.iter()) {
                row.mapv_inplace(|v| v + b);
            }
            let lp = lout / 2;
            let mut pooled = Array2::zeros((z.nrows(), batch * lp));
            for (zr, mut pr) in z.rows().into_iter().zip(pooled.rows_mut()) {
                for bi in 0..batch {
                    for i in 0..lp {
                        let u = zr[bi * lout + 2 * i].max(0.0);
                        let v = zr[bi * lout + 2 * i + 1].max(0.0);
                        pr[bi * lp + i] = 0.5 * (u + v);
                    }
                }
            }
            cols_all.push(cols);
            pre_all.push(z);
            h = pooled;
            len = lp;
            lens.push(lp);
        }
        // global average over time: [filters × batch]
        let mut g = Array2::zeros((h.nrows(), batch));
        for (hr, mut gr) in h.rows().into_iter().zip(g.rows_mut()) {
            for bi in 0..batch {
                gr[bi] = hr.slice(s![bi * len..(bi + 1) * len]).sum() / len as f64;
            }
        }
        let mut raw = self.dense.dot(&g);
        for (mut row, b) in raw.rows_mut().into_iter().zip(self.dense_bias.iter()) {
            row.mapv_inplace(|v| v + b);
        }
        // [batch × dim]
        let raw = raw.reversed_axes().as_standard_layout().to_owned();
        let mut embedding = raw.clone();
        for mut row in embedding.rows_mut() {
            let norm = row.dot(&row).sqrt().max(1e-12);
            row.mapv_inplace(|v| v / norm);
        }
        Ok(Trace {
            batch,
            cols: cols_all,
            pre: pre_all,
            lens,
            pooled_mean: g,
            raw,
            embedding,
        })
    }

    /// Back-propagate `d loss / d embedding` (`[batch × dim]`).
    pub fn backward(&self, trace: &Trace, grad_embedding: &Array2<f64>) -> Gradients {
        let batch = trace.batch;
        // through L2 normalisation
        let mut d_raw = Array2::zeros(trace.raw.raw_dim());
        for i in 0..batch {
            let e = trace.raw.row(i);
            let y = trace.embedding.row(i);
            let g = grad_embedding.row(i);
            let norm = e.dot(&e).sqrt().max(1e-12);
            let proj = y.dot(&g);
            for j in 0..e.len() {
                d_raw[[i, j]] = (g[j] - y[j] * proj) / norm;
            }
        }
        // [dim × batch]
        let d_raw_t = d_raw.t();
        let d_dense = d_raw_t.dot(&trace.pooled_mean.t());
        let d_dense_bias = d_raw_t.sum_axis(Axis(1));
        let d_g = self.dense.t().dot(&d_raw_t);

        let mut conv_grads = vec![(Array2::zeros((0, 0)), Array1::zeros(0)); N_STAGES];
        let last_len = trace.lens[N_STAGES];
        let mut dh = Array2::zeros((d_g.nrows(), batch * last_len));
        for (c, mut row) in dh.rows_mut().into_iter().enumerate() {
            for bi in 0..batch {
                let v = d_g[[c, bi]] / last_len as f64;
                row.slice_mut(s![bi * last_len..(bi + 1) * last_len]).fill(v);
            }
        }
        for stage in (0..N_STAGES).rev() {
            let conv = &self.convs[stage];
            let len_in = trace.lens[stage];
            let lout = len_in - conv.kernel + 1;
            let lp = trace.lens[stage + 1];
            let z = &trace.pre[stage];
            let mut dz = Array2::zeros(z.raw_dim());
            for ((zr, mut dzr), dhr) in z.rows().into_iter().zip(dz.rows_mut()).zip(dh.rows()) {
                for bi in 0..batch {
                    for i in 0..lp {
                        let g = 0.5 * dhr[bi * lp + i];
                        for o in [2 * i, 2 * i + 1] {
                            if zr[bi * lout + o] > 0.0 {
                                dzr[bi * lout + o] = g;
                            }
                        }
                    }
                }
            }
            let dw = dz.dot(&trace.cols[stage].t());
            let db = dz.sum_axis(Axis(1));
            if stage > 0 {
                let dcols = conv.weight.t().dot(&dz);
                dh = col2im(&dcols, conv.weight.ncols() / conv.kernel, batch, len_in, conv.kernel);
            }
            conv_grads[stage] = (dw, db);
        }
        Gradients {
            convs: conv_grads,
            dense: d_dense,
            dense_bias: d_dense_bias,
        }
    }

    /// All parameters in a fixed order.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for c in &self.convs {
            v.extend(c.weight.iter());
            v.extend(c.bias.iter());
        }
        v.extend(self.dense.iter());
        v.extend(self.dense_bias.iter());
        v
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        for c in &mut self.convs {
            c.weight.iter_mut().for_each(|w| *w = it.next().expect("parameter count"));
            c.bias.iter_mut().for_each(|w| *w = it.next().expect("parameter count"));
        }
        self.dense.iter_mut().for_each(|w| *w = it.next().expect("parameter count"));
        self.dense_bias.iter_mut().for_each(|w| *w = it.next().expect("parameter count"));
    }
}

impl Gradients {
    /// Flattened in the same order as [`Network::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in &self.convs {
            v.extend(w.iter());
            v.extend(b.iter());
        }
        v.extend(self.dense.iter());
        v.extend(self.dense_bias.iter());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_geometry_shapes_and_norms() {
        let net = Network::build(&[16, 32, 64, 128, 32], 7, 32, 8, 256, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Array3::from_shape_fn((3, 8, 256), |_| rng.random_range(-1.0..1.0));
        let tr = net.forward(x.view(), 1.0).unwrap();
        assert_eq!(tr.embedding.dim(), (3, 32));
        for row in tr.embedding.rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn too_short_epochs_rejected() {
        let err = Network::build(&[16, 32, 64, 128, 32], 7, 32, 8, 100, 1).unwrap_err();
        assert!(matches!(err, Error::Param(ref m) if m.contains("224")), "{err}");
    }

    #[test]
    fn same_seed_same_weights() {
        let a = Network::build(&[4, 4, 4, 4, 4], 3, 8, 2, 96, 9).unwrap();
        let b = Network::build(&[4, 4, 4, 4, 4], 3, 8, 2, 96, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn batch_forward_equals_single_forward() {
        let net = Network::build(&[3, 3, 3, 3, 3], 3, 4, 2, 100, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array3::from_shape_fn((4, 2, 100), |_| rng.random_range(-1.0..1.0));
        let all = net.forward(x.view(), 0.5).unwrap().embedding;
        for b in 0..4 {
            let one = net.forward(x.slice(s![b..b + 1, .., ..]), 0.5).unwrap().embedding;
            for (u, v) in one.row(0).iter().zip(all.row(b).iter()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn stage_lengths_follow_recurrence(kernel in 1usize..8, extra in 0usize..200) {
            let n_times = min_times(kernel) + extra;
            let net = Network::build(&[1, 1, 1, 1, 1], kernel, 2, 1, n_times, 0).unwrap();
            let x = Array3::zeros((1, 1, n_times));
            let tr = net.forward(x.view(), 1.0).unwrap();
            let mut expect = n_times;
            for i in 1..=N_STAGES {
                // symbolic: floor((L - k + 1) / 2)
                expect = (expect as i64 - kernel as i64 + 1).div_euclid(2) as usize;
                prop_assert_eq!(tr.lens[i], expect);
                prop_assert_eq!(stage_output_len(tr.lens[i - 1], kernel), expect);
            }
            prop_assert!(tr.lens[N_STAGES] >= 1);
        }
    }
}
