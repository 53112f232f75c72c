//! Triplet-trained convolutional embedding network and similarity scoring.

pub mod loss;
pub mod network;

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView3, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::EpochSet;
use crate::rng;
pub use loss::{batch_hard, batch_hard_loss, triplet_loss};
pub use network::{min_times, Network};

const EMBED_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwinConfig {
    pub conv_filters: Vec<usize>,
    pub kernel_time: usize,
    pub embedding_dim: usize,
    pub margin: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub verbose: bool,
    /// Accepted for configuration compatibility; training is single-threaded.
    pub workers: Option<usize>,
}

impl Default for TwinConfig {
    fn default() -> Self {
        Self {
            conv_filters: vec![16, 32, 64, 128, 32],
            kernel_time: 7,
            embedding_dim: 32,
            margin: 1.0,
            epochs: 10,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: 42,
            verbose: false,
            workers: None,
        }
    }
}

impl TwinConfig {
    pub fn validate(&self) -> Result<()> {
        if self.conv_filters.len() != network::N_STAGES {
            return Err(Error::Param(format!(
                "conv_filters needs {} entries, got {}",
                network::N_STAGES,
                self.conv_filters.len()
            )));
        }
        if self.embedding_dim < 2 {
            return Err(Error::Param("embedding_dim must be at least 2".into()));
        }
        if !(self.margin > 0.0) {
            return Err(Error::Param("margin must be positive".into()));
        }
        if self.batch_size < 3 {
            return Err(Error::Param("batch_size must be at least 3".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Param("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub config: TwinConfig,
    pub network: Network,
    /// Multiplies raw microvolt input; learned from the training data.
    pub input_scale: f64,
    /// Mean batch loss per training epoch.
    pub loss_log: Vec<f64>,
}

/// Untrained model for epochs of shape `n_channels × n_times`.
pub fn build(config: &TwinConfig, n_channels: usize, n_times: usize) -> Result<EmbeddingModel> {
    config.validate()?;
    let network = Network::build(
        &config.conv_filters,
        config.kernel_time,
        config.embedding_dim,
        n_channels,
        n_times,
        config.seed,
    )?;
    Ok(EmbeddingModel {
        config: config.clone(),
        network,
        input_scale: 1.0,
        loss_log: Vec::new(),
    })
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

impl EmbeddingModel {
    /// Unit-norm embeddings, one row per epoch.
    pub fn embed(&self, x: ArrayView3<f64>) -> Result<Array2<f64>> {
        let n = x.shape()[0];
        let mut out = Array2::zeros((n, self.config.embedding_dim));
        let mut start = 0;
        while start < n {
            let end = (start + EMBED_CHUNK).min(n);
            let tr = self.network.forward(x.slice(ndarray::s![start..end, .., ..]), self.input_scale)?;
            out.slice_mut(ndarray::s![start..end, ..]).assign(&tr.embedding);
            start = end;
        }
        Ok(out)
    }

    /// Batch-hard loss on `x` and its gradient over all parameters, in the
    /// order of [`Network::params`].
    pub fn loss_and_gradient(&self, x: ArrayView3<f64>, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
        let tr = self.network.forward(x, self.input_scale)?;
        let (loss, grad_emb) = batch_hard_loss(tr.embedding.view(), labels, self.config.margin);
        let grads = self.network.backward(&tr, &grad_emb);
        Ok((loss, grads.flatten()))
    }
}

/// Train on epochs of at least two subjects with batch-hard triplet loss and
/// Adam. Deterministic given `model.config.seed`.
pub fn train(model: &EmbeddingModel, epochs: &EpochSet) -> Result<EmbeddingModel> {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &epochs.subject_ids {
        let next = index.len();
        index.entry(s.as_str()).or_insert(next);
    }
    if index.len() < 2 {
        return Err(Error::Training(format!(
            "triplet training needs at least 2 subjects, got {}",
            index.len()
        )));
    }
    let labels: Vec<usize> = epochs.subject_ids.iter().map(|s| index[s.as_str()]).collect();
    let n = epochs.n_epochs();
    let mean = epochs.data.mean().unwrap_or(0.0);
    let sd = epochs.data.mapv(|v| (v - mean) * (v - mean)).mean().unwrap_or(0.0).sqrt();
    let mut out = model.clone();
    out.input_scale = if sd > 0.0 { 1.0 / sd } else { 1.0 };
    out.loss_log.clear();
    let cfg = &model.config;
    let mut params = out.network.params();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(cfg.seed, &[0x7e, epoch as u64]));
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            if !has_triplet(&batch_labels) {
                continue;
            }
            let x = epochs.data.select(Axis(0), chunk);
            let (loss, grad) = out.loss_and_gradient(x.view(), &batch_labels)?;
            adam.step(&mut params, &grad);
            out.network.set_params(&params);
            total += loss;
            batches += 1;
        }
        let mean_loss = if batches > 0 { total / batches as f64 } else { 0.0 };
        if !mean_loss.is_finite() {
            return Err(Error::Training(format!("loss diverged at epoch {}", epoch + 1)));
        }
        if cfg.verbose {
            eprintln!("twin epoch {}/{}: loss {mean_loss:.5}", epoch + 1, cfg.epochs);
        }
        out.loss_log.push(mean_loss);
    }
    Ok(out)
}

fn has_triplet(labels: &[usize]) -> bool {
    let distinct = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
    let repeated = labels
        .iter()
        .enumerate()
        .any(|(i, l)| labels[i + 1..].contains(l));
    distinct >= 2 && repeated
}

/// Cosine similarity between each probe embedding and the normalised mean
/// enrollment embedding.
pub fn enroll_and_score(model: &EmbeddingModel, enrollment: ArrayView3<f64>, probes: ArrayView3<f64>) -> Result<Vec<f64>> {
    if enrollment.shape()[0] == 0 {
        return Err(Error::Param("enrollment set is empty".into()));
    }
    let e = model.embed(enrollment)?;
    let mut template = e.sum_axis(Axis(0));
    let norm = template.dot(&template).sqrt();
    if norm > 0.0 {
        template /= norm;
    }
    let p = model.embed(probes)?;
    Ok(p.rows().into_iter().map(|r| r.dot(&template).clamp(-1.0, 1.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{run_chain, PreprocessParams};
    use crate::synth::{generate, SynthConfig};
    use ndarray::{Array3, Axis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> TwinConfig {
        TwinConfig {
            conv_filters: vec![4, 4, 4, 4, 4],
            kernel_time: 3,
            embedding_dim: 4,
            epochs: 3,
            batch_size: 32,
            learning_rate: 3e-3,
            ..TwinConfig::default()
        }
    }

    fn synthetic_epochs(seed: u64, n_subjects: usize) -> EpochSet {
        let cfg = SynthConfig {
            n_subjects,
            epochs_per_session: 24,
            n_channels: 4,
            seed,
            ..SynthConfig::default()
        };
        let (m, recs) = generate(&cfg).unwrap();
        run_chain(&recs, &m.channel_names, &PreprocessParams::default(), None).unwrap().0
    }

    #[test]
    fn single_subject_is_training_error() {
        let ep = synthetic_epochs(1, 1);
        let model = build(&tiny(), ep.n_channels(), ep.n_times()).unwrap();
        assert!(matches!(train(&model, &ep), Err(Error::Training(_))));
    }

    #[test]
    fn training_is_deterministic() {
        let ep = synthetic_epochs(2, 3);
        let model = build(&tiny(), ep.n_channels(), ep.n_times()).unwrap();
        let a = train(&model, &ep).unwrap();
        let b = train(&model, &ep).unwrap();
        assert_eq!(a.network, b.network);
        assert_eq!(a.loss_log, b.loss_log);
        assert_eq!(a.loss_log.len(), 3);
    }

    #[test]
    fn probe_equal_to_enrollment_scores_one() {
        let ep = synthetic_epochs(3, 2);
        let model = build(&tiny(), ep.n_channels(), ep.n_times()).unwrap();
        let one = ep.data.slice(ndarray::s![0..1, .., ..]);
        let s = enroll_and_score(&model, one, one).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn enrollment_order_irrelevant() {
        let ep = synthetic_epochs(4, 2);
        let model = build(&tiny(), ep.n_channels(), ep.n_times()).unwrap();
        let fwd = ep.data.select(Axis(0), &[0, 1, 2, 3]);
        let rev = ep.data.select(Axis(0), &[3, 2, 1, 0]);
        let probes = ep.data.select(Axis(0), &[5, 6]);
        let a = enroll_and_score(&model, fwd.view(), probes.view()).unwrap();
        let b = enroll_and_score(&model, rev.view(), probes.view()).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_enrollment_rejected() {
        let model = build(&tiny(), 2, 96).unwrap();
        let empty = Array3::<f64>::zeros((0, 2, 96));
        let probe = Array3::<f64>::zeros((1, 2, 96));
        assert!(matches!(enroll_and_score(&model, empty.view(), probe.view()), Err(Error::Param(_))));
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let mut decreasing = 0;
        for seed in 0..5 {
            let ep = synthetic_epochs(100 + seed, 4);
            let cfg = TwinConfig { seed, epochs: 3, ..tiny() };
            let model = build(&cfg, ep.n_channels(), ep.n_times()).unwrap();
            let log = train(&model, &ep).unwrap().loss_log;
            if log[1] < log[0] && log[2] < log[1] {
                decreasing += 1;
            }
        }
        assert!(decreasing >= 4, "{decreasing} of 5");
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let cfg = TwinConfig { conv_filters: vec![2; 5], ..TwinConfig::default() };
        let model = build(&cfg, 2, 224).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array3::from_shape_fn((6, 2, 224), |_| rng.random_range(-1.0..1.0));
        let labels = [0, 0, 1, 1, 2, 2];
        let (_, grad) = model.loss_and_gradient(x.view(), &labels).unwrap();
        let params = model.network.params();
        let h = 1e-6;
        let mut probe = model.clone();
        for (i, g) in grad.iter().enumerate() {
            let mut p = params.clone();
            p[i] += h;
            probe.network.set_params(&p);
            let up = probe.loss_and_gradient(x.view(), &labels).unwrap().0;
            p[i] -= 2.0 * h;
            probe.network.set_params(&p);
            let dn = probe.loss_and_gradient(x.view(), &labels).unwrap().0;
            let fd = (up - dn) / (2.0 * h);
            if fd.abs().max(g.abs()) < 1e-2 {
                assert!((fd - g).abs() < 1e-4, "param {i}: fd {fd} vs {g}");
            } else {
                assert!((fd - g).abs() / fd.abs().max(g.abs()) < 1e-3, "param {i}: fd {fd} vs {g}");
            }
        }
    }
}
