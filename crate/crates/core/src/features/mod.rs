//! Classical epoch features (AR coefficients, band powers) and z-scaling.

pub mod ar;
pub mod welch;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::EpochSet;
pub use ar::ar_coefficients;
pub use welch::{band_power, default_bands, welch_psd, Band, Psd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecipe {
    pub use_ar: bool,
    pub ar_order: usize,
    pub use_psd: bool,
    pub psd_n_windows: usize,
    pub psd_overlap: f64,
    pub bands: Vec<Band>,
    /// Compute features over the whole epoch instead of its first second.
    pub full_epoch: bool,
}

impl Default for FeatureRecipe {
    fn default() -> Self {
        Self {
            use_ar: true,
            ar_order: 1,
            use_psd: true,
            psd_n_windows: 4,
            psd_overlap: 0.5,
            bands: default_bands(),
            full_epoch: false,
        }
    }
}

impl FeatureRecipe {
    pub fn validate(&self) -> Result<()> {
        if !self.use_ar && !self.use_psd {
            return Err(Error::Param("feature recipe enables neither AR nor PSD".into()));
        }
        if self.use_ar && self.ar_order == 0 {
            return Err(Error::Param("AR order must be at least 1".into()));
        }
        if self.use_psd {
            if self.bands.is_empty() {
                return Err(Error::Param("PSD features need at least one band".into()));
            }
            for (i, b) in self.bands.iter().enumerate() {
                if !(b.low_hz >= 0.0 && b.low_hz < b.high_hz) {
                    return Err(Error::Param(format!("band `{}` has low >= high", b.name)));
                }
                if i > 0 && b.low_hz < self.bands[i - 1].high_hz {
                    return Err(Error::Param(format!(
                        "band `{}` overlaps or precedes `{}`",
                        b.name,
                        self.bands[i - 1].name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn features_per_channel(&self) -> usize {
        let ar = if self.use_ar { self.ar_order } else { 0 };
        let psd = if self.use_psd { self.bands.len() } else { 0 };
        ar + psd
    }

    /// Names of the features of one channel, in assembly order.
    pub fn channel_feature_names(&self, channel: usize) -> Vec<String> {
        let mut names = Vec::with_capacity(self.features_per_channel());
        if self.use_ar {
            names.extend((1..=self.ar_order).map(|k| format!("ch{channel}_ar{k}")));
        }
        if self.use_psd {
            names.extend(self.bands.iter().map(|b| format!("ch{channel}_psd_{}", b.name)));
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// `[n_epochs × n_features]`
    pub values: Array2<f64>,
    pub feature_names: Vec<String>,
    pub subject_ids: Vec<String>,
    pub session_ids: Vec<String>,
    pub epoch_ids: Vec<usize>,
    pub recipe: FeatureRecipe,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn select(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            subject_ids: rows.iter().map(|&r| self.subject_ids[r].clone()).collect(),
            session_ids: rows.iter().map(|&r| self.session_ids[r].clone()).collect(),
            epoch_ids: rows.iter().map(|&r| self.epoch_ids[r]).collect(),
            recipe: self.recipe.clone(),
        }
    }
}

/// Number of leading samples classical features look at.
fn analysis_length(epochs: &EpochSet, recipe: &FeatureRecipe) -> usize {
    if recipe.full_epoch {
        epochs.n_times()
    } else {
        (epochs.sampling_rate_hz.round() as usize).min(epochs.n_times())
    }
}

/// Features of one epoch-channel series.
pub fn channel_features(x: &[f64], rate_hz: f64, recipe: &FeatureRecipe) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(recipe.features_per_channel());
    if recipe.use_ar {
        out.extend(ar_coefficients(x, recipe.ar_order)?);
    }
    if recipe.use_psd {
        let psd = welch_psd(x, rate_hz, recipe.psd_n_windows, recipe.psd_overlap)?;
        out.extend(band_power(&psd, &recipe.bands)?);
    }
    Ok(out)
}

/// Per epoch and channel: AR coefficients then band powers, concatenated
/// channel-major.
pub fn assemble(epochs: &EpochSet, recipe: &FeatureRecipe) -> Result<FeatureMatrix> {
    recipe.validate()?;
    let n_use = analysis_length(epochs, recipe);
    let per_channel = recipe.features_per_channel();
    let n_features = per_channel * epochs.n_channels();
    let rows: Vec<Vec<f64>> = (0..epochs.n_epochs())
        .into_par_iter()
        .map(|e| {
            let mut row = Vec::with_capacity(n_features);
            for c in 0..epochs.n_channels() {
                let x = epochs.data.slice(s![e, c, ..n_use]).to_vec();
                let feats = channel_features(&x, epochs.sampling_rate_hz, recipe).map_err(|err| match err {
                    Error::Degenerate(m) => Error::Degenerate(format!(
                        "epoch {} channel {c}: {m}",
                        epochs.epoch_ids[e]
                    )),
                    other => other,
                })?;
                row.extend(feats);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite feature value".into()));
    }
    let values = Array2::from_shape_vec((epochs.n_epochs(), n_features), flat).expect("row sizes agree");
    Ok(FeatureMatrix {
        values,
        feature_names: (0..epochs.n_channels())
            .flat_map(|c| recipe.channel_feature_names(c))
            .collect(),
        subject_ids: epochs.subject_ids.clone(),
        session_ids: epochs.session_ids.clone(),
        epoch_ids: epochs.epoch_ids.clone(),
        recipe: recipe.clone(),
    })
}

/// Per-feature z-scaling learned from training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    /// Population standard deviation; zero-variance columns are clamped to 1.
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(train: ArrayView2<f64>) -> Result<Standardizer> {
        if train.nrows() == 0 {
            return Err(Error::Empty("cannot fit a standardizer on zero rows".into()));
        }
        let mean = train.mean_axis(Axis(0)).expect("nonempty");
        let mut std = train.var_axis(Axis(0), 0.0).mapv(f64::sqrt);
        for (sd, m) in std.iter_mut().zip(mean.iter()) {
            if !(*sd > 1e-12 * m.abs().max(1.0)) {
                *sd = 1.0;
            }
        }
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::validation(
                "features",
                format!("expected {} columns, got {}", self.mean.len(), x.ncols()),
            ));
        }
        Ok((&x - &self.mean) / &self.std)
    }
}

pub fn standardize_fit(train: &FeatureMatrix) -> Result<Standardizer> {
    Standardizer::fit(train.values.view())
}

pub fn standardize_apply(s: &Standardizer, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut out = m.clone();
    out.values = s.apply(m.values.view())?;
    Ok(out)
}
