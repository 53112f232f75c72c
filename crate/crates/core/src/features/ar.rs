//! Yule-Walker autoregressive coefficients.

use crate::error::{Error, Result};

/// Biased autocovariance (divide by N) of the mean-removed series for lags
/// `0..=max_lag`.
pub fn autocovariance(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    (0..=max_lag)
        .map(|k| {
            if k >= n {
                return 0.0;
            }
            centered[..n - k]
                .iter()
                .zip(&centered[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Levinson-Durbin recursion on autocovariances `r[0..=order]`.
///
/// Returns `a_1..a_p` for the model `x_t = Σ a_k x_{t−k} + e_t` together with
/// the final prediction-error variance.
pub fn levinson_durbin(r: &[f64], order: usize) -> Result<(Vec<f64>, f64)> {
    if r.len() <= order {
        return Err(Error::Param(format!(
            "need {} autocovariances for order {order}, got {}",
            order + 1,
            r.len()
        )));
    }
    if !(r[0] > 0.0) {
        return Err(Error::Degenerate("zero-variance series".into()));
    }
    let mut a = vec![0.0; order];
    let mut prev = vec![0.0; order];
    let mut err = r[0];
    for m in 0..order {
        let acc: f64 = (0..m).map(|k| a[k] * r[m - k]).sum();
        let reflection = (r[m + 1] - acc) / err;
        prev[..m].copy_from_slice(&a[..m]);
        a[m] = reflection;
        for k in 0..m {
            a[k] = prev[k] - reflection * prev[m - 1 - k];
        }
        err *= 1.0 - reflection * reflection;
        if err <= 0.0 {
            // perfectly predictable series; later coefficients stay zero
            break;
        }
    }
    Ok((a, err))
}

/// Yule-Walker AR coefficients of order `order`.
pub fn ar_coefficients(x: &[f64], order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::Param("AR order must be at least 1".into()));
    }
    if x.len() <= order {
        return Err(Error::Param(format!(
            "series of length {} too short for AR order {order}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Param("series contains non-finite values".into()));
    }
    let r = autocovariance(x, order);
    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if r[0] <= f64::EPSILON * scale * scale {
        return Err(Error::Degenerate("zero-variance series".into()));
    }
    Ok(levinson_durbin(&r, order)?.0)
}
