//! Verification error metrics: ROC, EER and FNMR at fixed FMR levels.
//!
//! Conventions: a probe is accepted iff `score >= threshold`. FMR is the
//! fraction of impostor scores accepted, FNMR the fraction of genuine scores
//! rejected.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FMR levels reported for every score set.
pub const FMR_LEVELS: [f64; 3] = [1e-2, 1e-3, 1e-4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Strictly descending, starting at `+∞` and ending at `−∞`.
    pub thresholds: Vec<f64>,
    pub fmr: Vec<f64>,
    pub fnmr: Vec<f64>,
}

impl RocCurve {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Operating points as `(fmr, fnmr)` pairs.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.fmr.iter().copied().zip(self.fnmr.iter().copied()).collect()
    }

    /// `threshold,fmr,fnmr` CSV with header and LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fmr,fnmr\n");
        for i in 0..self.len() {
            out.push_str(&format!("{},{},{}\n", fmt_threshold(self.thresholds[i]), self.fmr[i], self.fnmr[i]));
        }
        out
    }
}

fn fmt_threshold(t: f64) -> String {
    if t == f64::INFINITY {
        "inf".into()
    } else if t == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{t}")
    }
}

fn check_scores(name: &str, scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Empty(format!("no {name} scores")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::validation(name, "NaN score"));
    }
    Ok(())
}

fn sorted(scores: &[f64]) -> Vec<f64> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    v
}

/// ROC over every distinct score plus `±∞` sentinels.
pub fn roc(genuine: &[f64], impostor: &[f64]) -> Result<RocCurve> {
    check_scores("genuine", genuine)?;
    check_scores("impostor", impostor)?;
    let gen = sorted(genuine);
    let imp = sorted(impostor);
    let mut all: Vec<f64> = gen.iter().chain(imp.iter()).copied().collect();
    all.sort_by(|a, b| b.partial_cmp(a).expect("no NaN"));
    all.dedup();

    let (ng, ni) = (gen.len() as f64, imp.len() as f64);
    let mut thresholds = Vec::with_capacity(all.len() + 2);
    thresholds.push(f64::INFINITY);
    thresholds.extend(all.iter().copied().filter(|t| t.is_finite()));
    thresholds.push(f64::NEG_INFINITY);
    let mut fmr = Vec::with_capacity(thresholds.len());
    let mut fnmr = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        let imp_below = imp.partition_point(|s| *s < t);
        let gen_below = gen.partition_point(|s| *s < t);
        fmr.push((imp.len() - imp_below) as f64 / ni);
        fnmr.push(gen_below as f64 / ng);
    }
    Ok(RocCurve { thresholds, fmr, fnmr })
}

/// Equal error rate: the crossing of FMR and FNMR, linearly interpolated
/// between the two adjacent operating points that bracket it.
pub fn eer_from_roc(curve: &RocCurve) -> f64 {
    let d: Vec<f64> = curve.fmr.iter().zip(&curve.fnmr).map(|(a, b)| a - b).collect();
    for i in 0..d.len() {
        if d[i] == 0.0 {
            return curve.fmr[i];
        }
        if i + 1 < d.len() && d[i] < 0.0 && d[i + 1] > 0.0 {
            let t = -d[i] / (d[i + 1] - d[i]);
            return curve.fmr[i] + t * (curve.fmr[i + 1] - curve.fmr[i]);
        }
    }
    unreachable!("sentinels guarantee a sign change")
}

pub fn eer(genuine: &[f64], impostor: &[f64]) -> Result<f64> {
    Ok(eer_from_roc(&roc(genuine, impostor)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FnmrAtFmr {
    pub level: f64,
    pub fnmr: f64,
    /// Fewer impostor scores than `1 / level`: the level cannot be resolved
    /// and the value comes from the strictest reachable operating point.
    pub warn_resolution: bool,
}

/// Smallest impostor count that resolves `level`.
pub fn min_impostors_for(level: f64) -> usize {
    (1.0 / level - 1e-9).ceil() as usize
}

/// FNMR at the most lenient threshold whose FMR does not exceed `level`.
pub fn fnmr_at_fmr_from_roc(curve: &RocCurve, n_impostor: usize, level: f64) -> FnmrAtFmr {
    // fmr is non-decreasing along the (descending-threshold) curve
    let idx = curve.fmr.iter().rposition(|f| *f <= level).unwrap_or(0);
    FnmrAtFmr {
        level,
        fnmr: curve.fnmr[idx],
        warn_resolution: n_impostor < min_impostors_for(level),
    }
}

pub fn fnmr_at_fmr(genuine: &[f64], impostor: &[f64], level: f64) -> Result<FnmrAtFmr> {
    Ok(fnmr_at_fmr_from_roc(&roc(genuine, impostor)?, impostor.len(), level))
}

/// Identifies the score set a report was computed from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScoreContext {
    pub pipeline_id: String,
    pub user_id: String,
    pub fold: usize,
    pub enroll_session: String,
    pub probe_session: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub eer: f64,
    pub fnmr_at_fmr: Vec<FnmrAtFmr>,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub context: ScoreContext,
}

impl MetricsReport {
    pub fn compute(genuine: &[f64], impostor: &[f64], context: ScoreContext) -> Result<MetricsReport> {
        let curve = roc(genuine, impostor)?;
        Ok(MetricsReport {
            eer: eer_from_roc(&curve),
            fnmr_at_fmr: FMR_LEVELS
                .iter()
                .map(|&l| fnmr_at_fmr_from_roc(&curve, impostor.len(), l))
                .collect(),
            n_genuine: genuine.len(),
            n_impostor: impostor.len(),
            context,
        })
    }

    pub fn any_resolution_warning(&self) -> bool {
        self.fnmr_at_fmr.iter().any(|p| p.warn_resolution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len();
        if n == 0 {
            return MeanStd { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow<K> {
    pub key: K,
    pub count: usize,
    pub eer: MeanStd,
    /// Aligned with [`FMR_LEVELS`].
    pub fnmr_at_fmr: Vec<MeanStd>,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub warn_resolution: bool,
}

/// Mean and standard deviation of every metric per group, groups in key
/// order.
pub fn aggregate<K, F>(reports: &[MetricsReport], key: F) -> Vec<SummaryRow<K>>
where
    K: Ord + Clone,
    F: Fn(&MetricsReport) -> K,
{
    let mut groups: BTreeMap<K, Vec<&MetricsReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(key(r)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(k, rs)| {
            let eers: Vec<f64> = rs.iter().map(|r| r.eer).collect();
            let n_levels = rs[0].fnmr_at_fmr.len();
            SummaryRow {
                key: k,
                count: rs.len(),
                eer: MeanStd::of(&eers),
                fnmr_at_fmr: (0..n_levels)
                    .map(|l| MeanStd::of(&rs.iter().map(|r| r.fnmr_at_fmr[l].fnmr).collect::<Vec<_>>()))
                    .collect(),
                n_genuine: rs.iter().map(|r| r.n_genuine).sum(),
                n_impostor: rs.iter().map(|r| r.n_impostor).sum(),
                warn_resolution: rs.iter().any(|r| r.any_resolution_warning()),
            }
        })
        .collect()
}
