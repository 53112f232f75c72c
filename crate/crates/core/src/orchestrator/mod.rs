//! Benchmark runner: resolves datasets, runs every
//! (dataset × sweep point × pipeline × scheme × attacker) cell and writes
//! the reports.

mod config;
mod report;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{read_bundle, RawRecording};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, Attacker, Authenticator, EvalOutput, EvalPlan, PipelineData, Scheme};
use crate::features::assemble;
use crate::metrics::MetricsReport;
use crate::preprocess::{run_chain, ChainStats, EpochSet};
use crate::rng;
use crate::synth;

pub use config::{
    config_value, emit_config, parse_config, parse_config_recorded, BenchmarkConfig, DatasetConfig, DatasetSource,
    EvaluationConfig, Overrides, ParsedConfig, PipelineConfig, Sweeps, BUNDLE_DATASETS, SYNTHETIC, USER_DATASET,
};
pub use report::{emit_reports, render_svg, RESULTS_HEADER};

/// Environment variable naming the directory that holds exported bundles,
/// one sub-directory per dataset name.
pub const DATA_ROOT_ENV: &str = "NEUROIDBENCH_DATA_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub interval: (f64, f64),
    pub rejection_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellKey {
    pub dataset: String,
    pub pipeline: String,
    pub scheme: Scheme,
    pub attacker: Attacker,
    /// Present only when the configuration declares sweeps.
    pub sweep: Option<SweepPoint>,
}

impl CellKey {
    /// Dataset column value; sweep points are appended so grid rows stay
    /// distinguishable.
    pub fn dataset_label(&self) -> String {
        match &self.sweep {
            None => self.dataset.clone(),
            Some(p) => {
                let rej = p.rejection_threshold.map_or_else(|| "none".to_string(), |t| t.to_string());
                format!("{}[interval={}:{};rejection={rej}]", self.dataset, p.interval.0, p.interval.1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Completed,
    Failed { error: String },
}

#[derive(Debug, Clone)]
pub struct CellRecord {
    pub key: CellKey,
    pub status: CellStatus,
    pub output: EvalOutput,
    /// One per score set, same order.
    pub reports: Vec<MetricsReport>,
    pub chain: Option<ChainStats>,
}

impl CellRecord {
    fn failed(key: CellKey, error: impl ToString, chain: Option<ChainStats>) -> Self {
        CellRecord {
            key,
            status: CellStatus::Failed { error: error.to_string() },
            output: EvalOutput::default(),
            reports: Vec::new(),
            chain,
        }
    }

    /// Directory-safe identifier, unique within a run through `index`.
    pub fn id(&self, index: usize) -> String {
        let k = &self.key;
        let mut raw = format!("{index:03}_{}_{}_{}_{}", k.dataset, k.pipeline, k.scheme.as_str(), k.attacker.as_str());
        if let Some(p) = &k.sweep {
            raw.push_str(&format!("_{}_{}", p.interval.0, p.interval.1));
            raw.push_str(&p.rejection_threshold.map_or_else(|| "_none".into(), |t| format!("_{t}")));
        }
        sanitize(&raw)
    }
}

pub(crate) fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvStamp {
    pub version: String,
    pub seed: u64,
    pub os: String,
    pub arch: String,
}

impl EnvStamp {
    pub fn current(seed: u64) -> Self {
        EnvStamp {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: BenchmarkConfig,
    /// YAML paths whose values were filled in by defaults.
    pub defaulted: Vec<String>,
    pub cells: Vec<CellRecord>,
    pub env: EnvStamp,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn all_completed(&self) -> bool {
        self.cells.iter().all(|c| c.status == CellStatus::Completed)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    pub defaulted: Vec<String>,
}

struct Loaded {
    recordings: Vec<RawRecording>,
    channel_names: Vec<String>,
}

fn bundle_path(d: &DatasetConfig, explicit: &Option<PathBuf>) -> Result<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p.clone());
    }
    match std::env::var_os(DATA_ROOT_ENV) {
        Some(root) => Ok(Path::new(&root).join(&d.name)),
        None => Err(Error::Param(format!(
            "dataset `{}` has no dataset_path and {DATA_ROOT_ENV} is unset; export it to a bundle first",
            d.name
        ))),
    }
}

fn first_subjects(all: Vec<String>, n: Option<usize>, dataset: &str) -> Result<Vec<String>> {
    match n {
        None => Ok(all),
        Some(n) if n > all.len() => Err(Error::Param(format!(
            "dataset `{dataset}` lists {} subjects, {n} requested",
            all.len()
        ))),
        Some(n) => Ok(all.into_iter().take(n).collect()),
    }
}

fn load(d: &DatasetConfig) -> Result<Loaded> {
    match &d.source {
        DatasetSource::Synthetic(cfg) => {
            let (manifest, recordings) = synth::generate(cfg)?;
            let keep = first_subjects(cfg.subject_ids(), d.subjects, &d.name)?;
            Ok(Loaded {
                recordings: recordings.into_iter().filter(|r| keep.contains(&r.subject_id)).collect(),
                channel_names: manifest.channel_names,
            })
        }
        DatasetSource::Bundle { path } => {
            let bundle = read_bundle(bundle_path(d, path)?)?;
            let manifest = bundle.manifest();
            let ids = manifest.subjects.iter().map(|s| s.subject_id.clone()).collect();
            let keep = first_subjects(ids, d.subjects, &d.name)?;
            let recordings = manifest
                .session_keys()
                .iter()
                .filter(|(s, _)| keep.contains(s))
                .map(|(s, e)| bundle.recording(s, e))
                .collect::<Result<_>>()?;
            Ok(Loaded { recordings, channel_names: manifest.channel_names.clone() })
        }
    }
}

fn sweep_points(config: &BenchmarkConfig, d: &DatasetConfig) -> Vec<Option<SweepPoint>> {
    if config.sweeps.is_empty() {
        return vec![None];
    }
    let intervals = if config.sweeps.interval.is_empty() { vec![d.interval] } else { config.sweeps.interval.clone() };
    let thresholds = if config.sweeps.rejection_threshold.is_empty() {
        vec![d.rejection_threshold]
    } else {
        config.sweeps.rejection_threshold.clone()
    };
    intervals
        .iter()
        .flat_map(|&interval| {
            thresholds
                .iter()
                .map(move |&rejection_threshold| Some(SweepPoint { interval, rejection_threshold }))
        })
        .collect()
}

fn guarded<T>(f: impl FnOnce() -> Result<T>) -> Result<T> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            Err(Error::Training(format!("internal panic: {msg}")))
        }
    }
}

fn plans(config: &BenchmarkConfig) -> Vec<EvalPlan> {
    let e = &config.evaluation;
    e.schemes
        .iter()
        .flat_map(|&scheme| {
            e.attackers.iter().map(move |&attacker| EvalPlan {
                scheme,
                attacker,
                k_folds: e.k_folds,
                min_samples_per_user: e.min_samples_per_user,
                seed: e.seed,
            })
        })
        .collect()
}

fn score(output: EvalOutput) -> Result<(EvalOutput, Vec<MetricsReport>)> {
    let reports = output
        .score_sets
        .iter()
        .map(|s| MetricsReport::compute(&s.genuine, &s.impostor, s.context.clone()))
        .collect::<Result<_>>()?;
    Ok((output, reports))
}

/// Cells for one dataset at one sweep point, sharing the preprocessed epochs.
fn run_group(
    config: &BenchmarkConfig,
    d: &DatasetConfig,
    loaded: &std::result::Result<Arc<Loaded>, String>,
    point: Option<SweepPoint>,
) -> Vec<CellRecord> {
    let plans = plans(config);
    let keys: Vec<Vec<CellKey>> = config
        .pipelines
        .iter()
        .map(|p| {
            plans
                .iter()
                .map(|plan| CellKey {
                    dataset: d.name.clone(),
                    pipeline: p.name.clone(),
                    scheme: plan.scheme,
                    attacker: plan.attacker,
                    sweep: point,
                })
                .collect()
        })
        .collect();
    let fail_all = |e: String, chain: Option<ChainStats>| -> Vec<CellRecord> {
        keys.iter().flatten().map(|k| CellRecord::failed(k.clone(), &e, chain.clone())).collect()
    };
    let loaded = match loaded {
        Ok(l) => l,
        Err(e) => return fail_all(e.clone(), None),
    };
    let (interval, rejection) = match point {
        Some(p) => (p.interval, p.rejection_threshold),
        None => (d.interval, d.rejection_threshold),
    };
    let chained = guarded(|| {
        let params = d.preprocess_params(interval, rejection)?;
        run_chain(&loaded.recordings, &loaded.channel_names, &params, d.event_codes.as_deref())
    });
    let (epochs, stats) = match chained {
        Ok(x) => x,
        Err(e) => return fail_all(e.to_string(), None),
    };
    let mut cells = Vec::new();
    for (p, pkeys) in config.pipelines.iter().zip(&keys) {
        cells.extend(run_pipeline(config, p, pkeys, &plans, &epochs, &stats));
    }
    cells
}

fn run_pipeline(
    config: &BenchmarkConfig,
    p: &PipelineConfig,
    keys: &[CellKey],
    plans: &[EvalPlan],
    epochs: &EpochSet,
    stats: &ChainStats,
) -> Vec<CellRecord> {
    let features = match (&p.authenticator, &p.features) {
        (Authenticator::Shallow(_), Some(recipe)) => match guarded(|| assemble(epochs, recipe)) {
            Ok(f) => Some(f),
            Err(e) => {
                return keys
                    .iter()
                    .map(|k| CellRecord::failed(k.clone(), &e, Some(stats.clone())))
                    .collect()
            }
        },
        _ => None,
    };
    let twin = match &p.authenticator {
        Authenticator::Twin(t) => {
            let mut t = t.clone();
            t.seed = rng::derive(config.evaluation.seed, &[rng::hash_str(&p.name)]);
            Some(t)
        }
        Authenticator::Shallow(_) => None,
    };
    keys.iter()
        .zip(plans)
        .map(|(key, plan)| {
            let data = match (&p.authenticator, &features, &twin) {
                (Authenticator::Shallow(spec), Some(f), _) => PipelineData::Shallow { features: f, spec },
                (_, _, Some(t)) => PipelineData::Twin { epochs, config: t },
                _ => unreachable!("pipelines are validated at parse time"),
            };
            match guarded(|| score(evaluate(data, plan, &p.name)?)) {
                Ok((output, reports)) => CellRecord {
                    key: key.clone(),
                    status: CellStatus::Completed,
                    output,
                    reports,
                    chain: Some(stats.clone()),
                },
                Err(e) => CellRecord::failed(key.clone(), e, Some(stats.clone())),
            }
        })
        .collect()
}

/// Runs every cell without touching the filesystem (beyond reading
/// bundles). Failing cells are recorded, never propagated.
pub fn execute(config: &BenchmarkConfig, opts: &RunOptions) -> Result<RunRecord> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Param(format!("cannot build worker pool: {e}")))?;
    let cells = pool.install(|| {
        let loaded: Vec<std::result::Result<Arc<Loaded>, String>> = config
            .datasets
            .par_iter()
            .map(|d| guarded(|| load(d)).map(Arc::new).map_err(|e| e.to_string()))
            .collect();
        let groups: Vec<(usize, Option<SweepPoint>)> = config
            .datasets
            .iter()
            .enumerate()
            .flat_map(|(i, d)| sweep_points(config, d).into_iter().map(move |p| (i, p)))
            .collect();
        groups
            .par_iter()
            .map(|&(i, point)| run_group(config, &config.datasets[i], &loaded[i], point))
            .collect::<Vec<_>>()
            .concat()
    });
    Ok(RunRecord {
        config: config.clone(),
        defaulted: opts.defaulted.clone(),
        cells,
        env: EnvStamp::current(config.evaluation.seed),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// [`execute`] followed by [`emit_reports`].
pub fn run(config: &BenchmarkConfig, output_dir: impl AsRef<Path>, opts: &RunOptions) -> Result<RunRecord> {
    let record = execute(config, opts)?;
    emit_reports(&record, output_dir)?;
    Ok(record)
}
