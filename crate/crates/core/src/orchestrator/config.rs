//! YAML benchmark configuration: parsing with path-qualified errors,
//! default injection and canonical emission.
//!
//! Accepted documents follow the listing layout used by the original
//! Python tool (`dataset:` list, `pipelines:` map of ordered steps, a `from:`
//! import string on steps that is ignored here). [`emit_config`] writes the
//! fully resolved form, which parses back to an identical
//! [`BenchmarkConfig`].

use std::path::PathBuf;

use serde_yaml::{Mapping, Value};

use crate::classifiers::{ClassifierKind, ClassifierSpec};
use crate::error::{Error, Result};
use crate::evaluation::{Attacker, Authenticator, Scheme};
use crate::features::{Band, FeatureRecipe};
use crate::preprocess::PreprocessParams;
use crate::synth::SynthConfig;
use crate::twin::TwinConfig;

pub const SYNTHETIC: &str = "Synthetic";
pub const USER_DATASET: &str = "UserDataset";

/// Dataset names that resolve to exported bundles.
pub const BUNDLE_DATASETS: &[&str] = &[
    "BrainInvaders2015a",
    "COGBCIFLANKER",
    "ERPCORE_N400",
    "ERPCORE_P300",
    "Huebner_LLP",
    "Lee2019",
    "Mantegna2019",
    "Sosulski2019",
    "Won2022",
    USER_DATASET,
];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub name: String,
    pub datasets: Vec<DatasetConfig>,
    /// In document order.
    pub pipelines: Vec<PipelineConfig>,
    pub evaluation: EvaluationConfig,
    pub sweeps: Sweeps,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic(SynthConfig),
    /// `None` resolves through `NEUROIDBENCH_DATA_ROOT/<name>` at run time.
    Bundle { path: Option<PathBuf> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub name: String,
    pub source: DatasetSource,
    /// Keep the first `n` subjects in manifest order.
    pub subjects: Option<usize>,
    pub interval: (f64, f64),
    pub band: (f64, f64),
    /// `None` means `(tmin, 0)`.
    pub baseline: Option<(f64, f64)>,
    pub rejection_threshold: Option<f64>,
    pub resample_hz: Option<f64>,
    pub event_codes: Option<Vec<i32>>,
}

impl DatasetConfig {
    pub fn preprocess_params(&self, interval: (f64, f64), rejection_threshold: Option<f64>) -> Result<PreprocessParams> {
        let baseline = match self.baseline {
            Some(b) => b,
            None if interval.0 < 0.0 => (interval.0, 0.0),
            None => {
                return Err(Error::Param(format!(
                    "interval [{}, {}] starts at or after the stimulus; set `baseline` explicitly",
                    interval.0, interval.1
                )))
            }
        };
        Ok(PreprocessParams {
            band_low_hz: self.band.0,
            band_high_hz: self.band.1,
            epoch_tmin_s: interval.0,
            epoch_tmax_s: interval.1,
            baseline_window_s: baseline,
            ptp_reject_uv: rejection_threshold,
            target_rate_hz: self.resample_hz,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub name: String,
    /// `None` for the twin network, which consumes raw epochs.
    pub features: Option<FeatureRecipe>,
    pub authenticator: Authenticator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationConfig {
    pub schemes: Vec<Scheme>,
    pub attackers: Vec<Attacker>,
    pub k_folds: usize,
    pub min_samples_per_user: usize,
    pub seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            schemes: vec![Scheme::SingleSession],
            attackers: vec![Attacker::Unknown],
            k_folds: 4,
            min_samples_per_user: 4,
            seed: 42,
        }
    }
}

/// Empty lists mean "use the dataset's own value".
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sweeps {
    pub interval: Vec<(f64, f64)>,
    pub rejection_threshold: Vec<Option<f64>>,
}

impl Sweeps {
    pub fn is_empty(&self) -> bool {
        self.interval.is_empty() && self.rejection_threshold.is_empty()
    }
}

/// Parsed configuration plus the YAML paths whose values were defaulted.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: BenchmarkConfig,
    pub defaulted: Vec<String>,
}

pub fn parse_config(text: &str) -> Result<BenchmarkConfig> {
    parse_config_recorded(text).map(|p| p.config)
}

pub fn parse_config_recorded(text: &str) -> Result<ParsedConfig> {
    let doc: Value = match serde_yaml::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            if let Some(err) = placeholder_in_text(text, &e.to_string()) {
                return Err(err);
            }
            return Err(Error::config("<document>", format!("invalid YAML: {e}")));
        }
    };
    find_placeholder(&doc, "")?;
    let mut p = Parser::default();
    let config = p.document(&doc)?;
    Ok(ParsedConfig { config, defaulted: p.defaulted })
}

fn is_placeholder(s: &str) -> bool {
    let s = s.trim();
    s.len() > 2 && s.starts_with('<') && s.ends_with('>')
}

fn placeholder_message(key: &str, value: &str) -> String {
    if key == "dataset_path" {
        format!("`{value}` is a placeholder; point dataset_path at an exported bundle directory")
    } else {
        format!("`{value}` is a placeholder and must be replaced")
    }
}

fn find_placeholder(v: &Value, path: &str) -> Result<()> {
    match v {
        Value::String(s) if is_placeholder(s) => {
            let key = path.rsplit('.').next().unwrap_or(path);
            Err(Error::config(path, placeholder_message(key, s)))
        }
        Value::Sequence(items) => {
            for (i, item) in items.iter().enumerate() {
                find_placeholder(item, &format!("{path}[{i}]"))?;
            }
            Ok(())
        }
        Value::Mapping(m) => {
            for (k, item) in m {
                let k = k.as_str().map(str::to_string).unwrap_or_else(|| format!("{k:?}"));
                find_placeholder(item, &join(path, &k))?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Line scan used when the document is not valid YAML, so that a
/// placeholder is still reported ahead of the syntax problem it may hide.
fn placeholder_in_text(text: &str, yaml_error: &str) -> Option<Error> {
    text.lines().enumerate().find_map(|(n, line)| {
        let (key, value) = line.split_once(':')?;
        let key = key.trim().trim_start_matches("- ").trim();
        let value = value.trim().trim_matches(|c| c == '"' || c == '\'');
        is_placeholder(value).then(|| {
            Error::config(
                format!("line {}: {key}", n + 1),
                format!("{} (the document also fails to parse: {yaml_error})", placeholder_message(key, value)),
            )
        })
    })
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_map<'a>(v: &'a Value, path: &str) -> Result<&'a Mapping> {
    v.as_mapping().ok_or_else(|| Error::config(path, "expected a mapping"))
}

fn check_keys(m: &Mapping, path: &str, allowed: &[&str]) -> Result<()> {
    for k in m.keys() {
        let Some(k) = k.as_str() else {
            return Err(Error::config(path, format!("non-string key {k:?}")));
        };
        if !allowed.contains(&k) {
            return Err(Error::config(
                join(path, k),
                format!("unknown key; expected one of: {}", allowed.join(", ")),
            ));
        }
    }
    Ok(())
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::config(path, "expected a finite number"))
}

fn unsigned(v: &Value, path: &str) -> Result<u64> {
    v.as_u64().ok_or_else(|| Error::config(path, "expected a non-negative integer"))
}

fn count(v: &Value, path: &str) -> Result<usize> {
    let n = unsigned(v, path)? as usize;
    if n == 0 {
        return Err(Error::config(path, "must be at least 1"));
    }
    Ok(n)
}

fn boolean(v: &Value, path: &str) -> Result<bool> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Number(n) if n.as_u64() == Some(0) => Ok(false),
        Value::Number(n) if n.as_u64() == Some(1) => Ok(true),
        _ => Err(Error::config(path, "expected a boolean")),
    }
}

fn string(v: &Value, path: &str) -> Result<String> {
    v.as_str()
        .map(str::to_string)
        .ok_or_else(|| Error::config(path, "expected a string"))
}

fn positive(v: &Value, path: &str) -> Result<f64> {
    let x = number(v, path)?;
    if x <= 0.0 {
        return Err(Error::config(path, "must be positive"));
    }
    Ok(x)
}

fn optional<T>(v: &Value, path: &str, f: impl Fn(&Value, &str) -> Result<T>) -> Result<Option<T>> {
    if v.is_null() {
        Ok(None)
    } else {
        f(v, path).map(Some)
    }
}

fn pair(v: &Value, path: &str) -> Result<(f64, f64)> {
    match v.as_sequence().map(Vec::as_slice) {
        Some([a, b]) => Ok((number(a, &format!("{path}[0]"))?, number(b, &format!("{path}[1]"))?)),
        _ => Err(Error::config(path, "expected a two-element list")),
    }
}

fn interval(v: &Value, path: &str) -> Result<(f64, f64)> {
    let (tmin, tmax) = pair(v, path)?;
    if !(tmin < tmax) {
        return Err(Error::config(path, format!("tmin < tmax violated: [{tmin}, {tmax}]")));
    }
    Ok((tmin, tmax))
}

fn threshold(v: &Value, path: &str) -> Result<Option<f64>> {
    optional(v, path, positive)
}

fn list_or_scalar<'a>(v: &'a Value) -> Vec<&'a Value> {
    match v.as_sequence() {
        Some(items) => items.iter().collect(),
        None => vec![v],
    }
}

fn scheme(v: &Value, path: &str) -> Result<Scheme> {
    match string(v, path)?.to_ascii_lowercase().replace('-', "_").as_str() {
        "single" | "single_session" => Ok(Scheme::SingleSession),
        "multi" | "multi_session" => Ok(Scheme::MultiSession),
        other => Err(Error::config(path, format!("unknown scheme `{other}`; expected single or multi"))),
    }
}

fn attacker(v: &Value, path: &str) -> Result<Attacker> {
    match string(v, path)?.to_ascii_lowercase().as_str() {
        "known" => Ok(Attacker::Known),
        "unknown" => Ok(Attacker::Unknown),
        other => Err(Error::config(path, format!("unknown attacker `{other}`; expected known or unknown"))),
    }
}

fn class_weight(v: &Value, path: &str) -> Result<bool> {
    match v {
        Value::Null => Ok(false),
        Value::String(s) if s == "balanced" => Ok(true),
        Value::String(s) if s.eq_ignore_ascii_case("none") => Ok(false),
        _ => Err(Error::config(path, "expected \"balanced\" or null")),
    }
}

#[derive(Default)]
struct Parser {
    defaulted: Vec<String>,
}

impl Parser {
    /// Parses `m[key]` or records `path.key` as defaulted.
    fn get<T>(
        &mut self,
        m: &Mapping,
        path: &str,
        key: &str,
        default: T,
        f: impl Fn(&Value, &str) -> Result<T>,
    ) -> Result<T> {
        let p = join(path, key);
        match m.get(key) {
            Some(v) => f(v, &p),
            None => {
                self.defaulted.push(p);
                Ok(default)
            }
        }
    }

    fn document(&mut self, doc: &Value) -> Result<BenchmarkConfig> {
        let top = as_map(doc, "<document>")?;
        check_keys(top, "", &["name", "dataset", "datasets", "pipelines", "evaluation", "sweeps"])?;
        let name = self.get(top, "", "name", "benchmark".to_string(), string)?;
        let (dkey, dvalue) = match (top.get("dataset"), top.get("datasets")) {
            (Some(_), Some(_)) => return Err(Error::config("datasets", "give either `dataset` or `datasets`, not both")),
            (Some(v), None) => ("dataset", v),
            (None, Some(v)) => ("datasets", v),
            (None, None) => return Err(Error::config("datasets", "missing dataset list")),
        };
        let items = dvalue
            .as_sequence()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::config(dkey, "expected a non-empty list"))?;
        let datasets = items
            .iter()
            .enumerate()
            .map(|(i, v)| self.dataset(v, &format!("{dkey}[{i}]")))
            .collect::<Result<Vec<_>>>()?;

        let pmap = top
            .get("pipelines")
            .ok_or_else(|| Error::config("pipelines", "missing pipelines"))?;
        let pmap = as_map(pmap, "pipelines")?;
        if pmap.is_empty() {
            return Err(Error::config("pipelines", "no pipelines defined"));
        }
        let mut pipelines = Vec::new();
        for (k, v) in pmap {
            let pname = k
                .as_str()
                .ok_or_else(|| Error::config("pipelines", "pipeline names must be strings"))?;
            pipelines.push(self.pipeline(pname, v, &format!("pipelines.{pname}"))?);
        }

        let evaluation = match top.get("evaluation") {
            Some(v) => self.evaluation(v, "evaluation")?,
            None => {
                self.defaulted.push("evaluation".into());
                EvaluationConfig::default()
            }
        };
        let sweeps = match top.get("sweeps") {
            Some(v) => sweeps(v, "sweeps")?,
            None => Sweeps::default(),
        };
        Ok(BenchmarkConfig { name, datasets, pipelines, evaluation, sweeps })
    }

    fn dataset(&mut self, v: &Value, path: &str) -> Result<DatasetConfig> {
        let m = as_map(v, path)?;
        check_keys(m, path, &["name", "from", "parameters"])?;
        let name = string(m.get("name").ok_or_else(|| Error::config(join(path, "name"), "missing"))?, &join(path, "name"))?;
        let synthetic = name == SYNTHETIC;
        if !synthetic && !BUNDLE_DATASETS.contains(&name.as_str()) {
            return Err(Error::config(
                join(path, "name"),
                format!("unknown dataset `{name}`; known: {SYNTHETIC}, {}", BUNDLE_DATASETS.join(", ")),
            ));
        }
        let empty = Mapping::new();
        let ppath = join(path, "parameters");
        let p = match m.get("parameters") {
            Some(Value::Null) | None => &empty,
            Some(v) => as_map(v, &ppath)?,
        };
        const COMMON: &[&str] = &[
            "subjects",
            "interval",
            "band",
            "baseline",
            "rejection_threshold",
            "resample_hz",
            "event_codes",
        ];
        const SYNTH: &[&str] = &[
            "n_subjects",
            "n_sessions",
            "epochs_per_session",
            "sampling_rate_hz",
            "n_channels",
            "erp_latency_ms",
            "erp_width_ms",
            "subject_separability",
            "session_drift",
            "noise_std_uv",
            "artifact_rate",
            "seed",
        ];
        let mut allowed: Vec<&str> = COMMON.to_vec();
        if synthetic {
            allowed.extend_from_slice(SYNTH);
        } else {
            allowed.push("dataset_path");
        }
        check_keys(p, &ppath, &allowed)?;

        let source = if synthetic {
            let d = SynthConfig::default();
            let s = SynthConfig {
                n_subjects: self.get(p, &ppath, "n_subjects", d.n_subjects, count)?,
                n_sessions: self.get(p, &ppath, "n_sessions", d.n_sessions, count)?,
                epochs_per_session: self.get(p, &ppath, "epochs_per_session", d.epochs_per_session, count)?,
                sampling_rate_hz: self.get(p, &ppath, "sampling_rate_hz", d.sampling_rate_hz, positive)?,
                n_channels: self.get(p, &ppath, "n_channels", d.n_channels, count)?,
                erp_latency_ms: self.get(p, &ppath, "erp_latency_ms", d.erp_latency_ms, number)?,
                erp_width_ms: self.get(p, &ppath, "erp_width_ms", d.erp_width_ms, positive)?,
                subject_separability: self.get(p, &ppath, "subject_separability", d.subject_separability, number)?,
                session_drift: self.get(p, &ppath, "session_drift", d.session_drift, number)?,
                noise_std_uv: self.get(p, &ppath, "noise_std_uv", d.noise_std_uv, number)?,
                artifact_rate: self.get(p, &ppath, "artifact_rate", d.artifact_rate, number)?,
                seed: self.get(p, &ppath, "seed", d.seed, unsigned)?,
            };
            s.validate().map_err(|e| Error::config(&ppath, e.to_string()))?;
            DatasetSource::Synthetic(s)
        } else {
            let path_value = match p.get("dataset_path") {
                Some(v) => Some(PathBuf::from(string(v, &join(&ppath, "dataset_path"))?)),
                None => None,
            };
            if name == USER_DATASET && path_value.is_none() {
                return Err(Error::config(join(&ppath, "dataset_path"), "UserDataset needs a dataset_path"));
            }
            DatasetSource::Bundle { path: path_value }
        };

        let d = PreprocessParams::default();
        let subjects = match p.get("subjects") {
            Some(v) => optional(v, &join(&ppath, "subjects"), count)?,
            None => None,
        };
        let interval = self.get(p, &ppath, "interval", (d.epoch_tmin_s, d.epoch_tmax_s), interval)?;
        let band = self.get(p, &ppath, "band", (d.band_low_hz, d.band_high_hz), pair)?;
        let baseline = self.get(p, &ppath, "baseline", None, |v, q| optional(v, q, pair))?;
        let rejection_threshold = self.get(p, &ppath, "rejection_threshold", None, threshold)?;
        let resample_hz = self.get(p, &ppath, "resample_hz", None, |v, q| optional(v, q, positive))?;
        let event_codes = self.get(p, &ppath, "event_codes", None, |v, q| {
            optional(v, q, |v, q| {
                let items = v.as_sequence().ok_or_else(|| Error::config(q, "expected a list of integers"))?;
                items
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        c.as_i64()
                            .and_then(|c| i32::try_from(c).ok())
                            .ok_or_else(|| Error::config(format!("{q}[{i}]"), "expected a 32-bit integer"))
                    })
                    .collect()
            })
        })?;
        let cfg = DatasetConfig {
            name,
            source,
            subjects,
            interval,
            band,
            baseline,
            rejection_threshold,
            resample_hz,
            event_codes,
        };
        let params = cfg
            .preprocess_params(interval, rejection_threshold)
            .map_err(|e| Error::config(&ppath, e.to_string()))?;
        if let DatasetSource::Synthetic(s) = &cfg.source {
            params
                .validate(s.sampling_rate_hz)
                .map_err(|e| Error::config(&ppath, e.to_string()))?;
        }
        Ok(cfg)
    }

    fn pipeline(&mut self, name: &str, v: &Value, path: &str) -> Result<PipelineConfig> {
        let steps = v
            .as_sequence()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::config(path, "expected a non-empty list of steps"))?;
        let mut ar: Option<usize> = None;
        let mut psd: Option<(usize, f64, Vec<Band>)> = None;
        let mut full_epoch: Option<bool> = None;
        let mut auth: Option<Authenticator> = None;
        for (i, step) in steps.iter().enumerate() {
            let spath = format!("{path}[{i}]");
            let m = as_map(step, &spath)?;
            check_keys(m, &spath, &["name", "from", "parameters"])?;
            let sname = string(
                m.get("name").ok_or_else(|| Error::config(join(&spath, "name"), "missing"))?,
                &join(&spath, "name"),
            )?;
            let ppath = join(&spath, "parameters");
            let empty = Mapping::new();
            let p = match m.get("parameters") {
                Some(Value::Null) | None => &empty,
                Some(v) => as_map(v, &ppath)?,
            };
            if auth.is_some() {
                return Err(Error::config(&spath, "steps after the authenticator are not allowed"));
            }
            let mut take_full_epoch = |this: &mut Self| -> Result<()> {
                let Some(v) = p.get("full_epoch") else {
                    this.defaulted.push(join(&ppath, "full_epoch"));
                    return Ok(());
                };
                let fe = boolean(v, &join(&ppath, "full_epoch"))?;
                if full_epoch.is_some_and(|prev| prev != fe) {
                    return Err(Error::config(join(&ppath, "full_epoch"), "conflicts with an earlier feature step"));
                }
                full_epoch = Some(fe);
                Ok(())
            };
            match sname.as_str() {
                "AutoRegressive" => {
                    check_keys(p, &ppath, &["order", "full_epoch"])?;
                    if ar.is_some() {
                        return Err(Error::config(&spath, "duplicate AutoRegressive step"));
                    }
                    ar = Some(self.get(p, &ppath, "order", FeatureRecipe::default().ar_order, count)?);
                    take_full_epoch(self)?;
                }
                "PowerSpectralDensity" => {
                    check_keys(p, &ppath, &["n_windows", "overlap", "bands", "full_epoch"])?;
                    if psd.is_some() {
                        return Err(Error::config(&spath, "duplicate PowerSpectralDensity step"));
                    }
                    let d = FeatureRecipe::default();
                    let n_windows = self.get(p, &ppath, "n_windows", d.psd_n_windows, count)?;
                    let overlap = self.get(p, &ppath, "overlap", d.psd_overlap, |v, q| {
                        let x = number(v, q)?;
                        if !(0.0..1.0).contains(&x) {
                            return Err(Error::config(q, "overlap must lie in [0, 1)"));
                        }
                        Ok(x)
                    })?;
                    let bands = self.get(p, &ppath, "bands", d.bands, bands)?;
                    psd = Some((n_windows, overlap, bands));
                    take_full_epoch(self)?;
                }
                "TwinNeuralNetwork" => auth = Some(Authenticator::Twin(self.twin(p, &ppath)?)),
                other => match classifier_kind(other) {
                    Some(kind) => auth = Some(Authenticator::Shallow(self.classifier(kind, p, &ppath)?)),
                    None => {
                        return Err(Error::config(
                            join(&spath, "name"),
                            format!("unknown step `{other}`"),
                        ))
                    }
                },
            }
        }
        let Some(authenticator) = auth else {
            return Err(Error::config(path, "no authenticator step"));
        };
        let has_features = ar.is_some() || psd.is_some();
        let features = match (&authenticator, has_features) {
            (Authenticator::Twin(_), true) => {
                return Err(Error::config(path, "TwinNeuralNetwork takes raw epochs; remove the feature steps"))
            }
            (Authenticator::Twin(_), false) => None,
            (Authenticator::Shallow(_), false) => {
                return Err(Error::config(path, "a shallow classifier needs at least one feature step"))
            }
            (Authenticator::Shallow(_), true) => {
                let mut r = FeatureRecipe {
                    use_ar: ar.is_some(),
                    use_psd: psd.is_some(),
                    full_epoch: full_epoch.unwrap_or(false),
                    ..FeatureRecipe::default()
                };
                if let Some(order) = ar {
                    r.ar_order = order;
                }
                if let Some((n, o, b)) = psd {
                    r.psd_n_windows = n;
                    r.psd_overlap = o;
                    r.bands = b;
                }
                r.validate().map_err(|e| Error::config(path, e.to_string()))?;
                Some(r)
            }
        };
        Ok(PipelineConfig { name: name.to_string(), features, authenticator })
    }

    fn classifier(&mut self, kind: ClassifierKind, p: &Mapping, path: &str) -> Result<ClassifierSpec> {
        let spec = match (kind, ClassifierSpec::default_for(kind)) {
            (_, ClassifierSpec::Svm { c, gamma, balanced }) => {
                check_keys(p, path, &["kernel", "C", "gamma", "class_weight", "probability"])?;
                let kernel = self.get(p, path, "kernel", "rbf".to_string(), string)?;
                if kernel != "rbf" {
                    return Err(Error::config(join(path, "kernel"), format!("only the rbf kernel is supported, got `{kernel}`")));
                }
                if !self.get(p, path, "probability", true, boolean)? {
                    return Err(Error::config(join(path, "probability"), "scores are always Platt probabilities; set true"));
                }
                ClassifierSpec::Svm {
                    c: self.get(p, path, "C", c, positive)?,
                    gamma: self.get(p, path, "gamma", gamma, |v, q| match v.as_str() {
                        Some("scale") => Ok(None),
                        _ => positive(v, q).map(Some),
                    })?,
                    balanced: self.get(p, path, "class_weight", balanced, class_weight)?,
                }
            }
            (_, ClassifierSpec::RandomForest { n_trees, balanced }) => {
                check_keys(p, path, &["n_estimators", "class_weight"])?;
                ClassifierSpec::RandomForest {
                    n_trees: self.get(p, path, "n_estimators", n_trees, count)?,
                    balanced: self.get(p, path, "class_weight", balanced, class_weight)?,
                }
            }
            (_, ClassifierSpec::Knn { k }) => {
                check_keys(p, path, &["n_neighbors"])?;
                ClassifierSpec::Knn { k: self.get(p, path, "n_neighbors", k, count)? }
            }
            (_, ClassifierSpec::Lda) => {
                check_keys(p, path, &[])?;
                ClassifierSpec::Lda
            }
            (_, ClassifierSpec::LogisticRegression { lambda, balanced }) => {
                check_keys(p, path, &["C", "lambda", "class_weight"])?;
                if p.contains_key("C") && p.contains_key("lambda") {
                    return Err(Error::config(join(path, "C"), "give either C or lambda, not both"));
                }
                let lambda = match p.get("C") {
                    Some(v) => 1.0 / positive(v, &join(path, "C"))?,
                    None => self.get(p, path, "lambda", lambda, positive)?,
                };
                ClassifierSpec::LogisticRegression {
                    lambda,
                    balanced: self.get(p, path, "class_weight", balanced, class_weight)?,
                }
            }
            (_, ClassifierSpec::GaussianNb { var_floor }) => {
                check_keys(p, path, &["var_floor"])?;
                ClassifierSpec::GaussianNb { var_floor: self.get(p, path, "var_floor", var_floor, positive)? }
            }
        };
        spec.validate().map_err(|e| Error::config(path, e.to_string()))?;
        Ok(spec)
    }

    fn twin(&mut self, p: &Mapping, path: &str) -> Result<TwinConfig> {
        check_keys(
            p,
            path,
            &[
                "EPOCHS",
                "epochs",
                "batch_size",
                "verbose",
                "workers",
                "conv_filters",
                "kernel_time",
                "embedding_dim",
                "margin",
                "learning_rate",
            ],
        )?;
        if p.contains_key("EPOCHS") && p.contains_key("epochs") {
            return Err(Error::config(join(path, "EPOCHS"), "give either EPOCHS or epochs, not both"));
        }
        let d = TwinConfig::default();
        let epochs_key = if p.contains_key("EPOCHS") { "EPOCHS" } else { "epochs" };
        let cfg = TwinConfig {
            conv_filters: self.get(p, path, "conv_filters", d.conv_filters, |v, q| {
                let items = v.as_sequence().ok_or_else(|| Error::config(q, "expected a list"))?;
                items.iter().enumerate().map(|(i, x)| count(x, &format!("{q}[{i}]"))).collect()
            })?,
            kernel_time: self.get(p, path, "kernel_time", d.kernel_time, count)?,
            embedding_dim: self.get(p, path, "embedding_dim", d.embedding_dim, count)?,
            margin: self.get(p, path, "margin", d.margin, positive)?,
            epochs: self.get(p, path, epochs_key, d.epochs, count)?,
            batch_size: self.get(p, path, "batch_size", d.batch_size, count)?,
            learning_rate: self.get(p, path, "learning_rate", d.learning_rate, positive)?,
            seed: d.seed,
            verbose: self.get(p, path, "verbose", d.verbose, boolean)?,
            workers: self.get(p, path, "workers", d.workers, |v, q| optional(v, q, count))?,
        };
        cfg.validate().map_err(|e| Error::config(path, e.to_string()))?;
        Ok(cfg)
    }

    fn evaluation(&mut self, v: &Value, path: &str) -> Result<EvaluationConfig> {
        let m = as_map(v, path)?;
        check_keys(m, path, &["scheme", "attacker", "k_folds", "min_samples_per_user", "seed"])?;
        let d = EvaluationConfig::default();
        let k_folds = self.get(m, path, "k_folds", d.k_folds, count)?;
        if k_folds < 2 {
            return Err(Error::config(join(path, "k_folds"), "must be at least 2"));
        }
        Ok(EvaluationConfig {
            schemes: self.get(m, path, "scheme", d.schemes, |v, q| listed(v, q, scheme))?,
            attackers: self.get(m, path, "attacker", d.attackers, |v, q| listed(v, q, attacker))?,
            k_folds,
            min_samples_per_user: self.get(m, path, "min_samples_per_user", d.min_samples_per_user, count)?,
            seed: self.get(m, path, "seed", d.seed, unsigned)?,
        })
    }
}

/// A scalar or a list of distinct values.
fn listed<T: PartialEq>(v: &Value, path: &str, f: fn(&Value, &str) -> Result<T>) -> Result<Vec<T>> {
    let items = list_or_scalar(v);
    if items.is_empty() {
        return Err(Error::config(path, "expected at least one value"));
    }
    let mut out = Vec::new();
    for (i, x) in items.into_iter().enumerate() {
        let parsed = f(x, &format!("{path}[{i}]"))?;
        if out.contains(&parsed) {
            return Err(Error::config(path, "duplicate value"));
        }
        out.push(parsed);
    }
    Ok(out)
}

fn classifier_kind(name: &str) -> Option<ClassifierKind> {
    Some(match name {
        "SVC" | "SVM" => ClassifierKind::Svm,
        "RandomForestClassifier" | "RF" => ClassifierKind::Rf,
        "KNN" | "KNeighborsClassifier" => ClassifierKind::Knn,
        "LDA" | "LinearDiscriminantAnalysis" => ClassifierKind::Lda,
        "LogisticRegression" | "LR" => ClassifierKind::Lr,
        "GaussianNB" | "NB" => ClassifierKind::Nb,
        _ => return None,
    })
}

fn bands(v: &Value, path: &str) -> Result<Vec<Band>> {
    let items = v.as_sequence().ok_or_else(|| Error::config(path, "expected a list of bands"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let q = format!("{path}[{i}]");
            let m = as_map(b, &q)?;
            check_keys(m, &q, &["name", "low_hz", "high_hz"])?;
            let field = |k: &str| m.get(k).ok_or_else(|| Error::config(join(&q, k), "missing"));
            Ok(Band {
                name: string(field("name")?, &join(&q, "name"))?,
                low_hz: number(field("low_hz")?, &join(&q, "low_hz"))?,
                high_hz: number(field("high_hz")?, &join(&q, "high_hz"))?,
            })
        })
        .collect()
}

fn sweeps(v: &Value, path: &str) -> Result<Sweeps> {
    let m = as_map(v, path)?;
    check_keys(m, path, &["interval", "rejection_threshold"])?;
    let list = |key: &str| -> Result<Vec<&Value>> {
        match m.get(key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .as_sequence()
                .filter(|s| !s.is_empty())
                .map(|s| s.iter().collect())
                .ok_or_else(|| Error::config(join(path, key), "expected a non-empty list")),
        }
    };
    let ipath = join(path, "interval");
    let rpath = join(path, "rejection_threshold");
    Ok(Sweeps {
        interval: list("interval")?
            .into_iter()
            .enumerate()
            .map(|(i, x)| interval(x, &format!("{ipath}[{i}]")))
            .collect::<Result<_>>()?,
        rejection_threshold: list("rejection_threshold")?
            .into_iter()
            .enumerate()
            .map(|(i, x)| threshold(x, &format!("{rpath}[{i}]")))
            .collect::<Result<_>>()?,
    })
}

// Emission.

fn map(entries: Vec<(&str, Value)>) -> Value {
    Value::Mapping(entries.into_iter().map(|(k, v)| (Value::from(k), v)).collect())
}

fn fpair(p: (f64, f64)) -> Value {
    Value::Sequence(vec![p.0.into(), p.1.into()])
}

fn opt<T: Into<Value>>(v: Option<T>) -> Value {
    v.map_or(Value::Null, Into::into)
}

fn weight(balanced: bool) -> Value {
    if balanced {
        "balanced".into()
    } else {
        Value::Null
    }
}

fn step(name: &str, params: Vec<(&str, Value)>) -> Value {
    if params.is_empty() {
        map(vec![("name", name.into())])
    } else {
        map(vec![("name", name.into()), ("parameters", map(params))])
    }
}

/// Resolved configuration as a YAML value with every default spelled out.
pub fn config_value(c: &BenchmarkConfig) -> Value {
    let datasets = c
        .datasets
        .iter()
        .map(|d| {
            let mut p: Vec<(&str, Value)> = Vec::new();
            match &d.source {
                DatasetSource::Synthetic(s) => {
                    p.extend([
                        ("n_subjects", (s.n_subjects as u64).into()),
                        ("n_sessions", (s.n_sessions as u64).into()),
                        ("epochs_per_session", (s.epochs_per_session as u64).into()),
                        ("sampling_rate_hz", s.sampling_rate_hz.into()),
                        ("n_channels", (s.n_channels as u64).into()),
                        ("erp_latency_ms", s.erp_latency_ms.into()),
                        ("erp_width_ms", s.erp_width_ms.into()),
                        ("subject_separability", s.subject_separability.into()),
                        ("session_drift", s.session_drift.into()),
                        ("noise_std_uv", s.noise_std_uv.into()),
                        ("artifact_rate", s.artifact_rate.into()),
                        ("seed", s.seed.into()),
                    ]);
                }
                DatasetSource::Bundle { path: Some(path) } => {
                    p.push(("dataset_path", path.to_string_lossy().into_owned().into()));
                }
                DatasetSource::Bundle { path: None } => {}
            }
            p.extend([
                ("subjects", opt(d.subjects.map(|n| n as u64))),
                ("interval", fpair(d.interval)),
                ("band", fpair(d.band)),
                ("baseline", d.baseline.map_or(Value::Null, fpair)),
                ("rejection_threshold", opt(d.rejection_threshold)),
                ("resample_hz", opt(d.resample_hz)),
                (
                    "event_codes",
                    d.event_codes.as_ref().map_or(Value::Null, |c| {
                        Value::Sequence(c.iter().map(|&x| Value::from(x as i64)).collect())
                    }),
                ),
            ]);
            map(vec![("name", d.name.as_str().into()), ("parameters", map(p))])
        })
        .collect();

    let mut pipelines = Mapping::new();
    for pl in &c.pipelines {
        let mut steps = Vec::new();
        if let Some(r) = &pl.features {
            if r.use_ar {
                steps.push(step(
                    "AutoRegressive",
                    vec![("order", (r.ar_order as u64).into()), ("full_epoch", r.full_epoch.into())],
                ));
            }
            if r.use_psd {
                let bands = r
                    .bands
                    .iter()
                    .map(|b| {
                        map(vec![
                            ("name", b.name.as_str().into()),
                            ("low_hz", b.low_hz.into()),
                            ("high_hz", b.high_hz.into()),
                        ])
                    })
                    .collect();
                steps.push(step(
                    "PowerSpectralDensity",
                    vec![
                        ("n_windows", (r.psd_n_windows as u64).into()),
                        ("overlap", r.psd_overlap.into()),
                        ("bands", Value::Sequence(bands)),
                        ("full_epoch", r.full_epoch.into()),
                    ],
                ));
            }
        }
        steps.push(match &pl.authenticator {
            Authenticator::Shallow(spec) => match *spec {
                ClassifierSpec::Svm { c, gamma, balanced } => step(
                    "SVC",
                    vec![
                        ("kernel", "rbf".into()),
                        ("C", c.into()),
                        ("gamma", gamma.map_or_else(|| "scale".into(), Value::from)),
                        ("class_weight", weight(balanced)),
                        ("probability", true.into()),
                    ],
                ),
                ClassifierSpec::RandomForest { n_trees, balanced } => step(
                    "RandomForestClassifier",
                    vec![("n_estimators", (n_trees as u64).into()), ("class_weight", weight(balanced))],
                ),
                ClassifierSpec::Knn { k } => step("KNN", vec![("n_neighbors", (k as u64).into())]),
                ClassifierSpec::Lda => step("LDA", vec![]),
                ClassifierSpec::LogisticRegression { lambda, balanced } => step(
                    "LogisticRegression",
                    vec![("lambda", lambda.into()), ("class_weight", weight(balanced))],
                ),
                ClassifierSpec::GaussianNb { var_floor } => step("GaussianNB", vec![("var_floor", var_floor.into())]),
            },
            Authenticator::Twin(t) => step(
                "TwinNeuralNetwork",
                vec![
                    (
                        "conv_filters",
                        Value::Sequence(t.conv_filters.iter().map(|&f| Value::from(f as u64)).collect()),
                    ),
                    ("kernel_time", (t.kernel_time as u64).into()),
                    ("embedding_dim", (t.embedding_dim as u64).into()),
                    ("margin", t.margin.into()),
                    ("epochs", (t.epochs as u64).into()),
                    ("batch_size", (t.batch_size as u64).into()),
                    ("learning_rate", t.learning_rate.into()),
                    ("verbose", t.verbose.into()),
                    ("workers", opt(t.workers.map(|w| w as u64))),
                ],
            ),
        });
        pipelines.insert(pl.name.as_str().into(), Value::Sequence(steps));
    }

    let e = &c.evaluation;
    let evaluation = map(vec![
        ("scheme", Value::Sequence(e.schemes.iter().map(|s| s.as_str().into()).collect())),
        ("attacker", Value::Sequence(e.attackers.iter().map(|a| a.as_str().into()).collect())),
        ("k_folds", (e.k_folds as u64).into()),
        ("min_samples_per_user", (e.min_samples_per_user as u64).into()),
        ("seed", e.seed.into()),
    ]);
    let mut top = vec![
        ("name", c.name.as_str().into()),
        ("datasets", Value::Sequence(datasets)),
        ("pipelines", Value::Mapping(pipelines)),
        ("evaluation", evaluation),
    ];
    if !c.sweeps.is_empty() {
        let mut s = Vec::new();
        if !c.sweeps.interval.is_empty() {
            s.push(("interval", Value::Sequence(c.sweeps.interval.iter().map(|&p| fpair(p)).collect())));
        }
        if !c.sweeps.rejection_threshold.is_empty() {
            s.push((
                "rejection_threshold",
                Value::Sequence(c.sweeps.rejection_threshold.iter().map(|&t| opt(t)).collect()),
            ));
        }
        top.push(("sweeps", map(s)));
    }
    map(top)
}

pub fn emit_config(c: &BenchmarkConfig) -> String {
    serde_yaml::to_string(&config_value(c)).expect("YAML values always serialize")
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub scheme: Option<Scheme>,
    pub attacker: Option<Attacker>,
}

impl BenchmarkConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.evaluation.seed = s;
        }
        if let Some(s) = o.scheme {
            self.evaluation.schemes = vec![s];
        }
        if let Some(a) = o.attacker {
            self.evaluation.attackers = vec![a];
        }
    }
}
