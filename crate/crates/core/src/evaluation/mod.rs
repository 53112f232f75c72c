//! Authentication scenarios: known/unknown attacker, single/multi session.
//!
//! Every score set carries the epoch ids its model was fit on and the ids it
//! scored, so leakage can be audited after the fact.

pub mod folds;

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Axis;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{self, ClassifierSpec};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Standardizer};
use crate::metrics::ScoreContext;
use crate::preprocess::EpochSet;
use crate::rng;
use crate::twin::{self, TwinConfig};
pub use folds::{known_attacker_folds, unknown_attacker_folds, Attacker, Fold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SingleSession,
    MultiSession,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::SingleSession => "single_session",
            Scheme::MultiSession => "multi_session",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPlan {
    pub scheme: Scheme,
    pub attacker: Attacker,
    pub k_folds: usize,
    pub min_samples_per_user: usize,
    pub seed: u64,
}

impl Default for EvalPlan {
    fn default() -> Self {
        Self {
            scheme: Scheme::SingleSession,
            attacker: Attacker::Unknown,
            k_folds: 4,
            min_samples_per_user: 4,
            seed: 42,
        }
    }
}

impl EvalPlan {
    pub fn validate(&self) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::Param(format!("k_folds must be at least 2, got {}", self.k_folds)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub context: ScoreContext,
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    /// Epoch ids the model (and standardizer) were fit on.
    pub train_epoch_ids: Vec<usize>,
    /// Epoch ids that were scored.
    pub test_epoch_ids: Vec<usize>,
    /// Impostor subjects seen in training.
    pub train_impostors: Vec<String>,
    /// Impostor subjects that were scored.
    pub test_impostors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub user_id: String,
    pub enroll_session: String,
    pub probe_session: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub score_sets: Vec<ScoreSet>,
    pub skipped: Vec<SkipRecord>,
    /// Session pairs in which no user could be evaluated.
    pub skipped_sessions: Vec<(String, String)>,
}

/// What scores the epochs.
#[derive(Debug, Clone, PartialEq)]
pub enum Authenticator {
    Shallow(ClassifierSpec),
    Twin(TwinConfig),
}

/// Inputs for one pipeline; shallow authenticators read `features`, the twin
/// network reads `epochs`.
#[derive(Clone, Copy)]
pub enum PipelineData<'a> {
    Shallow { features: &'a FeatureMatrix, spec: &'a ClassifierSpec },
    Twin { epochs: &'a EpochSet, config: &'a TwinConfig },
}

/// Distinct values in order of first appearance.
pub fn first_appearance(ids: &[String]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    ids.iter().filter(|s| seen.insert(s.as_str())).cloned().collect()
}

/// Ordered `(enroll, probe)` session pairs for a scheme.
pub fn session_pairs(sessions: &[String], scheme: Scheme) -> Result<Vec<(String, String)>> {
    match scheme {
        Scheme::SingleSession => Ok(sessions.iter().map(|s| (s.clone(), s.clone())).collect()),
        Scheme::MultiSession => {
            if sessions.len() < 2 {
                return Err(Error::Param(format!(
                    "multi-session evaluation needs at least 2 sessions, dataset has {}",
                    sessions.len()
                )));
            }
            Ok((0..sessions.len())
                .flat_map(|i| (i + 1..sessions.len()).map(move |j| (sessions[i].clone(), sessions[j].clone())))
                .collect())
        }
    }
}

fn skip(user: &str, pair: &(String, String), reason: String) -> SkipRecord {
    SkipRecord {
        user_id: user.to_string(),
        enroll_session: pair.0.clone(),
        probe_session: pair.1.clone(),
        reason,
    }
}

/// Rows of the enroll session (stratum 0) followed by rows of the probe
/// session (stratum 1); identical sessions give a single stratum.
fn universe(session_ids: &[String], pair: &(String, String)) -> (Vec<usize>, Vec<usize>) {
    let mut rows: Vec<usize> = (0..session_ids.len()).filter(|&i| session_ids[i] == pair.0).collect();
    let mut strata = vec![0; rows.len()];
    if pair.0 != pair.1 {
        let probe: Vec<usize> = (0..session_ids.len()).filter(|&i| session_ids[i] == pair.1).collect();
        strata.extend(std::iter::repeat_n(1, probe.len()));
        rows.extend(probe);
    }
    (rows, strata)
}

fn distinct_sorted<'a>(it: impl Iterator<Item = &'a String>) -> Vec<String> {
    it.collect::<BTreeSet<_>>().into_iter().cloned().collect()
}

enum UserResult {
    Sets(Vec<ScoreSet>),
    Skipped(SkipRecord),
}

fn shallow_user(
    fm: &FeatureMatrix,
    spec: &ClassifierSpec,
    plan: &EvalPlan,
    pipeline_id: &str,
    pair: &(String, String),
    user: &str,
) -> Result<UserResult> {
    let (rows, strata) = universe(&fm.session_ids, pair);
    let subjects: Vec<String> = rows.iter().map(|&i| fm.subject_ids[i].clone()).collect();
    let fold = match folds::assign(&subjects, &strata, user, plan.attacker, plan.k_folds, plan.min_samples_per_user, plan.seed) {
        Ok(f) => f,
        Err(Error::SkipUser { reason, .. }) => return Ok(UserResult::Skipped(skip(user, pair, reason))),
        Err(e) => return Err(e),
    };
    let probe_stratum = if pair.0 == pair.1 { 0 } else { 1 };
    let mut sets = Vec::with_capacity(plan.k_folds);
    for f in 0..plan.k_folds {
        let train: Vec<usize> = (0..rows.len()).filter(|&r| fold[r] != f && strata[r] == 0).map(|r| rows[r]).collect();
        let test: Vec<usize> = (0..rows.len())
            .filter(|&r| fold[r] == f && strata[r] == probe_stratum)
            .map(|r| rows[r])
            .collect();
        let y: Vec<bool> = train.iter().map(|&i| fm.subject_ids[i] == user).collect();
        let x_train = fm.values.select(Axis(0), &train);
        let scaler = Standardizer::fit(x_train.view())?;
        let x_train = scaler.apply(x_train.view())?;
        let x_test = scaler.apply(fm.values.select(Axis(0), &test).view())?;
        let seed = rng::derive(
            plan.seed,
            &[rng::hash_str(user), f as u64, rng::hash_str(&pair.0), rng::hash_str(&pair.1)],
        );
        let model = classifiers::fit(spec, x_train.view(), &y, seed)?;
        let scores = model.score(x_test.view())?;
        let mut genuine = Vec::new();
        let mut impostor = Vec::new();
        for (&i, s) in test.iter().zip(scores) {
            if fm.subject_ids[i] == user {
                genuine.push(s)
            } else {
                impostor.push(s)
            }
        }
        if genuine.is_empty() || impostor.is_empty() {
            return Ok(UserResult::Skipped(skip(user, pair, format!("fold {f} lacks genuine or impostor probes"))));
        }
        sets.push(ScoreSet {
            context: ScoreContext {
                pipeline_id: pipeline_id.to_string(),
                user_id: user.to_string(),
                fold: f,
                enroll_session: pair.0.clone(),
                probe_session: pair.1.clone(),
            },
            genuine,
            impostor,
            train_epoch_ids: train.iter().map(|&i| fm.epoch_ids[i]).collect(),
            test_epoch_ids: test.iter().map(|&i| fm.epoch_ids[i]).collect(),
            train_impostors: distinct_sorted(train.iter().map(|&i| &fm.subject_ids[i]).filter(|s| *s != user)),
            test_impostors: distinct_sorted(test.iter().map(|&i| &fm.subject_ids[i]).filter(|s| *s != user)),
        });
    }
    Ok(UserResult::Sets(sets))
}

fn run_shallow(fm: &FeatureMatrix, spec: &ClassifierSpec, plan: &EvalPlan, pipeline_id: &str) -> Result<EvalOutput> {
    let pairs = session_pairs(&first_appearance(&fm.session_ids), plan.scheme)?;
    let mut units = Vec::new();
    for pair in &pairs {
        let enrolled: Vec<String> = first_appearance(
            &(0..fm.n_rows())
                .filter(|&i| fm.session_ids[i] == pair.0)
                .map(|i| fm.subject_ids[i].clone())
                .collect::<Vec<_>>(),
        );
        units.extend(enrolled.into_iter().map(|u| (pair.clone(), u)));
    }
    let results: Vec<Result<UserResult>> = units
        .par_iter()
        .map(|(pair, user)| shallow_user(fm, spec, plan, pipeline_id, pair, user))
        .collect();
    collect(&pairs, &units, results)
}

fn collect(pairs: &[(String, String)], units: &[((String, String), String)], results: Vec<Result<UserResult>>) -> Result<EvalOutput> {
    let mut out = EvalOutput::default();
    let mut per_pair: BTreeMap<&(String, String), usize> = BTreeMap::new();
    for ((pair, _), r) in units.iter().zip(results) {
        match r? {
            UserResult::Sets(sets) => {
                *per_pair.entry(pair).or_default() += sets.len();
                out.score_sets.extend(sets);
            }
            UserResult::Skipped(s) => out.skipped.push(s),
        }
    }
    for pair in pairs {
        if per_pair.get(pair).copied().unwrap_or(0) == 0 {
            out.skipped_sessions.push(pair.clone());
        }
    }
    if out.score_sets.is_empty() {
        let label = pairs.iter().map(|p| format!("{}->{}", p.0, p.1)).collect::<Vec<_>>().join(", ");
        return Err(Error::SessionSkipped(label));
    }
    Ok(out)
}

/// Inner split of every subject's rows per session, used for enrollment and
/// probe selection on the twin path.
fn inner_folds(ep: &EpochSet, k: usize, seed: u64) -> Vec<usize> {
    let mut fold = vec![0usize; ep.n_epochs()];
    let mut groups: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for i in 0..ep.n_epochs() {
        groups.entry((&ep.subject_ids[i], &ep.session_ids[i])).or_default().push(i);
    }
    for ((subject, session), mut rows) in groups {
        rows.shuffle(&mut rng::stream(seed, &[0x1f, rng::hash_str(subject), rng::hash_str(session)]));
        for (r, i) in rows.into_iter().enumerate() {
            fold[i] = r % k;
        }
    }
    fold
}

fn run_twin(ep: &EpochSet, cfg: &TwinConfig, plan: &EvalPlan, pipeline_id: &str) -> Result<EvalOutput> {
    let k = plan.k_folds;
    let pairs = session_pairs(&first_appearance(&ep.session_ids), plan.scheme)?;
    let inner = inner_folds(ep, k, plan.seed);
    // holdout for known impostors in single-session mode: never trained on
    const HOLDOUT: usize = 0;
    let mut jobs = Vec::new();
    for pair in &pairs {
        let mut subjects: Vec<String> = distinct_sorted(
            (0..ep.n_epochs()).filter(|&i| ep.session_ids[i] == pair.0).map(|i| &ep.subject_ids[i]),
        );
        if subjects.len() < k {
            return Err(Error::Param(format!(
                "twin evaluation needs at least {k} subjects in session {}, got {}",
                pair.0,
                subjects.len()
            )));
        }
        subjects.shuffle(&mut rng::stream(
            plan.seed,
            &[0x7a, rng::hash_str(&pair.0), rng::hash_str(&pair.1)],
        ));
        for g in 0..k {
            let eval: Vec<String> = subjects.iter().enumerate().filter(|(r, _)| r % k == g).map(|(_, s)| s.clone()).collect();
            jobs.push((pair.clone(), g, eval, subjects.clone()));
        }
    }
    let results: Vec<Result<Vec<UserResult>>> = jobs
        .par_iter()
        .map(|(pair, g, eval, all)| {
            let eval_set: BTreeSet<&str> = eval.iter().map(String::as_str).collect();
            let single = pair.0 == pair.1;
            let holdout_needed = single && plan.attacker == Attacker::Known;
            let train_rows: Vec<usize> = (0..ep.n_epochs())
                .filter(|&i| {
                    ep.session_ids[i] == pair.0
                        && !eval_set.contains(ep.subject_ids[i].as_str())
                        && all.contains(&ep.subject_ids[i])
                        && !(holdout_needed && inner[i] == HOLDOUT)
                })
                .collect();
            let mut model_cfg = cfg.clone();
            model_cfg.seed = rng::derive(
                cfg.seed,
                &[plan.seed, *g as u64, rng::hash_str(&pair.0), rng::hash_str(&pair.1)],
            );
            let model = twin::build(&model_cfg, ep.n_channels(), ep.n_times())?;
            let model = twin::train(&model, &ep.select(&train_rows))?;
            let relevant: Vec<usize> = (0..ep.n_epochs())
                .filter(|&i| ep.session_ids[i] == pair.0 || ep.session_ids[i] == pair.1)
                .collect();
            let emb = model.embed(ep.data.select(Axis(0), &relevant).view())?;
            let row_of: BTreeMap<usize, usize> = relevant.iter().enumerate().map(|(r, &i)| (i, r)).collect();
            let mut out = Vec::new();
            for user in eval {
                let need = plan.min_samples_per_user.max(k);
                let count = |s: &str| (0..ep.n_epochs()).filter(|&i| ep.session_ids[i] == s && ep.subject_ids[i] == *user).count();
                let (ne, np) = (count(&pair.0), count(&pair.1));
                if ne < need || np < need {
                    out.push(UserResult::Skipped(skip(user, pair, format!("{} genuine epochs, need at least {need}", ne.min(np)))));
                    continue;
                }
                let mut sets = Vec::new();
                for f in 0..k {
                    let enroll: Vec<usize> = (0..ep.n_epochs())
                        .filter(|&i| ep.subject_ids[i] == *user && ep.session_ids[i] == pair.0 && inner[i] != f)
                        .collect();
                    let probe_of = |i: usize| ep.session_ids[i] == pair.1 && inner[i] == f;
                    let genuine_rows: Vec<usize> = (0..ep.n_epochs()).filter(|&i| ep.subject_ids[i] == *user && probe_of(i)).collect();
                    let impostor_rows: Vec<usize> = (0..ep.n_epochs())
                        .filter(|&i| {
                            let s = ep.subject_ids[i].as_str();
                            if s == user || !all.iter().any(|a| a == s) {
                                return false;
                            }
                            if eval_set.contains(s) {
                                probe_of(i)
                            } else if plan.attacker == Attacker::Known {
                                if single {
                                    ep.session_ids[i] == pair.1 && inner[i] == HOLDOUT
                                } else {
                                    probe_of(i)
                                }
                            } else {
                                false
                            }
                        })
                        .collect();
                    if impostor_rows.is_empty() || genuine_rows.is_empty() {
                        break;
                    }
                    let mut template = ndarray::Array1::<f64>::zeros(emb.ncols());
                    for &i in &enroll {
                        template += &emb.row(row_of[&i]);
                    }
                    let norm = template.dot(&template).sqrt();
                    if norm > 0.0 {
                        template /= norm;
                    }
                    let score = |i: &usize| emb.row(row_of[i]).dot(&template).clamp(-1.0, 1.0);
                    let mut train_ids: Vec<usize> = train_rows.iter().chain(&enroll).map(|&i| ep.epoch_ids[i]).collect();
                    train_ids.sort_unstable();
                    let test: Vec<usize> = genuine_rows.iter().chain(&impostor_rows).copied().collect();
                    sets.push(ScoreSet {
                        context: ScoreContext {
                            pipeline_id: pipeline_id.to_string(),
                            user_id: user.clone(),
                            fold: f,
                            enroll_session: pair.0.clone(),
                            probe_session: pair.1.clone(),
                        },
                        genuine: genuine_rows.iter().map(score).collect(),
                        impostor: impostor_rows.iter().map(score).collect(),
                        train_epoch_ids: train_ids,
                        test_epoch_ids: test.iter().map(|&i| ep.epoch_ids[i]).collect(),
                        train_impostors: distinct_sorted(train_rows.iter().map(|&i| &ep.subject_ids[i])),
                        test_impostors: distinct_sorted(impostor_rows.iter().map(|&i| &ep.subject_ids[i])),
                    });
                }
                if sets.len() < k {
                    out.push(UserResult::Skipped(skip(user, pair, "no impostor probes available".into())));
                } else {
                    out.push(UserResult::Sets(sets));
                }
            }
            Ok(out)
        })
        .collect();
    let mut units = Vec::new();
    let mut flat = Vec::new();
    for ((pair, ..), r) in jobs.iter().zip(results) {
        for u in r? {
            units.push((pair.clone(), String::new()));
            flat.push(Ok(u));
        }
    }
    let mut out = collect(&pairs, &units, flat)?;
    out.score_sets.sort_by(|a, b| {
        let key = |s: &ScoreSet| (pairs.iter().position(|p| p.0 == s.context.enroll_session && p.1 == s.context.probe_session), s.context.user_id.clone(), s.context.fold);
        key(a).cmp(&key(b))
    });
    Ok(out)
}

fn run(data: PipelineData<'_>, plan: &EvalPlan, pipeline_id: &str) -> Result<EvalOutput> {
    plan.validate()?;
    match data {
        PipelineData::Shallow { features, spec } => run_shallow(features, spec, plan, pipeline_id),
        PipelineData::Twin { epochs, config } => run_twin(epochs, config, plan, pipeline_id),
    }
}

/// Each session evaluated on its own.
pub fn run_single_session(data: PipelineData<'_>, plan: &EvalPlan, pipeline_id: &str) -> Result<EvalOutput> {
    let plan = EvalPlan { scheme: Scheme::SingleSession, ..plan.clone() };
    run(data, &plan, pipeline_id)
}

/// Enroll on session `i`, probe with session `j > i`.
pub fn run_multi_session(data: PipelineData<'_>, plan: &EvalPlan, pipeline_id: &str) -> Result<EvalOutput> {
    let plan = EvalPlan { scheme: Scheme::MultiSession, ..plan.clone() };
    run(data, &plan, pipeline_id)
}

/// Dispatch on `plan.scheme`.
pub fn evaluate(data: PipelineData<'_>, plan: &EvalPlan, pipeline_id: &str) -> Result<EvalOutput> {
    run(data, plan, pipeline_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ClassifierKind;
    use crate::features::{assemble, FeatureRecipe};
    use crate::preprocess::{run_chain, PreprocessParams};
    use crate::synth::{generate, SynthConfig};

    fn dataset(n_subjects: usize, n_sessions: usize, epochs: usize, sep: f64, drift: f64, seed: u64) -> EpochSet {
        let cfg = SynthConfig {
            n_subjects,
            n_sessions,
            epochs_per_session: epochs,
            n_channels: 4,
            subject_separability: sep,
            session_drift: drift,
            seed,
            ..SynthConfig::default()
        };
        let (m, recs) = generate(&cfg).unwrap();
        run_chain(&recs, &m.channel_names, &PreprocessParams::default(), None).unwrap().0
    }

    fn rf() -> ClassifierSpec {
        ClassifierSpec::RandomForest { n_trees: 20, balanced: true }
    }

    fn check_hygiene(out: &EvalOutput, attacker: Attacker) {
        for s in &out.score_sets {
            let train: BTreeSet<usize> = s.train_epoch_ids.iter().copied().collect();
            assert!(s.test_epoch_ids.iter().all(|i| !train.contains(i)), "{:?}", s.context);
            if attacker == Attacker::Unknown {
                let a: BTreeSet<&String> = s.train_impostors.iter().collect();
                assert!(s.test_impostors.iter().all(|t| !a.contains(t)), "{:?}", s.context);
            }
            assert!(!s.genuine.is_empty() && !s.impostor.is_empty());
        }
    }

    #[test]
    fn counting_ten_users_four_folds() {
        let ep = dataset(10, 1, 12, 0.8, 0.0, 1);
        let fm = assemble(&ep, &FeatureRecipe::default()).unwrap();
        let spec = rf();
        let plan = EvalPlan::default();
        let out = run_single_session(PipelineData::Shallow { features: &fm, spec: &spec }, &plan, "AR+RF").unwrap();
        assert_eq!(out.score_sets.len(), 40);
        assert!(out.skipped.is_empty());
        check_hygiene(&out, Attacker::Unknown);
    }

    #[test]
    fn multi_session_pairs() {
        let s: Vec<String> = ["1", "2", "3"].iter().map(|v| v.to_string()).collect();
        let pairs = session_pairs(&s, Scheme::MultiSession).unwrap();
        let expect: Vec<(String, String)> = [("1", "2"), ("1", "3"), ("2", "3")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(pairs, expect);
        assert!(matches!(session_pairs(&s[..1], Scheme::MultiSession), Err(Error::Param(_))));
    }

    #[test]
    fn multi_session_hygiene_and_sessions() {
        let ep = dataset(6, 2, 10, 0.8, 0.3, 2);
        let fm = assemble(&ep, &FeatureRecipe::default()).unwrap();
        let spec = ClassifierSpec::default_for(ClassifierKind::Lda);
        for attacker in [Attacker::Known, Attacker::Unknown] {
            let plan = EvalPlan { attacker, ..EvalPlan::default() };
            let out = run_multi_session(PipelineData::Shallow { features: &fm, spec: &spec }, &plan, "p").unwrap();
            assert_eq!(out.score_sets.len(), 6 * 4);
            check_hygiene(&out, attacker);
            let by_id: BTreeMap<usize, &String> = ep.epoch_ids.iter().zip(&ep.session_ids).map(|(i, s)| (*i, s)).collect();
            for s in &out.score_sets {
                assert!(s.train_epoch_ids.iter().all(|i| by_id[i] == "1"));
                assert!(s.test_epoch_ids.iter().all(|i| by_id[i] == "2"));
            }
        }
    }

    #[test]
    fn users_below_minimum_are_reported() {
        let mut ep = dataset(6, 1, 8, 0.8, 0.0, 3);
        let keep: Vec<usize> = (0..ep.n_epochs())
            .filter(|&i| ep.subject_ids[i] != "S01" || ep.epoch_ids[i] % 8 < 3)
            .collect();
        ep = ep.select(&keep);
        let fm = assemble(&ep, &FeatureRecipe::default()).unwrap();
        let spec = rf();
        let plan = EvalPlan { attacker: Attacker::Known, ..EvalPlan::default() };
        let out = run_single_session(PipelineData::Shallow { features: &fm, spec: &spec }, &plan, "p").unwrap();
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].user_id, "S01");
        assert_eq!(out.score_sets.len(), 5 * 4);
    }

    #[test]
    fn deterministic_score_sets() {
        let ep = dataset(5, 1, 10, 0.5, 0.0, 4);
        let fm = assemble(&ep, &FeatureRecipe::default()).unwrap();
        let spec = ClassifierSpec::default_for(ClassifierKind::Svm);
        let plan = EvalPlan { attacker: Attacker::Known, ..EvalPlan::default() };
        let a = run_single_session(PipelineData::Shallow { features: &fm, spec: &spec }, &plan, "p").unwrap();
        let b = run_single_session(PipelineData::Shallow { features: &fm, spec: &spec }, &plan, "p").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn twin_path_hygiene() {
        let ep = dataset(8, 2, 8, 0.8, 0.0, 5);
        let cfg = TwinConfig {
            conv_filters: vec![2; 5],
            kernel_time: 3,
            embedding_dim: 4,
            epochs: 1,
            batch_size: 32,
            ..TwinConfig::default()
        };
        for (attacker, scheme) in [
            (Attacker::Unknown, Scheme::SingleSession),
            (Attacker::Known, Scheme::SingleSession),
            (Attacker::Known, Scheme::MultiSession),
        ] {
            let plan = EvalPlan { attacker, scheme, ..EvalPlan::default() };
            let out = evaluate(PipelineData::Twin { epochs: &ep, config: &cfg }, &plan, "TNN").unwrap();
            let pairs = if scheme == Scheme::SingleSession { 2 } else { 1 };
            assert_eq!(out.score_sets.len() + 4 * out.skipped.len(), 8 * 4 * pairs, "{attacker:?} {scheme:?}");
            check_hygiene(&out, attacker);
            for s in &out.score_sets {
                assert!(s.genuine.iter().chain(&s.impostor).all(|v| (-1.0..=1.0).contains(v)));
            }
        }
    }
}
