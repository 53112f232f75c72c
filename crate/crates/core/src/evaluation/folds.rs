//! Cross-validation fold assignment for one enrolled user.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attacker {
    /// Impostor subjects may appear in both training and test rows.
    Known,
    /// Impostor subjects are partitioned into disjoint train/test groups.
    Unknown,
}

impl Attacker {
    pub fn as_str(self) -> &'static str {
        match self {
            Attacker::Known => "known",
            Attacker::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

const KEY_GENUINE: u64 = 0x6e;
const KEY_IMPOSTOR: u64 = 0x1b;
const KEY_GROUPS: u64 = 0x96;

/// Round-robin fold ids over a seeded shuffle of `rows`, continuing from
/// `offset` so that consecutive strata fill folds evenly.
fn deal(rows: &mut [usize], k: usize, offset: usize, key: &[u64], seed: u64, out: &mut [usize]) {
    rows.shuffle(&mut rng::stream(seed, key));
    for (r, &i) in rows.iter().enumerate() {
        out[i] = (offset + r) % k;
    }
}

/// Fold id per row. `strata` keeps sessions apart so each is split evenly.
pub(crate) fn assign(
    subjects: &[String],
    strata: &[usize],
    user: &str,
    attacker: Attacker,
    k: usize,
    min_samples: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Param(format!("k_folds must be at least 2, got {k}")));
    }
    let n_strata = strata.iter().copied().max().map_or(0, |m| m + 1);
    let user_key = rng::hash_str(user);
    let need = min_samples.max(k);
    for s in 0..n_strata {
        let n_genuine = (0..subjects.len()).filter(|&i| strata[i] == s && subjects[i] == user).count();
        if n_genuine < need {
            return Err(Error::SkipUser {
                user: user.to_string(),
                reason: format!("{n_genuine} genuine epochs, need at least {need}"),
            });
        }
    }
    let impostors: BTreeSet<&str> = subjects.iter().map(String::as_str).filter(|s| *s != user).collect();
    let mut fold = vec![0usize; subjects.len()];
    match attacker {
        Attacker::Known => {
            if impostors.is_empty() {
                return Err(Error::Param("known-attacker folds need at least one other subject".into()));
            }
            let mut offset = [0usize; 2];
            for s in 0..n_strata {
                for (class, genuine) in [(0usize, true), (1, false)] {
                    let mut rows: Vec<usize> = (0..subjects.len())
                        .filter(|&i| strata[i] == s && (subjects[i] == user) == genuine)
                        .collect();
                    let key = if genuine { KEY_GENUINE } else { KEY_IMPOSTOR };
                    deal(&mut rows, k, offset[class], &[key, user_key, s as u64], seed, &mut fold);
                    offset[class] += rows.len();
                }
            }
            for s in 0..n_strata {
                let n_imp = (0..subjects.len()).filter(|&i| strata[i] == s && subjects[i] != user).count();
                if n_imp < k {
                    return Err(Error::Param(format!(
                        "{n_imp} impostor epochs cannot fill {k} stratified folds"
                    )));
                }
            }
        }
        Attacker::Unknown => {
            if impostors.len() < k {
                return Err(Error::Param(format!(
                    "unknown-attacker folds need at least {k} impostor subjects, got {}",
                    impostors.len()
                )));
            }
            let mut groups: Vec<&str> = impostors.into_iter().collect();
            groups.shuffle(&mut rng::stream(seed, &[KEY_GROUPS, user_key]));
            for (g, subject) in groups.iter().enumerate() {
                for i in 0..subjects.len() {
                    if subjects[i] == *subject {
                        fold[i] = g % k;
                    }
                }
            }
            let mut offset = 0;
            for s in 0..n_strata {
                let mut rows: Vec<usize> = (0..subjects.len())
                    .filter(|&i| strata[i] == s && subjects[i] == user)
                    .collect();
                deal(&mut rows, k, offset, &[KEY_GENUINE, user_key, s as u64], seed, &mut fold);
                offset += rows.len();
            }
        }
    }
    Ok(fold)
}

fn to_folds(fold: &[usize], k: usize) -> Vec<Fold> {
    (0..k)
        .map(|f| Fold {
            train: (0..fold.len()).filter(|&i| fold[i] != f).collect(),
            test: (0..fold.len()).filter(|&i| fold[i] == f).collect(),
        })
        .collect()
}

/// Stratified k-fold over all rows, genuine = `user`, impostor = everyone
/// else.
pub fn known_attacker_folds(subjects: &[String], user: &str, k: usize, min_samples: usize, seed: u64) -> Result<Vec<Fold>> {
    let fold = assign(subjects, &vec![0; subjects.len()], user, Attacker::Known, k, min_samples, seed)?;
    Ok(to_folds(&fold, k))
}

/// Impostor subjects split into `k` disjoint groups; genuine rows split
/// stratified over the same folds.
pub fn unknown_attacker_folds(subjects: &[String], user: &str, k: usize, min_samples: usize, seed: u64) -> Result<Vec<Fold>> {
    let fold = assign(subjects, &vec![0; subjects.len()], user, Attacker::Unknown, k, min_samples, seed)?;
    Ok(to_folds(&fold, k))
}
