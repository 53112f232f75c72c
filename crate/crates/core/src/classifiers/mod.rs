//! Per-user authenticators behind one contract: fit on genuine/impostor
//! rows, emit match scores in `[0, 1]` where higher means more genuine.

mod forest;
mod knn;
mod lda;
mod logistic;
mod naive_bayes;
mod svm;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use forest::RandomForest;
pub use knn::Knn;
pub use lda::Lda;
pub use logistic::LogisticRegression;
pub use naive_bayes::GaussianNb;
pub use svm::{PlattSvm, Svm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    Knn,
    Lda,
    Lr,
    Nb,
    Rf,
    Svm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ClassifierSpec {
    Knn {
        k: usize,
    },
    Lda,
    LogisticRegression {
        /// L2 penalty on the weights (not the intercept).
        lambda: f64,
        balanced: bool,
    },
    GaussianNb {
        var_floor: f64,
    },
    RandomForest {
        n_trees: usize,
        balanced: bool,
    },
    Svm {
        c: f64,
        /// `None` selects `1 / (n_features · var(X))`.
        gamma: Option<f64>,
        balanced: bool,
    },
}

impl ClassifierSpec {
    pub fn default_for(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::Knn => ClassifierSpec::Knn { k: 5 },
            ClassifierKind::Lda => ClassifierSpec::Lda,
            ClassifierKind::Lr => ClassifierSpec::LogisticRegression {
                lambda: 1.0,
                balanced: true,
            },
            ClassifierKind::Nb => ClassifierSpec::GaussianNb { var_floor: 1e-9 },
            ClassifierKind::Rf => ClassifierSpec::RandomForest {
                n_trees: 100,
                balanced: true,
            },
            ClassifierKind::Svm => ClassifierSpec::Svm {
                c: 1.0,
                gamma: None,
                balanced: true,
            },
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierSpec::Knn { .. } => ClassifierKind::Knn,
            ClassifierSpec::Lda => ClassifierKind::Lda,
            ClassifierSpec::LogisticRegression { .. } => ClassifierKind::Lr,
            ClassifierSpec::GaussianNb { .. } => ClassifierKind::Nb,
            ClassifierSpec::RandomForest { .. } => ClassifierKind::Rf,
            ClassifierSpec::Svm { .. } => ClassifierKind::Svm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Param(m.to_string()));
        match *self {
            ClassifierSpec::Knn { k } if k == 0 => bad("KNN needs k >= 1"),
            ClassifierSpec::LogisticRegression { lambda, .. } if !(lambda > 0.0) => {
                bad("logistic regression needs lambda > 0")
            }
            ClassifierSpec::GaussianNb { var_floor } if !(var_floor > 0.0) => bad("variance floor must be positive"),
            ClassifierSpec::RandomForest { n_trees, .. } if n_trees == 0 => bad("random forest needs n_trees >= 1"),
            ClassifierSpec::Svm { c, gamma, .. } if !(c > 0.0) || gamma.is_some_and(|g| !(g > 0.0)) => {
                bad("SVM needs C > 0 and gamma > 0")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Knn(Knn),
    Lda(Lda),
    Lr(LogisticRegression),
    Nb(GaussianNb),
    Rf(RandomForest),
    Svm(PlattSvm),
}

/// A fitted per-user model. Immutable once trained.
#[derive(Debug, Clone)]
pub struct AuthModel {
    pub model: FittedModel,
    pub n_features: usize,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub seed: u64,
}

/// Per-class weights inversely proportional to class frequency:
/// `n / (2 · n_class)`, as `(genuine, impostor)`.
pub fn balanced_weights(y: &[bool]) -> (f64, f64) {
    let n = y.len() as f64;
    let ng = y.iter().filter(|v| **v).count() as f64;
    let ni = n - ng;
    (n / (2.0 * ng), n / (2.0 * ni))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_training(x: ArrayView2<f64>, y: &[bool]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::validation(
            "labels",
            format!("{} rows but {} labels", x.nrows(), y.len()),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("features", "non-finite feature value"));
    }
    let ng = y.iter().filter(|v| **v).count();
    if ng == 0 || ng == y.len() {
        return Err(Error::Training("training labels contain a single class".into()));
    }
    Ok(())
}

/// Train one authenticator. Deterministic given `seed`.
pub fn fit(spec: &ClassifierSpec, x: ArrayView2<f64>, y: &[bool], seed: u64) -> Result<AuthModel> {
    spec.validate()?;
    check_training(x, y)?;
    let model = match *spec {
        ClassifierSpec::Knn { k } => FittedModel::Knn(Knn::fit(x, y, k)),
        ClassifierSpec::Lda => FittedModel::Lda(Lda::fit(x, y)?),
        ClassifierSpec::LogisticRegression { lambda, balanced } => {
            FittedModel::Lr(LogisticRegression::fit(x, y, lambda, balanced)?)
        }
        ClassifierSpec::GaussianNb { var_floor } => FittedModel::Nb(GaussianNb::fit(x, y, var_floor)),
        ClassifierSpec::RandomForest { n_trees, balanced } => {
            FittedModel::Rf(RandomForest::fit(x, y, n_trees, balanced, seed))
        }
        ClassifierSpec::Svm { c, gamma, balanced } => FittedModel::Svm(PlattSvm::fit(x, y, c, gamma, balanced, seed)?),
    };
    let n_genuine = y.iter().filter(|v| **v).count();
    Ok(AuthModel {
        model,
        n_features: x.ncols(),
        n_genuine,
        n_impostor: y.len() - n_genuine,
        seed,
    })
}

impl AuthModel {
    /// Match scores for each row of `x`.
    pub fn score(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::validation(
                "features",
                format!("model expects {} features, got {}", self.n_features, x.ncols()),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("features", "non-finite feature value"));
        }
        let scores = match &self.model {
            FittedModel::Knn(m) => m.score(x),
            FittedModel::Lda(m) => m.score(x),
            FittedModel::Lr(m) => m.score(x),
            FittedModel::Nb(m) => m.score(x),
            FittedModel::Rf(m) => m.score(x),
            FittedModel::Svm(m) => m.score(x),
        };
        Ok(scores)
    }
}
