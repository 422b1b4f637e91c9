//! Built-in evaluators and the cross-validation harness.

mod cv;
mod knn;
mod metrics;
mod naive_bayes;
mod svm;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, cross_validate_plan, cross_validate_with, cv_accuracy, CvReport};
pub use metrics::{
    binary_mcc, confusion, gorodkin_mcc, metrics, rank_auc, ConfusionMatrix, MetricReport,
};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn { k: usize },
    GaussianNb,
    LinearSvm { c: f64, epochs: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    #[serde(flatten)]
    pub kind: ClassifierKind,
    pub standardize: bool,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        Self::linear_svm(1.0, 200)
    }
}

impl ClassifierSpec {
    pub fn knn(k: usize) -> Self {
        Self {
            kind: ClassifierKind::Knn { k },
            standardize: false,
        }
    }

    pub fn gaussian_nb() -> Self {
        Self {
            kind: ClassifierKind::GaussianNb,
            standardize: false,
        }
    }

    pub fn linear_svm(c: f64, epochs: usize) -> Self {
        Self {
            kind: ClassifierKind::LinearSvm { c, epochs },
            standardize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ClassifierKind::Knn { k } if k == 0 => {
                Err(Error::InvalidParameter("knn needs k >= 1".into()))
            }
            ClassifierKind::LinearSvm { c, .. } if !(c > 0.0 && c.is_finite()) => Err(
                Error::InvalidParameter(format!("linear_svm needs C > 0, got {c}")),
            ),
            ClassifierKind::LinearSvm { epochs: 0, .. } => {
                Err(Error::InvalidParameter("linear_svm needs epochs >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Predicted classes plus one decision value per class and test sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub predictions: Vec<usize>,
    pub scores: Array2<f64>,
}

/// Trains on `train` and predicts `test`. `seed` only matters for the SVM.
pub fn fit_predict(
    spec: &ClassifierSpec,
    train: &Dataset,
    test: &Dataset,
    seed: u64,
) -> Result<Prediction> {
    spec.validate()?;
    if train.n_genes() != test.n_genes() {
        return Err(Error::DimensionMismatch(format!(
            "train has {} genes, test has {}",
            train.n_genes(),
            test.n_genes()
        )));
    }
    if train.n_classes() != test.n_classes() {
        return Err(Error::DimensionMismatch(format!(
            "train has {} classes, test has {}",
            train.n_classes(),
            test.n_classes()
        )));
    }
    if train.n_samples() == 0 {
        return Err(Error::DimensionMismatch("empty training set".into()));
    }
    let (x_train, x_test) = if spec.standardize {
        let s = Standardizer::fit(train.values());
        (s.transform(train.values()), s.transform(test.values()))
    } else {
        (train.values().clone(), test.values().clone())
    };
    let n_classes = train.n_classes();
    let labels = train.labels();
    let scores = match spec.kind {
        ClassifierKind::Knn { k } => knn::scores(&x_train, labels, &x_test, n_classes, k),
        ClassifierKind::GaussianNb => naive_bayes::scores(&x_train, labels, &x_test, n_classes),
        ClassifierKind::LinearSvm { c, epochs } => {
            svm::scores(&x_train, labels, &x_test, n_classes, c, epochs, seed)
        }
    };
    let predictions = match spec.kind {
        ClassifierKind::Knn { k } => knn::predict(&x_train, labels, &x_test, n_classes, k),
        _ => scores.rows().into_iter().map(|r| argmax(r.iter().copied())).collect(),
    };
    Ok(Prediction {
        predictions,
        scores,
    })
}

/// Index of the largest value; ties resolve to the lowest index.
pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Per-feature z-scoring fitted on training data. Constant features map to 0.
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub(crate) fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Vec<f64> = x.mean_axis(Axis(0)).map_or_else(|| vec![0.0; x.ncols()], |m| m.to_vec());
        let scale = x
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(col, &m)| {
                let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub(crate) fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}
