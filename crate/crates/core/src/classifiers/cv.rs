use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{confusion, fit_predict, metrics, ClassifierSpec, MetricReport, Prediction};
use crate::dataset::{stratified_k_fold, Dataset, FoldPlan};
use crate::error::Result;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub mean: MetricReport,
    pub folds: Vec<MetricReport>,
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    rng::derive(seed, &[rng::label_of("cv_fold"), fold as u64])
}

/// Stratified k-fold cross-validation of a built-in classifier.
pub fn cross_validate(d: &Dataset, spec: &ClassifierSpec, k: usize, seed: u64) -> Result<CvReport> {
    let plan = stratified_k_fold(d, k, seed)?;
    cross_validate_plan(d, spec, &plan)
}

/// Cross-validation over an existing fold plan. Fold classifiers are seeded
/// from `(plan.seed, fold index)`.
pub fn cross_validate_plan(d: &Dataset, spec: &ClassifierSpec, plan: &FoldPlan) -> Result<CvReport> {
    spec.validate()?;
    cross_validate_with(d, plan, |train, test, seed| fit_predict(spec, train, test, seed))
}

/// Cross-validation with an arbitrary predictor. Folds may run
/// concurrently; reports come back in fold order.
pub fn cross_validate_with<F>(d: &Dataset, plan: &FoldPlan, predictor: F) -> Result<CvReport>
where
    F: Fn(&Dataset, &Dataset, u64) -> Result<Prediction> + Sync,
{
    let folds = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let train = d.take_rows(&fold.train);
            let test = d.take_rows(&fold.test);
            let p = predictor(&train, &test, fold_seed(plan.seed, f))?;
            let cm = confusion(test.labels(), &p.predictions, d.n_classes())?;
            metrics(&cm, &p.scores, test.labels())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport {
        mean: MetricReport::mean(&folds),
        folds,
    })
}

/// Mean fold accuracy only; the fitness hot path.
pub fn cv_accuracy(d: &Dataset, spec: &ClassifierSpec, plan: &FoldPlan) -> Result<f64> {
    let accs = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let train = d.take_rows(&fold.train);
            let test = d.take_rows(&fold.test);
            let p = fit_predict(spec, &train, &test, fold_seed(plan.seed, f))?;
            let correct = p
                .predictions
                .iter()
                .zip(test.labels())
                .filter(|(a, b)| a == b)
                .count();
            Ok(correct as f64 / test.n_samples().max(1) as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(accs.iter().sum::<f64>() / accs.len() as f64)
}
