use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are actual classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if counts.iter().any(|r| r.len() != c) {
            return Err(Error::BadShape("confusion matrix must be square".into()));
        }
        Ok(Self { counts })
    }

    /// Binary matrix with class 1 as the positive class.
    pub fn binary(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self {
            counts: vec![vec![tn, fp], vec![fn_, tp]],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual][predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn tp(&self) -> u64 {
        self.counts[1][1]
    }

    pub fn tn(&self) -> u64 {
        self.counts[0][0]
    }

    pub fn fp(&self) -> u64 {
        self.counts[0][1]
    }

    pub fn fn_(&self) -> u64 {
        self.counts[1][0]
    }
}

pub fn confusion(actual: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
        });
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&a, &p) in actual.iter().zip(predicted) {
        if a >= n_classes || p >= n_classes {
            return Err(Error::DimensionMismatch(format!(
                "class index outside [0, {n_classes})"
            )));
        }
        counts[a][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Classification quality summary. A metric whose denominator vanishes is
/// reported as 0 and its name listed in `undefined`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub f_measure: f64,
    pub mcc: f64,
    pub auc: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

impl MetricReport {
    fn flag(&mut self, name: &str) {
        if !self.undefined.iter().any(|u| u == name) {
            self.undefined.push(name.to_string());
        }
    }

    /// Unweighted mean of several reports; undefined flags are unioned.
    pub fn mean(reports: &[MetricReport]) -> MetricReport {
        let n = reports.len().max(1) as f64;
        let mut out = MetricReport {
            accuracy: reports.iter().map(|r| r.accuracy).sum::<f64>() / n,
            f_measure: reports.iter().map(|r| r.f_measure).sum::<f64>() / n,
            mcc: reports.iter().map(|r| r.mcc).sum::<f64>() / n,
            auc: reports.iter().map(|r| r.auc).sum::<f64>() / n,
            undefined: Vec::new(),
        };
        for r in reports {
            for u in &r.undefined {
                out.flag(u);
            }
        }
        out
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

/// Accuracy, F-measure, MCC and AUC.
///
/// Binary problems treat class 1 as positive. With more classes the
/// F-measure is macro-averaged, MCC is Gorodkin's R_K statistic, and AUC
/// is the macro one-vs-rest average over classes that have both positive
/// and negative samples. `scores` holds one column per class.
pub fn metrics(cm: &ConfusionMatrix, scores: &Array2<f64>, actual: &[usize]) -> Result<MetricReport> {
    let c = cm.n_classes();
    if cm.total() as usize != actual.len() {
        return Err(Error::LengthMismatch {
            left: cm.total() as usize,
            right: actual.len(),
        });
    }
    if scores.nrows() != actual.len() || (!actual.is_empty() && scores.ncols() != c) {
        return Err(Error::DimensionMismatch(format!(
            "scores are {:?}, expected ({}, {c})",
            scores.dim(),
            actual.len()
        )));
    }
    let mut report = MetricReport::default();

    match ratio(cm.trace() as f64, cm.total() as f64) {
        Some(a) => report.accuracy = a,
        None => report.flag("accuracy"),
    }

    let (f, f_defined) = if c == 2 {
        binary_f(cm.tp(), cm.fp(), cm.fn_())
    } else {
        let mut all_defined = true;
        let mut sum = 0.0;
        for k in 0..c {
            let tp = cm.get(k, k);
            let fp: u64 = (0..c).filter(|&a| a != k).map(|a| cm.get(a, k)).sum();
            let fn_: u64 = (0..c).filter(|&p| p != k).map(|p| cm.get(k, p)).sum();
            let (fk, ok) = binary_f(tp, fp, fn_);
            sum += fk;
            all_defined &= ok;
        }
        (sum / c.max(1) as f64, all_defined)
    };
    report.f_measure = f;
    if !f_defined {
        report.flag("f_measure");
    }

    let mcc = if c == 2 {
        binary_mcc(cm)
    } else {
        gorodkin_mcc(cm)
    };
    match mcc {
        Some(m) => report.mcc = m,
        None => report.flag("mcc"),
    }

    let auc = if c == 2 {
        rank_auc(scores.column(1), actual, 1)
    } else {
        let per_class: Vec<f64> = (0..c)
            .filter_map(|k| rank_auc(scores.column(k), actual, k))
            .collect();
        (!per_class.is_empty()).then(|| per_class.iter().sum::<f64>() / per_class.len() as f64)
    };
    match auc {
        Some(a) => report.auc = a,
        None => report.flag("auc"),
    }
    Ok(report)
}

fn binary_f(tp: u64, fp: u64, fn_: u64) -> (f64, bool) {
    let precision = ratio(tp as f64, (tp + fp) as f64);
    let recall = ratio(tp as f64, (tp + fn_) as f64);
    match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => (2.0 * p * r / (p + r), true),
        _ => (0.0, false),
    }
}

/// Product-form Matthews coefficient.
pub fn binary_mcc(cm: &ConfusionMatrix) -> Option<f64> {
    let (tp, tn, fp, fn_) = (
        cm.tp() as f64,
        cm.tn() as f64,
        cm.fp() as f64,
        cm.fn_() as f64,
    );
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    ratio(tn * tp - fn_ * fp, den)
}

/// Gorodkin's generalization of MCC to K classes.
pub fn gorodkin_mcc(cm: &ConfusionMatrix) -> Option<f64> {
    let k = cm.n_classes();
    let s = cm.total() as f64;
    let correct = cm.trace() as f64;
    let predicted: Vec<f64> = (0..k)
        .map(|j| (0..k).map(|i| cm.get(i, j)).sum::<u64>() as f64)
        .collect();
    let true_counts: Vec<f64> = (0..k)
        .map(|i| cm.counts[i].iter().sum::<u64>() as f64)
        .collect();
    let pt: f64 = predicted.iter().zip(&true_counts).map(|(p, t)| p * t).sum();
    let pp: f64 = predicted.iter().map(|p| p * p).sum();
    let tt: f64 = true_counts.iter().map(|t| t * t).sum();
    let den = ((s * s - pp) * (s * s - tt)).sqrt();
    ratio(correct * s - pt, den)
}

/// Mann-Whitney AUC of `positive` against the rest, with average ranks for
/// tied scores. `None` when either side is empty.
pub fn rank_auc(scores: ArrayView1<f64>, actual: &[usize], positive: usize) -> Option<f64> {
    let n = actual.len();
    let n_pos = actual.iter().filter(|&&a| a == positive).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += avg_rank * idx[i..=j].iter().filter(|&&s| actual[s] == positive).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Some((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn))
}
