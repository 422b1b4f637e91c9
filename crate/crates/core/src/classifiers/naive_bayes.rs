use std::f64::consts::PI;

use ndarray::Array2;

const VAR_FLOOR: f64 = 1e-9;

/// Posterior class probabilities under independent per-feature Gaussians.
/// Classes absent from training get probability 0.
pub(super) fn scores(
    x_train: &Array2<f64>,
    labels: &[usize],
    x_test: &Array2<f64>,
    n_classes: usize,
) -> Array2<f64> {
    let p = x_train.ncols();
    let n = labels.len() as f64;
    let mut counts = vec![0usize; n_classes];
    let mut mean = Array2::<f64>::zeros((n_classes, p));
    for (row, &l) in x_train.rows().into_iter().zip(labels) {
        counts[l] += 1;
        for (m, v) in mean.row_mut(l).iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for c in 0..n_classes {
        if counts[c] > 0 {
            mean.row_mut(c).mapv_inplace(|m| m / counts[c] as f64);
        }
    }
    let mut var = Array2::<f64>::zeros((n_classes, p));
    for (row, &l) in x_train.rows().into_iter().zip(labels) {
        for j in 0..p {
            var[[l, j]] += (row[j] - mean[[l, j]]).powi(2);
        }
    }
    for c in 0..n_classes {
        for j in 0..p {
            var[[c, j]] = (var[[c, j]] / counts[c].max(1) as f64).max(VAR_FLOOR);
        }
    }

    let mut out = Array2::zeros((x_test.nrows(), n_classes));
    for (r, row) in x_test.rows().into_iter().enumerate() {
        let log_joint: Vec<f64> = (0..n_classes)
            .map(|c| {
                if counts[c] == 0 {
                    return f64::NEG_INFINITY;
                }
                let mut lj = (counts[c] as f64 / n).ln();
                for j in 0..p {
                    let v = var[[c, j]];
                    lj -= 0.5 * ((2.0 * PI * v).ln() + (row[j] - mean[[c, j]]).powi(2) / v);
                }
                lj
            })
            .collect();
        let max = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = log_joint.iter().map(|l| (l - max).exp()).sum();
        for (c, l) in log_joint.iter().enumerate() {
            out[[r, c]] = (l - max).exp() / total;
        }
    }
    out
}
