use ndarray::Array2;

/// Indices of the `k` nearest train rows; equal distances keep the lower
/// train index first.
fn neighbours(x_train: &Array2<f64>, row: ndarray::ArrayView1<f64>, k: usize) -> Vec<usize> {
    let mut dist: Vec<(f64, usize)> = x_train
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let d: f64 = t.iter().zip(row.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, i)
        })
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dist.into_iter().take(k).map(|(_, i)| i).collect()
}

fn votes(
    x_train: &Array2<f64>,
    labels: &[usize],
    x_test: &Array2<f64>,
    n_classes: usize,
    k: usize,
) -> Array2<f64> {
    let k = k.min(x_train.nrows());
    let mut out = Array2::zeros((x_test.nrows(), n_classes));
    for (r, row) in x_test.rows().into_iter().enumerate() {
        for i in neighbours(x_train, row, k) {
            out[[r, labels[i]]] += 1.0;
        }
    }
    out
}

/// Vote fractions per class.
pub(super) fn scores(
    x_train: &Array2<f64>,
    labels: &[usize],
    x_test: &Array2<f64>,
    n_classes: usize,
    k: usize,
) -> Array2<f64> {
    let k_eff = k.min(x_train.nrows()) as f64;
    votes(x_train, labels, x_test, n_classes, k) / k_eff
}

/// Majority vote; tied votes go to the lower class index.
pub(super) fn predict(
    x_train: &Array2<f64>,
    labels: &[usize],
    x_test: &Array2<f64>,
    n_classes: usize,
    k: usize,
) -> Vec<usize> {
    votes(x_train, labels, x_test, n_classes, k)
        .rows()
        .into_iter()
        .map(|r| super::argmax(r.iter().copied()))
        .collect()
}
