//! Linear SVM trained by stochastic subgradient descent on the hinge loss.
//!
//! Each binary problem minimizes `(lambda/2)|w|^2 + mean(hinge)` with
//! `lambda = 1/C` and step `1/(lambda t)`; a constant input of 1 carries the
//! bias. Two-class problems train a single separator (class 1 positive);
//! more classes train one-vs-rest separators.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;

use crate::rng;

fn train_binary(x: &Array2<f64>, y: &[f64], c: f64, epochs: usize, seed: u64) -> Array1<f64> {
    let (n, p) = x.dim();
    let x = x.as_standard_layout();
    let x = x.as_slice().expect("standard layout");
    let lambda = 1.0 / c;
    // w = scale * v, so the per-step shrink is O(1); the bias is v[p].
    let mut v = vec![0.0; p + 1];
    let mut scale = 1.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(seed, &[rng::label_of("svm")]);
    let mut t = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let row = &x[i * p..(i + 1) * p];
            let dot: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + v[p];
            let margin = y[i] * scale * dot;
            scale *= 1.0 - eta * lambda;
            if scale == 0.0 {
                v.iter_mut().for_each(|vj| *vj = 0.0);
                scale = 1.0;
            }
            if margin < 1.0 {
                let step = eta * y[i] / scale;
                for (vj, xj) in v.iter_mut().zip(row) {
                    *vj += step * xj;
                }
                v[p] += step;
            }
        }
    }
    Array1::from_iter(v.into_iter().map(|vj| vj * scale))
}

fn decision(x: &Array2<f64>, w: &Array1<f64>) -> Array1<f64> {
    let p = x.ncols();
    x.dot(&w.slice(ndarray::s![..p])) + w[p]
}

/// Margins per class.
pub(super) fn scores(
    x_train: &Array2<f64>,
    labels: &[usize],
    x_test: &Array2<f64>,
    n_classes: usize,
    c: f64,
    epochs: usize,
    seed: u64,
) -> Array2<f64> {
    let mut out = Array2::zeros((x_test.nrows(), n_classes));
    if n_classes == 2 {
        let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let w = train_binary(x_train, &y, c, epochs, rng::mix64(seed, 1));
        let m = decision(x_test, &w);
        out.column_mut(1).assign(&m);
        out.column_mut(0).assign(&(-&m));
        return out;
    }
    for k in 0..n_classes {
        let y: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
        let w = train_binary(x_train, &y, c, epochs, rng::mix64(seed, k as u64));
        out.column_mut(k).assign(&decision(x_test, &w));
    }
    out
}
