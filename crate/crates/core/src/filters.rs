//! Discrete mutual information and MRMR ranking.
//!
//! All information quantities are plug-in estimates in bits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DiscretizedDataset;
use crate::error::{Error, Result};

/// Mutual information in bits.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MIValue(pub f64);

impl MIValue {
    pub fn bits(self) -> f64 {
        self.0
    }
}

fn n_symbols(x: &[usize]) -> usize {
    x.iter().copied().max().map_or(0, |m| m + 1)
}

/// Empirical Shannon entropy of a discrete column, in bits.
pub fn entropy(x: &[usize]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut counts = vec![0usize; n_symbols(x)];
    for &a in x {
        counts[a] += 1;
    }
    let n = x.len() as f64;
    counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Plug-in mutual information from the empirical joint distribution.
pub fn mutual_information(x: &[usize], y: &[usize]) -> Result<MIValue> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(MIValue(mi_unchecked(x, y)))
}

fn mi_unchecked(x: &[usize], y: &[usize]) -> f64 {
    let (nx, ny) = (n_symbols(x), n_symbols(y));
    let mut joint = vec![0usize; nx * ny];
    let mut px = vec![0usize; nx];
    let mut py = vec![0usize; ny];
    for (&a, &b) in x.iter().zip(y) {
        joint[a * ny + b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    let n = x.len() as f64;
    let mut mi = 0.0;
    for a in 0..nx {
        for b in 0..ny {
            let c = joint[a * ny + b];
            if c == 0 {
                continue;
            }
            // P(a,b) log2(P(a,b) / (P(a) P(b))) with counts: n c / (ca cb)
            let ratio = (c as f64 * n) / (px[a] as f64 * py[b] as f64);
            mi += (c as f64 / n) * ratio.log2();
        }
    }
    // Rounding can leave tiny negatives for independent joints.
    mi.max(0.0)
}

/// Mean relevance of a gene set to the labels.
pub fn relevance(genes: &[&[usize]], labels: &[usize]) -> Result<f64> {
    if genes.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut total = 0.0;
    for g in genes {
        total += mutual_information(g, labels)?.bits();
    }
    Ok(total / genes.len() as f64)
}

/// Mean pairwise MI over all ordered pairs of the set, diagonal included.
pub fn redundancy(genes: &[&[usize]]) -> Result<f64> {
    if genes.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut total = 0.0;
    for a in genes {
        for b in genes {
            total += mutual_information(a, b)?.bits();
        }
    }
    Ok(total / (genes.len() * genes.len()) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MrmrRanking {
    /// Gene indices in selection order.
    pub order: Vec<usize>,
    /// Criterion value of each gene when it was picked.
    pub scores: Vec<f64>,
}

/// Greedy MRMR (difference form).
///
/// The first gene maximizes `MI(x, C)`; each later step picks the unselected
/// gene maximizing `MI(x_j, C) - mean_{s in S} MI(x_j, x_s)`. Ties go to
/// the lower column index.
pub fn mrmr_select(d: &DiscretizedDataset, labels: &[usize], m: usize) -> Result<MrmrRanking> {
    let n_genes = d.n_genes();
    if m == 0 || m > n_genes {
        return Err(Error::BadM { m, n_genes });
    }
    if d.n_samples() != labels.len() {
        return Err(Error::LengthMismatch {
            left: d.n_samples(),
            right: labels.len(),
        });
    }
    let relevance: Vec<f64> = (0..n_genes)
        .into_par_iter()
        .map(|j| mi_unchecked(d.column(j), labels))
        .collect();
    let mut redundancy_sum = vec![0.0; n_genes];
    let mut selected = vec![false; n_genes];
    let mut order = Vec::with_capacity(m);
    let mut scores = Vec::with_capacity(m);

    for step in 0..m {
        let denom = step.max(1) as f64;
        let (best, score) = (0..n_genes)
            .filter(|&j| !selected[j])
            .map(|j| (j, relevance[j] - redundancy_sum[j] / denom))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, cand| {
                if cand.1 > acc.1 {
                    cand
                } else {
                    acc
                }
            });
        selected[best] = true;
        order.push(best);
        scores.push(score);
        if step + 1 < m {
            let last = d.column(best);
            let updates: Vec<(usize, f64)> = (0..n_genes)
                .into_par_iter()
                .filter(|&j| !selected[j])
                .map(|j| (j, mi_unchecked(d.column(j), last)))
                .collect();
            for (j, mi) in updates {
                redundancy_sum[j] += mi;
            }
        }
    }
    Ok(MrmrRanking { order, scores })
}
