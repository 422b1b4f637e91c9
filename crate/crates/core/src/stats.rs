//! Friedman rank test and pairwise post-hoc z comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{chi_square_sf, normal_two_sided_p};

const RANK_SUM_TOL: f64 = 1e-6;

/// Ranks of one dataset's scores (1 = best), ties sharing the mean of the
/// tied positions.
pub fn rank_row(scores: &[f64], higher_is_better: bool) -> Vec<f64> {
    let k = scores.len();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| {
        let ord = scores[a].total_cmp(&scores[b]);
        if higher_is_better {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut ranks = vec![0.0; k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Mean rank per algorithm. `scores` has one row per dataset and one
/// column per algorithm.
pub fn average_ranks(scores: &[Vec<f64>], higher_is_better: bool) -> Result<Vec<f64>> {
    let n = scores.len();
    let k = scores.first().map_or(0, Vec::len);
    if n == 0 || k < 2 {
        return Err(Error::BadShape(format!(
            "need at least 1 dataset and 2 algorithms, got {n} x {k}"
        )));
    }
    if let Some(r) = scores.iter().position(|row| row.len() != k) {
        return Err(Error::BadShape(format!(
            "dataset row {r} has {} scores, expected {k}",
            scores[r].len()
        )));
    }
    if scores.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::BadShape("scores contain NaN".into()));
    }
    let mut avg = vec![0.0; k];
    for row in scores {
        for (a, r) in avg.iter_mut().zip(rank_row(row, higher_is_better)) {
            *a += r;
        }
    }
    avg.iter_mut().for_each(|a| *a /= n as f64);
    Ok(avg)
}

/// Average ranks with the scores they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankMatrix {
    /// One row per dataset, one column per algorithm.
    pub scores: Vec<Vec<f64>>,
    pub higher_is_better: bool,
    pub avg_ranks: Vec<f64>,
}

impl RankMatrix {
    pub fn new(scores: Vec<Vec<f64>>, higher_is_better: bool) -> Result<Self> {
        let avg_ranks = average_ranks(&scores, higher_is_better)?;
        Ok(Self {
            scores,
            higher_is_better,
            avg_ranks,
        })
    }

    pub fn k(&self) -> usize {
        self.avg_ranks.len()
    }

    pub fn n(&self) -> usize {
        self.scores.len()
    }
}

fn check_ranks(avg_ranks: &[f64]) -> Result<()> {
    let k = avg_ranks.len() as f64;
    if avg_ranks.len() < 2 {
        return Err(Error::BadShape("need at least 2 algorithms".into()));
    }
    let sum: f64 = avg_ranks.iter().sum();
    let expected = k * (k + 1.0) / 2.0;
    if (sum - expected).abs() > RANK_SUM_TOL || avg_ranks.iter().any(|r| !r.is_finite()) {
        return Err(Error::InconsistentRanks { sum, expected });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub chi_square: f64,
    pub df: usize,
    pub p_value: f64,
}

/// `chi2 = 12n / (k(k+1)) * sum(R_j^2) - 3n(k+1)` with `k - 1` degrees of
/// freedom, from the average ranks over `n` datasets.
pub fn friedman_statistic(avg_ranks: &[f64], n: usize) -> Result<FriedmanResult> {
    check_ranks(avg_ranks)?;
    if n == 0 {
        return Err(Error::BadShape("need at least one dataset".into()));
    }
    let k = avg_ranks.len() as f64;
    let n_f = n as f64;
    let sum_sq: f64 = avg_ranks.iter().map(|r| r * r).sum();
    let chi_square = 12.0 * n_f / (k * (k + 1.0)) * sum_sq - 3.0 * n_f * (k + 1.0);
    let df = avg_ranks.len() - 1;
    Ok(FriedmanResult {
        chi_square,
        df,
        p_value: chi_square_sf(chi_square, df as f64),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub first: usize,
    pub second: usize,
    pub z: f64,
    pub p_value: f64,
    /// `p < 0.05`
    pub reject: bool,
}

pub const POSTHOC_ALPHA: f64 = 0.05;

/// `z = (R_i - R_j) / sqrt(k(k+1) / (6n))` for one pair.
pub fn pairwise_z(avg_ranks: &[f64], n: usize, first: usize, second: usize) -> PairwiseComparison {
    let k = avg_ranks.len() as f64;
    let se = (k * (k + 1.0) / (6.0 * n as f64)).sqrt();
    let z = (avg_ranks[first] - avg_ranks[second]) / se;
    let p_value = normal_two_sided_p(z);
    PairwiseComparison {
        first,
        second,
        z,
        p_value,
        reject: p_value < POSTHOC_ALPHA,
    }
}

/// All pairs `i < j`.
pub fn posthoc_z(avg_ranks: &[f64], n: usize) -> Result<Vec<PairwiseComparison>> {
    check_ranks(avg_ranks)?;
    if n == 0 {
        return Err(Error::BadShape("need at least one dataset".into()));
    }
    let k = avg_ranks.len();
    Ok((0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .map(|(i, j)| pairwise_z(avg_ranks, n, i, j))
        .collect())
}

/// Comparisons of one control algorithm against every other.
pub fn posthoc_vs_control(avg_ranks: &[f64], n: usize, control: usize) -> Result<Vec<PairwiseComparison>> {
    check_ranks(avg_ranks)?;
    if control >= avg_ranks.len() {
        return Err(Error::BadShape(format!("control index {control} out of range")));
    }
    Ok((0..avg_ranks.len())
        .filter(|&j| j != control)
        .map(|j| pairwise_z(avg_ranks, n, control, j))
        .collect())
}
