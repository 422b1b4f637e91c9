//! Continuous horse herd optimization.
//!
//! Horses are ranked by cost each iteration and split into four age
//! classes. Each class composes its velocity from a different subset of six
//! behaviour terms:
//!
//! | class | terms                                   |
//! |-------|-----------------------------------------|
//! | alpha | grazing, defense                        |
//! | beta  | grazing, hierarchy, sociability, defense |
//! | gamma | all six                                 |
//! | delta | grazing, imitation, roaming             |
//!
//! The position update is `x <- x + v`, clamped to the search box. Behaviour
//! coefficients shrink geometrically by their reduction factor every
//! iteration.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeClass {
    Alpha,
    Beta,
    Gamma,
    Delta,
}

/// Class sizes `(alpha, beta, gamma, delta)` for a herd of `n`.
///
/// Alpha, beta and gamma take `floor(0.1 n)`, `floor(0.2 n)` and
/// `floor(0.3 n)`; delta takes the remainder. When alpha would be empty the
/// best horse is moved into it from delta.
pub fn class_sizes(n: usize) -> (usize, usize, usize, usize) {
    let mut alpha = n / 10;
    let beta = n * 2 / 10;
    let gamma = n * 3 / 10;
    let mut delta = n - alpha - beta - gamma;
    if alpha == 0 && n > 0 {
        alpha = 1;
        delta -= 1;
    }
    (alpha, beta, gamma, delta)
}

/// Maps each horse's rank (0 = best) to its age class.
pub fn assign_age_classes(ranks: &[usize]) -> Vec<AgeClass> {
    let (a, b, g, _) = class_sizes(ranks.len());
    ranks
        .iter()
        .map(|&r| {
            if r < a {
                AgeClass::Alpha
            } else if r < a + b {
                AgeClass::Beta
            } else if r < a + b + g {
                AgeClass::Gamma
            } else {
                AgeClass::Delta
            }
        })
        .collect()
}

/// Inverts a best-first ordering into per-horse ranks.
pub fn ranks_from_order(order: &[usize]) -> Vec<usize> {
    let mut ranks = vec![0; order.len()];
    for (r, &h) in order.iter().enumerate() {
        ranks[h] = r;
    }
    ranks
}

/// One value per behaviour: used both for coefficients and for their
/// reduction factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Behaviors {
    pub grazing: f64,
    pub hierarchy: f64,
    pub sociability: f64,
    pub imitation: f64,
    pub defense: f64,
    pub roaming: f64,
}

impl Behaviors {
    pub const fn uniform(v: f64) -> Self {
        Self {
            grazing: v,
            hierarchy: v,
            sociability: v,
            imitation: v,
            defense: v,
            roaming: v,
        }
    }

    /// Default starting coefficients.
    pub const fn default_coefficients() -> Self {
        Self {
            grazing: 1.5,
            hierarchy: 0.9,
            sociability: 0.2,
            imitation: 0.3,
            defense: 0.2,
            roaming: 0.1,
        }
    }

    pub fn decay(&mut self, omega: &Behaviors) {
        self.grazing *= omega.grazing;
        self.hierarchy *= omega.hierarchy;
        self.sociability *= omega.sociability;
        self.imitation *= omega.imitation;
        self.defense *= omega.defense;
        self.roaming *= omega.roaming;
    }

    fn values(&self) -> [f64; 6] {
        [
            self.grazing,
            self.hierarchy,
            self.sociability,
            self.imitation,
            self.defense,
            self.roaming,
        ]
    }
}

/// Herd-level parameters shared by the continuous and binary searches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HerdParams {
    pub coefficients: Behaviors,
    pub reduction: Behaviors,
    /// Upper grazing bound (u-check).
    pub u_check: f64,
    /// Lower grazing bound (l-check).
    pub l_check: f64,
    /// Fraction of best horses averaged for imitation.
    pub p_frac: f64,
    /// Fraction of worst horses averaged for defense.
    pub q_frac: f64,
}

impl Default for HerdParams {
    fn default() -> Self {
        Self {
            coefficients: Behaviors::default_coefficients(),
            reduction: Behaviors::uniform(0.9),
            u_check: 1.05,
            l_check: 0.95,
            p_frac: 0.1,
            q_frac: 0.2,
        }
    }
}

impl HerdParams {
    pub fn validate(&self) -> Result<()> {
        if self.coefficients.values().iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "behaviour coefficients must be finite and non-negative".into(),
            ));
        }
        if self.reduction.values().iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
            return Err(Error::InvalidParameter(
                "reduction factors must lie in (0, 1]".into(),
            ));
        }
        for (name, f) in [("p_frac", self.p_frac), ("q_frac", self.q_frac)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1), got {f}"
                )));
            }
        }
        Ok(())
    }

    /// Number of best horses averaged for imitation, at least one.
    pub fn p_count(&self, n: usize) -> usize {
        ((self.p_frac * n as f64).floor() as usize).max(1)
    }

    /// Number of worst horses averaged for defense, at least one.
    pub fn q_count(&self, n: usize) -> usize {
        ((self.q_frac * n as f64).floor() as usize).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoaConfig {
    pub n_horses: usize,
    pub max_iter: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub herd: HerdParams,
    pub seed: u64,
}

impl HoaConfig {
    /// Default parameters over `[lower, upper]^dim`.
    pub fn new(dim: usize, lower: f64, upper: f64) -> Self {
        Self {
            n_horses: 35,
            max_iter: 500,
            lower: vec![lower; dim],
            upper: vec![upper; dim],
            herd: HerdParams::default(),
            seed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_horses < 4 {
            return Err(Error::InvalidParameter(format!(
                "need at least 4 horses, got {}",
                self.n_horses
            )));
        }
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(Error::InvalidParameter("bounds must share a non-zero dimension".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidParameter("lower bound exceeds upper bound".into()));
        }
        self.herd.validate()
    }
}

/// Reference points every velocity is computed against.
#[derive(Clone, Debug, PartialEq)]
pub struct HerdGuides {
    /// Best position found so far.
    pub leader: Vec<f64>,
    /// Mean of the whole herd.
    pub mean: Vec<f64>,
    /// Mean of the `pN` best horses.
    pub best_mean: Vec<f64>,
    /// Mean of the `qN` worst horses.
    pub worst_mean: Vec<f64>,
}

fn mean_of<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    let mut n = 0usize;
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
        n += 1;
    }
    acc.iter_mut().for_each(|a| *a /= n.max(1) as f64);
    acc
}

/// Computes herd guides from positions ordered best-first by `order`.
pub fn herd_guides(
    positions: &[Vec<f64>],
    order: &[usize],
    leader: &[f64],
    params: &HerdParams,
) -> HerdGuides {
    let n = positions.len();
    let dim = leader.len();
    let (p, q) = (params.p_count(n), params.q_count(n));
    HerdGuides {
        leader: leader.to_vec(),
        mean: mean_of(positions.iter().map(Vec::as_slice), dim),
        best_mean: mean_of(order[..p].iter().map(|&h| positions[h].as_slice()), dim),
        worst_mean: mean_of(order[n - q..].iter().map(|&h| positions[h].as_slice()), dim),
    }
}

/// Grazing: `g (u + P l) x_prev` elementwise, one draw of `P` per component.
pub fn grazing_term(x_prev: &[f64], g: f64, u_check: f64, l_check: f64, draws: &[f64]) -> Vec<f64> {
    x_prev
        .iter()
        .zip(draws)
        .map(|(x, p)| g * (u_check + p * l_check) * x)
        .collect()
}

/// Hierarchy: `h (leader - x_prev)`.
pub fn hierarchy_term(x_prev: &[f64], leader: &[f64], h: f64) -> Vec<f64> {
    x_prev.iter().zip(leader).map(|(x, b)| h * (b - x)).collect()
}

/// Sociability: `s (herd mean - x_prev)`.
pub fn sociability_term(x_prev: &[f64], mean: &[f64], s: f64) -> Vec<f64> {
    x_prev.iter().zip(mean).map(|(x, m)| s * (m - x)).collect()
}

/// Imitation: `i (mean of best horses - x_prev)`.
pub fn imitation_term(x_prev: &[f64], best_mean: &[f64], i: f64) -> Vec<f64> {
    x_prev.iter().zip(best_mean).map(|(x, m)| i * (m - x)).collect()
}

/// Defense: `-d (mean of worst horses - x_prev)`, a repulsion.
pub fn defense_term(x_prev: &[f64], worst_mean: &[f64], d: f64) -> Vec<f64> {
    x_prev.iter().zip(worst_mean).map(|(x, w)| -d * (w - x)).collect()
}

/// Roaming: `r P x_prev` elementwise.
pub fn roaming_term(x_prev: &[f64], r: f64, draws: &[f64]) -> Vec<f64> {
    x_prev.iter().zip(draws).map(|(x, p)| r * p * x).collect()
}

fn add_into(acc: &mut [f64], term: Vec<f64>) {
    for (a, t) in acc.iter_mut().zip(term) {
        *a += t;
    }
}

fn uniform_draws(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

/// Velocity of one horse given its age class.
pub fn horse_velocity(
    age: AgeClass,
    x_prev: &[f64],
    guides: &HerdGuides,
    coeffs: &Behaviors,
    params: &HerdParams,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let dim = x_prev.len();
    let mut v = grazing_term(
        x_prev,
        coeffs.grazing,
        params.u_check,
        params.l_check,
        &uniform_draws(rng, dim),
    );
    use AgeClass::*;
    if matches!(age, Beta | Gamma) {
        add_into(&mut v, hierarchy_term(x_prev, &guides.leader, coeffs.hierarchy));
        add_into(&mut v, sociability_term(x_prev, &guides.mean, coeffs.sociability));
    }
    if matches!(age, Gamma | Delta) {
        add_into(&mut v, imitation_term(x_prev, &guides.best_mean, coeffs.imitation));
    }
    if matches!(age, Alpha | Beta | Gamma) {
        add_into(&mut v, defense_term(x_prev, &guides.worst_mean, coeffs.defense));
    }
    if matches!(age, Gamma | Delta) {
        add_into(&mut v, roaming_term(x_prev, coeffs.roaming, &uniform_draws(rng, dim)));
    }
    v
}

/// Per-horse random stream for one iteration.
pub fn horse_rng(seed: u64, iteration: usize, horse: usize) -> StreamRng {
    rng::stream(seed, &[rng::label_of("horse"), iteration as u64, horse as u64])
}

/// Herd snapshot: positions with their costs (the global matrix), velocities,
/// age classes and the incumbent.
#[derive(Clone, Debug, PartialEq)]
pub struct HerdState {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    pub age_class: Vec<AgeClass>,
    pub coeffs: Behaviors,
    pub best_position: Vec<f64>,
    pub best_cost: f64,
}

impl HerdState {
    /// Horse indices sorted by ascending cost; ties keep index order.
    pub fn order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.costs.len()).collect();
        order.sort_by(|&a, &b| self.costs[a].total_cmp(&self.costs[b]));
        order
    }

    /// Computes this iteration's velocities (ages must be assigned).
    pub fn velocity_update(&mut self, params: &HerdParams, seed: u64, iteration: usize) {
        let order = self.order();
        let guides = herd_guides(&self.positions, &order, &self.best_position, params);
        let coeffs = self.coeffs;
        self.velocities = self
            .positions
            .par_iter()
            .zip(&self.age_class)
            .enumerate()
            .map(|(h, (x, &age))| {
                let mut rng = horse_rng(seed, iteration, h);
                horse_velocity(age, x, &guides, &coeffs, params, &mut rng)
            })
            .collect();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoaOutcome {
    pub best_position: Vec<f64>,
    pub best_cost: f64,
    /// Incumbent cost after initialization (entry 0) and after each iteration.
    pub trace: Vec<f64>,
}

/// Uniform random starting positions inside the box, as used by [`optimize`].
pub fn initial_herd(config: &HoaConfig) -> Vec<Vec<f64>> {
    let mut init = rng::stream(config.seed, &[rng::label_of("hoa_init")]);
    (0..config.n_horses)
        .map(|_| {
            (0..config.dim())
                .map(|j| config.lower[j] + init.random::<f64>() * (config.upper[j] - config.lower[j]))
                .collect()
        })
        .collect()
}

/// Minimizes `cost_fn` over the configured box.
pub fn optimize<F>(cost_fn: F, config: &HoaConfig) -> Result<HoaOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let n = config.n_horses;
    let dim = config.dim();
    let positions = initial_herd(config);
    let costs: Vec<f64> = positions.par_iter().map(|x| cost_fn(x)).collect();
    let best = (0..n).fold(0, |b, i| if costs[i] < costs[b] { i } else { b });
    let mut state = HerdState {
        best_position: positions[best].clone(),
        best_cost: costs[best],
        velocities: vec![vec![0.0; dim]; n],
        age_class: vec![AgeClass::Delta; n],
        coeffs: config.herd.coefficients,
        positions,
        costs,
    };
    let mut trace = Vec::with_capacity(config.max_iter + 1);
    trace.push(state.best_cost);

    for iteration in 1..=config.max_iter {
        state.age_class = assign_age_classes(&ranks_from_order(&state.order()));
        state.coeffs.decay(&config.herd.reduction);
        state.velocity_update(&config.herd, config.seed, iteration);
        for (x, v) in state.positions.iter_mut().zip(&state.velocities) {
            for (j, (xj, vj)) in x.iter_mut().zip(v).enumerate() {
                *xj = (*xj + vj).clamp(config.lower[j], config.upper[j]);
            }
        }
        state.costs = state.positions.par_iter().map(|x| cost_fn(x)).collect();
        for h in 0..n {
            if state.costs[h] < state.best_cost {
                state.best_cost = state.costs[h];
                state.best_position = state.positions[h].clone();
            }
        }
        trace.push(state.best_cost);
    }
    Ok(HoaOutcome {
        best_position: state.best_position,
        best_cost: state.best_cost,
        trace,
    })
}

pub mod benchmarks {
    pub fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    pub fn rastrigin(x: &[f64]) -> f64 {
        10.0 * x.len() as f64
            + x.iter()
                .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
                .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_size_examples() {
        assert_eq!(class_sizes(10), (1, 2, 3, 4));
        assert_eq!(class_sizes(35), (3, 7, 10, 15));
        assert_eq!(class_sizes(4), (1, 0, 1, 2));
    }

    #[test]
    fn ages_follow_rank() {
        let ranks: Vec<usize> = (0..10).rev().collect();
        let ages = assign_age_classes(&ranks);
        assert_eq!(ages[9], AgeClass::Alpha);
        assert_eq!(ages[0], AgeClass::Delta);
        assert_eq!(ages.iter().filter(|&&a| a == AgeClass::Gamma).count(), 3);
    }

    #[test]
    fn grazing_examples() {
        assert_eq!(grazing_term(&[0.0, 0.0], 1.5, 1.05, 0.95, &[0.3, 0.9]), vec![0.0, 0.0]);
        let g = grazing_term(&[1.0], 1.5, 1.05, 0.95, &[0.0]);
        assert!((g[0] - 1.575).abs() < 1e-15);
        let mut c = Behaviors::default_coefficients();
        c.decay(&Behaviors::uniform(0.9));
        c.decay(&Behaviors::uniform(0.9));
        assert!((c.grazing - 1.215).abs() < 1e-12);
    }

    #[test]
    fn pull_and_push_terms() {
        assert_eq!(hierarchy_term(&[2.0], &[2.0], 0.7), vec![0.0]);
        assert_eq!(hierarchy_term(&[0.0], &[2.0], 1.0), vec![2.0]);
        assert_eq!(sociability_term(&[1.0, 1.0], &[1.0, 1.0], 0.3), vec![0.0, 0.0]);
        assert_eq!(imitation_term(&[0.5], &[0.5], 0.3), vec![0.0]);
        assert_eq!(defense_term(&[3.0], &[3.0], 0.2), vec![0.0]);
        assert_eq!(defense_term(&[0.0], &[4.0], 1.0), vec![-4.0]);
        assert_eq!(roaming_term(&[0.0], 0.5, &[0.7]), vec![0.0]);
        assert_eq!(roaming_term(&[3.0], 0.0, &[0.7]), vec![0.0]);
    }

    #[test]
    fn guide_counts() {
        let p = HerdParams::default();
        assert_eq!(p.p_count(10), 1);
        assert_eq!(p.p_count(35), 3);
        assert_eq!(p.q_count(35), 7);
        let positions = [vec![0.0, 0.0], vec![2.0, 2.0]];
        let mean = mean_of(positions.iter().map(Vec::as_slice), 2);
        assert_eq!(mean, vec![1.0, 1.0]);
    }

    fn single_class_guides() -> HerdGuides {
        HerdGuides {
            leader: vec![2.0, -1.0],
            mean: vec![0.5, 0.5],
            best_mean: vec![1.5, -0.5],
            worst_mean: vec![-2.0, 3.0],
        }
    }

    #[test]
    fn zero_coefficients_give_zero_velocity() {
        let params = HerdParams {
            coefficients: Behaviors::uniform(0.0),
            ..HerdParams::default()
        };
        let guides = single_class_guides();
        for age in [AgeClass::Alpha, AgeClass::Beta, AgeClass::Gamma, AgeClass::Delta] {
            let v = horse_velocity(age, &[0.3, 0.8], &guides, &params.coefficients, &params, &mut horse_rng(1, 1, 0));
            assert_eq!(v, vec![0.0, 0.0]);
        }
    }

    // Recomputes Eq. 2 term by term with the same random stream.
    #[test]
    fn velocity_matches_hand_sum() {
        let params = HerdParams::default();
        let c = Behaviors {
            grazing: 0.5,
            hierarchy: 0.4,
            sociability: 0.3,
            imitation: 0.2,
            defense: 0.1,
            roaming: 0.6,
        };
        let g = single_class_guides();
        let x = [0.3, -0.7];
        for (h, age) in [AgeClass::Alpha, AgeClass::Beta, AgeClass::Gamma, AgeClass::Delta]
            .into_iter()
            .enumerate()
        {
            let v = horse_velocity(age, &x, &g, &c, &params, &mut horse_rng(9, 2, h));
            let mut rng = horse_rng(9, 2, h);
            let graze_p: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
            let roam_p: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
            for j in 0..2 {
                let gz = c.grazing * (1.05 + graze_p[j] * 0.95) * x[j];
                let hi = c.hierarchy * (g.leader[j] - x[j]);
                let so = c.sociability * (g.mean[j] - x[j]);
                let im = c.imitation * (g.best_mean[j] - x[j]);
                let de = -c.defense * (g.worst_mean[j] - x[j]);
                let ro = c.roaming * roam_p[j] * x[j];
                let expected = match age {
                    AgeClass::Alpha => gz + de,
                    AgeClass::Beta => gz + hi + so + de,
                    AgeClass::Gamma => gz + hi + so + im + de + ro,
                    AgeClass::Delta => gz + im + ro,
                };
                assert!((v[j] - expected).abs() < 1e-12, "{age:?} component {j}");
            }
        }
    }

    #[test]
    fn constant_cost_is_flat() {
        let mut cfg = HoaConfig::new(3, -1.0, 1.0);
        cfg.max_iter = 5;
        let out = optimize(|_| 4.0, &cfg).unwrap();
        assert!(out.trace.iter().all(|&c| c == 4.0));
    }

    #[test]
    fn still_herd_stays_put() {
        let mut cfg = HoaConfig::new(2, -5.0, 5.0);
        cfg.max_iter = 3;
        cfg.herd.coefficients = Behaviors::uniform(0.0);
        cfg.herd.reduction = Behaviors::uniform(1.0);
        let out = optimize(benchmarks::sphere, &cfg).unwrap();
        assert!(out.trace.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn too_small_herd_rejected() {
        let mut cfg = HoaConfig::new(2, 0.0, 1.0);
        cfg.n_horses = 3;
        assert!(optimize(benchmarks::sphere, &cfg).is_err());
    }

    #[test]
    fn runs_replay() {
        let mut cfg = HoaConfig::new(4, -5.12, 5.12);
        cfg.max_iter = 40;
        cfg.seed = 3;
        let a = optimize(benchmarks::rastrigin, &cfg).unwrap();
        let b = optimize(benchmarks::rastrigin, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
