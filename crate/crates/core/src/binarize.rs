//! Transfer functions and the velocity-to-bit update rules.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::GeneMask;
use crate::error::{Error, Result};
use crate::special::erf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferFunctionKind {
    S1,
    S2,
    S3,
    S4,
    V1,
    V2,
    V3,
    V4,
    X,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    S,
    V,
    X,
}

impl TransferFunctionKind {
    pub const ALL: [TransferFunctionKind; 9] = [
        Self::S1,
        Self::S2,
        Self::S3,
        Self::S4,
        Self::V1,
        Self::V2,
        Self::V3,
        Self::V4,
        Self::X,
    ];

    pub fn family(self) -> Family {
        use TransferFunctionKind::*;
        match self {
            S1 | S2 | S3 | S4 => Family::S,
            V1 | V2 | V3 | V4 => Family::V,
            X => Family::X,
        }
    }

    pub fn tag(self) -> &'static str {
        use TransferFunctionKind::*;
        match self {
            S1 => "s1",
            S2 => "s2",
            S3 => "s3",
            S4 => "s4",
            V1 => "v1",
            V2 => "v2",
            V3 => "v3",
            V4 => "v4",
            X => "x",
        }
    }
}

impl std::fmt::Display for TransferFunctionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for TransferFunctionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown transfer function {s:?}; expected one of s1|s2|s3|s4|v1|v2|v3|v4|x"
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TfValue {
    Probability(f64),
    /// The X-shaped pair `(W1, W2)`.
    Pair { w1: f64, w2: f64 },
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `W1(v) = 1 / (1 + e^-v)`.
pub fn w1(v: f64) -> f64 {
    logistic(v)
}

/// `W2(v) = 1 / (1 + e^v)`.
pub fn w2(v: f64) -> f64 {
    1.0 / (1.0 + v.exp())
}

/// Probability for the S and V families. For `X` this is `W1`.
pub fn probability(kind: TransferFunctionKind, v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::NonFiniteVelocity(v));
    }
    use TransferFunctionKind::*;
    Ok(match kind {
        S1 => logistic(2.0 * v),
        S2 => logistic(v),
        S3 => logistic(v / 2.0),
        S4 => logistic(v / 3.0),
        V1 => erf(PI.sqrt() / 2.0 * v).abs(),
        V2 => v.tanh().abs(),
        V3 => (v / (1.0 + v * v).sqrt()).abs(),
        V4 => (FRAC_2_PI * (FRAC_PI_2 * v).atan()).abs(),
        X => w1(v),
    })
}

pub fn tf_value(kind: TransferFunctionKind, v: f64) -> Result<TfValue> {
    if kind == TransferFunctionKind::X {
        if !v.is_finite() {
            return Err(Error::NonFiniteVelocity(v));
        }
        Ok(TfValue::Pair { w1: w1(v), w2: w2(v) })
    } else {
        probability(kind, v).map(TfValue::Probability)
    }
}

fn check_lengths(bits: &GeneMask, velocities: &[f64]) -> Result<()> {
    if bits.len() != velocities.len() {
        return Err(Error::LengthMismatch {
            left: bits.len(),
            right: velocities.len(),
        });
    }
    Ok(())
}

/// Set rule: bit `j` becomes 1 iff `rand < T(v_j)`.
pub fn binarize_s(
    kind: TransferFunctionKind,
    bits_prev: &GeneMask,
    velocities: &[f64],
    rng: &mut impl Rng,
) -> Result<GeneMask> {
    check_lengths(bits_prev, velocities)?;
    velocities
        .iter()
        .map(|&v| Ok(rng.random::<f64>() < probability(kind, v)?))
        .collect::<Result<Vec<bool>>>()
        .map(GeneMask::new)
}

/// Flip rule: bit `j` is complemented iff `rand < T(v_j)`.
pub fn binarize_v(
    kind: TransferFunctionKind,
    bits_prev: &GeneMask,
    velocities: &[f64],
    rng: &mut impl Rng,
) -> Result<GeneMask> {
    check_lengths(bits_prev, velocities)?;
    velocities
        .iter()
        .zip(bits_prev.bits())
        .map(|(&v, &b)| Ok(if rng.random::<f64>() < probability(kind, v)? { !b } else { b }))
        .collect::<Result<Vec<bool>>>()
        .map(GeneMask::new)
}

/// Child 1 takes `a[..cut]` then `b[cut..]`; child 2 the reverse.
pub fn crossover_at(a: &GeneMask, b: &GeneMask, cut: usize) -> (GeneMask, GeneMask) {
    let (a, b) = (a.bits(), b.bits());
    let c1 = a[..cut].iter().chain(&b[cut..]).copied().collect::<Vec<_>>();
    let c2 = b[..cut].iter().chain(&a[cut..]).copied().collect::<Vec<_>>();
    (c1.into(), c2.into())
}

/// Single-point crossover with the cut uniform on `[1, len - 1]`.
pub fn single_point_crossover(
    a: &GeneMask,
    b: &GeneMask,
    rng: &mut impl Rng,
) -> Result<(GeneMask, GeneMask)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooShort(a.len()));
    }
    let cut = rng.random_range(1..a.len());
    Ok(crossover_at(a, b, cut))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdatePath {
    DirectAccept,
    CrossoverRepair,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BitUpdateOutcome {
    pub new_bits: GeneMask,
    pub fitness: f64,
    pub evaluations_used: usize,
    pub path: UpdatePath,
}

/// Draws the two X-shaped candidates: `D_j = 1` iff `rand1 < W1(v_j)` and
/// `G_j = 1` iff `rand2 > W2(v_j)`, with fresh draws per bit.
pub fn x_shaped_candidates(velocities: &[f64], rng: &mut impl Rng) -> Result<(GeneMask, GeneMask)> {
    if let Some(&v) = velocities.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteVelocity(v));
    }
    let d: Vec<bool> = velocities.iter().map(|&v| rng.random::<f64>() < w1(v)).collect();
    let g: Vec<bool> = velocities.iter().map(|&v| rng.random::<f64>() > w2(v)).collect();
    Ok((d.into(), g.into()))
}

/// Keeps the fitter of `d` and `g` (fitness is maximized; ties pick `g`),
/// accepts it if it beats `bits_prev`, and otherwise returns the fitter
/// child of a single-point crossover between it and `bits_prev`.
pub fn x_shaped_resolve<F>(
    bits_prev: &GeneMask,
    d: GeneMask,
    g: GeneMask,
    fitness_fn: &mut F,
    rng: &mut impl Rng,
) -> Result<BitUpdateOutcome>
where
    F: FnMut(&GeneMask) -> Result<f64>,
{
    let fd = fitness_fn(&d)?;
    let fg = fitness_fn(&g)?;
    let (z, fz) = if fd > fg { (d, fd) } else { (g, fg) };
    let f_prev = fitness_fn(bits_prev)?;
    if fz > f_prev {
        return Ok(BitUpdateOutcome {
            new_bits: z,
            fitness: fz,
            evaluations_used: 3,
            path: UpdatePath::DirectAccept,
        });
    }
    let (c1, c2) = single_point_crossover(&z, bits_prev, rng)?;
    let f1 = fitness_fn(&c1)?;
    let f2 = fitness_fn(&c2)?;
    let (new_bits, fitness) = if f2 > f1 { (c2, f2) } else { (c1, f1) };
    Ok(BitUpdateOutcome {
        new_bits,
        fitness,
        evaluations_used: 5,
        path: UpdatePath::CrossoverRepair,
    })
}

/// X-shaped position update for one horse.
pub fn x_shaped_update<F>(
    bits_prev: &GeneMask,
    velocities: &[f64],
    fitness_fn: &mut F,
    rng: &mut impl Rng,
) -> Result<BitUpdateOutcome>
where
    F: FnMut(&GeneMask) -> Result<f64>,
{
    check_lengths(bits_prev, velocities)?;
    let (d, g) = x_shaped_candidates(velocities, rng)?;
    x_shaped_resolve(bits_prev, d, g, fitness_fn, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn mask(s: &str) -> GeneMask {
        GeneMask::new(s.chars().map(|c| c == '1').collect())
    }

    fn popcount(m: &GeneMask) -> Result<f64> {
        Ok(m.selected_count() as f64)
    }

    #[test]
    fn reference_points() {
        assert_eq!(probability(TransferFunctionKind::S2, 0.0).unwrap(), 0.5);
        assert_eq!(probability(TransferFunctionKind::V2, 0.0).unwrap(), 0.0);
        for v in [-3.0, -0.1, 0.0, 0.7, 12.0] {
            match tf_value(TransferFunctionKind::X, v).unwrap() {
                TfValue::Pair { w1, w2 } => assert!((w1 + w2 - 1.0).abs() < 1e-15),
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(matches!(
            probability(TransferFunctionKind::S1, f64::NAN),
            Err(Error::NonFiniteVelocity(_))
        ));
    }

    #[test]
    fn tags_parse() {
        for k in TransferFunctionKind::ALL {
            assert_eq!(k.tag().parse::<TransferFunctionKind>().unwrap(), k);
        }
        assert!("q".parse::<TransferFunctionKind>().is_err());
    }

    #[test]
    fn saturated_updates() {
        let mut r = rng::stream(1, &[]);
        let prev = mask("0101");
        let big = [1e6; 4];
        assert_eq!(binarize_s(TransferFunctionKind::S2, &prev, &big, &mut r).unwrap(), mask("1111"));
        assert_eq!(
            binarize_s(TransferFunctionKind::S2, &prev, &[-1e6; 4], &mut r).unwrap(),
            mask("0000")
        );
        assert_eq!(
            binarize_v(TransferFunctionKind::V2, &prev, &[0.0; 4], &mut r).unwrap(),
            prev
        );
        assert_eq!(binarize_v(TransferFunctionKind::V2, &prev, &big, &mut r).unwrap(), mask("1010"));
        let (d, g) = x_shaped_candidates(&big, &mut r).unwrap();
        assert_eq!((d, g), (mask("1111"), mask("1111")));
        assert!(binarize_s(TransferFunctionKind::S2, &prev, &[0.0], &mut r).is_err());
    }

    #[test]
    fn set_rule_frequency() {
        let mut r = rng::stream(2, &[]);
        let prev = GeneMask::none(1000);
        let v = [0.7; 1000];
        let ones: usize = (0..100)
            .map(|_| binarize_s(TransferFunctionKind::S2, &prev, &v, &mut r).unwrap().selected_count())
            .sum();
        let expected = probability(TransferFunctionKind::S2, 0.7).unwrap();
        assert!((ones as f64 / 1e5 - expected).abs() < 0.01);
    }

    #[test]
    fn flip_rule_frequency() {
        let mut r = rng::stream(3, &[]);
        let prev = GeneMask::all(1000);
        let v = [1.0; 1000];
        let flips: usize = (0..100)
            .map(|_| 1000 - binarize_v(TransferFunctionKind::V2, &prev, &v, &mut r).unwrap().selected_count())
            .sum();
        let expected = probability(TransferFunctionKind::V2, 1.0).unwrap();
        assert!((flips as f64 / 1e5 - expected).abs() < 0.01);
    }

    #[test]
    fn crossover_definition() {
        let (c1, c2) = crossover_at(&mask("1111"), &mask("0000"), 2);
        assert_eq!((c1, c2), (mask("1100"), mask("0011")));
        let a = mask("1011");
        let mut r = rng::stream(4, &[]);
        let (c1, c2) = single_point_crossover(&a, &a, &mut r).unwrap();
        assert_eq!((&c1, &c2), (&a, &a));
        assert!(matches!(
            single_point_crossover(&mask("1"), &mask("0"), &mut r),
            Err(Error::TooShort(1))
        ));
    }

    #[test]
    fn identical_candidate_falls_back_to_previous() {
        let prev = mask("0110");
        let mut r = rng::stream(5, &[]);
        let out = x_shaped_resolve(&prev, prev.clone(), prev.clone(), &mut popcount, &mut r).unwrap();
        assert_eq!(out.path, UpdatePath::CrossoverRepair);
        assert_eq!(out.new_bits, prev);
        assert_eq!(out.evaluations_used, 5);
    }

    #[test]
    fn popcount_toy() {
        // D = 1010 and G = 0110 tie at 2, so Z = G; 2 > 0 accepts directly
        let mut r = rng::stream(6, &[]);
        let out = x_shaped_resolve(&mask("0000"), mask("1010"), mask("0110"), &mut popcount, &mut r).unwrap();
        assert_eq!(out.path, UpdatePath::DirectAccept);
        assert_eq!(out.new_bits, mask("0110"));
        assert!(out.fitness >= 2.0);
        assert_eq!(out.evaluations_used, 3);

        // prev 1110 beats Z; every cut of (0110, 1110) yields a child with 3 or 2 ones
        for seed in 0..20 {
            let mut r = rng::stream(seed, &[]);
            let out = x_shaped_resolve(&mask("1110"), mask("1010"), mask("0110"), &mut popcount, &mut r).unwrap();
            assert_eq!(out.path, UpdatePath::CrossoverRepair);
            assert!(out.fitness >= 2.0);
        }
    }

    proptest! {
        #[test]
        fn crossover_conserves_bits(bits in proptest::collection::vec(any::<(bool, bool)>(), 2..40), seed in any::<u64>()) {
            let (a, b): (Vec<bool>, Vec<bool>) = bits.into_iter().unzip();
            let (a, b) = (GeneMask::new(a), GeneMask::new(b));
            let mut r = rng::stream(seed, &[]);
            let (c1, c2) = single_point_crossover(&a, &b, &mut r).unwrap();
            prop_assert_eq!(c1.selected_count() + c2.selected_count(), a.selected_count() + b.selected_count());
            for j in 0..a.len() {
                let mut parents = [a.get(j), b.get(j)];
                let mut children = [c1.get(j), c2.get(j)];
                parents.sort();
                children.sort();
                prop_assert_eq!(parents, children);
            }
        }

        #[test]
        fn crossover_branch_returns_fitter_child(prev in proptest::collection::vec(any::<bool>(), 2..16), seed in any::<u64>()) {
            let prev = GeneMask::new(prev);
            let mut r = rng::stream(seed, &[]);
            let v: Vec<f64> = (0..prev.len()).map(|j| j as f64 - 4.0).collect();
            let out = x_shaped_update(&prev, &v, &mut popcount, &mut r).unwrap();
            let (d, g) = x_shaped_candidates(&v, &mut rng::stream(seed, &[])).unwrap();
            let z_fit = (d.selected_count().max(g.selected_count())) as f64;
            match out.path {
                UpdatePath::DirectAccept => prop_assert!(out.fitness > prev.selected_count() as f64),
                UpdatePath::CrossoverRepair => prop_assert!(z_fit <= prev.selected_count() as f64),
            }
            prop_assert_eq!(out.fitness, out.new_bits.selected_count() as f64);
        }
    }
}
