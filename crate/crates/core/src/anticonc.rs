//! Anti-concentration: atom probabilities of `<x, v>` for uniform
//! `x in {0,1}^n`, the Littlewood-Offord bound, scale partitions and the
//! many-scales and concentration-window estimates.
//!
//! Exact probabilities come from the full subset-sum distribution of the
//! denominator-free vector, so every event is decided on integers.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube::random_vertex;
use crate::error::{Error, Result};
use crate::params::Params;
use crate::scalar::{from_f64, int, squared_norm, Scalar};
use crate::system::UnitRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbMode {
    Exact,
    Sampled { trials: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probability {
    #[serde(with = "crate::scalar::serde_str")]
    pub value: Scalar,
    pub exact: bool,
    /// Number of samples behind `value`; 0 when exact.
    pub samples: u64,
}

/// Subset-sum distribution of an integer vector: sum -> number of subsets.
pub fn subset_sum_counts(ints: &[BigInt]) -> HashMap<BigInt, u64> {
    let mut counts: HashMap<BigInt, u64> = HashMap::new();
    counts.insert(BigInt::zero(), 1);
    for v in ints {
        if v.is_zero() {
            counts.values_mut().for_each(|c| *c *= 2);
            continue;
        }
        let mut next = HashMap::with_capacity(counts.len() * 2);
        for (s, c) in &counts {
            *next.entry(s.clone()).or_insert(0) += c;
            *next.entry(s + v).or_insert(0) += c;
        }
        counts = next;
    }
    counts
}

/// Integer image of `v` and the common multiplier `L` with `ints = L * v`.
fn integerize(v: &[Scalar]) -> (Vec<BigInt>, BigInt) {
    let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints = v.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
    (ints, lcm)
}

/// Probability of `pred(<x, v>)` for uniform `x`. Exact mode walks the full
/// sum distribution; sampled mode draws `trials` vertices.
fn probability_where(
    v: &[Scalar],
    mode: ProbMode,
    params: &Params,
    pred: impl Fn(&Scalar) -> bool,
) -> Result<Probability> {
    let (ints, lcm) = integerize(v);
    let scale = |s: &BigInt| BigRational::new(s.clone(), lcm.clone());
    match mode {
        ProbMode::Exact => {
            let cap = params.enumeration_cap;
            if v.len() > cap {
                return Err(Error::OverCap { n: v.len(), cap });
            }
            let hits: u64 = subset_sum_counts(&ints)
                .iter()
                .filter(|(s, _)| pred(&scale(s)))
                .map(|(_, c)| c)
                .sum();
            Ok(Probability {
                value: BigRational::new(BigInt::from(hits), BigInt::one() << v.len()),
                exact: true,
                samples: 0,
            })
        }
        ProbMode::Sampled { trials, seed } => {
            if trials == 0 {
                return Err(Error::Precondition("trials must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut hits = 0u64;
            for _ in 0..trials {
                let x = random_vertex(&mut rng, v.len());
                let s: BigInt = x.ones().map(|j| &ints[j]).sum();
                if pred(&scale(&s)) {
                    hits += 1;
                }
            }
            Ok(Probability {
                value: BigRational::new(BigInt::from(hits), BigInt::from(trials)),
                exact: false,
                samples: trials,
            })
        }
    }
}

/// `P(<x, v> = a)`.
pub fn atom_probability(
    v: &[Scalar],
    a: &Scalar,
    mode: ProbMode,
    params: &Params,
) -> Result<Probability> {
    probability_where(v, mode, params, |s| s == a)
}

/// `max_a P(<x, v> = a)` together with one maximizing `a` (the smallest).
pub fn max_atom_probability(v: &[Scalar], params: &Params) -> Result<(Scalar, Scalar)> {
    let cap = params.enumeration_cap;
    if v.len() > cap {
        return Err(Error::OverCap { n: v.len(), cap });
    }
    let (ints, lcm) = integerize(v);
    let counts = subset_sum_counts(&ints);
    let (best_sum, best) = counts
        .iter()
        .max_by(|(s1, c1), (s2, c2)| c1.cmp(c2).then(s2.cmp(s1)))
        .expect("distribution is never empty");
    Ok((
        BigRational::new(BigInt::from(*best), BigInt::one() << v.len()),
        BigRational::new(best_sum.clone(), lcm),
    ))
}

pub fn support_size(v: &[Scalar]) -> usize {
    v.iter().filter(|x| !x.is_zero()).count()
}

/// `1 / sqrt(|supp(v)|)`.
pub fn littlewood_offord_bound(v: &[Scalar]) -> Result<f64> {
    let s = support_size(v);
    if s == 0 {
        return Err(Error::Precondition("zero vector".into()));
    }
    Ok(1.0 / (s as f64).sqrt())
}

/// Exact form of `p <= 1/sqrt(supp)`: `p^2 * supp <= 1`.
pub fn within_littlewood_offord(p: &Scalar, supp: usize) -> bool {
    p * p * int(supp as i64) <= Scalar::one()
}

/// Ordered partition of a vector's coordinates into blocks whose squared
/// norms decay by at least `C1^2` from one block to the next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalePartition {
    pub parts: Vec<Vec<usize>>,
    #[serde(with = "crate::scalar::serde_str")]
    pub c1: Scalar,
    #[serde(with = "crate::scalar::serde_str::vec")]
    pub squared_norms: Vec<Scalar>,
    #[serde(with = "crate::scalar::serde_str")]
    pub smallest_scale_sq: Scalar,
}

impl ScalePartition {
    /// Builds the record from parts, computing the block norms of `v`.
    pub fn from_parts(v: &[Scalar], parts: Vec<Vec<usize>>, c1: Scalar) -> Result<Self> {
        let squared_norms = parts
            .iter()
            .map(|p| block_norm_sq(v, p))
            .collect::<Result<Vec<_>>>()?;
        let smallest_scale_sq = squared_norms.last().cloned().unwrap_or_else(Scalar::zero);
        Ok(ScalePartition {
            parts,
            c1,
            squared_norms,
            smallest_scale_sq,
        })
    }

    pub fn s(&self) -> usize {
        self.parts.len()
    }
}

fn block_norm_sq(v: &[Scalar], part: &[usize]) -> Result<Scalar> {
    let mut acc = Scalar::zero();
    for &j in part {
        let x = v.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: v.len(),
        })?;
        acc += x * x;
    }
    Ok(acc)
}

/// Greedy scale partition over all coordinates of `v`.
pub fn scale_partition(v: &[Scalar], c1: &Scalar, target_s: Option<usize>) -> Result<ScalePartition> {
    let domain: Vec<usize> = (0..v.len()).collect();
    scale_partition_on(v, &domain, c1, target_s)
}

/// Greedy scale partition of the coordinates in `domain`.
///
/// Coordinates are sorted by `|v_j|` descending and peeled into blocks; a
/// block closes as soon as the remaining suffix is nonzero and its squared
/// norm is at most `block / C1^2`. This is a heuristic: the number of blocks
/// is a lower bound on the best achievable, not the maximum. With
/// `target_s`, trailing blocks are merged down to exactly `target_s`.
pub fn scale_partition_on(
    v: &[Scalar],
    domain: &[usize],
    c1: &Scalar,
    target_s: Option<usize>,
) -> Result<ScalePartition> {
    if let Some(&j) = domain.iter().find(|&&j| j >= v.len()) {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: v.len(),
        });
    }
    if domain.iter().all(|&j| v[j].is_zero()) {
        return Err(Error::Precondition("zero vector has no scales".into()));
    }
    let c1_sq = c1 * c1;
    let mut order = domain.to_vec();
    order.sort_by(|&a, &b| v[b].abs().cmp(&v[a].abs()).then(a.cmp(&b)));
    let squares: Vec<Scalar> = order.iter().map(|&j| &v[j] * &v[j]).collect();
    // suffix[t] = squared norm of order[t..]
    let mut suffix = vec![Scalar::zero(); order.len() + 1];
    for t in (0..order.len()).rev() {
        suffix[t] = &suffix[t + 1] + &squares[t];
    }
    let mut parts: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    let mut current_sq = Scalar::zero();
    for (t, &j) in order.iter().enumerate() {
        current.push(j);
        current_sq += &squares[t];
        let rest = &suffix[t + 1];
        if rest.is_positive() && rest * &c1_sq <= current_sq {
            parts.push(std::mem::take(&mut current));
            current_sq = Scalar::zero();
        }
    }
    if !current.is_empty() {
        parts.push(current);
    }
    if let Some(target) = target_s {
        if target == 0 || target > parts.len() {
            return Err(Error::Precondition(format!(
                "greedy partition reaches {} scales, target {target} unreachable",
                parts.len()
            )));
        }
        let tail: Vec<usize> = parts.drain(target - 1..).flatten().collect();
        parts.push(tail);
    }
    ScalePartition::from_parts(v, parts, c1.clone())
}

/// True iff `partition` partitions all coordinates of `v` and its blocks
/// satisfy the decay condition exactly.
pub fn validate_scales(v: &[Scalar], partition: &ScalePartition) -> Result<bool> {
    let domain: Vec<usize> = (0..v.len()).collect();
    validate_scales_on(v, &domain, partition)
}

/// As [`validate_scales`], for a partition of the coordinate set `domain`.
/// Out-of-range indices are an error; anything else that is wrong is `false`.
pub fn validate_scales_on(v: &[Scalar], domain: &[usize], partition: &ScalePartition) -> Result<bool> {
    let mut seen = vec![false; v.len()];
    let mut count = 0;
    for part in &partition.parts {
        for &j in part {
            if j >= v.len() {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    len: v.len(),
                });
            }
            if seen[j] {
                return Ok(false);
            }
            seen[j] = true;
            count += 1;
        }
    }
    if partition.parts.is_empty() || partition.parts.iter().any(Vec::is_empty) {
        return Ok(false);
    }
    if count != domain.len() || domain.iter().any(|&j| j >= v.len() || !seen[j]) {
        return Ok(false);
    }
    let norms = partition
        .parts
        .iter()
        .map(|p| block_norm_sq(v, p))
        .collect::<Result<Vec<_>>>()?;
    if norms != partition.squared_norms || norms.last() != Some(&partition.smallest_scale_sq) {
        return Ok(false);
    }
    let c1_sq = &partition.c1 * &partition.c1;
    Ok(norms.windows(2).all(|w| w[0] >= &c1_sq * &w[1]))
}

/// `exp(-S/(8 C0)) + 3b exp(-S/(2 C0))`, the explicit tail bound for a vector
/// with `S` scales in a window of half-width `b` times its smallest scale.
pub fn many_scales_bound(s: usize, b: f64, c0: f64) -> Result<f64> {
    if s == 0 {
        return Err(Error::Precondition("S must be at least 1".into()));
    }
    if !(b >= 2.0) {
        return Err(Error::Precondition(format!("b must be >= 2, got {b}")));
    }
    let s = s as f64;
    Ok((-s / (8.0 * c0)).exp() + 3.0 * b * (-s / (2.0 * c0)).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnticoncCheck {
    pub probability: Probability,
    pub bound: f64,
    /// `probability <= bound`.
    pub ok: bool,
    /// False when the bound is at least 1 and therefore says nothing here.
    pub informative: bool,
}

/// Measures `P(|<x, v> - a| < b * delta)` with `delta` the norm of the
/// smallest scale, and compares it to [`many_scales_bound`].
pub fn check_anticoncentration(
    v: &[Scalar],
    partition: &ScalePartition,
    a: &Scalar,
    b: f64,
    mode: ProbMode,
    params: &Params,
) -> Result<AnticoncCheck> {
    if !(b >= 2.0) {
        return Err(Error::Precondition(format!("b must be >= 2, got {b}")));
    }
    if !validate_scales(v, partition)? {
        return Err(Error::Precondition("invalid scale partition".into()));
    }
    if !partition.smallest_scale_sq.is_positive() {
        return Err(Error::Precondition("smallest scale is zero".into()));
    }
    let b_exact = from_f64(b).ok_or_else(|| Error::Precondition("b must be finite".into()))?;
    let radius_sq = &b_exact * &b_exact * &partition.smallest_scale_sq;
    let probability = probability_where(v, mode, params, |s| {
        let d = s - a;
        &d * &d < radius_sq
    })?;
    let bound = many_scales_bound(partition.s(), b, params.c0_f64())?;
    let ok = crate::scalar::to_f64(&probability.value) <= bound;
    Ok(AnticoncCheck {
        probability,
        bound,
        ok,
        informative: bound < 1.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowCheck {
    pub probability: Probability,
    /// `probability >= 1/C0`, compared exactly.
    pub ok: bool,
}

/// `P(1/C0 <= |<x, v> - (1/2) sum v| <= C0)` for the unit vector
/// `v = row / sqrt(q)`. With `d = <x, row> - (1/2) sum row` the two sides are
/// tested as `d^2 C0^2 >= q` and `d^2 <= C0^2 q`.
pub fn concentration_window_prob(
    v: &UnitRow,
    c0: &Scalar,
    mode: ProbMode,
    params: &Params,
) -> Result<WindowCheck> {
    if !v.norm_sq.is_positive() || v.row.iter().all(Zero::is_zero) {
        return Err(Error::Precondition("zero row".into()));
    }
    if c0 < &crate::scalar::ratio(4706, 1000) {
        return Err(Error::Precondition("window constant must be at least 4.706".into()));
    }
    if squared_norm(&v.row) != v.norm_sq {
        return Err(Error::Precondition("norm_sq does not match the row".into()));
    }
    let half: Scalar = v.row.iter().sum::<Scalar>() / int(2);
    let c0_sq = c0 * c0;
    let lower = &v.norm_sq;
    let upper = &c0_sq * &v.norm_sq;
    let probability = probability_where(&v.row, mode, params, |s| {
        let d = s - &half;
        let d_sq = &d * &d;
        &d_sq * &c0_sq >= *lower && d_sq <= upper
    })?;
    let ok = probability.value >= Scalar::one() / c0;
    Ok(WindowCheck { probability, ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    fn ints(v: &[i64]) -> Vec<Scalar> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn atom_examples() {
        let p = Params::default();
        let pr = |v: &[i64], a: i64| {
            atom_probability(&ints(v), &int(a), ProbMode::Exact, &p)
                .unwrap()
                .value
        };
        assert_eq!(pr(&[1, 1, 1, 1], 2), ratio(6, 16));
        assert_eq!(pr(&[1, 2, 4], 3), ratio(1, 8));
        assert_eq!(pr(&[1, 1], 1), ratio(1, 2));
        let half = atom_probability(&[ratio(1, 2)], &ratio(1, 3), ProbMode::Exact, &p).unwrap();
        assert_eq!(half.value, int(0));
    }

    #[test]
    fn atom_over_cap() {
        let p = Params {
            enumeration_cap: 2,
            ..Params::default()
        };
        assert!(atom_probability(&ints(&[1, 1, 1]), &int(0), ProbMode::Exact, &p).is_err());
        let s = atom_probability(
            &ints(&[1, 1, 1]),
            &int(0),
            ProbMode::Sampled {
                trials: 4000,
                seed: 3,
            },
            &p,
        )
        .unwrap();
        assert!((crate::scalar::to_f64(&s.value) - 0.125).abs() < 0.03);
    }

    #[test]
    fn lo_examples() {
        assert_eq!(littlewood_offord_bound(&ints(&[1, 1, 1, 1])).unwrap(), 0.5);
        assert_eq!(littlewood_offord_bound(&ints(&[5, 0, 0])).unwrap(), 1.0);
        assert!((littlewood_offord_bound(&vec![int(1); 100]).unwrap() - 0.1).abs() < 1e-15);
        assert!(littlewood_offord_bound(&ints(&[0, 0])).is_err());
        assert!(within_littlewood_offord(&ratio(1, 2), 4));
        assert!(!within_littlewood_offord(&ratio(51, 100), 4));
    }

    #[test]
    fn scale_partition_examples() {
        let c1 = Params::default().c1();
        let sp = scale_partition(&ints(&[100, 1]), &c1, None).unwrap();
        assert_eq!(sp.parts, vec![vec![0], vec![1]]);
        let sp = scale_partition(&ints(&[1, 1]), &c1, None).unwrap();
        assert_eq!(sp.parts, vec![vec![0, 1]]);
        let sp = scale_partition(&ints(&[10000, 100, 1]), &c1, None).unwrap();
        assert_eq!(sp.parts, vec![vec![0], vec![1], vec![2]]);
        assert!(validate_scales(&ints(&[10000, 100, 1]), &sp).unwrap());

        let two = scale_partition(&ints(&[10000, 100, 1]), &c1, Some(2)).unwrap();
        assert_eq!(two.parts, vec![vec![0], vec![1, 2]]);
        assert!(validate_scales(&ints(&[10000, 100, 1]), &two).unwrap());
        assert!(scale_partition(&ints(&[1, 1]), &c1, Some(2)).is_err());
        assert!(scale_partition(&ints(&[0, 0]), &c1, None).is_err());
    }

    #[test]
    fn zeros_join_the_last_part() {
        let c1 = Params::default().c1();
        let v = ints(&[0, 100, 0, 1]);
        let sp = scale_partition(&v, &c1, None).unwrap();
        assert_eq!(sp.parts, vec![vec![1], vec![3, 0, 2]]);
        assert!(validate_scales(&v, &sp).unwrap());
    }

    #[test]
    fn validate_examples() {
        let c1 = Params::default().c1();
        let v = ints(&[1, 1]);
        let bad = ScalePartition::from_parts(&v, vec![vec![0], vec![1]], c1.clone()).unwrap();
        assert!(!validate_scales(&v, &bad).unwrap());
        let single = ScalePartition::from_parts(&v, vec![vec![0, 1]], c1.clone()).unwrap();
        assert!(validate_scales(&v, &single).unwrap());
        let missing = ScalePartition::from_parts(&v, vec![vec![0]], c1.clone()).unwrap();
        assert!(!validate_scales(&v, &missing).unwrap());
        let mut oob = single.clone();
        oob.parts = vec![vec![0, 5]];
        assert!(validate_scales(&v, &oob).is_err());
    }

    #[test]
    fn many_scales_examples() {
        let b = many_scales_bound(100, 2.0, 4.706).unwrap();
        let expected = (-100.0f64 / 37.648).exp() + 6.0 * (-100.0f64 / 9.412).exp();
        assert!((b - expected).abs() < 1e-15);
        assert!((b - 0.07061).abs() < 5e-4, "{b}");
        let mut prev = f64::INFINITY;
        for s in 1..400 {
            let x = many_scales_bound(s, 3.0, 4.706).unwrap();
            assert!(x < prev);
            prev = x;
        }
        assert!(prev < 1e-4);
        assert!(many_scales_bound(0, 2.0, 4.706).is_err());
        assert!(many_scales_bound(5, 1.5, 4.706).is_err());
    }

    #[test]
    fn anticoncentration_examples() {
        let p = Params::default();
        let c1 = p.c1();
        let v: Vec<Scalar> = (0..16).map(|j| int(1 << j)).collect();
        let parts = vec![(8..16).rev().collect(), (0..8).rev().collect()];
        let sp = ScalePartition::from_parts(&v, parts, c1.clone()).unwrap();
        assert!(validate_scales(&v, &sp).unwrap());
        let atom = atom_probability(&v, &int(12345), ProbMode::Exact, &p).unwrap();
        assert_eq!(atom.value, ratio(1, 1 << 16));
        let chk = check_anticoncentration(&v, &sp, &int(30000), 2.0, ProbMode::Exact, &p).unwrap();
        // delta^2 = (4^8 - 1)/3 = 21845, window |s - a| < 2 sqrt(21845) ~ 295.6
        assert_eq!(chk.probability.value, ratio(591, 1 << 16));
        assert!(chk.ok && !chk.informative);

        let v = ints(&[100, 1]);
        let sp = scale_partition(&v, &c1, None).unwrap();
        let chk = check_anticoncentration(&v, &sp, &int(0), 2.0, ProbMode::Exact, &p).unwrap();
        // sums 0, 1, 100, 101; |s| < 2 holds for 0 and 1
        assert_eq!(chk.probability.value, ratio(1, 2));
        assert!(check_anticoncentration(&v, &sp, &int(0), 1.5, ProbMode::Exact, &p).is_err());
    }

    #[test]
    fn window_examples() {
        let p = Params::default();
        let c0 = p.c0.clone();
        let e1 = UnitRow::normalize(ints(&[1])).unwrap();
        let w = concentration_window_prob(&e1, &c0, ProbMode::Exact, &p).unwrap();
        assert_eq!(w.probability.value, int(1));
        assert!(w.ok);
        let diag = UnitRow::normalize(ints(&[1, 1])).unwrap();
        let w = concentration_window_prob(&diag, &c0, ProbMode::Exact, &p).unwrap();
        assert_eq!(w.probability.value, ratio(1, 2));
        assert!(w.ok);
        assert!(concentration_window_prob(&diag, &int(4), ProbMode::Exact, &p).is_err());
    }
}
