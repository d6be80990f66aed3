//! Exact hyperplane membership over all (or sampled) vertices of `{0,1}^n`.
//!
//! Rows are cleared of denominators once, so every membership test is an
//! integer comparison. When all partial sums provably fit in `i64` the sweep
//! runs on machine integers, otherwise on `BigInt`. Exhaustive sweeps walk the
//! cube in Gray-code order, so each step updates the `k` running inner
//! products by one column instead of recomputing them.

use std::ops::{AddAssign, SubAssign};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::scalar::{clear_denominators, Scalar};
use crate::system::{CoveringSystem, Vertex};

/// Hard ceiling for exhaustive sweeps regardless of the configured cap; vertex
/// positions are `u64`.
pub const MAX_ENUMERATION_DIM: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageMode {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n: usize,
    #[serde(serialize_with = "ser_biguint", deserialize_with = "de_biguint")]
    pub total_vertices: BigUint,
    pub uncovered_count: u64,
    pub witness: Option<Vertex>,
    pub mode: CoverageMode,
    pub samples: u64,
}

fn ser_biguint<S: Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

fn de_biguint<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigUint, D::Error> {
    let text = String::deserialize(d)?;
    text.parse().map_err(serde::de::Error::custom)
}

/// True iff `<v_i, x> = mu_i`, evaluated exactly.
pub fn evaluate_row(system: &CoveringSystem, i: usize, x: &Vertex) -> Result<bool> {
    if i >= system.k() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: system.k(),
        });
    }
    check_len(system, x)?;
    let sum = x
        .ones()
        .fold(Scalar::zero(), |acc, j| acc + &system.row(i)[j]);
    Ok(sum == system.mu()[i])
}

/// True iff no row of the system contains `x`.
pub fn is_uncovered(system: &CoveringSystem, x: &Vertex) -> Result<bool> {
    check_len(system, x)?;
    for i in 0..system.k() {
        if evaluate_row(system, i, x)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_len(system: &CoveringSystem, x: &Vertex) -> Result<()> {
    if x.len() != system.n() {
        return Err(Error::DimensionMismatch(format!(
            "vertex has length {} but n = {}",
            x.len(),
            system.n()
        )));
    }
    Ok(())
}

pub(crate) trait Acc:
    Clone + Send + Sync + PartialEq + Zero + for<'a> AddAssign<&'a Self> + for<'a> SubAssign<&'a Self>
{
}

impl<T> Acc for T where
    T: Clone
        + Send
        + Sync
        + PartialEq
        + Zero
        + for<'a> AddAssign<&'a T>
        + for<'a> SubAssign<&'a T>
{
}

/// Denominator-free copy of a system, row-major plus a column index.
pub(crate) struct IntRows<T> {
    n: usize,
    rows: Vec<Vec<T>>,
    mu: Vec<T>,
    columns: Vec<Vec<(usize, T)>>,
}

impl<T: Acc> IntRows<T> {
    fn new(n: usize, rows: Vec<Vec<T>>, mu: Vec<T>) -> Self {
        let mut columns = vec![Vec::new(); n];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    columns[j].push((i, v.clone()));
                }
            }
        }
        IntRows {
            n,
            rows,
            mu,
            columns,
        }
    }

    fn satisfied_count(&self, x: &Vertex, stop_at: usize) -> usize {
        let mut count = 0;
        for (row, mu) in self.rows.iter().zip(&self.mu) {
            let mut sum = T::zero();
            for j in x.ones() {
                sum += &row[j];
            }
            if &sum == mu {
                count += 1;
                if count >= stop_at {
                    break;
                }
            }
        }
        count
    }

    fn sums_at(&self, mask: u64) -> Vec<T> {
        self.rows
            .iter()
            .map(|row| {
                let mut s = T::zero();
                for (j, v) in row.iter().enumerate() {
                    if (mask >> j) & 1 == 1 {
                        s += v;
                    }
                }
                s
            })
            .collect()
    }

    fn sweep_range(&self, start: u64, end: u64, track_exclusive: bool) -> SweepStats {
        let k = self.rows.len();
        let mut stats = SweepStats::empty(k);
        if start >= end {
            return stats;
        }
        let mut g = start ^ (start >> 1);
        let mut sums = self.sums_at(g);
        let stop_at = if track_exclusive { 2 } else { 1 };
        let shift = 64 - self.n as u32;
        let visit = |g: u64, sums: &[T], stats: &mut SweepStats| {
            let mut count = 0;
            let mut first = 0;
            for (i, (s, mu)) in sums.iter().zip(&self.mu).enumerate() {
                if s == mu {
                    if count == 0 {
                        first = i;
                    }
                    count += 1;
                    if count >= stop_at {
                        break;
                    }
                }
            }
            if count == 0 {
                stats.uncovered += 1;
                let key = g.reverse_bits() >> shift;
                stats.min_uncovered = Some(stats.min_uncovered.map_or(key, |m| m.min(key)));
            } else if count == 1 && track_exclusive {
                let key = g.reverse_bits() >> shift;
                let slot = &mut stats.exclusive[first];
                *slot = Some(slot.map_or(key, |m| m.min(key)));
            }
        };
        visit(g, &sums, &mut stats);
        for p in start + 1..end {
            let bit = p.trailing_zeros() as usize;
            g ^= 1 << bit;
            if (g >> bit) & 1 == 1 {
                for (i, v) in &self.columns[bit] {
                    sums[*i] += v;
                }
            } else {
                for (i, v) in &self.columns[bit] {
                    sums[*i] -= v;
                }
            }
            visit(g, &sums, &mut stats);
        }
        stats
    }

    fn sweep(&self, track_exclusive: bool) -> SweepStats {
        let total: u64 = 1 << self.n;
        let chunk: u64 = 1 << 14;
        if total <= chunk {
            return self.sweep_range(0, total, track_exclusive);
        }
        let chunks = total / chunk;
        (0..chunks)
            .into_par_iter()
            .map(|c| self.sweep_range(c * chunk, (c + 1) * chunk, track_exclusive))
            .reduce(|| SweepStats::empty(self.rows.len()), SweepStats::merge)
    }
}

pub(crate) enum IntSystem {
    Small(IntRows<i64>),
    Big(IntRows<BigInt>),
}

impl IntSystem {
    pub(crate) fn from_system(system: &CoveringSystem) -> Self {
        let mut big_rows = Vec::with_capacity(system.k());
        let mut big_mu = Vec::with_capacity(system.k());
        let mut fits = true;
        let limit = BigInt::one() << 62;
        for (row, mu) in system.rows().iter().zip(system.mu()) {
            let mut all: Vec<Scalar> = row.clone();
            all.push(mu.clone());
            let mut ints = clear_denominators(&all);
            let m = ints.pop().expect("mu present");
            let bound: BigInt = ints.iter().map(|v| v.abs()).sum::<BigInt>() + m.abs();
            if bound >= limit {
                fits = false;
            }
            big_rows.push(ints);
            big_mu.push(m);
        }
        if fits {
            let conv = |v: &BigInt| v.to_i64().expect("bounded");
            IntSystem::Small(IntRows::new(
                system.n(),
                big_rows.iter().map(|r| r.iter().map(conv).collect()).collect(),
                big_mu.iter().map(conv).collect(),
            ))
        } else {
            IntSystem::Big(IntRows::new(system.n(), big_rows, big_mu))
        }
    }

    pub(crate) fn sweep(&self, track_exclusive: bool) -> SweepStats {
        match self {
            IntSystem::Small(r) => r.sweep(track_exclusive),
            IntSystem::Big(r) => r.sweep(track_exclusive),
        }
    }

    /// Number of rows containing `x`, counting no further than `stop_at`.
    pub(crate) fn satisfied_count(&self, x: &Vertex, stop_at: usize) -> usize {
        match self {
            IntSystem::Small(r) => r.satisfied_count(x, stop_at),
            IntSystem::Big(r) => r.satisfied_count(x, stop_at),
        }
    }
}

/// Result of one exhaustive pass. Vertex keys are lexicographic ranks
/// (`x_1` most significant), so `min` picks the lexicographically smallest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct SweepStats {
    pub uncovered: u64,
    pub min_uncovered: Option<u64>,
    pub exclusive: Vec<Option<u64>>,
}

impl SweepStats {
    fn empty(k: usize) -> Self {
        SweepStats {
            uncovered: 0,
            min_uncovered: None,
            exclusive: vec![None; k],
        }
    }

    fn merge(mut self, other: SweepStats) -> SweepStats {
        fn min_opt(a: Option<u64>, b: Option<u64>) -> Option<u64> {
            match (a, b) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, None) => a,
                (None, b) => b,
            }
        }
        self.uncovered += other.uncovered;
        self.min_uncovered = min_opt(self.min_uncovered, other.min_uncovered);
        for (a, b) in self.exclusive.iter_mut().zip(other.exclusive) {
            *a = min_opt(*a, b);
        }
        self
    }
}

/// Inverse of the lexicographic key: coordinate `j` is bit `n - 1 - j`.
pub(crate) fn vertex_from_key(key: u64, n: usize) -> Vertex {
    Vertex::new((0..n).map(|j| (key >> (n - 1 - j)) & 1 == 1).collect())
}

pub(crate) fn check_cap(n: usize, params: &Params) -> Result<()> {
    let cap = params.enumeration_cap.min(MAX_ENUMERATION_DIM);
    if n > cap {
        return Err(Error::OverCap { n, cap });
    }
    Ok(())
}

pub(crate) fn full_sweep(
    system: &CoveringSystem,
    params: &Params,
    track_exclusive: bool,
) -> Result<SweepStats> {
    check_cap(system.n(), params)?;
    Ok(IntSystem::from_system(system).sweep(track_exclusive))
}

/// Exhaustive count of uncovered vertices; the witness is the
/// lexicographically smallest uncovered vertex.
pub fn enumerate_uncovered(system: &CoveringSystem, params: &Params) -> Result<CoverageReport> {
    let stats = full_sweep(system, params, false)?;
    let n = system.n();
    Ok(CoverageReport {
        n,
        total_vertices: BigUint::one() << n,
        uncovered_count: stats.uncovered,
        witness: stats.min_uncovered.map(|key| vertex_from_key(key, n)),
        mode: CoverageMode::Exhaustive,
        samples: 0,
    })
}

pub fn random_vertex<R: Rng>(rng: &mut R, n: usize) -> Vertex {
    Vertex::new((0..n).map(|_| rng.gen::<bool>()).collect())
}

/// Monte-Carlo fallback: `trials` uniform vertices; the witness is the first
/// uncovered one drawn.
pub fn sample_uncovered(system: &CoveringSystem, trials: u64, seed: u64) -> Result<CoverageReport> {
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let ints = IntSystem::from_system(system);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uncovered = 0;
    let mut witness = None;
    for _ in 0..trials {
        let x = random_vertex(&mut rng, system.n());
        if ints.satisfied_count(&x, 1) == 0 {
            uncovered += 1;
            if witness.is_none() {
                witness = Some(x);
            }
        }
    }
    Ok(CoverageReport {
        n: system.n(),
        total_vertices: BigUint::one() << system.n(),
        uncovered_count: uncovered,
        witness,
        mode: CoverageMode::Sampled,
        samples: trials,
    })
}
