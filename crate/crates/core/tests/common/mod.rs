//! Brute-force oracles and seeded generators shared by the integration tests.
//! Nothing here calls into the library's search code.

#![allow(dead_code)]

use std::collections::HashMap;

use cubecover::scalar::{int, ratio, Scalar};
use cubecover::system::{CoveringSystem, Vertex};
use num_traits::Zero;
use rand::Rng;

pub fn dot(row: &[Scalar], bits: &[bool]) -> Scalar {
    row.iter()
        .zip(bits)
        .filter(|(_, &b)| b)
        .fold(Scalar::zero(), |acc, (v, _)| acc + v)
}

pub fn covered(system: &CoveringSystem, bits: &[bool]) -> bool {
    (0..system.k()).any(|i| dot(system.row(i), bits) == system.mu()[i])
}

/// Bits of `idx` with `x_0` as the most significant, so increasing `idx`
/// walks the cube in lexicographic order.
pub fn lex_bits(idx: u64, n: usize) -> Vec<bool> {
    (0..n).map(|j| (idx >> (n - 1 - j)) & 1 == 1).collect()
}

/// Uncovered count and the lexicographically smallest uncovered vertex.
pub fn naive_uncovered(system: &CoveringSystem) -> (u64, Option<Vec<bool>>) {
    let n = system.n();
    let mut count = 0;
    let mut first = None;
    for idx in 0..(1u64 << n) {
        let bits = lex_bits(idx, n);
        if !covered(system, &bits) {
            count += 1;
            first.get_or_insert(bits);
        }
    }
    (count, first)
}

/// Every row has a vertex covered by that row alone.
pub fn naive_minimal(system: &CoveringSystem) -> bool {
    let n = system.n();
    let mut exclusive = vec![false; system.k()];
    for idx in 0..(1u64 << n) {
        let bits = lex_bits(idx, n);
        let hits: Vec<usize> = (0..system.k())
            .filter(|&i| dot(system.row(i), &bits) == system.mu()[i])
            .collect();
        if hits.len() == 1 {
            exclusive[hits[0]] = true;
        }
    }
    exclusive.iter().all(|&e| e)
}

/// Exact distribution of `<x, v>` for uniform `x`, as counts out of `2^len`.
pub fn naive_distribution(v: &[Scalar]) -> HashMap<Scalar, u64> {
    let n = v.len();
    let mut out = HashMap::new();
    for idx in 0..(1u64 << n) {
        *out.entry(dot(v, &lex_bits(idx, n))).or_insert(0) += 1;
    }
    out
}

pub fn vertex_bits(v: &Vertex) -> Vec<bool> {
    v.bits().to_vec()
}

pub fn random_rational<R: Rng>(rng: &mut R, max_num: i64, max_den: i64) -> Scalar {
    ratio(rng.gen_range(-max_num..=max_num), rng.gen_range(1..=max_den))
}

/// Rows with roughly `density` nonzero entries, never all zero.
pub fn random_matrix<R: Rng>(rng: &mut R, k: usize, n: usize, density: f64) -> Vec<Vec<Scalar>> {
    (0..k)
        .map(|_| {
            let mut row: Vec<Scalar> = (0..n)
                .map(|_| {
                    if rng.gen_bool(density) {
                        random_rational(rng, 5, 4)
                    } else {
                        Scalar::zero()
                    }
                })
                .collect();
            if row.iter().all(Zero::is_zero) {
                let j = rng.gen_range(0..n);
                row[j] = ratio(rng.gen_range(1..=5), rng.gen_range(1..=4));
            }
            row
        })
        .collect()
}

/// A system whose right-hand sides are attained at random vertices, so most
/// rows cover something and uncovered vertices are neither rare nor absent.
pub fn random_system<R: Rng>(rng: &mut R, k: usize, n: usize) -> CoveringSystem {
    let rows = random_matrix(rng, k, n, 0.6);
    let mu = rows
        .iter()
        .map(|r| {
            let bits: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            dot(r, &bits)
        })
        .collect();
    CoveringSystem::new(n, rows, mu).unwrap()
}

/// `ell` rows of `+-1` entries on disjoint blocks of `block` columns.
pub fn disjoint_sign_blocks<R: Rng>(rng: &mut R, ell: usize, block: usize) -> CoveringSystem {
    let n = ell * block;
    let rows: Vec<Vec<Scalar>> = (0..ell)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if j / block == i {
                        int(if rng.gen() { 1 } else { -1 })
                    } else {
                        Scalar::zero()
                    }
                })
                .collect()
        })
        .collect();
    let half = block as i64 / 2;
    let mu = (0..ell).map(|_| int(rng.gen_range(-half..=half))).collect();
    CoveringSystem::new(n, rows, mu).unwrap()
}
