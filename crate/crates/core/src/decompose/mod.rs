//! Structural decompositions of a coefficient matrix: the greedy support
//! split, the first (scale-tracking) decomposition and the second
//! decomposition that feeds the refutation pipeline.

mod first;
mod greedy;
mod second;

pub use first::{check_decomposition1, decomposition1_violations, first_decomposition, Decomposition1};
pub use greedy::{greedy_split_violations, greedy_support_split, GreedySplit};
pub use second::{
    check_decomposition2, decomposition2_violations, evaluate_hypotheses, second_decomposition,
    Decomposition2, HypothesisReport, IterationAction, IterationTrace,
};

use crate::error::{Error, Result};

/// Checks that `parts` partition `0..len`.
pub(crate) fn is_partition(len: usize, parts: &[&[usize]]) -> bool {
    let mut seen = vec![false; len];
    for part in parts {
        for &x in *part {
            if x >= len || seen[x] {
                return false;
            }
            seen[x] = true;
        }
    }
    seen.into_iter().all(|s| s)
}

pub(crate) fn check_rectangular(matrix: &[Vec<crate::scalar::Scalar>]) -> Result<usize> {
    let m = matrix.first().map_or(0, Vec::len);
    if matrix.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch("rows of different lengths".into()));
    }
    Ok(m)
}
