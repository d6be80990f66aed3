//! Reference essential covers.

use crate::error::{Error, Result};
use crate::scalar::{int, Scalar};
use crate::system::CoveringSystem;

/// The cover by `x_1 + ... + x_n = n/2` and `x_{2i-1} - x_{2i} = 0` for
/// `i = 1..n/2`; `n/2 + 1` hyperplanes. Only defined for even `n`.
pub fn lr_cover(n: usize) -> Result<CoveringSystem> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::Precondition(format!(
            "lr_cover needs an even n >= 2, got {n}"
        )));
    }
    let half = n / 2;
    let mut rows: Vec<Vec<Scalar>> = Vec::with_capacity(half + 1);
    let mut mu = Vec::with_capacity(half + 1);
    rows.push(vec![int(1); n]);
    mu.push(int(half as i64));
    for i in 0..half {
        let mut row = vec![int(0); n];
        row[2 * i] = int(1);
        row[2 * i + 1] = int(-1);
        rows.push(row);
        mu.push(int(0));
    }
    CoveringSystem::new(n, rows, mu)
}
