use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::first::{first_on, violations_on};
use super::is_partition;
use crate::anticonc::{validate_scales_on, ScalePartition};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::scalar::{int, to_f64, Scalar};
use crate::system::{CoveringSystem, RowScaling};

/// The decomposition's hypotheses evaluated exactly, plus the extra conditions the
/// `|N1| >= n/2` argument actually consumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// `A = C3 k S W`.
    pub a: f64,
    /// `A <= n/8`.
    pub h1: bool,
    /// `k <= C4 (SW)^(-2/5) n^(3/5)`, tested as `k^5 (SW)^2 <= C4^5 n^3`.
    pub h2: bool,
    /// `n/(8A) * A^gamma >= k`: column growth from absorbed zero blocks.
    pub gamma_first: bool,
    /// `32 k A^(2 gamma) <= n`: column growth from absorbed single rows.
    pub gamma_second: bool,
    /// Nonzero count `<= 2k^2`, true for every essential matrix.
    pub sparsity: bool,
    pub nonzeros: usize,
    /// All of `h1`, `gamma_first`, `gamma_second` and `sparsity`.
    pub n1_guaranteed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterationAction {
    /// The zero block was large and moved to `K1` with `M2` moved to `N3`.
    AbsorbZero,
    /// One sparse zero row moved to `K1` with its support.
    AbsorbRow,
    Stop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub active_rows: usize,
    pub active_cols: usize,
    pub l1: usize,
    pub l2: usize,
    pub m1: usize,
    pub m2: usize,
    pub zero_rows: Vec<usize>,
    pub action: IterationAction,
    pub absorbed_row: Option<usize>,
    pub columns_added: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition2 {
    pub k1: Vec<usize>,
    pub k2: Vec<usize>,
    pub k3: Vec<usize>,
    pub k4: Vec<usize>,
    pub n1: Vec<usize>,
    pub n2: Vec<usize>,
    pub n3: Vec<usize>,
    pub rescaling: RowScaling,
    /// Scale partitions of the `K4` rows over `N1 u N2`.
    pub scale_partitions: BTreeMap<usize, ScalePartition>,
    pub s: usize,
    #[serde(with = "crate::scalar::serde_str")]
    pub w: Scalar,
    #[serde(with = "crate::scalar::serde_str")]
    pub gamma: Scalar,
    pub hypotheses: HypothesisReport,
    pub trace: Vec<IterationTrace>,
}

fn pow(x: &Scalar, e: u32) -> Scalar {
    num_traits::pow(x.clone(), e as usize)
}

fn small_denominator(gamma: &Scalar) -> Result<(u32, u32)> {
    let p = u32::try_from(gamma.numer()).ok();
    let q = u32::try_from(gamma.denom()).ok();
    match (p, q) {
        (Some(p), Some(q)) if p > 0 && p < q && q <= 64 => Ok((p, q)),
        _ => Err(Error::Precondition(format!(
            "gamma must be a fraction p/q in (0,1) with q <= 64, got {gamma}"
        ))),
    }
}

/// Evaluates the hypotheses for an `n`-column matrix with `k` rows and
/// `nonzeros` nonzero entries.
pub fn evaluate_hypotheses(
    n: usize,
    k: usize,
    nonzeros: usize,
    s: usize,
    w: &Scalar,
    params: &Params,
) -> Result<HypothesisReport> {
    let (p, q) = small_denominator(&params.gamma)?;
    let n_s = int(n as i64);
    let k_s = int(k as i64);
    let sw = int(s as i64) * w;
    let a = params.c3() * &k_s * &sw;
    let h1 = int(8) * &a <= n_s;
    let h2 = pow(&k_s, 5) * pow(&sw, 2) <= pow(&params.c4, 5) * pow(&n_s, 3);
    // n A^(p/q) >= 8 k A   <=>   n^q A^p >= (8 k A)^q
    let gamma_first = pow(&n_s, q) * pow(&a, p) >= pow(&(int(8) * &k_s * &a), q);
    // 32 k A^(2p/q) <= n   <=>   (32 k)^q A^(2p) <= n^q
    let gamma_second = pow(&(int(32) * &k_s), q) * pow(&a, 2 * p) <= pow(&n_s, q);
    let sparsity = BigInt::from(nonzeros) <= BigInt::from(2 * k * k);
    Ok(HypothesisReport {
        a: to_f64(&a),
        h1,
        h2,
        gamma_first,
        gamma_second,
        sparsity,
        nonzeros,
        n1_guaranteed: h1 && gamma_first && gamma_second && sparsity,
    })
}

/// `|Z| > m^gamma` for `gamma = p/q`, i.e. `|Z|^q > m^p`.
fn zero_block_is_large(z: usize, m: usize, gamma: (u32, u32)) -> bool {
    let (p, q) = gamma;
    if m == 0 {
        return z > 0;
    }
    num_traits::pow(BigInt::from(z), q as usize) > num_traits::pow(BigInt::from(m), p as usize)
}

/// The second decomposition.
///
/// Step 0 puts dense columns (support at least `16k^2/n`) into `N3` and rows
/// vanishing off `N3` into `K1`. Each iteration runs the first decomposition
/// on the rows outside `K1` and the columns outside `N3`, then either absorbs
/// the zero block `Z` of `L1` (when `|Z| > |M2|^gamma`), or absorbs the lowest
/// row of `Z` whose support on `M2` is at most `4|Z|^2`, or stops. The final
/// iteration yields `K2 = Z`, `K3 = L1 \ Z`, `K4 = L2`, `N1 = M1`, `N2 = M2`.
pub fn second_decomposition(
    system: &CoveringSystem,
    s: usize,
    w: &Scalar,
    params: &Params,
) -> Result<Decomposition2> {
    let n = system.n();
    let k = system.k();
    let gamma = small_denominator(&params.gamma)?;
    let matrix = system.rows();
    let nonzeros: usize = (0..k).map(|i| system.support(i).len()).sum();
    let hypotheses = evaluate_hypotheses(n, k, nonzeros, s, w, params)?;

    // Step 0. Column j is dense iff |supp(col j)| * n >= 16 k^2.
    let mut in_n3: Vec<bool> = (0..n)
        .map(|j| system.column_support_size(j) * n >= 16 * k * k)
        .collect();
    let vanishes_off_n3 =
        |i: usize, in_n3: &[bool]| (0..n).all(|j| in_n3[j] || matrix[i][j].is_zero());
    let mut in_k1: Vec<bool> = (0..k).map(|i| vanishes_off_n3(i, &in_n3)).collect();

    let mut trace = Vec::new();
    let mut iteration = 0;
    let last = loop {
        let rows: Vec<usize> = (0..k).filter(|&i| !in_k1[i]).collect();
        let cols: Vec<usize> = (0..n).filter(|&j| !in_n3[j]).collect();
        let d = first_on(matrix, &rows, &cols, s, w, params)?;
        let z: Vec<usize> = d
            .l1
            .iter()
            .copied()
            .filter(|&i| d.m1.iter().all(|&j| matrix[i][j].is_zero()))
            .collect();
        let mut entry = IterationTrace {
            iteration,
            active_rows: rows.len(),
            active_cols: cols.len(),
            l1: d.l1.len(),
            l2: d.l2.len(),
            m1: d.m1.len(),
            m2: d.m2.len(),
            zero_rows: z.clone(),
            action: IterationAction::Stop,
            absorbed_row: None,
            columns_added: 0,
        };
        if zero_block_is_large(z.len(), d.m2.len(), gamma) {
            z.iter().for_each(|&i| in_k1[i] = true);
            d.m2.iter().for_each(|&j| in_n3[j] = true);
            entry.action = IterationAction::AbsorbZero;
            entry.columns_added = d.m2.len();
        } else {
            let limit = 4 * z.len() * z.len();
            let sparse = z.iter().copied().find(|&i| {
                d.m2.iter().filter(|&&j| !matrix[i][j].is_zero()).count() <= limit
            });
            match sparse {
                Some(i) => {
                    in_k1[i] = true;
                    let added = system.support(i).into_iter().filter(|&j| !in_n3[j]);
                    let added: Vec<usize> = added.collect();
                    added.iter().for_each(|&j| in_n3[j] = true);
                    entry.action = IterationAction::AbsorbRow;
                    entry.absorbed_row = Some(i);
                    entry.columns_added = added.len();
                }
                None => {
                    trace.push(entry);
                    break (d, z);
                }
            }
        }
        trace.push(entry);
        iteration += 1;
    };
    let (d, z) = last;
    let z_set: BTreeSet<usize> = z.iter().copied().collect();
    let k3: Vec<usize> = d.l1.iter().copied().filter(|i| !z_set.contains(i)).collect();
    let k1: Vec<usize> = (0..k).filter(|&i| in_k1[i]).collect();
    let n3: Vec<usize> = (0..n).filter(|&j| in_n3[j]).collect();
    Ok(Decomposition2 {
        k1,
        k2: z,
        k3,
        k4: d.l2.clone(),
        n1: d.m1.clone(),
        n2: d.m2.clone(),
        n3,
        rescaling: d.rescaling.clone(),
        scale_partitions: d.scale_partitions.clone(),
        s,
        w: w.clone(),
        gamma: params.gamma.clone(),
        hypotheses,
        trace,
    })
}

pub fn check_decomposition2(system: &CoveringSystem, d: &Decomposition2, params: &Params) -> Result<bool> {
    Ok(decomposition2_violations(system, d, params)?.is_empty())
}

/// Every property of `d` that fails on `system`. `|N1| >= n/2` is only
/// required when the hypotheses report guarantees it.
pub fn decomposition2_violations(
    system: &CoveringSystem,
    d: &Decomposition2,
    params: &Params,
) -> Result<Vec<String>> {
    let n = system.n();
    let k = system.k();
    let m = system.rows();
    if d.rescaling.len() != k {
        return Err(Error::DimensionMismatch("rescaling does not match the system".into()));
    }
    let rows_ok = [&d.k1, &d.k2, &d.k3, &d.k4].iter().all(|v| v.iter().all(|&i| i < k));
    let cols_ok = [&d.n1, &d.n2, &d.n3].iter().all(|v| v.iter().all(|&j| j < n));
    if !rows_ok || !cols_ok {
        return Err(Error::DimensionMismatch("decomposition index out of range".into()));
    }
    let mut out = Vec::new();
    if !is_partition(k, &[&d.k1, &d.k2, &d.k3, &d.k4]) {
        out.push("K1..K4 do not partition the rows".to_string());
    }
    if !is_partition(n, &[&d.n1, &d.n2, &d.n3]) {
        out.push("N1..N3 do not partition the columns".to_string());
        return Ok(out);
    }
    if d.s == 0 || !d.w.is_positive() {
        out.push("S and W must be positive".to_string());
        return Ok(out);
    }
    let n12: Vec<usize> = {
        let mut v: Vec<usize> = d.n1.iter().chain(&d.n2).copied().collect();
        v.sort_unstable();
        v
    };
    // (i)
    for &j in &n12 {
        let supp = system.column_support_size(j);
        if supp * n > 16 * k * k {
            out.push(format!("column {j} has support {supp} > 16k^2/n"));
        }
    }
    // (ii)
    let nonzero_on = |i: usize, cols: &[usize]| cols.iter().any(|&j| !m[i][j].is_zero());
    for &i in &d.k1 {
        if nonzero_on(i, &n12) {
            out.push(format!("row {i} of K1 is nonzero on N1 u N2"));
        }
    }
    for &i in &d.k2 {
        if nonzero_on(i, &d.n1) {
            out.push(format!("row {i} of K2 is nonzero on N1"));
        }
    }
    // (iii)
    let need = 4 * d.k2.len() * d.k2.len();
    for &i in &d.k2 {
        let supp = d.n2.iter().filter(|&&j| !m[i][j].is_zero()).count();
        if supp < need {
            out.push(format!("row {i} of K2 has support {supp} < 4|K2|^2 = {need} on N2"));
        }
    }
    // (iv)
    let inv_w = Scalar::one() / &d.w;
    let linf_sq = int(16 * (k * k) as i64) / (int(n as i64) * &d.w);
    for &i in &d.k3 {
        let f = d.rescaling.squared_factor(i);
        let norm: Scalar = d.n1.iter().map(|&j| &m[i][j] * &m[i][j]).sum::<Scalar>() * f;
        if !norm.is_one() {
            out.push(format!("row {i} of K3 has squared norm {norm} on N1"));
        }
    }
    for &j in &d.n1 {
        let mut col = Scalar::zero();
        let mut supp = 0i64;
        for &i in &d.k3 {
            if !m[i][j].is_zero() {
                col += &m[i][j] * &m[i][j] * d.rescaling.squared_factor(i);
                supp += 1;
            }
        }
        if col > inv_w {
            out.push(format!("column {j} has squared norm {col} > 1/W on K3"));
        }
        // Cauchy-Schwarz form of the l1 bound: supp * |col|^2 < 16k^2/(nW).
        if supp > 0 && int(supp) * &col >= linf_sq {
            out.push(format!("column {j} breaks the K3 l1 bound"));
        }
    }
    // (v)
    let n1_set: BTreeSet<usize> = d.n1.iter().copied().collect();
    for &i in &d.k4 {
        let Some(p) = d.scale_partitions.get(&i) else {
            out.push(format!("row {i} of K4 has no scale partition"));
            continue;
        };
        if p.s() != d.s {
            out.push(format!("row {i} has {} scales, expected {}", p.s(), d.s));
        }
        if !validate_scales_on(&m[i], &n12, p)? {
            out.push(format!("row {i} has an invalid scale partition on N1 u N2"));
        }
        let last: BTreeSet<usize> = p.parts.last().into_iter().flatten().copied().collect();
        if !n1_set.is_subset(&last) {
            out.push(format!("smallest scale of row {i} does not contain N1"));
        }
        if !p.smallest_scale_sq.is_positive() {
            out.push(format!("smallest scale of row {i} is zero"));
        }
    }
    if d.hypotheses.n1_guaranteed && 2 * d.n1.len() < n {
        out.push(format!("|N1| = {} < n/2 although the hypotheses hold", d.n1.len()));
    }
    // The final block must itself satisfy the first decomposition's items.
    let rows: Vec<usize> = {
        let mut r: Vec<usize> = d.k2.iter().chain(&d.k3).chain(&d.k4).copied().collect();
        r.sort_unstable();
        r
    };
    let mut l1: Vec<usize> = d.k2.iter().chain(&d.k3).copied().collect();
    l1.sort_unstable();
    let d1 = super::Decomposition1 {
        l1,
        l2: d.k4.clone(),
        m1: d.n1.clone(),
        m2: d.n2.clone(),
        rescaling: d.rescaling.clone(),
        scale_partitions: d.scale_partitions.clone(),
        renormalizations: vec![0; k],
        removal_order: Vec::new(),
        s: d.s,
        w: d.w.clone(),
    };
    out.extend(violations_on(m, &rows, &n12, &d1, params)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::lr_cover;
    use crate::scalar::ratio;

    fn identity_system(k: usize) -> CoveringSystem {
        let rows = (0..k)
            .map(|i| (0..k).map(|j| int((i == j) as i64)).collect())
            .collect();
        CoveringSystem::new(k, rows, vec![int(0); k]).unwrap()
    }

    #[test]
    fn identity_is_all_k3() {
        let p = Params::default();
        let sys = identity_system(5);
        let d = second_decomposition(&sys, 1, &ratio(1, 10000), &p).unwrap();
        assert!(d.k1.is_empty() && d.k2.is_empty() && d.k4.is_empty());
        assert_eq!(d.k3, vec![0, 1, 2, 3, 4]);
        assert!(d.n2.is_empty() && d.n3.is_empty());
        assert!(check_decomposition2(&sys, &d, &p).unwrap());
    }

    #[test]
    fn lr_cover_small_w() {
        let p = Params::default();
        let sys = lr_cover(4).unwrap();
        let d = second_decomposition(&sys, 1, &ratio(1, 10000), &p).unwrap();
        assert!(d.n3.is_empty());
        assert!(check_decomposition2(&sys, &d, &p).unwrap());
    }

    #[test]
    fn dense_column_goes_to_n3() {
        let p = Params::default();
        // k = 2, n = 64: threshold 16*4/64 = 1, so every used column is dense.
        let mut rows = vec![vec![int(0); 64]; 2];
        rows[0][0] = int(1);
        rows[1][0] = int(1);
        rows[1][1] = int(2);
        let sys = CoveringSystem::new(64, rows, vec![int(0), int(1)]).unwrap();
        let d = second_decomposition(&sys, 1, &int(1), &p).unwrap();
        assert!(d.n3.contains(&0) && d.n3.contains(&1));
        assert_eq!(d.k1, vec![0, 1]);
        assert!(check_decomposition2(&sys, &d, &p).unwrap());
    }

    #[test]
    fn disjoint_blocks_trace() {
        let p = Params::default();
        let mut rows = vec![vec![int(0); 64]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            for j in 16 * i..16 * (i + 1) {
                row[j] = ratio(1, 4);
            }
        }
        let sys = CoveringSystem::new(64, rows, vec![int(2); 4]).unwrap();
        let d = second_decomposition(&sys, 133, &ratio(104, 100), &p).unwrap();
        assert_eq!(d.k1, vec![0, 1, 2]);
        assert_eq!(d.k2, vec![3]);
        assert_eq!(d.n2, (48..64).collect::<Vec<_>>());
        assert!(d.n1.is_empty());
        let actions: Vec<IterationAction> = d.trace.iter().map(|t| t.action).collect();
        assert_eq!(
            actions,
            vec![
                IterationAction::AbsorbRow,
                IterationAction::AbsorbRow,
                IterationAction::AbsorbRow,
                IterationAction::Stop
            ]
        );
        assert!(check_decomposition2(&sys, &d, &p).unwrap());
    }

    #[test]
    fn k2_violation_is_flagged() {
        let p = Params::default();
        let mut rows = vec![vec![int(0); 64]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            for j in 16 * i..16 * (i + 1) {
                row[j] = ratio(1, 4);
            }
        }
        let sys = CoveringSystem::new(64, rows, vec![int(2); 4]).unwrap();
        let mut d = second_decomposition(&sys, 133, &ratio(104, 100), &p).unwrap();
        // Moving a row into K2 makes 4|K2|^2 = 16 exceed nothing, but the new
        // row is zero on N2 so its support there is 0.
        let moved = d.k1.remove(0);
        d.k2.insert(0, moved);
        assert!(!check_decomposition2(&sys, &d, &p).unwrap());
    }

    #[test]
    fn hypotheses_are_exact() {
        let p = Params::default();
        let tiny = ratio(1, 10_000_000);
        let h = evaluate_hypotheses(1000, 10, 100, 5, &tiny, &p).unwrap();
        assert!(h.h1 && h.h2 && h.sparsity);
        let h = evaluate_hypotheses(1000, 10, 100, 5, &int(2), &p).unwrap();
        assert!(!h.h1 && !h.n1_guaranteed);
        assert!(zero_block_is_large(5, 64, (1, 3)));
        assert!(!zero_block_is_large(4, 64, (1, 3)));
        assert!(zero_block_is_large(1, 0, (1, 3)));
        assert!(!zero_block_is_large(0, 0, (1, 3)));
    }
}
