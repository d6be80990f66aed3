use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::check_rectangular;
use crate::anticonc::{validate_scales_on, ScalePartition};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::scalar::{int, Scalar};
use crate::system::RowScaling;

/// Output of the first decomposition. Row and column indices refer to the
/// input matrix. The rescaled row `i` is `v_i / sqrt(q_i)` with `q_i` stored
/// in `rescaling.unit_norm_sq`; rows that never carried mass keep factor 1.
/// Scale partitions are stated for the unscaled rows, which is equivalent
/// because the decay condition is invariant under scaling a row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition1 {
    pub l1: Vec<usize>,
    pub l2: Vec<usize>,
    pub m1: Vec<usize>,
    pub m2: Vec<usize>,
    pub rescaling: RowScaling,
    pub scale_partitions: BTreeMap<usize, ScalePartition>,
    /// Renormalizations performed inside the loop, per row.
    pub renormalizations: Vec<usize>,
    /// Columns in the order they left `M1`.
    pub removal_order: Vec<usize>,
    pub s: usize,
    #[serde(with = "crate::scalar::serde_str")]
    pub w: Scalar,
}

/// Runs the first decomposition on the whole matrix.
pub fn first_decomposition(
    matrix: &[Vec<Scalar>],
    s: usize,
    w: &Scalar,
    params: &Params,
) -> Result<Decomposition1> {
    let m = check_rectangular(matrix)?;
    let rows: Vec<usize> = (0..matrix.len()).collect();
    let cols: Vec<usize> = (0..m).collect();
    first_on(matrix, &rows, &cols, s, w, params)
}

fn sq(x: &Scalar) -> Scalar {
    x * x
}

/// The first decomposition restricted to the submatrix `rows x cols`.
///
/// Each active row starts normalized to unit mass on the active columns.
/// Columns of `L1`-mass at least `tau/W` leave `M1` one at a time, lowest
/// index first. A row whose remaining mass falls into `(0, tau]` is
/// renormalized, which closes one scale; after `S` renormalizations the row
/// moves to `L2` and its scale partition is recorded. Rows left in `L1` with
/// nonzero mass are renormalized once more at the end.
pub(crate) fn first_on(
    matrix: &[Vec<Scalar>],
    rows: &[usize],
    cols: &[usize],
    s: usize,
    w: &Scalar,
    params: &Params,
) -> Result<Decomposition1> {
    if s == 0 {
        return Err(Error::Precondition("S must be at least 1".into()));
    }
    if !w.is_positive() {
        return Err(Error::Precondition("W must be positive".into()));
    }
    let ncols = check_rectangular(matrix)?;
    if rows.iter().any(|&i| i >= matrix.len()) || cols.iter().any(|&j| j >= ncols) {
        return Err(Error::DimensionMismatch("active set out of range".into()));
    }
    let tau = params.tau();
    let threshold = &tau / w;
    let c1 = params.c1();
    let k = matrix.len();

    let mut in_m1 = vec![false; ncols];
    cols.iter().for_each(|&j| in_m1[j] = true);
    let mut in_l1 = vec![false; k];
    rows.iter().for_each(|&i| in_l1[i] = true);

    // Active support of each row and active rows of each column.
    let mut row_supp: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); ncols];
    for &i in rows {
        for &j in cols {
            if !matrix[i][j].is_zero() {
                row_supp[i].push(j);
                col_rows[j].push(i);
            }
        }
    }
    for list in col_rows.iter_mut() {
        list.sort_unstable();
    }

    // mass[i]: unscaled squared mass of row i on M1; q[i]: current normalizer.
    let mut mass: Vec<Scalar> = vec![Scalar::zero(); k];
    let mut q: Vec<Option<Scalar>> = vec![None; k];
    for &i in rows {
        let mi: Scalar = row_supp[i].iter().map(|&j| sq(&matrix[i][j])).sum();
        if mi.is_positive() {
            q[i] = Some(mi.clone());
        }
        mass[i] = mi;
    }
    let mut col_mass: Vec<Scalar> = vec![Scalar::zero(); ncols];
    for &j in cols {
        col_mass[j] = col_rows[j]
            .iter()
            .filter_map(|&i| q[i].as_ref().map(|qi| sq(&matrix[i][j]) / qi))
            .sum();
    }

    let mut renorms = vec![0usize; k];
    let mut epoch_start = vec![0usize; k];
    let mut parts: Vec<Vec<Vec<usize>>> = vec![Vec::new(); k];
    let mut removed: Vec<usize> = Vec::new();
    let mut scale_partitions = BTreeMap::new();

    let mut sorted_cols = cols.to_vec();
    sorted_cols.sort_unstable();
    while let Some(j) = sorted_cols
        .iter()
        .copied()
        .find(|&j| in_m1[j] && col_mass[j] >= threshold)
    {
        // Step 1.
        in_m1[j] = false;
        removed.push(j);
        let touched: Vec<usize> = col_rows[j].iter().copied().filter(|&i| in_l1[i]).collect();
        for &i in &touched {
            mass[i] -= sq(&matrix[i][j]);
        }
        // Steps 2 and 3.
        for i in touched {
            let qi = q[i].clone().expect("a row touching M1 has a normalizer");
            if !(mass[i].is_positive() && mass[i] <= &tau * &qi) {
                continue;
            }
            parts[i].push(removed[epoch_start[i]..].to_vec());
            epoch_start[i] = removed.len();
            let new_q = mass[i].clone();
            let delta = Scalar::one() / &new_q - Scalar::one() / &qi;
            for &c in &row_supp[i] {
                if in_m1[c] {
                    col_mass[c] += sq(&matrix[i][c]) * &delta;
                }
            }
            q[i] = Some(new_q.clone());
            renorms[i] += 1;
            if renorms[i] == s {
                in_l1[i] = false;
                for &c in &row_supp[i] {
                    if in_m1[c] {
                        col_mass[c] -= sq(&matrix[i][c]) / &new_q;
                    }
                }
                let mut row_parts = std::mem::take(&mut parts[i]);
                let mut last = row_parts.pop().unwrap_or_default();
                last.extend(cols.iter().copied().filter(|&c| in_m1[c]));
                row_parts.push(last);
                let partition = ScalePartition::from_parts(&matrix[i], row_parts, c1.clone())?;
                scale_partitions.insert(i, partition);
            }
        }
    }

    // Final renormalization of L1 rows.
    for &i in rows {
        if in_l1[i] && mass[i].is_positive() {
            q[i] = Some(mass[i].clone());
        }
    }

    let mut rescaling = RowScaling::identity(k);
    rescaling.unit_norm_sq = q;

    let mut l1: Vec<usize> = rows.iter().copied().filter(|&i| in_l1[i]).collect();
    let mut l2: Vec<usize> = rows.iter().copied().filter(|&i| !in_l1[i]).collect();
    let mut m1: Vec<usize> = cols.iter().copied().filter(|&j| in_m1[j]).collect();
    let mut m2 = removed.clone();
    l1.sort_unstable();
    l2.sort_unstable();
    m1.sort_unstable();
    m2.sort_unstable();
    Ok(Decomposition1 {
        l1,
        l2,
        m1,
        m2,
        rescaling,
        scale_partitions,
        renormalizations: renorms,
        removal_order: removed,
        s,
        w: w.clone(),
    })
}

/// True iff every invariant of `d` holds on `matrix`, in exact arithmetic.
pub fn check_decomposition1(matrix: &[Vec<Scalar>], d: &Decomposition1, params: &Params) -> Result<bool> {
    Ok(decomposition1_violations(matrix, d, params)?.is_empty())
}

/// Every invariant of `d` that fails on `matrix`, as readable messages.
pub fn decomposition1_violations(
    matrix: &[Vec<Scalar>],
    d: &Decomposition1,
    params: &Params,
) -> Result<Vec<String>> {
    let m = check_rectangular(matrix)?;
    let rows: Vec<usize> = (0..matrix.len()).collect();
    let cols: Vec<usize> = (0..m).collect();
    violations_on(matrix, &rows, &cols, d, params)
}

pub(crate) fn violations_on(
    matrix: &[Vec<Scalar>],
    rows: &[usize],
    cols: &[usize],
    d: &Decomposition1,
    params: &Params,
) -> Result<Vec<String>> {
    let ncols = check_rectangular(matrix)?;
    if d.rescaling.len() != matrix.len() || d.renormalizations.len() != matrix.len() {
        return Err(Error::DimensionMismatch("decomposition does not match the matrix".into()));
    }
    let in_range = |v: &[usize], len: usize| v.iter().all(|&x| x < len);
    if !in_range(&d.l1, matrix.len())
        || !in_range(&d.l2, matrix.len())
        || !in_range(&d.m1, ncols)
        || !in_range(&d.m2, ncols)
    {
        return Err(Error::DimensionMismatch("decomposition index out of range".into()));
    }
    let mut out = Vec::new();
    let set = |v: &[usize]| v.iter().copied().collect::<BTreeSet<usize>>();
    let same = |a: &[&[usize]], b: &[usize]| {
        let mut all: Vec<usize> = a.iter().flat_map(|p| p.iter().copied()).collect();
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        all.len() == n && all == set(b).into_iter().collect::<Vec<_>>()
    };
    if !same(&[&d.l1, &d.l2], rows) {
        out.push("L1, L2 do not partition the rows".to_string());
    }
    if !same(&[&d.m1, &d.m2], cols) {
        out.push("M1, M2 do not partition the columns".to_string());
    }
    if d.rescaling.factors.iter().any(|f| !f.is_positive())
        || d.rescaling.unit_norm_sq.iter().flatten().any(|q| !q.is_positive())
    {
        out.push("rescaling has a non-positive factor".to_string());
    }
    if d.s == 0 || !d.w.is_positive() {
        out.push("S and W must be positive".to_string());
        return Ok(out);
    }
    let bound = params.c3() * int(rows.len() as i64) * int(d.s as i64) * &d.w;
    if int(d.m2.len() as i64) > bound {
        out.push(format!("|M2| = {} exceeds C3 k S W", d.m2.len()));
    }
    for &i in &d.l1 {
        let f = d.rescaling.squared_factor(i);
        let norm: Scalar = d.m1.iter().map(|&j| sq(&matrix[i][j])).sum::<Scalar>() * f;
        if !norm.is_zero() && !norm.is_one() {
            out.push(format!("row {i} of L1 has squared norm {norm} on M1"));
        }
    }
    let inv_w = Scalar::one() / &d.w;
    for &j in &d.m1 {
        let col: Scalar = d
            .l1
            .iter()
            .map(|&i| sq(&matrix[i][j]) * d.rescaling.squared_factor(i))
            .sum();
        if col >= inv_w {
            out.push(format!("column {j} has squared norm {col} >= 1/W on L1"));
        }
    }
    for &i in &d.l2 {
        let Some(p) = d.scale_partitions.get(&i) else {
            out.push(format!("row {i} of L2 has no scale partition"));
            continue;
        };
        if p.s() != d.s {
            out.push(format!("row {i} has {} scales, expected {}", p.s(), d.s));
        }
        if !validate_scales_on(&matrix[i], cols, p)? {
            out.push(format!("row {i} has an invalid scale partition"));
        }
        let last: BTreeSet<usize> = p.parts.last().map(|l| set(l)).unwrap_or_default();
        if d.m1.iter().any(|j| !last.contains(j)) {
            out.push(format!("smallest scale of row {i} does not contain M1"));
        }
        if !p.smallest_scale_sq.is_positive() {
            out.push(format!("smallest scale of row {i} is zero"));
        }
    }
    Ok(out)
}
