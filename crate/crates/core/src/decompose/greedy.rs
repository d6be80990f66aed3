use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::is_partition;
use crate::error::{Error, Result};
use crate::system::CoveringSystem;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedySplit {
    /// Rows in removal order.
    pub l1: Vec<usize>,
    pub l2: Vec<usize>,
    pub m1: Vec<usize>,
    pub m2: Vec<usize>,
    pub threshold: usize,
}

/// Repeatedly moves a row whose support outside `M2` has fewer than
/// `threshold` columns into `L1`, absorbing its support into `M2`.
///
/// Rows are scanned in index order and the scan wraps around until a full
/// pass moves nothing, so `L1` records the order in which rows were taken.
pub fn greedy_support_split(system: &CoveringSystem, threshold: usize) -> Result<GreedySplit> {
    if threshold == 0 {
        return Err(Error::Precondition("threshold must be at least 1".into()));
    }
    let n = system.n();
    let supports: Vec<Vec<usize>> = (0..system.k()).map(|i| system.support(i)).collect();
    let mut in_m2 = vec![false; n];
    let mut taken = vec![false; system.k()];
    let mut l1 = Vec::new();
    loop {
        let mut moved = false;
        for (i, supp) in supports.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let residual = supp.iter().filter(|&&j| !in_m2[j]).count();
            if residual < threshold {
                taken[i] = true;
                l1.push(i);
                supp.iter().for_each(|&j| in_m2[j] = true);
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    Ok(GreedySplit {
        l1,
        l2: (0..system.k()).filter(|&i| !taken[i]).collect(),
        m1: (0..n).filter(|&j| !in_m2[j]).collect(),
        m2: (0..n).filter(|&j| in_m2[j]).collect(),
        threshold,
    })
}

/// Lists every way in which `split` fails the split invariants.
pub fn greedy_split_violations(system: &CoveringSystem, split: &GreedySplit) -> Vec<String> {
    let mut out = Vec::new();
    if !is_partition(system.k(), &[&split.l1, &split.l2]) {
        out.push("L1, L2 do not partition the rows".into());
    }
    if !is_partition(system.n(), &[&split.m1, &split.m2]) {
        out.push("M1, M2 do not partition the columns".into());
        return out;
    }
    for &i in &split.l1 {
        if split.m1.iter().any(|&j| !system.row(i)[j].is_zero()) {
            out.push(format!("row {i} of L1 is nonzero on M1"));
        }
    }
    for &i in &split.l2 {
        let supp = split.m1.iter().filter(|&&j| !system.row(i)[j].is_zero()).count();
        if supp < split.threshold {
            out.push(format!("row {i} of L2 has support {supp} on M1"));
        }
    }
    let mut covered = vec![false; system.n()];
    for &i in &split.l1 {
        let supp = system.support(i);
        let fresh = supp.iter().filter(|&&j| !covered[j]).count();
        if fresh >= split.threshold {
            out.push(format!("row {i} adds {fresh} new columns when removed"));
        }
        supp.iter().for_each(|&j| covered[j] = true);
    }
    out
}
