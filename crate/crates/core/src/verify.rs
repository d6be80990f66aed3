//! Deciding the essential-cover axioms:
//!
//! * E1: every vertex lies on some hyperplane;
//! * E2: every variable has a nonzero coefficient in some row;
//! * E3: every row owns a vertex that no other row contains.
//!
//! E1 and E3 come out of a single Gray-code sweep. Above the enumeration cap
//! the functions here refuse instead of guessing.

use serde::{Deserialize, Serialize};

use crate::cube::{full_sweep, vertex_from_key};
use crate::error::Result;
use crate::params::Params;
use crate::system::{CoveringSystem, Vertex};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EssentialReport {
    pub n: usize,
    pub k: usize,
    pub e1: bool,
    pub uncovered_witness: Option<Vertex>,
    pub e2: bool,
    pub unused_variables: Vec<usize>,
    pub e3: bool,
    pub exclusive_witnesses: Vec<Option<Vertex>>,
    pub support_bound_ok: bool,
    pub support_sizes: Vec<usize>,
    pub is_essential: bool,
}

pub fn check_cover(system: &CoveringSystem, params: &Params) -> Result<(bool, Option<Vertex>)> {
    let stats = full_sweep(system, params, false)?;
    let witness = stats
        .min_uncovered
        .map(|key| vertex_from_key(key, system.n()));
    Ok((witness.is_none(), witness))
}

/// E2. Returns the (0-indexed) columns that are zero in every row.
pub fn check_variable_usage(system: &CoveringSystem) -> (bool, Vec<usize>) {
    let unused: Vec<usize> = (0..system.n())
        .filter(|&j| system.column_support_size(j) == 0)
        .collect();
    (unused.is_empty(), unused)
}

/// E3. Witness `i` is the lexicographically smallest vertex on hyperplane
/// `i` and off every other one.
pub fn check_minimality(
    system: &CoveringSystem,
    params: &Params,
) -> Result<(bool, Vec<Option<Vertex>>)> {
    let stats = full_sweep(system, params, true)?;
    let witnesses: Vec<Option<Vertex>> = stats
        .exclusive
        .iter()
        .map(|k| k.map(|key| vertex_from_key(key, system.n())))
        .collect();
    Ok((witnesses.iter().all(Option::is_some), witnesses))
}

/// Every row of an essential cover has support at most `2k`.
pub fn check_support_bound(system: &CoveringSystem) -> (bool, Vec<usize>) {
    let sizes: Vec<usize> = (0..system.k()).map(|i| system.support(i).len()).collect();
    let ok = sizes.iter().all(|&s| s <= 2 * system.k());
    (ok, sizes)
}

pub fn verify_essential(system: &CoveringSystem, params: &Params) -> Result<EssentialReport> {
    let n = system.n();
    let stats = full_sweep(system, params, true)?;
    let uncovered_witness = stats.min_uncovered.map(|key| vertex_from_key(key, n));
    let exclusive_witnesses: Vec<Option<Vertex>> = stats
        .exclusive
        .iter()
        .map(|k| k.map(|key| vertex_from_key(key, n)))
        .collect();
    let (e2, unused_variables) = check_variable_usage(system);
    let (support_bound_ok, support_sizes) = check_support_bound(system);
    let e1 = uncovered_witness.is_none();
    let e3 = exclusive_witnesses.iter().all(Option::is_some);
    Ok(EssentialReport {
        n,
        k: system.k(),
        e1,
        uncovered_witness,
        e2,
        unused_variables,
        e3,
        exclusive_witnesses,
        support_bound_ok,
        support_sizes,
        is_essential: e1 && e2 && e3,
    })
}
