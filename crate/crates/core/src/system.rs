//! The covering-system data model: `k` hyperplanes `<v_i, x> = mu_i` over the
//! vertices of `{0,1}^n`, with exact rational coefficients.

use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{format_scalar, parse_scalar, squared_norm, Scalar};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoveringSystem {
    n: usize,
    rows: Vec<Vec<Scalar>>,
    mu: Vec<Scalar>,
}

impl CoveringSystem {
    /// Validates shapes and rejects zero rows.
    pub fn new(n: usize, rows: Vec<Vec<Scalar>>, mu: Vec<Scalar>) -> Result<Self> {
        if n == 0 {
            return Err(Error::DimensionMismatch("n must be positive".into()));
        }
        if rows.is_empty() {
            return Err(Error::DimensionMismatch("system has no rows".into()));
        }
        if rows.len() != mu.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} right-hand sides",
                rows.len(),
                mu.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has length {} but n = {n}",
                    row.len()
                )));
            }
            if row.iter().all(Zero::is_zero) {
                return Err(Error::ZeroRow { row: i });
            }
        }
        Ok(CoveringSystem { n, rows, mu })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Scalar>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Scalar] {
        &self.rows[i]
    }

    pub fn mu(&self) -> &[Scalar] {
        &self.mu
    }

    pub fn support(&self, i: usize) -> Vec<usize> {
        self.rows[i]
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(j, _)| j)
            .collect()
    }

    pub fn column_support_size(&self, j: usize) -> usize {
        self.rows.iter().filter(|r| !r[j].is_zero()).count()
    }

    /// Same system without row `i`. Fails if that would leave no rows.
    pub fn without_row(&self, i: usize) -> Result<Self> {
        if i >= self.k() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.k(),
            });
        }
        let mut rows = self.rows.clone();
        let mut mu = self.mu.clone();
        rows.remove(i);
        mu.remove(i);
        CoveringSystem::new(self.n, rows, mu)
    }

    /// Appends a row; used to build redundant or perturbed variants.
    pub fn with_row(&self, row: Vec<Scalar>, mu: Scalar) -> Result<Self> {
        let mut rows = self.rows.clone();
        let mut mus = self.mu.clone();
        rows.push(row);
        mus.push(mu);
        CoveringSystem::new(self.n, rows, mus)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("system serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("system serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct RawSystem {
    n: usize,
    rows: Vec<Vec<serde_json::Value>>,
    mu: Vec<serde_json::Value>,
}

fn value_to_scalar(v: &serde_json::Value, location: &str) -> Result<Scalar> {
    match v {
        serde_json::Value::String(s) => parse_scalar(s, location),
        serde_json::Value::Number(num) if num.is_i64() || num.is_u64() => {
            parse_scalar(&num.to_string(), location)
        }
        other => Err(Error::BadRational {
            text: other.to_string(),
            location: location.to_string(),
        }),
    }
}

/// Parses the system JSON `{"n": int, "rows": [[ratstr,...],...], "mu": [ratstr,...]}`.
pub fn parse_system(text: &str) -> Result<CoveringSystem> {
    let raw: RawSystem =
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    let mut rows = Vec::with_capacity(raw.rows.len());
    for (i, row) in raw.rows.iter().enumerate() {
        let parsed = row
            .iter()
            .enumerate()
            .map(|(j, v)| value_to_scalar(v, &format!("row {i}, column {j}")))
            .collect::<Result<Vec<_>>>()?;
        rows.push(parsed);
    }
    let mu = raw
        .mu
        .iter()
        .enumerate()
        .map(|(i, v)| value_to_scalar(v, &format!("mu {i}")))
        .collect::<Result<Vec<_>>>()?;
    CoveringSystem::new(raw.n, rows, mu)
}

impl Serialize for CoveringSystem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = RawSystem {
            n: self.n,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|v| format_scalar(v).into()).collect())
                .collect(),
            mu: self.mu.iter().map(|v| format_scalar(v).into()).collect(),
        };
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoveringSystem {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        parse_system(&value.to_string()).map_err(serde::de::Error::custom)
    }
}

/// A point of `{0,1}^n`. The derived ordering is lexicographic with `x_1`
/// most significant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vertex(Vec<bool>);

impl Vertex {
    pub fn new(bits: Vec<bool>) -> Self {
        Vertex(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Vertex(vec![false; n])
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Vertex(bits.iter().map(|&b| b != 0).collect())
    }

    /// Bit `j` of `mask` becomes coordinate `j` (0-indexed).
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Vertex((0..n).map(|j| (mask >> j) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j)
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (j, &b) in self.0.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", b as u8)?;
        }
        write!(f, ")")
    }
}

impl Serialize for Vertex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let bits: Vec<u8> = self.0.iter().map(|&b| b as u8).collect();
        bits.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vertex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bits = Vec::<u8>::deserialize(d)?;
        if bits.iter().any(|&b| b > 1) {
            return Err(serde::de::Error::custom("vertex entries must be 0 or 1"));
        }
        Ok(Vertex::from_bits(&bits))
    }
}

/// Positive per-row factors. When `unit_norm_sq[i]` is `Some(q)`, the
/// effective row is `factors[i] * v_i / sqrt(q)`; the irrational square root
/// is never materialized, only its square.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowScaling {
    #[serde(with = "crate::scalar::serde_str::vec")]
    pub factors: Vec<Scalar>,
    #[serde(with = "crate::scalar::serde_str::opt_vec")]
    pub unit_norm_sq: Vec<Option<Scalar>>,
}

impl RowScaling {
    pub fn identity(k: usize) -> Self {
        RowScaling {
            factors: vec![Scalar::from_integer(1.into()); k],
            unit_norm_sq: vec![None; k],
        }
    }

    pub fn from_factors(factors: Vec<Scalar>) -> Self {
        let k = factors.len();
        RowScaling {
            factors,
            unit_norm_sq: vec![None; k],
        }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Square of the effective multiplier of row `i`: `phi_i^2 / q_i`.
    pub fn squared_factor(&self, i: usize) -> Scalar {
        let phi_sq = &self.factors[i] * &self.factors[i];
        match &self.unit_norm_sq[i] {
            Some(q) => phi_sq / q,
            None => phi_sq,
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.factors.len() != k || self.unit_norm_sq.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "scaling has {} factors for {k} rows",
                self.factors.len()
            )));
        }
        if let Some(i) = self.factors.iter().position(|f| !f.is_positive()) {
            return Err(Error::Precondition(format!(
                "rescaling factor {i} is not positive"
            )));
        }
        if let Some(i) = self
            .unit_norm_sq
            .iter()
            .position(|q| q.as_ref().is_some_and(|q| !q.is_positive()))
        {
            return Err(Error::Precondition(format!(
                "squared norm of row {i} is not positive"
            )));
        }
        Ok(())
    }
}

/// Multiplies row `i` and `mu_i` by `phi_i`. Unit-normalized factors carry an
/// irrational part and cannot be materialized; they are rejected here.
pub fn apply_rescaling(system: &CoveringSystem, scaling: &RowScaling) -> Result<CoveringSystem> {
    scaling.validate(system.k())?;
    if scaling.unit_norm_sq.iter().any(Option::is_some) {
        return Err(Error::Precondition(
            "unit-normalized rows are tracked as squared norms and cannot be applied exactly"
                .into(),
        ));
    }
    let rows = system
        .rows
        .iter()
        .zip(&scaling.factors)
        .map(|(row, phi)| row.iter().map(|v| v * phi).collect())
        .collect();
    let mu = system
        .mu
        .iter()
        .zip(&scaling.factors)
        .map(|(m, phi)| m * phi)
        .collect();
    CoveringSystem::new(system.n, rows, mu)
}

pub fn row_squared_norms(system: &CoveringSystem) -> Vec<Scalar> {
    system.rows.iter().map(squared_norm).collect()
}

/// A unit-normalized row kept exact: the effective vector is
/// `row / sqrt(norm_sq)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitRow {
    #[serde(with = "crate::scalar::serde_str::vec")]
    pub row: Vec<Scalar>,
    #[serde(with = "crate::scalar::serde_str")]
    pub norm_sq: Scalar,
}

impl UnitRow {
    /// Pairs `row` with its own squared norm. Fails on a zero row.
    pub fn normalize(row: Vec<Scalar>) -> Result<Self> {
        let norm_sq = squared_norm(&row);
        if norm_sq.is_zero() {
            return Err(Error::Precondition("zero row cannot be normalized".into()));
        }
        Ok(UnitRow { row, norm_sq })
    }

    pub fn len(&self) -> usize {
        self.row.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row.is_empty()
    }

    /// Effective entries as floats.
    pub fn to_f64(&self) -> Vec<f64> {
        let scale = crate::scalar::to_f64(&self.norm_sq).sqrt();
        self.row
            .iter()
            .map(|v| crate::scalar::to_f64(v) / scale)
            .collect()
    }
}
