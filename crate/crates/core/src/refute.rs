//! End-to-end attempt to exhibit an uncovered vertex. Coordinates are fixed
//! block by block: `N3` avoids the `K1` rows, `N2` is sampled until the `K2`
//! and `K4` rows provably miss the remaining subcube, and `N1` comes from the
//! plank-lemma finder on the `K3` rows. The assembled vertex is checked
//! against the original system before it is returned.

use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{enumerate_uncovered, is_uncovered, sample_uncovered};
use crate::decompose::{second_decomposition, Decomposition2, HypothesisReport};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::plank::{check_small_norm_precondition, find_uncovered_small_norm, SmallNormCheck};
use crate::scalar::{from_f64, format_scalar, int, Scalar};
use crate::system::{CoveringSystem, UnitRow, Vertex};

const N3_STREAM: u64 = 0x6e33;
const N2_STREAM: u64 = 0x6e32;
const PLANK_STREAM: u64 = 0x706c;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    DecompositionHypotheses,
    N3Assignment,
    N2Sampling,
    SmallNormPrecondition,
    RoundingCap,
    /// Never expected: every earlier stage certifies its block exactly.
    FinalVerification,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Uncovered,
    Failed,
}

/// Values for a subset of coordinates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialAssignment {
    pub columns: Vec<usize>,
    pub values: Vec<bool>,
}

impl PartialAssignment {
    pub fn zeros(columns: &[usize]) -> Self {
        PartialAssignment {
            columns: columns.to_vec(),
            values: vec![false; columns.len()],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// `sum_j row[j] * value_j` over the assigned coordinates.
    pub fn dot(&self, row: &[Scalar]) -> Scalar {
        self.columns
            .iter()
            .zip(&self.values)
            .filter(|(_, &b)| b)
            .map(|(&j, _)| &row[j])
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum N3Mode {
    Empty,
    Zeros,
    Exhaustive,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct N3Choice {
    pub assignment: PartialAssignment,
    pub mode: N3Mode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct N2Choice {
    pub assignment: PartialAssignment,
    pub attempts: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RefutationDetail {
    pub n: usize,
    pub k: usize,
    pub s: usize,
    pub w: String,
    /// Sizes of `K1..K4`.
    pub row_blocks: Vec<usize>,
    /// Sizes of `N1..N3`.
    pub column_blocks: Vec<usize>,
    pub hypotheses: Option<HypothesisReport>,
    pub n3_mode: Option<N3Mode>,
    pub n2_attempts: Option<usize>,
    pub small_norm: Option<SmallNormCheck>,
    pub plank_attempts: Option<usize>,
    /// Stage that actually failed when `stage` reports the hypotheses.
    pub downstream_stage: Option<Stage>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefutationOutcome {
    pub status: Status,
    pub vertex: Option<Vertex>,
    pub stage: Option<Stage>,
    pub detail: RefutationDetail,
}

/// `S = max(1, floor(C5 ln n))` and `W = c ln(max(n, 2)) k^2 / n`, the
/// latter converted exactly from its `f64` value.
pub fn pipeline_parameters(n: usize, k: usize, params: &Params) -> Result<(usize, Scalar)> {
    let ln_n = (n.max(2) as f64).ln();
    let s = ((params.c5 * (n.max(1) as f64).ln()).floor() as usize).max(1);
    let w = params.w_multiplier * ln_n * (k * k) as f64 / n as f64;
    let w = from_f64(w)
        .filter(Signed::is_positive)
        .ok_or_else(|| Error::Precondition(format!("W = {w} is not a positive number")))?;
    Ok((s, w))
}

/// A vertex of `{0,1}^N3` missed by every `K1` row (all zero off `N3`).
pub fn choose_n3_assignment(
    system: &CoveringSystem,
    d: &Decomposition2,
    params: &Params,
) -> Result<N3Choice> {
    if d.n3.is_empty() {
        return Ok(N3Choice {
            assignment: PartialAssignment::default(),
            mode: N3Mode::Empty,
        });
    }
    if d.k1.is_empty() {
        return Ok(N3Choice {
            assignment: PartialAssignment::zeros(&d.n3),
            mode: N3Mode::Zeros,
        });
    }
    let rows = d
        .k1
        .iter()
        .map(|&i| d.n3.iter().map(|&j| system.row(i)[j].clone()).collect())
        .collect();
    let mu = d.k1.iter().map(|&i| system.mu()[i].clone()).collect();
    let sub = CoveringSystem::new(d.n3.len(), rows, mu)?;
    let (witness, mode) = if d.n3.len() <= params.enumeration_cap {
        let report = enumerate_uncovered(&sub, params)?;
        (report.witness, N3Mode::Exhaustive)
    } else {
        let trials = params.sample_cap as u64;
        let report = sample_uncovered(&sub, trials, params.seed ^ N3_STREAM)?;
        if report.witness.is_none() {
            return Err(Error::SampleCapExhausted {
                cap: params.sample_cap,
            });
        }
        (report.witness, N3Mode::Sampled)
    };
    let x = witness.ok_or_else(|| {
        Error::Precondition("the K1 rows cover every assignment of N3".into())
    })?;
    Ok(N3Choice {
        assignment: PartialAssignment {
            columns: d.n3.clone(),
            values: x.bits().to_vec(),
        },
        mode,
    })
}

/// The acceptance test for a candidate `w` on `N2`.
struct N2Predicate<'a> {
    system: &'a CoveringSystem,
    d: &'a Decomposition2,
    /// `mu_i - <v_i|N3, u3>` for every row.
    shifted_mu: Vec<Scalar>,
    /// Per `K4` row: `(N2 \ B, n * |v|_{N1 u B}|^2)`.
    k4: Vec<(usize, Vec<usize>, Scalar)>,
}

impl<'a> N2Predicate<'a> {
    fn new(system: &'a CoveringSystem, d: &'a Decomposition2, u3: &PartialAssignment) -> Result<Self> {
        let shifted_mu = (0..system.k())
            .map(|i| &system.mu()[i] - u3.dot(system.row(i)))
            .collect();
        let n = int(system.n() as i64);
        let mut k4 = Vec::with_capacity(d.k4.len());
        for &i in &d.k4 {
            let p = d.scale_partitions.get(&i).ok_or_else(|| {
                Error::Precondition(format!("K4 row {i} has no scale partition"))
            })?;
            let last = p.parts.last().cloned().unwrap_or_default();
            let row = system.row(i);
            let outside: Vec<usize> = d.n2.iter().copied().filter(|j| !last.contains(j)).collect();
            let small: Scalar = d
                .n1
                .iter()
                .chain(d.n2.iter().filter(|j| last.contains(j)))
                .map(|&j| &row[j] * &row[j])
                .sum();
            k4.push((i, outside, &n * small));
        }
        Ok(N2Predicate {
            system,
            d,
            shifted_mu,
            k4,
        })
    }

    fn accepts(&self, w: &PartialAssignment) -> bool {
        let k2_ok = self
            .d
            .k2
            .iter()
            .all(|&i| w.dot(self.system.row(i)) != self.shifted_mu[i]);
        k2_ok
            && self.k4.iter().all(|(i, outside, bound)| {
                let row = self.system.row(*i);
                let s: Scalar = w
                    .columns
                    .iter()
                    .zip(&w.values)
                    .filter(|(j, &b)| b && outside.contains(j))
                    .map(|(&j, _)| &row[j])
                    .sum();
                let gap = s - &self.shifted_mu[*i];
                &gap * &gap > *bound
            })
    }
}

/// Rejection-samples `w` uniform on `{0,1}^N2` until no `K2` row and no `K4`
/// row can be completed by any choice on `N1`. For a `K4` row with smallest
/// scale `B` inside `N2`, the test is
/// `(<v|N2\B, w> - mu')^2 > n |v|_{N1 u B}|^2`, which rules out every
/// completion by Cauchy-Schwarz.
pub fn sample_n2_assignment(
    system: &CoveringSystem,
    d: &Decomposition2,
    u3: &PartialAssignment,
    params: &Params,
) -> Result<N2Choice> {
    let predicate = N2Predicate::new(system, d, u3)?;
    if d.k2.is_empty() && d.k4.is_empty() {
        return Ok(N2Choice {
            assignment: PartialAssignment::zeros(&d.n2),
            attempts: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ N2_STREAM);
    // With N2 empty every draw is the same, so one attempt decides.
    let cap = if d.n2.is_empty() { 1 } else { params.sample_cap };
    for attempt in 1..=cap {
        let w = PartialAssignment {
            columns: d.n2.clone(),
            values: (0..d.n2.len()).map(|_| rng.gen()).collect(),
        };
        if predicate.accepts(&w) {
            return Ok(N2Choice {
                assignment: w,
                attempts: attempt,
            });
        }
    }
    Err(Error::SampleCapExhausted { cap })
}

/// Runs the pipeline with `S` and `W` from [`pipeline_parameters`].
pub fn attempt_refutation(system: &CoveringSystem, params: &Params) -> RefutationOutcome {
    match pipeline_parameters(system.n(), system.k(), params) {
        Ok((s, w)) => attempt_refutation_with(system, s, &w, params),
        Err(e) => RefutationOutcome {
            status: Status::Failed,
            vertex: None,
            stage: Some(Stage::DecompositionHypotheses),
            detail: RefutationDetail {
                n: system.n(),
                k: system.k(),
                message: e.to_string(),
                ..RefutationDetail::default()
            },
        },
    }
}

/// Runs the pipeline with explicit `S` and `W`.
pub fn attempt_refutation_with(
    system: &CoveringSystem,
    s: usize,
    w: &Scalar,
    params: &Params,
) -> RefutationOutcome {
    let mut detail = RefutationDetail {
        n: system.n(),
        k: system.k(),
        s,
        w: format_scalar(w),
        ..RefutationDetail::default()
    };
    match run_pipeline(system, s, w, params, &mut detail) {
        Ok(vertex) => RefutationOutcome {
            status: Status::Uncovered,
            vertex: Some(vertex),
            stage: None,
            detail,
        },
        Err((stage, message)) => {
            detail.message = message;
            let hypotheses_hold = detail.hypotheses.as_ref().is_some_and(|h| h.h1 && h.h2);
            let reported = if hypotheses_hold || stage == Stage::DecompositionHypotheses {
                stage
            } else {
                detail.downstream_stage = Some(stage);
                Stage::DecompositionHypotheses
            };
            RefutationOutcome {
                status: Status::Failed,
                vertex: None,
                stage: Some(reported),
                detail,
            }
        }
    }
}

type StageResult<T> = std::result::Result<T, (Stage, String)>;

fn at<T>(stage: Stage, r: Result<T>) -> StageResult<T> {
    r.map_err(|e| (stage, e.to_string()))
}

fn run_pipeline(
    system: &CoveringSystem,
    s: usize,
    w: &Scalar,
    params: &Params,
    detail: &mut RefutationDetail,
) -> StageResult<Vertex> {
    let d = at(
        Stage::DecompositionHypotheses,
        second_decomposition(system, s, w, params),
    )?;
    detail.row_blocks = vec![d.k1.len(), d.k2.len(), d.k3.len(), d.k4.len()];
    detail.column_blocks = vec![d.n1.len(), d.n2.len(), d.n3.len()];
    detail.hypotheses = Some(d.hypotheses.clone());

    let n3 = at(Stage::N3Assignment, choose_n3_assignment(system, &d, params))?;
    detail.n3_mode = Some(n3.mode);

    let n2 = at(
        Stage::N2Sampling,
        sample_n2_assignment(system, &d, &n3.assignment, params),
    )?;
    detail.n2_attempts = Some(n2.attempts);

    let mut bits = vec![false; system.n()];
    for part in [&n3.assignment, &n2.assignment] {
        for (&j, &b) in part.columns.iter().zip(&part.values) {
            bits[j] = b;
        }
    }

    if !d.k3.is_empty() {
        let fixed = Vertex::new(bits.clone());
        let rows: Vec<UnitRow> = d
            .k3
            .iter()
            .map(|&i| UnitRow::normalize(d.n1.iter().map(|&j| system.row(i)[j].clone()).collect()))
            .collect::<Result<_>>()
            .map_err(|e| (Stage::SmallNormPrecondition, e.to_string()))?;
        let check = at(Stage::SmallNormPrecondition, check_small_norm_precondition(&rows))?;
        detail.small_norm = Some(check.clone());
        if !check.ok {
            return Err((
                Stage::SmallNormPrecondition,
                format!(
                    "2 alpha beta ln(4 ell) = {:.6} > 1 (alpha = {}, beta = {:.6}, ell = {}, |N1| = {})",
                    check.lhs,
                    check.alpha,
                    check.beta,
                    check.ell,
                    d.n1.len()
                ),
            ));
        }
        let residual: Vec<Scalar> = d
            .k3
            .iter()
            .map(|&i| {
                let row = system.row(i);
                let fixed_part: Scalar = fixed.ones().map(|j| &row[j]).sum();
                &system.mu()[i] - fixed_part
            })
            .collect();
        let plank_params = Params {
            seed: params.seed ^ PLANK_STREAM,
            ..params.clone()
        };
        let found = find_uncovered_small_norm(&rows, &residual, &plank_params).map_err(|e| {
            let stage = match e {
                Error::SampleCapExhausted { .. } => Stage::RoundingCap,
                _ => Stage::SmallNormPrecondition,
            };
            (stage, e.to_string())
        })?;
        detail.plank_attempts = Some(found.attempts);
        for (t, &j) in d.n1.iter().enumerate() {
            bits[j] = found.vertex.get(t);
        }
    }

    let u = Vertex::new(bits);
    match is_uncovered(system, &u) {
        Ok(true) => {
            detail.message = "vertex verified against every row".into();
            Ok(u)
        }
        Ok(false) => Err((
            Stage::FinalVerification,
            "assembled vertex lies on a hyperplane".into(),
        )),
        Err(e) => Err((Stage::FinalVerification, e.to_string())),
    }
}
