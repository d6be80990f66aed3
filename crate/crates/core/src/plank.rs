//! Plank-lemma sign search and the randomized-rounding finder for systems
//! whose columns have small norm.
//!
//! Everything numeric here is `f64`; the finder only proposes candidates and
//! every returned vertex is checked exactly against the rational rows.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::scalar::{clear_denominators, to_f64, Scalar};
use crate::system::{UnitRow, Vertex};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignVector {
    pub signs: Vec<i8>,
}

impl SignVector {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Malformed("sign entries must be +1 or -1".into()));
        }
        Ok(SignVector { signs })
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BangResult {
    pub signs: SignVector,
    /// Accepted flips; the objective rose strictly at each one.
    pub flips: usize,
    /// `<M(theta eps), theta eps> - 2 <theta eps, zeta>` at the end.
    pub objective: f64,
}

/// The objective the flip ascent maximizes.
pub fn bang_objective(m: &[Vec<f64>], zeta: &[f64], theta: &[f64], signs: &[i8]) -> f64 {
    let u: Vec<f64> = theta
        .iter()
        .zip(signs)
        .map(|(t, &e)| t * f64::from(e))
        .collect();
    let mut quad = 0.0;
    for (i, row) in m.iter().enumerate() {
        let mu: f64 = row.iter().zip(&u).map(|(a, b)| a * b).sum();
        quad += u[i] * mu;
    }
    let lin: f64 = u.iter().zip(zeta).map(|(a, b)| a * b).sum();
    quad - 2.0 * lin
}

/// Magnitude scale used to turn `float_tol` into an absolute tolerance.
pub fn bang_scale(m: &[Vec<f64>], zeta: &[f64], theta: &[f64]) -> f64 {
    let m_max = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    let theta_sum: f64 = theta.iter().sum();
    let zeta_max = zeta.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    1.0 + m_max * theta_sum + zeta_max
}

fn validate_bang_input(m: &[Vec<f64>], zeta: &[f64], theta: &[f64], tol: f64) -> Result<()> {
    let k = m.len();
    if zeta.len() != k || theta.len() != k || m.iter().any(|r| r.len() != k) {
        return Err(Error::DimensionMismatch(format!(
            "M must be {k}x{k} with zeta and theta of length {k}"
        )));
    }
    let all = m.iter().flatten().chain(zeta).chain(theta);
    if all.into_iter().any(|x| !x.is_finite()) {
        return Err(Error::Malformed("non-finite entry".into()));
    }
    for i in 0..k {
        if m[i][i] < 0.0 {
            return Err(Error::Precondition(format!("negative diagonal at {i}")));
        }
        if theta[i] < 0.0 {
            return Err(Error::Precondition(format!("negative theta at {i}")));
        }
        for j in 0..i {
            let slack = tol * (1.0 + m[i][j].abs().max(m[j][i].abs()));
            if (m[i][j] - m[j][i]).abs() > slack {
                return Err(Error::Precondition(format!("M is not symmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// Steepest single-flip ascent from a seeded random start.
///
/// With `u = theta * eps`, flipping `t` changes the objective by
/// `-4 theta_t s_t` where `s_t = eps_t (sum_{i != t} M_ti u_i - zeta_t)`.
/// At a flip-local maximum every `s_t >= 0` (for `theta_t > 0`), which is
/// exactly `|(M u)_t - zeta_t| >= M_tt theta_t`.
pub fn bang_signs(
    m: &[Vec<f64>],
    zeta: &[f64],
    theta: &[f64],
    seed: u64,
    params: &Params,
) -> Result<BangResult> {
    validate_bang_input(m, zeta, theta, params.float_tol)?;
    let k = m.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut signs: Vec<i8> = (0..k).map(|_| if rng.gen() { 1 } else { -1 }).collect();
    let tol_s = 1e-12 * bang_scale(m, zeta, theta);
    let mut u: Vec<f64> = (0..k).map(|i| theta[i] * f64::from(signs[i])).collect();
    // mu_u[t] = (M u)_t
    let mut mu_u: Vec<f64> = m
        .iter()
        .map(|row| row.iter().zip(&u).map(|(a, b)| a * b).sum())
        .collect();
    let max_flips = 64 * k * k + 1024;
    let mut flips = 0;
    loop {
        let mut best: Option<(usize, f64)> = None;
        for t in 0..k {
            if theta[t] <= 0.0 {
                continue;
            }
            let s_t = f64::from(signs[t]) * (mu_u[t] - m[t][t] * u[t] - zeta[t]);
            if s_t < -tol_s {
                let gain = -4.0 * theta[t] * s_t;
                if best.is_none_or(|(_, g)| gain > g) {
                    best = Some((t, gain));
                }
            }
        }
        let Some((t, _)) = best else { break };
        if flips >= max_flips {
            break;
        }
        let delta = -2.0 * u[t];
        signs[t] = -signs[t];
        u[t] = -u[t];
        for (i, row) in m.iter().enumerate() {
            mu_u[i] += row[t] * delta;
        }
        flips += 1;
        // refresh accumulated sums occasionally to limit drift
        if flips % 256 == 0 {
            for (i, row) in m.iter().enumerate() {
                mu_u[i] = row.iter().zip(&u).map(|(a, b)| a * b).sum();
            }
        }
    }
    let objective = bang_objective(m, zeta, theta, &signs);
    Ok(BangResult {
        signs: SignVector { signs },
        flips,
        objective,
    })
}

/// True iff `|(M(theta eps))_t - zeta_t| >= M_tt theta_t - tol` for every t.
pub fn bang_inequality_holds(
    m: &[Vec<f64>],
    zeta: &[f64],
    theta: &[f64],
    signs: &[i8],
    tol: f64,
) -> bool {
    let u: Vec<f64> = theta
        .iter()
        .zip(signs)
        .map(|(t, &e)| t * f64::from(e))
        .collect();
    (0..m.len()).all(|t| {
        let mu: f64 = m[t].iter().zip(&u).map(|(a, b)| a * b).sum();
        (mu - zeta[t]).abs() >= m[t][t] * theta[t] - tol
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallNormCheck {
    pub alpha: usize,
    pub beta: f64,
    #[serde(with = "crate::scalar::serde_str")]
    pub beta_exact: Scalar,
    pub ell: usize,
    pub lhs: f64,
    pub ok: bool,
}

/// `alpha` = largest column support, `beta` = largest column squared norm of
/// the unit-normalized rows, and `lhs = 2 alpha beta ln(4 ell)`.
pub fn check_small_norm_precondition(rows: &[UnitRow]) -> Result<SmallNormCheck> {
    let ell = rows.len();
    if ell == 0 {
        return Err(Error::Precondition("no rows".into()));
    }
    let m = rows[0].len();
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch("rows of different lengths".into()));
    }
    for (i, r) in rows.iter().enumerate() {
        if !r.norm_sq.is_positive() || r.row.iter().all(Zero::is_zero) {
            return Err(Error::ZeroRow { row: i });
        }
    }
    let mut alpha = 0;
    let mut beta_exact = Scalar::zero();
    for j in 0..m {
        let mut support = 0;
        let mut mass = Scalar::zero();
        for r in rows {
            let x = &r.row[j];
            if !x.is_zero() {
                support += 1;
                mass += x * x / &r.norm_sq;
            }
        }
        alpha = alpha.max(support);
        if mass > beta_exact {
            beta_exact = mass;
        }
    }
    let beta = to_f64(&beta_exact);
    let lhs = 2.0 * alpha as f64 * beta * (4.0 * ell as f64).ln();
    Ok(SmallNormCheck {
        alpha,
        beta,
        beta_exact,
        ell,
        lhs,
        ok: lhs <= 1.0,
    })
}

/// `exp(-2 t^2 / sum w_j^2)`, the one-sided Hoeffding tail for a sum of
/// independent variables with ranges of width `w_j`.
pub fn hoeffding_bound(t: f64, widths: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Precondition("t must be positive".into()));
    }
    if widths.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Precondition("widths must be nonnegative".into()));
    }
    let total: f64 = widths.iter().map(|w| w * w).sum();
    if total == 0.0 {
        return Err(Error::Precondition("all widths are zero".into()));
    }
    Ok((-2.0 * t * t / total).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinderOutcome {
    pub vertex: Vertex,
    pub attempts: usize,
    pub theta: f64,
    pub signs: SignVector,
    /// Rounding probabilities `y`.
    pub y: Vec<f64>,
}

struct Proposal {
    theta: f64,
    signs: SignVector,
    y: Vec<f64>,
}

/// Numeric core shared by both finders: signs from the plank lemma and the
/// rounding probabilities `y = (theta V^T eps + 1) / 2`.
fn propose(v: &[Vec<f64>], mu: &[f64], seed: u64, params: &Params) -> Result<Proposal> {
    let ell = v.len();
    let m = v[0].len();
    let theta = (2.0 * (4.0 * ell as f64).ln()).sqrt();
    let zeta: Vec<f64> = v
        .iter()
        .zip(mu)
        .map(|(row, mu_i)| 2.0 * mu_i - row.iter().sum::<f64>())
        .collect();
    let gram: Vec<Vec<f64>> = v
        .iter()
        .map(|a| {
            v.iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect();
    let bang = bang_signs(&gram, &zeta, &vec![theta; ell], seed, params)?;
    let mut y = Vec::with_capacity(m);
    for j in 0..m {
        let yp: f64 = theta
            * v.iter()
                .zip(&bang.signs.signs)
                .map(|(row, &e)| row[j] * f64::from(e))
                .sum::<f64>();
        if yp.abs() > 1.0 + params.float_tol {
            return Err(Error::Precondition(format!(
                "rounding point leaves the cube at column {j}: |y'| = {}",
                yp.abs()
            )));
        }
        y.push(((yp + 1.0) / 2.0).clamp(0.0, 1.0));
    }
    Ok(Proposal {
        theta,
        signs: bang.signs,
        y,
    })
}

fn sample_vertex(rng: &mut ChaCha8Rng, y: &[f64]) -> Vertex {
    Vertex::new(y.iter().map(|&p| rng.gen::<f64>() < p).collect())
}

/// Finds `w` with `<row_i, w> != mu_i` for every row, where each hyperplane
/// is given by a rational row (not necessarily of unit norm) and its
/// right-hand side. The unit-normalized hyperplane is
/// `<row/sqrt(q), x> = mu/sqrt(q)`; the small-norm precondition and all
/// numerics use that form, while acceptance of a sample is exact.
pub fn find_uncovered_small_norm(
    rows: &[UnitRow],
    mu: &[Scalar],
    params: &Params,
) -> Result<FinderOutcome> {
    if rows.len() != mu.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows but {} right-hand sides",
            rows.len(),
            mu.len()
        )));
    }
    let check = check_small_norm_precondition(rows)?;
    if !check.ok {
        return Err(Error::Precondition(format!(
            "precondition 2αβlog(4ℓ)>1 (lhs = {})",
            check.lhs
        )));
    }
    let v: Vec<Vec<f64>> = rows.iter().map(UnitRow::to_f64).collect();
    let mu_unit: Vec<f64> = rows
        .iter()
        .zip(mu)
        .map(|(r, m)| to_f64(m) / to_f64(&r.norm_sq).sqrt())
        .collect();
    let proposal = propose(&v, &mu_unit, params.seed, params)?;

    // Integer rows: <row, w> = mu  iff  <L row, w> = L mu.
    let exact: Vec<(Vec<BigInt>, Option<BigInt>)> = rows
        .iter()
        .zip(mu)
        .map(|(r, m)| {
            let ints = clear_denominators(&r.row);
            let lead = r.row.iter().zip(&ints).find(|(x, _)| !x.is_zero());
            let target = lead.and_then(|(x, i)| {
                let l = Scalar::from_integer(i.clone()) / x;
                let t = l * m;
                t.denom().is_one().then(|| t.numer().clone())
            });
            (ints, target)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e37_79b9_7f4a_7c15);
    for attempt in 1..=params.sample_cap {
        let w = sample_vertex(&mut rng, &proposal.y);
        let misses_all = exact.iter().all(|(ints, target)| match target {
            None => true,
            Some(t) => w.ones().map(|j| &ints[j]).sum::<BigInt>() != *t,
        });
        if misses_all {
            return Ok(FinderOutcome {
                vertex: w,
                attempts: attempt,
                theta: proposal.theta,
                signs: proposal.signs,
                y: proposal.y,
            });
        }
    }
    Err(Error::SampleCapExhausted {
        cap: params.sample_cap,
    })
}

/// Float-only variant: rows are taken as already unit-normalized and a sample
/// is accepted when `|<v_i, w> - mu_i| > float_tol` for every row.
pub fn find_uncovered_small_norm_f64(
    v: &[Vec<f64>],
    mu: &[f64],
    params: &Params,
) -> Result<FinderOutcome> {
    if v.is_empty() || v.len() != mu.len() {
        return Err(Error::DimensionMismatch("need one mu per row and at least one row".into()));
    }
    let m = v[0].len();
    if v.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch("rows of different lengths".into()));
    }
    let mut alpha = 0usize;
    let mut beta = 0.0f64;
    for j in 0..m {
        alpha = alpha.max(v.iter().filter(|r| r[j] != 0.0).count());
        beta = beta.max(v.iter().map(|r| r[j] * r[j]).sum());
    }
    let lhs = 2.0 * alpha as f64 * beta * (4.0 * v.len() as f64).ln();
    if lhs > 1.0 {
        return Err(Error::Precondition(format!("precondition 2αβlog(4ℓ)>1 (lhs = {lhs})")));
    }
    let proposal = propose(v, mu, params.seed, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e37_79b9_7f4a_7c15);
    for attempt in 1..=params.sample_cap {
        let w = sample_vertex(&mut rng, &proposal.y);
        let ok = v.iter().zip(mu).all(|(row, &mu_i)| {
            let s: f64 = w.ones().map(|j| row[j]).sum();
            let tol = params.float_tol * (1.0 + mu_i.abs());
            (s - mu_i).abs() > tol
        });
        if ok {
            return Ok(FinderOutcome {
                vertex: w,
                attempts: attempt,
                theta: proposal.theta,
                signs: proposal.signs,
                y: proposal.y,
            });
        }
    }
    Err(Error::SampleCapExhausted {
        cap: params.sample_cap,
    })
}
