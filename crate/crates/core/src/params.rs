use num_traits::One;

use crate::scalar::{int, ratio, to_f64, Scalar};

/// Global knobs shared by every stage. Derived constants are exact rationals
/// computed from `c0`.
#[derive(Clone, Debug)]
pub struct Params {
    /// Window constant, 4.706 by default.
    pub c0: Scalar,
    pub gamma: Scalar,
    /// Scale count used by the decompositions.
    pub s: usize,
    pub w: Scalar,
    pub c4: Scalar,
    pub c5: f64,
    /// Multiplier `c` in `W = c (log n) k^2 / n`.
    pub w_multiplier: f64,
    pub enumeration_cap: usize,
    pub sample_cap: usize,
    pub seed: u64,
    pub float_tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            c0: ratio(4706, 1000),
            gamma: ratio(1, 3),
            s: 1,
            w: int(1),
            c4: int(1),
            c5: 32.0,
            w_multiplier: 1.0,
            enumeration_cap: 24,
            sample_cap: 1000,
            seed: 0,
            float_tol: 1e-9,
        }
    }
}

impl Params {
    /// `C1 = 4 C0^2`.
    pub fn c1(&self) -> Scalar {
        int(4) * &self.c0 * &self.c0
    }

    pub fn c1_sq(&self) -> Scalar {
        let c1 = self.c1();
        &c1 * &c1
    }

    /// `tau = 1 / (1 + C1^2)`, so that `(1 - tau) / tau = C1^2`.
    pub fn tau(&self) -> Scalar {
        Scalar::one() / self.c3()
    }

    pub fn c3(&self) -> Scalar {
        Scalar::one() + self.c1_sq()
    }

    pub fn c0_f64(&self) -> f64 {
        to_f64(&self.c0)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}
