//! Exact rational scalars.
//!
//! Every coefficient, right-hand side and threshold that takes part in a
//! membership decision is a reduced `BigRational`. Floating point only shows
//! up at the edges (bound formulas, the plank search) through [`to_f64`].

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Scalar = BigRational;

/// Parses `"p"` or `"p/q"` with an optional sign. `location` is only used for
/// error messages.
pub fn parse_scalar(text: &str, location: &str) -> Result<Scalar> {
    let bad = || Error::BadRational {
        text: text.to_string(),
        location: location.to_string(),
    };
    let t = text.trim();
    let (num, den) = match t.split_once('/') {
        Some((p, q)) => (p.trim(), Some(q.trim())),
        None => (t, None),
    };
    let num = parse_int(num).ok_or_else(bad)?;
    let den = match den {
        Some(q) => {
            let q = parse_int(q).ok_or_else(bad)?;
            if q.is_zero() {
                return Err(Error::ZeroDenominator {
                    location: location.to_string(),
                });
            }
            q
        }
        None => BigInt::one(),
    };
    Ok(BigRational::new(num, den))
}

fn parse_int(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Canonical text form: reduced, `"p"` for integers, `"p/q"` otherwise.
pub fn format_scalar(x: &Scalar) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn int(v: i64) -> Scalar {
    BigRational::from_integer(BigInt::from(v))
}

pub fn ratio(p: i64, q: i64) -> Scalar {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

pub fn to_f64(x: &Scalar) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        if x.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact conversion of a finite float (every finite `f64` is a dyadic rational).
pub fn from_f64(x: f64) -> Option<Scalar> {
    BigRational::from_float(x)
}

pub fn squared_norm<'a>(entries: impl IntoIterator<Item = &'a Scalar>) -> Scalar {
    entries
        .into_iter()
        .fold(Scalar::zero(), |acc, v| acc + v * v)
}

/// Clears denominators: returns the integer vector `L * values` where `L` is
/// the lcm of all denominators. Solution sets of `<v, x> = mu` are unchanged
/// when both sides are scaled by the same `L`.
pub fn clear_denominators(values: &[Scalar]) -> Vec<BigInt> {
    let lcm = values
        .iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    values
        .iter()
        .map(|v| v.numer() * (&lcm / v.denom()))
        .collect()
}

pub mod serde_str {
    //! Serde adapters writing scalars as canonical `"p/q"` strings.
    use super::{format_scalar, parse_scalar, Scalar};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Scalar, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_scalar(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Scalar, D::Error> {
        let text = String::deserialize(d)?;
        parse_scalar(&text, "value").map_err(D::Error::custom)
    }

    pub mod vec {
        use super::super::{format_scalar, parse_scalar, Scalar};
        use serde::{de::Error as _, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(xs: &[Scalar], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(xs.len()))?;
            for x in xs {
                seq.serialize_element(&format_scalar(x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Scalar>, D::Error> {
            Vec::<String>::deserialize(d)?
                .iter()
                .map(|t| parse_scalar(t, "value").map_err(D::Error::custom))
                .collect()
        }
    }

    pub mod opt_vec {
        use super::super::{format_scalar, parse_scalar, Scalar};
        use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(xs: &[Option<Scalar>], s: S) -> Result<S::Ok, S::Error> {
            let texts: Vec<Option<String>> =
                xs.iter().map(|x| x.as_ref().map(format_scalar)).collect();
            texts.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Vec<Option<Scalar>>, D::Error> {
            Vec::<Option<String>>::deserialize(d)?
                .into_iter()
                .map(|t| {
                    t.map(|t| parse_scalar(&t, "value").map_err(D::Error::custom))
                        .transpose()
                })
                .collect()
        }
    }
}
