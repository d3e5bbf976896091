//! Scalar model parameters.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Inverse temperature: a finite real, or the hard-obstacle limit.
///
/// Serialized as a JSON number, or as the string `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Finite(f64),
    NegInfinity,
}

impl Beta {
    pub fn finite(self) -> Option<f64> {
        match self {
            Beta::Finite(b) => Some(b),
            Beta::NegInfinity => None,
        }
    }

    pub fn is_neg_infinity(self) -> bool {
        matches!(self, Beta::NegInfinity)
    }

    /// Numeric value, `f64::NEG_INFINITY` for the limit.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::NegInfinity => f.write_str("-inf"),
        }
    }
}

impl std::str::FromStr for Beta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t, "-inf" | "-infinity" | "neg_infinity" | "NEG_INFINITY") {
            return Ok(Beta::NegInfinity);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::InvalidParams(format!("beta: cannot parse {s:?}")))?;
        if v == f64::NEG_INFINITY {
            Ok(Beta::NegInfinity)
        } else if v.is_finite() {
            Ok(Beta::Finite(v))
        } else {
            Err(Error::InvalidParams(format!("beta must be finite or -inf, got {s}")))
        }
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Beta::Finite(b) => s.serialize_f64(*b),
            Beta::NegInfinity => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct BetaVisitor;
        impl Visitor<'_> for BetaVisitor {
            type Value = Beta;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a finite number or the string \"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Beta, E> {
                if v.is_finite() {
                    Ok(Beta::Finite(v))
                } else {
                    Err(E::custom("beta must be finite or \"-inf\""))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Beta, E> {
                Ok(Beta::Finite(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Beta, E> {
                Ok(Beta::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Beta, E> {
                v.parse().map_err(|e: Error| E::custom(e.to_string()))
            }
        }
        d.deserialize_any(BetaVisitor)
    }
}

/// All scalar model parameters in one validated record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Spatial dimension, 1 or 2.
    pub d: usize,
    /// Jump-cost exponent.
    pub alpha: f64,
    /// Jump-cost scale in the transition kernel.
    pub c2: f64,
    /// Obstacle probability.
    pub p: f64,
    pub beta: Beta,
    /// Regularization exponent: boxes of side `ceil(n^theta)`.
    pub theta: f64,
    /// Jump-bound exponent.
    pub zeta: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            d: 1,
            alpha: 2.0,
            c2: 1.0,
            p: 0.5,
            beta: Beta::Finite(-1.0),
            theta: 0.4,
            zeta: 0.5,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.d != 1 && self.d != 2 {
            return bad(format!("d must be 1 or 2, got {}", self.d));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.c2.is_finite() && self.c2 > 0.0) {
            return bad(format!("c2 must be > 0, got {}", self.c2));
        }
        if !(0.0..1.0).contains(&self.p) {
            return bad(format!("p must lie in [0, 1), got {}", self.p));
        }
        if let Beta::Finite(b) = self.beta {
            if !b.is_finite() {
                return bad(format!("beta must be finite or -inf, got {b}"));
            }
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return bad(format!("zeta must lie in (0, 1), got {}", self.zeta));
        }
        Ok(())
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_beta(mut self, beta: Beta) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// `M = 1 + 1/alpha`, the confinement exponent.
    pub fn confinement_exponent(&self) -> f64 {
        1.0 + 1.0 / self.alpha
    }
}

/// `ceil(x)` that does not round exact integers up because of
/// floating noise in `powf` (e.g. `16^0.5`).
pub(crate) fn robust_ceil(x: f64) -> i64 {
    (x - 1e-9 * x.abs().max(1.0)).ceil() as i64
}

/// Side of the theta-boxes for a system of `n` layers.
pub fn box_side(n: usize, theta: f64) -> i64 {
    robust_ceil((n as f64).powf(theta)).max(1)
}
