use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

/// A real number or `+∞`, kept as an explicit tag.
///
/// Divergences and exponents in this crate are `+∞` exactly when a support
/// condition fails (orthogonal states, empty common support, κ = 0). Carrying
/// that as a variant keeps it from leaking into float arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn is_infinite(&self) -> bool {
        !self.is_finite()
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::Infinite => None,
        }
    }

    /// Unwraps a finite value, panicking on `+∞`.
    pub fn expect_finite(&self, msg: &str) -> f64 {
        self.finite().expect(msg)
    }

    /// `-ln x` with `x <= 0` mapped to `+∞`.
    pub fn neg_ln(x: f64) -> Self {
        if x > 0.0 {
            ExtendedReal::Finite(-x.ln())
        } else {
            ExtendedReal::Infinite
        }
    }

    /// `self <= other + tol`, treating `+∞` as larger than every finite value.
    pub fn le_within(&self, other: &ExtendedReal, tol: f64) -> bool {
        match (self, other) {
            (_, ExtendedReal::Infinite) => true,
            (ExtendedReal::Infinite, ExtendedReal::Finite(_)) => false,
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => *a <= *b + tol,
        }
    }

    pub fn max(self, other: ExtendedReal) -> ExtendedReal {
        if self.total_cmp(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: ExtendedReal) -> ExtendedReal {
        if self.total_cmp(&other) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    pub fn total_cmp(&self, other: &ExtendedReal) -> Ordering {
        match (self, other) {
            (ExtendedReal::Infinite, ExtendedReal::Infinite) => Ordering::Equal,
            (ExtendedReal::Infinite, _) => Ordering::Greater,
            (_, ExtendedReal::Infinite) => Ordering::Less,
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.total_cmp(b),
        }
    }

    /// Multiplies a finite value by a positive scale; `+∞` stays `+∞`.
    pub fn scale(self, factor: f64) -> ExtendedReal {
        match self {
            ExtendedReal::Finite(v) => ExtendedReal::Finite(v * factor),
            ExtendedReal::Infinite => ExtendedReal::Infinite,
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(v: f64) -> Self {
        ExtendedReal::Finite(v)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => fmt::Display::fmt(v, f),
            ExtendedReal::Infinite => f.write_str("inf"),
        }
    }
}
