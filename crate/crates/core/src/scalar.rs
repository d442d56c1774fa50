//! Exact rationals and the mixed exact/approximate scalar used for radii and
//! observable values.

use alloc::format;
use alloc::string::String;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::Result;

pub type Rational = num_rational::BigRational;

/// Relative slack applied whenever one side of a comparison is approximate.
pub const APPROX_TOLERANCE: f64 = 1e-9;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `p/q`, `p` or `-p/q`. Decimal points are rejected so that the
/// exact/approximate boundary stays visible in input files.
pub fn parse_rational(text: &str) -> Result<Rational, String> {
    let text = text.trim();
    if text.contains(['.', 'e', 'E']) {
        return Err(format!("`{text}` is not an exact rational (write it as p/q)"));
    }
    let value = Rational::from_str(text).map_err(|_| format!("`{text}` is not a rational number"))?;
    Ok(value)
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| if q.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Exact conversion: every finite double is a dyadic rational.
pub fn from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

/// Square root of a nonnegative rational when it is a perfect square.
pub fn exact_sqrt(q: &Rational) -> Option<Rational> {
    if q.is_negative() {
        return None;
    }
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    if &(&n * &n) == q.numer() && &(&d * &d) == q.denom() {
        Some(Rational::new(n, d))
    } else {
        None
    }
}

/// Extended real used for radii, comparison-function outputs and observable
/// values. `Exact` is a rational, `Approx` a double produced by the
/// floating-point lane, `Infinite` is `+inf`.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Exact(Rational),
    Approx(f64),
    Infinite,
}

impl Value {
    pub fn exact(q: Rational) -> Self {
        Value::Exact(q)
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, Value::Approx(_))
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Value::Exact(_) => true,
            Value::Approx(x) => x.is_finite(),
            Value::Infinite => false,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(q) => to_f64(q),
            Value::Approx(x) => *x,
            Value::Infinite => f64::INFINITY,
        }
    }

    /// The exact rational, converting doubles exactly. `None` for infinity.
    pub fn to_rational(&self) -> Option<Rational> {
        match self {
            Value::Exact(q) => Some(q.clone()),
            Value::Approx(x) => from_f64(*x),
            Value::Infinite => None,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Value::Exact(q) => q.is_negative(),
            Value::Approx(x) => *x < 0.0,
            Value::Infinite => false,
        }
    }

    pub fn square(&self) -> Value {
        match self {
            Value::Exact(q) => Value::Exact(q * q),
            Value::Approx(x) => Value::Approx(x * x),
            Value::Infinite => Value::Infinite,
        }
    }

    /// Square root of a nonnegative value; exact for perfect squares.
    pub fn sqrt(&self) -> Value {
        match self {
            Value::Exact(q) => match exact_sqrt(q) {
                Some(r) => Value::Exact(r),
                None => Value::Approx(libm::sqrt(to_f64(q))),
            },
            Value::Approx(x) => Value::Approx(libm::sqrt(*x)),
            Value::Infinite => Value::Infinite,
        }
    }

    /// `self <= other`, exact when both sides are exact, otherwise with
    /// [`APPROX_TOLERANCE`] relative slack.
    pub fn le(&self, other: &Value) -> bool {
        match (self, other) {
            (_, Value::Infinite) => true,
            (Value::Infinite, _) => false,
            (Value::Exact(a), Value::Exact(b)) => a <= b,
            (a, b) => {
                let (a, b) = (a.to_f64(), b.to_f64());
                a <= b + APPROX_TOLERANCE * b.abs().max(1.0)
            }
        }
    }

    /// Total order without tolerance, used to pick maxima.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Infinite, Value::Infinite) => Ordering::Equal,
            (Value::Infinite, _) => Ordering::Greater,
            (_, Value::Infinite) => Ordering::Less,
            (Value::Exact(a), Value::Exact(b)) => a.cmp(b),
            (a, b) => a.to_f64().total_cmp(&b.to_f64()),
        }
    }

    pub fn max(self, other: Value) -> Value {
        if other.total_cmp(&self) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Value::Exact(q) => q.is_zero(),
            Value::Approx(x) => *x == 0.0,
            Value::Infinite => false,
        }
    }
}

impl From<Rational> for Value {
    fn from(q: Rational) -> Self {
        Value::Exact(q)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(q) => write!(f, "{q}"),
            Value::Approx(x) => write!(f, "{x:e}"),
            Value::Infinite => f.write_str("inf"),
        }
    }
}

/// Parses `inf` or an exact rational.
pub fn parse_value(text: &str) -> Result<Value, String> {
    match text.trim() {
        "inf" | "+inf" => Ok(Value::Infinite),
        other => parse_rational(other).map(Value::Exact),
    }
}

/// How an observable's raw key relates to the value it reports.
///
/// Euclidean distances are only available exactly through their squares, so
/// `DistanceTo` keys are squared distances with `SquareRoot` scale. Order
/// comparisons between keys of the same observable are exact either way.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Linear,
    SquareRoot,
}

/// An observable evaluated at a state.
#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub key: Value,
    pub scale: Scale,
}

impl Level {
    pub fn linear(key: Value) -> Self {
        Level { key, scale: Scale::Linear }
    }

    pub fn value(&self) -> Value {
        match self.scale {
            Scale::Linear => self.key.clone(),
            Scale::SquareRoot => self.key.sqrt(),
        }
    }

    /// Whether the reported value is at most `threshold` (closed sublevel).
    pub fn at_most(&self, threshold: &Value) -> bool {
        match self.scale {
            Scale::Linear => self.key.le(threshold),
            Scale::SquareRoot => !threshold.is_negative() && self.key.le(&threshold.square()),
        }
    }

    /// Key-level comparison; both levels must come from the same observable.
    pub fn key_le(&self, other: &Level) -> bool {
        self.key.le(&other.key)
    }
}
