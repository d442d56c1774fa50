//! Comparison functions on the positive reals.
//!
//! The exact class is [`PiecewiseLinear`]: continuous, increasing, with
//! rational breakpoints. It is closed under composition, inversion (when
//! the image is all of `(0, inf)`) and has a decidable pointwise order.
//! [`PowerLaw`] covers `c * r^p`, which the quadratic lane needs for its
//! square-root sandwich bounds.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use bitflags::bitflags;
use num_traits::{One, Signed, Zero};

use crate::scalar::{from_f64, to_f64, Rational, Value};
use crate::{Error, Result, Verdict};

/// `f(x)` for `x > 0`, linear between `(0, origin)`, the knots, and then
/// continuing with `tail_slope` past the last knot.
///
/// Values are canonical: knots collinear with their neighbours are
/// removed, so two functions are equal exactly when they agree everywhere.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PiecewiseLinear {
    origin: Rational,
    knots: Vec<(Rational, Rational)>,
    tail_slope: Rational,
}

impl PiecewiseLinear {
    /// Builds a function from its value at `0+`, its knots and its final
    /// slope. Segments between knots must be strictly increasing. A zero
    /// tail slope is allowed and yields a bounded function.
    pub fn new(origin: Rational, knots: Vec<(Rational, Rational)>, tail_slope: Rational) -> Result<Self> {
        if origin.is_negative() {
            return Err(Error::InvalidComparison(format!("value at 0+ must be nonnegative, got {origin}")));
        }
        if tail_slope.is_negative() {
            return Err(Error::InvalidComparison(format!("tail slope must be nonnegative, got {tail_slope}")));
        }
        let (mut px, mut py) = (Rational::zero(), origin.clone());
        for (x, y) in &knots {
            if x <= &px {
                return Err(Error::InvalidComparison(format!("breakpoint {x} must exceed {px}")));
            }
            if y <= &py {
                return Err(Error::InvalidComparison(format!("value {y} at {x} must exceed {py}")));
            }
            px = x.clone();
            py = y.clone();
        }
        if knots.is_empty() && origin.is_zero() && tail_slope.is_zero() {
            return Err(Error::InvalidComparison("the zero function is not positive".into()));
        }
        let mut f = PiecewiseLinear { origin, knots, tail_slope };
        f.canonicalize();
        Ok(f)
    }

    pub fn identity() -> Self {
        PiecewiseLinear::linear(Rational::one()).expect("slope one is positive")
    }

    /// `r -> slope * r`.
    pub fn linear(slope: Rational) -> Result<Self> {
        if !slope.is_positive() {
            return Err(Error::InvalidComparison(format!("slope must be positive, got {slope}")));
        }
        PiecewiseLinear::new(Rational::zero(), Vec::new(), slope)
    }

    /// `r -> min(slope * r, cap)`: increasing up to `cap / slope`, then flat.
    pub fn capped(slope: Rational, cap: Rational) -> Result<Self> {
        if !slope.is_positive() || !cap.is_positive() {
            return Err(Error::InvalidComparison("slope and cap must be positive".into()));
        }
        let x = &cap / &slope;
        PiecewiseLinear::new(Rational::zero(), alloc::vec![(x, cap)], Rational::zero())
    }

    pub fn origin(&self) -> &Rational {
        &self.origin
    }

    pub fn knots(&self) -> &[(Rational, Rational)] {
        &self.knots
    }

    pub fn tail_slope(&self) -> &Rational {
        &self.tail_slope
    }

    fn canonicalize(&mut self) {
        let mut out: Vec<(Rational, Rational)> = Vec::with_capacity(self.knots.len());
        let n = self.knots.len();
        for i in 0..n {
            let (px, py) = match out.last() {
                Some((x, y)) => (x.clone(), y.clone()),
                None => (Rational::zero(), self.origin.clone()),
            };
            let (x, y) = &self.knots[i];
            let left = (y - &py) / (x - &px);
            let right = match self.knots.get(i + 1) {
                Some((nx, ny)) => (ny - y) / (nx - x),
                None => self.tail_slope.clone(),
            };
            if left != right {
                out.push((x.clone(), y.clone()));
            }
        }
        self.knots = out;
    }

    /// Vertex `i`: `(0, origin)` for `i = 0`, otherwise knot `i - 1`.
    fn vertex(&self, i: usize) -> (Rational, Rational) {
        if i == 0 {
            (Rational::zero(), self.origin.clone())
        } else {
            self.knots[i - 1].clone()
        }
    }

    /// Slope of the segment starting at vertex `i` (the tail for the last).
    fn slope_after(&self, i: usize) -> Rational {
        match self.knots.get(i) {
            Some((nx, ny)) => {
                let (x, y) = self.vertex(i);
                (ny - y) / (nx - x)
            }
            None => self.tail_slope.clone(),
        }
    }

    /// `f(x)` for `x >= 0`; `f(0)` is the limit at `0+`.
    pub fn eval(&self, x: &Rational) -> Rational {
        let idx = self.knots.partition_point(|(kx, _)| kx <= x);
        let (bx, by) = self.vertex(idx);
        let slope = self.slope_after(idx);
        by + slope * (x - bx)
    }

    pub fn is_bounded(&self) -> bool {
        self.tail_slope.is_zero()
    }

    /// `sup f`, or `None` when unbounded.
    pub fn supremum(&self) -> Option<Rational> {
        self.is_bounded().then(|| self.knots.last().map_or_else(|| self.origin.clone(), |(_, y)| y.clone()))
    }

    pub fn is_invertible(&self) -> bool {
        self.origin.is_zero() && self.tail_slope.is_positive()
    }

    /// The `x > 0` with `f(x) = y`, if `y` lies strictly inside the range.
    pub fn preimage(&self, y: &Rational) -> Option<Rational> {
        if y <= &self.origin {
            return None;
        }
        for i in 0..=self.knots.len() {
            let (vx, vy) = self.vertex(i);
            let slope = self.slope_after(i);
            let reaches = match self.knots.get(i) {
                Some((_, ny)) => y <= ny,
                None => slope.is_positive(),
            };
            if reaches && y >= &vy {
                return Some(vx + (y - vy) / slope);
            }
        }
        None
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &PiecewiseLinear) -> PiecewiseLinear {
        let mut xs: Vec<Rational> = inner.knots.iter().map(|(x, _)| x.clone()).collect();
        xs.extend(self.knots.iter().filter_map(|(x, _)| inner.preimage(x)));
        xs.sort();
        xs.dedup();
        let origin = self.eval(&inner.origin);
        let knots = xs
            .into_iter()
            .map(|x| {
                let y = self.eval(&inner.eval(&x));
                (x, y)
            })
            .collect();
        let tail_slope = if inner.tail_slope.is_zero() { Rational::zero() } else { &self.tail_slope * &inner.tail_slope };
        let mut f = PiecewiseLinear { origin, knots, tail_slope };
        f.canonicalize();
        f
    }

    /// Exact inverse; needs `f(0+) = 0` and an unbounded image.
    pub fn invert(&self) -> Result<PiecewiseLinear> {
        if !self.origin.is_zero() {
            return Err(Error::NotInvertible(format!("image starts at {} instead of 0", self.origin)));
        }
        if self.tail_slope.is_zero() {
            return Err(Error::NotInvertible(format!(
                "image is bounded by {}",
                self.supremum().unwrap_or_else(Rational::zero)
            )));
        }
        let knots = self.knots.iter().map(|(x, y)| (y.clone(), x.clone())).collect();
        Ok(PiecewiseLinear { origin: Rational::zero(), knots, tail_slope: self.tail_slope.recip() })
    }

    /// Decides `self(x) <= other(x)` for every `x` in `domain`. Both sides
    /// are linear between merged breakpoints, so checking segment ends is
    /// exact; a failure names a point of the domain where the order breaks.
    pub fn pointwise_leq(&self, other: &PiecewiseLinear, domain: &Interval) -> Verdict<Rational> {
        let diff = |x: &Rational| self.eval(x) - other.eval(x);
        let mut points: Vec<Rational> = self
            .knots
            .iter()
            .chain(&other.knots)
            .map(|(x, _)| x.clone())
            .filter(|x| domain.contains(x))
            .collect();
        points.push(domain.lo.clone());
        if let Some(hi) = &domain.hi {
            points.push(hi.clone());
        }
        points.sort();
        points.dedup();
        let admissible = |x: &Rational| x > &domain.lo;
        for (i, a) in points.iter().enumerate() {
            let da = diff(a);
            if da.is_positive() && admissible(a) {
                return Verdict::Fail(a.clone());
            }
            let witness = match points.get(i + 1) {
                Some(b) => {
                    let db = diff(b);
                    if db.is_positive() {
                        let z = if da.is_positive() { a.clone() } else { a + (b - a) * (-&da) / (&db - &da) };
                        Some((z + Rational::one()).min(b.clone()))
                    } else if da.is_positive() {
                        let z = a + (b - a) * &da / (&da - &db);
                        Some((a + z) / Rational::from_integer(2.into()))
                    } else {
                        None
                    }
                }
                None if domain.hi.is_some() => None,
                None => {
                    let s = self.tail_slope.clone() - other.tail_slope.clone();
                    if s.is_positive() {
                        let z = if da.is_positive() { a.clone() } else { a + (-&da) / &s };
                        Some(z + Rational::one())
                    } else if da.is_positive() {
                        if s.is_zero() {
                            Some(a + Rational::one())
                        } else {
                            Some((a + a + &da / (-&s)) / Rational::from_integer(2.into()))
                        }
                    } else {
                        None
                    }
                }
            };
            if let Some(w) = witness {
                return Verdict::Fail(w);
            }
        }
        Verdict::Proved
    }
}

impl fmt::Display for PiecewiseLinear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pl(0+ -> {}", self.origin)?;
        for (x, y) in &self.knots {
            write!(f, ", {x} -> {y}")?;
        }
        write!(f, "; tail {})", self.tail_slope)
    }
}

/// The interval `(lo, hi]`, or `(lo, inf)` when `hi` is `None`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Option<Rational>,
}

impl Interval {
    pub fn positive() -> Self {
        Interval { lo: Rational::zero(), hi: None }
    }

    pub fn up_to(hi: Rational) -> Self {
        Interval { lo: Rational::zero(), hi: Some(hi) }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        x > &self.lo && self.hi.as_ref().is_none_or(|h| x <= h)
    }
}

/// `r -> coefficient * r^exponent` in binary64.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn new(coefficient: f64, exponent: f64) -> Result<Self> {
        if !(coefficient.is_finite() && coefficient > 0.0 && exponent.is_finite() && exponent > 0.0) {
            return Err(Error::InvalidComparison(format!(
                "power law needs a positive finite coefficient and exponent, got {coefficient} r^{exponent}"
            )));
        }
        Ok(PowerLaw { coefficient, exponent })
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.coefficient * libm::pow(r, self.exponent)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &PowerLaw) -> PowerLaw {
        PowerLaw {
            coefficient: self.coefficient * libm::pow(inner.coefficient, self.exponent),
            exponent: self.exponent * inner.exponent,
        }
    }

    pub fn invert(&self) -> PowerLaw {
        PowerLaw { coefficient: libm::pow(self.coefficient, -1.0 / self.exponent), exponent: 1.0 / self.exponent }
    }
}

impl fmt::Display for PowerLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} * r^{}", self.coefficient, self.exponent)
    }
}

bitflags! {
    /// Properties of a comparison function that survive composition and
    /// inversion.
    #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
    pub struct PropertyTags: u8 {
        const INVERTIBLE = 1;
        const UNBOUNDED_IMAGE = 1 << 1;
        const IDENTITY = 1 << 2;
    }
}

impl PropertyTags {
    /// Tags guaranteed for `f ∘ g` from the tags of `f` and `g`.
    pub fn compose(self, inner: PropertyTags) -> PropertyTags {
        self & inner
    }

    /// Tags guaranteed for `f^-1` when `f` is invertible.
    pub fn inverse(self) -> Option<PropertyTags> {
        self.contains(PropertyTags::INVERTIBLE).then_some(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ComparisonFunction {
    Exact(PiecewiseLinear),
    Power(PowerLaw),
}

impl ComparisonFunction {
    pub fn identity() -> Self {
        ComparisonFunction::Exact(PiecewiseLinear::identity())
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, ComparisonFunction::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&PiecewiseLinear> {
        match self {
            ComparisonFunction::Exact(f) => Some(f),
            ComparisonFunction::Power(_) => None,
        }
    }

    pub fn tags(&self) -> PropertyTags {
        match self {
            ComparisonFunction::Exact(f) => {
                let mut tags = PropertyTags::empty();
                if f.is_invertible() {
                    tags |= PropertyTags::INVERTIBLE;
                }
                if !f.is_bounded() {
                    tags |= PropertyTags::UNBOUNDED_IMAGE;
                }
                if *f == PiecewiseLinear::identity() {
                    tags |= PropertyTags::IDENTITY;
                }
                tags
            }
            ComparisonFunction::Power(p) => {
                let mut tags = PropertyTags::INVERTIBLE | PropertyTags::UNBOUNDED_IMAGE;
                if p.coefficient == 1.0 && p.exponent == 1.0 {
                    tags |= PropertyTags::IDENTITY;
                }
                tags
            }
        }
    }

    pub fn is_invertible(&self) -> bool {
        self.tags().contains(PropertyTags::INVERTIBLE)
    }

    /// Homogeneous linear exact functions `r -> s r` also live in the power
    /// class, which is what allows mixed composition.
    fn as_power(&self) -> Option<PowerLaw> {
        match self {
            ComparisonFunction::Power(p) => Some(*p),
            ComparisonFunction::Exact(f) if f.origin.is_zero() && f.knots.is_empty() => {
                Some(PowerLaw { coefficient: to_f64(&f.tail_slope), exponent: 1.0 })
            }
            ComparisonFunction::Exact(_) => None,
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &ComparisonFunction) -> Result<ComparisonFunction> {
        match (self, inner) {
            (ComparisonFunction::Exact(f), ComparisonFunction::Exact(g)) => Ok(ComparisonFunction::Exact(f.compose(g))),
            _ => match (self.as_power(), inner.as_power()) {
                (Some(f), Some(g)) => Ok(ComparisonFunction::Power(f.compose(&g))),
                _ => Err(Error::NotRepresentable(format!("{self} composed with {inner}"))),
            },
        }
    }

    pub fn invert(&self) -> Result<ComparisonFunction> {
        match self {
            ComparisonFunction::Exact(f) => f.invert().map(ComparisonFunction::Exact),
            ComparisonFunction::Power(p) => Ok(ComparisonFunction::Power(p.invert())),
        }
    }

    /// Evaluates at a radius; exact inputs to exact functions stay exact.
    pub fn eval(&self, r: &Value) -> Value {
        match (self, r) {
            (ComparisonFunction::Exact(f), Value::Exact(q)) => Value::Exact(f.eval(q)),
            (ComparisonFunction::Exact(f), Value::Approx(x)) => match from_f64(*x) {
                Some(q) => Value::Approx(to_f64(&f.eval(&q))),
                None => Value::Infinite,
            },
            (ComparisonFunction::Exact(f), Value::Infinite) => f.supremum().map_or(Value::Infinite, Value::Exact),
            (ComparisonFunction::Power(_), Value::Infinite) => Value::Infinite,
            (ComparisonFunction::Power(p), r) => Value::Approx(p.eval(r.to_f64())),
        }
    }

    /// `self <= other` on every grid point.
    pub fn leq_on_grid(&self, other: &ComparisonFunction, grid: &[Rational]) -> Verdict<Rational> {
        for r in grid {
            let v = Value::Exact(r.clone());
            if !self.eval(&v).le(&other.eval(&v)) {
                return Verdict::Fail(r.clone());
            }
        }
        Verdict::pass(self.is_exact() && other.is_exact())
    }

    pub fn describe(&self) -> String {
        format!("{self}")
    }
}

impl fmt::Display for ComparisonFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComparisonFunction::Exact(g) => g.fmt(f),
            ComparisonFunction::Power(p) => p.fmt(f),
        }
    }
}

impl From<PiecewiseLinear> for ComparisonFunction {
    fn from(f: PiecewiseLinear) -> Self {
        ComparisonFunction::Exact(f)
    }
}

impl From<PowerLaw> for ComparisonFunction {
    fn from(p: PowerLaw) -> Self {
        ComparisonFunction::Power(p)
    }
}
