//! Stability certificates.
//!
//! A [`DeltaCertificate`] claims that `x*` is a Lyapunov equilibrium: every
//! trajectory starting in `B(x*, δ(ε))` stays in `B(x*, ε)`. A
//! [`LyapunovCertificate`] claims a forward-invariant level-set family
//! sandwiched between balls, `B(x*, A(ε)) ⊆ V≤(ε) ⊆ B(x*, B(ε))`.
//!
//! The two notions are interconvertible: [`delta_from_lyapunov`] glues the
//! sandwich into `δ = A ∘ B⁻¹`, and [`converse_construct`] builds
//! `V≤(ε) = future(B(x*, δ(ε)))` from a δ certificate.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_traits::{One, Zero};

use crate::comparison::{ComparisonFunction, PiecewiseLinear, PropertyTags};
use crate::monovariant::{check_levelset_laxcone, validate_grid, LaxconeWitness, LevelSetFamily, Observable};
use crate::scalar::{Rational, Value};
use crate::system::{explore, Dynamics, FiniteSystem, Scope, Trace};
use crate::{Error, Result, Verdict};

/// `x*` with a δ such that `future(B(x*, δ(ε))) ⊆ B(x*, ε)` for grid `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaCertificate<S> {
    pub center: S,
    pub delta: ComparisonFunction,
    pub grid: Vec<Rational>,
}

impl<S> DeltaCertificate<S> {
    pub fn new(center: S, delta: ComparisonFunction, grid: Vec<Rational>) -> Result<Self> {
        validate_grid(&grid)?;
        Ok(DeltaCertificate { center, delta, grid })
    }
}

/// A trajectory leaving `B(x*, ε)` from inside `B(x*, δ(ε))`.
#[derive(Clone, Debug, PartialEq)]
pub struct EscapeWitness<S> {
    pub epsilon: Rational,
    pub trace: Trace<S>,
}

fn radius(f: &ComparisonFunction, eps: &Rational) -> Value {
    f.eval(&Value::Exact(eps.clone()))
}

fn exact_value(v: &Value) -> Result<Rational> {
    v.to_rational().ok_or_else(|| Error::NotRepresentable(format!("radius {v} is not a finite number")))
}

pub fn verify_delta<D: Dynamics>(
    sys: &D,
    cert: &DeltaCertificate<D::State>,
    scope: &Scope<D::State>,
) -> Result<Verdict<EscapeWitness<D::State>>> {
    if !sys.contains(&cert.center) {
        return Err(Error::StateOutOfRange(format!("{:?}", cert.center)));
    }
    let horizon = scope.horizon();
    for eps in &cert.grid {
        let ball = scope.ball(sys, &cert.center, &radius(&cert.delta, eps))?;
        let reach = explore(sys, ball, &horizon)?;
        let outer = Value::Exact(eps.clone());
        if let Some(trace) = reach.escape(|y| sys.within(&cert.center, y, &outer)) {
            return Ok(Verdict::Fail(EscapeWitness { epsilon: eps.clone(), trace }));
        }
    }
    Ok(Verdict::pass(scope.proves(sys) && cert.delta.is_exact()))
}

/// A level-set family sandwiched between balls through `lower` (A) and
/// `upper` (B); `upper` must be invertible.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovCertificate<S> {
    pub center: S,
    pub levels: LevelSetFamily<S>,
    pub lower: ComparisonFunction,
    pub upper: ComparisonFunction,
}

impl<S: Clone + Ord + Debug> LyapunovCertificate<S> {
    pub fn new(
        center: S,
        levels: LevelSetFamily<S>,
        lower: ComparisonFunction,
        upper: ComparisonFunction,
    ) -> Result<Self> {
        if !upper.is_invertible() {
            return Err(Error::NotInvertible(format!("upper bound {upper} must be invertible")));
        }
        Ok(LyapunovCertificate { center, levels, lower, upper })
    }

    pub fn grid(&self) -> &[Rational] {
        self.levels.grid()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LyapunovWitness<S> {
    /// A trajectory leaving a level set.
    Decrease(LaxconeWitness<S>),
    /// A state of `B(x*, A(ε))` missing from `V≤(ε)`.
    Inner { epsilon: Rational, state: S },
    /// A state of `V≤(ε)` outside `B(x*, B(ε))`.
    Outer { epsilon: Rational, state: S },
}

/// Checks forward decrease of every level set, then both sides of the
/// sandwich.
pub fn verify_lyapunov<D: Dynamics>(
    sys: &D,
    cert: &LyapunovCertificate<D::State>,
    scope: &Scope<D::State>,
) -> Result<Verdict<LyapunovWitness<D::State>>> {
    if !sys.contains(&cert.center) {
        return Err(Error::StateOutOfRange(format!("{:?}", cert.center)));
    }
    if let Verdict::Fail(w) = check_levelset_laxcone(sys, &cert.levels, scope)? {
        return Ok(Verdict::Fail(LyapunovWitness::Decrease(w)));
    }
    let fam = &cert.levels;
    for eps in fam.grid() {
        let members = fam.members(sys, eps, scope)?;
        for x in scope.ball(sys, &cert.center, &radius(&cert.lower, eps))? {
            let inside = if fam.is_extensional() {
                members.contains(&x)
            } else {
                fam.contains(sys, eps, &x, scope.sampling())?
            };
            if !inside {
                return Ok(Verdict::Fail(LyapunovWitness::Inner { epsilon: eps.clone(), state: x }));
            }
        }
        let outer = radius(&cert.upper, eps);
        if let Some(x) = members.iter().find(|x| !sys.within(&cert.center, x, &outer)) {
            return Ok(Verdict::Fail(LyapunovWitness::Outer { epsilon: eps.clone(), state: x.clone() }));
        }
    }
    let exact = scope.proves(sys) && cert.lower.is_exact() && cert.upper.is_exact();
    Ok(Verdict::pass(exact))
}

/// The property tags `δ = A ∘ B⁻¹` is guaranteed to carry.
pub fn predicted_delta_tags<S>(cert: &LyapunovCertificate<S>) -> PropertyTags {
    let inverse = cert.upper.tags().inverse().unwrap_or(PropertyTags::empty());
    cert.lower.tags().compose(inverse)
}

/// Glues a Lyapunov certificate into `δ = A ∘ B⁻¹` on the grid `B(grid)`.
/// At `r = B(ε)` the ball `B(x*, δ(r)) = B(x*, A(ε))` lies in the invariant
/// set `V≤(ε)`, which lies in `B(x*, r)`.
pub fn delta_from_lyapunov<S: Clone + Ord + Debug>(cert: &LyapunovCertificate<S>) -> Result<DeltaCertificate<S>> {
    let delta = cert.lower.compose(&cert.upper.invert()?)?;
    let mut grid = Vec::with_capacity(cert.grid().len());
    for eps in cert.grid() {
        grid.push(exact_value(&radius(&cert.upper, eps))?);
    }
    grid.dedup();
    DeltaCertificate::new(cert.center.clone(), delta, grid)
}

/// The three 2-cells of a factored δ certificate. For right-hand radius
/// `ε` and middle radius `m = δ₊(ε)`:
///
/// * β: `B(x*, δ₋(m)) ⊆ S₁(m)`
/// * α: `F_t(S₁(m)) ⊆ S₂(m)`
/// * γ: `S₂(m) ⊆ B(x*, ε)`
///
/// Pasting them gives the δ certificate with `δ = δ₋ ∘ δ₊`.
#[derive(Clone, Debug, PartialEq)]
pub struct Factorization<S> {
    pub center: S,
    pub grid: Vec<Rational>,
    pub delta_plus: ComparisonFunction,
    pub delta_minus: ComparisonFunction,
    pub inner: LevelSetFamily<S>,
    pub outer: LevelSetFamily<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FactorizationWitness<S> {
    Beta { epsilon: Rational, state: S },
    Alpha { epsilon: Rational, trace: Trace<S> },
    Gamma { epsilon: Rational, state: S },
}

/// Splits a δ certificate as `δ₊ = Id`, `δ₋ = δ`, `S₁ = B(x*, δ(·))`,
/// `S₂ = B(x*, ·)`.
pub fn factorize<S: Clone + Ord + Debug>(cert: &DeltaCertificate<S>) -> Result<Factorization<S>> {
    let id = ComparisonFunction::identity();
    Ok(Factorization {
        center: cert.center.clone(),
        grid: cert.grid.clone(),
        delta_plus: id.clone(),
        delta_minus: cert.delta.clone(),
        inner: LevelSetFamily::balls(cert.grid.clone(), cert.center.clone(), cert.delta.clone())?,
        outer: LevelSetFamily::balls(cert.grid.clone(), cert.center.clone(), id)?,
    })
}

pub fn check_factorization<D: Dynamics>(
    sys: &D,
    f: &Factorization<D::State>,
    scope: &Scope<D::State>,
) -> Result<Verdict<FactorizationWitness<D::State>>> {
    let horizon = scope.horizon();
    for eps in &f.grid {
        let m = exact_value(&radius(&f.delta_plus, eps))?;
        let s1 = f.inner.members(sys, &m, scope)?;
        for x in scope.ball(sys, &f.center, &radius(&f.delta_minus, &m))? {
            let inside =
                if f.inner.is_extensional() { s1.contains(&x) } else { f.inner.contains(sys, &m, &x, scope.sampling())? };
            if !inside {
                return Ok(Verdict::Fail(FactorizationWitness::Beta { epsilon: eps.clone(), state: x }));
            }
        }
        let s2 = f.outer.members(sys, &m, scope)?;
        let reach = explore(sys, s1, &horizon)?;
        for (y, _) in reach.by_depth() {
            let inside =
                if f.outer.is_extensional() { s2.contains(y) } else { f.outer.contains(sys, &m, y, scope.sampling())? };
            if !inside {
                let trace = reach.trace(y).expect("visited state has a trace");
                return Ok(Verdict::Fail(FactorizationWitness::Alpha { epsilon: eps.clone(), trace }));
            }
        }
        let ball = Value::Exact(eps.clone());
        if let Some(x) = s2.iter().find(|x| !sys.within(&f.center, x, &ball)) {
            return Ok(Verdict::Fail(FactorizationWitness::Gamma { epsilon: eps.clone(), state: x.clone() }));
        }
    }
    let exact = scope.proves(sys) && f.delta_plus.is_exact() && f.delta_minus.is_exact();
    Ok(Verdict::pass(exact))
}

/// Pastes a factorization back into a δ certificate, `δ = δ₋ ∘ δ₊`.
pub fn compose_factorization<S: Clone>(f: &Factorization<S>) -> Result<DeltaCertificate<S>> {
    let delta = f.delta_minus.compose(&f.delta_plus)?;
    DeltaCertificate::new(f.center.clone(), delta, f.grid.clone())
}

/// Builds a Lyapunov certificate from a δ certificate with
/// `V≤(ε) = future(B(x*, δ(ε)))`, `A = δ` and `B = Id`, and verifies it
/// before returning. When δ is the identity the ball family itself is
/// returned.
///
/// On finite spaces under the exact scope the level sets are computed
/// extensionally. Otherwise they are reachable sets explored for twice the
/// scope's horizon, so that the invariance check can follow trajectories
/// from the once-explored core.
pub fn converse_construct<D: Dynamics>(
    sys: &D,
    cert: &DeltaCertificate<D::State>,
    scope: &Scope<D::State>,
) -> Result<LyapunovCertificate<D::State>> {
    if !sys.contains(&cert.center) {
        return Err(Error::StateOutOfRange(format!("{:?}", cert.center)));
    }
    if scope.is_exact() && !sys.is_finite() {
        return Err(Error::UnsupportedExactReach);
    }
    let id = ComparisonFunction::identity();
    let grid = cert.grid.clone();
    let levels = if cert.delta == id {
        LevelSetFamily::balls(grid, cert.center.clone(), id.clone())?
    } else if scope.proves(sys) {
        let mut sets = Vec::with_capacity(grid.len());
        for eps in &grid {
            let ball = scope.ball(sys, &cert.center, &radius(&cert.delta, eps))?;
            sets.push(explore(sys, ball, &scope.horizon())?.states());
        }
        LevelSetFamily::sets(grid, sets)?
    } else {
        LevelSetFamily::Reachable {
            grid,
            center: cert.center.clone(),
            radius: cert.delta.clone(),
            horizon: scope.horizon().doubled(),
        }
    };
    let lyap = LyapunovCertificate::new(cert.center.clone(), levels, cert.delta.clone(), id)?;
    match verify_lyapunov(sys, &lyap, scope)? {
        Verdict::Fail(w) => Err(Error::CertificateRejected(format!("constructed level sets fail: {w:?}"))),
        _ => Ok(lyap),
    }
}

/// The observable whose sublevel sets on the grid are the family:
/// `V(x)` is the least grid radius whose set contains `x`.
pub fn pointwise_from_levelsets<S>(fam: LevelSetFamily<S>) -> Observable<S> {
    Observable::Levels(alloc::boxed::Box::new(fam))
}

/// Why a comparison function does not make a certificate global.
#[derive(Clone, Debug, PartialEq)]
pub enum NotGlobal {
    /// `sup f` is finite.
    BoundedImage(Value),
    /// `f(0+)` is positive.
    PositiveInfimum(Value),
}

fn check_invertible(f: &ComparisonFunction) -> Verdict<NotGlobal> {
    match f {
        ComparisonFunction::Power(_) => Verdict::Proved,
        ComparisonFunction::Exact(g) => {
            if let Some(sup) = g.supremum() {
                Verdict::Fail(NotGlobal::BoundedImage(Value::Exact(sup)))
            } else if !g.origin().is_zero() {
                Verdict::Fail(NotGlobal::PositiveInfimum(Value::Exact(g.origin().clone())))
            } else {
                Verdict::Proved
            }
        }
    }
}

/// A δ certificate is global when δ is invertible.
pub fn check_global_delta<S>(cert: &DeltaCertificate<S>) -> Verdict<NotGlobal> {
    check_invertible(&cert.delta)
}

/// A Lyapunov certificate is global when its lower bound A is invertible;
/// the derived δ then inherits invertibility.
pub fn check_global_lyapunov<S>(cert: &LyapunovCertificate<S>) -> Verdict<NotGlobal> {
    check_invertible(&cert.lower)
}

/// `V≤(ε) ⊆ B(x*, B(ε))` for each grid radius.
pub fn upper_triangle<D: Dynamics>(
    sys: &D,
    center: &D::State,
    fam: &LevelSetFamily<D::State>,
    upper: &ComparisonFunction,
    scope: &Scope<D::State>,
) -> Result<Vec<bool>> {
    let mut out = Vec::new();
    for eps in fam.grid() {
        let r = radius(upper, eps);
        out.push(fam.members(sys, eps, scope)?.iter().all(|x| sys.within(center, x, &r)));
    }
    Ok(out)
}

/// The same triangle read through the inverse: for `r = B(ε)`,
/// `V≤(B⁻¹(r)) ⊆ B(x*, r)`.
pub fn upper_triangle_inverse<D: Dynamics>(
    sys: &D,
    center: &D::State,
    fam: &LevelSetFamily<D::State>,
    upper: &ComparisonFunction,
    scope: &Scope<D::State>,
) -> Result<Vec<bool>> {
    let inverse = upper.invert()?;
    let mut out = Vec::new();
    for eps in fam.grid() {
        let r = radius(upper, eps);
        let back = exact_value(&inverse.eval(&r))?;
        out.push(fam.members(sys, &back, scope)?.iter().all(|x| sys.within(center, x, &r)));
    }
    Ok(out)
}

/// Replaces δ by a pointwise smaller δ'. Any δ' below a valid δ is valid,
/// since its balls are smaller.
pub fn shrink<S: Clone>(cert: &DeltaCertificate<S>, smaller: ComparisonFunction) -> Result<DeltaCertificate<S>> {
    if let Verdict::Fail(r) = smaller.leq_on_grid(&cert.delta, &cert.grid) {
        return Err(Error::InvalidComparison(format!("replacement exceeds δ at {r}")));
    }
    DeltaCertificate::new(cert.center.clone(), smaller, cert.grid.clone())
}

/// Builds a strictly increasing piecewise-linear function through
/// `(grid[i], values[i])` after nudging the values so they strictly
/// increase: down by factors `1 - 2^-(i+1)` when `below`, up by `(i + 1) *
/// pad` otherwise.
fn staircase_fit(grid: &[Rational], values: &[Rational], below: bool, pad: &Rational) -> Result<PiecewiseLinear> {
    let two = Rational::from_integer(2.into());
    let mut knots = Vec::with_capacity(grid.len());
    let mut scale = Rational::one();
    for (i, (x, v)) in grid.iter().zip(values).enumerate() {
        scale /= &two;
        let y = if below { v * (Rational::one() - &scale) } else { v + pad * Rational::from_integer((i as i64 + 1).into()) };
        knots.push((x.clone(), y));
    }
    PiecewiseLinear::new(Rational::zero(), knots, Rational::one())
}

impl LyapunovCertificate<usize> {
    /// Fits sandwich bounds to a level-set family on a finite system: A
    /// stays below the largest ball inside each level set, B above the
    /// smallest ball containing it. Fails when some level set misses the
    /// center.
    pub fn fit(sys: &FiniteSystem, center: usize, levels: LevelSetFamily<usize>) -> Result<Self> {
        let metric = sys.metric();
        let grid = levels.grid().to_vec();
        let spectrum = sys.distance_spectrum(center);
        let smallest = spectrum.first().cloned().unwrap_or_else(Rational::one);
        let mut inner = Vec::with_capacity(grid.len());
        let mut outer = Vec::with_capacity(grid.len());
        for eps in &grid {
            let set: BTreeSet<usize> = levels.members(sys, eps, &Scope::Exact)?;
            if !set.contains(&center) {
                return Err(Error::CertificateRejected(format!("level set at {eps} does not contain the center")));
            }
            let far = set.iter().map(|&x| metric.distance(center, x).clone()).max().unwrap_or_else(Rational::zero);
            // Largest radius whose ball stays inside the set.
            let gap = (0..sys.size())
                .filter(|x| !set.contains(x))
                .map(|x| metric.distance(center, x).clone())
                .min();
            let near = match gap {
                Some(d) => spectrum.iter().filter(|r| **r < d).max().cloned().unwrap_or(&smallest / Rational::from_integer(2.into())),
                None => spectrum.last().cloned().unwrap_or_else(Rational::one),
            };
            inner.push(near);
            outer.push(far);
        }
        let pad = &smallest / Rational::from_integer((4 * (grid.len() as i64 + 1)).into());
        let lower = staircase_fit(&grid, &inner, true, &pad)?;
        let upper = staircase_fit(&grid, &outer, false, &pad)?;
        LyapunovCertificate::new(center, levels, lower.into(), upper.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};
    use crate::system::{unit_ball_lattice, EuclideanSystem, FiniteMetric, Horizon, Point, RatMatrix, Sampling};
    use crate::timeline::TimelineKind;
    use crate::{monovariant, PowerLaw};

    fn scalar(a: Rational) -> EuclideanSystem {
        EuclideanSystem::linear(RatMatrix::scalar(1, a)).unwrap()
    }

    fn sampled(steps: u32) -> Scope<Point> {
        let states = (-6..=6).map(|k| vec![rat(k, 3)]).collect();
        Scope::Sampled(Sampling { horizon: Horizon::steps(steps), states, cloud: unit_ball_lattice(1, 12) })
    }

    fn grid() -> Vec<Rational> {
        vec![rat(1, 4), rat(1, 2), int(1), int(2)]
    }

    fn pl(f: PiecewiseLinear) -> ComparisonFunction {
        f.into()
    }

    /// Four states on a line at 0, 1, 2, 3; the map moves every state one
    /// step toward 0.
    fn staircase() -> FiniteSystem {
        let rows = (0..4).map(|i: i64| (0..4).map(|j: i64| int((i - j).abs())).collect()).collect();
        FiniteSystem::new(FiniteMetric::new(rows).unwrap(), TimelineKind::DiscreteLinear, vec![vec![0, 0, 1, 2]]).unwrap()
    }

    #[test]
    fn delta_examples() {
        let half = scalar(rat(1, 2));
        let cert = DeltaCertificate::new(vec![int(0)], ComparisonFunction::identity(), grid()).unwrap();
        assert_eq!(verify_delta(&half, &cert, &sampled(6)).unwrap(), Verdict::Sampled);
        let id = scalar(int(1));
        assert!(verify_delta(&id, &cert, &sampled(3)).unwrap().is_pass());

        let double = scalar(int(2));
        let tiny = DeltaCertificate::new(vec![int(0)], pl(PiecewiseLinear::linear(rat(1, 100)).unwrap()), vec![int(1)]).unwrap();
        let scope = Scope::Sampled(Sampling { horizon: Horizon::steps(10), states: vec![], cloud: unit_ball_lattice(1, 4) });
        let w = verify_delta(&double, &tiny, &scope).unwrap().witness().cloned().unwrap();
        assert_eq!(w.epsilon, int(1));
        assert!(!double.within(&vec![int(0)], &w.trace.state, &Value::Exact(int(1))));
        assert_eq!(double.evolve(&w.trace.start, &w.trace.time).unwrap(), w.trace.state);
    }

    #[test]
    fn lyapunov_examples() {
        let half = scalar(rat(1, 2));
        let square = Observable::Quadratic(RatMatrix::identity(1));
        let sqrt = ComparisonFunction::Power(PowerLaw::new(1.0, 0.5).unwrap());
        let levels = monovariant::sublevel(&half, &square, grid()).unwrap();
        let cert = LyapunovCertificate::new(vec![int(0)], levels, sqrt.clone(), sqrt.clone()).unwrap();
        assert_eq!(verify_lyapunov(&half, &cert, &sampled(5)).unwrap(), Verdict::Sampled);

        let delta = delta_from_lyapunov(&cert).unwrap();
        for r in [rat(1, 3), int(2), int(7)] {
            let v = delta.delta.eval(&Value::Exact(r.clone())).to_f64();
            assert!((v - crate::scalar::to_f64(&r)).abs() < 1e-12);
        }
        assert!(verify_delta(&half, &delta, &sampled(5)).unwrap().is_pass());

        let shift = EuclideanSystem::affine(RatMatrix::identity(1), vec![int(1)]).unwrap();
        let levels = monovariant::sublevel(&shift, &square, grid()).unwrap();
        let cert = LyapunovCertificate::new(vec![int(0)], levels, sqrt.clone(), sqrt).unwrap();
        match verify_lyapunov(&shift, &cert, &sampled(2)).unwrap() {
            Verdict::Fail(LyapunovWitness::Decrease(w)) => assert_eq!(w.trace.time, crate::TimePoint::Ticks(1)),
            other => panic!("expected a decrease failure, got {other:?}"),
        }
    }

    #[test]
    fn distance_levels_need_an_attractor() {
        let sys = staircase();
        let id = ComparisonFunction::identity();
        for (center, attractor) in [(0, true), (2, false)] {
            let levels = LevelSetFamily::balls(sys.default_grid(center), center, id.clone()).unwrap();
            let cert = LyapunovCertificate::new(center, levels, id.clone(), id.clone()).unwrap();
            let verdict = verify_lyapunov(&sys, &cert, &Scope::Exact).unwrap();
            let report = monovariant::check_attractor(&sys, &center, &Scope::Exact).unwrap();
            assert_eq!(verdict.is_pass(), attractor);
            assert_eq!(report.is_pass(), attractor);
        }
    }

    #[test]
    fn non_invertible_upper_bound_is_rejected() {
        let capped = pl(PiecewiseLinear::capped(int(1), int(1)).unwrap());
        let levels = LevelSetFamily::balls(vec![int(1)], 0usize, ComparisonFunction::identity()).unwrap();
        let err = LyapunovCertificate::new(0usize, levels, ComparisonFunction::identity(), capped).unwrap_err();
        assert!(matches!(err, Error::NotInvertible(_)));
    }

    #[test]
    fn gluing_identity_bounds() {
        let sys = staircase();
        let id = ComparisonFunction::identity();
        let levels = LevelSetFamily::balls(sys.default_grid(0), 0, id.clone()).unwrap();
        let cert = LyapunovCertificate::new(0, levels, id.clone(), id.clone()).unwrap();
        let delta = delta_from_lyapunov(&cert).unwrap();
        assert_eq!(delta.delta, id);
        assert_eq!(verify_delta(&sys, &delta, &Scope::Exact).unwrap(), Verdict::Proved);
        assert_eq!(check_global_lyapunov(&cert), Verdict::Proved);
        assert!(delta.delta.tags().contains(predicted_delta_tags(&cert)));
    }

    #[test]
    fn factorization_round_trip() {
        let sys = staircase();
        let half = pl(PiecewiseLinear::linear(rat(1, 2)).unwrap());
        let cert = DeltaCertificate::new(0, half.clone(), sys.default_grid(0)).unwrap();
        assert_eq!(verify_delta(&sys, &cert, &Scope::Exact).unwrap(), Verdict::Proved);
        let f = factorize(&cert).unwrap();
        assert_eq!(check_factorization(&sys, &f, &Scope::Exact).unwrap(), Verdict::Proved);
        assert_eq!(compose_factorization(&f).unwrap(), cert);

        let manual = Factorization {
            delta_plus: pl(PiecewiseLinear::linear(int(2)).unwrap()),
            delta_minus: half,
            ..f
        };
        assert_eq!(compose_factorization(&manual).unwrap().delta, ComparisonFunction::identity());

        let line = scalar(rat(1, 2));
        let cert = DeltaCertificate::new(vec![int(0)], ComparisonFunction::identity(), grid()).unwrap();
        assert!(check_factorization(&line, &factorize(&cert).unwrap(), &sampled(4)).unwrap().is_pass());
    }

    #[test]
    fn converse_on_finite_systems() {
        let id_sys = FiniteSystem::new(FiniteMetric::uniform(3).unwrap(), TimelineKind::DiscreteLinear, vec![vec![0, 1, 2]])
            .unwrap();
        let half = pl(PiecewiseLinear::linear(rat(1, 2)).unwrap());
        let cert = DeltaCertificate::new(0, half.clone(), id_sys.default_grid(0)).unwrap();
        let lyap = converse_construct(&id_sys, &cert, &Scope::Exact).unwrap();
        for eps in lyap.grid() {
            let s1 = id_sys.ball(&0, &half.eval(&Value::Exact(eps.clone())), None).unwrap();
            assert_eq!(lyap.levels.members(&id_sys, eps, &Scope::Exact).unwrap(), s1);
        }

        // Rotation on states 1..=4 at distance 2 from a fixed point 0 and 1
        // from each other: a δ below 2 keeps only the fixed point.
        let rows = (0..5)
            .map(|i| (0..5).map(|j| if i == j { int(0) } else if i == 0 || j == 0 { int(2) } else { int(1) }).collect())
            .collect();
        let sys = FiniteSystem::new(FiniteMetric::new(rows).unwrap(), TimelineKind::DiscreteLinear, vec![vec![0, 2, 3, 4, 1]])
            .unwrap();
        let small = pl(PiecewiseLinear::new(int(0), vec![(int(2), int(1))], int(1)).unwrap());
        let cert = DeltaCertificate::new(0, small, vec![int(1), int(2), int(3)]).unwrap();
        assert_eq!(verify_delta(&sys, &cert, &Scope::Exact).unwrap(), Verdict::Proved);
        let lyap = converse_construct(&sys, &cert, &Scope::Exact).unwrap();
        assert_eq!(verify_lyapunov(&sys, &lyap, &Scope::Exact).unwrap(), Verdict::Proved);
        assert_eq!(lyap.levels.members(&sys, &int(2), &Scope::Exact).unwrap(), BTreeSet::from([0]));
        assert_eq!(lyap.levels.members(&sys, &int(3), &Scope::Exact).unwrap(), BTreeSet::from([0, 1, 2, 3, 4]));
    }

    #[test]
    fn converse_short_circuits_and_samples() {
        let line = scalar(rat(1, 2));
        let cert = DeltaCertificate::new(vec![int(0)], ComparisonFunction::identity(), grid()).unwrap();
        let lyap = converse_construct(&line, &cert, &sampled(4)).unwrap();
        assert!(matches!(lyap.levels, LevelSetFamily::Balls { .. }));
        let shrunk = shrink(&cert, pl(PiecewiseLinear::linear(rat(1, 2)).unwrap())).unwrap();
        let lyap = converse_construct(&line, &shrunk, &sampled(4)).unwrap();
        assert!(matches!(lyap.levels, LevelSetFamily::Reachable { .. }));
        assert!(matches!(converse_construct(&line, &shrunk, &Scope::Exact), Err(Error::UnsupportedExactReach)));
    }

    #[test]
    fn pointwise_observable() {
        let sys = FiniteSystem::new(FiniteMetric::uniform(3).unwrap(), TimelineKind::DiscreteLinear, vec![vec![0, 1, 2]])
            .unwrap();
        let fam = LevelSetFamily::sets(vec![int(1), int(2)], vec![BTreeSet::from([0]), BTreeSet::from([0, 1])]).unwrap();
        let v = pointwise_from_levelsets(fam.clone());
        let values: Vec<_> = (0..3).map(|x| monovariant::observe(&sys, &v, &x).unwrap().key).collect();
        assert_eq!(values, vec![Value::Exact(int(1)), Value::Exact(int(2)), Value::Infinite]);
        assert_eq!(monovariant::sublevel(&sys, &v, fam.grid().to_vec()).unwrap(), fam);

        let whole = LevelSetFamily::sets(vec![int(3)], vec![BTreeSet::from([0, 1, 2])]).unwrap();
        let v = pointwise_from_levelsets(whole);
        assert!((0..3).all(|x| monovariant::observe(&sys, &v, &x).unwrap().key == Value::Exact(int(3))));
    }

    #[test]
    fn global_checks() {
        let id = DeltaCertificate::new(0usize, ComparisonFunction::identity(), vec![int(1)]).unwrap();
        assert_eq!(check_global_delta(&id), Verdict::Proved);
        let capped = DeltaCertificate::new(0usize, pl(PiecewiseLinear::capped(int(1), int(1)).unwrap()), vec![int(1)]).unwrap();
        assert_eq!(check_global_delta(&capped), Verdict::Fail(NotGlobal::BoundedImage(Value::Exact(int(1)))));
    }

    #[test]
    fn triangle_orientations_agree() {
        let sys = staircase();
        let fam = LevelSetFamily::balls(sys.default_grid(0), 0, ComparisonFunction::identity()).unwrap();
        let upper = pl(PiecewiseLinear::new(int(0), vec![(int(1), int(3)), (int(2), int(4))], rat(1, 3)).unwrap());
        let a = upper_triangle(&sys, &0, &fam, &upper, &Scope::Exact).unwrap();
        let b = upper_triangle_inverse(&sys, &0, &fam, &upper, &Scope::Exact).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fitted_bounds_verify() {
        let sys = staircase();
        let cert = DeltaCertificate::new(0, ComparisonFunction::identity(), sys.default_grid(0)).unwrap();
        let lyap = converse_construct(&sys, &cert, &Scope::Exact).unwrap();
        let fitted = LyapunovCertificate::fit(&sys, 0, lyap.levels).unwrap();
        assert_eq!(verify_lyapunov(&sys, &fitted, &Scope::Exact).unwrap(), Verdict::Proved);
        let delta = delta_from_lyapunov(&fitted).unwrap();
        assert_eq!(verify_delta(&sys, &delta, &Scope::Exact).unwrap(), Verdict::Proved);
    }
}
