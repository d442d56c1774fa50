//! Observables, monovariance, level-set families and the checks built on
//! them: attractors and rough approximations.
//!
//! For a nonnegative observable `V` on a finite system the following agree:
//! `V` is non-increasing along every trajectory, every sublevel set
//! `{V <= r}` is forward invariant, and `X -> max V(X)` is non-increasing
//! under the induced action on subsets. [`check_monovariant`],
//! [`check_levelset_laxcone`] and [`check_vmax_monovariant`] compute the
//! three verdicts independently.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_traits::{Signed, Zero};

use crate::comparison::ComparisonFunction;
use crate::scalar::{Level, Rational, Value};
use crate::system::{explore, is_equilibrium, Dynamics, Horizon, RatMatrix, Sampling, Scope, Trace};
use crate::timeline::{words_up_to, TimePoint, TimelineKind};
use crate::{Error, Result, Verdict};

/// A map from states to extended nonnegative values.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable<S> {
    /// `d(center, x)`.
    DistanceTo(S),
    /// `x^T P x` on Euclidean spaces.
    Quadratic(RatMatrix),
    /// The `i`-th coordinate on Euclidean spaces.
    Coordinate(usize),
    /// One value per state on finite spaces.
    Table(Vec<Value>),
    /// The least grid radius whose level set contains the state.
    Levels(Box<LevelSetFamily<S>>),
}

/// Evaluates an observable.
pub fn observe<D: Dynamics>(sys: &D, obs: &Observable<D::State>, x: &D::State) -> Result<Level> {
    match obs {
        Observable::Levels(fam) => fam.least_level(sys, x, None).map(Level::linear),
        other => sys.observe_basic(other, x),
    }
}

/// Which way a monovariant moves along trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `I(m) <= I(F_t(m))`.
    NonDecreasing,
    /// `I(F_t(m)) <= I(m)`; the reading used for distances and Lyapunov
    /// functions.
    NonIncreasing,
}

impl Direction {
    pub fn holds(self, before: &Level, after: &Level) -> bool {
        match self {
            Direction::NonDecreasing => before.key_le(after),
            Direction::NonIncreasing => after.key_le(before),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::NonDecreasing => "non-decreasing",
            Direction::NonIncreasing => "non-increasing",
        }
    }
}

/// A trajectory along which the observable moved the wrong way.
#[derive(Clone, Debug, PartialEq)]
pub struct MonovariantWitness<S> {
    pub trace: Trace<S>,
    pub before: Value,
    pub after: Value,
}

/// Checks that `obs` moves in `direction` along every trajectory.
///
/// Under [`Scope::Exact`] it is enough to check one generator step from
/// every state, since every time point is a sum of generators and the order
/// is transitive. Under a sampled scope every trajectory from each sampled
/// state is followed up to the horizon.
pub fn check_monovariant<D: Dynamics>(
    sys: &D,
    obs: &Observable<D::State>,
    direction: Direction,
    scope: &Scope<D::State>,
) -> Result<Verdict<MonovariantWitness<D::State>>> {
    let domain = scope.domain(sys)?;
    let kind = sys.timeline();
    if scope.is_exact() {
        let generators = kind.generators(&Rational::from_integer(1.into()));
        for m in &domain {
            let before = observe(sys, obs, m)?;
            for g in &generators {
                let y = sys.evolve(m, g)?;
                let after = observe(sys, obs, &y)?;
                if !direction.holds(&before, &after) {
                    return Ok(Verdict::Fail(MonovariantWitness {
                        trace: Trace { start: m.clone(), time: g.clone(), state: y },
                        before: before.value(),
                        after: after.value(),
                    }));
                }
            }
        }
        return Ok(Verdict::pass(scope.proves(sys)));
    }
    let horizon = scope.horizon();
    for m in &domain {
        let before = observe(sys, obs, m)?;
        let reach = explore(sys, [m.clone()], &horizon)?;
        for (y, visit) in reach.by_depth() {
            let after = observe(sys, obs, y)?;
            if !direction.holds(&before, &after) {
                return Ok(Verdict::Fail(MonovariantWitness {
                    trace: Trace { start: m.clone(), time: visit.time.clone(), state: y.clone() },
                    before: before.value(),
                    after: after.value(),
                }));
            }
        }
    }
    Ok(Verdict::Sampled)
}

/// Checks a grid of radii: strictly increasing and positive.
pub fn validate_grid(grid: &[Rational]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if let Some(bad) = grid.iter().find(|r| !r.is_positive()) {
        return Err(Error::InvalidGrid(format!("radius {bad} is not positive")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid("radii must be strictly increasing".into()));
    }
    Ok(())
}

/// A monotone map from positive radii to sets of states.
#[derive(Clone, Debug, PartialEq)]
pub enum LevelSetFamily<S> {
    /// Explicit sets at the grid radii; off-grid radii use the largest grid
    /// radius below them.
    Sets { grid: Vec<Rational>, sets: Vec<BTreeSet<S>> },
    /// `r -> {x | V(x) <= r}`.
    Sublevel { grid: Vec<Rational>, observable: Observable<S> },
    /// `r -> B(center, radius(r))`.
    Balls { grid: Vec<Rational>, center: S, radius: ComparisonFunction },
    /// `r -> future(B(center, radius(r)))`, explored up to `horizon`.
    Reachable { grid: Vec<Rational>, center: S, radius: ComparisonFunction, horizon: Horizon },
}

impl<S: Clone + Ord + Debug> LevelSetFamily<S> {
    pub fn sets(grid: Vec<Rational>, sets: Vec<BTreeSet<S>>) -> Result<Self> {
        validate_grid(&grid)?;
        if sets.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: sets.len() });
        }
        for (i, w) in sets.windows(2).enumerate() {
            if !w[0].is_subset(&w[1]) {
                return Err(Error::NotMonotone(format!(
                    "set at radius {} is not contained in the set at {}",
                    grid[i],
                    grid[i + 1]
                )));
            }
        }
        Ok(LevelSetFamily::Sets { grid, sets })
    }

    pub fn balls(grid: Vec<Rational>, center: S, radius: ComparisonFunction) -> Result<Self> {
        validate_grid(&grid)?;
        Ok(LevelSetFamily::Balls { grid, center, radius })
    }

    pub fn grid(&self) -> &[Rational] {
        match self {
            LevelSetFamily::Sets { grid, .. }
            | LevelSetFamily::Sublevel { grid, .. }
            | LevelSetFamily::Balls { grid, .. }
            | LevelSetFamily::Reachable { grid, .. } => grid,
        }
    }

    /// Whether membership is decided by an explicit set rather than a
    /// predicate on arbitrary states.
    pub fn is_extensional(&self) -> bool {
        matches!(self, LevelSetFamily::Sets { .. } | LevelSetFamily::Reachable { .. })
    }

    /// The states of the level set at `eps` visible under `scope`: the
    /// whole set on finite spaces, the sampled members otherwise.
    pub fn members<D: Dynamics<State = S>>(
        &self,
        sys: &D,
        eps: &Rational,
        scope: &Scope<S>,
    ) -> Result<BTreeSet<S>> {
        match self {
            LevelSetFamily::Sets { grid, sets } => {
                let idx = grid.partition_point(|r| r <= eps);
                Ok(if idx == 0 { BTreeSet::new() } else { sets[idx - 1].clone() })
            }
            LevelSetFamily::Sublevel { observable, .. } => {
                let threshold = Value::Exact(eps.clone());
                let mut out = BTreeSet::new();
                for x in scope.domain(sys)? {
                    if observe(sys, observable, &x)?.at_most(&threshold) {
                        out.insert(x);
                    }
                }
                Ok(out)
            }
            LevelSetFamily::Balls { center, radius, .. } => {
                scope.ball(sys, center, &radius.eval(&Value::Exact(eps.clone())))
            }
            LevelSetFamily::Reachable { center, radius, horizon, .. } => {
                let seeds = scope.ball(sys, center, &radius.eval(&Value::Exact(eps.clone())))?;
                Ok(explore(sys, seeds, horizon)?.states())
            }
        }
    }

    /// The states whose trajectories a forward-invariance check follows.
    /// For reachable families this is the ball explored up to the scope's
    /// own horizon, so that one more horizon of travel stays within the
    /// family's (longer) exploration.
    pub fn invariance_seeds<D: Dynamics<State = S>>(
        &self,
        sys: &D,
        eps: &Rational,
        scope: &Scope<S>,
    ) -> Result<BTreeSet<S>> {
        match self {
            LevelSetFamily::Reachable { center, radius, .. } => {
                let seeds = scope.ball(sys, center, &radius.eval(&Value::Exact(eps.clone())))?;
                Ok(explore(sys, seeds, &scope.horizon())?.states())
            }
            _ => self.members(sys, eps, scope),
        }
    }

    /// Membership of `x` in the level set at `eps`.
    pub fn contains<D: Dynamics<State = S>>(
        &self,
        sys: &D,
        eps: &Rational,
        x: &S,
        sampling: Option<&Sampling<S>>,
    ) -> Result<bool> {
        match self {
            LevelSetFamily::Sublevel { observable, .. } => {
                Ok(observe(sys, observable, x)?.at_most(&Value::Exact(eps.clone())))
            }
            LevelSetFamily::Balls { center, radius, .. } => {
                Ok(sys.within(center, x, &radius.eval(&Value::Exact(eps.clone()))))
            }
            LevelSetFamily::Sets { .. } | LevelSetFamily::Reachable { .. } => {
                let scope = match sampling {
                    Some(s) => Scope::Sampled(s.clone()),
                    None => Scope::Exact,
                };
                Ok(self.members(sys, eps, &scope)?.contains(x))
            }
        }
    }

    /// The least grid radius whose set contains `x`, or `+inf`.
    pub fn least_level<D: Dynamics<State = S>>(
        &self,
        sys: &D,
        x: &S,
        sampling: Option<&Sampling<S>>,
    ) -> Result<Value> {
        for eps in self.grid() {
            if self.contains(sys, eps, x, sampling)? {
                return Ok(Value::Exact(eps.clone()));
            }
        }
        Ok(Value::Infinite)
    }

    /// Checks `set(r) ⊆ set(r')` for consecutive grid radii on the members
    /// visible under `scope`.
    pub fn check_monotone<D: Dynamics<State = S>>(&self, sys: &D, scope: &Scope<S>) -> Result<Verdict<(Rational, S)>> {
        let grid = self.grid();
        for w in grid.windows(2) {
            for x in self.members(sys, &w[0], scope)? {
                if !self.contains(sys, &w[1], &x, scope.sampling())? {
                    return Ok(Verdict::Fail((w[0].clone(), x)));
                }
            }
        }
        Ok(Verdict::pass(scope.proves(sys)))
    }
}

/// The sublevel family of `obs` on `grid`: explicit sets on finite spaces,
/// a membership predicate otherwise.
pub fn sublevel<D: Dynamics>(
    sys: &D,
    obs: &Observable<D::State>,
    grid: Vec<Rational>,
) -> Result<LevelSetFamily<D::State>> {
    validate_grid(&grid)?;
    match sys.states() {
        Some(states) => {
            let levels = states.iter().map(|x| observe(sys, obs, x)).collect::<Result<Vec<_>>>()?;
            let sets = grid
                .iter()
                .map(|r| {
                    let r = Value::Exact(r.clone());
                    states.iter().zip(&levels).filter(|(_, l)| l.at_most(&r)).map(|(x, _)| x.clone()).collect()
                })
                .collect();
            Ok(LevelSetFamily::Sets { grid, sets })
        }
        None => Ok(LevelSetFamily::Sublevel { grid, observable: obs.clone() }),
    }
}

/// Radii at which the sublevel sets of `obs` change on a finite space: the
/// distinct positive finite values, plus half the smallest of them when the
/// value zero is attained so that `{V = 0}` gets its own radius.
pub fn observed_grid<D: Dynamics>(sys: &D, obs: &Observable<D::State>) -> Result<Vec<Rational>> {
    let states = sys.states().ok_or(Error::UnsupportedExactReach)?;
    let mut values = BTreeSet::new();
    let mut has_zero = false;
    for x in &states {
        let level = observe(sys, obs, x)?;
        match level.key.to_rational() {
            Some(q) if q.is_zero() => has_zero = true,
            Some(q) if q.is_positive() => {
                values.insert(q);
            }
            Some(_) => return Err(Error::InvalidGrid("observable takes a negative value".into())),
            None => {}
        }
    }
    let mut grid: Vec<Rational> = values.into_iter().collect();
    if has_zero {
        let first = grid.first().cloned().unwrap_or_else(|| Rational::from_integer(2.into()));
        grid.insert(0, first / Rational::from_integer(2.into()));
    }
    Ok(grid)
}

/// A state that leaves a level set it started in.
#[derive(Clone, Debug, PartialEq)]
pub struct LaxconeWitness<S> {
    pub epsilon: Rational,
    pub trace: Trace<S>,
}

/// Checks forward invariance `F_t(fam(r)) ⊆ fam(r)` at every grid radius.
pub fn check_levelset_laxcone<D: Dynamics>(
    sys: &D,
    fam: &LevelSetFamily<D::State>,
    scope: &Scope<D::State>,
) -> Result<Verdict<LaxconeWitness<D::State>>> {
    let horizon = scope.horizon();
    for eps in fam.grid() {
        let members = fam.members(sys, eps, scope)?;
        let seeds = fam.invariance_seeds(sys, eps, scope)?;
        let reach = explore(sys, seeds, &horizon)?;
        for (y, _) in reach.by_depth() {
            let inside = if fam.is_extensional() {
                members.contains(y)
            } else {
                fam.contains(sys, eps, y, scope.sampling())?
            };
            if !inside {
                let trace = reach.trace(y).expect("visited state has a trace");
                return Ok(Verdict::Fail(LaxconeWitness { epsilon: eps.clone(), trace }));
            }
        }
    }
    Ok(Verdict::pass(scope.proves(sys)))
}

/// `max V(s)`, the supremum of the observable over a nonempty set.
pub fn v_max<D: Dynamics>(sys: &D, obs: &Observable<D::State>, s: &BTreeSet<D::State>) -> Result<Value> {
    let mut best: Option<Level> = None;
    for x in s {
        let level = observe(sys, obs, x)?;
        if best.as_ref().is_none_or(|b| !level.key_le(b)) {
            best = Some(level);
        }
    }
    best.map(|l| l.value()).ok_or(Error::EmptySet)
}

/// A set whose image raised the maximum of the observable.
#[derive(Clone, Debug, PartialEq)]
pub struct VmaxWitness<S> {
    pub set: BTreeSet<S>,
    pub time: TimePoint,
    pub before: Value,
    pub after: Value,
}

fn max_level<D: Dynamics>(sys: &D, obs: &Observable<D::State>, xs: impl Iterator<Item = D::State>) -> Result<Option<Level>> {
    let mut best: Option<Level> = None;
    for x in xs {
        let level = observe(sys, obs, &x)?;
        if best.as_ref().is_none_or(|b| !level.key_le(b)) {
            best = Some(level);
        }
    }
    Ok(best)
}

fn sample_times(kind: &TimelineKind, horizon: &Horizon) -> Vec<TimePoint> {
    match horizon {
        Horizon::Unbounded => kind.generators(&Rational::from_integer(1.into())),
        Horizon::Steps { count, dt } => match kind {
            TimelineKind::DiscreteLinear => (1..=*count as u64).map(TimePoint::Ticks).collect(),
            TimelineKind::ContinuousLinear => {
                (1..=*count).map(|k| TimePoint::Duration(dt * Rational::from_integer(k.into()))).collect()
            }
            TimelineKind::FreeMonoid { alphabet } => words_up_to(*alphabet, (*count as usize).min(4))
                .into_iter()
                .filter(|w| !w.is_empty())
                .map(TimePoint::Word)
                .collect(),
        },
    }
}

/// Checks that `V_max` is a monovariant of the action on subsets: for each
/// given set `X`, `max V(F_t(X))` moves in `direction` relative to
/// `max V(X)`. Under the exact scope one generator step per set suffices;
/// otherwise a bounded family of time points is used.
pub fn check_vmax_monovariant<D: Dynamics>(
    sys: &D,
    obs: &Observable<D::State>,
    direction: Direction,
    subsets: &[BTreeSet<D::State>],
    scope: &Scope<D::State>,
) -> Result<Verdict<VmaxWitness<D::State>>> {
    let times = sample_times(sys.timeline(), &scope.horizon());
    for set in subsets {
        let Some(before) = max_level(sys, obs, set.iter().cloned())? else {
            return Err(Error::EmptySet);
        };
        for t in &times {
            let image = set.iter().map(|x| sys.evolve(x, t)).collect::<Result<BTreeSet<_>>>()?;
            let after = max_level(sys, obs, image.into_iter())?.expect("image of a nonempty set");
            if !direction.holds(&before, &after) {
                return Ok(Verdict::Fail(VmaxWitness {
                    set: set.clone(),
                    time: t.clone(),
                    before: before.value(),
                    after: after.value(),
                }));
            }
        }
    }
    Ok(Verdict::pass(scope.proves(sys)))
}

/// The result of an attractor check. The equilibrium verdict is only
/// computed when the distance check passes.
#[derive(Clone, Debug, PartialEq)]
pub struct AttractorReport<S> {
    pub distance: Verdict<MonovariantWitness<S>>,
    pub equilibrium: Option<Verdict<Trace<S>>>,
}

impl<S> AttractorReport<S> {
    pub fn is_pass(&self) -> bool {
        self.distance.is_pass() && self.equilibrium.as_ref().is_some_and(Verdict::is_pass)
    }
}

/// `x*` is an attractor when `d(x*, ·)` is non-increasing along
/// trajectories; an attractor is then an equilibrium.
pub fn check_attractor<D: Dynamics>(
    sys: &D,
    center: &D::State,
    scope: &Scope<D::State>,
) -> Result<AttractorReport<D::State>> {
    if !sys.contains(center) {
        return Err(Error::StateOutOfRange(format!("{center:?}")));
    }
    let distance =
        check_monovariant(sys, &Observable::DistanceTo(center.clone()), Direction::NonIncreasing, scope)?;
    let equilibrium = if distance.is_pass() {
        Some(is_equilibrium(sys, &BTreeSet::from([center.clone()]), &scope.horizon())?)
    } else {
        None
    };
    Ok(AttractorReport { distance, equilibrium })
}

/// A state where `A(I(m)) <= J(m) <= B(I(m))` fails.
#[derive(Clone, Debug, PartialEq)]
pub struct RoughWitness<S> {
    pub state: S,
    pub lower: Value,
    pub middle: Value,
    pub upper: Value,
}

/// Checks that `i` roughly approximates `j` through `lower` and `upper`.
pub fn check_rough_approx<D: Dynamics>(
    sys: &D,
    i: &Observable<D::State>,
    j: &Observable<D::State>,
    lower: &ComparisonFunction,
    upper: &ComparisonFunction,
    scope: &Scope<D::State>,
) -> Result<Verdict<RoughWitness<D::State>>> {
    let mut exact = scope.proves(sys);
    for m in scope.domain(sys)? {
        let iv = observe(sys, i, &m)?.value();
        let jv = observe(sys, j, &m)?.value();
        let (lo, hi) = (lower.eval(&iv), upper.eval(&iv));
        exact &= lo.is_exact() && jv.is_exact() && hi.is_exact();
        if !(lo.le(&jv) && jv.le(&hi)) {
            return Ok(Verdict::Fail(RoughWitness { state: m, lower: lo, middle: jv, upper: hi }));
        }
    }
    Ok(Verdict::pass(exact))
}
