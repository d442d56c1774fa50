//! Forward dynamical systems: actions of a timeline on a metric state space.
//!
//! Two state spaces are supported. [`FiniteSystem`] carries an explicit
//! rational distance table and one total map per generator letter; every
//! quantifier over states and times can be discharged exactly through
//! reachability. [`EuclideanSystem`] acts on rational points of `Q^n` by
//! affine maps or uniform motion; checks over it are bounded by a horizon
//! and a finite point cloud.
//!
//! Words act left to right: the first letter is applied first, so
//! `evolve(evolve(x, s), t) == evolve(x, s + t)`.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_traits::{One, Signed, Zero};

use crate::monovariant::Observable;
use crate::scalar::{from_f64, to_f64, Level, Rational, Scale, Value, APPROX_TOLERANCE};
use crate::timeline::{TimePoint, TimelineKind};
use crate::{Error, Result, Verdict};

/// The action `F: T -> End(M)` together with the metric of `M`.
pub trait Dynamics {
    type State: Clone + Ord + Debug;

    fn timeline(&self) -> &TimelineKind;

    fn contains(&self, x: &Self::State) -> bool;

    fn evolve(&self, x: &Self::State, t: &TimePoint) -> Result<Self::State>;

    /// Closed-ball membership `d(center, x) <= radius`.
    fn within(&self, center: &Self::State, x: &Self::State, radius: &Value) -> bool;

    /// Evaluates the state-space specific observables. Level-set backed
    /// observables are handled generically by [`crate::monovariant::observe`].
    fn observe_basic(&self, obs: &Observable<Self::State>, x: &Self::State) -> Result<Level>;

    fn is_finite(&self) -> bool;

    /// Every state, when the space is finite.
    fn states(&self) -> Option<Vec<Self::State>>;

    /// The closed ball `B(center, radius)`: exact on finite spaces, a scaled
    /// copy of the sampling cloud plus the sampled states otherwise.
    /// Approximate radii are shrunk by the relative comparison tolerance
    /// before scaling the cloud.
    fn ball(
        &self,
        center: &Self::State,
        radius: &Value,
        sampling: Option<&Sampling<Self::State>>,
    ) -> Result<BTreeSet<Self::State>>;
}

/// How far in time an exploration goes.
#[derive(Clone, Debug, PartialEq)]
pub enum Horizon {
    /// Every time point. Needs a finite state space.
    Unbounded,
    /// At most `count` generator steps; continuous timelines step by `dt`.
    Steps { count: u32, dt: Rational },
}

impl Horizon {
    pub fn steps(count: u32) -> Self {
        Horizon::Steps { count, dt: Rational::one() }
    }

    pub fn doubled(&self) -> Horizon {
        match self {
            Horizon::Unbounded => Horizon::Unbounded,
            Horizon::Steps { count, dt } => Horizon::Steps { count: count.saturating_mul(2), dt: dt.clone() },
        }
    }
}

/// Bounded quantification: a time horizon, the states checked directly, and
/// a cloud of offsets inside the unit ball used to sample balls of any
/// radius (ignored on finite spaces).
#[derive(Clone, Debug, PartialEq)]
pub struct Sampling<S> {
    pub horizon: Horizon,
    pub states: Vec<S>,
    pub cloud: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scope<S> {
    /// All states and all times; finite spaces only.
    Exact,
    Sampled(Sampling<S>),
}

impl<S: Clone + Ord + Debug> Scope<S> {
    pub fn is_exact(&self) -> bool {
        matches!(self, Scope::Exact)
    }

    pub fn horizon(&self) -> Horizon {
        match self {
            Scope::Exact => Horizon::Unbounded,
            Scope::Sampled(s) => s.horizon.clone(),
        }
    }

    pub fn sampling(&self) -> Option<&Sampling<S>> {
        match self {
            Scope::Exact => None,
            Scope::Sampled(s) => Some(s),
        }
    }

    /// States quantified over.
    pub fn domain<D: Dynamics<State = S>>(&self, sys: &D) -> Result<Vec<S>> {
        match self {
            Scope::Exact => sys.states().ok_or(Error::UnsupportedExactReach),
            Scope::Sampled(s) if s.states.is_empty() && sys.is_finite() => {
                Ok(sys.states().unwrap_or_default())
            }
            Scope::Sampled(s) => Ok(s.states.clone()),
        }
    }

    pub fn ball<D: Dynamics<State = S>>(&self, sys: &D, center: &S, radius: &Value) -> Result<BTreeSet<S>> {
        if self.is_exact() && !sys.is_finite() {
            return Err(Error::UnsupportedExactReach);
        }
        sys.ball(center, radius, self.sampling())
    }

    /// Whether a passing verdict under this scope counts as proved.
    pub fn proves<D: Dynamics<State = S>>(&self, sys: &D) -> bool {
        self.is_exact() && sys.is_finite()
    }
}

/// `F_time(start) == state`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<S> {
    pub start: S,
    pub time: TimePoint,
    pub state: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Visit<S> {
    pub origin: S,
    pub time: TimePoint,
    pub depth: u32,
}

/// States reached from a seed set, each with the first (shortest) time it
/// was reached and the seed it came from.
#[derive(Clone, Debug, Default)]
pub struct Reach<S: Ord> {
    pub visits: BTreeMap<S, Visit<S>>,
}

impl<S: Clone + Ord> Reach<S> {
    pub fn states(&self) -> BTreeSet<S> {
        self.visits.keys().cloned().collect()
    }

    pub fn trace(&self, x: &S) -> Option<Trace<S>> {
        self.visits
            .get(x)
            .map(|v| Trace { start: v.origin.clone(), time: v.time.clone(), state: x.clone() })
    }

    /// Visits ordered by depth, ties broken by state order.
    pub fn by_depth(&self) -> Vec<(&S, &Visit<S>)> {
        let mut all: Vec<_> = self.visits.iter().collect();
        all.sort_by_key(|(_, v)| v.depth);
        all
    }

    /// Shallowest reached state outside `keep`, as a trace.
    pub fn escape(&self, mut keep: impl FnMut(&S) -> bool) -> Option<Trace<S>> {
        self.by_depth().into_iter().find(|(x, _)| !keep(x)).and_then(|(x, _)| self.trace(x))
    }
}

/// Breadth-first exploration of the orbit of `seeds` under the generators.
pub fn explore<D: Dynamics>(
    sys: &D,
    seeds: impl IntoIterator<Item = D::State>,
    horizon: &Horizon,
) -> Result<Reach<D::State>> {
    let (limit, dt) = match horizon {
        Horizon::Unbounded if !sys.is_finite() => return Err(Error::UnsupportedExactReach),
        Horizon::Unbounded => (None, Rational::one()),
        Horizon::Steps { count, dt } => (Some(*count), dt.clone()),
    };
    let kind = sys.timeline();
    let generators = kind.generators(&dt);
    let mut visits: BTreeMap<D::State, Visit<D::State>> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for seed in seeds {
        if !sys.contains(&seed) {
            return Err(Error::StateOutOfRange(format!("{seed:?}")));
        }
        if !visits.contains_key(&seed) {
            visits.insert(seed.clone(), Visit { origin: seed.clone(), time: kind.zero(), depth: 0 });
            queue.push_back(seed);
        }
    }
    while let Some(x) = queue.pop_front() {
        let visit = visits[&x].clone();
        if limit.is_some_and(|l| visit.depth >= l) {
            continue;
        }
        for g in &generators {
            let y = sys.evolve(&x, g)?;
            if !visits.contains_key(&y) {
                let time = kind.plus(&visit.time, g)?;
                visits.insert(y.clone(), Visit { origin: visit.origin.clone(), time, depth: visit.depth + 1 });
                queue.push_back(y);
            }
        }
    }
    Ok(Reach { visits })
}

/// The future of `s`: the union of its images `F_t(s)` for `0 <= t <=
/// horizon`. With `Horizon::Unbounded` on a finite space this is the exact
/// reachability fixpoint.
pub fn future<D: Dynamics>(sys: &D, s: &BTreeSet<D::State>, horizon: &Horizon) -> Result<BTreeSet<D::State>> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(explore(sys, s.iter().cloned(), horizon)?.states())
}

/// A set is an equilibrium when it is its own future. Since the future
/// always contains the set (`t = 0`), this is checked as `future(s) ⊆ s`;
/// a failure names a trajectory leaving the set.
pub fn is_equilibrium<D: Dynamics>(
    sys: &D,
    s: &BTreeSet<D::State>,
    horizon: &Horizon,
) -> Result<Verdict<Trace<D::State>>> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    let reach = explore(sys, s.iter().cloned(), horizon)?;
    Ok(match reach.escape(|x| s.contains(x)) {
        Some(trace) => Verdict::Fail(trace),
        None => Verdict::pass(matches!(horizon, Horizon::Unbounded)),
    })
}

// ---------------------------------------------------------------------------
// Finite systems
// ---------------------------------------------------------------------------

/// A finite metric space given by its distance table.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMetric {
    size: usize,
    table: Vec<Rational>,
}

impl FiniteMetric {
    /// Validates symmetry, zero exactly on the diagonal and the triangle
    /// inequality.
    pub fn new(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::InvalidMetric("a metric space needs at least one state".into()));
        }
        let mut table = Vec::with_capacity(size * size);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != size {
                return Err(Error::InvalidMetric(format!("row {i} has {} entries, expected {size}", row.len())));
            }
            table.extend(row);
        }
        let metric = FiniteMetric { size, table };
        for i in 0..size {
            for j in 0..size {
                let d = metric.distance(i, j);
                if i == j && !d.is_zero() {
                    return Err(Error::InvalidMetric(format!("d({i},{i}) = {d} is not zero")));
                }
                if i != j && !d.is_positive() {
                    return Err(Error::InvalidMetric(format!("d({i},{j}) = {d} must be positive")));
                }
                if d != metric.distance(j, i) {
                    return Err(Error::InvalidMetric(format!("d({i},{j}) != d({j},{i})")));
                }
            }
        }
        for i in 0..size {
            for j in 0..size {
                for k in 0..size {
                    if *metric.distance(i, k) > metric.distance(i, j) + metric.distance(j, k) {
                        return Err(Error::InvalidMetric(format!(
                            "triangle inequality fails for d({i},{k}) > d({i},{j}) + d({j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(metric)
    }

    /// The discrete metric: distance one between distinct states.
    pub fn uniform(size: usize) -> Result<Self> {
        let rows = (0..size)
            .map(|i| (0..size).map(|j| if i == j { Rational::zero() } else { Rational::one() }).collect())
            .collect();
        FiniteMetric::new(rows)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn distance(&self, i: usize, j: usize) -> &Rational {
        &self.table[i * self.size + j]
    }

    pub fn rows(&self) -> Vec<Vec<Rational>> {
        self.table.chunks(self.size).map(|r| r.to_vec()).collect()
    }
}

/// A finite forward dynamical system: one total map per generator.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSystem {
    metric: FiniteMetric,
    timeline: TimelineKind,
    maps: Vec<Vec<usize>>,
}

impl FiniteSystem {
    pub fn new(metric: FiniteMetric, timeline: TimelineKind, maps: Vec<Vec<usize>>) -> Result<Self> {
        if timeline == TimelineKind::ContinuousLinear {
            return Err(Error::InvalidSystem("finite systems need a discrete or word timeline".into()));
        }
        if maps.len() != timeline.arity() {
            return Err(Error::InvalidSystem(format!(
                "timeline {} needs {} maps, got {}",
                timeline.name(),
                timeline.arity(),
                maps.len()
            )));
        }
        let n = metric.size();
        for (letter, map) in maps.iter().enumerate() {
            if map.len() != n {
                return Err(Error::InvalidSystem(format!("map {letter} has {} entries, expected {n}", map.len())));
            }
            if let Some(bad) = map.iter().find(|&&y| y >= n) {
                return Err(Error::InvalidSystem(format!("map {letter} sends a state to {bad}, outside 0..{n}")));
            }
        }
        Ok(FiniteSystem { metric, timeline, maps })
    }

    pub fn metric(&self) -> &FiniteMetric {
        &self.metric
    }

    pub fn maps(&self) -> &[Vec<usize>] {
        &self.maps
    }

    pub fn size(&self) -> usize {
        self.metric.size()
    }

    /// Sorted distinct positive distances from `center`.
    pub fn distance_spectrum(&self, center: usize) -> Vec<Rational> {
        let set: BTreeSet<Rational> =
            (0..self.size()).map(|j| self.metric.distance(center, j).clone()).filter(|d| d.is_positive()).collect();
        set.into_iter().collect()
    }

    /// Default radius grid around `center`: half the smallest positive
    /// distance (where the ball is `{center}` alone) followed by every
    /// distinct positive distance. Balls only change at these radii.
    pub fn default_grid(&self, center: usize) -> Vec<Rational> {
        let spectrum = self.distance_spectrum(center);
        match spectrum.first() {
            None => vec![Rational::one()],
            Some(smallest) => {
                let mut grid = vec![smallest / Rational::from_integer(2.into())];
                grid.extend(spectrum);
                grid
            }
        }
    }

    fn apply_ticks(&self, mut x: usize, ticks: u64) -> usize {
        let map = &self.maps[0];
        let mut first_seen = vec![u64::MAX; self.size()];
        let mut k = 0u64;
        while k < ticks {
            if first_seen[x] != u64::MAX {
                let cycle = k - first_seen[x];
                for _ in 0..(ticks - k) % cycle {
                    x = map[x];
                }
                return x;
            }
            first_seen[x] = k;
            x = map[x];
            k += 1;
        }
        x
    }
}

impl Dynamics for FiniteSystem {
    type State = usize;

    fn timeline(&self) -> &TimelineKind {
        &self.timeline
    }

    fn contains(&self, x: &usize) -> bool {
        *x < self.size()
    }

    fn evolve(&self, x: &usize, t: &TimePoint) -> Result<usize> {
        if !self.contains(x) {
            return Err(Error::StateOutOfRange(format!("{x}")));
        }
        self.timeline.validate(t)?;
        Ok(match t {
            TimePoint::Ticks(k) => self.apply_ticks(*x, *k),
            TimePoint::Word(w) => w.iter().fold(*x, |s, &l| self.maps[l as usize][s]),
            TimePoint::Duration(_) => unreachable!("validated against a discrete timeline"),
        })
    }

    fn within(&self, center: &usize, x: &usize, radius: &Value) -> bool {
        Value::Exact(self.metric.distance(*center, *x).clone()).le(radius)
    }

    fn observe_basic(&self, obs: &Observable<usize>, x: &usize) -> Result<Level> {
        if !self.contains(x) {
            return Err(Error::StateOutOfRange(format!("{x}")));
        }
        match obs {
            Observable::DistanceTo(c) => {
                if !self.contains(c) {
                    return Err(Error::StateOutOfRange(format!("{c}")));
                }
                Ok(Level::linear(Value::Exact(self.metric.distance(*c, *x).clone())))
            }
            Observable::Table(values) => {
                if values.len() != self.size() {
                    return Err(Error::DimensionMismatch { expected: self.size(), found: values.len() });
                }
                Ok(Level::linear(values[*x].clone()))
            }
            Observable::Quadratic(_) => Err(Error::UnsupportedObservable("quadratic")),
            Observable::Coordinate(_) => Err(Error::UnsupportedObservable("coordinate")),
            Observable::Levels(_) => unreachable!("handled by monovariant::observe"),
        }
    }

    fn is_finite(&self) -> bool {
        true
    }

    fn states(&self) -> Option<Vec<usize>> {
        Some((0..self.size()).collect())
    }

    fn ball(&self, center: &usize, radius: &Value, _sampling: Option<&Sampling<usize>>) -> Result<BTreeSet<usize>> {
        if !self.contains(center) {
            return Err(Error::StateOutOfRange(format!("{center}")));
        }
        Ok((0..self.size()).filter(|x| self.within(center, x, radius)).collect())
    }
}

// ---------------------------------------------------------------------------
// Euclidean systems
// ---------------------------------------------------------------------------

pub type Point = Vec<Rational>;

/// Dense square matrix with exact rational entries.
#[derive(Clone, Debug, PartialEq)]
pub struct RatMatrix {
    dim: usize,
    entries: Vec<Rational>,
}

impl RatMatrix {
    pub fn new(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidMatrix("matrix must be at least 1x1".into()));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            entries.extend(row);
        }
        Ok(RatMatrix { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        RatMatrix::scalar(dim, Rational::one())
    }

    pub fn scalar(dim: usize, q: Rational) -> Self {
        let mut entries = vec![Rational::zero(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = q.clone();
        }
        RatMatrix { dim, entries }
    }

    /// Exact conversion of a double matrix.
    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&v| from_f64(v).ok_or_else(|| Error::InvalidMatrix(format!("non-finite entry {v}"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        RatMatrix::new(rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<Rational>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(|r| r.iter().map(to_f64).collect()).collect()
    }

    pub fn apply(&self, x: &[Rational]) -> Point {
        (0..self.dim)
            .map(|i| {
                let mut acc = Rational::zero();
                for (j, xj) in x.iter().enumerate() {
                    let a = self.get(i, j);
                    if !a.is_zero() && !xj.is_zero() {
                        acc += a * xj;
                    }
                }
                acc
            })
            .collect()
    }

    /// `x^T M x`.
    pub fn quadratic_form(&self, x: &[Rational]) -> Rational {
        let mx = self.apply(x);
        x.iter().zip(&mx).map(|(a, b)| a * b).fold(Rational::zero(), |acc, v| acc + v)
    }
}

/// `x -> A x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub matrix: RatMatrix,
    pub offset: Option<Point>,
}

impl AffineMap {
    pub fn apply(&self, x: &[Rational]) -> Point {
        let mut y = self.matrix.apply(x);
        if let Some(b) = &self.offset {
            for (yi, bi) in y.iter_mut().zip(b) {
                *yi += bi;
            }
        }
        y
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EuclideanDynamics {
    /// One affine map per letter (one map for the discrete timeline).
    Maps(Vec<AffineMap>),
    /// `F_t(x) = x + v t` on the continuous timeline.
    UniformMotion { velocity: Point },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanSystem {
    dim: usize,
    timeline: TimelineKind,
    dynamics: EuclideanDynamics,
}

impl EuclideanSystem {
    pub fn new(dim: usize, timeline: TimelineKind, dynamics: EuclideanDynamics) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSystem("dimension must be at least 1".into()));
        }
        match &dynamics {
            EuclideanDynamics::Maps(maps) => {
                if timeline == TimelineKind::ContinuousLinear {
                    return Err(Error::InvalidSystem("affine maps need a discrete or word timeline".into()));
                }
                if maps.len() != timeline.arity() {
                    return Err(Error::InvalidSystem(format!(
                        "timeline {} needs {} maps, got {}",
                        timeline.name(),
                        timeline.arity(),
                        maps.len()
                    )));
                }
                for map in maps {
                    if map.matrix.dim() != dim {
                        return Err(Error::DimensionMismatch { expected: dim, found: map.matrix.dim() });
                    }
                    if let Some(b) = &map.offset {
                        if b.len() != dim {
                            return Err(Error::DimensionMismatch { expected: dim, found: b.len() });
                        }
                    }
                }
            }
            EuclideanDynamics::UniformMotion { velocity } => {
                if timeline != TimelineKind::ContinuousLinear {
                    return Err(Error::InvalidSystem("uniform motion runs on the continuous timeline".into()));
                }
                if velocity.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: velocity.len() });
                }
            }
        }
        Ok(EuclideanSystem { dim, timeline, dynamics })
    }

    /// `x -> A x` on the discrete timeline.
    pub fn linear(matrix: RatMatrix) -> Result<Self> {
        let dim = matrix.dim();
        EuclideanSystem::new(dim, TimelineKind::DiscreteLinear, EuclideanDynamics::Maps(vec![AffineMap { matrix, offset: None }]))
    }

    /// `x -> A x + b` on the discrete timeline.
    pub fn affine(matrix: RatMatrix, offset: Point) -> Result<Self> {
        let dim = matrix.dim();
        EuclideanSystem::new(
            dim,
            TimelineKind::DiscreteLinear,
            EuclideanDynamics::Maps(vec![AffineMap { matrix, offset: Some(offset) }]),
        )
    }

    /// Switching system: letter `i` applies `A_i`.
    pub fn switching(matrices: Vec<RatMatrix>) -> Result<Self> {
        let dim = matrices.first().map(RatMatrix::dim).unwrap_or(0);
        let timeline = TimelineKind::free_monoid(matrices.len())?;
        let maps = matrices.into_iter().map(|matrix| AffineMap { matrix, offset: None }).collect();
        EuclideanSystem::new(dim, timeline, EuclideanDynamics::Maps(maps))
    }

    /// Discrete control over `{⊥, ⊤}`: letter 0 applies `A x`, letter 1
    /// applies `A x + b`.
    pub fn affine_control(matrix: RatMatrix, offset: Point) -> Result<Self> {
        let dim = matrix.dim();
        let maps = vec![
            AffineMap { matrix: matrix.clone(), offset: None },
            AffineMap { matrix, offset: Some(offset) },
        ];
        EuclideanSystem::new(dim, TimelineKind::free_monoid(2)?, EuclideanDynamics::Maps(maps))
    }

    pub fn uniform_motion(velocity: Point) -> Result<Self> {
        EuclideanSystem::new(velocity.len(), TimelineKind::ContinuousLinear, EuclideanDynamics::UniformMotion { velocity })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dynamics(&self) -> &EuclideanDynamics {
        &self.dynamics
    }

    /// The generator matrices when every map is linear (no offsets).
    pub fn linear_modes(&self) -> Option<Vec<&RatMatrix>> {
        match &self.dynamics {
            EuclideanDynamics::Maps(maps) if maps.iter().all(|m| m.offset.as_ref().is_none_or(|b| b.iter().all(Zero::is_zero))) => {
                Some(maps.iter().map(|m| &m.matrix).collect())
            }
            _ => None,
        }
    }

    fn squared_distance(x: &[Rational], y: &[Rational]) -> Rational {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).fold(Rational::zero(), |acc, v| acc + v)
    }

    fn check_point(&self, x: &[Rational]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(())
    }
}

impl Dynamics for EuclideanSystem {
    type State = Point;

    fn timeline(&self) -> &TimelineKind {
        &self.timeline
    }

    fn contains(&self, x: &Point) -> bool {
        x.len() == self.dim
    }

    fn evolve(&self, x: &Point, t: &TimePoint) -> Result<Point> {
        self.check_point(x)?;
        self.timeline.validate(t)?;
        Ok(match (&self.dynamics, t) {
            (EuclideanDynamics::Maps(maps), TimePoint::Ticks(k)) => {
                let mut y = x.clone();
                for _ in 0..*k {
                    y = maps[0].apply(&y);
                }
                y
            }
            (EuclideanDynamics::Maps(maps), TimePoint::Word(w)) => {
                w.iter().fold(x.clone(), |y, &l| maps[l as usize].apply(&y))
            }
            (EuclideanDynamics::UniformMotion { velocity }, TimePoint::Duration(dt)) => {
                x.iter().zip(velocity).map(|(xi, vi)| xi + vi * dt).collect()
            }
            _ => unreachable!("timeline validated at construction"),
        })
    }

    fn within(&self, center: &Point, x: &Point, radius: &Value) -> bool {
        let d2 = EuclideanSystem::squared_distance(center, x);
        match radius {
            Value::Infinite => true,
            Value::Exact(r) => !r.is_negative() && d2 <= r * r,
            Value::Approx(r) => {
                let r = *r;
                r >= 0.0 && libm::sqrt(to_f64(&d2)) <= r + APPROX_TOLERANCE * r.max(1.0)
            }
        }
    }

    fn observe_basic(&self, obs: &Observable<Point>, x: &Point) -> Result<Level> {
        self.check_point(x)?;
        match obs {
            Observable::DistanceTo(c) => {
                self.check_point(c)?;
                Ok(Level { key: Value::Exact(EuclideanSystem::squared_distance(c, x)), scale: Scale::SquareRoot })
            }
            Observable::Quadratic(p) => {
                if p.dim() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, found: p.dim() });
                }
                Ok(Level::linear(Value::Exact(p.quadratic_form(x))))
            }
            Observable::Coordinate(i) => match x.get(*i) {
                Some(v) => Ok(Level::linear(Value::Exact(v.clone()))),
                None => Err(Error::DimensionMismatch { expected: self.dim, found: *i + 1 }),
            },
            Observable::Table(_) => Err(Error::UnsupportedObservable("table")),
            Observable::Levels(_) => unreachable!("handled by monovariant::observe"),
        }
    }

    fn is_finite(&self) -> bool {
        false
    }

    fn states(&self) -> Option<Vec<Point>> {
        None
    }

    fn ball(&self, center: &Point, radius: &Value, sampling: Option<&Sampling<Point>>) -> Result<BTreeSet<Point>> {
        self.check_point(center)?;
        let sampling = sampling.ok_or(Error::UnsupportedExactReach)?;
        let mut out = BTreeSet::new();
        out.insert(center.clone());
        if let Some(mut r) = radius.to_rational() {
            if let Value::Approx(_) = radius {
                r *= from_f64(1.0 - APPROX_TOLERANCE).expect("finite");
            }
            for u in &sampling.cloud {
                self.check_point(u)?;
                let p: Point = center.iter().zip(u).map(|(c, ui)| c + ui * &r).collect();
                if self.within(center, &p, radius) {
                    out.insert(p);
                }
            }
        }
        out.extend(sampling.states.iter().filter(|x| self.within(center, x, radius)).cloned());
        Ok(out)
    }
}

/// Lattice points `k / per_axis` of the cube `[-1, 1]^dim` that lie in the
/// closed unit ball; a deterministic cloud for [`Sampling::cloud`].
pub fn unit_ball_lattice(dim: usize, per_axis: u32) -> Vec<Point> {
    let per_axis = per_axis.max(1) as i64;
    let side = (2 * per_axis + 1) as usize;
    let total = side.checked_pow(dim as u32).unwrap_or(usize::MAX);
    let denom = Rational::from_integer(per_axis.into());
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        let p: Point =
            idx.iter().map(|&k| Rational::from_integer((k as i64 - per_axis).into()) / &denom).collect();
        let norm2 = p.iter().map(|v| v * v).fold(Rational::zero(), |a, b| a + b);
        if norm2 <= Rational::one() {
            out.push(p);
        }
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < side {
                break;
            }
            *slot = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    fn half() -> EuclideanSystem {
        EuclideanSystem::linear(RatMatrix::scalar(1, rat(1, 2))).unwrap()
    }

    fn swap() -> FiniteSystem {
        FiniteSystem::new(FiniteMetric::uniform(2).unwrap(), TimelineKind::DiscreteLinear, vec![vec![1, 0]]).unwrap()
    }

    #[test]
    fn uniform_motion_moves_linearly() {
        let sys = EuclideanSystem::uniform_motion(vec![int(1)]).unwrap();
        assert_eq!(sys.evolve(&vec![int(2)], &TimePoint::Duration(int(3))).unwrap(), vec![int(5)]);
        assert_eq!(sys.evolve(&vec![int(2)], &sys.timeline().zero()).unwrap(), vec![int(2)]);
    }

    #[test]
    fn linear_map_iterates() {
        let sys = half();
        assert_eq!(sys.evolve(&vec![int(3)], &TimePoint::Ticks(2)).unwrap(), vec![rat(3, 4)]);
        assert!(matches!(sys.evolve(&vec![int(3), int(1)], &TimePoint::Ticks(1)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn words_act_left_to_right() {
        let a = RatMatrix::new(vec![vec![int(0), int(1)], vec![int(0), int(0)]]).unwrap();
        let b = RatMatrix::new(vec![vec![int(1), int(0)], vec![int(1), int(0)]]).unwrap();
        let sys = EuclideanSystem::switching(vec![a.clone(), b.clone()]).unwrap();
        let x = vec![int(1), int(2)];
        let got = sys.evolve(&x, &TimePoint::word(&[0, 1])).unwrap();
        assert_eq!(got, b.apply(&a.apply(&x)));
    }

    #[test]
    fn affine_control_letters() {
        let sys = EuclideanSystem::affine_control(RatMatrix::scalar(1, rat(1, 2)), vec![int(1)]).unwrap();
        assert_eq!(sys.evolve(&vec![int(4)], &TimePoint::word(&[0])).unwrap(), vec![int(2)]);
        assert_eq!(sys.evolve(&vec![int(4)], &TimePoint::word(&[1])).unwrap(), vec![int(3)]);
    }

    #[test]
    fn finite_ticks_use_cycle_shortcut() {
        let sys = swap();
        assert_eq!(sys.evolve(&0, &TimePoint::Ticks(u64::MAX)).unwrap(), 1);
        assert_eq!(sys.evolve(&0, &TimePoint::Ticks(1_000_000_000_000)).unwrap(), 0);
    }

    #[test]
    fn future_of_swap_is_whole_space() {
        let sys = swap();
        let s: BTreeSet<usize> = [0].into();
        assert_eq!(future(&sys, &s, &Horizon::Unbounded).unwrap(), [0, 1].into());
        assert!(matches!(future(&sys, &BTreeSet::new(), &Horizon::Unbounded), Err(Error::EmptySet)));
    }

    #[test]
    fn bounded_future_of_halving() {
        let sys = half();
        let s: BTreeSet<Point> = [vec![int(1)]].into();
        let got = future(&sys, &s, &Horizon::steps(3)).unwrap();
        let want: BTreeSet<Point> = [vec![int(1)], vec![rat(1, 2)], vec![rat(1, 4)], vec![rat(1, 8)]].into();
        assert_eq!(got, want);
        assert_eq!(future(&sys, &s, &Horizon::Unbounded), Err(Error::UnsupportedExactReach));
    }

    #[test]
    fn equilibria() {
        let id = FiniteSystem::new(FiniteMetric::uniform(3).unwrap(), TimelineKind::DiscreteLinear, vec![vec![0, 1, 2]])
            .unwrap();
        for s in [BTreeSet::from([0]), BTreeSet::from([1, 2])] {
            assert_eq!(is_equilibrium(&id, &s, &Horizon::Unbounded).unwrap(), Verdict::Proved);
        }
        let sys = half();
        let origin: BTreeSet<Point> = [vec![int(0)]].into();
        assert_eq!(is_equilibrium(&sys, &origin, &Horizon::steps(5)).unwrap(), Verdict::Sampled);
        let one: BTreeSet<Point> = [vec![int(1)]].into();
        let verdict = is_equilibrium(&sys, &one, &Horizon::steps(3)).unwrap();
        let w = verdict.witness().unwrap();
        assert_eq!(sys.evolve(&w.start, &w.time).unwrap(), w.state);
    }

    #[test]
    fn metric_validation() {
        assert!(FiniteMetric::new(vec![vec![int(0), int(1)], vec![int(2), int(0)]]).is_err());
        assert!(FiniteMetric::new(vec![vec![int(1)]]).is_err());
        let bad_triangle = vec![
            vec![int(0), int(1), int(5)],
            vec![int(1), int(0), int(1)],
            vec![int(5), int(1), int(0)],
        ];
        assert!(matches!(FiniteMetric::new(bad_triangle), Err(Error::InvalidMetric(_))));
        assert!(FiniteMetric::new(vec![vec![int(0), int(0)], vec![int(0), int(0)]]).is_err());
    }

    #[test]
    fn system_validation() {
        let m = FiniteMetric::uniform(2).unwrap();
        assert!(FiniteSystem::new(m.clone(), TimelineKind::DiscreteLinear, vec![vec![0, 2]]).is_err());
        assert!(FiniteSystem::new(m.clone(), TimelineKind::free_monoid(2).unwrap(), vec![vec![0, 1]]).is_err());
        assert!(FiniteSystem::new(m, TimelineKind::ContinuousLinear, vec![vec![0, 1]]).is_err());
        assert!(EuclideanSystem::new(
            2,
            TimelineKind::DiscreteLinear,
            EuclideanDynamics::Maps(vec![AffineMap { matrix: RatMatrix::identity(3), offset: None }])
        )
        .is_err());
    }

    #[test]
    fn balls_and_lattice() {
        let cloud = unit_ball_lattice(2, 2);
        assert!(cloud.iter().all(|p| p[0].clone() * &p[0] + &p[1] * &p[1] <= int(1)));
        assert!(cloud.contains(&vec![int(1), int(0)]));
        assert!(!cloud.contains(&vec![int(1), int(1)]));
        let sys = EuclideanSystem::linear(RatMatrix::identity(2)).unwrap();
        let sampling = Sampling { horizon: Horizon::steps(1), states: vec![], cloud };
        let ball = sys.ball(&vec![int(0), int(0)], &Value::Exact(rat(1, 2)), Some(&sampling)).unwrap();
        assert!(ball.contains(&vec![rat(1, 2), int(0)]));
        assert!(ball.iter().all(|p| sys.within(&vec![int(0), int(0)], p, &Value::Exact(rat(1, 2)))));
    }
}
