//! Text formats for systems and certificates.
//!
//! Both are TOML. Exact quantities are written as integers or `"p/q"`
//! strings and floats are rejected everywhere except in `[quadratic]`
//! sections. Errors carry the line and column of the offending value.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;

use lyapkit_core::quadratic::Matrix;
use lyapkit_core::scalar::{from_f64, parse_rational, Rational};
use lyapkit_core::system::{AffineMap, EuclideanDynamics, RatMatrix};
use lyapkit_core::{
    certificates::{DeltaCertificate, LyapunovCertificate},
    ComparisonFunction, EuclideanSystem, FiniteMetric, FiniteSystem, Horizon, LevelSetFamily, Observable,
    PiecewiseLinear, Point, PowerLaw, TimelineKind,
};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::Deserialize;
use toml::Spanned;

use crate::error::{CliError, CliResult};

/// An exact rational read from an integer or a `"p/q"` string.
#[derive(Clone, Debug, PartialEq)]
pub struct Q(pub Rational);

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Q;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an integer or a \"p/q\" string")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Q, E> {
                Ok(Q(Rational::from_integer(v.into())))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Q, E> {
                Ok(Q(Rational::from_integer(v.into())))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Q, E> {
                Err(E::custom(format!("float {v} outside a [quadratic] section; write it as \"p/q\"")))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Q, E> {
                parse_rational(v).map(Q).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// A float, allowed only in quadratic sections. Integers and `"p/q"`
/// strings are accepted too.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F(pub f64);

impl<'de> Deserialize<'de> for F {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = F;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<F, E> {
                Ok(F(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<F, E> {
                Ok(F(v as f64))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<F, E> {
                Ok(F(v))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<F, E> {
                parse_rational(v).map(|q| F(lyapkit_core::scalar::to_f64(&q))).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// A state written inline: a finite index, a vector, or the name of a
/// declared point.
#[derive(Clone, Debug, PartialEq)]
pub enum StateRef {
    Index(usize),
    Vector(Vec<Rational>),
    Name(String),
}

impl<'de> Deserialize<'de> for StateRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = StateRef;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a state index, a vector of rationals, or a point name")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<StateRef, E> {
                usize::try_from(v).map(StateRef::Index).map_err(|_| E::custom("state index must be nonnegative"))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<StateRef, E> {
                Ok(StateRef::Index(v as usize))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<StateRef, E> {
                Ok(StateRef::Name(v.to_string()))
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<StateRef, A::Error> {
                let mut out = Vec::new();
                while let Some(Q(q)) = seq.next_element()? {
                    out.push(q);
                }
                Ok(StateRef::Vector(out))
            }
        }
        d.deserialize_any(V)
    }
}

// ---------------------------------------------------------------------------
// Raw documents
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    space: Spanned<RawSpace>,
    timeline: Spanned<RawTimeline>,
    dynamics: Spanned<RawDynamics>,
    #[serde(default)]
    points: BTreeMap<String, Spanned<StateRef>>,
    #[serde(default)]
    observables: BTreeMap<String, Spanned<RawObservable>>,
    #[serde(default)]
    sampling: Option<RawSampling>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    kind: String,
    distances: Option<Vec<Vec<Q>>>,
    dimension: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTimeline {
    kind: String,
    alphabet: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDynamics {
    kind: String,
    maps: Option<Vec<Vec<usize>>>,
    matrix: Option<Vec<Vec<Q>>>,
    matrices: Option<Vec<Vec<Vec<Q>>>>,
    offset: Option<Vec<Q>>,
    velocity: Option<Vec<Q>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObservable {
    kind: String,
    point: Option<StateRef>,
    matrix: Option<Vec<Vec<Q>>>,
    index: Option<usize>,
    values: Option<Vec<Q>>,
}

/// Defaults for bounded checks on Euclidean systems.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawSampling {
    pub horizon: Option<u32>,
    pub dt: Option<Q>,
    #[serde(default)]
    pub states: Vec<Vec<Q>>,
    pub samples: Option<usize>,
    pub extent: Option<Q>,
    pub cloud: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertificate {
    kind: Spanned<String>,
    center: Spanned<StateRef>,
    grid: Spanned<Vec<Q>>,
    delta: Option<Spanned<RawFunction>>,
    lower: Option<Spanned<RawFunction>>,
    upper: Option<Spanned<RawFunction>>,
    levels: Option<Spanned<RawLevels>>,
    quadratic: Option<RawQuadratic>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFunction {
    kind: String,
    slope: Option<Q>,
    cap: Option<Q>,
    origin: Option<Q>,
    knots: Option<Vec<(Q, Q)>>,
    tail: Option<Q>,
    coefficient: Option<Q>,
    exponent: Option<Q>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevels {
    kind: String,
    sets: Option<Vec<Vec<usize>>>,
    observable: Option<String>,
    radius: Option<RawFunction>,
    horizon: Option<u32>,
    dt: Option<Q>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuadratic {
    p: Vec<Vec<F>>,
}

// ---------------------------------------------------------------------------
// Loaded documents
// ---------------------------------------------------------------------------

/// A system together with its named points and observables.
#[derive(Clone, Debug)]
pub struct Model<D, S> {
    pub system: D,
    pub points: BTreeMap<String, S>,
    pub observables: BTreeMap<String, Observable<S>>,
    pub sampling: RawSampling,
}

#[derive(Clone, Debug)]
pub enum SystemDoc {
    Finite(Model<FiniteSystem, usize>),
    Euclidean(Model<EuclideanSystem, Point>),
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Certificate<S> {
    Delta(DeltaCertificate<S>),
    Lyapunov(LyapunovCertificate<S>),
    /// `V(x) = x^T P x` about `center`, checked on `grid`.
    Quadratic { center: S, p: Matrix, grid: Vec<Rational> },
}

/// Source text with a path, for locating spans.
pub struct Source<'a> {
    pub path: &'a str,
    pub text: &'a str,
}

impl Source<'_> {
    pub fn error(&self, span: Range<usize>, message: impl Into<String>) -> CliError {
        let (line, column) = line_column(self.text, span.start);
        CliError::Parse { path: self.path.to_string(), line, column, message: message.into() }
    }

    fn toml_error(&self, e: toml::de::Error) -> CliError {
        let (line, column) = e.span().map(|s| line_column(self.text, s.start)).unwrap_or((1, 1));
        CliError::Parse { path: self.path.to_string(), line, column, message: e.message().to_string() }
    }

    fn core<T>(&self, span: Range<usize>, r: lyapkit_core::Result<T>) -> CliResult<T> {
        r.map_err(|e| self.error(span, e.to_string()))
    }
}

/// One-based line and column of a byte offset.
pub fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn rationals(v: &[Q]) -> Vec<Rational> {
    v.iter().map(|q| q.0.clone()).collect()
}

fn rat_matrix(rows: &[Vec<Q>]) -> lyapkit_core::Result<RatMatrix> {
    RatMatrix::new(rows.iter().map(|r| rationals(r)).collect())
}

fn missing(what: &str, kind: &str) -> String {
    format!("`{what}` is required for kind \"{kind}\"")
}

pub fn parse_system(src: &Source) -> CliResult<SystemDoc> {
    let raw: RawSystem = toml::from_str(src.text).map_err(|e| src.toml_error(e))?;
    let timeline_span = raw.timeline.span();
    let timeline = raw.timeline.into_inner();
    let kind = match timeline.kind.as_str() {
        "discrete" => TimelineKind::DiscreteLinear,
        "continuous" => TimelineKind::ContinuousLinear,
        "words" => {
            let alphabet = timeline.alphabet.ok_or_else(|| src.error(timeline_span.clone(), missing("alphabet", "words")))?;
            src.core(timeline_span.clone(), TimelineKind::free_monoid(alphabet))?
        }
        other => return Err(src.error(timeline_span, format!("unknown timeline kind \"{other}\""))),
    };
    let space_span = raw.space.span();
    let space = raw.space.into_inner();
    let dyn_span = raw.dynamics.span();
    let dynamics = raw.dynamics.into_inner();
    let sampling = raw.sampling.unwrap_or_default();
    match space.kind.as_str() {
        "finite" => {
            let rows = space.distances.ok_or_else(|| src.error(space_span.clone(), missing("distances", "finite")))?;
            let metric = src.core(space_span, FiniteMetric::new(rows.iter().map(|r| rationals(r)).collect()))?;
            if dynamics.kind != "maps" {
                return Err(src.error(dyn_span, "finite spaces take dynamics of kind \"maps\""));
            }
            let maps = dynamics.maps.ok_or_else(|| src.error(dyn_span.clone(), missing("maps", "maps")))?;
            let system = src.core(dyn_span, FiniteSystem::new(metric, kind, maps))?;
            let mut points = BTreeMap::new();
            for (name, p) in raw.points {
                let span = p.span();
                match p.into_inner() {
                    StateRef::Index(i) if i < system.size() => {
                        points.insert(name, i);
                    }
                    _ => return Err(src.error(span, format!("point `{name}` must be a state index below {}", system.size()))),
                }
            }
            let mut observables = BTreeMap::new();
            for (name, o) in raw.observables {
                let span = o.span();
                let o = o.into_inner();
                let obs = match o.kind.as_str() {
                    "distance" => {
                        let p = o.point.ok_or_else(|| src.error(span.clone(), missing("point", "distance")))?;
                        Observable::DistanceTo(resolve_index(src, span.clone(), &points, &p, system.size())?)
                    }
                    "table" => {
                        let values = o.values.ok_or_else(|| src.error(span.clone(), missing("values", "table")))?;
                        if values.len() != system.size() {
                            return Err(src.error(span, format!("table needs {} values", system.size())));
                        }
                        Observable::Table(values.into_iter().map(|q| lyapkit_core::Value::Exact(q.0)).collect())
                    }
                    other => return Err(src.error(span, format!("observable kind \"{other}\" needs a euclidean space"))),
                };
                observables.insert(name, obs);
            }
            Ok(SystemDoc::Finite(Model { system, points, observables, sampling }))
        }
        "euclidean" => {
            let dim = space.dimension.ok_or_else(|| src.error(space_span.clone(), missing("dimension", "euclidean")))?;
            fn need<'v, T>(src: &Source, span: &Range<usize>, kind: &str, v: Option<&'v T>, what: &str) -> CliResult<&'v T> {
                v.ok_or_else(|| src.error(span.clone(), missing(what, kind)))
            }
            let dynamics_core = match dynamics.kind.as_str() {
                "linear" | "affine" | "affine-control" => {
                    let matrix = src.core(dyn_span.clone(), rat_matrix(need(src, &dyn_span, &dynamics.kind, dynamics.matrix.as_ref(), "matrix")?))?;
                    let offset = match dynamics.kind.as_str() {
                        "linear" => None,
                        _ => Some(rationals(need(src, &dyn_span, &dynamics.kind, dynamics.offset.as_ref(), "offset")?)),
                    };
                    if dynamics.kind == "affine-control" {
                        let offset = offset.expect("set above");
                        EuclideanDynamics::Maps(vec![
                            AffineMap { matrix: matrix.clone(), offset: None },
                            AffineMap { matrix, offset: Some(offset) },
                        ])
                    } else {
                        EuclideanDynamics::Maps(vec![AffineMap { matrix, offset }])
                    }
                }
                "switching" => {
                    let ms = need(src, &dyn_span, &dynamics.kind, dynamics.matrices.as_ref(), "matrices")?;
                    let maps = ms
                        .iter()
                        .map(|m| rat_matrix(m).map(|matrix| AffineMap { matrix, offset: None }))
                        .collect::<lyapkit_core::Result<Vec<_>>>();
                    EuclideanDynamics::Maps(src.core(dyn_span.clone(), maps)?)
                }
                "uniform-motion" => {
                    EuclideanDynamics::UniformMotion { velocity: rationals(need(src, &dyn_span, &dynamics.kind, dynamics.velocity.as_ref(), "velocity")?) }
                }
                other => return Err(src.error(dyn_span, format!("unknown dynamics kind \"{other}\""))),
            };
            let system = src.core(dyn_span, EuclideanSystem::new(dim, kind, dynamics_core))?;
            let mut points = BTreeMap::new();
            for (name, p) in raw.points {
                let span = p.span();
                match p.into_inner() {
                    StateRef::Vector(v) if v.len() == dim => {
                        points.insert(name, v);
                    }
                    _ => return Err(src.error(span, format!("point `{name}` must be a vector of {dim} rationals"))),
                }
            }
            let mut observables = BTreeMap::new();
            for (name, o) in raw.observables {
                let span = o.span();
                let o = o.into_inner();
                let obs = match o.kind.as_str() {
                    "distance" => {
                        let p = o.point.ok_or_else(|| src.error(span.clone(), missing("point", "distance")))?;
                        Observable::DistanceTo(resolve_vector(src, span.clone(), &points, &p, dim)?)
                    }
                    "quadratic" => {
                        let m = o.matrix.ok_or_else(|| src.error(span.clone(), missing("matrix", "quadratic")))?;
                        let m = src.core(span.clone(), rat_matrix(&m))?;
                        if m.dim() != dim {
                            return Err(src.error(span, format!("matrix must be {dim}x{dim}")));
                        }
                        Observable::Quadratic(m)
                    }
                    "coordinate" => {
                        let i = o.index.ok_or_else(|| src.error(span.clone(), missing("index", "coordinate")))?;
                        if i >= dim {
                            return Err(src.error(span, format!("coordinate index must be below {dim}")));
                        }
                        Observable::Coordinate(i)
                    }
                    other => return Err(src.error(span, format!("unknown observable kind \"{other}\""))),
                };
                observables.insert(name, obs);
            }
            if let Some(bad) = sampling.states.iter().find(|s| s.len() != dim) {
                return Err(src.error(space_span, format!("sample state of length {} in a {dim}-dimensional space", bad.len())));
            }
            Ok(SystemDoc::Euclidean(Model { system, points, observables, sampling }))
        }
        other => Err(src.error(space_span, format!("unknown space kind \"{other}\""))),
    }
}

fn resolve_index(
    src: &Source,
    span: Range<usize>,
    points: &BTreeMap<String, usize>,
    r: &StateRef,
    size: usize,
) -> CliResult<usize> {
    match r {
        StateRef::Index(i) if *i < size => Ok(*i),
        StateRef::Name(n) => points.get(n).copied().ok_or_else(|| src.error(span, format!("unknown point `{n}`"))),
        _ => Err(src.error(span, format!("expected a state index below {size}"))),
    }
}

fn resolve_vector(
    src: &Source,
    span: Range<usize>,
    points: &BTreeMap<String, Point>,
    r: &StateRef,
    dim: usize,
) -> CliResult<Point> {
    match r {
        StateRef::Vector(v) if v.len() == dim => Ok(v.clone()),
        StateRef::Name(n) => points.get(n).cloned().ok_or_else(|| src.error(span, format!("unknown point `{n}`"))),
        _ => Err(src.error(span, format!("expected a vector of {dim} rationals"))),
    }
}

/// How states of a space are named in files, reports and CSV.
pub trait StateSyntax: Sized + Clone + Ord + fmt::Debug {
    fn resolve(points: &BTreeMap<String, Self>, src: &Source, span: Range<usize>, r: &StateRef) -> CliResult<Self>;
    /// The state with this index, on finite spaces.
    fn from_index(i: usize) -> Option<Self>;
    fn to_toml(&self) -> toml::Value;
    fn to_json(&self) -> serde_json::Value;
    fn columns(&self) -> Vec<String>;
}

impl StateSyntax for usize {
    fn resolve(points: &BTreeMap<String, usize>, src: &Source, span: Range<usize>, r: &StateRef) -> CliResult<usize> {
        resolve_index(src, span, points, r, usize::MAX)
    }
    fn from_index(i: usize) -> Option<usize> {
        Some(i)
    }
    fn to_toml(&self) -> toml::Value {
        toml::Value::Integer(*self as i64)
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::from(*self)
    }
    fn columns(&self) -> Vec<String> {
        vec![self.to_string()]
    }
}

impl StateSyntax for Point {
    fn resolve(points: &BTreeMap<String, Point>, src: &Source, span: Range<usize>, r: &StateRef) -> CliResult<Point> {
        match r {
            StateRef::Vector(v) => Ok(v.clone()),
            StateRef::Name(n) => points.get(n).cloned().ok_or_else(|| src.error(span, format!("unknown point `{n}`"))),
            StateRef::Index(_) => Err(src.error(span, "expected a vector of rationals or a point name")),
        }
    }
    fn from_index(_: usize) -> Option<Point> {
        None
    }
    fn to_toml(&self) -> toml::Value {
        toml::Value::Array(self.iter().map(rational_toml).collect())
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.iter().map(|q| serde_json::Value::String(q.to_string())).collect())
    }
    fn columns(&self) -> Vec<String> {
        self.iter().map(|q| q.to_string()).collect()
    }
}

pub fn rational_toml(q: &Rational) -> toml::Value {
    if q.is_integer() {
        if let Ok(i) = i64::try_from(q.to_integer()) {
            return toml::Value::Integer(i);
        }
    }
    toml::Value::String(q.to_string())
}

fn parse_function(src: &Source, span: Range<usize>, f: &RawFunction) -> CliResult<ComparisonFunction> {
    let need = |v: &Option<Q>, what: &str| v.clone().map(|q| q.0).ok_or_else(|| src.error(span.clone(), missing(what, &f.kind)));
    let pl = match f.kind.as_str() {
        "identity" => PiecewiseLinear::identity(),
        "linear" => src.core(span.clone(), PiecewiseLinear::linear(need(&f.slope, "slope")?))?,
        "capped" => src.core(span.clone(), PiecewiseLinear::capped(need(&f.slope, "slope")?, need(&f.cap, "cap")?))?,
        "piecewise-linear" => {
            let knots = f.knots.clone().unwrap_or_default().into_iter().map(|(x, y)| (x.0, y.0)).collect();
            let origin = f.origin.clone().map_or_else(|| Rational::from_integer(0.into()), |q| q.0);
            src.core(span.clone(), PiecewiseLinear::new(origin, knots, need(&f.tail, "tail")?))?
        }
        "power" => {
            let c = lyapkit_core::scalar::to_f64(&need(&f.coefficient, "coefficient")?);
            let p = lyapkit_core::scalar::to_f64(&need(&f.exponent, "exponent")?);
            return Ok(ComparisonFunction::Power(src.core(span, PowerLaw::new(c, p))?));
        }
        other => return Err(src.error(span, format!("unknown function kind \"{other}\""))),
    };
    Ok(ComparisonFunction::Exact(pl))
}

pub fn parse_certificate<D, S: StateSyntax>(src: &Source, model: &Model<D, S>) -> CliResult<Certificate<S>>
where
    D: lyapkit_core::Dynamics<State = S>,
{
    let raw: RawCertificate = toml::from_str(src.text).map_err(|e| src.toml_error(e))?;
    let center = S::resolve(&model.points, src, raw.center.span(), raw.center.get_ref())?;
    if !model.system.contains(&center) {
        return Err(src.error(raw.center.span(), format!("center {center:?} is not a state of the system")));
    }
    let grid_span = raw.grid.span();
    let grid = rationals(raw.grid.get_ref());
    src.core(grid_span.clone(), lyapkit_core::monovariant::validate_grid(&grid))?;
    let kind_span = raw.kind.span();
    let function = |f: &Option<Spanned<RawFunction>>, what: &str| -> CliResult<ComparisonFunction> {
        let f = f.as_ref().ok_or_else(|| src.error(kind_span.clone(), format!("missing [{what}] section")))?;
        parse_function(src, f.span(), f.get_ref())
    };
    match raw.kind.get_ref().as_str() {
        "delta" => {
            let delta = function(&raw.delta, "delta")?;
            Ok(Certificate::Delta(src.core(grid_span, DeltaCertificate::new(center, delta, grid))?))
        }
        "lyapunov" => {
            let lower = function(&raw.lower, "lower")?;
            let upper = function(&raw.upper, "upper")?;
            let levels = raw.levels.as_ref().ok_or_else(|| src.error(kind_span.clone(), "missing [levels] section"))?;
            let span = levels.span();
            let l = levels.get_ref();
            let fam = match l.kind.as_str() {
                "sets" => {
                    let sets = l.sets.clone().ok_or_else(|| src.error(span.clone(), missing("sets", "sets")))?;
                    let sets = sets_of::<S>(src, span.clone(), sets)?;
                    src.core(span, LevelSetFamily::sets(grid, sets))?
                }
                "sublevel" => {
                    let name = l.observable.as_ref().ok_or_else(|| src.error(span.clone(), missing("observable", "sublevel")))?;
                    let observable =
                        model.observables.get(name).cloned().ok_or_else(|| src.error(span, format!("unknown observable `{name}`")))?;
                    LevelSetFamily::Sublevel { grid, observable }
                }
                "balls" => {
                    let radius = match &l.radius {
                        Some(f) => parse_function(src, span.clone(), f)?,
                        None => ComparisonFunction::identity(),
                    };
                    src.core(span, LevelSetFamily::balls(grid, center.clone(), radius))?
                }
                "reachable" => {
                    let f = l.radius.as_ref().ok_or_else(|| src.error(span.clone(), missing("radius", "reachable")))?;
                    let radius = parse_function(src, span.clone(), f)?;
                    let count = l.horizon.ok_or_else(|| src.error(span.clone(), missing("horizon", "reachable")))?;
                    let dt = l.dt.clone().map_or_else(|| Rational::from_integer(1.into()), |q| q.0);
                    LevelSetFamily::Reachable { grid, center: center.clone(), radius, horizon: Horizon::Steps { count, dt } }
                }
                other => return Err(src.error(span, format!("unknown level-set kind \"{other}\""))),
            };
            Ok(Certificate::Lyapunov(src.core(kind_span, LyapunovCertificate::new(center, fam, lower, upper))?))
        }
        "quadratic" => {
            let q = raw.quadratic.as_ref().ok_or_else(|| src.error(kind_span.clone(), "missing [quadratic] section"))?;
            let rows: Vec<Vec<f64>> = q.p.iter().map(|r| r.iter().map(|x| x.0).collect()).collect();
            let p = src.core(kind_span, Matrix::new(rows))?;
            Ok(Certificate::Quadratic { center, p, grid })
        }
        other => Err(src.error(kind_span, format!("unknown certificate kind \"{other}\""))),
    }
}

fn sets_of<S: StateSyntax>(
    src: &Source,
    span: Range<usize>,
    sets: Vec<Vec<usize>>,
) -> CliResult<Vec<std::collections::BTreeSet<S>>> {
    sets.into_iter()
        .map(|s| {
            s.into_iter()
                .map(|i| S::from_index(i).ok_or_else(|| src.error(span.clone(), "explicit level sets need a finite space")))
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

fn rational_array(qs: &[Rational]) -> toml::Value {
    toml::Value::Array(qs.iter().map(rational_toml).collect())
}

/// A comparison function as a TOML table. Power-law parameters are written
/// as the exact rationals of their floats, so the file re-loads bit for bit.
pub fn function_table(f: &ComparisonFunction) -> toml::Table {
    let mut t = toml::Table::new();
    match f {
        ComparisonFunction::Exact(pl) => {
            t.insert("kind".into(), "piecewise-linear".into());
            t.insert("origin".into(), rational_toml(pl.origin()));
            let knots = pl.knots().iter().map(|(x, y)| toml::Value::Array(vec![rational_toml(x), rational_toml(y)]));
            t.insert("knots".into(), toml::Value::Array(knots.collect()));
            t.insert("tail".into(), rational_toml(pl.tail_slope()));
        }
        ComparisonFunction::Power(p) => {
            let exact = |x: f64| from_f64(x).map_or(toml::Value::String(format!("{x}")), |q| rational_toml(&q));
            t.insert("kind".into(), "power".into());
            t.insert("coefficient".into(), exact(p.coefficient));
            t.insert("exponent".into(), exact(p.exponent));
        }
    }
    t
}

fn levels_table<S: StateSyntax>(fam: &LevelSetFamily<S>) -> CliResult<toml::Table> {
    let mut t = toml::Table::new();
    match fam {
        LevelSetFamily::Sets { sets, .. } => {
            t.insert("kind".into(), "sets".into());
            let sets = sets.iter().map(|s| toml::Value::Array(s.iter().map(StateSyntax::to_toml).collect()));
            t.insert("sets".into(), toml::Value::Array(sets.collect()));
        }
        LevelSetFamily::Balls { radius, .. } => {
            t.insert("kind".into(), "balls".into());
            t.insert("radius".into(), toml::Value::Table(function_table(radius)));
        }
        LevelSetFamily::Reachable { radius, horizon, .. } => {
            t.insert("kind".into(), "reachable".into());
            t.insert("radius".into(), toml::Value::Table(function_table(radius)));
            match horizon {
                Horizon::Steps { count, dt } => {
                    t.insert("horizon".into(), toml::Value::Integer(i64::from(*count)));
                    t.insert("dt".into(), rational_toml(dt));
                }
                Horizon::Unbounded => return Err(CliError::Usage("reachable families need a finite horizon".into())),
            }
        }
        LevelSetFamily::Sublevel { .. } => {
            return Err(CliError::Usage("sublevel families are written by naming an observable".into()))
        }
    }
    Ok(t)
}

pub fn write_delta<S: StateSyntax>(cert: &DeltaCertificate<S>) -> String {
    let mut t = toml::Table::new();
    t.insert("kind".into(), "delta".into());
    t.insert("center".into(), cert.center.to_toml());
    t.insert("grid".into(), rational_array(&cert.grid));
    t.insert("delta".into(), toml::Value::Table(function_table(&cert.delta)));
    toml::to_string(&t).expect("tables serialize")
}

pub fn write_lyapunov<S: StateSyntax>(cert: &LyapunovCertificate<S>) -> CliResult<String> {
    let mut t = toml::Table::new();
    t.insert("kind".into(), "lyapunov".into());
    t.insert("center".into(), cert.center.to_toml());
    t.insert("grid".into(), rational_array(cert.grid()));
    t.insert("lower".into(), toml::Value::Table(function_table(&cert.lower)));
    t.insert("upper".into(), toml::Value::Table(function_table(&cert.upper)));
    t.insert("levels".into(), toml::Value::Table(levels_table(&cert.levels)?));
    Ok(toml::to_string(&t).expect("tables serialize"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use lyapkit_core::scalar::rat;
    use lyapkit_core::Value;

    const LINE: &str = "[space]\nkind = \"finite\"\ndistances = [[0, 1], [1, 0]]\n\n[timeline]\nkind = \"discrete\"\n\n[dynamics]\nkind = \"maps\"\nmaps = [[0, 0]]\n\n[points]\nsink = 0\n";

    fn finite(text: &str) -> Model<FiniteSystem, usize> {
        match parse_system(&Source { path: "t.toml", text }).unwrap() {
            SystemDoc::Finite(m) => m,
            SystemDoc::Euclidean(_) => panic!("expected a finite system"),
        }
    }

    #[test]
    fn line_column_counts_from_one() {
        assert_eq!(line_column("ab\ncd", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }

    #[test]
    fn rationals_accept_integers_and_fractions() {
        let q: Vec<Q> = toml::from_str::<toml::Table>("v = [3, \"-2/4\"]").unwrap()["v"].clone().try_into().unwrap();
        assert_eq!(q, vec![Q(rat(3, 1)), Q(rat(-1, 2))]);
        let e = toml::from_str::<toml::Table>("v = [0.5]").unwrap()["v"].clone().try_into::<Vec<Q>>();
        assert!(e.is_err());
    }

    #[test]
    fn delta_certificates_round_trip() {
        let model = finite(LINE);
        let text = "kind = \"delta\"\ncenter = \"sink\"\ngrid = [\"1/2\", 1]\n\n[delta]\nkind = \"capped\"\nslope = \"1/3\"\ncap = 2\n";
        let Certificate::Delta(cert) = parse_certificate(&Source { path: "c.toml", text }, &model).unwrap() else {
            panic!("expected a delta certificate")
        };
        let written = write_delta(&cert);
        let Certificate::Delta(again) = parse_certificate(&Source { path: "c.toml", text: &written }, &model).unwrap()
        else {
            panic!("expected a delta certificate")
        };
        assert_eq!(again.center, cert.center);
        assert_eq!(again.grid, cert.grid);
        for x in [rat(0, 1), rat(1, 7), rat(3, 1), rat(100, 1)] {
            let v = Value::Exact(x);
            assert_eq!(again.delta.eval(&v), cert.delta.eval(&v));
        }
    }

    #[test]
    fn power_laws_round_trip_exactly() {
        let f = ComparisonFunction::Power(PowerLaw::new(0.1, 0.5).unwrap());
        let t = toml::to_string(&function_table(&f)).unwrap();
        let raw: RawFunction = toml::from_str(&t).unwrap();
        let back = parse_function(&Source { path: "f", text: &t }, 0..0, &raw).unwrap();
        let ComparisonFunction::Power(p) = back else { panic!("expected a power law") };
        assert_eq!(p.coefficient.to_bits(), 0.1f64.to_bits());
        assert_eq!(p.exponent, 0.5);
    }

    #[test]
    fn errors_carry_positions() {
        let text = LINE.replace("maps = [[0, 0]]", "maps = [[0, 5]]");
        let Err(CliError::Parse { line, .. }) = parse_system(&Source { path: "t.toml", text: &text }) else {
            panic!("expected a parse error")
        };
        assert_eq!(line, 8);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = format!("{LINE}\n[extra]\nx = 1\n");
        assert!(matches!(parse_system(&Source { path: "t.toml", text: &text }), Err(CliError::Parse { .. })));
    }
}
