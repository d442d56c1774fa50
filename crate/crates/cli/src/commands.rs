//! Command implementations. Each returns the exit status: 0 for a passing
//! verdict, 1 for a failing one. Errors map to status 2 in `main`.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use lyapkit_core::certificates::{
    check_global_delta, converse_construct, delta_from_lyapunov, predicted_delta_tags, verify_delta, verify_lyapunov,
    DeltaCertificate, LyapunovCertificate,
};
use lyapkit_core::monovariant::{check_attractor, check_monovariant, observe, validate_grid};
use lyapkit_core::oracle::{brute_check_theorems, brute_reach, mask_of, random_instance, states_of};
use lyapkit_core::quadratic::QuadraticCertificate;
use lyapkit_core::scalar::{parse_rational, Rational};
use lyapkit_core::system::{explore, is_equilibrium, unit_ball_lattice, Sampling};
use lyapkit_core::timeline::TimePoint;
use lyapkit_core::{
    ComparisonFunction, Direction, Dynamics, Error, Horizon, LevelSetFamily, Observable, Point, Scope, TimelineKind,
    Value, Verdict,
};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map};

use crate::args::{CheckKind, Cli, Command, DirectionArg, ExportKind, OracleOptions, Options};
use crate::error::{CliError, CliResult};
use crate::format::{self, Certificate, Model, Source, StateRef, StateSyntax, SystemDoc};
use crate::report::{self, InputDigest, Report, Timings};

/// Runs a parsed command line and returns the exit status.
pub fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Check { kind, opts } => emit(check(kind, &opts)?, opts.out.as_deref()),
        Command::Converse { opts } => emit(converse(&opts)?, None),
        Command::Export { what, opts } => {
            export(what, &opts)?;
            Ok(0)
        }
        Command::Oracle(opts) => emit(oracle(&opts)?, opts.out.as_deref()),
    }
}

fn emit(report: Report, out: Option<&Path>) -> CliResult<i32> {
    let text = report.to_json();
    println!("{text}");
    if let Some(path) = out {
        fs::write(path, text + "\n").map_err(|e| io_error(path, e))?;
    }
    Ok(if report.passed() { 0 } else { 1 })
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}

fn rational_arg(flag: &str, text: &str) -> CliResult<Rational> {
    parse_rational(text).map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

/// Parses `--grid`: comma-separated rationals, validated.
pub fn parse_grid(text: &str) -> CliResult<Vec<Rational>> {
    let grid = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| rational_arg("grid", s))
        .collect::<CliResult<Vec<_>>>()?;
    validate_grid(&grid)?;
    Ok(grid)
}

/// Files and options the result depends on.
struct Inputs {
    system: String,
    certificate: Option<(String, String)>,
    digest: String,
}

fn load_inputs(command: &str, opts: &Options) -> CliResult<Inputs> {
    let system = format::read(&opts.system)?;
    let certificate = match &opts.certificate {
        Some(p) => Some((p.display().to_string(), format::read(p)?)),
        None => None,
    };
    let mut d = InputDigest::default();
    d.add("command", command.as_bytes());
    d.add("system", system.as_bytes());
    if let Some((_, text)) = &certificate {
        d.add("certificate", text.as_bytes());
    }
    let o = opts;
    let flags = format!(
        "{:?}|{:?}|{}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{}|{:?}|{:?}",
        o.horizon, o.grid, o.seed, o.samples, o.extent, o.observable, o.center, o.direction, o.start, o.steps, o.word, o.dt
    );
    d.add("options", flags.as_bytes());
    Ok(Inputs { system, certificate, digest: d.hex() })
}

fn parse_system(opts: &Options, inputs: &Inputs) -> CliResult<SystemDoc> {
    let path = opts.system.display().to_string();
    format::parse_system(&Source { path: &path, text: &inputs.system })
}

fn require<'a>(value: &'a Option<String>, flag: &str) -> CliResult<&'a str> {
    value.as_deref().ok_or_else(|| CliError::Usage(format!("--{flag} is required here")))
}

/// A state from the command line: a declared point name, an index on finite
/// spaces, or comma-separated coordinates.
fn state_arg<D: Dynamics<State = S>, S: StateSyntax>(model: &Model<D, S>, flag: &str, text: &str) -> CliResult<S> {
    let text = text.trim();
    let r = if model.points.contains_key(text) {
        StateRef::Name(text.to_string())
    } else if S::from_index(0).is_some() {
        StateRef::Index(text.parse().map_err(|_| CliError::Usage(format!("--{flag}: `{text}` is not a state")))?)
    } else {
        StateRef::Vector(text.split(',').map(|s| rational_arg(flag, s.trim())).collect::<CliResult<_>>()?)
    };
    let label = format!("--{flag}");
    let state = S::resolve(&model.points, &Source { path: &label, text }, 0..0, &r)?;
    if !model.system.contains(&state) {
        return Err(Error::StateOutOfRange(format!("{state:?}")).into());
    }
    Ok(state)
}

fn observable<'a, D, S>(model: &'a Model<D, S>, opts: &Options) -> CliResult<(&'a str, &'a Observable<S>)> {
    let name = require(&opts.observable, "observable")?;
    model
        .observables
        .get_key_value(name)
        .map(|(k, v)| (k.as_str(), v))
        .ok_or_else(|| CliError::Usage(format!("unknown observable `{name}`")))
}

// ---------------------------------------------------------------------------
// Scopes
// ---------------------------------------------------------------------------

fn finite_scope(opts: &Options) -> Scope<usize> {
    match opts.horizon {
        None => Scope::Exact,
        Some(h) => Scope::Sampled(Sampling { horizon: Horizon::steps(h), states: Vec::new(), cloud: Vec::new() }),
    }
}

const SAMPLE_DENOM: i64 = 64;

fn random_coordinate<R: Rng>(rng: &mut R, scale: &Rational) -> Rational {
    Rational::new(rng.random_range(-SAMPLE_DENOM..=SAMPLE_DENOM).into(), SAMPLE_DENOM.into()) * scale
}

/// Bounded scope for a Euclidean system: the file's sample states and named
/// points plus seeded random states in `[-extent, extent]^n`, and a cloud of
/// lattice and random points of the unit ball.
fn euclidean_scope<D: Dynamics<State = Point>>(model: &Model<D, Point>, dim: usize, opts: &Options) -> CliResult<Scope<Point>> {
    let s = &model.sampling;
    let count = opts.horizon.or(s.horizon).ok_or(Error::UnsupportedExactReach)?;
    let dt = match &opts.dt {
        Some(t) => rational_arg("dt", t)?,
        None => s.dt.clone().map_or_else(Rational::one, |q| q.0),
    };
    if !dt.is_positive() {
        return Err(CliError::Usage("--dt must be positive".into()));
    }
    let extent = match &opts.extent {
        Some(t) => rational_arg("extent", t)?,
        None => s.extent.clone().map_or_else(|| Rational::from_integer(2.into()), |q| q.0),
    };
    let samples = opts.samples.or(s.samples).unwrap_or(32);
    let per_axis = s.cloud.unwrap_or(match dim {
        0..=2 => 8,
        3 => 2,
        _ => 1,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut states: Vec<Point> = s.states.iter().map(|v| v.iter().map(|q| q.0.clone()).collect()).collect();
    states.extend(model.points.values().cloned());
    states.extend((0..samples).map(|_| (0..dim).map(|_| random_coordinate(&mut rng, &extent)).collect::<Point>()));
    let mut cloud = unit_ball_lattice(dim, per_axis);
    let one = Rational::one();
    while cloud.len() < unit_ball_lattice(dim, per_axis).len() + samples {
        let p: Point = (0..dim).map(|_| random_coordinate(&mut rng, &one)).collect();
        if p.iter().map(|x| x * x).fold(Rational::zero(), |a, b| a + b) <= one {
            cloud.push(p);
        }
    }
    Ok(Scope::Sampled(Sampling { horizon: Horizon::Steps { count, dt }, states, cloud }))
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct Outcome {
    verdict: String,
    witnesses: Vec<serde_json::Value>,
    details: Map<String, serde_json::Value>,
}

fn outcome<W>(v: Verdict<W>, witness: impl FnOnce(W) -> serde_json::Value) -> Outcome {
    let (verdict, witnesses) = report::verdict_parts(v, witness);
    Outcome { verdict, witnesses, details: Map::new() }
}

fn grid_json(grid: &[Rational]) -> serde_json::Value {
    grid.iter().map(|q| q.to_string()).collect()
}

fn load_certificate<D: Dynamics<State = S>, S: StateSyntax>(
    model: &Model<D, S>,
    inputs: &Inputs,
) -> CliResult<Certificate<S>> {
    let (path, text) =
        inputs.certificate.as_ref().ok_or_else(|| CliError::Usage("--certificate is required here".into()))?;
    format::parse_certificate(&Source { path, text }, model)
}

fn regrid<S: Clone>(cert: Certificate<S>, grid: Option<&String>) -> CliResult<Certificate<S>> {
    let Some(text) = grid else { return Ok(cert) };
    let grid = parse_grid(text)?;
    Ok(match cert {
        Certificate::Delta(c) => Certificate::Delta(DeltaCertificate::new(c.center, c.delta, grid)?),
        Certificate::Quadratic { center, p, .. } => Certificate::Quadratic { center, p, grid },
        Certificate::Lyapunov(mut c) => {
            match &mut c.levels {
                LevelSetFamily::Sets { .. } => {
                    return Err(CliError::Usage("--grid cannot re-index explicit level sets".into()))
                }
                LevelSetFamily::Sublevel { grid: g, .. }
                | LevelSetFamily::Balls { grid: g, .. }
                | LevelSetFamily::Reachable { grid: g, .. } => *g = grid,
            }
            Certificate::Lyapunov(c)
        }
    })
}

/// `x^T P x` about the origin as a Lyapunov certificate, unverified.
fn quadratic_lyapunov(center: Point, p: &lyapkit_core::quadratic::Matrix, grid: Vec<Rational>) -> CliResult<LyapunovCertificate<Point>> {
    if center.iter().any(|c| !c.is_zero()) {
        return Err(CliError::Usage("quadratic certificates are centered at the origin".into()));
    }
    if p.dim() != center.len() {
        return Err(Error::DimensionMismatch { expected: center.len(), found: p.dim() }.into());
    }
    let q = QuadraticCertificate::new(p.clone())?;
    let levels = LevelSetFamily::Sublevel { grid, observable: Observable::Quadratic(p.to_rational()?) };
    Ok(LyapunovCertificate::new(
        center,
        levels,
        ComparisonFunction::Power(q.lower()),
        ComparisonFunction::Power(q.upper()),
    )?)
}

fn verify_delta_parallel<D, S>(
    sys: &D,
    cert: &DeltaCertificate<S>,
    scope: &Scope<S>,
    jobs: usize,
) -> CliResult<Verdict<lyapkit_core::certificates::EscapeWitness<S>>>
where
    D: Dynamics<State = S> + Sync,
    S: StateSyntax + Send + Sync,
{
    let parts: Vec<lyapkit_core::Result<_>> = pool(jobs)?.install(|| {
        cert.grid
            .par_iter()
            .map(|eps| {
                let one = DeltaCertificate { center: cert.center.clone(), delta: cert.delta.clone(), grid: vec![eps.clone()] };
                verify_delta(sys, &one, scope)
            })
            .collect()
    });
    let mut verdict = Verdict::Proved;
    for part in parts {
        verdict = verdict.and(part?);
    }
    Ok(verdict)
}

fn check_generic<D, S>(
    kind: CheckKind,
    model: &Model<D, S>,
    scope: &Scope<S>,
    cert: Option<Certificate<S>>,
    opts: &Options,
) -> CliResult<Outcome>
where
    D: Dynamics<State = S> + Sync,
    S: StateSyntax + Send + Sync,
{
    let sys = &model.system;
    match kind {
        CheckKind::Monovariant => {
            let (name, obs) = observable(model, opts)?;
            let direction = match opts.direction {
                DirectionArg::NonIncreasing => Direction::NonIncreasing,
                DirectionArg::NonDecreasing => Direction::NonDecreasing,
            };
            let mut o = outcome(check_monovariant(sys, obs, direction, scope)?, |w| report::monovariant(&w));
            o.details.insert("observable".into(), name.into());
            o.details.insert("direction".into(), direction.name().into());
            Ok(o)
        }
        CheckKind::Attractor => {
            let center = state_arg(model, "center", require(&opts.center, "center")?)?;
            let r = check_attractor(sys, &center, scope)?;
            let distance = r.distance.map_witness(|w| report::monovariant(&w));
            let verdict = match r.equilibrium {
                Some(eq) => distance.and(eq.map_witness(|t| report::equilibrium(&t))),
                None => distance,
            };
            let mut o = outcome(verdict, |w| w);
            o.details.insert("center".into(), center.to_json());
            Ok(o)
        }
        CheckKind::Equilibrium => {
            let center = state_arg(model, "center", require(&opts.center, "center")?)?;
            let v = is_equilibrium(sys, &BTreeSet::from([center.clone()]), &scope.horizon())?;
            let v = if scope.is_exact() || v.witness().is_some() { v } else { Verdict::Sampled };
            let mut o = outcome(v, |t| report::equilibrium(&t));
            o.details.insert("center".into(), center.to_json());
            Ok(o)
        }
        CheckKind::Delta => {
            let Some(Certificate::Delta(cert)) = cert else {
                return Err(CliError::Usage("check delta needs a delta certificate".into()));
            };
            let v = verify_delta_parallel(sys, &cert, scope, opts.jobs)?;
            let mut o = outcome(v, |w| report::escape(&w));
            o.details.insert("delta".into(), cert.delta.describe().into());
            o.details.insert("grid".into(), grid_json(&cert.grid));
            o.details.insert("global".into(), check_global_delta(&cert).label().into());
            Ok(o)
        }
        CheckKind::Lyapunov => {
            let cert = match cert {
                Some(Certificate::Lyapunov(c)) => c,
                Some(Certificate::Quadratic { .. }) => {
                    return Err(CliError::Usage("quadratic certificates need a euclidean system".into()))
                }
                _ => return Err(CliError::Usage("check lyapunov needs a lyapunov or quadratic certificate".into())),
            };
            lyapunov_outcome(sys, &cert, scope)
        }
    }
}

fn lyapunov_outcome<D, S>(sys: &D, cert: &LyapunovCertificate<S>, scope: &Scope<S>) -> CliResult<Outcome>
where
    D: Dynamics<State = S>,
    S: StateSyntax,
{
    let mut o = outcome(verify_lyapunov(sys, cert, scope)?, |w| report::lyapunov(&w));
    o.details.insert("lower".into(), cert.lower.describe().into());
    o.details.insert("upper".into(), cert.upper.describe().into());
    o.details.insert("grid".into(), grid_json(cert.grid()));
    if let Ok(delta) = delta_from_lyapunov(cert) {
        o.details.insert("derived_delta".into(), delta.delta.describe().into());
        o.details.insert("derived_grid".into(), grid_json(&delta.grid));
    }
    o.details.insert("derived_tags".into(), format!("{:?}", predicted_delta_tags(cert)).into());
    Ok(o)
}

fn check(kind: CheckKind, opts: &Options) -> CliResult<Report> {
    let command = format!("check {}", kind_name(kind));
    let start = Instant::now();
    let inputs = load_inputs(&command, opts)?;
    let doc = parse_system(opts, &inputs)?;
    let needs_cert = matches!(kind, CheckKind::Delta | CheckKind::Lyapunov);
    let (parse_ms, run_start, o) = match &doc {
        SystemDoc::Finite(m) => {
            let cert = if needs_cert { Some(regrid(load_certificate(m, &inputs)?, opts.grid.as_ref())?) } else { None };
            let parse_ms = ms(start);
            let run_start = Instant::now();
            (parse_ms, run_start, check_generic(kind, m, &finite_scope(opts), cert, opts)?)
        }
        SystemDoc::Euclidean(m) => {
            let cert = if needs_cert { Some(regrid(load_certificate(m, &inputs)?, opts.grid.as_ref())?) } else { None };
            let scope = euclidean_scope(m, m.system.dim(), opts)?;
            let parse_ms = ms(start);
            let run_start = Instant::now();
            let o = match cert {
                Some(Certificate::Quadratic { center, p, grid }) if kind == CheckKind::Lyapunov => {
                    let lyap = quadratic_lyapunov(center, &p, grid)?;
                    lyapunov_outcome(&m.system, &lyap, &scope)?
                }
                cert => check_generic(kind, m, &scope, cert, opts)?,
            };
            (parse_ms, run_start, o)
        }
    };
    Ok(Report {
        command,
        inputs_digest: inputs.digest,
        verdict: o.verdict,
        witnesses: o.witnesses,
        details: o.details,
        timings: Timings { parse_ms, run_ms: ms(run_start) },
    })
}

fn kind_name(kind: CheckKind) -> &'static str {
    match kind {
        CheckKind::Monovariant => "monovariant",
        CheckKind::Attractor => "attractor",
        CheckKind::Equilibrium => "equilibrium",
        CheckKind::Delta => "delta",
        CheckKind::Lyapunov => "lyapunov",
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

// ---------------------------------------------------------------------------
// converse
// ---------------------------------------------------------------------------

fn converse_generic<D, S>(model: &Model<D, S>, scope: &Scope<S>, cert: Certificate<S>, out: &Path) -> CliResult<Outcome>
where
    D: Dynamics<State = S> + Sync,
    S: StateSyntax + Send + Sync,
{
    let Certificate::Delta(cert) = cert else {
        return Err(CliError::Usage("converse needs a delta certificate".into()));
    };
    let sys = &model.system;
    if let Verdict::Fail(w) = verify_delta(sys, &cert, scope)? {
        let mut o = outcome(Verdict::Fail(w), |w| report::escape(&w));
        o.details.insert("stage".into(), "delta".into());
        return Ok(o);
    }
    let lyap = match converse_construct(sys, &cert, scope) {
        Ok(l) => l,
        Err(Error::CertificateRejected(message)) => {
            let mut o = outcome(Verdict::Fail(message), |m| json!({ "kind": "rejected", "message": m }));
            o.details.insert("stage".into(), "converse".into());
            return Ok(o);
        }
        Err(e) => return Err(e.into()),
    };
    fs::write(out, format::write_lyapunov(&lyap)?).map_err(|e| io_error(out, e))?;
    let mut o = lyapunov_outcome(sys, &lyap, scope)?;
    let levels = match &lyap.levels {
        LevelSetFamily::Sets { .. } => "sets",
        LevelSetFamily::Balls { .. } => "balls",
        LevelSetFamily::Reachable { .. } => "reachable",
        LevelSetFamily::Sublevel { .. } => "sublevel",
    };
    o.details.insert("levels".into(), levels.into());
    o.details.insert("written".into(), out.display().to_string().into());
    Ok(o)
}

fn converse(opts: &Options) -> CliResult<Report> {
    let command = "converse".to_string();
    let out = opts.out.as_deref().ok_or_else(|| CliError::Usage("converse needs --out for the certificate".into()))?;
    let start = Instant::now();
    let inputs = load_inputs(&command, opts)?;
    let doc = parse_system(opts, &inputs)?;
    let (parse_ms, run_start, o) = match &doc {
        SystemDoc::Finite(m) => {
            let cert = regrid(load_certificate(m, &inputs)?, opts.grid.as_ref())?;
            let (p, r) = (ms(start), Instant::now());
            (p, r, converse_generic(m, &finite_scope(opts), cert, out)?)
        }
        SystemDoc::Euclidean(m) => {
            let cert = regrid(load_certificate(m, &inputs)?, opts.grid.as_ref())?;
            let scope = euclidean_scope(m, m.system.dim(), opts)?;
            let (p, r) = (ms(start), Instant::now());
            (p, r, converse_generic(m, &scope, cert, out)?)
        }
    };
    Ok(Report {
        command,
        inputs_digest: inputs.digest,
        verdict: o.verdict,
        witnesses: o.witnesses,
        details: o.details,
        timings: Timings { parse_ms, run_ms: ms(run_start) },
    })
}

// ---------------------------------------------------------------------------
// export
// ---------------------------------------------------------------------------

fn csv_writer(out: Option<&Path>) -> CliResult<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(fs::File::create(p).map_err(|e| io_error(p, e))?),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io { path: "csv".into(), message: e.to_string() }
}

/// Time points of the trajectory, one generator step apart.
fn trajectory_steps(kind: &TimelineKind, opts: &Options) -> CliResult<Vec<TimePoint>> {
    Ok(match kind {
        TimelineKind::DiscreteLinear => vec![TimePoint::Ticks(1); opts.steps as usize],
        TimelineKind::ContinuousLinear => {
            let dt = opts.dt.as_deref().map_or_else(|| Ok(Rational::one()), |t| rational_arg("dt", t))?;
            vec![TimePoint::Duration(dt); opts.steps as usize]
        }
        TimelineKind::FreeMonoid { .. } => {
            let word = require(&opts.word, "word")?;
            let letters: Vec<u8> = if word.contains(',') {
                word.split(',').map(|l| l.trim().parse::<u8>()).collect::<Result<_, _>>()
            } else {
                word.chars().map(|c| c.to_digit(10).map(|d| d as u8).ok_or(())).collect::<Result<_, _>>().map_err(|_| "".parse::<u8>().unwrap_err())
            }
            .map_err(|_| CliError::Usage(format!("--word: `{word}` is not a list of letters")))?;
            let steps: Vec<TimePoint> = letters.into_iter().map(|l| TimePoint::Word(vec![l])).collect();
            for s in &steps {
                kind.validate(s)?;
            }
            steps
        }
    })
}

fn trajectory<D: Dynamics<State = S>, S: StateSyntax>(model: &Model<D, S>, opts: &Options) -> CliResult<()> {
    let sys = &model.system;
    let mut x = state_arg(model, "start", require(&opts.start, "start")?)?;
    let obs = match &opts.observable {
        Some(_) => Some(observable(model, opts)?),
        None => None,
    };
    let steps = trajectory_steps(sys.timeline(), opts)?;
    let mut w = csv_writer(opts.out.as_deref())?;
    let width = x.columns().len();
    let mut header = vec!["step".to_string()];
    if S::from_index(0).is_some() {
        header.push("state".into());
    } else {
        header.extend((0..width).map(|i| format!("x{i}")));
    }
    if let Some((name, _)) = obs {
        header.push(name.to_string());
    }
    w.write_record(&header).map_err(csv_error)?;
    for k in 0..=steps.len() {
        let mut row = vec![k.to_string()];
        row.extend(x.columns());
        if let Some((_, o)) = obs {
            row.push(observe(sys, o, &x)?.value().to_string());
        }
        w.write_record(&row).map_err(csv_error)?;
        if let Some(t) = steps.get(k) {
            x = sys.evolve(&x, t)?;
        }
    }
    w.flush().map_err(|e| CliError::Io { path: "csv".into(), message: e.to_string() })
}

/// Raster points `-e + 2e * i / (n - 1)` per axis, row-major.
fn raster_points(dim: usize, extent: &Rational, n: usize) -> CliResult<Vec<Point>> {
    if !(1..=2).contains(&dim) {
        return Err(CliError::Usage(format!("rasters need dimension 1 or 2, the system has {dim}")));
    }
    if n < 2 {
        return Err(CliError::Usage("--samples must be at least 2 for rasters".into()));
    }
    let axis: Vec<Rational> = (0..n)
        .map(|i| -extent + extent * Rational::new((2 * i as i64).into(), (n as i64 - 1).into()))
        .collect();
    Ok(match dim {
        1 => axis.iter().map(|x| vec![x.clone()]).collect(),
        _ => axis.iter().flat_map(|y| axis.iter().map(move |x| vec![x.clone(), y.clone()])).collect(),
    })
}

fn raster(what: ExportKind, model: &Model<lyapkit_core::EuclideanSystem, Point>, opts: &Options) -> CliResult<()> {
    let sys = &model.system;
    let grid = parse_grid(opts.grid.as_deref().unwrap_or("1"))?;
    let extent = opts.extent.as_deref().map_or_else(|| Ok(Rational::from_integer(2.into())), |t| rational_arg("extent", t))?;
    let points = raster_points(sys.dim(), &extent, opts.samples.unwrap_or(41))?;
    let (label, obs) = match what {
        ExportKind::SublevelRaster => {
            let (name, o) = observable(model, opts)?;
            (name.to_string(), o.clone())
        }
        _ => {
            let c = state_arg(model, "center", require(&opts.center, "center")?)?;
            ("distance".to_string(), Observable::DistanceTo(c))
        }
    };
    let mut w = csv_writer(opts.out.as_deref())?;
    let mut header = vec!["x".to_string(), "y".to_string(), label];
    let prefix = if what == ExportKind::SublevelRaster { "le" } else { "in" };
    header.extend(grid.iter().map(|r| format!("{prefix}_{r}")));
    w.write_record(&header).map_err(csv_error)?;
    for p in points {
        let level = observe(sys, &obs, &p)?;
        let y = p.get(1).map_or_else(|| "0".to_string(), |y| y.to_string());
        let mut row = vec![p[0].to_string(), y, level.value().to_string()];
        row.extend(grid.iter().map(|r| if level.at_most(&Value::Exact(r.clone())) { "1" } else { "0" }.to_string()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| CliError::Io { path: "csv".into(), message: e.to_string() })
}

fn export(what: ExportKind, opts: &Options) -> CliResult<()> {
    let inputs = load_inputs("export", opts)?;
    match (parse_system(opts, &inputs)?, what) {
        (SystemDoc::Finite(m), ExportKind::Trajectory) => trajectory(&m, opts),
        (SystemDoc::Euclidean(m), ExportKind::Trajectory) => trajectory(&m, opts),
        (SystemDoc::Euclidean(m), _) => raster(what, &m, opts),
        (SystemDoc::Finite(_), _) => Err(CliError::Usage("rasters need a euclidean system".into())),
    }
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

fn oracle(opts: &OracleOptions) -> CliResult<Report> {
    let start = Instant::now();
    let mut d = InputDigest::default();
    d.add("command", b"oracle");
    d.add("options", format!("{}|{}|{}|{}", opts.instances, opts.max_states, opts.max_letters, opts.seed).as_bytes());
    let results: Vec<lyapkit_core::Result<(usize, usize, Vec<serde_json::Value>)>> = pool(opts.jobs)?.install(|| {
        (0..opts.instances)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(i as u64);
                let inst = random_instance(&mut rng, opts.max_states, opts.max_letters);
                let sys = inst.to_system()?;
                let mut witnesses = Vec::new();
                for _ in 0..4 {
                    let extra = rng.random_range(0..inst.size());
                    let seeds: Vec<usize> = (0..inst.size()).filter(|_| rng.random_bool(0.25)).chain([extra]).collect();
                    let engine = explore(&sys, seeds.iter().copied(), &Horizon::Unbounded)?.states();
                    let brute: BTreeSet<usize> = states_of(brute_reach(&inst, mask_of(seeds.iter().copied()))).into_iter().collect();
                    if engine != brute {
                        witnesses.push(json!({ "instance": i, "check": "reach", "seeds": seeds }));
                    }
                }
                let report = brute_check_theorems(&inst)?;
                for c in &report.counterexamples {
                    witnesses.push(json!({
                        "instance": i,
                        "center": c.center,
                        "check": c.check,
                        "detail": c.detail,
                        "distances": inst.distances.iter().map(|r| r.iter().map(|q| q.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
                        "maps": inst.maps,
                    }));
                }
                Ok((inst.size(), report.equilibria.len(), witnesses))
            })
            .collect()
    });
    let (mut states, mut stable, mut witnesses) = (0, 0, Vec::new());
    for r in results {
        let (n, e, w) = r?;
        states += n;
        stable += e;
        witnesses.extend(w);
    }
    let verdict = if witnesses.is_empty() { "SAMPLED" } else { "FAIL" };
    let mut details = Map::new();
    details.insert("instances".into(), opts.instances.into());
    details.insert("states".into(), states.into());
    details.insert("stable_centers".into(), stable.into());
    let run_ms = ms(start);
    Ok(Report {
        command: "oracle".into(),
        inputs_digest: d.hex(),
        verdict: verdict.into(),
        witnesses,
        details,
        timings: Timings { parse_ms: 0.0, run_ms },
    })
}
