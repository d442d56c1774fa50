//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any
//! failure.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use lyapkit_core::certificates::{
    check_factorization, compose_factorization, converse_construct, delta_from_lyapunov, factorize, upper_triangle,
    upper_triangle_inverse, verify_delta, verify_lyapunov, DeltaCertificate, LyapunovCertificate,
};
use lyapkit_core::monovariant::{
    check_attractor, check_levelset_laxcone, check_monovariant, check_vmax_monovariant, observed_grid, sublevel,
};
use lyapkit_core::oracle::{
    brute_ball, brute_check_theorems, brute_delta_exists, brute_grid, brute_reach, delta_from_radii, mask_of,
    random_instance, states_of, FiniteInstance,
};
use lyapkit_core::quadratic::{
    check_trajectories, lyapunov_residual, quadratic_to_lyapunov, solve_discrete_lyapunov, Matrix,
    QuadraticCertificate,
};
use lyapkit_core::scalar::{from_f64, int, rat, Rational};
use lyapkit_core::system::{explore, unit_ball_lattice, Horizon, RatMatrix, Sampling};
use lyapkit_core::timeline::{words_up_to, TimePoint, TimelineKind};
use lyapkit_core::{ComparisonFunction, Direction, EuclideanSystem, FiniteSystem, Scope, Value, Verdict};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within_budget(o: Outcome, elapsed: Duration, budget: Option<Duration>) -> Outcome {
    match budget {
        Some(b) if elapsed > b => outcome(false, format!("{}; over budget {:?}", o.detail, b)),
        _ => o,
    }
}

fn corpus(seed: u64, count: usize) -> Vec<FiniteInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_instance(&mut rng, 16, 3)).collect()
}

// 1 ---------------------------------------------------------------------

fn timeline_laws() -> Outcome {
    let mut failures = 0usize;
    let mut checked = 0usize;
    let mut universes: Vec<(TimelineKind, Vec<TimePoint>, usize)> =
        vec![(TimelineKind::DiscreteLinear, (0..=64).map(TimePoint::Ticks).collect(), 64)];
    for alphabet in 1..=3 {
        let words = words_up_to(alphabet, 6).into_iter().map(TimePoint::Word).collect();
        universes.push((TimelineKind::free_monoid(alphabet).unwrap(), words, 6));
    }
    for (kind, points, bound) in &universes {
        let size = |t: &TimePoint| t.steps().unwrap() as usize;
        let zero = kind.zero();
        let mut sums: HashMap<(TimePoint, TimePoint), usize> = HashMap::new();
        for a in points {
            checked += 1;
            // Identity, minimum and reflexivity.
            if kind.plus(a, &zero).unwrap() != *a || kind.plus(&zero, a).unwrap() != *a {
                failures += 1;
            }
            if !kind.leq(&zero, a).unwrap() || !kind.leq(a, a).unwrap() {
                failures += 1;
            }
            for b in points {
                let le = kind.leq(a, b).unwrap();
                // Antisymmetry.
                if le && kind.leq(b, a).unwrap() && a != b {
                    failures += 1;
                }
                // Difference recovers b exactly when a <= b.
                match kind.difference(a, b) {
                    Ok(d) => {
                        if !le || kind.plus(a, &d).unwrap() != *b {
                            failures += 1;
                        }
                    }
                    Err(_) => failures += usize::from(le),
                }
                if size(a) + size(b) <= *bound {
                    let s = kind.plus(a, b).unwrap();
                    if !kind.leq(a, &s).unwrap() {
                        failures += 1;
                    }
                    *sums.entry((a.clone(), s)).or_default() += 1;
                    for c in points.iter().filter(|c| size(a) + size(b) + size(c) <= *bound) {
                        let left = kind.plus(a, &kind.plus(b, c).unwrap()).unwrap();
                        let right = kind.plus(&kind.plus(a, b).unwrap(), c).unwrap();
                        if left != right {
                            failures += 1;
                        }
                        // Transitivity along a <= a+b <= a+b+c.
                        if !kind.leq(a, &right).unwrap() {
                            failures += 1;
                        }
                    }
                }
            }
        }
        // Uniqueness: every comparable pair inside the universe has exactly
        // one witness t with a + t = b.
        for a in points {
            for b in points {
                if kind.leq(a, b).unwrap() && sums.get(&(a.clone(), b.clone())) != Some(&1) {
                    failures += 1;
                }
            }
        }
    }
    outcome(failures == 0, format!("{checked} points, {failures} failures"))
}

// 2 ---------------------------------------------------------------------

fn semiadjunction(instances: &[FiniteInstance]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut disagreements = 0;
    let mut monovariant = 0;
    for inst in instances {
        let sys = inst.to_system().unwrap();
        let n = inst.size();
        let obs = match rng.random_range(0..3) {
            0 => common::random_table(&mut rng, n),
            1 => lyapkit_core::Observable::DistanceTo(rng.random_range(0..n)),
            _ => common::future_max_distance(inst, rng.random_range(0..n)),
        };
        let a = check_monovariant(&sys, &obs, Direction::NonIncreasing, &Scope::Exact).unwrap();
        let grid = observed_grid(&sys, &obs).unwrap();
        let fam = sublevel(&sys, &obs, grid).unwrap();
        let b = check_levelset_laxcone(&sys, &fam, &Scope::Exact).unwrap();
        let mut subsets: Vec<BTreeSet<usize>> = (0..n).map(|x| BTreeSet::from([x])).collect();
        subsets.extend(fam.grid().iter().map(|r| fam.members(&sys, r, &Scope::Exact).unwrap()).filter(|s| !s.is_empty()));
        subsets.extend(common::random_subsets(&mut rng, n, 4));
        let c = check_vmax_monovariant(&sys, &obs, Direction::NonIncreasing, &subsets, &Scope::Exact).unwrap();
        if a.is_proved() != b.is_proved() || b.is_proved() != c.is_proved() || a.is_pass() != a.is_proved() {
            disagreements += 1;
        }
        monovariant += usize::from(a.is_proved());
    }
    outcome(
        disagreements == 0,
        format!("{} instances ({monovariant} monovariant), {disagreements} disagreements", instances.len()),
    )
}

// 3 ---------------------------------------------------------------------

fn attractor_equilibrium(instances: &[FiniteInstance]) -> Outcome {
    let mut attractors = 0;
    let mut counterexamples = 0;
    for inst in instances {
        let sys = inst.to_system().unwrap();
        for c in 0..inst.size() {
            let report = check_attractor(&sys, &c, &Scope::Exact).unwrap();
            if report.distance.is_pass() {
                attractors += 1;
                let fixed = inst.maps.iter().all(|m| m[c] == c);
                if report.equilibrium != Some(Verdict::Proved) || !fixed {
                    counterexamples += 1;
                }
            }
        }
    }
    outcome(counterexamples == 0, format!("{attractors} attractors, {counterexamples} counterexamples"))
}

// 4 ---------------------------------------------------------------------

fn verified_lyapunov_certificates(inst: &FiniteInstance, sys: &FiniteSystem) -> Vec<LyapunovCertificate<usize>> {
    let mut out = Vec::new();
    for c in 0..inst.size() {
        let obs = common::future_max_distance(inst, c);
        let grid = observed_grid(sys, &obs).unwrap();
        let fam = sublevel(sys, &obs, grid).unwrap();
        if let Ok(cert) = LyapunovCertificate::fit(sys, c, fam) {
            if verify_lyapunov(sys, &cert, &Scope::Exact).unwrap() == Verdict::Proved {
                out.push(cert);
            }
        }
    }
    out
}

fn forward_direction(seed: u64, want: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut instances, mut certs, mut failures, mut tries) = (0, 0, 0, 0);
    while instances < want && tries < 20 * want {
        tries += 1;
        let inst = random_instance(&mut rng, 16, 3);
        let sys = inst.to_system().unwrap();
        let found = verified_lyapunov_certificates(&inst, &sys);
        if found.is_empty() {
            continue;
        }
        instances += 1;
        for cert in found {
            certs += 1;
            let delta = delta_from_lyapunov(&cert).unwrap();
            let verdict = verify_delta(&sys, &delta, &Scope::Exact).unwrap();
            let d = delta.delta.as_exact().expect("exact bounds give an exact δ");
            let brute = delta.grid.iter().all(|r| {
                let ball = brute_ball(&inst, cert.center, &d.eval(r));
                brute_reach(&inst, ball) & !brute_ball(&inst, cert.center, r) == 0
            });
            if verdict != Verdict::Proved || !brute {
                failures += 1;
            }
        }
    }
    outcome(instances >= want && failures == 0, format!("{instances} instances, {certs} certificates, {failures} failures"))
}

// 5 and 6 ---------------------------------------------------------------

fn verified_delta_certificates(inst: &FiniteInstance, sys: &FiniteSystem) -> Vec<DeltaCertificate<usize>> {
    let mut out = Vec::new();
    for c in 0..inst.size() {
        let grid = brute_grid(inst, c);
        let identity = DeltaCertificate::new(c, ComparisonFunction::identity(), grid.clone()).unwrap();
        if verify_delta(sys, &identity, &Scope::Exact).unwrap() == Verdict::Proved {
            out.push(identity);
        }
        let radii: Option<Vec<Rational>> = grid.iter().map(|e| brute_delta_exists(inst, c, e)).collect();
        if let Some(radii) = radii {
            let smallest = grid.get(1).cloned().unwrap_or_else(|| int(1));
            let delta = delta_from_radii(&grid, &radii, &smallest).unwrap();
            let cert = DeltaCertificate::new(c, delta.into(), grid).unwrap();
            if verify_delta(sys, &cert, &Scope::Exact).unwrap() == Verdict::Proved {
                out.push(cert);
            }
        }
    }
    out
}

struct ConverseTally {
    instances: usize,
    certs: usize,
    converse_failures: usize,
    factor_failures: usize,
}

fn converse_and_factorization(seed: u64, want: usize) -> ConverseTally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = ConverseTally { instances: 0, certs: 0, converse_failures: 0, factor_failures: 0 };
    let mut tries = 0;
    while t.instances < want && tries < 20 * want {
        tries += 1;
        let inst = random_instance(&mut rng, 16, 3);
        let sys = inst.to_system().unwrap();
        let found = verified_delta_certificates(&inst, &sys);
        if found.is_empty() {
            continue;
        }
        t.instances += 1;
        for cert in found {
            t.certs += 1;
            match converse_construct(&sys, &cert, &Scope::Exact) {
                Ok(lyap) => {
                    let proved = verify_lyapunov(&sys, &lyap, &Scope::Exact).unwrap() == Verdict::Proved;
                    let delta = cert.delta.as_exact().expect("exact δ");
                    let brute = cert.grid.iter().all(|eps| {
                        let set = mask_of(lyap.levels.members(&sys, eps, &Scope::Exact).unwrap());
                        let inner = brute_ball(&inst, cert.center, &delta.eval(eps));
                        let outer = brute_ball(&inst, cert.center, eps);
                        brute_reach(&inst, set) == set && inner & !set == 0 && set & !outer == 0
                    });
                    if !proved || !brute {
                        t.converse_failures += 1;
                    }
                }
                Err(_) => t.converse_failures += 1,
            }
            let f = factorize(&cert).unwrap();
            let back = compose_factorization(&f).unwrap();
            let same = cert.grid.iter().all(|eps| {
                back.delta.as_exact().map(|g| g.eval(eps)) == cert.delta.as_exact().map(|g| g.eval(eps))
            });
            if !same || check_factorization(&sys, &f, &Scope::Exact).unwrap() != Verdict::Proved {
                t.factor_failures += 1;
            }
        }
    }
    t
}

// 7 ---------------------------------------------------------------------

fn inverse_triangle(want: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut points, mut holding, mut disagreements) = (0, 0, 0);
    for _ in 0..want {
        let inst = random_instance(&mut rng, 16, 3);
        let sys = inst.to_system().unwrap();
        let c = rng.random_range(0..inst.size());
        let obs = common::future_max_distance(&inst, c);
        let fam = sublevel(&sys, &obs, observed_grid(&sys, &obs).unwrap()).unwrap();
        let b = common::random_invertible(&mut rng);
        let direct = upper_triangle(&sys, &c, &fam, &b, &Scope::Exact).unwrap();
        let inverse = upper_triangle_inverse(&sys, &c, &fam, &b, &Scope::Exact).unwrap();
        points += direct.len();
        holding += direct.iter().filter(|x| **x).count();
        disagreements += direct.iter().zip(&inverse).filter(|(x, y)| x != y).count();
        disagreements += direct.len().abs_diff(inverse.len());
    }
    outcome(
        disagreements == 0,
        format!("{want} functions, {points} grid points ({holding} holding), {disagreements} disagreements"),
    )
}

// 8 ---------------------------------------------------------------------

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A random integer matrix scaled down to a spectral radius of at most
/// `target`.
fn random_stable<R: Rng>(rng: &mut R, n: usize, target: f64) -> RatMatrix {
    loop {
        let m: Vec<Vec<i64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-4..=4)).collect()).collect();
        let nm = DMatrix::from_fn(n, n, |i, j| m[i][j] as f64);
        let rho = spectral_radius(&nm);
        if rho == 0.0 {
            continue;
        }
        let s = (rho / target).ceil() as i64 + 1;
        let rows = m.iter().map(|r| r.iter().map(|&v| rat(v, s)).collect()).collect();
        let a = RatMatrix::new(rows).unwrap();
        let check = DMatrix::from_fn(n, n, |i, j| m[i][j] as f64 / s as f64);
        assert!(spectral_radius(&check) <= target + 1e-12);
        return a;
    }
}

fn independent_residual(a: &Matrix, p: &Matrix) -> f64 {
    let n = a.dim();
    let na = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
    let np = DMatrix::from_fn(n, n, |i, j| p.get(i, j));
    let r = na.transpose() * &np * &na - &np + DMatrix::identity(n, n);
    r.amax()
}

fn quadratic_lane(want: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst, mut trajectory_failures, mut delta_failures, mut errors) = (0.0f64, 0, 0, 0);
    for k in 0..want {
        let n = 1 + k % 6;
        let target = rng.random_range(0.2..=0.95);
        let a_exact = random_stable(&mut rng, n, target);
        let a = Matrix::from_rational(&a_exact);
        let q = Matrix::identity(n);
        let Ok(p) = solve_discrete_lyapunov(&a, &q) else {
            errors += 1;
            continue;
        };
        worst = worst.max(independent_residual(&a, &p)).max(lyapunov_residual(&a, &p, &q));

        let trajectories: Vec<(Vec<f64>, Vec<u8>)> = (0..1000)
            .map(|_| ((0..n).map(|_| rng.random_range(-10.0..10.0)).collect(), vec![0u8; 30]))
            .collect();
        if !check_trajectories(std::slice::from_ref(&a), &p, &trajectories, 1e-9).unwrap().is_pass() {
            trajectory_failures += 1;
        }

        let sys = EuclideanSystem::linear(a_exact).unwrap();
        let mut cloud = unit_ball_lattice(n, 1);
        for _ in 0..12 {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
            cloud.push(v.iter().map(|x| from_f64((x / norm * 64.0).trunc() / 64.0).unwrap()).collect());
        }
        let states = (0..12).map(|_| (0..n).map(|_| rat(rng.random_range(-8..=8), 4)).collect()).collect();
        let scope = Scope::Sampled(Sampling { horizon: Horizon::steps(6), states, cloud });
        let grid = vec![rat(1, 4), int(1), int(4)];
        let ok = quadratic_to_lyapunov(&sys, &p, grid, &scope)
            .and_then(|lyap| delta_from_lyapunov(&lyap))
            .and_then(|delta| verify_delta(&sys, &delta, &scope));
        match ok {
            Ok(Verdict::Sampled) => {}
            _ => delta_failures += 1,
        }
    }
    let pass = worst <= 1e-8 && trajectory_failures == 0 && delta_failures == 0 && errors == 0;
    outcome(
        pass,
        format!(
            "{want} matrices, worst residual {worst:.2e}, {trajectory_failures} trajectory failures, \
             {delta_failures} δ failures, {errors} solver errors"
        ),
    )
}

// 9 ---------------------------------------------------------------------

/// Partial sums of `sum_k (A^T)^k Q A^k` until the terms vanish.
fn series_oracle(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut term = q.clone();
    let mut sum = q.clone();
    for _ in 0..10_000 {
        term = a.transpose() * &term * a;
        sum += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    sum
}

fn closed_forms() -> Outcome {
    let a = Matrix::scaled_identity(2, 0.5);
    let p = solve_discrete_lyapunov(&a, &Matrix::identity(2)).unwrap();
    let oracle = series_oracle(&DMatrix::from_diagonal_element(2, 2, 0.5), &DMatrix::identity(2, 2));
    let mut p_err = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let expected = if i == j { 4.0 / 3.0 } else { 0.0 };
            p_err = p_err.max((p.get(i, j) - expected).abs()).max((oracle[(i, j)] - expected).abs());
        }
    }

    let cert = QuadraticCertificate::new(Matrix::diagonal(&[1.0, 4.0])).unwrap();
    let delta = ComparisonFunction::Power(cert.lower())
        .compose(&ComparisonFunction::Power(cert.upper()).invert().unwrap())
        .unwrap();
    let mut d_err = 0.0f64;
    for eps in [rat(1, 100), rat(1, 3), int(1), int(5), int(40)] {
        let v = delta.eval(&Value::Exact(eps.clone())).to_f64();
        let e = lyapkit_core::scalar::to_f64(&eps);
        d_err = d_err.max((v - e / 2.0).abs() / e.max(1.0));
    }
    outcome(p_err <= 1e-10 && d_err <= 1e-10, format!("|P - 4/3 I| = {p_err:.1e}, |δ(ε) - ε/2| = {d_err:.1e}"))
}

// 10 --------------------------------------------------------------------

fn oracle_independence(instances: &[FiniteInstance]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut reach_checks, mut reach_mismatch, mut counterexamples, mut equilibria) = (0, 0, 0, 0);
    for inst in instances {
        let sys = inst.to_system().unwrap();
        let n = inst.size();
        for _ in 0..4 {
            let extra = rng.random_range(0..n);
            let seeds: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.25)).chain([extra]).collect();
            let engine = explore(&sys, seeds.iter().copied(), &Horizon::Unbounded).unwrap().states();
            let brute: BTreeSet<usize> = states_of(brute_reach(inst, mask_of(seeds))).into_iter().collect();
            reach_checks += 1;
            reach_mismatch += usize::from(engine != brute);
        }
        let report = brute_check_theorems(inst).unwrap();
        counterexamples += report.counterexamples.len();
        equilibria += report.equilibria.len();
        if !report.is_clean() {
            eprintln!("counterexample: {:?} on {:?}", report.counterexamples, inst);
        }
    }
    outcome(
        reach_mismatch == 0 && counterexamples == 0,
        format!(
            "{} instances, {reach_checks} reach checks ({reach_mismatch} mismatches), {equilibria} stable centers, \
             {counterexamples} counterexamples",
            instances.len()
        ),
    )
}

fn main() {
    let corpus_2 = corpus(1, 1000);
    let corpus_10 = corpus(11, 1000);
    let mut results: Vec<(&str, Outcome, Duration)> = Vec::new();
    let mut run = |name: &'static str, budget: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let elapsed = start.elapsed();
        let o = within_budget(o, elapsed, budget);
        println!("{} {name}: {} [{:.2?}]", if o.pass { "PASS" } else { "FAIL" }, o.detail, elapsed);
        results.push((name, o, elapsed));
    };

    run("1 timeline laws", Some(Duration::from_secs(10)), &mut timeline_laws);
    run("2 semiadjunction equivalence", Some(Duration::from_secs(60)), &mut || semiadjunction(&corpus_2));
    run("3 attractor implies equilibrium", None, &mut || attractor_equilibrium(&corpus_2));
    run("4 forward direction", None, &mut || forward_direction(4, 500));
    let mut tally = None;
    run("5 converse direction", Some(Duration::from_secs(300)), &mut || {
        let t = converse_and_factorization(5, 500);
        let o = outcome(
            t.instances >= 500 && t.converse_failures == 0,
            format!("{} instances, {} certificates, {} failures", t.instances, t.certs, t.converse_failures),
        );
        tally = Some(t);
        o
    });
    run("6 factorization round trip", None, &mut || {
        let t = tally.as_ref().expect("criterion 5 ran");
        outcome(t.factor_failures == 0, format!("{} certificates, {} failures", t.certs, t.factor_failures))
    });
    run("7 inverse triangle", None, &mut || inverse_triangle(200));
    run("8 quadratic lane", None, &mut || quadratic_lane(100));
    run("9 closed forms", None, &mut closed_forms);
    run("10 oracle independence", None, &mut || oracle_independence(&corpus_10));

    let failed = results.iter().filter(|(_, o, _)| !o.pass).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
