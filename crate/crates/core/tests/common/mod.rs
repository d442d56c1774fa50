//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use lyapkit_core::oracle::{brute_reach, mask_of, states_of, FiniteInstance};
use lyapkit_core::scalar::Rational;
use lyapkit_core::{ComparisonFunction, Observable, PiecewiseLinear, Value};
use num_traits::{One, Zero};
use rand::Rng;

/// `V(x) = max { d(c, y) : y reachable from x }`, which never increases
/// along trajectories and vanishes exactly at a fixed center.
pub fn future_max_distance(inst: &FiniteInstance, c: usize) -> Observable<usize> {
    let values = (0..inst.size())
        .map(|x| {
            let reach = states_of(brute_reach(inst, mask_of([x])));
            let far = reach.iter().map(|&y| inst.distances[c][y].clone()).max().expect("x reaches itself");
            Value::Exact(far)
        })
        .collect();
    Observable::Table(values)
}

pub fn random_table<R: Rng>(rng: &mut R, n: usize) -> Observable<usize> {
    Observable::Table((0..n).map(|_| Value::Exact(Rational::from_integer(rng.random_range(0..5).into()))).collect())
}

pub fn random_subsets<R: Rng>(rng: &mut R, n: usize, count: usize) -> Vec<BTreeSet<usize>> {
    (0..count)
        .map(|_| {
            let mut s: BTreeSet<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
            s.insert(rng.random_range(0..n));
            s
        })
        .collect()
}

/// A random strictly increasing piecewise-linear function through the
/// origin with a positive tail, so it is invertible.
pub fn random_invertible<R: Rng>(rng: &mut R) -> ComparisonFunction {
    let mut x = Rational::zero();
    let mut y = Rational::zero();
    let mut knots = Vec::new();
    for _ in 0..rng.random_range(1..=4) {
        x += Rational::new(rng.random_range(1..=6i64).into(), rng.random_range(1..=3i64).into());
        y += Rational::new(rng.random_range(1..=6i64).into(), rng.random_range(1..=3i64).into());
        knots.push((x.clone(), y.clone()));
    }
    let tail = Rational::new(rng.random_range(1..=4i64).into(), rng.random_range(1..=4i64).into());
    PiecewiseLinear::new(Rational::zero(), knots, tail).expect("valid knots").into()
}

pub fn half() -> Rational {
    Rational::one() / Rational::from_integer(2.into())
}
