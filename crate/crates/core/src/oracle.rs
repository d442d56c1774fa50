//! Brute-force ground truth on small finite systems.
//!
//! Everything here works from the raw definitions on 64-bit state masks and
//! shares nothing with the engine except [`FiniteInstance`].
//! [`brute_check_theorems`] runs the engine's certificate pipeline on an
//! instance and re-checks every output against these brute-force answers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::certificates::{
    check_factorization, compose_factorization, converse_construct, delta_from_lyapunov, factorize, verify_delta,
    verify_lyapunov, DeltaCertificate,
};
use crate::comparison::{ComparisonFunction, PiecewiseLinear};
use crate::scalar::Rational;
use crate::system::{FiniteMetric, FiniteSystem, Scope};
use crate::timeline::TimelineKind;
use crate::{Error, Result, Verdict};

pub const MAX_STATES: usize = 64;
pub const MAX_LETTERS: usize = 3;

/// A finite system as plain data: a distance table and one map per letter.
/// A single map runs on the discrete timeline, several on words.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteInstance {
    pub distances: Vec<Vec<Rational>>,
    pub maps: Vec<Vec<usize>>,
}

pub type Mask = u64;

impl FiniteInstance {
    pub fn size(&self) -> usize {
        self.distances.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.size();
        if n == 0 || n > MAX_STATES {
            return Err(Error::InvalidSystem(format!("oracle instances need 1..={MAX_STATES} states, got {n}")));
        }
        if self.maps.is_empty() || self.maps.len() > MAX_LETTERS {
            return Err(Error::InvalidSystem(format!("oracle instances need 1..={MAX_LETTERS} maps")));
        }
        Ok(())
    }

    pub fn timeline(&self) -> Result<TimelineKind> {
        match self.maps.len() {
            1 => Ok(TimelineKind::DiscreteLinear),
            k => TimelineKind::free_monoid(k),
        }
    }

    /// The engine's view of the same system.
    pub fn to_system(&self) -> Result<FiniteSystem> {
        self.validate()?;
        FiniteSystem::new(FiniteMetric::new(self.distances.clone())?, self.timeline()?, self.maps.clone())
    }

    fn full(&self) -> Mask {
        if self.size() == 64 {
            Mask::MAX
        } else {
            (1 << self.size()) - 1
        }
    }
}

pub fn mask_of(states: impl IntoIterator<Item = usize>) -> Mask {
    states.into_iter().fold(0, |m, s| m | (1 << s))
}

pub fn states_of(mask: Mask) -> Vec<usize> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

/// Least fixpoint of `X -> X ∪ ⋃_letters f(X)`, sweeping all states each
/// round.
pub fn brute_reach(inst: &FiniteInstance, s: Mask) -> Mask {
    let mut current = s & inst.full();
    loop {
        let mut next = current;
        for map in &inst.maps {
            for (x, &y) in map.iter().enumerate() {
                if current >> x & 1 == 1 {
                    next |= 1 << y;
                }
            }
        }
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Closed ball `{x | d(c, x) <= r}`.
pub fn brute_ball(inst: &FiniteInstance, c: usize, r: &Rational) -> Mask {
    mask_of((0..inst.size()).filter(|&x| &inst.distances[c][x] <= r))
}

/// Distinct distances from `c`, zero included, ascending.
pub fn brute_spectrum(inst: &FiniteInstance, c: usize) -> Vec<Rational> {
    let mut ds: Vec<Rational> = inst.distances[c].clone();
    ds.sort();
    ds.dedup();
    ds
}

/// The largest candidate radius `r` (a distance from `c`, possibly 0 for
/// `{c}` alone) such that everything reachable from `B(c, r)` stays in
/// `B(c, eps)`; `None` when no radius works.
pub fn brute_delta_exists(inst: &FiniteInstance, c: usize, eps: &Rational) -> Option<Rational> {
    let target = brute_ball(inst, c, eps);
    brute_spectrum(inst, c).into_iter().rev().find(|r| {
        let reach = brute_reach(inst, brute_ball(inst, c, r));
        reach & !target == 0
    })
}

/// The radius grid the oracle checks: half the smallest positive distance
/// (or 1 when there is none) followed by every positive distance.
pub fn brute_grid(inst: &FiniteInstance, c: usize) -> Vec<Rational> {
    let positive: Vec<Rational> = brute_spectrum(inst, c).into_iter().filter(|d| d.is_positive()).collect();
    let first = match positive.first() {
        Some(d) => d / Rational::from_integer(2.into()),
        None => Rational::one(),
    };
    let mut grid = vec![first];
    grid.extend(positive);
    grid
}

/// Builds a strictly increasing δ with `B(c, δ(ε))` no larger than the
/// oracle's radius at every grid point. Radius 0 maps below the smallest
/// positive distance.
pub fn delta_from_radii(grid: &[Rational], radii: &[Rational], smallest: &Rational) -> Result<PiecewiseLinear> {
    let two = Rational::from_integer(2.into());
    let zeros = radii.iter().filter(|r| r.is_zero()).count() as i64;
    let mut knots = Vec::with_capacity(grid.len());
    let mut shrink = Rational::one();
    for (i, (eps, r)) in grid.iter().zip(radii).enumerate() {
        shrink /= &two;
        let y = if r.is_zero() {
            smallest / &two * Rational::new((i as i64 + 1).into(), (zeros + 1).into())
        } else {
            r * (Rational::one() - &shrink)
        };
        knots.push((eps.clone(), y));
    }
    PiecewiseLinear::new(Rational::zero(), knots, Rational::one())
}

/// One disagreement between the engine and the oracle, or a broken
/// theorem.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub center: usize,
    pub check: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TheoremReport {
    /// Centers that are Lyapunov equilibria on their grid.
    pub equilibria: Vec<usize>,
    pub counterexamples: Vec<Counterexample>,
}

impl TheoremReport {
    pub fn is_clean(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// For every center: decides Lyapunov stability on the grid by brute
/// force, checks it forces a fixed point, then runs the engine's δ
/// verification, converse construction, gluing and factorization round
/// trip and re-checks each output by brute force.
pub fn brute_check_theorems(inst: &FiniteInstance) -> Result<TheoremReport> {
    let sys = inst.to_system()?;
    let mut report = TheoremReport::default();
    let mut fail = |center: usize, check: &'static str, detail: String| {
        report.counterexamples.push(Counterexample { center, check, detail });
    };
    for c in 0..inst.size() {
        let grid = brute_grid(inst, c);
        let identity = DeltaCertificate::new(c, ComparisonFunction::identity(), grid.clone())?;
        let brute_identity = grid.iter().all(|eps| {
            let ball = brute_ball(inst, c, eps);
            brute_reach(inst, ball) & !ball == 0
        });
        let engine_identity = verify_delta(&sys, &identity, &Scope::Exact)?;
        if engine_identity.is_pass() != brute_identity {
            fail(c, "identity-delta", format!("engine {} vs oracle {brute_identity}", engine_identity.label()));
        }

        let radii: Option<Vec<Rational>> = grid.iter().map(|eps| brute_delta_exists(inst, c, eps)).collect();
        let Some(radii) = radii else { continue };
        report.equilibria.push(c);
        if inst.maps.iter().any(|m| m[c] != c) {
            fail(c, "lyapunov-equilibrium-is-fixed", "stable center is moved by a generator".into());
        }

        let smallest = grid.get(1).cloned().unwrap_or_else(Rational::one);
        let delta = ComparisonFunction::Exact(delta_from_radii(&grid, &radii, &smallest)?);
        let cert = DeltaCertificate::new(c, delta.clone(), grid.clone())?;
        match verify_delta(&sys, &cert, &Scope::Exact)? {
            Verdict::Proved => {}
            other => {
                fail(c, "verify-delta", format!("oracle δ judged {}", other.label()));
                continue;
            }
        }

        let lyap = match converse_construct(&sys, &cert, &Scope::Exact) {
            Ok(l) => l,
            Err(e) => {
                fail(c, "converse", format!("{e}"));
                continue;
            }
        };
        if verify_lyapunov(&sys, &lyap, &Scope::Exact)? != Verdict::Proved {
            fail(c, "converse-verify", "constructed certificate not proved".into());
        }
        for eps in &grid {
            let set = mask_of(lyap.levels.members(&sys, eps, &Scope::Exact)?);
            let Some(inner) = delta.as_exact().map(|d| d.eval(eps)) else { continue };
            let inner_ball = brute_ball(inst, c, &inner);
            let outer_ball = brute_ball(inst, c, eps);
            if brute_reach(inst, set) != set || inner_ball & !set != 0 || set & !outer_ball != 0 {
                fail(c, "converse-brute", format!("level set at {eps} fails the brute sandwich or invariance"));
            }
        }

        let glued = delta_from_lyapunov(&lyap)?;
        if verify_delta(&sys, &glued, &Scope::Exact)? != Verdict::Proved {
            fail(c, "gluing", "δ = A ∘ B⁻¹ not proved".into());
        }
        if let Some(g) = glued.delta.as_exact() {
            for r in &glued.grid {
                let ball = brute_ball(inst, c, &g.eval(r));
                if brute_reach(inst, ball) & !brute_ball(inst, c, r) != 0 {
                    fail(c, "gluing-brute", format!("escape from δ({r})"));
                }
            }
        }

        let f = factorize(&cert)?;
        if check_factorization(&sys, &f, &Scope::Exact)? != Verdict::Proved {
            fail(c, "factorization", "2-cells not proved".into());
        }
        let back = compose_factorization(&f)?;
        let (a, b) = (back.delta.as_exact(), delta.as_exact());
        if grid.iter().any(|eps| a.map(|f| f.eval(eps)) != b.map(|f| f.eval(eps))) {
            fail(c, "factorization-round-trip", "δ changed".into());
        }
    }
    Ok(report)
}

/// A random instance: a shortest-path metric on a randomly weighted
/// complete graph and maps biased toward a random center, so that a good
/// share of instances have stable points.
#[allow(clippy::needless_range_loop)]
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, max_states: usize, max_letters: usize) -> FiniteInstance {
    let n = rng.random_range(1..=max_states.clamp(1, MAX_STATES));
    let letters = rng.random_range(1..=max_letters.clamp(1, MAX_LETTERS));
    let mut w = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = rng.random_range(1..=6);
            w[i][j] = d;
            w[j][i] = d;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if w[i][k] + w[k][j] < w[i][j] {
                    w[i][j] = w[i][k] + w[k][j];
                }
            }
        }
    }
    let denom = rng.random_range(1..=3i64);
    let distances = w.iter().map(|row| row.iter().map(|&d| Rational::new(d.into(), denom.into())).collect()).collect();
    let center = rng.random_range(0..n);
    let fix_center = rng.random_bool(0.6);
    let maps = (0..letters)
        .map(|_| {
            (0..n)
                .map(|x| {
                    if x == center && fix_center {
                        return center;
                    }
                    if rng.random_bool(0.7) {
                        let closer: Vec<usize> = (0..n).filter(|&y| w[center][y] <= w[center][x]).collect();
                        closer[rng.random_range(0..closer.len())]
                    } else {
                        rng.random_range(0..n)
                    }
                })
                .collect()
        })
        .collect();
    FiniteInstance { distances, maps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::int;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize, maps: Vec<Vec<usize>>) -> FiniteInstance {
        let distances = (0..n).map(|i| (0..n).map(|j| int((i as i64 - j as i64).abs())).collect()).collect();
        FiniteInstance { distances, maps }
    }

    #[test]
    fn reach_examples() {
        let id = line(3, vec![vec![0, 1, 2]]);
        assert_eq!(brute_reach(&id, 0b101), 0b101);
        let cycle = line(3, vec![vec![1, 2, 0]]);
        assert_eq!(brute_reach(&cycle, 0b001), 0b111);
        let sink = line(3, vec![vec![0, 0, 0]]);
        assert_eq!(states_of(brute_reach(&sink, 0b100)), vec![0, 2]);
    }

    #[test]
    fn delta_examples() {
        let id = line(4, vec![vec![0, 1, 2, 3]]);
        for eps in 1..4 {
            assert_eq!(brute_delta_exists(&id, 0, &int(eps)), Some(int(eps)));
        }
        let sink = line(4, vec![vec![0, 0, 0, 0]]);
        assert_eq!(brute_delta_exists(&sink, 0, &int(1)), Some(int(1)));
        // 0 -> 1 -> 2 -> 3 -> 0 moves the center: nothing stays near it.
        let shift = line(4, vec![vec![1, 2, 3, 0]]);
        assert_eq!(brute_delta_exists(&shift, 0, &int(1)), None);
    }

    #[test]
    fn theorem_examples() {
        let id = line(4, vec![vec![0, 1, 2, 3]]);
        let report = brute_check_theorems(&id).unwrap();
        assert!(report.is_clean(), "{report:?}");
        assert_eq!(report.equilibria, vec![0, 1, 2, 3]);

        let contraction = line(4, vec![vec![0, 0, 1, 2]]);
        let report = brute_check_theorems(&contraction).unwrap();
        assert!(report.is_clean(), "{report:?}");
        assert_eq!(report.equilibria, vec![0]);

        let rotation = line(3, vec![vec![1, 2, 0]]);
        let report = brute_check_theorems(&rotation).unwrap();
        assert!(report.is_clean() && report.equilibria.is_empty());
    }

    #[test]
    fn random_instances_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let inst = random_instance(&mut rng, 10, 3);
            inst.to_system().unwrap();
        }
    }

    #[test]
    fn oversized_instances_are_rejected() {
        let inst = line(1, vec![vec![0], vec![0], vec![0], vec![0]]);
        assert!(inst.to_system().is_err());
    }
}
