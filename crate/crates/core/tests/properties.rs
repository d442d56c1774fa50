mod common;

use std::collections::BTreeSet;

use lyapkit_core::certificates::{delta_from_lyapunov, verify_delta, LyapunovCertificate};
use lyapkit_core::monovariant::{check_levelset_laxcone, check_monovariant, observed_grid, sublevel};
use lyapkit_core::oracle::{brute_check_theorems, brute_reach, mask_of, random_instance, states_of};
use lyapkit_core::scalar::Rational;
use lyapkit_core::system::{explore, future};
use lyapkit_core::timeline::{TimePoint, TimelineKind};
use lyapkit_core::{Direction, Dynamics, Horizon, Scope, Verdict};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn duration() -> impl Strategy<Value = TimePoint> {
    (0i64..200, 1i64..12).prop_map(|(n, d)| TimePoint::Duration(Rational::new(n.into(), d.into())))
}

fn word(alphabet: u8) -> impl Strategy<Value = TimePoint> {
    prop::collection::vec(0..alphabet, 0..8).prop_map(TimePoint::Word)
}

fn check_laws(kind: &TimelineKind, a: &TimePoint, b: &TimePoint, c: &TimePoint) -> Result<(), TestCaseError> {
    let zero = kind.zero();
    prop_assert_eq!(kind.plus(a, &zero).unwrap(), a.clone());
    prop_assert_eq!(kind.plus(&zero, a).unwrap(), a.clone());
    let left = kind.plus(a, &kind.plus(b, c).unwrap()).unwrap();
    let right = kind.plus(&kind.plus(a, b).unwrap(), c).unwrap();
    prop_assert_eq!(left, right);
    let ab = kind.plus(a, b).unwrap();
    prop_assert!(kind.leq(a, &ab).unwrap());
    prop_assert!(kind.leq(&zero, a).unwrap());
    prop_assert_eq!(kind.difference(a, &ab).unwrap(), b.clone());
    if kind.leq(a, c).unwrap() {
        let d = kind.difference(a, c).unwrap();
        prop_assert_eq!(kind.plus(a, &d).unwrap(), c.clone());
    } else {
        prop_assert!(kind.difference(a, c).is_err());
    }
    Ok(())
}

proptest! {
    #[test]
    fn continuous_timeline_laws(a in duration(), b in duration(), c in duration()) {
        check_laws(&TimelineKind::ContinuousLinear, &a, &b, &c)?;
    }

    #[test]
    fn word_timeline_laws(a in word(3), b in word(3), c in word(3)) {
        check_laws(&TimelineKind::free_monoid(3).unwrap(), &a, &b, &c)?;
    }

    #[test]
    fn brute_and_engine_reach_agree(seed in any::<u64>(), picks in prop::collection::vec(0usize..64, 1..5)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 12, 3);
        let sys = inst.to_system().unwrap();
        let seeds: BTreeSet<usize> = picks.iter().map(|p| p % inst.size()).collect();
        let brute: BTreeSet<usize> = states_of(brute_reach(&inst, mask_of(seeds.iter().copied()))).into_iter().collect();
        prop_assert_eq!(future(&sys, &seeds, &Horizon::Unbounded).unwrap(), brute.clone());
        prop_assert_eq!(explore(&sys, seeds, &Horizon::Unbounded).unwrap().states(), brute);
    }

    #[test]
    fn evolution_is_an_action(seed in any::<u64>(), x in 0usize..64, s in prop::collection::vec(0u8..3, 0..6), t in prop::collection::vec(0u8..3, 0..6)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inst = random_instance(&mut rng, 10, 3);
        while inst.maps.len() < 3 {
            inst.maps.push(inst.maps[0].clone());
        }
        let sys = inst.to_system().unwrap();
        let x = x % inst.size();
        let (s, t) = (TimePoint::Word(s), TimePoint::Word(t));
        let st = sys.timeline().plus(&s, &t).unwrap();
        let stepwise = sys.evolve(&sys.evolve(&x, &s).unwrap(), &t).unwrap();
        prop_assert_eq!(sys.evolve(&x, &st).unwrap(), stepwise);
        prop_assert_eq!(sys.evolve(&x, &sys.timeline().zero()).unwrap(), x);
    }

    #[test]
    fn monovariant_iff_invariant_sublevel_sets(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 10, 2);
        let sys = inst.to_system().unwrap();
        let obs = common::random_table(&mut rng, inst.size());
        let fam = sublevel(&sys, &obs, observed_grid(&sys, &obs).unwrap()).unwrap();
        let a = check_monovariant(&sys, &obs, Direction::NonIncreasing, &Scope::Exact).unwrap();
        let b = check_levelset_laxcone(&sys, &fam, &Scope::Exact).unwrap();
        prop_assert_eq!(a.is_pass(), b.is_pass());
    }

    #[test]
    fn fitted_certificates_glue_to_stability(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 12, 3);
        let sys = inst.to_system().unwrap();
        for c in 0..inst.size() {
            let obs = common::future_max_distance(&inst, c);
            let fam = sublevel(&sys, &obs, observed_grid(&sys, &obs).unwrap()).unwrap();
            if let Ok(cert) = LyapunovCertificate::fit(&sys, c, fam) {
                prop_assert_eq!(lyapkit_core::certificates::verify_lyapunov(&sys, &cert, &Scope::Exact).unwrap(), Verdict::Proved);
                let delta = delta_from_lyapunov(&cert).unwrap();
                prop_assert_eq!(verify_delta(&sys, &delta, &Scope::Exact).unwrap(), Verdict::Proved);
            }
        }
    }

    #[test]
    fn theorem_checks_are_clean(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 12, 3);
        let report = brute_check_theorems(&inst).unwrap();
        prop_assert!(report.is_clean(), "{:?}", report.counterexamples);
    }
}
