use cpexit::entry::{entry_factors, entry_transform, EntryQuery, EntryStart};
use cpexit::exit::{self, ExitQuery};
use cpexit::model::{JumpLaw, ProcessParams};
use cpexit::rational_oracle::build_partial_fractions;
use cpexit::resolvent::{resolvent_transform, root_c, ResolventContext};
use num_complex::Complex64;
use proptest::prelude::*;

fn law(rational_only: bool) -> impl Strategy<Value = JumpLaw> {
    let rational = prop_oneof![
        (0.5..3.0f64).prop_map(|mu| JumpLaw::Exponential { mu }),
        (2u32..=4, 1.0..5.0f64).prop_map(|(k, mu)| JumpLaw::Erlang { k, mu }),
        (0.2..0.8f64, 0.5..1.5f64, 2.0..5.0f64).prop_map(|(w, r1, r2)| JumpLaw::HyperExponential {
            weights: vec![w, 1.0 - w],
            rates: vec![r1, r2],
        }),
    ];
    if rational_only {
        rational.boxed()
    } else {
        prop_oneof![3 => rational, 1 => (0.3..2.0f64).prop_map(|d| JumpLaw::Dirac { d })].boxed()
    }
}

fn params(rational_only: bool) -> impl Strategy<Value = ProcessParams> {
    (0.5..4.0f64, 0.15..0.85f64, 0.5..3.0f64, law(rational_only))
        .prop_map(|(c, a, lambda, eta)| ProcessParams::new(c, a, lambda, eta).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exponent_derivative_and_symmetry(p in params(false), re in -0.3..0.9f64, im in -2.0..2.0f64) {
        let z = Complex64::new(re * p.lambda(), im);
        let k = p.laplace_exponent(z).unwrap();
        let kc = p.laplace_exponent(z.conj()).unwrap();
        prop_assert!((kc - k.conj()).norm() <= 1e-12 * (1.0 + k.norm()));
        let h = 1e-5;
        let fd = (p.eta().lt(z + h).unwrap() - p.eta().lt(z - h).unwrap()) / (2.0 * h);
        let d = p.eta().lt_prime(z).unwrap();
        prop_assert!((fd - d).norm() <= 1e-6 * (1.0 + d.norm()));
        prop_assert_eq!(p.laplace_exponent(Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn root_solves_and_increases(p in params(false), s in 0.05..8.0f64) {
        let c = root_c(&p, s).unwrap();
        prop_assert!(c > 0.0 && c < p.lambda());
        let k = p.laplace_exponent(Complex64::new(c, 0.0)).unwrap().re;
        prop_assert!((k - s).abs() <= 1e-12 * (1.0 + s));
        prop_assert!(root_c(&p, 1.5 * s).unwrap() > c);
    }

    #[test]
    fn resolvent_identity(p in params(false), s in 0.1..5.0f64, re in 0.0..4.0f64, im in 0.1..3.0f64) {
        let z = Complex64::new(re, im);
        let r = resolvent_transform(&p, s, z).unwrap();
        let k = p.laplace_exponent(z).unwrap();
        let lhs = r * (p.lambda() - z) * (k - s);
        prop_assert!((lhs - 1.0).norm() <= 1e-12 * 10.0, "{lhs}");
    }

    #[test]
    fn density_positive_nondecreasing_and_exact(p in params(true), s in 0.2..4.0f64) {
        let ctx = ResolventContext::new(&p, s).unwrap();
        let exact = build_partial_fractions(&p, s).unwrap();
        let mut prev = 0.0;
        for i in 0..12 {
            let x = 0.4 * i as f64;
            let r = ctx.density(x).unwrap();
            prop_assert!(r > 0.0 && r >= prev * (1.0 - 1e-12));
            let e = exact.density(x);
            prop_assert!((r - e).abs() <= 1e-6 * e.abs().max(1e-300));
            prev = r;
        }
    }

    #[test]
    fn exit_closure_and_monotonicity(p in params(false), b in 0.5..4.0f64, frac in 0.0..1.0f64, s in 0.2..3.0f64) {
        let q = ExitQuery::new(b, frac * b).unwrap();
        let lo = exit::evaluate(&q, &ResolventContext::new(&p, s).unwrap()).unwrap();
        let hi = exit::evaluate(&q, &ResolventContext::new(&p, 2.0 * s).unwrap()).unwrap();
        prop_assert!(lo.check_residual.abs() <= 1e-8);
        prop_assert!(lo.down > 0.0 && lo.up > 0.0 && lo.down + lo.up < 1.0);
        prop_assert!(lo.survival_lt > 0.0 && lo.survival_lt < 1.0 / s);
        prop_assert!(hi.down < lo.down && hi.up < lo.up && hi.survival_lt < lo.survival_lt);
    }

    #[test]
    fn entry_in_unit_interval(p in params(true), b in 0.5..3.0f64, v in 0.0..1.0f64, s in 0.3..3.0f64) {
        let ctx = ResolventContext::new(&p, s).unwrap();
        let ctx2 = ResolventContext::new(&p, 2.0 * s).unwrap();
        let f = entry_factors(&ctx, b).unwrap();
        let f2 = entry_factors(&ctx2, b).unwrap();
        for start in [EntryStart::Below(v * 2.0 + 0.01), EntryStart::Above(v * 2.0 + 0.01), EntryStart::Inside(v * b)] {
            let q = EntryQuery::new(b, start, 0.0).unwrap();
            let t = entry_transform(&q, &f).unwrap();
            let t2 = entry_transform(&q, &f2).unwrap();
            prop_assert!(t > 0.0 && t < 1.0, "{start:?}: {t}");
            prop_assert!(t2 < t);
        }
    }
}
