//! Closed forms against simulation, all at 3 standard errors with N = 10^5.

use cpexit::model::{JumpLaw, ProcessParams};
use cpexit::one_boundary::{down_transform, infimum_atom, supremum_atom, up_transform};
use cpexit::resolvent::ResolventContext;
use cpexit::simulate::{
    discount_horizon, estimate, estimate_vector, sample_down_crossing, sample_exit, sample_killed_extrema,
    sample_up_crossing, ExitSide, SimConfig,
};
use cpexit::tolerances::MAX_JUMPS;
use cpexit::validation::reference_params;

const K: f64 = 3.0;

fn cfg(seed: u64) -> SimConfig {
    SimConfig::new(100_000, seed).unwrap()
}

fn erlang() -> ProcessParams {
    ProcessParams::new(1.5, 0.4, 2.0, JumpLaw::Erlang { k: 2, mu: 3.0 }).unwrap()
}

fn dirac() -> ProcessParams {
    ProcessParams::new(2.0, 0.5, 1.0, JumpLaw::Dirac { d: 0.8 }).unwrap()
}

#[test]
fn downward_passage_factorizes() {
    let p = reference_params();
    let ctx = ResolventContext::new(&p, 1.0).unwrap();
    let exact = down_transform(&ctx, 1.0).unwrap();
    assert!((exact.transform_value - (1.0 - 1.0 / 3f64.sqrt()) * (-1.0 / 3f64.sqrt()).exp()).abs() < 1e-12);
    let horizon = discount_horizon(1.0);
    let est = estimate_vector(&cfg(101), 2, |rng| {
        let c = sample_down_crossing(&p, 1.0, MAX_JUMPS, horizon, rng)?;
        Ok(c.map_or(vec![0.0, 0.0], |c| vec![(-c.time).exp(), (-c.time - c.overshoot).exp()]))
    })
    .unwrap();
    assert!(est[0].covers(exact.joint(0.0), K), "{:?} vs {}", est[0], exact.joint(0.0));
    assert!(est[1].covers(exact.joint(1.0), K), "{:?} vs {}", est[1], exact.joint(1.0));
}

#[test]
fn upward_passage_at_five_points() {
    let cases = [
        (reference_params(), 0.5, 1.0),
        (reference_params(), 2.0, 0.5),
        (erlang(), 1.0, 1.0),
        (erlang(), 0.3, 2.0),
        (dirac(), 1.7, 1.0),
    ];
    for (i, (p, x, s)) in cases.into_iter().enumerate() {
        let exact = up_transform(&ResolventContext::new(&p, s).unwrap(), x).unwrap();
        let horizon = discount_horizon(s);
        let est = estimate(&cfg(200 + i as u64), |rng| {
            let c = sample_up_crossing(&p, x, MAX_JUMPS, horizon, rng)?;
            Ok(c.map_or(0.0, |c| (-s * c.time).exp()))
        })
        .unwrap();
        assert!(est.covers(exact, K), "case {i}: {est:?} vs {exact}");
    }
}

#[test]
fn extrema_atoms() {
    for (i, p) in [reference_params(), erlang(), dirac()].into_iter().enumerate() {
        let s = 0.7;
        let ctx = ResolventContext::new(&p, s).unwrap();
        let est = estimate_vector(&cfg(300 + i as u64), 2, |rng| {
            let e = sample_killed_extrema(&p, s, MAX_JUMPS, rng)?;
            Ok(vec![f64::from(u8::from(e.sup == 0.0)), f64::from(u8::from(e.inf == 0.0))])
        })
        .unwrap();
        assert!(est[0].covers(supremum_atom(&ctx), K), "sup {i}: {:?}", est[0]);
        assert!(est[1].covers(infimum_atom(&ctx), K), "inf {i}: {:?}", est[1]);
    }
}

#[test]
fn exit_sides_are_exhaustive() {
    let p = reference_params();
    let est = estimate_vector(&cfg(400), 2, |rng| {
        let e = sample_exit(&p, 2.0, 1.0, MAX_JUMPS, rng)?;
        Ok(match e.side {
            ExitSide::Down => vec![1.0, 0.0],
            ExitSide::Up => vec![0.0, 1.0],
        })
    })
    .unwrap();
    assert_eq!(est[0].n, 100_000);
    assert!((est[0].mean + est[1].mean - 1.0).abs() < 1e-12);
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let p = erlang();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                estimate(&SimConfig::new(30_000, 9).unwrap(), |rng| {
                    let e = sample_exit(&p, 1.5, 0.5, MAX_JUMPS, rng)?;
                    Ok((-e.chi).exp())
                })
                .unwrap()
            })
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
}
