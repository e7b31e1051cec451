//! One function per subcommand. Grid points are evaluated on the rayon pool
//! and collected in grid order.

use anyhow::{anyhow, bail, Context, Result};
use cpexit::entry::{self, EntryQuery, EntryStart};
use cpexit::exit::{self, ExitQuery};
use cpexit::one_boundary::{down_transform, up_overshoot_lt, up_transform};
use cpexit::resolvent::ResolventContext;
use cpexit::simulate::{
    discount_horizon, estimate, sample_down_crossing, sample_entry, sample_exit, sample_killed_extrema,
    sample_up_crossing, ExitSide, MCEstimate,
};
use cpexit::validation::{reference_params, run_suite, SuiteConfig};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Functional, JobConfig};
use crate::output::{Artifact, Cell, Table};

fn context(cfg: &JobConfig, s: f64) -> Result<ResolventContext> {
    ResolventContext::with_options(&cfg.params, s, cfg.method, cfg.tolerances)
        .with_context(|| format!("building the resolvent at s = {s}"))
}

fn contexts(cfg: &JobConfig, s: &[f64]) -> Result<Vec<ResolventContext>> {
    s.par_iter().map(|&s| context(cfg, s)).collect()
}

/// `(x, R_x(s), S_x(s))` over the `s` and `x` grids.
pub fn resolvent(cfg: &JobConfig) -> Result<Artifact> {
    let s = cfg.grid.get("s")?;
    let x = cfg.grid.get("x")?;
    let ctxs = contexts(cfg, &s)?;
    let points: Vec<(usize, f64)> = (0..s.len()).flat_map(|i| x.iter().map(move |&x| (i, x))).collect();
    let rows = points
        .par_iter()
        .map(|&(i, x)| {
            let ctx = &ctxs[i];
            let r = ctx.density(x)?;
            let integral = ctx.density_integral(x)?;
            Ok(vec![ctx.s().into(), x.into(), r.into(), integral.into()])
        })
        .map(|r: cpexit::Result<Vec<Cell>>| r)
        .collect::<Vec<_>>();
    Ok(Artifact::Table(Table {
        columns: vec!["s", "x", "R_x", "S_x"],
        rows: with_points(rows, &points, |&(i, x)| format!("s = {}, x = {x}", s[i]))?,
    }))
}

fn with_points<P>(rows: Vec<cpexit::Result<Vec<Cell>>>, points: &[P], describe: impl Fn(&P) -> String) -> Result<Vec<Vec<Cell>>> {
    rows.into_iter()
        .zip(points)
        .map(|(r, p)| r.map_err(|e| anyhow!("at {}: {e}", describe(p))))
        .collect()
}

/// One-boundary transforms over `s`, `x` and `z` (default `z = 0`).
pub fn one_boundary(cfg: &JobConfig) -> Result<Artifact> {
    let s = cfg.grid.get("s")?;
    let x = cfg.grid.get("x")?;
    let z = if cfg.grid.z.is_some() { cfg.grid.get("z")? } else { vec![0.0] };
    let ctxs = contexts(cfg, &s)?;
    let mut points = Vec::new();
    for i in 0..s.len() {
        for &xv in &x {
            for &zv in &z {
                points.push((i, xv, zv));
            }
        }
    }
    let rows = points
        .par_iter()
        .map(|&(i, x, z)| {
            let ctx = &ctxs[i];
            let down = down_transform(ctx, x)?;
            let up = up_transform(ctx, x)?;
            let up_joint = up_overshoot_lt(ctx, x, Complex64::new(z, 0.0))?.re;
            Ok(vec![
                ctx.s().into(),
                x.into(),
                z.into(),
                down.transform_value.into(),
                down.joint(z).into(),
                up.into(),
                up_joint.into(),
            ])
        })
        .collect();
    Ok(Artifact::Table(Table {
        columns: vec!["s", "x", "z", "down", "down_joint", "up", "up_joint"],
        rows: with_points(rows, &points, |&(i, x, z)| format!("s = {}, x = {x}, z = {z}", s[i]))?,
    }))
}

fn exit_points(cfg: &JobConfig) -> Result<Vec<(f64, f64)>> {
    let b = cfg.grid.get("B")?;
    let y = cfg.grid.get("y")?;
    let mut out = Vec::new();
    for &bv in &b {
        for &yv in &y {
            ExitQuery::new(bv, yv).with_context(|| format!("grid point B = {bv}, y = {yv}"))?;
            out.push((bv, yv));
        }
    }
    Ok(out)
}

/// Exit transforms over `B`, `y` and `s`.
pub fn exit(cfg: &JobConfig) -> Result<Artifact> {
    let s = cfg.grid.get("s")?;
    let by = exit_points(cfg)?;
    let ctxs = contexts(cfg, &s)?;
    let points: Vec<(f64, f64, usize)> = by
        .iter()
        .flat_map(|&(b, y)| (0..s.len()).map(move |i| (b, y, i)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(b, y, i)| {
            let r = exit::evaluate(&ExitQuery::new(b, y)?, &ctxs[i])?;
            Ok(vec![
                b.into(),
                y.into(),
                r.s.into(),
                r.down.into(),
                r.up.into(),
                r.survival_lt.into(),
                r.k_s.into(),
                r.check_residual.into(),
            ])
        })
        .collect();
    Ok(Artifact::Table(Table {
        columns: vec!["B", "y", "s", "down", "up", "survival_lt", "K_s", "check_residual"],
        rows: with_points(rows, &points, |&(b, y, i)| format!("B = {b}, y = {y}, s = {}", s[i]))?,
    }))
}

/// Entry transforms over `B`, `start`, `s` and `z`.
pub fn entry(cfg: &JobConfig) -> Result<Artifact> {
    let b = cfg.grid.get("B")?;
    let starts = cfg.grid.starts()?;
    let s = cfg.grid.get("s")?;
    let z = cfg.grid.get("z")?;
    for &bv in &b {
        for &st in &starts {
            for &zv in &z {
                EntryQuery::new(bv, st, zv).with_context(|| format!("grid point B = {bv}, start = {st:?}, z = {zv}"))?;
            }
        }
    }
    let ctxs = contexts(cfg, &s)?;
    let mut rows = Vec::new();
    for &bv in &b {
        let factors: Vec<entry::EntryFactors> = ctxs
            .par_iter()
            .map(|ctx| entry::entry_factors(ctx, bv).with_context(|| format!("entry factors at B = {bv}, s = {}", ctx.s())))
            .collect::<Result<_>>()?;
        let mut points: Vec<(EntryStart, usize, f64)> = Vec::new();
        for &st in &starts {
            for i in 0..s.len() {
                for &zv in &z {
                    points.push((st, i, zv));
                }
            }
        }
        let part = points
            .par_iter()
            .map(|&(st, i, zv)| {
                let r = entry::evaluate(&EntryQuery::new(bv, st, zv)?, &factors[i])?;
                Ok(vec![
                    r.b.into(),
                    r.start_kind.into(),
                    r.start_value.into(),
                    r.s.into(),
                    r.z.into(),
                    r.transform.into(),
                    r.mass_at_z0.into(),
                ])
            })
            .collect();
        rows.extend(with_points(part, &points, |&(st, i, zv)| {
            format!("B = {bv}, start = {} {}, s = {}, z = {zv}", st.kind(), st.value(), s[i])
        })?);
    }
    Ok(Artifact::Table(Table {
        columns: vec!["B", "start_kind", "start_value", "s", "z", "transform", "mass_at_z0"],
        rows,
    }))
}

/// `P[chi(y) > t]` over `B`, `y` and `t`.
pub fn survival(cfg: &JobConfig) -> Result<Artifact> {
    let t = cfg.grid.get("t")?;
    let by = exit_points(cfg)?;
    let base = context(cfg, 1.0)?;
    let points: Vec<(f64, f64, f64)> = by.iter().flat_map(|&(b, y)| t.iter().map(move |&t| (b, y, t))).collect();
    let rows = points
        .iter()
        .map(|&(b, y, t)| {
            let p = exit::survival_time_domain(&ExitQuery::new(b, y)?, &base, t)?;
            Ok(vec![b.into(), y.into(), t.into(), p.into()])
        })
        .collect();
    Ok(Artifact::Table(Table {
        columns: vec!["B", "y", "t", "survival"],
        rows: with_points(rows, &points, |&(b, y, t)| format!("B = {b}, y = {y}, t = {t}"))?,
    }))
}

fn simulate_one(cfg: &JobConfig, f: &Functional) -> cpexit::Result<MCEstimate> {
    let params = &cfg.params;
    let sim = cfg.sim.config();
    let max = sim.max_jumps;
    match *f {
        Functional::ExitDown { b, y, s } => estimate(&sim, |rng| {
            let e = sample_exit(params, b, y, max, rng)?;
            Ok(if e.side == ExitSide::Down { (-s * e.chi).exp() } else { 0.0 })
        }),
        Functional::ExitUp { b, y, s, z } => estimate(&sim, |rng| {
            let e = sample_exit(params, b, y, max, rng)?;
            Ok(if e.side == ExitSide::Up { (-s * e.chi - z * e.overshoot).exp() } else { 0.0 })
        }),
        Functional::Survival { b, y, t } => estimate(&sim, |rng| {
            let e = sample_exit(params, b, y, max, rng)?;
            Ok(if e.chi > t { 1.0 } else { 0.0 })
        }),
        Functional::Entry { b, start, s, z } => {
            let horizon = discount_horizon(s);
            estimate(&sim, |rng| {
                Ok(sample_entry(params, b, start, max, horizon, rng)?
                    .map_or(0.0, |e| (-s * e.time - z * e.value).exp()))
            })
        }
        Functional::UpCrossing { x, s, z } => {
            let horizon = discount_horizon(s);
            estimate(&sim, |rng| {
                Ok(sample_up_crossing(params, x, max, horizon, rng)?
                    .map_or(0.0, |c| (-s * c.time - z * c.overshoot).exp()))
            })
        }
        Functional::DownCrossing { x, s, z } => {
            let horizon = discount_horizon(s);
            estimate(&sim, |rng| {
                Ok(sample_down_crossing(params, x, max, horizon, rng)?
                    .map_or(0.0, |c| (-s * c.time - z * c.overshoot).exp()))
            })
        }
        Functional::Resolvent { x, s } => {
            let c = cpexit::resolvent::root_c(params, s)?;
            let scale = c / (s * params.lambda());
            estimate(&sim, |rng| {
                let e = sample_killed_extrema(params, s, max, rng)?;
                Ok(if e.sup <= x { scale * (c * (x - e.sup)).exp() } else { 0.0 })
            })
        }
    }
}

/// Monte Carlo estimates of the configured functionals.
pub fn simulate(cfg: &JobConfig) -> Result<Artifact> {
    if cfg.sim.functionals.is_empty() {
        bail!("the simulate job needs at least one entry in `sim.functionals`");
    }
    let sim = cfg.sim.config();
    let mut data = Vec::new();
    for f in &cfg.sim.functionals {
        let est = simulate_one(cfg, f).map_err(|e| anyhow!("simulating {f:?}: {e}"))?;
        data.push(json!({
            "functional": f,
            "params": cfg.params,
            "estimate": est.mean,
            "stderr": est.stderr,
            "n": est.n,
            "seed": sim.seed,
        }));
    }
    Ok(Artifact::Report {
        data: Value::Array(data),
        extra: Value::Null,
    })
}

/// Runs the acceptance suite. Returns the report and whether everything passed.
pub fn validate(cfg: &JobConfig) -> Result<(Artifact, bool)> {
    if cfg.params != reference_params() {
        log::warn!("the validation suite always runs on its reference parameters; `params` is ignored");
    }
    let reports = run_suite(&SuiteConfig { sim: cfg.sim.config() });
    let mut data = Vec::new();
    let mut timing = serde_json::Map::new();
    for r in &reports {
        println!("{}", r.line());
        data.push(json!({
            "id": r.id,
            "title": r.title,
            "passed": r.checks.iter().all(|c| c.passed) && r.error.is_none() && !r.checks.is_empty(),
            "error": r.error,
            "checks": r.checks,
        }));
        timing.insert(
            format!("criterion_{}", r.id),
            json!({ "elapsed_s": r.elapsed_s, "time_limit_s": r.time_limit_s, "passed_overall": r.passed() }),
        );
    }
    let ok = reports.iter().all(|r| r.passed());
    Ok((
        Artifact::Report {
            data: Value::Array(data),
            extra: json!({ "timing": timing }),
        },
        ok,
    ))
}
