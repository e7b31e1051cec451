//! Exact event-driven Monte Carlo of the process.
//!
//! The process is pure jump: jumps arrive at rate `c`, a jump is `-Exp(lambda)`
//! with probability `a` and `+eta` otherwise. Paths are simulated jump by jump,
//! so every sample is exact in law and there is no time step.
//!
//! Replications are cut into fixed chunks of [`CHUNK`] paths. Chunk `i` draws
//! from `ChaCha8Rng` seeded with `seed` on stream `i`, so streams never overlap
//! and the estimate does not depend on the number of worker threads. Chunk sums
//! are Kahan-compensated and merged in chunk order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entry::EntryStart;
use crate::error::{invalid, Error, Result};
use crate::model::{exp_sample, ProcessParams};
use crate::tolerances::{DISCOUNT_HORIZON, MAX_JUMPS};

/// Paths per random stream.
pub const CHUNK: usize = 4096;

/// Replication settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Per-path jump cap; exceeding it is an error.
    pub max_jumps: usize,
    /// Each replication averages a path and its mirror with complemented uniforms.
    pub antithetic: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            seed: 20_240_601,
            max_jumps: MAX_JUMPS,
            antithetic: false,
        }
    }
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            n_paths,
            seed,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(invalid("n_paths must be >= 1"));
        }
        if self.max_jumps == 0 {
            return Err(invalid("max_jumps must be >= 1"));
        }
        Ok(())
    }
}

/// Boundary through which the interval is left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitSide {
    Up,
    Down,
}

/// First exit from `[0, B]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitSample {
    pub chi: f64,
    pub side: ExitSide,
    /// Distance beyond the crossed boundary.
    pub overshoot: f64,
    pub jumps: usize,
}

/// First entry into `[0, B]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntrySample {
    pub time: f64,
    /// Position on entry, in `[0, B]`.
    pub value: f64,
}

/// First passage above `x` or below `-x` for the process started at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingSample {
    pub time: f64,
    pub overshoot: f64,
}

/// Supremum and infimum of the process up to an independent `Exp(s)` time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KilledExtrema {
    pub sup: f64,
    pub inf: f64,
}

/// Mean, standard error and replication count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`.
    pub stderr: f64,
    pub n: usize,
}

impl MCEstimate {
    /// `(value - mean) / stderr`; 0 when both agree exactly.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = value - self.mean;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }

    /// `|value - mean| <= k stderr`.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (value - self.mean).abs() <= k * self.stderr
    }

    /// `mean -/+ k stderr`.
    pub fn band(&self, k: f64) -> (f64, f64) {
        (self.mean - k * self.stderr, self.mean + k * self.stderr)
    }
}

/// Stepper for the jump chain.
struct Walker<'p> {
    params: &'p ProcessParams,
    max_jumps: usize,
    time: f64,
    pos: f64,
    jumps: usize,
}

impl<'p> Walker<'p> {
    fn new(params: &'p ProcessParams, start: f64, max_jumps: usize) -> Self {
        Self {
            params,
            max_jumps,
            time: 0.0,
            pos: start,
            jumps: 0,
        }
    }

    fn step(&mut self, rng: &mut dyn RngCore) -> Result<()> {
        if self.jumps == self.max_jumps {
            return Err(Error::CapExceeded(self.max_jumps));
        }
        self.jumps += 1;
        self.time += exp_sample(rng, self.params.c());
        if rng.random::<f64>() < self.params.a() {
            self.pos -= exp_sample(rng, self.params.lambda());
        } else {
            self.pos += self.params.eta().sample(rng);
        }
        Ok(())
    }
}

fn check_interval(b: f64) -> Result<()> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!("B must be finite and > 0, got {b}")));
    }
    Ok(())
}

/// First exit from `[0, B]` started at `y`.
pub fn sample_exit(
    params: &ProcessParams,
    b: f64,
    y: f64,
    max_jumps: usize,
    rng: &mut dyn RngCore,
) -> Result<ExitSample> {
    check_interval(b)?;
    if !(0.0..=b).contains(&y) {
        return Err(invalid(format!("y must lie in [0, {b}], got {y}")));
    }
    let mut w = Walker::new(params, y, max_jumps);
    exit_from(&mut w, b, rng)
}

fn exit_from(w: &mut Walker, b: f64, rng: &mut dyn RngCore) -> Result<ExitSample> {
    loop {
        w.step(rng)?;
        if w.pos < 0.0 {
            return Ok(ExitSample {
                chi: w.time,
                side: ExitSide::Down,
                overshoot: -w.pos,
                jumps: w.jumps,
            });
        }
        if w.pos > b {
            return Ok(ExitSample {
                chi: w.time,
                side: ExitSide::Up,
                overshoot: w.pos - b,
                jumps: w.jumps,
            });
        }
    }
}

/// First entry into `[0, B]`; `None` if none happens before `horizon`.
///
/// For `Inside(y)` the path first leaves the interval and the entry is the
/// first return after that.
pub fn sample_entry(
    params: &ProcessParams,
    b: f64,
    start: EntryStart,
    max_jumps: usize,
    horizon: f64,
    rng: &mut dyn RngCore,
) -> Result<Option<EntrySample>> {
    check_interval(b)?;
    let mut w = match start {
        EntryStart::Above(v) | EntryStart::Below(v) if !(v > 0.0 && v.is_finite()) => {
            return Err(invalid(format!("start distance must be finite and > 0, got {v}")));
        }
        EntryStart::Above(v) => Walker::new(params, b + v, max_jumps),
        EntryStart::Below(v) => Walker::new(params, -v, max_jumps),
        EntryStart::Inside(y) => {
            if !(0.0..=b).contains(&y) {
                return Err(invalid(format!("y must lie in [0, {b}], got {y}")));
            }
            let mut w = Walker::new(params, y, max_jumps);
            exit_from(&mut w, b, rng)?;
            w
        }
    };
    loop {
        w.step(rng)?;
        if w.time > horizon {
            return Ok(None);
        }
        if (0.0..=b).contains(&w.pos) {
            return Ok(Some(EntrySample {
                time: w.time,
                value: w.pos,
            }));
        }
    }
}

/// First passage strictly above `x >= 0`; `None` if not before `horizon`.
pub fn sample_up_crossing(
    params: &ProcessParams,
    x: f64,
    max_jumps: usize,
    horizon: f64,
    rng: &mut dyn RngCore,
) -> Result<Option<CrossingSample>> {
    crossing(params, x, max_jumps, horizon, rng, |pos| pos - x)
}

/// First passage strictly below `-x`, `x >= 0`; `None` if not before `horizon`.
pub fn sample_down_crossing(
    params: &ProcessParams,
    x: f64,
    max_jumps: usize,
    horizon: f64,
    rng: &mut dyn RngCore,
) -> Result<Option<CrossingSample>> {
    crossing(params, x, max_jumps, horizon, rng, |pos| -x - pos)
}

fn crossing(
    params: &ProcessParams,
    x: f64,
    max_jumps: usize,
    horizon: f64,
    rng: &mut dyn RngCore,
    excess: impl Fn(f64) -> f64,
) -> Result<Option<CrossingSample>> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(invalid(format!("level must be finite and >= 0, got {x}")));
    }
    let mut w = Walker::new(params, 0.0, max_jumps);
    loop {
        w.step(rng)?;
        if w.time > horizon {
            return Ok(None);
        }
        let e = excess(w.pos);
        if e > 0.0 {
            return Ok(Some(CrossingSample {
                time: w.time,
                overshoot: e,
            }));
        }
    }
}

/// `sup` and `inf` of the process over `[0, nu_s]`, `nu_s ~ Exp(s)` independent.
pub fn sample_killed_extrema(
    params: &ProcessParams,
    s: f64,
    max_jumps: usize,
    rng: &mut dyn RngCore,
) -> Result<KilledExtrema> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("s must be finite and > 0, got {s}")));
    }
    let kill = exp_sample(rng, s);
    let mut w = Walker::new(params, 0.0, max_jumps);
    let (mut sup, mut inf) = (0.0f64, 0.0f64);
    loop {
        w.step(rng)?;
        if w.time > kill {
            return Ok(KilledExtrema { sup, inf });
        }
        sup = sup.max(w.pos);
        inf = inf.min(w.pos);
    }
}

/// Time after which `exp(-s t)` is negligible.
pub fn discount_horizon(s: f64) -> f64 {
    if s > 0.0 {
        DISCOUNT_HORIZON / s
    } else {
        f64::INFINITY
    }
}

/// Replays the bits of an inner generator complemented, so a uniform `u`
/// becomes `1 - u` up to the last bit.
struct Mirror<'r>(&'r mut ChaCha8Rng);

impl RngCore for Mirror<'_> {
    fn next_u32(&mut self) -> u32 {
        !self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        !self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst);
        for b in dst {
            *b = !*b;
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn merge(&mut self, other: &Kahan) {
        self.add(other.sum);
        self.add(-other.carry);
    }
}

#[derive(Debug, Clone, Default)]
struct Moments {
    first: Vec<Kahan>,
    second: Vec<Kahan>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Self {
            first: vec![Kahan::default(); dim],
            second: vec![Kahan::default(); dim],
        }
    }

    fn push(&mut self, values: &[f64]) {
        for ((f, s), &v) in self.first.iter_mut().zip(&mut self.second).zip(values) {
            f.add(v);
            s.add(v * v);
        }
    }

    fn merge(&mut self, other: &Moments) {
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            a.merge(b);
        }
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            a.merge(b);
        }
    }

    fn finish(&self, n: usize) -> Vec<MCEstimate> {
        let nf = n as f64;
        self.first
            .iter()
            .zip(&self.second)
            .map(|(f, s)| {
                let mean = f.sum / nf;
                let var = if n > 1 {
                    ((s.sum - nf * mean * mean) / (nf - 1.0)).max(0.0)
                } else {
                    0.0
                };
                MCEstimate {
                    mean,
                    stderr: (var / nf).sqrt(),
                    n,
                }
            })
            .collect()
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunk_len(cfg: &SimConfig, chunk: usize) -> usize {
    CHUNK.min(cfg.n_paths - chunk * CHUNK)
}

/// One replication of a vector functional, antithetic pairs averaged.
fn replicate<F>(cfg: &SimConfig, rng: &mut ChaCha8Rng, f: &F) -> Result<Vec<f64>>
where
    F: Fn(&mut dyn RngCore) -> Result<Vec<f64>>,
{
    if !cfg.antithetic {
        return f(rng);
    }
    let mut mirror = rng.clone();
    let first = f(rng)?;
    let second = f(&mut Mirror(&mut mirror))?;
    // Continue the stream past both paths.
    if mirror.get_word_pos() > rng.get_word_pos() {
        *rng = mirror;
    }
    Ok(first.iter().zip(&second).map(|(a, b)| 0.5 * (a + b)).collect())
}

/// Estimates `E[f]` for each component of a vector functional of one path.
pub fn estimate_vector<F>(cfg: &SimConfig, dim: usize, f: F) -> Result<Vec<MCEstimate>>
where
    F: Fn(&mut dyn RngCore) -> Result<Vec<f64>> + Sync,
{
    cfg.validate()?;
    let chunks = cfg.n_paths.div_ceil(CHUNK);
    let parts: Vec<Result<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = chunk_rng(cfg.seed, i);
            let mut m = Moments::new(dim);
            for _ in 0..chunk_len(cfg, i) {
                let values = replicate(cfg, &mut rng, &f)?;
                if values.len() != dim {
                    return Err(invalid(format!(
                        "functional returned {} values, expected {dim}",
                        values.len()
                    )));
                }
                m.push(&values);
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::new(dim);
    for part in parts {
        total.merge(&part?);
    }
    Ok(total.finish(cfg.n_paths))
}

/// Estimates `E[f]` for a scalar functional of one path.
pub fn estimate<F>(cfg: &SimConfig, f: F) -> Result<MCEstimate>
where
    F: Fn(&mut dyn RngCore) -> Result<f64> + Sync,
{
    let mut out = estimate_vector(cfg, 1, |rng| Ok(vec![f(rng)?]))?;
    Ok(out.remove(0))
}

/// Draws `n_paths` samples in stream order. Antithetic pairing is ignored.
pub fn collect<T, F>(cfg: &SimConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut dyn RngCore) -> Result<T> + Sync,
{
    cfg.validate()?;
    let chunks = cfg.n_paths.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<T>>> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = chunk_rng(cfg.seed, i);
            (0..chunk_len(cfg, i)).map(|_| f(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(cfg.n_paths);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}
