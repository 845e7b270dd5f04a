//! Path skeletons and the additive functionals evaluated on them: winding
//! angle, upcrossing counts, the Lamperti clocks, hitting and last-exit times.
//!
//! A skeleton holds exact values of the process at a strictly increasing set
//! of times. Between grid points nothing is known; functionals are read off
//! consecutive pairs of points, so crossings or windings completed within a
//! single step are not seen. Experiments control this with mesh refinement.

use std::fmt::Debug;
use std::io::{BufRead, Write};
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::StableParams;
use crate::sampler::{sample_brownian_planar, sample_stable_1d, sample_stable_planar, RngStream};

/// State space of a skeleton: the real line or the plane.
pub trait PathValue: Copy + Debug + Send + Sync + PartialEq {
    const CSV_HEADER: &'static str;
    fn modulus(&self) -> f64;
    fn is_finite_value(&self) -> bool;
    fn csv_fields(&self) -> String;
    fn parse_fields(fields: &[&str]) -> Result<Self>;
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Io(format!("bad number `{s}`: {e}")))
}

impl PathValue for f64 {
    const CSV_HEADER: &'static str = "t,x";
    fn modulus(&self) -> f64 {
        self.abs()
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
    fn csv_fields(&self) -> String {
        format!("{self:.16e}")
    }
    fn parse_fields(fields: &[&str]) -> Result<Self> {
        match fields {
            [x] => parse_f64(x),
            _ => Err(Error::Io(format!("expected 1 value column, got {}", fields.len()))),
        }
    }
}

impl PathValue for Complex64 {
    const CSV_HEADER: &'static str = "t,re,im";
    fn modulus(&self) -> f64 {
        self.norm()
    }
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn csv_fields(&self) -> String {
        format!("{:.16e},{:.16e}", self.re, self.im)
    }
    fn parse_fields(fields: &[&str]) -> Result<Self> {
        match fields {
            [re, im] => Ok(Complex64::new(parse_f64(re)?, parse_f64(im)?)),
            _ => Err(Error::Io(format!("expected 2 value columns, got {}", fields.len()))),
        }
    }
}

/// Discretised càdlàg path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSkeleton<T> {
    times: Vec<f64>,
    values: Vec<T>,
    /// The path stands in for one issued from the origin.
    pub origin_flag: bool,
}

impl<T: PathValue> PathSkeleton<T> {
    pub fn new(times: Vec<f64>, values: Vec<T>, origin_flag: bool) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Grid(format!(
                "{} times for {} values",
                times.len(),
                values.len()
            )));
        }
        if !times[0].is_finite() || times[0] < 0.0 {
            return Err(Error::Grid(format!("start time {} must be >= 0", times[0])));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::Grid(format!("times not strictly increasing at index {}", k + 1)));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite_value()) {
            return Err(Error::Grid(format!("non-finite value at index {k}")));
        }
        Ok(Self {
            times,
            values,
            origin_flag,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    /// Indices of grid points with `a <= t <= b`.
    pub fn window(&self, a: f64, b: f64) -> Range<usize> {
        let lo = self.times.partition_point(|&t| t < a);
        let hi = self.times.partition_point(|&t| t <= b);
        lo..hi.max(lo)
    }

    /// Value of the piecewise-constant càdlàg interpolation at time `t`.
    pub fn value_at(&self, t: f64) -> Option<T> {
        let k = self.times.partition_point(|&s| s <= t);
        (k > 0).then(|| self.values[k - 1])
    }

    fn check_modulus(&self, range: Range<usize>) -> Result<()> {
        for k in range {
            if self.values[k].modulus() == 0.0 {
                return Err(Error::Origin { index: k });
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", T::CSV_HEADER)?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t:.16e},{}", v.csv_fields())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Io("empty CSV".into()))??;
        if header.trim() != T::CSV_HEADER {
            return Err(Error::Io(format!(
                "expected header `{}`, found `{}`",
                T::CSV_HEADER,
                header.trim()
            )));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            times.push(parse_f64(fields[0])?);
            values.push(T::parse_fields(&fields[1..])?);
        }
        Self::new(times, values, false)
    }
}

/// Time grid specifications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimeGrid {
    Explicit(Vec<f64>),
    /// `steps + 1` equally spaced points on `[start, end]`.
    Uniform { start: f64, end: f64, steps: usize },
    /// `t_min · 10^{k/per_decade}` up to `t_max` (the last point is `t_max`),
    /// optionally preceded by `t = 0`.
    Geometric {
        t_min: f64,
        t_max: f64,
        per_decade: usize,
        include_zero: bool,
    },
}

impl TimeGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        match self {
            TimeGrid::Explicit(v) => {
                if v.is_empty() || v.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Grid("explicit grid must be strictly increasing".into()));
                }
                Ok(v.clone())
            }
            &TimeGrid::Uniform { start, end, steps } => {
                if steps == 0 || !(end > start) || start < 0.0 {
                    return Err(Error::Grid(format!("uniform {start}:{end}:{steps}")));
                }
                let h = (end - start) / steps as f64;
                Ok((0..=steps)
                    .map(|k| if k == steps { end } else { start + k as f64 * h })
                    .collect())
            }
            &TimeGrid::Geometric {
                t_min,
                t_max,
                per_decade,
                include_zero,
            } => {
                if per_decade == 0 || !(t_min > 0.0) || !(t_max > t_min) {
                    return Err(Error::Grid(format!("geometric {t_min}:{t_max}:{per_decade}")));
                }
                let k_max = geometric_steps(t_min, t_max, per_decade);
                let mut pts = Vec::with_capacity(k_max + 2);
                if include_zero {
                    pts.push(0.0);
                }
                for k in 0..k_max {
                    pts.push(t_min * 10f64.powf(k as f64 / per_decade as f64));
                }
                pts.push(t_max);
                Ok(pts)
            }
        }
    }

    /// Parse `uniform:START:END:STEPS` or `geometric:TMIN:TMAX:PER_DECADE`
    /// (the geometric form is preceded by `t = 0`).
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> { parse_f64(parts[i]) };
        match parts.as_slice() {
            ["uniform", _, _, n] => Ok(TimeGrid::Uniform {
                start: num(1)?,
                end: num(2)?,
                steps: n.parse().map_err(|_| Error::Grid(format!("bad step count `{n}`")))?,
            }),
            ["geometric", _, _, n] => Ok(TimeGrid::Geometric {
                t_min: num(1)?,
                t_max: num(2)?,
                per_decade: n
                    .parse()
                    .map_err(|_| Error::Grid(format!("bad points per decade `{n}`")))?,
                include_zero: true,
            }),
            _ => Err(Error::Grid(format!("cannot parse grid `{s}`"))),
        }
    }
}

/// Number of geometric steps of ratio `10^{1/per_decade}` needed to cover
/// `[t_min, t_max]`.
fn geometric_steps(t_min: f64, t_max: f64, per_decade: usize) -> usize {
    let exact = per_decade as f64 * (t_max / t_min).log10();
    (exact - 1e-9).ceil().max(1.0) as usize
}

/// A law of independent stationary increments that can be sampled over any
/// time step.
pub trait IncrementLaw: Sync {
    type Value: PathValue;
    /// Self-similarity index: increments over `dt` scale like `dt^{1/index}`.
    fn index(&self) -> f64;
    fn sample(&self, rng: &mut RngStream, dt: f64) -> Self::Value;
}

/// One-dimensional stable process.
#[derive(Debug, Clone, Copy)]
pub struct Stable1d(pub StableParams);

impl IncrementLaw for Stable1d {
    type Value = f64;
    fn index(&self) -> f64 {
        self.0.alpha
    }
    fn sample(&self, rng: &mut RngStream, dt: f64) -> f64 {
        sample_stable_1d(rng, self.0, dt)
    }
}

/// Isotropic planar stable process.
#[derive(Debug, Clone, Copy)]
pub struct StablePlanar(pub f64);

impl IncrementLaw for StablePlanar {
    type Value = Complex64;
    fn index(&self) -> f64 {
        self.0
    }
    fn sample(&self, rng: &mut RngStream, dt: f64) -> Complex64 {
        sample_stable_planar(rng, self.0, dt)
    }
}

/// Standard planar Brownian motion.
#[derive(Debug, Clone, Copy)]
pub struct BrownianPlanar;

impl IncrementLaw for BrownianPlanar {
    type Value = Complex64;
    fn index(&self) -> f64 {
        2.0
    }
    fn sample(&self, rng: &mut RngStream, dt: f64) -> Complex64 {
        sample_brownian_planar(rng, dt)
    }
}

/// Exact increments between consecutive points of `grid`, starting at
/// `start` at time `grid[0]`.
pub fn simulate_skeleton<L: IncrementLaw>(
    rng: &mut RngStream,
    law: &L,
    grid: &[f64],
    start: L::Value,
    origin_flag: bool,
) -> Result<PathSkeleton<L::Value>>
where
    L::Value: std::ops::Add<Output = L::Value>,
{
    if grid.is_empty() {
        return Err(Error::Grid("empty grid".into()));
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut x = start;
    values.push(x);
    for w in grid.windows(2) {
        x = x + law.sample(rng, w[1] - w[0]);
        values.push(x);
    }
    PathSkeleton::new(grid.to_vec(), values, origin_flag)
}

/// Why an adaptive simulation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    Condition,
    Horizon,
    StepLimit,
}

/// State-dependent stepping: from state `x` the next step has length
/// `kappa · scale(x)^index`, so that with `scale = |x|` every step advances the
/// Lamperti clock `∫ |X_s|^{-index} ds` by `kappa`. Because each step length is
/// a function of the current state only, the values at the grid times are
/// exact draws of the process at those (stopping) times.
pub struct AdaptiveStepper<F> {
    pub kappa: f64,
    pub scale: F,
    /// Largest allowed step, bounding the step when `scale` is large.
    pub max_step: f64,
    /// Smallest allowed step; a state with a smaller natural step is treated
    /// as having reached the origin and stops the simulation.
    pub min_step: f64,
    pub max_steps: usize,
}

impl AdaptiveStepper<fn(&f64) -> f64> {
    pub fn lamperti_1d(kappa: f64) -> Self {
        AdaptiveStepper {
            kappa,
            scale: |x: &f64| x.abs(),
            max_step: f64::INFINITY,
            min_step: 1e-280,
            max_steps: 50_000_000,
        }
    }
}

impl AdaptiveStepper<fn(&Complex64) -> f64> {
    pub fn lamperti_planar(kappa: f64) -> Self {
        AdaptiveStepper {
            kappa,
            scale: |x: &Complex64| x.norm(),
            max_step: f64::INFINITY,
            min_step: 1e-280,
            max_steps: 50_000_000,
        }
    }
}

/// Adaptive simulation on `[t0, horizon]`. `stop(t, x)` is evaluated at every
/// grid point after the first; returning `true` ends the path there.
pub fn simulate_adaptive<L, F, S>(
    rng: &mut RngStream,
    law: &L,
    stepper: &AdaptiveStepper<F>,
    t0: f64,
    start: L::Value,
    horizon: f64,
    mut stop: S,
    origin_flag: bool,
) -> (PathSkeleton<L::Value>, StopReason)
where
    L: IncrementLaw,
    L::Value: std::ops::Add<Output = L::Value>,
    F: Fn(&L::Value) -> f64,
    S: FnMut(f64, &L::Value) -> bool,
{
    let alpha = law.index();
    let mut times = vec![t0];
    let mut values = vec![start];
    let (mut t, mut x) = (t0, start);
    let reason = loop {
        if times.len() > stepper.max_steps {
            break StopReason::StepLimit;
        }
        let mut dt = (stepper.kappa * (stepper.scale)(&x).powf(alpha)).min(stepper.max_step);
        if !(dt >= stepper.min_step) {
            break StopReason::Condition;
        }
        let last = t + dt >= horizon;
        if last {
            dt = horizon - t;
        }
        x = x + law.sample(rng, dt);
        t = if last { horizon } else { t + dt };
        let prev = *times.last().unwrap();
        if !(t > prev) {
            // Step below the resolution of the absolute time: keep the point
            // (it may carry a sign change) one ulp later.
            t = f64::from_bits(prev.to_bits() + 1);
        }
        let last = last || t >= horizon;
        times.push(t);
        values.push(x);
        if stop(t, &x) {
            break StopReason::Condition;
        }
        if last {
            break StopReason::Horizon;
        }
    };
    let path = PathSkeleton {
        times,
        values,
        origin_flag,
    };
    (path, reason)
}

/// Adaptive simulation from `start` until `stop(x)` holds, returned as seen
/// backwards from the stopping time `τ`: the skeleton has times `τ - t_k`
/// (increasing) and values `X_{t_k}`, starting with the stopping value at time
/// `0`. Times to go are summed from the stopping end, so they stay accurate
/// near `τ` however large `τ` itself is.
pub fn simulate_to_stop_reversed<L, F, S>(
    rng: &mut RngStream,
    law: &L,
    stepper: &AdaptiveStepper<F>,
    start: L::Value,
    mut stop: S,
) -> (PathSkeleton<L::Value>, StopReason)
where
    L: IncrementLaw,
    L::Value: std::ops::Add<Output = L::Value>,
    F: Fn(&L::Value) -> f64,
    S: FnMut(&L::Value) -> bool,
{
    let alpha = law.index();
    let mut steps = Vec::new();
    let mut values = vec![start];
    let mut x = start;
    let reason = loop {
        if values.len() > stepper.max_steps {
            break StopReason::StepLimit;
        }
        let dt = (stepper.kappa * (stepper.scale)(&x).powf(alpha)).min(stepper.max_step);
        if !(dt >= stepper.min_step) {
            break StopReason::Condition;
        }
        x = x + law.sample(rng, dt);
        steps.push(dt);
        values.push(x);
        if stop(&x) {
            break StopReason::Condition;
        }
    };
    let mut times = Vec::with_capacity(values.len());
    let mut s = 0.0f64;
    times.push(s);
    for &dt in steps.iter().rev() {
        let next = s + dt;
        // Far from the stopping time the sum may stop resolving the step.
        s = if next > s { next } else { f64::from_bits(s.to_bits() + 1) };
        times.push(s);
    }
    values.reverse();
    let path = PathSkeleton {
        times,
        values,
        origin_flag: false,
    };
    (path, reason)
}

/// Winding angle over the grid points in `[a, b]`: the sum over consecutive
/// points of the principal argument of `X_{k+1} / X_k`, each in `(-π, π]`.
pub fn winding_angle(path: &PathSkeleton<Complex64>, a: f64, b: f64) -> Result<f64> {
    let w = path.window(a, b);
    path.check_modulus(w.clone())?;
    let v = path.values();
    Ok(w.clone()
        .zip(w.skip(1))
        .map(|(i, j)| (v[j] * v[i].conj()).arg())
        .sum())
}

/// Cumulative winding from the first grid point, aligned with the grid.
pub fn cumulative_winding(path: &PathSkeleton<Complex64>) -> Result<Vec<f64>> {
    path.check_modulus(0..path.len())?;
    let v = path.values();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(v.len());
    out.push(0.0);
    for k in 1..v.len() {
        acc += (v[k] * v[k - 1].conj()).arg();
        out.push(acc);
    }
    Ok(out)
}

/// Upcrossings (or downcrossings) of zero observed in a time window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpcrossingRecord {
    pub count: usize,
    pub crossing_times: Vec<f64>,
    pub window: (f64, f64),
}

fn crossings(path: &PathSkeleton<f64>, a: f64, b: f64, up: bool) -> UpcrossingRecord {
    // A value of exactly 0 counts as positive.
    let w = path.window(a, b);
    let (t, v) = (path.times(), path.values());
    let crossing_times: Vec<f64> = w
        .clone()
        .zip(w.skip(1))
        .filter(|&(i, j)| {
            if up {
                v[i] < 0.0 && v[j] >= 0.0
            } else {
                v[i] >= 0.0 && v[j] < 0.0
            }
        })
        .map(|(_, j)| t[j])
        .collect();
    UpcrossingRecord {
        count: crossing_times.len(),
        crossing_times,
        window: (a, b),
    }
}

/// Sign changes from negative to non-negative between consecutive grid points
/// in `[a, b]`.
pub fn count_upcrossings(path: &PathSkeleton<f64>, a: f64, b: f64) -> UpcrossingRecord {
    crossings(path, a, b, true)
}

pub fn count_downcrossings(path: &PathSkeleton<f64>, a: f64, b: f64) -> UpcrossingRecord {
    crossings(path, a, b, false)
}

/// The three time changes: `H` (planar, `|X|^{-α}`), `ς` (one-dimensional,
/// `|X|^{-α}`) and `η` (`|X|^{-2α}`, driving the Kelvin-inverted process).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClockKind {
    H,
    Varsigma,
    Eta,
}

impl ClockKind {
    pub fn exponent(self, alpha: f64) -> f64 {
        match self {
            ClockKind::H | ClockKind::Varsigma => -alpha,
            ClockKind::Eta => -2.0 * alpha,
        }
    }
}

/// Left-endpoint Riemann sums of `|X_s|^{exponent}` along a skeleton.
#[derive(Debug, Clone)]
pub struct ClockSeries<'a, T> {
    pub base: &'a PathSkeleton<T>,
    pub kind: ClockKind,
    pub alpha: f64,
    pub cumulative: Vec<f64>,
}

impl<T: PathValue> ClockSeries<'_, T> {
    pub fn total(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    /// Clock value at the last grid time `<= t`.
    pub fn at_time(&self, t: f64) -> f64 {
        let k = self.base.times().partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }
}

pub fn clock<T: PathValue>(
    path: &PathSkeleton<T>,
    kind: ClockKind,
    alpha: f64,
) -> Result<ClockSeries<'_, T>> {
    let e = kind.exponent(alpha);
    let (t, v) = (path.times(), path.values());
    let mut cumulative = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for k in 0..t.len() - 1 {
        let r = v[k].modulus();
        if r == 0.0 {
            return Err(Error::Origin { index: k });
        }
        acc += r.powf(e) * (t[k + 1] - t[k]);
        cumulative.push(acc);
    }
    if v[t.len() - 1].modulus() == 0.0 {
        return Err(Error::Origin { index: t.len() - 1 });
    }
    Ok(ClockSeries {
        base: path,
        kind,
        alpha,
        cumulative,
    })
}

/// Index of the first grid point at which the cumulative clock reaches `s`.
pub fn invert_clock_index<T: PathValue>(clock: &ClockSeries<'_, T>, s: f64) -> Result<usize> {
    let total = clock.total();
    if s > total || s.is_nan() {
        return Err(Error::Range { level: s, total });
    }
    Ok(clock.cumulative.partition_point(|&c| c < s))
}

/// Generalised inverse of the clock on the skeleton: the first grid time at
/// which the cumulative clock reaches `s`.
pub fn invert_clock<T: PathValue>(clock: &ClockSeries<'_, T>, s: f64) -> Result<f64> {
    let k = invert_clock_index(clock, s)?;
    Ok(clock.base.times()[k])
}

/// First grid time with `|X| < radius`.
pub fn first_hit_interval<T: PathValue>(path: &PathSkeleton<T>, radius: f64) -> Option<f64> {
    path.values()
        .iter()
        .position(|v| v.modulus() < radius)
        .map(|k| path.times()[k])
}

/// Last grid time with `|X| <= radius`.
pub fn last_exit<T: PathValue>(path: &PathSkeleton<T>, radius: f64) -> Option<f64> {
    path.values()
        .iter()
        .rposition(|v| v.modulus() <= radius)
        .map(|k| path.times()[k])
}
