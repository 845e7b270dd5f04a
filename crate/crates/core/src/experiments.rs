//! Named, reproducible Monte Carlo experiments. Each one is a pure function of
//! its resolved configuration (seed included) and returns an
//! [`ExperimentReport`] with a computed error budget and a verdict.

use std::collections::BTreeMap;
use std::f64::consts::{LN_10, PI};
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::exponents::{
    entry_cdf, planar_clock_mean, renewal_rate, upcrossing_constant, ConstantValue, StableParams,
};
use crate::parallel::par_map;
use crate::path_engine::{
    clock, count_downcrossings, count_upcrossings, simulate_adaptive, simulate_to_stop_reversed,
    winding_angle, AdaptiveStepper, ClockKind, PathSkeleton, Stable1d, StablePlanar, StopReason,
};
use crate::sampler::{sample_stable_planar, RngStream};
use crate::stats::{
    batch_means, chi_square, chi_square_two_sample, ks_one_sample, ks_two_sample, median,
    median_of_means, normal_cdf, sample_variance,
};
use crate::transforms::{
    h_transform_estimate, kelvin, rbz_transform, reverse_from_last_exit, HMode,
};

pub const EXPERIMENT_NAMES: [&str; 6] = [
    "spitzer-baseline",
    "winding-clt",
    "planar-clock",
    "upcrossing-slln",
    "entry-law",
    "reversal-duality",
];

const BATCHES: usize = 30;
const MOM_GROUPS: usize = 32;
/// Default near-origin start modulus, relative to the natural scale of the
/// window being measured.
const NEAR_ORIGIN: f64 = 1e-4;
const ALT_NEAR_ORIGIN: f64 = 1e-2;

// Stream domains. A path's stream is (seed, domain, path index).
mod domain {
    pub const MAIN: u16 = 1;
    pub const ALT_START: u16 = 2;
    pub const MESH_COARSE: u16 = 3;
    pub const MESH_FINE: u16 = 4;
    pub const REFERENCE: u16 = 5;
    pub const DOUBLED: u16 = 6;
    pub const ALT_EPSILON: u16 = 7;
    pub const COMPARE: u16 = 8;
    pub const POOL: u16 = 9;
    pub const ROUTE_B: u16 = 10;
    pub const H_ROUTE: u16 = 11;
    pub const RBZ_ROUTE: u16 = 12;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 2,
            Verdict::Inconclusive => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// A secondary requirement of an experiment: `value` compared with `bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: Relation::AtMost,
            bound,
            passed: value <= bound,
        }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: Relation::AtLeast,
            bound,
            passed: value >= bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonEstimate {
    pub horizon: f64,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub target: ConstantValue,
    /// Declared tolerance; for an infinite target, the divergence threshold
    /// the estimate must exceed.
    pub tolerance: f64,
    pub verdict: Verdict,
    pub config_digest: String,
    pub seed: u64,
    pub runtime_s: f64,
    pub checks: Vec<Check>,
    pub telemetry: Vec<HorizonEstimate>,
    pub diagnostics: BTreeMap<String, f64>,
}

pub const LEDGER_HEADER: &str =
    "name,estimate,std_error,target,tolerance,verdict,config_digest,seed,runtime_s";

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn csv_row(&self) -> String {
        let target = match self.target {
            ConstantValue::Finite(v) => format!("{v:e}"),
            ConstantValue::Infinite => "inf".into(),
        };
        let verdict = match self.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        };
        format!(
            "{},{:e},{:e},{},{:e},{},{},{},{:.3}",
            self.name,
            self.estimate,
            self.std_error,
            target,
            self.tolerance,
            verdict,
            self.config_digest,
            self.seed,
            self.runtime_s
        )
    }

    /// Append one row to a CSV results ledger, writing the header if the file
    /// is new or empty.
    pub fn append_ledger(&self, path: &Path) -> Result<()> {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        if fresh {
            writeln!(f, "{LEDGER_HEADER}")?;
        }
        writeln!(f, "{}", self.csv_row())?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Resolved configurations

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindingMode {
    AtInfinity,
    AtZeroReversed,
    ConditionedRbz,
}

impl FromStr for WindingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "at_infinity" => Ok(WindingMode::AtInfinity),
            "at_zero_reversed" => Ok(WindingMode::AtZeroReversed),
            "conditioned_rbz" => Ok(WindingMode::ConditionedRbz),
            _ => Err(Error::config("mode", format!("unknown winding mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LargeTime,
    SmallTimeFromOrigin,
    BeforeHitting,
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "large_time" | "i" => Ok(Regime::LargeTime),
            "small_time_from_origin" | "ii" => Ok(Regime::SmallTimeFromOrigin),
            "before_hitting" | "iii" => Ok(Regime::BeforeHitting),
            _ => Err(Error::config("mode", format!("unknown regime `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpitzerConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub t_log: f64,
    pub mesh: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindingConfig {
    pub seed: u64,
    pub alpha: f64,
    pub r: f64,
    pub n_paths: usize,
    pub mode: WindingMode,
    pub mesh: u32,
    pub start_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarClockConfig {
    pub seed: u64,
    pub alpha: f64,
    pub t_log: f64,
    pub n_paths: usize,
    pub mesh: u32,
    pub start_factor: f64,
    pub mesh_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpcrossingConfig {
    pub seed: u64,
    pub alpha: f64,
    pub rho: f64,
    pub t_log: f64,
    pub n_paths: usize,
    pub regime: Regime,
    pub mesh: u32,
    pub epsilon: f64,
    pub start_factor: f64,
    pub mesh_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryConfig {
    pub seed: u64,
    pub alpha: f64,
    pub rho: f64,
    pub start_modulus: f64,
    pub compare_modulus: Option<f64>,
    pub n_paths: usize,
    pub mesh: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversalConfig {
    pub seed: u64,
    pub alpha: f64,
    pub a: f64,
    pub s: f64,
    pub n_paths: usize,
    pub mesh: u32,
    pub start_factor: f64,
}

/// A fully resolved experiment. Its canonical JSON form is what gets hashed
/// into the report's `config_digest`; the worker count and output options are
/// deliberately not part of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    SpitzerBaseline(SpitzerConfig),
    WindingClt(WindingConfig),
    PlanarClock(PlanarClockConfig),
    UpcrossingSlln(UpcrossingConfig),
    EntryLaw(EntryConfig),
    ReversalDuality(ReversalConfig),
}

fn params_of(alpha: f64, rho: f64) -> Result<StableParams> {
    StableParams::new(alpha, rho).map_err(|e| Error::config("alpha/rho", e.to_string()))
}

fn require(ok: bool, field: &str, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, msg))
    }
}

impl ExperimentSpec {
    /// Apply per-experiment defaults to `cfg` and validate the result.
    pub fn from_config(name: &str, cfg: &RunConfig) -> Result<Self> {
        let seed = cfg.seed.unwrap_or(1);
        let mesh = cfg.mesh.unwrap_or(256);
        require(mesh >= 8, "mesh", "must be at least 8 points per decade")?;
        let n_or = |d: usize| cfg.n_paths.unwrap_or(d);
        let spec = match name {
            "spitzer-baseline" => ExperimentSpec::SpitzerBaseline(SpitzerConfig {
                seed,
                n_paths: n_or(5000),
                t_log: cfg.t_log.unwrap_or(20.0),
                mesh,
            }),
            "winding-clt" => ExperimentSpec::WindingClt(WindingConfig {
                seed,
                alpha: cfg.alpha.unwrap_or(1.0),
                r: cfg.t_log.unwrap_or(12.0),
                n_paths: n_or(10_000),
                mode: cfg.mode.as_deref().unwrap_or("at_infinity").parse()?,
                mesh,
                start_factor: cfg.start_modulus.unwrap_or(NEAR_ORIGIN),
            }),
            "planar-clock" => ExperimentSpec::PlanarClock(PlanarClockConfig {
                seed,
                alpha: cfg.alpha.unwrap_or(1.0),
                t_log: cfg.t_log.unwrap_or(14.0),
                n_paths: n_or(500),
                mesh,
                start_factor: cfg.start_modulus.unwrap_or(NEAR_ORIGIN),
                mesh_paths: 8000,
            }),
            "upcrossing-slln" => {
                let alpha = cfg.alpha.unwrap_or(0.5);
                let regime: Regime = match cfg.mode.as_deref() {
                    Some(m) => m.parse()?,
                    None if alpha > 1.0 => Regime::BeforeHitting,
                    None => Regime::LargeTime,
                };
                let hitting = regime == Regime::BeforeHitting;
                ExperimentSpec::UpcrossingSlln(UpcrossingConfig {
                    seed,
                    alpha,
                    rho: cfg.rho.unwrap_or(0.5),
                    t_log: cfg.t_log.unwrap_or(if hitting { 16.0 } else { 12.0 }),
                    n_paths: n_or(if hitting { 8000 } else { 500 }),
                    regime,
                    mesh,
                    epsilon: cfg.epsilon.unwrap_or(1e-3),
                    start_factor: cfg.start_modulus.unwrap_or(NEAR_ORIGIN),
                    mesh_paths: 8000,
                })
            }
            "entry-law" => ExperimentSpec::EntryLaw(EntryConfig {
                seed,
                alpha: cfg.alpha.unwrap_or(1.5),
                rho: cfg.rho.unwrap_or(0.5),
                start_modulus: cfg.start_modulus.unwrap_or(50.0),
                compare_modulus: cfg.compare_modulus,
                n_paths: n_or(100_000),
                mesh,
            }),
            "reversal-duality" => ExperimentSpec::ReversalDuality(ReversalConfig {
                seed,
                alpha: cfg.alpha.unwrap_or(1.2),
                a: cfg.radius.unwrap_or(1.0),
                s: cfg.time.unwrap_or(0.25),
                n_paths: n_or(100_000),
                mesh,
                start_factor: cfg.start_modulus.unwrap_or(NEAR_ORIGIN),
            }),
            _ => {
                return Err(Error::config(
                    "experiment",
                    format!("unknown experiment `{name}`; expected one of {EXPERIMENT_NAMES:?}"),
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let n = match self {
            ExperimentSpec::SpitzerBaseline(c) => {
                require(c.t_log >= 8.0, "t_log", "must be at least 8")?;
                c.n_paths
            }
            ExperimentSpec::WindingClt(c) => {
                require(c.alpha > 0.0 && c.alpha < 2.0, "alpha", "must lie in (0, 2)")?;
                require(c.r >= 8.0, "t_log", "window length r must be at least 8")?;
                require(c.start_factor > 0.0 && c.start_factor < 1.0, "start_modulus", "must lie in (0, 1)")?;
                c.n_paths
            }
            ExperimentSpec::PlanarClock(c) => {
                require(c.alpha > 0.0 && c.alpha < 2.0, "alpha", "must lie in (0, 2)")?;
                require(c.t_log >= 10.0, "t_log", "must be at least 10")?;
                require(c.start_factor > 0.0 && c.start_factor < 1.0, "start_modulus", "must lie in (0, 1)")?;
                c.n_paths
            }
            ExperimentSpec::UpcrossingSlln(c) => {
                params_of(c.alpha, c.rho)?;
                require(c.t_log >= 4.0, "t_log", "must be at least 4")?;
                require(c.epsilon > 0.0 && c.epsilon < 1.0, "epsilon", "must lie in (0, 1)")?;
                require(c.start_factor > 0.0 && c.start_factor < 1.0, "start_modulus", "must lie in (0, 1)")?;
                c.n_paths
            }
            ExperimentSpec::EntryLaw(c) => {
                params_of(c.alpha, c.rho)?;
                require(c.alpha > 1.0, "alpha", "the entry law needs alpha in (1, 2)")?;
                require(c.start_modulus >= 20.0, "start_modulus", "must be at least 20")?;
                if let Some(m) = c.compare_modulus {
                    require(m >= 20.0, "compare_modulus", "must be at least 20")?;
                }
                c.n_paths
            }
            ExperimentSpec::ReversalDuality(c) => {
                require(c.alpha > 0.0 && c.alpha < 2.0, "alpha", "must lie in (0, 2)")?;
                require(c.a > 0.0 && c.a.is_finite(), "radius", "must be positive")?;
                require(c.s > 0.0 && c.s.is_finite(), "time", "must be positive")?;
                require(c.start_factor > 0.0 && c.start_factor < 1.0, "start_modulus", "must lie in (0, 1)")?;
                c.n_paths
            }
        };
        require(n >= 2 * BATCHES, "n_paths", "must be at least 60")
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentSpec::SpitzerBaseline(_) => "spitzer-baseline",
            ExperimentSpec::WindingClt(_) => "winding-clt",
            ExperimentSpec::PlanarClock(_) => "planar-clock",
            ExperimentSpec::UpcrossingSlln(_) => "upcrossing-slln",
            ExperimentSpec::EntryLaw(_) => "entry-law",
            ExperimentSpec::ReversalDuality(_) => "reversal-duality",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentSpec::SpitzerBaseline(c) => c.seed,
            ExperimentSpec::WindingClt(c) => c.seed,
            ExperimentSpec::PlanarClock(c) => c.seed,
            ExperimentSpec::UpcrossingSlln(c) => c.seed,
            ExperimentSpec::EntryLaw(c) => c.seed,
            ExperimentSpec::ReversalDuality(c) => c.seed,
        }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serialises")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn run(&self, workers: usize) -> Result<ExperimentReport> {
        match self {
            ExperimentSpec::SpitzerBaseline(c) => exp_spitzer_baseline(c, workers),
            ExperimentSpec::WindingClt(c) => exp_winding_clt(c, workers),
            ExperimentSpec::PlanarClock(c) => exp_planar_clock(c, workers),
            ExperimentSpec::UpcrossingSlln(c) => exp_upcrossing_slln(c, workers),
            ExperimentSpec::EntryLaw(c) => exp_entry_law(c, workers),
            ExperimentSpec::ReversalDuality(c) => exp_reversal_duality(c, workers),
        }
    }
}

pub fn config_digest(name: &str, cfg: &RunConfig) -> Result<String> {
    Ok(ExperimentSpec::from_config(name, cfg)?.digest())
}

pub fn run_experiment(name: &str, cfg: &RunConfig) -> Result<ExperimentReport> {
    ExperimentSpec::from_config(name, cfg)?.run(cfg.workers())
}

// ---------------------------------------------------------------------------
// Shared machinery

/// Step size of the adaptive steppers: roughly `mesh` grid points per decade
/// of time once the Lamperti clock runs at unit speed.
fn kappa(mesh: u32) -> f64 {
    LN_10 / mesh as f64
}

fn unit_direction(rng: &mut RngStream) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * rng.open01())
}

/// Alternate start signs so one-dimensional samples are balanced exactly.
fn alternating_sign(i: usize) -> f64 {
    if i % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    batch_means(x, BATCHES)
}

/// Standard error of a statistic from its spread over contiguous batches.
fn batch_se(x: &[f64], stat: impl Fn(&[f64]) -> f64) -> f64 {
    let n = x.len();
    let b = BATCHES.min(n);
    let vals: Vec<f64> = (0..b).map(|k| stat(&x[k * n / b..(k + 1) * n / b])).collect();
    (sample_variance(&vals) / b as f64).sqrt()
}

fn excess_kurtosis(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

/// Relative agreement of two estimates of the same quantity from independent
/// runs at different meshes: `|m_fine/m_coarse - 1| <= max(3%, 3σ)`.
fn mesh_check(coarse: &[f64], fine: &[f64]) -> (Check, f64) {
    let (m1, s1) = mean_se(coarse);
    let (m2, s2) = mean_se(fine);
    let r = m2 / m1;
    let sr = r.abs() * (s1 / m1).hypot(s2 / m2);
    (Check::at_most("mesh_refinement", (r - 1.0).abs(), 0.03f64.max(3.0 * sr)), r)
}

fn telemetry(horizons: &[f64], columns: &[Vec<f64>]) -> Vec<HorizonEstimate> {
    horizons
        .iter()
        .zip(columns)
        .map(|(&h, col)| {
            let (estimate, std_error) = mean_se(col);
            HorizonEstimate {
                horizon: h,
                estimate,
                std_error,
            }
        })
        .collect()
}

/// The last horizon must be no further from the target than the first, up to
/// three standard errors of the first.
fn approach_check(tel: &[HorizonEstimate], target: ConstantValue) -> Check {
    let (first, last) = (tel[0], tel[tel.len() - 1]);
    match target {
        ConstantValue::Finite(t) => Check::at_most(
            "telemetry_approaches_target",
            (last.estimate - t).abs(),
            (first.estimate - t).abs() + 3.0 * first.std_error,
        ),
        ConstantValue::Infinite => Check::at_least(
            "telemetry_approaches_target",
            last.estimate,
            first.estimate - 3.0 * first.std_error,
        ),
    }
}

/// Transpose per-path rows into per-horizon columns.
fn columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = rows.first().map_or(0, Vec::len);
    (0..k).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

fn increasing_horizons(t: f64) -> [f64; 3] {
    [0.5 * t, 0.75 * t, t]
}

struct Outcome {
    estimate: f64,
    std_error: f64,
    target: ConstantValue,
    /// Standard error of a target that is itself estimated; 0 otherwise.
    target_se: f64,
    tolerance: f64,
    checks: Vec<Check>,
    telemetry: Vec<HorizonEstimate>,
    diagnostics: BTreeMap<String, f64>,
    n_paths: usize,
    incomplete: usize,
}

impl Outcome {
    fn new(estimate: f64, std_error: f64, target: ConstantValue, tolerance: f64, n_paths: usize) -> Self {
        Outcome {
            estimate,
            std_error,
            target,
            target_se: 0.0,
            tolerance,
            checks: Vec::new(),
            telemetry: Vec::new(),
            diagnostics: BTreeMap::new(),
            n_paths,
            incomplete: 0,
        }
    }

    fn diag(&mut self, key: &str, v: f64) {
        self.diagnostics.insert(key.into(), v);
    }
}

/// Verdict rule: pass when `|estimate - target| <= max(tolerance, 3σ)` (or the
/// divergence threshold is exceeded) and every check holds; inconclusive when
/// the Monte Carlo error swamps the tolerance or more than 1% of paths did not
/// complete.
fn finish(spec: &ExperimentSpec, started: Instant, mut o: Outcome) -> ExperimentReport {
    let sigma = o.std_error.hypot(o.target_se);
    let primary = match o.target {
        ConstantValue::Finite(t) => (o.estimate - t).abs() <= o.tolerance.max(3.0 * sigma),
        ConstantValue::Infinite => o.estimate > o.tolerance,
    };
    let swamped = matches!(o.target, ConstantValue::Finite(_))
        && o.tolerance > 0.0
        && 3.0 * o.std_error > 2.0 * o.tolerance;
    let inconclusive = !o.estimate.is_finite()
        || !sigma.is_finite()
        || swamped
        || o.incomplete as f64 > 0.01 * o.n_paths as f64;
    let verdict = if inconclusive {
        Verdict::Inconclusive
    } else if primary && o.checks.iter().all(|c| c.passed) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    o.diag("incomplete_paths", o.incomplete as f64);
    o.diag("target_std_error", o.target_se);
    ExperimentReport {
        name: spec.name().into(),
        estimate: o.estimate,
        std_error: o.std_error,
        target: o.target,
        tolerance: o.tolerance,
        verdict,
        config_digest: spec.digest(),
        seed: spec.seed(),
        runtime_s: started.elapsed().as_secs_f64(),
        checks: o.checks,
        telemetry: o.telemetry,
        diagnostics: o.diagnostics,
    }
}

/// Split optional per-path results into the completed ones and a count of
/// failures, keeping index order.
fn completed<T>(rows: Vec<Option<T>>) -> (Vec<T>, usize) {
    let n = rows.len();
    let ok: Vec<T> = rows.into_iter().flatten().collect();
    let bad = n - ok.len();
    (ok, bad)
}

// ---------------------------------------------------------------------------
// Planar Brownian windings

/// `2θ_t / log t` for planar Brownian motion from the unit circle, sampled
/// through the skew product: the log-modulus `β` is a Brownian motion run on
/// the clock `H = ∫|B|^{-2}`, real time is `∫ e^{2β} dH`, and the winding is
/// an independent Brownian motion evaluated at `H_t`.
fn spitzer_sample(rng: &mut RngStream, t_log: f64, kappa: f64) -> f64 {
    let level = t_log / 2.0;
    let horizon = t_log.exp();
    let (mut beta, mut elapsed, mut h) = (0.0f64, 0.0f64, 0.0f64);
    loop {
        let d = level - beta;
        // Fine steps only where the modulus is within a factor e of sqrt(t).
        let du = kappa * (d * d).max(1.0);
        let speed = (2.0 * beta).exp();
        if elapsed + speed * du >= horizon {
            h += (horizon - elapsed) / speed;
            break;
        }
        elapsed += speed * du;
        h += du;
        beta += du.sqrt() * rng.normal();
    }
    2.0 * h.sqrt() * rng.normal() / t_log
}

pub fn exp_spitzer_baseline(c: &SpitzerConfig, workers: usize) -> Result<ExperimentReport> {
    let started = Instant::now();
    let k = kappa(c.mesh);
    let run = |dom: u16, t_log: f64| {
        par_map(c.n_paths, workers, |i| {
            spitzer_sample(&mut RngStream::derived(c.seed, dom, i as u64), t_log, k)
        })
    };
    let x = run(domain::MAIN, c.t_log)?;
    let x2 = run(domain::DOUBLED, 2.0 * c.t_log)?;
    let cauchy = |v: f64| 0.5 + v.atan() / PI;
    let ks = ks_one_sample(&x, cauchy);
    let ks2 = ks_one_sample(&x2, cauchy);

    let mut o = Outcome::new(median(&x), batch_se(&x, median), ConstantValue::Finite(0.0), 0.0, c.n_paths);
    o.checks.push(Check::at_least("ks_p_value", ks.p_value, 1e-3));
    // The KS statistic has standard deviation about 0.26/sqrt(n); allow three
    // of them for the difference of two independent runs.
    o.checks.push(Check::at_most(
        "ks_statistic_doubled_horizon",
        ks2.statistic,
        ks.statistic + 1.1 / (c.n_paths as f64).sqrt(),
    ));
    let mut sorted = x.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |f: f64| sorted[((sorted.len() - 1) as f64 * f).round() as usize];
    o.diag("half_iqr", 0.5 * (q(0.75) - q(0.25)));
    o.diag("ks_statistic", ks.statistic);
    o.diag("ks_p_value", ks.p_value);
    o.diag("ks_statistic_doubled", ks2.statistic);
    o.diag("ks_p_value_doubled", ks2.p_value);
    Ok(finish(&ExperimentSpec::SpitzerBaseline(c.clone()), started, o))
}

// ---------------------------------------------------------------------------
// Stable windings

/// One path's normalised windings `θ/√r` over the full window and over the
/// window of half the length (for the Brownian-scaling check).
fn winding_path(rng: &mut RngStream, c: &WindingConfig, mode: WindingMode) -> Option<(f64, f64)> {
    let alpha = c.alpha;
    let law = StablePlanar(alpha);
    let stepper = AdaptiveStepper::lamperti_planar(kappa(c.mesh));
    let dir = unit_direction(rng);
    let (r, half) = (c.r, c.r / 2.0);
    let (full_w, half_w) = match mode {
        WindingMode::AtInfinity => {
            let (p, why) = simulate_adaptive(rng, &law, &stepper, 0.0, dir, r.exp(), |_, _| false, false);
            if why != StopReason::Horizon {
                return None;
            }
            (
                winding_angle(&p, 1.0, r.exp()).ok()?,
                winding_angle(&p, 1.0, half.exp()).ok()?,
            )
        }
        WindingMode::AtZeroReversed => {
            // Reverse from the last exit of a ball large enough that its last
            // exit time almost surely exceeds 1; reversed time ℓ - u is
            // forward time u.
            let a = (5.0 / alpha).exp();
            let start = dir * (c.start_factor * (-r / alpha).exp());
            let (p, why) = simulate_adaptive(rng, &law, &stepper, 0.0, start, f64::INFINITY, |_, x| x.norm() > 1e4 * a, true);
            if why != StopReason::Condition {
                return None;
            }
            let y = reverse_from_last_exit(&p, a, None).ok()?.skeleton;
            let ell = y.end_time();
            let lo = (ell - 1.0).max(0.0);
            (
                -winding_angle(&y, lo, ell - (-r).exp()).ok()?,
                -winding_angle(&y, lo, ell - (-half).exp()).ok()?,
            )
        }
        WindingMode::ConditionedRbz => {
            // Run until the remaining η-clock is far below e^{-r}.
            let far = ((r + 7.0) / alpha).exp();
            let (p, why) = simulate_adaptive(rng, &law, &stepper, 0.0, dir, f64::INFINITY, |_, x| x.norm() > far, false);
            if why != StopReason::Condition {
                return None;
            }
            let y = rbz_transform(&p, alpha, None).ok()?.skeleton;
            let tau = y.end_time();
            let lo = (tau - 1.0).max(0.0);
            (
                winding_angle(&y, lo, tau - (-r).exp()).ok()?,
                winding_angle(&y, lo, tau - (-half).exp()).ok()?,
            )
        }
    };
    Some((full_w / r.sqrt(), half_w / half.sqrt()))
}

fn winding_samples(c: &WindingConfig, mode: WindingMode, dom: u16, workers: usize) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let rows = par_map(c.n_paths, workers, |i| {
        winding_path(&mut RngStream::derived(c.seed, dom, i as u64), c, mode)
    })?;
    let (ok, bad) = completed(rows);
    let (full, half) = ok.into_iter().unzip();
    Ok((full, half, bad))
}

pub fn exp_winding_clt(c: &WindingConfig, workers: usize) -> Result<ExperimentReport> {
    let started = Instant::now();
    let (full, half, bad) = winding_samples(c, c.mode, domain::MAIN, workers)?;
    if full.len() < 2 * BATCHES {
        return Err(Error::Degenerate);
    }
    let (c_hat, c_se) = (sample_variance(&full), batch_se(&full, sample_variance));
    let (c_half, c_half_se) = (sample_variance(&half), batch_se(&half, sample_variance));
    let ks = ks_one_sample(&full, |x| normal_cdf(x / c_hat.sqrt()));
    let (m, m_se) = mean_se(&full);

    let (target, target_se) = if c.mode == WindingMode::AtInfinity {
        // Brownian scaling: the variance per unit window length is the same
        // at r/2 and at r.
        (c_half, c_half_se)
    } else {
        let (reference, _, bad_ref) = winding_samples(c, WindingMode::AtInfinity, domain::REFERENCE, workers)?;
        if bad_ref > 0 {
            return Err(Error::Degenerate);
        }
        (sample_variance(&reference), batch_se(&reference, sample_variance))
    };
    let mut o = Outcome::new(c_hat, c_se, ConstantValue::Finite(target), 0.0, c.n_paths);
    o.target_se = target_se;
    o.incomplete = bad;
    o.checks.push(Check::at_least("ks_p_value", ks.p_value, 0.01));
    o.checks.push(Check::at_most("mean_abs", m.abs(), 3.0 * m_se));
    if c.mode != WindingMode::AtInfinity {
        o.checks.push(Check::at_most(
            "brownian_scaling",
            (c_hat - c_half).abs(),
            3.0 * c_se.hypot(c_half_se),
        ));
    }
    o.diag("c_hat", c_hat);
    o.diag("c_hat_std_error", c_se);
    o.diag("c_hat_half_window", c_half);
    o.diag("c_hat_half_window_std_error", c_half_se);
    o.diag("ks_statistic", ks.statistic);
    o.diag("ks_p_value", ks.p_value);
    o.diag("mean", m);
    o.diag("excess_kurtosis", excess_kurtosis(&full));
    Ok(finish(&ExperimentSpec::WindingClt(c.clone()), started, o))
}

// ---------------------------------------------------------------------------
// Planar clock

/// `H` accumulated over `[1, e^h] / h` for each horizon `h`, from a
/// near-origin start. From the origin the window `[1, e^h]` sees the
/// stationary Lamperti process, so the ratio has no start-up bias.
fn planar_clock_path(rng: &mut RngStream, alpha: f64, horizons: &[f64], k: f64, start: f64) -> Option<Vec<f64>> {
    let law = StablePlanar(alpha);
    let stepper = AdaptiveStepper::lamperti_planar(k);
    let x0 = unit_direction(rng) * start;
    let end = horizons.last()?.exp();
    let (p, why) = simulate_adaptive(rng, &law, &stepper, 0.0, x0, end, |_, _| false, true);
    if why != StopReason::Horizon {
        return None;
    }
    let h = clock(&p, ClockKind::H, alpha).ok()?;
    let base = h.at_time(1.0);
    Some(horizons.iter().map(|&t| (h.at_time(t.exp()) - base) / t).collect())
}

pub fn exp_planar_clock(c: &PlanarClockConfig, workers: usize) -> Result<ExperimentReport> {
    let started = Instant::now();
    let k = kappa(c.mesh);
    let horizons = increasing_horizons(c.t_log);
    let run = |dom: u16, n: usize, k: f64, start: f64, hs: &[f64]| {
        par_map(n, workers, |i| {
            planar_clock_path(&mut RngStream::derived(c.seed, dom, i as u64), c.alpha, hs, k, start)
        })
        .map(completed)
    };
    let (rows, bad) = run(domain::MAIN, c.n_paths, k, c.start_factor, &horizons)?;
    let cols = columns(&rows);
    let last = cols.last().ok_or(Error::Degenerate)?;
    let (est, se) = mean_se(last);
    let target = planar_clock_mean(c.alpha)?;

    let mut o = Outcome::new(est, se, ConstantValue::Finite(target), 0.05 * target, c.n_paths);
    o.incomplete = bad;
    o.telemetry = telemetry(&horizons, &cols);
    o.checks.push(approach_check(&o.telemetry, o.target));

    let final_only = [c.t_log];
    let (coarse, b1) = run(domain::MESH_COARSE, c.mesh_paths, k, c.start_factor, &final_only)?;
    let (fine, b2) = run(domain::MESH_FINE, c.mesh_paths, k / 2.0, c.start_factor, &final_only)?;
    let (chk, ratio) = mesh_check(&columns(&coarse)[0], &columns(&fine)[0]);
    o.checks.push(chk);
    o.diag("mesh_ratio", ratio);
    o.diag("mesh_incomplete_paths", (b1 + b2) as f64);

    let (alt, _) = run(domain::ALT_START, c.n_paths, k, ALT_NEAR_ORIGIN, &final_only)?;
    let (alt_est, alt_se) = mean_se(&columns(&alt)[0]);
    o.diag("estimate_alt_start", alt_est);
    o.diag("estimate_alt_start_std_error", alt_se);
    o.diag("alt_start_modulus", ALT_NEAR_ORIGIN);
    o.diag("median_of_means", median_of_means(last, MOM_GROUPS).0);
    Ok(finish(&ExperimentSpec::PlanarClock(c.clone()), started, o))
}

// ---------------------------------------------------------------------------
// Upcrossings

/// Divergence threshold for the Cauchy case. There `|X_1|^{-1}` has a
/// logarithmically divergent mean, so the clock, and with it the upcrossing
/// count, grows like `t log t`; the estimate per unit of log-time must exceed
/// `renewal_rate · log t_log`, the order of the divergent part.
pub fn divergence_threshold(p: StableParams, t_log: f64) -> f64 {
    renewal_rate(p) * t_log.ln()
}

/// Per path: `U / h` over each horizon window plus the layered residual
/// `(U - rate · ς) / t` over the full window.
fn upcrossing_path(rng: &mut RngStream, c: &UpcrossingConfig, p: StableParams, k: f64, horizons: &[f64], i: usize) -> Option<(Vec<f64>, f64)> {
    let law = Stable1d(p);
    let stepper = AdaptiveStepper::lamperti_1d(k);
    let sign = alternating_sign(i);
    let t = *horizons.last()?;
    let rate = renewal_rate(p);
    match c.regime {
        Regime::LargeTime => {
            let (path, why) = simulate_adaptive(rng, &law, &stepper, 0.0, sign, t.exp(), |_, _| false, false);
            if why != StopReason::Horizon {
                return None;
            }
            let u: Vec<f64> = horizons
                .iter()
                .map(|&h| count_upcrossings(&path, 0.0, h.exp()).count as f64 / h)
                .collect();
            let varsigma = clock(&path, ClockKind::Varsigma, p.alpha).ok()?.total();
            let layered = (u[u.len() - 1] * t - rate * varsigma) / t;
            Some((u, layered))
        }
        Regime::SmallTimeFromOrigin => {
            let start = sign * c.start_factor * (-t / p.alpha).exp();
            let (path, why) = simulate_adaptive(rng, &law, &stepper, 0.0, start, 1.0, |_, _| false, true);
            if why != StopReason::Horizon {
                return None;
            }
            let u: Vec<f64> = horizons
                .iter()
                .map(|&h| count_upcrossings(&path, (-h).exp(), 1.0).count as f64 / h)
                .collect();
            let cl = clock(&path, ClockKind::Varsigma, p.alpha).ok()?;
            let varsigma = cl.total() - cl.at_time((-t).exp());
            let layered = (u[u.len() - 1] * t - rate * varsigma) / t;
            Some((u, layered))
        }
        Regime::BeforeHitting => unreachable!("handled by before_hitting_path"),
    }
}

/// Lower edge of the log-time window before hitting, as a multiple of the
/// time scale `ε^α` of the target interval.
const HITTING_EDGE: f64 = 1e4;

/// Upcrossings in `[τ - t_hi, τ - t_lo]` per unit of `log(t_hi / t_lo)`, with
/// `t_lo = 10⁴ ε^α`, `t_hi = e^{h-3}` and `τ` the entrance time of `(-ε, ε)`.
/// Times before `τ` are read off the reversed skeleton, where upcrossings
/// appear as downcrossings.
fn before_hitting_path(rng: &mut RngStream, p: StableParams, t_log: f64, eps: f64, k: f64, horizons: &[f64], i: usize) -> Option<Vec<f64>> {
    let law = Stable1d(p);
    let stepper = AdaptiveStepper::lamperti_1d(k);
    let x0 = alternating_sign(i) * (t_log / p.alpha).exp();
    let (rev, why) = simulate_to_stop_reversed(rng, &law, &stepper, x0, |x| x.abs() < eps);
    if why != StopReason::Condition {
        return None;
    }
    let lo = HITTING_EDGE * eps.powf(p.alpha);
    Some(
        horizons
            .iter()
            .map(|&h| {
                let hi = (h - 3.0).exp();
                count_downcrossings(&rev, lo, hi).count as f64 / (hi / lo).ln()
            })
            .collect(),
    )
}

pub fn exp_upcrossing_slln(c: &UpcrossingConfig, workers: usize) -> Result<ExperimentReport> {
    let started = Instant::now();
    let p = params_of(c.alpha, c.rho)?;
    match c.regime {
        Regime::LargeTime if p.alpha > 1.0 => {
            return Err(Error::Regime {
                regime: "large_time",
                requirement: "alpha <= 1",
            })
        }
        Regime::SmallTimeFromOrigin if p.alpha > 1.0 => {
            return Err(Error::Regime {
                regime: "small_time_from_origin",
                requirement: "alpha <= 1",
            })
        }
        Regime::BeforeHitting if p.alpha <= 1.0 => {
            return Err(Error::Regime {
                regime: "before_hitting",
                requirement: "alpha in (1, 2)",
            })
        }
        _ => {}
    }
    let k = kappa(c.mesh);
    let target = upcrossing_constant(p);
    let horizons = increasing_horizons(c.t_log);

    let mut o = if c.regime == Regime::BeforeHitting {
        let lo = HITTING_EDGE * c.epsilon.powf(p.alpha);
        let hs: Vec<f64> = horizons
            .iter()
            .copied()
            .filter(|&h| (h - 3.0).exp() > std::f64::consts::E * lo)
            .collect();
        if hs.last() != Some(&c.t_log) {
            return Err(Error::config("t_log", "window before hitting is empty; raise t_log or lower epsilon"));
        }
        let run = |dom: u16, eps: f64| {
            par_map(c.n_paths, workers, |i| {
                before_hitting_path(&mut RngStream::derived(c.seed, dom, i as u64), p, c.t_log, eps, k, &hs, i)
            })
            .map(completed)
        };
        let (rows, bad) = run(domain::MAIN, c.epsilon)?;
        let cols = columns(&rows);
        let (est, se) = mean_se(cols.last().ok_or(Error::Degenerate)?);
        let tv = target.finite().ok_or(Error::Degenerate)?;
        let mut o = Outcome::new(est, se, target, 0.12 * tv, c.n_paths);
        o.incomplete = bad;
        o.telemetry = telemetry(&hs, &cols);
        o.checks.push(approach_check(&o.telemetry, target));

        let eps_alt = if c.epsilon * 10.0 <= 0.1 { c.epsilon * 10.0 } else { c.epsilon / 10.0 };
        let (alt_rows, alt_bad) = run(domain::ALT_EPSILON, eps_alt)?;
        let alt_cols = columns(&alt_rows);
        let (alt, alt_se) = mean_se(alt_cols.last().ok_or(Error::Degenerate)?);
        // 95% intervals overlap.
        o.checks.push(Check::at_most("epsilon_sensitivity", (est - alt).abs(), 1.96 * (se + alt_se)));
        o.diag("epsilon", c.epsilon);
        o.diag("epsilon_alt", eps_alt);
        o.diag("estimate_epsilon_alt", alt);
        o.diag("estimate_epsilon_alt_std_error", alt_se);
        o.diag("epsilon_alt_incomplete_paths", alt_bad as f64);
        o
    } else {
        let run = |dom: u16, n: usize, k: f64, hs: &[f64]| {
            par_map(n, workers, |i| {
                upcrossing_path(&mut RngStream::derived(c.seed, dom, i as u64), c, p, k, hs, i)
            })
            .map(completed)
        };
        let (rows, bad) = run(domain::MAIN, c.n_paths, k, &horizons)?;
        let (u_rows, layered): (Vec<Vec<f64>>, Vec<f64>) = rows.into_iter().unzip();
        let cols = columns(&u_rows);
        let (est, se) = mean_se(cols.last().ok_or(Error::Degenerate)?);
        let tolerance = match target {
            ConstantValue::Finite(v) => 0.10 * v,
            ConstantValue::Infinite => divergence_threshold(p, c.t_log),
        };
        let mut o = Outcome::new(est, se, target, tolerance, c.n_paths);
        o.incomplete = bad;
        o.telemetry = telemetry(&horizons, &cols);
        o.checks.push(approach_check(&o.telemetry, target));
        let (lm, lse) = mean_se(&layered);
        o.checks.push(Check::at_most("layered_time_change", lm.abs(), 2.0 * lse));
        o.diag("layered_residual", lm);
        o.diag("layered_residual_std_error", lse);
        o.diag("renewal_rate", renewal_rate(p));
        o.diag("median_of_means", median_of_means(cols.last().unwrap(), MOM_GROUPS).0);

        match c.regime {
            Regime::LargeTime => {
                let n = c.mesh_paths.max(c.n_paths);
                let fin = [c.t_log];
                let (r1, b1) = run(domain::MESH_COARSE, n, k, &fin)?;
                let (r2, b2) = run(domain::MESH_FINE, n, k / 2.0, &fin)?;
                let first = |r: Vec<(Vec<f64>, f64)>| r.into_iter().map(|(u, _)| u[0]).collect::<Vec<f64>>();
                let (chk, ratio) = mesh_check(&first(r1), &first(r2));
                o.checks.push(chk);
                o.diag("mesh_ratio", ratio);
                o.diag("mesh_incomplete_paths", (b1 + b2) as f64);
            }
            Regime::SmallTimeFromOrigin => {
                let alt = UpcrossingConfig {
                    start_factor: ALT_NEAR_ORIGIN,
                    ..c.clone()
                };
                let rows = par_map(c.n_paths, workers, |i| {
                    upcrossing_path(&mut RngStream::derived(c.seed, domain::ALT_START, i as u64), &alt, p, k, &[c.t_log], i)
                })?;
                let (ok, _) = completed(rows);
                let (m, s) = mean_se(&ok.iter().map(|(u, _)| u[0]).collect::<Vec<_>>());
                o.diag("estimate_alt_start", m);
                o.diag("estimate_alt_start_std_error", s);
                o.diag("alt_start_modulus", ALT_NEAR_ORIGIN);
            }
            Regime::BeforeHitting => {}
        }
        o
    };
    if let ConstantValue::Infinite = target {
        o.diag("divergence_threshold", o.tolerance);
    }
    Ok(finish(&ExperimentSpec::UpcrossingSlln(c.clone()), started, o))
}

// ---------------------------------------------------------------------------
// Entry law

const ENTRY_BINS: usize = 20;

/// Position at which the process started at `x0` first enters `(-1, 1)`.
/// Steps are sized by the distance to the interval, and are ten times
/// smaller on the Lamperti clock within distance 2 of it.
fn entry_value(rng: &mut RngStream, p: StableParams, x0: f64, k: f64) -> Option<f64> {
    let near = 0.1f64.powf(1.0 / p.alpha);
    let stepper = AdaptiveStepper {
        kappa: k,
        scale: move |x: &f64| {
            // Floor keeps the step resolvable when a jump lands on ±1.
            let d = (x.abs() - 1.0).max(1e-12);
            if d < 2.0 {
                d * near
            } else {
                d
            }
        },
        max_step: f64::INFINITY,
        min_step: 0.0,
        max_steps: 50_000_000,
    };
    let (rev, why) = simulate_to_stop_reversed(rng, &Stable1d(p), &stepper, x0, |x| x.abs() < 1.0);
    (why == StopReason::Condition).then(|| rev.values()[0])
}

fn entry_histogram(y: &[f64]) -> Vec<u64> {
    let mut h = vec![0u64; ENTRY_BINS];
    for &v in y {
        let b = (((v + 1.0) / 2.0) * ENTRY_BINS as f64).floor() as usize;
        h[b.min(ENTRY_BINS - 1)] += 1;
    }
    h
}

pub fn exp_entry_law(c: &EntryConfig, workers: usize) -> Result<ExperimentReport> {
    let started = Instant::now();
    let p = params_of(c.alpha, c.rho)?;
    let k = kappa(c.mesh);
    let run = |dom: u16, modulus: f64| {
        par_map(c.n_paths, workers, |i| {
            entry_value(&mut RngStream::derived(c.seed, dom, i as u64), p, alternating_sign(i) * modulus, k)
        })
        .map(completed)
    };
    let (y, bad) = run(domain::MAIN, c.start_modulus)?;
    let hist = entry_histogram(&y);
    let n = y.len() as f64;
    let expected: Vec<f64> = (0..ENTRY_BINS)
        .map(|b| {
            let lo = -1.0 + 2.0 * b as f64 / ENTRY_BINS as f64;
            let hi = -1.0 + 2.0 * (b + 1) as f64 / ENTRY_BINS as f64;
            Ok(n * (entry_cdf(hi, p)? - entry_cdf(lo, p)?))
        })
        .collect::<Result<_>>()?;
    let chi = chi_square(&hist, &expected, 1);

    // (1 + Y)/2 is Beta(1 - αρ, 1 - αρ̂).
    let (ba, bb) = (1.0 - p.alpha * p.rho, 1.0 - p.alpha * p.rho_hat());
    let mean_target = (ba - bb) / (ba + bb);
    let (m, se) = mean_se(&y);
    let mut o = Outcome::new(m, se, ConstantValue::Finite(mean_target), 0.02, c.n_paths);
    o.incomplete = bad;
    o.checks.push(Check::at_least("chi_square_p_value", chi.p_value, 0.01));
    if mean_target != 0.0 {
        o.checks.push(Check::at_least("mean_sign", m * mean_target.signum(), 0.0));
    }
    o.diag("chi_square_statistic", chi.statistic);
    o.diag("chi_square_p_value", chi.p_value);
    if let Some(m2) = c.compare_modulus {
        let (y2, bad2) = run(domain::COMPARE, m2)?;
        let t = chi_square_two_sample(&hist, &entry_histogram(&y2));
        o.checks.push(Check::at_least("start_modulus_two_sample_p_value", t.p_value, 0.01));
        o.diag("compare_modulus", m2);
        o.diag("compare_chi_square_statistic", t.statistic);
        o.diag("compare_chi_square_p_value", t.p_value);
        o.diag("compare_incomplete_paths", bad2 as f64);
    }
    Ok(finish(&ExperimentSpec::EntryLaw(c.clone()), started, o))
}

// ---------------------------------------------------------------------------
// Reversal duality

/// Ratio of the stepping scale inside the refined annulus, where short late
/// visits to the ball must not be stepped over.
const REVERSAL_REFINE: f64 = 0.25;
const REVERSAL_OUTER: f64 = 100.0;
const REVERSAL_FAR: f64 = 1e4;

fn annulus_stepper(alpha: f64, k: f64, inner: f64, outer: f64) -> AdaptiveStepper<impl Fn(&Complex64) -> f64> {
    let ratio = REVERSAL_REFINE.powf(1.0 / alpha);
    AdaptiveStepper {
        kappa: k,
        scale: move |x: &Complex64| {
            let r = x.norm();
            if r > inner && r < outer {
                r * ratio
            } else {
                r
            }
        },
        max_step: f64::INFINITY,
        min_step: 0.0,
        max_steps: 50_000_000,
    }
}

/// Near-origin path run far out, reversed from its last exit of the ball of
/// radius `a`.
fn reversed_from_exit(rng: &mut RngStream, c: &ReversalConfig, k: f64) -> Option<PathSkeleton<Complex64>> {
    let stepper = annulus_stepper(c.alpha, k, 0.5 * c.a, REVERSAL_OUTER * c.a);
    let x0 = unit_direction(rng) * (c.start_factor * c.a);
    let (p, why) = simulate_adaptive(rng, &StablePlanar(c.alpha), &stepper, 0.0, x0, f64::INFINITY, |_, x| x.norm() > REVERSAL_FAR * c.a, true);
    if why != StopReason::Condition {
        return None;
    }
    Some(reverse_from_last_exit(&p, c.a, None).ok()?.skeleton)
}

/// `|Y_s|`, or 0 once the path is dead.
fn modulus_at(y: &PathSkeleton<Complex64>, s: f64) -> f64 {
    if s > y.end_time() {
        0.0
    } else {
        y.value_at(s).map_or(0.0, |v| v.norm())
    }
}

/// The conditioned process from `x°` through the time-changed inversion of a
/// process started at `K(x°)`.
fn conditioned_by_rbz(rng: &mut RngStream, alpha: f64, x: Complex64, k: f64) -> Option<PathSkeleton<Complex64>> {
    let start = kelvin(x).ok()?;
    let r0 = start.norm();
    let stepper = annulus_stepper(alpha, k, 0.0, 10.0 * r0);
    let (p, why) = simulate_adaptive(rng, &StablePlanar(alpha), &stepper, 0.0, start, f64::INFINITY, |_, v| v.norm() > REVERSAL_FAR * r0, false);
    if why != StopReason::Condition {
        return None;
    }
    Some(rbz_transform(&p, alpha, None).ok()?.skeleton)
}

pub fn exp_reversal_duality(c: &ReversalConfig, workers: usize) -> Result<ExperimentReport> {
    let started = Instant::now();
    let k = kappa(c.mesh);
    let alpha = c.alpha;

    // Route A: the reversed path itself.
    let (ra, bad_a) = completed(par_map(c.n_paths, workers, |i| {
        let mut rng = RngStream::derived(c.seed, domain::MAIN, i as u64);
        reversed_from_exit(&mut rng, c, k).map(|y| modulus_at(&y, c.s))
    })?);
    // Route B: the conditioned process from an independent draw of X_{ℓ_a-}.
    let (pairs, bad_b) = completed(par_map(c.n_paths, workers, |i| {
        let mut rng = RngStream::derived(c.seed, domain::POOL, i as u64);
        let y0 = reversed_from_exit(&mut rng, c, k)?.values()[0];
        let mut rng = RngStream::derived(c.seed, domain::ROUTE_B, i as u64);
        let y = conditioned_by_rbz(&mut rng, alpha, y0, k)?;
        // Route C from the same start: one h-weighted step.
        let xs = y0 + sample_stable_planar(&mut rng, alpha, c.s);
        let w = (xs.norm() / y0.norm()).powf(alpha - 2.0);
        Some((modulus_at(&y, c.s), (xs.norm(), w)))
    })?);
    let (rb, rc): (Vec<f64>, Vec<(f64, f64)>) = pairs.into_iter().unzip();

    let ks = ks_two_sample(&ra, &rb);
    let mut o = Outcome::new(median(&ra), batch_se(&ra, median), ConstantValue::Finite(median(&rb)), 0.0, c.n_paths);
    o.target_se = batch_se(&rb, median);
    o.incomplete = bad_a + bad_b;
    o.checks.push(Check::at_least("ks_p_value", ks.p_value, 0.01));
    o.diag("ks_statistic", ks.statistic);
    o.diag("ks_p_value", ks.p_value);
    let frac = |v: &[f64], f: &dyn Fn(f64) -> bool| v.iter().filter(|&&x| f(x)).count() as f64 / v.len() as f64;
    o.diag("dead_fraction_reversed", frac(&ra, &|x| x == 0.0));
    o.diag("dead_fraction_rbz", frac(&rb, &|x| x == 0.0));
    o.diag("p_outside_ball_reversed", frac(&ra, &|x| x > c.a));
    o.diag("p_outside_ball_rbz", frac(&rb, &|x| x > c.a));
    o.diag(
        "p_outside_ball_h_transform",
        rc.iter().map(|&(r, w)| if r > c.a { w } else { 0.0 }).sum::<f64>() / rc.len() as f64,
    );

    // Law check from a fixed start: rbz route against h-weights at t = 0.5.
    let t = 0.5;
    let x0 = Complex64::new(1.0, 0.0);
    let f = |r: f64| if r > 0.5 && r < 1.5 { 1.0 } else { 0.0 };
    let (rbz_vals, bad_r) = completed(par_map(c.n_paths, workers, |i| {
        let mut rng = RngStream::derived(c.seed, domain::RBZ_ROUTE, i as u64);
        conditioned_by_rbz(&mut rng, alpha, x0, k).map(|y| f(modulus_at(&y, t)))
    })?);
    let h_paths: Vec<PathSkeleton<Complex64>> = par_map(c.n_paths, workers, |i| {
        let mut rng = RngStream::derived(c.seed, domain::H_ROUTE, i as u64);
        let x1 = x0 + sample_stable_planar(&mut rng, alpha, t);
        PathSkeleton::new(vec![0.0, t], vec![x0, x1], false)
    })?
    .into_iter()
    .collect::<Result<_>>()?;
    let h = h_transform_estimate(&h_paths, |v| f(v.norm()), t, HMode::Planar { alpha })?;
    let (rbz_m, rbz_se) = mean_se(&rbz_vals);
    o.checks.push(Check::at_most("rbz_vs_h_transform", (rbz_m - h.value).abs(), 2.0 * rbz_se.hypot(h.std_error)));
    o.incomplete += bad_r;
    o.diag("rbz_estimate", rbz_m);
    o.diag("rbz_std_error", rbz_se);
    o.diag("h_transform_estimate", h.value);
    o.diag("h_transform_std_error", h.std_error);
    Ok(finish(&ExperimentSpec::ReversalDuality(c.clone()), started, o))
}
