//! Exact stable increments and the modulating two-state chain.
//!
//! One-dimensional increments use the Chambers–Mallows–Stuck representation
//! written directly in terms of the positivity parameter: with
//! `V ~ U(-π/2, π/2)`, `W ~ Exp(1)` and `B = π(ρ - 1/2)`,
//!
//! ```text
//! X = sin(α(V+B)) / cos(V)^{1/α} · (cos(V - α(V+B)) / W)^{(1-α)/α}
//! ```
//!
//! has characteristic exponent `|z|^α exp(±iπα(1/2 - ρ))` for `z ≷ 0`, which is
//! the normalisation used by the exponent formulas in [`crate::exponents`].
//! Taking `B = π/2` gives the positive stable law with Laplace exponent
//! `λ^α`, and a Gaussian vector subordinated by it gives the isotropic planar
//! process.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::{chain_rates, Sign, StableParams};

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Each pair addresses an independent ChaCha8 keystream, so path `k` of an
/// experiment always sees the same numbers regardless of how paths are
/// scheduled across threads.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    /// Stream `index` within a named sub-family `domain` of streams.
    pub fn derived(seed: u64, domain: u16, index: u64) -> Self {
        debug_assert!(index < (1 << 48));
        Self::new(seed, (u64::from(domain) << 48) | index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn open01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn exp1(&mut self) -> f64 {
        -self.open01().ln()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Skewness `β` of the `(α, β)` parametrisation matching `(α, ρ)`.
///
/// At `α = 1` only the symmetric case has a strictly stable `β`; other `ρ`
/// correspond to a Cauchy law with drift and are rejected here (the sampler
/// itself handles them through `B = π(ρ - 1/2)`).
pub fn skewness_from_rho(p: StableParams) -> Result<f64> {
    let a = p.alpha;
    if a == 1.0 {
        if p.rho == 0.5 {
            return Ok(0.0);
        }
        return Err(Error::Params(
            "alpha = 1 with rho != 1/2 has no strictly stable skewness".into(),
        ));
    }
    Ok((PI * a * (p.rho - 0.5)).tan() / (PI * a / 2.0).tan())
}

/// Inverse of [`skewness_from_rho`]: `ρ = 1/2 + arctan(β tan(πα/2)) / (πα)`.
pub fn rho_from_skewness(alpha: f64, beta: f64) -> f64 {
    if alpha == 1.0 {
        return 0.5;
    }
    0.5 + (beta * (PI * alpha / 2.0).tan()).atan() / (PI * alpha)
}

fn cms(rng: &mut RngStream, alpha: f64, shift: f64) -> f64 {
    let v = PI * (rng.open01() - 0.5);
    let w = rng.exp1();
    let av = alpha * (v + shift);
    let head = av.sin() / v.cos().powf(1.0 / alpha);
    if alpha == 1.0 {
        return head;
    }
    head * ((v - av).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Unit-time stable variable with parameters `p`.
pub fn sample_stable_unit(rng: &mut RngStream, p: StableParams) -> f64 {
    cms(rng, p.alpha, PI * (p.rho - 0.5))
}

/// Increment of the one-dimensional stable process over a time step `dt`.
pub fn sample_stable_1d(rng: &mut RngStream, p: StableParams, dt: f64) -> f64 {
    dt.powf(1.0 / p.alpha) * sample_stable_unit(rng, p)
}

/// Increment over `dt` of the stable subordinator with Laplace exponent
/// `λ^{alpha_half}`, `alpha_half ∈ (0, 1)`.
pub fn sample_subordinator(rng: &mut RngStream, alpha_half: f64, dt: f64) -> f64 {
    debug_assert!(alpha_half > 0.0 && alpha_half < 1.0);
    dt.powf(1.0 / alpha_half) * cms(rng, alpha_half, FRAC_PI_2)
}

/// Increment over `dt` of the isotropic planar stable process with
/// `E exp(i<z, X_dt>) = exp(-dt |z|^α)`.
pub fn sample_stable_planar(rng: &mut RngStream, alpha: f64, dt: f64) -> Complex64 {
    debug_assert!(alpha > 0.0 && alpha < 2.0);
    let s = sample_subordinator(rng, alpha / 2.0, dt);
    let r = (2.0 * s).sqrt();
    Complex64::new(r * rng.normal(), r * rng.normal())
}

/// Increment over `dt` of standard planar Brownian motion.
pub fn sample_brownian_planar(rng: &mut RngStream, dt: f64) -> Complex64 {
    let s = dt.sqrt();
    Complex64::new(s * rng.normal(), s * rng.normal())
}

/// Exact trajectory of the modulating chain `J` on `[0, t_max]`.
#[derive(Debug, Clone, Serialize)]
pub struct ChainTrajectory {
    pub initial: Sign,
    pub t_max: f64,
    /// Switch epochs and the state entered at each.
    pub switches: Vec<(f64, Sign)>,
}

impl ChainTrajectory {
    /// Number of `-1 → +1` switches, the counting process `N_t` at `t_max`.
    pub fn up_switches(&self) -> usize {
        self.switches.iter().filter(|(_, s)| *s == Sign::Plus).count()
    }

    /// Total time spent in each state `(+1, -1)`.
    pub fn occupation(&self) -> (f64, f64) {
        let mut occ = [0.0, 0.0];
        let mut state = self.initial;
        let mut last = 0.0;
        for &(t, s) in &self.switches {
            occ[usize::from(state == Sign::Minus)] += t - last;
            state = s;
            last = t;
        }
        occ[usize::from(state == Sign::Minus)] += self.t_max - last;
        (occ[0], occ[1])
    }

    /// Completed `+1 → -1 → +1` cycle durations, measured between `-1 → +1`
    /// switches.
    pub fn cycle_times(&self) -> Vec<f64> {
        let ups: Vec<f64> = self
            .switches
            .iter()
            .filter(|(_, s)| *s == Sign::Plus)
            .map(|(t, _)| *t)
            .collect();
        ups.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Simulate `J` with Q-matrix `F(0)` from `initial` up to `t_max`.
pub fn simulate_markov_chain_j(
    rng: &mut RngStream,
    p: StableParams,
    t_max: f64,
    initial: Sign,
) -> ChainTrajectory {
    let (down_rate, up_rate) = chain_rates(p);
    let mut t = 0.0;
    let mut state = initial;
    let mut switches = Vec::new();
    loop {
        let rate = match state {
            Sign::Plus => down_rate,
            Sign::Minus => up_rate,
        };
        t += rng.exp1() / rate;
        if t > t_max {
            break;
        }
        state = state.flip();
        switches.push((t, state));
    }
    ChainTrajectory {
        initial,
        t_max,
        switches,
    }
}
