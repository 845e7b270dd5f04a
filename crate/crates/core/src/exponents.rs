//! Closed-form exponents, matrix exponents, densities and limit constants for
//! stable processes and their Lamperti-type decompositions.
//!
//! Parameters are `(alpha, rho)` with `rho = P_0(X_t > 0)` throughout. Values
//! that diverge (the Cauchy case of the upcrossing law, for instance) are
//! returned as [`ConstantValue::Infinite`] rather than as a float overflow.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::quad;
use crate::specfun::{
    beta, gamma_real, log_gamma_complex, recip_gamma_complex, recip_gamma_real, sin_pi,
    ComplexValue,
};

/// Index `alpha` and positivity parameter `rho` of a one-dimensional stable
/// process. Admissible pairs have jumps of both signs: `alpha * rho` and
/// `alpha * (1 - rho)` both lie in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub rho: f64,
}

impl StableParams {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::Params(format!("alpha = {alpha} not in (0, 2)")));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Params(format!("rho = {rho} not in (0, 1)")));
        }
        let (a, b) = (alpha * rho, alpha * (1.0 - rho));
        if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
            return Err(Error::Params(format!(
                "alpha*rho = {a} and alpha*(1-rho) = {b} must both lie in (0, 1)"
            )));
        }
        Ok(Self { alpha, rho })
    }

    /// Symmetric process of index `alpha`.
    pub fn symmetric(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.5)
    }

    pub fn rho_hat(&self) -> f64 {
        1.0 - self.rho
    }

    /// The dual pair `(alpha, 1 - rho)`, i.e. the law of `-X`.
    pub fn dual(&self) -> Self {
        Self {
            alpha: self.alpha,
            rho: self.rho_hat(),
        }
    }
}

/// A constant that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstantValue {
    Finite(f64),
    Infinite,
}

impl ConstantValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            ConstantValue::Finite(v) => Some(v),
            ConstantValue::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ConstantValue::Infinite)
    }
}

impl Serialize for ConstantValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ConstantValue::Finite(v) => s.serialize_f64(*v),
            ConstantValue::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ConstantValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ConstantValue::Finite(v)),
            Raw::Str(s) if s == "inf" => Ok(ConstantValue::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad constant `{s}`"))),
        }
    }
}

/// Which Lamperti–Kiu matrix exponent: that of `X` or of `X` conditioned to
/// be absorbed continuously at (or to avoid) the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentKind {
    F,
    FCirc,
}

/// Modulating states of the two-state chain `J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn index(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn of(x: f64) -> Self {
        if x >= 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// 2×2 matrix exponent evaluated at a real argument. Row/column order is
/// `(+1, -1)`, so `entries[0][1]` is the `+1 → -1` entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixExponent {
    pub entries: [[f64; 2]; 2],
    pub arg: f64,
    pub kind: ExponentKind,
}

impl MatrixExponent {
    pub fn get(&self, from: Sign, to: Sign) -> f64 {
        self.entries[from.index()][to.index()]
    }

    pub fn row_sums(&self) -> [f64; 2] {
        [
            self.entries[0][0] + self.entries[0][1],
            self.entries[1][0] + self.entries[1][1],
        ]
    }
}

fn check_alpha(alpha: f64, what: &'static str) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::domain(what, alpha))
    }
}

/// Ψ evaluated at a complex point; the real-axis function and its analytic
/// continuation share this body.
fn planar_psi_complex(z: Complex64, alpha: f64) -> Result<Complex64> {
    let i = Complex64::i();
    let num = log_gamma_complex((-i * z + alpha) / 2.0)? + log_gamma_complex((i * z + 2.0) / 2.0)?;
    let den = recip_gamma_complex(-i * z / 2.0) * recip_gamma_complex((i * z + 2.0 - alpha) / 2.0);
    Ok(2f64.powf(alpha) * num.exp() * den)
}

/// Characteristic exponent `Ψ(z) = -log E[exp(i z ξ_1)]` of the radial
/// Lamperti component `ξ` of the isotropic planar stable process.
pub fn planar_psi(z: f64, alpha: f64) -> Result<ComplexValue> {
    check_alpha(alpha, "planar_psi")?;
    planar_psi_complex(Complex64::new(z, 0.0), alpha)
}

/// Exponent of the radial component of the conditioned process, obtained by
/// the Esscher shift `Ψ°(z) = Ψ(z - i(α - 2))`.
pub fn planar_psi_conditioned(z: f64, alpha: f64) -> Result<ComplexValue> {
    check_alpha(alpha, "planar_psi_conditioned")?;
    planar_psi_complex(Complex64::new(z, -(alpha - 2.0)), alpha)
}

/// Laplace exponent `ψ_ξ(u) = -Ψ(-iu)` on `u ∈ (-2, α)`.
pub fn planar_laplace_psi(u: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha, "planar_laplace_psi")?;
    if !(u > -2.0 && u < alpha) {
        return Err(Error::domain("planar_laplace_psi", u));
    }
    // Real arithmetic: Ψ(-iu) = 2^α Γ((α-u)/2) Γ((u+2)/2) / (Γ(-u/2) Γ((u+2-α)/2)).
    let v = 2f64.powf(alpha)
        * gamma_real((alpha - u) / 2.0)?
        * gamma_real((u + 2.0) / 2.0)?
        * recip_gamma_real(-u / 2.0)
        * recip_gamma_real((u + 2.0 - alpha) / 2.0);
    Ok(-v)
}

/// Matrix exponent `F(z)` (strip `(-1, α)`) or `F°(z)` (strip `(-α, 1)`) of
/// the Markov additive process underlying `X` via the Lamperti–Kiu transform.
pub fn map_exponent(z: f64, p: StableParams, kind: ExponentKind) -> Result<MatrixExponent> {
    let a = p.alpha;
    let (ar, arh) = (a * p.rho, a * p.rho_hat());
    let entries = match kind {
        ExponentKind::F => {
            if !(z > -1.0 && z < a) {
                return Err(Error::domain("map_exponent(F)", z));
            }
            let c = gamma_real(a - z)? * gamma_real(1.0 + z)?;
            [
                [
                    -c * recip_gamma_real(arh - z) * recip_gamma_real(1.0 - arh + z),
                    c * recip_gamma_real(arh) * recip_gamma_real(1.0 - arh),
                ],
                [
                    c * recip_gamma_real(ar) * recip_gamma_real(1.0 - ar),
                    -c * recip_gamma_real(ar - z) * recip_gamma_real(1.0 - ar + z),
                ],
            ]
        }
        ExponentKind::FCirc => {
            if !(z > -a && z < 1.0) {
                return Err(Error::domain("map_exponent(F°)", z));
            }
            let c = gamma_real(1.0 - z)? * gamma_real(a + z)?;
            [
                [
                    -c * recip_gamma_real(1.0 - ar - z) * recip_gamma_real(ar + z),
                    c * recip_gamma_real(ar) * recip_gamma_real(1.0 - ar),
                ],
                [
                    c * recip_gamma_real(arh) * recip_gamma_real(1.0 - arh),
                    -c * recip_gamma_real(1.0 - arh - z) * recip_gamma_real(arh + z),
                ],
            ]
        }
    };
    Ok(MatrixExponent {
        entries,
        arg: z,
        kind,
    })
}

/// Switching rates `(+1 → -1, -1 → +1)` of the modulating chain, i.e. the
/// off-diagonal entries of `F(0)`.
pub fn chain_rates(p: StableParams) -> (f64, f64) {
    let g = gamma_real(p.alpha).expect("alpha in (0,2) is not a pole");
    (
        g * sin_pi(p.alpha * p.rho_hat()) / PI,
        g * sin_pi(p.alpha * p.rho) / PI,
    )
}

/// Long-run rate of `-1 → +1` switches of the modulating chain.
pub fn renewal_rate(p: StableParams) -> f64 {
    let (s, sh) = (sin_pi(p.alpha * p.rho), sin_pi(p.alpha * p.rho_hat()));
    gamma_real(p.alpha).expect("alpha in (0,2) is not a pole") * s * sh / (PI * (s + sh))
}

/// `E_0 |X_1|^{-α}` for `α ∈ (0, 1]`; infinite in the Cauchy case.
pub fn clock_mean_1d(p: StableParams) -> Result<ConstantValue> {
    if p.alpha > 1.0 {
        return Err(Error::domain("clock_mean_1d", p.alpha));
    }
    if p.alpha == 1.0 {
        return Ok(ConstantValue::Infinite);
    }
    let (s, sh) = (sin_pi(p.alpha * p.rho), sin_pi(p.alpha * p.rho_hat()));
    Ok(ConstantValue::Finite(
        (s + sh) / (gamma_real(1.0 + p.alpha)? * sin_pi(p.alpha)),
    ))
}

/// Almost-sure rate of upcrossings per unit of logarithmic time.
pub fn upcrossing_constant(p: StableParams) -> ConstantValue {
    if p.alpha == 1.0 {
        return ConstantValue::Infinite;
    }
    let (s, sh) = (sin_pi(p.alpha * p.rho), sin_pi(p.alpha * p.rho_hat()));
    ConstantValue::Finite(s * sh / (p.alpha * PI * sin_pi(p.alpha).abs()))
}

/// `E_0 |X_1|^{-α}` for the isotropic planar process.
pub fn planar_clock_mean(alpha: f64) -> Result<f64> {
    check_alpha(alpha, "planar_clock_mean")?;
    Ok(2f64.powf(-alpha) * gamma_real(1.0 - alpha / 2.0)? / gamma_real(1.0 + alpha / 2.0)?)
}

/// One-sided fractional moment `E[X_1^s ; X_1 > 0]` on the strip `(-1, α)`.
pub fn zolotarev_moment(s: f64, p: StableParams) -> Result<f64> {
    if !(s > -1.0 && s < p.alpha) {
        return Err(Error::domain("zolotarev_moment", s));
    }
    if s.abs() < 1e-10 {
        return Ok(p.rho);
    }
    // sin(πρs)/sin(πs) · Γ(1-s/α)/Γ(1-s), with Γ(1-s) sin(πs) = π/Γ(s)
    // removing the removable singularity at s = 1.
    Ok(sin_pi(p.rho * s) * gamma_real(s)? * gamma_real(1.0 - s / p.alpha)? / PI)
}

/// `E°_0 |X°_1|^{-α}` for the process conditioned to avoid the origin,
/// `α ∈ (1, 2)`.
pub fn conditioned_clock_mean(p: StableParams) -> Result<f64> {
    if !(p.alpha > 1.0 && p.alpha < 2.0) {
        return Err(Error::domain("conditioned_clock_mean", p.alpha));
    }
    let (s, sh) = (sin_pi(p.alpha * p.rho), sin_pi(p.alpha * p.rho_hat()));
    Ok(gamma_real(-p.alpha)? * (s + sh) / PI)
}

/// Harmonic weight `h(x)` of the one-dimensional Doob transform.
pub fn h_weight(x: f64, p: StableParams) -> Result<f64> {
    if x == 0.0 || !x.is_finite() {
        return Err(Error::domain("h_weight", x));
    }
    let side = if x >= 0.0 {
        sin_pi(p.alpha * p.rho_hat())
    } else {
        sin_pi(p.alpha * p.rho)
    };
    Ok(side * x.abs().powf(p.alpha - 1.0))
}

/// Planar harmonic weight `|x|^{α-2}`.
pub fn planar_h_weight(x: Complex64, alpha: f64) -> Result<f64> {
    let r = x.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::domain("planar_h_weight", r));
    }
    Ok(r.powf(alpha - 2.0))
}

fn entry_params(p: StableParams) -> Result<(f64, f64)> {
    if !(p.alpha > 1.0 && p.alpha < 2.0) {
        return Err(Error::domain("entry_density", p.alpha));
    }
    Ok((1.0 - p.alpha * p.rho, 1.0 - p.alpha * p.rho_hat()))
}

/// Normalising constant `2^{α-1} Γ(2-α) / (Γ(1-αρ̂) Γ(1-αρ))` of the entry law.
pub fn entry_density_constant(p: StableParams) -> Result<f64> {
    entry_params(p)?;
    let a = p.alpha;
    Ok(2f64.powf(a - 1.0) * gamma_real(2.0 - a)?
        / (gamma_real(1.0 - a * p.rho_hat())? * gamma_real(1.0 - a * p.rho)?))
}

/// The same constant via the Beta integral `∫(1+y)^{a-1}(1-y)^{b-1} = 2^{a+b-1} B(a,b)`.
pub fn entry_density_constant_beta(p: StableParams) -> Result<f64> {
    let (a, b) = entry_params(p)?;
    Ok(1.0 / (2f64.powf(a + b - 1.0) * beta(a, b)?))
}

fn entry_density_split(one_plus: f64, one_minus: f64, p: StableParams, c: f64) -> f64 {
    c * one_plus.powf(-p.alpha * p.rho) * one_minus.powf(-p.alpha * p.rho_hat())
}

/// Density on `(-1, 1)` of the position at which the process, started from
/// `|x| → ∞`, first enters the interval. Requires `α ∈ (1, 2)`.
pub fn entry_density(y: f64, p: StableParams) -> Result<f64> {
    let c = entry_density_constant(p)?;
    if !(y > -1.0 && y < 1.0) {
        return Err(Error::domain("entry_density", y));
    }
    Ok(entry_density_split(1.0 + y, 1.0 - y, p, c))
}

/// `P(Y ≤ y)` for the entry law; `(1 + Y)/2` is Beta(1-αρ, 1-αρ̂).
pub fn entry_cdf(y: f64, p: StableParams) -> Result<f64> {
    let (a, b) = entry_params(p)?;
    if y <= -1.0 {
        return Ok(0.0);
    }
    if y >= 1.0 {
        return Ok(1.0);
    }
    Ok(statrs::function::beta::beta_reg(a, b, (1.0 + y) / 2.0))
}

/// `∫_{-1}^{1} entry_density`, split at 0. On each side `1 ± y = s^{1/e}`
/// cancels the endpoint power exactly, leaving a smooth integrand in `s`.
pub fn entry_density_integral(p: StableParams) -> Result<f64> {
    let c = entry_density_constant(p)?;
    let (a, b) = entry_params(p)?;
    let left = quad::tanh_sinh(|s, _| (2.0 - s.powf(1.0 / a)).powf(b - 1.0) / a, 1e-14, 14);
    let right = quad::tanh_sinh(|s, _| (2.0 - s.powf(1.0 / b)).powf(a - 1.0) / b, 1e-14, 14);
    Ok(c * (left + right))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: f64, r: f64) -> StableParams {
        StableParams::new(a, r).unwrap()
    }

    #[test]
    fn admissibility() {
        assert!(StableParams::new(1.5, 0.5).is_ok());
        assert!(StableParams::new(1.5, 0.7).is_err()); // αρ > 1
        assert!(StableParams::new(2.0, 0.5).is_err());
        assert!(StableParams::new(0.5, 0.0).is_err());
        assert!(StableParams::new(1.0, 0.3).is_ok());
    }

    #[test]
    fn psi_vanishes_at_zero() {
        let v = planar_psi(0.0, 1.3).unwrap();
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn laplace_psi_roots_and_domain() {
        let a = 1.3;
        assert_eq!(planar_laplace_psi(0.0, a).unwrap(), 0.0);
        assert!(planar_laplace_psi(a - 2.0, a).unwrap().abs() < 1e-10);
        assert!(planar_laplace_psi(-2.0, a).is_err());
        assert!(planar_laplace_psi(a, a).is_err());
    }

    #[test]
    fn laplace_psi_is_convex() {
        let a = 0.8;
        let (lo, hi) = (-1.9, a - 0.01);
        let h = (hi - lo) / 49.0;
        let v: Vec<f64> = (0..50)
            .map(|k| planar_laplace_psi(lo + k as f64 * h, a).unwrap())
            .collect();
        for w in v.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] > 0.0);
        }
    }

    #[test]
    fn f_zero_is_q_matrix() {
        let m = map_exponent(0.0, p(0.5, 0.5), ExponentKind::F).unwrap();
        for s in m.row_sums() {
            assert!(s.abs() < 1e-12);
        }
        let expected = gamma_real(0.5).unwrap() * (PI / 4.0).sin() / PI;
        assert!((m.get(Sign::Plus, Sign::Minus) - expected).abs() < 1e-14);
        assert!((expected - 0.398_942_280_4).abs() < 1e-9);
    }

    #[test]
    fn f_circ_zero_swaps_rho() {
        let q = p(1.3, 0.4);
        let fc = map_exponent(0.0, q, ExponentKind::FCirc).unwrap();
        let f = map_exponent(0.0, q.dual(), ExponentKind::F).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((fc.entries[i][j] - f.entries[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn strips_are_enforced() {
        let q = p(0.7, 0.3);
        assert!(map_exponent(-1.0, q, ExponentKind::F).is_err());
        assert!(map_exponent(0.7, q, ExponentKind::F).is_err());
        assert!(map_exponent(-0.7, q, ExponentKind::FCirc).is_err());
        assert!(map_exponent(0.9, q, ExponentKind::FCirc).is_ok());
    }

    #[test]
    fn renewal_rate_values() {
        assert!((renewal_rate(p(1.0, 0.5)) - 1.0 / (2.0 * PI)).abs() < 1e-14);
        let v = PI.sqrt() * 0.5 / (PI * 2f64.sqrt());
        assert!((renewal_rate(p(0.5, 0.5)) - v).abs() < 1e-14);
        assert!((v - 0.199_471).abs() < 1e-6);
    }

    #[test]
    fn clock_means() {
        let v = clock_mean_1d(p(0.5, 0.5)).unwrap().finite().unwrap();
        assert!((v - 2f64.sqrt() / gamma_real(1.5).unwrap()).abs() < 1e-13);
        assert!((v - 1.595_769).abs() < 1e-6);
        assert!(clock_mean_1d(p(1.0, 0.5)).unwrap().is_infinite());
        assert!(clock_mean_1d(p(1.2, 0.5)).is_err());
    }

    #[test]
    fn upcrossing_constants() {
        let c = upcrossing_constant(p(0.5, 0.5)).finite().unwrap();
        assert!((c - 1.0 / PI).abs() < 1e-14);
        assert!(upcrossing_constant(p(1.0, 0.3)).is_infinite());
        let c = upcrossing_constant(p(1.5, 0.5)).finite().unwrap();
        assert!((c - 1.0 / (3.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn planar_clock_mean_values() {
        assert!((planar_clock_mean(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((planar_clock_mean(1e-9).unwrap() - 1.0).abs() < 1e-8);
        let v = 2f64.powf(-0.5) * gamma_real(0.75).unwrap() / gamma_real(1.25).unwrap();
        assert!((planar_clock_mean(0.5).unwrap() - v).abs() < 1e-14);
        assert!((v - 0.955_97).abs() < 1e-5);
    }

    #[test]
    fn zolotarev_values() {
        let q = p(0.5, 0.5);
        assert_eq!(zolotarev_moment(0.0, q).unwrap(), 0.5);
        assert!((zolotarev_moment(1e-7, q).unwrap() - 0.5).abs() < 1e-6);
        let v = ((-PI / 4.0).sin() / (-PI / 2.0).sin()) / gamma_real(1.5).unwrap();
        assert!((zolotarev_moment(-0.5, q).unwrap() - v).abs() < 1e-13);
        assert!((v - 0.797_885).abs() < 1e-6);
        assert!(zolotarev_moment(-1.0, q).is_err());
        assert!(zolotarev_moment(0.5, q).is_err());
        // Removable singularity at s = 1 for α > 1.
        let q = p(1.5, 0.5);
        let left = zolotarev_moment(1.0 - 1e-7, q).unwrap();
        let mid = zolotarev_moment(1.0, q).unwrap();
        assert!((left - mid).abs() < 1e-5);
    }

    #[test]
    fn two_tails_give_clock_mean() {
        let q = p(0.6, 0.4);
        let s = zolotarev_moment(-0.6, q).unwrap() + zolotarev_moment(-0.6, q.dual()).unwrap();
        let c = clock_mean_1d(q).unwrap().finite().unwrap();
        assert!((s - c).abs() < 1e-12);
    }

    #[test]
    fn conditioned_clock_mean_values() {
        let q = p(1.5, 0.5);
        let v = conditioned_clock_mean(q).unwrap();
        let expected = (4.0 * PI.sqrt() / 3.0) * 2f64.sqrt() / PI;
        assert!((v - expected).abs() < 1e-13);
        assert!((v - 1.063_85).abs() < 1e-5);
        assert!(conditioned_clock_mean(p(1.0, 0.5)).is_err());
    }

    #[test]
    fn h_weights() {
        let q = p(0.7, 0.3);
        assert!((h_weight(1.0, q).unwrap() - sin_pi(0.7 * 0.7)).abs() < 1e-15);
        assert!((h_weight(-1.0, q).unwrap() - sin_pi(0.7 * 0.3)).abs() < 1e-15);
        assert!(h_weight(0.0, q).is_err());
        let c: f64 = 3.7;
        for x in [-2.5, 0.3, 11.0] {
            let lhs = h_weight(c * x, q).unwrap();
            let rhs = c.powf(q.alpha - 1.0) * h_weight(x, q).unwrap();
            assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs());
        }
        assert_eq!(planar_h_weight(Complex64::new(0.6, 0.8), 1.3).unwrap(), 1.0);
        assert!((planar_h_weight(Complex64::new(0.0, 2.0), 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(planar_h_weight(Complex64::new(0.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn entry_density_values() {
        let q = p(1.5, 0.5);
        let v = entry_density(0.0, q).unwrap();
        let expected = 2f64.sqrt() * gamma_real(0.5).unwrap() / gamma_real(0.25).unwrap().powi(2);
        assert!((v - expected).abs() < 1e-14);
        assert!((v - 0.190_69).abs() < 1e-5);
        assert!(entry_density(1.0, q).is_err());
        assert!(entry_density(0.0, p(0.9, 0.5)).is_err());
        let a = entry_density(1.0 - 1e-6, q).unwrap();
        let b = entry_density(1.0 - 1e-9, q).unwrap();
        assert!(b > 100.0 * a);
    }

    #[test]
    fn entry_density_normalised() {
        for q in [p(1.5, 0.5), p(1.3, 0.6), p(1.9, 0.5)] {
            let i = entry_density_integral(q).unwrap();
            assert!((i - 1.0).abs() < 1e-8, "{q:?}: {i}");
            let c1 = entry_density_constant(q).unwrap();
            let c2 = entry_density_constant_beta(q).unwrap();
            assert!((c1 - c2).abs() < 1e-12 * c1);
        }
    }

    #[test]
    fn entry_cdf_matches_density() {
        let q = p(1.3, 0.6);
        let h = 1e-5;
        for y in [-0.7, 0.0, 0.4] {
            let d = (entry_cdf(y + h, q).unwrap() - entry_cdf(y - h, q).unwrap()) / (2.0 * h);
            assert!((d - entry_density(y, q).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_value_json() {
        let s = serde_json::to_string(&ConstantValue::Infinite).unwrap();
        assert_eq!(s, "\"inf\"");
        let v: ConstantValue = serde_json::from_str("0.25").unwrap();
        assert_eq!(v, ConstantValue::Finite(0.25));
    }
}
