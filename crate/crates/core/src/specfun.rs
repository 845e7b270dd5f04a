//! Gamma-family special functions on the real line and in the complex plane.
//!
//! Both entry points use the Lanczos approximation (g = 7, nine terms). For the
//! complex logarithm the argument is pushed into `Re(z) >= 0.5` with the
//! recurrence `log Γ(z) = log Γ(z + 1) - log z`, which keeps the result on the
//! principal branch (continuous away from the negative real axis). The real
//! gamma function uses the reflection formula below `x = 0.5`.
//!
//! Poles are reported as [`Error::Pole`], never as infinities.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex numbers as used throughout the crate.
pub type ComplexValue = Complex64;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `0.5 * ln(2π)`
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// `sin(πx)` with argument reduction, exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    if x == x.floor() {
        return 0.0;
    }
    let r = x - 2.0 * (x / 2.0).round();
    if r > 0.5 {
        (PI * (1.0 - r)).sin()
    } else if r < -0.5 {
        -(PI * (1.0 + r)).sin()
    } else {
        (PI * r).sin()
    }
}

fn lanczos_sum_complex(x: Complex64) -> Complex64 {
    let mut acc = Complex64::new(LANCZOS_COEFFS[0], 0.0);
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += *c / (x + i as f64);
    }
    acc
}

fn lanczos_sum_real(x: f64) -> f64 {
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// Principal branch of `log Γ(z)`.
pub fn log_gamma_complex(z: ComplexValue) -> Result<ComplexValue> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::domain("log_gamma_complex", z.re));
    }
    if z.im == 0.0 && is_nonpositive_integer(z.re) {
        return Err(Error::Pole { at: z.re });
    }
    // Shift right until the Lanczos sum is accurate.
    let mut shift = Complex64::new(0.0, 0.0);
    let mut w = z;
    while w.re < 0.5 {
        shift += w.ln();
        w += 1.0;
    }
    let x = w - 1.0;
    let t = x + LANCZOS_G + 0.5;
    let main = HALF_LN_2PI + (x + 0.5) * t.ln() - t + lanczos_sum_complex(x).ln();
    Ok(main - shift)
}

/// `Γ(z)` for complex `z`, via the logarithm.
pub fn gamma_complex(z: ComplexValue) -> Result<ComplexValue> {
    Ok(log_gamma_complex(z)?.exp())
}

/// `1/Γ(z)`; entire, so poles of `Γ` map to zero.
pub fn recip_gamma_complex(z: ComplexValue) -> ComplexValue {
    match log_gamma_complex(z) {
        Ok(lg) => (-lg).exp(),
        Err(_) => Complex64::new(0.0, 0.0),
    }
}

/// `Γ(x)` for real `x`, including negative non-integers.
pub fn gamma_real(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain("gamma_real", x));
    }
    if is_nonpositive_integer(x) {
        return Err(Error::Pole { at: x });
    }
    if x < 0.5 {
        let g = gamma_real(1.0 - x)?;
        return Ok(PI / (sin_pi(x) * g));
    }
    if x > 171.7 {
        return Ok(f64::INFINITY);
    }
    let y = x - 1.0;
    let t = y + LANCZOS_G + 0.5;
    let a = lanczos_sum_real(y);
    // Split the power so that t^(y+0.5) does not overflow before exp(-t) damps it.
    let half = t.powf(0.5 * (y + 0.5));
    Ok((2.0 * PI).sqrt() * half * ((-t).exp() * half) * a)
}

/// `ln |Γ(x)|` for real `x`.
pub fn ln_gamma_abs(x: f64) -> Result<f64> {
    if is_nonpositive_integer(x) {
        return Err(Error::Pole { at: x });
    }
    if x < 0.5 {
        return Ok(PI.ln() - sin_pi(x).abs().ln() - ln_gamma_abs(1.0 - x)?);
    }
    let y = x - 1.0;
    let t = y + LANCZOS_G + 0.5;
    Ok(HALF_LN_2PI + (y + 0.5) * t.ln() - t + lanczos_sum_real(y).ln())
}

/// `1/Γ(x)`, zero at the poles of `Γ`.
pub fn recip_gamma_real(x: f64) -> f64 {
    match gamma_real(x) {
        Ok(g) => 1.0 / g,
        Err(_) => 0.0,
    }
}

/// Euler beta function `B(a, b)` for positive arguments.
pub fn beta(a: f64, b: f64) -> Result<f64> {
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::domain("beta", a.min(b)));
    }
    Ok((ln_gamma_abs(a)? + ln_gamma_abs(b)? - ln_gamma_abs(a + b)?).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn log_gamma_at_one_and_half() {
        let v = log_gamma_complex(Complex64::new(1.0, 0.0)).unwrap();
        assert!(v.norm() < 1e-15);
        let v = log_gamma_complex(Complex64::new(0.5, 0.0)).unwrap();
        assert!((v.re - 0.572_364_942_924_700_1).abs() < 1e-14);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn factorials_and_negative_half_integers() {
        assert!(rel(gamma_real(4.0).unwrap(), 6.0) < 1e-14);
        assert!(rel(gamma_real(11.0).unwrap(), 3_628_800.0) < 1e-14);
        let expected = 4.0 * PI.sqrt() / 3.0;
        assert!(rel(gamma_real(-1.5).unwrap(), expected) < 1e-14);
    }

    #[test]
    fn poles_are_errors() {
        for x in [0.0, -1.0, -2.0, -7.0] {
            assert!(matches!(gamma_real(x), Err(Error::Pole { .. })));
            assert!(matches!(
                log_gamma_complex(Complex64::new(x, 0.0)),
                Err(Error::Pole { .. })
            ));
            assert_eq!(recip_gamma_real(x), 0.0);
        }
    }

    #[test]
    fn negative_non_integer_reflection_residual() {
        let x = -1.2;
        let lhs = gamma_real(x).unwrap() * gamma_real(1.0 - x).unwrap();
        let rhs = PI / sin_pi(x);
        assert!(rel(lhs, rhs) < 1e-12);
    }

    #[test]
    fn negative_real_axis_branch() {
        // log Γ(-0.5) = ln(4√π/3)... with Γ(-0.5) = -2√π, principal branch carries -iπ.
        let v = log_gamma_complex(Complex64::new(-0.5, 0.0)).unwrap();
        assert!((v.re - (2.0 * PI.sqrt()).ln()).abs() < 1e-14);
        assert!((v.im + PI).abs() < 1e-14);
    }

    #[test]
    fn sin_pi_exact_zeros() {
        assert_eq!(sin_pi(3.0), 0.0);
        assert_eq!(sin_pi(-2.0), 0.0);
        assert!((sin_pi(0.5) - 1.0).abs() < 1e-16);
        assert!((sin_pi(-0.25) + 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn beta_matches_gamma_ratio() {
        let b = beta(0.25, 0.25).unwrap();
        let g = gamma_real(0.25).unwrap();
        assert!(rel(b, g * g / gamma_real(0.5).unwrap()) < 1e-13);
    }
}
