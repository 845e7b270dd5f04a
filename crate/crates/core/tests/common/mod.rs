//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

/// B_2, B_4, ..., B_40 as exact fractions.
pub const BERNOULLI_EVEN: [(f64, f64); 20] = [
    (1.0, 6.0),
    (-1.0, 30.0),
    (1.0, 42.0),
    (-1.0, 30.0),
    (5.0, 66.0),
    (-691.0, 2730.0),
    (7.0, 6.0),
    (-3617.0, 510.0),
    (43867.0, 798.0),
    (-174611.0, 330.0),
    (854513.0, 138.0),
    (-236364091.0, 2730.0),
    (8553103.0, 6.0),
    (-23749461029.0, 870.0),
    (8615841276005.0, 14322.0),
    (-7709321041217.0, 510.0),
    (2577687858367.0, 6.0),
    (-26315271553053477373.0, 1919190.0),
    (2929993913841559.0, 6.0),
    (-261082718496449122051.0, 13530.0),
];

/// Stirling series for log Γ after shifting `z` to `Re z >= 25` by the
/// recurrence. The branch is the continuous one along the shift, which is the
/// principal branch for `Im z` of moderate size.
pub fn log_gamma_oracle(z: Complex64) -> Complex64 {
    assert!(z.re > 0.0, "oracle needs Re z > 0");
    let mut shift = Complex64::new(0.0, 0.0);
    let mut w = z;
    while w.re < 25.0 {
        shift += w.ln();
        w += 1.0;
    }
    let mut s = (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln();
    let w2 = w * w;
    let mut pow = w;
    for (k, (num, den)) in BERNOULLI_EVEN.iter().enumerate() {
        let two_k = 2.0 * (k + 1) as f64;
        s += num / den / (two_k * (two_k - 1.0)) / pow;
        pow *= w2;
    }
    s - shift
}

/// Γ on the real line: Stirling for `x > 0`, reflection below.
pub fn gamma_oracle(x: f64) -> f64 {
    if x > 0.0 {
        log_gamma_oracle(Complex64::new(x, 0.0)).re.exp()
    } else {
        PI / ((PI * x).sin() * gamma_oracle(1.0 - x))
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
