//! Goodness-of-fit tests and Monte Carlo error estimates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatTestKind {
    KsOneSample,
    KsTwoSample,
    ChiSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatTest {
    pub kind: StatTestKind,
    pub statistic: f64,
    pub p_value: f64,
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.3 {
        // The alternating series converges slowly here; use the theta-function
        // form of the CDF instead.
        let x = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (0..20)
            .map(|k| (-((2 * k + 1) as f64).powi(2) * x).exp())
            .sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> StatTest {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    StatTest {
        kind: StatTestKind::KsOneSample,
        statistic: d,
        p_value: ks_p_value(d, n),
    }
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> StatTest {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    StatTest {
        kind: StatTestKind::KsTwoSample,
        statistic: d,
        p_value: ks_p_value(d, n * m / (n + m)),
    }
}

fn chi_square_sf(stat: f64, df: usize) -> f64 {
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    (1.0 - dist.cdf(stat)).clamp(0.0, 1.0)
}

/// Pearson test of observed counts against expected counts. `constraints`
/// is the number of degrees of freedom removed (1 when the expected counts
/// are normalised to the observed total).
pub fn chi_square(observed: &[u64], expected: &[f64], constraints: usize) -> StatTest {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    StatTest {
        kind: StatTestKind::ChiSquare,
        statistic: stat,
        p_value: chi_square_sf(stat, observed.len() - constraints),
    }
}

/// Homogeneity test between two binned samples of possibly different sizes.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> StatTest {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let k1 = (nb as f64 / na as f64).sqrt();
    let k2 = (na as f64 / nb as f64).sqrt();
    let mut stat = 0.0;
    let mut bins = 0;
    for (&x, &y) in a.iter().zip(b) {
        if x + y == 0 {
            continue;
        }
        bins += 1;
        stat += (k1 * x as f64 - k2 * y as f64).powi(2) / (x + y) as f64;
    }
    StatTest {
        kind: StatTestKind::ChiSquare,
        statistic: stat,
        p_value: chi_square_sf(stat, bins - 1),
    }
}

/// Mean and standard error from `n_batches` contiguous batch means.
pub fn batch_means(samples: &[f64], n_batches: usize) -> (f64, f64) {
    let n = samples.len();
    let b = n_batches.min(n).max(1);
    let means: Vec<f64> = (0..b)
        .map(|k| {
            let chunk = &samples[k * n / b..(k + 1) * n / b];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if b < 2 {
        return (mean, f64::INFINITY);
    }
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

/// Median of `groups` contiguous group means, with a standard error from the
/// spread of the group means scaled by the large-sample efficiency of the
/// median (`sqrt(π/2)`).
pub fn median_of_means(samples: &[f64], groups: usize) -> (f64, f64) {
    let n = samples.len();
    let g = groups.min(n).max(1);
    let mut means: Vec<f64> = (0..g)
        .map(|k| {
            let chunk = &samples[k * n / g..(k + 1) * n / g];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    let centre = means.iter().sum::<f64>() / g as f64;
    let sd = if g > 1 {
        (means.iter().map(|m| (m - centre).powi(2)).sum::<f64>() / (g - 1) as f64).sqrt()
    } else {
        f64::INFINITY
    };
    means.sort_by(f64::total_cmp);
    let med = if g % 2 == 1 {
        means[g / 2]
    } else {
        0.5 * (means[g / 2 - 1] + means[g / 2])
    };
    (med, (std::f64::consts::PI / 2.0).sqrt() * sd / (g as f64).sqrt())
}

pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn sample_variance(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Standard error of the sample variance, from the fourth central moment.
pub fn variance_se(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2) / n).max(0.0).sqrt()
}

pub fn median(samples: &[f64]) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_values() {
        // Standard table values.
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 3e-4);
        assert!((kolmogorov_sf(0.5) - 0.9639).abs() < 5e-4);
        let lo = kolmogorov_sf(0.29999);
        let hi = kolmogorov_sf(0.30001);
        assert!((lo - hi).abs() < 1e-4);
    }

    #[test]
    fn ks_uniform_grid_fits() {
        let x: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 1000.0).collect();
        let t = ks_one_sample(&x, |v| v);
        assert!(t.statistic <= 0.0005 + 1e-12);
        assert!(t.p_value > 0.99);
        let shifted: Vec<f64> = x.iter().map(|v| v * 0.5).collect();
        assert!(ks_one_sample(&shifted, |v| v.clamp(0.0, 1.0)).p_value < 1e-6);
    }

    #[test]
    fn ks_two_sample_identical() {
        let x: Vec<f64> = (0..500).map(|k| k as f64).collect();
        let t = ks_two_sample(&x, &x);
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        let y: Vec<f64> = x.iter().map(|v| v + 250.0).collect();
        assert!((ks_two_sample(&x, &y).statistic - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chi_square_exact_fit() {
        let t = chi_square(&[10, 20, 30], &[10.0, 20.0, 30.0], 1);
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
        let u = chi_square_two_sample(&[10, 20, 30], &[20, 40, 60]);
        assert!(u.statistic.abs() < 1e-12);
    }

    #[test]
    fn batch_and_median_of_means() {
        let x: Vec<f64> = (0..3000).map(|k| (k % 7) as f64).collect();
        let (m, se) = batch_means(&x, 30);
        assert!((m - 3.0).abs() < 0.01);
        assert!(se < 0.1);
        let (mm, _) = median_of_means(&x, 32);
        assert!((mm - 3.0).abs() < 0.05);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-9);
    }
}
