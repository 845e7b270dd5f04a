//! Property tests for identities that hold for every admissible input.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use stable_windings::exponents::*;
use stable_windings::path_engine::*;
use stable_windings::sampler::{rho_from_skewness, sample_stable_1d, skewness_from_rho, RngStream};
use stable_windings::specfun::{gamma_real, log_gamma_complex};
use stable_windings::transforms::{kelvin, rbz_transform, reverse_from_last_exit};

/// Admissible `(α, ρ)`: both `αρ` and `α(1-ρ)` in `(0, 1)`.
fn params() -> impl Strategy<Value = StableParams> {
    (0.05f64..1.95, 0.02f64..0.98).prop_map(|(a, u)| {
        let lo = (1.0 - 1.0 / a).max(0.0);
        let hi = (1.0 / a).min(1.0);
        StableParams::new(a, lo + u * (hi - lo)).unwrap()
    })
}

fn non_integer(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo..hi).prop_filter("away from integers", |x| (x - x.round()).abs() > 1e-3)
}

fn planar_walk(seed: u64, n: usize) -> PathSkeleton<Complex64> {
    let mut rng = RngStream::new(seed, 0);
    let grid: Vec<f64> = (0..n).map(|k| k as f64 * 0.1).collect();
    simulate_skeleton(&mut rng, &StablePlanar(1.3), &grid, Complex64::new(1.0, 0.5), false).unwrap()
}

fn line_walk(seed: u64, n: usize, p: StableParams) -> PathSkeleton<f64> {
    let mut rng = RngStream::new(seed, 1);
    let grid: Vec<f64> = (0..n).map(|k| 0.5 + k as f64).collect();
    simulate_skeleton(&mut rng, &Stable1d(p), &grid, 0.3, false).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gamma_reflection(x in non_integer(-2.0, 2.0)) {
        let want = PI / (PI * x).sin();
        let got = gamma_real(x).unwrap() * gamma_real(1.0 - x).unwrap();
        prop_assert!(((got - want) / want).abs() < 1e-12);
    }

    #[test]
    fn gamma_recurrence(x in non_integer(-3.0, 10.0)) {
        let (g1, g0) = (gamma_real(x + 1.0).unwrap(), gamma_real(x).unwrap());
        prop_assert!(((g1 - x * g0) / g1).abs() < 1e-12);
    }

    #[test]
    fn log_gamma_conjugate_symmetry(re in 0.05f64..40.0, im in -30.0f64..30.0) {
        let z = Complex64::new(re, im);
        let a = log_gamma_complex(z.conj()).unwrap();
        let b = log_gamma_complex(z).unwrap().conj();
        prop_assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
    }

    #[test]
    fn q_matrix_rows(p in params()) {
        let f = map_exponent(0.0, p, ExponentKind::F).unwrap();
        for s in f.row_sums() {
            prop_assert!(s.abs() < 1e-12);
        }
        prop_assert!(f.get(Sign::Plus, Sign::Minus) > 0.0);
        prop_assert!(f.get(Sign::Minus, Sign::Plus) > 0.0);
        let g = map_exponent(0.0, p.dual(), ExponentKind::FCirc).unwrap();
        for a in [Sign::Plus, Sign::Minus] {
            for b in [Sign::Plus, Sign::Minus] {
                prop_assert!((g.get(a, b) - f.get(a, b)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn product_identities(p in params()) {
        let u = upcrossing_constant(p);
        if p.alpha < 0.999 {
            let c = clock_mean_1d(p).unwrap().finite().unwrap();
            let u = u.finite().unwrap();
            prop_assert!((renewal_rate(p) * c - u).abs() < 1e-12 * u.max(1.0));
        } else if p.alpha > 1.001 {
            let c = conditioned_clock_mean(p).unwrap();
            let u = u.finite().unwrap();
            prop_assert!(c > 0.0);
            prop_assert!((renewal_rate(p) * c - u).abs() < 1e-12 * u.max(1.0));
        }
    }

    #[test]
    fn constants_are_symmetric_under_duality(p in params()) {
        let d = p.dual();
        prop_assert!((renewal_rate(p) - renewal_rate(d)).abs() < 1e-14);
        prop_assert_eq!(upcrossing_constant(p).is_infinite(), upcrossing_constant(d).is_infinite());
        if let (Some(a), Some(b)) = (upcrossing_constant(p).finite(), upcrossing_constant(d).finite()) {
            prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }
        if p.alpha < 1.0 {
            let (a, b) = (clock_mean_1d(p).unwrap().finite().unwrap(), clock_mean_1d(d).unwrap().finite().unwrap());
            prop_assert!((a - b).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn entry_density_reflects(p in params(), y in -0.99f64..0.99) {
        prop_assume!(p.alpha > 1.01);
        let a = entry_density(y, p).unwrap();
        let b = entry_density(-y, p.dual()).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn skewness_round_trip(p in params()) {
        prop_assume!((p.alpha - 1.0).abs() > 1e-3);
        let beta = skewness_from_rho(p).unwrap();
        prop_assert!((rho_from_skewness(p.alpha, beta) - p.rho).abs() < 1e-12);
    }

    #[test]
    fn h_weight_homogeneity(p in params(), x in -50.0f64..50.0, c in 0.01f64..100.0) {
        prop_assume!(x.abs() > 1e-3);
        let lhs = h_weight(c * x, p).unwrap();
        let rhs = c.powf(p.alpha - 1.0) * h_weight(x, p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs().max(1e-300) * 4.0);
    }

    #[test]
    fn kelvin_is_an_involution(re in -1e3f64..1e3, im in -1e3f64..1e3) {
        let x = Complex64::new(re, im);
        prop_assume!(x.norm() > 1e-6);
        let y = kelvin(kelvin(x).unwrap()).unwrap();
        prop_assert!((y - x).norm() <= 1e-15 * x.norm() * 4.0);
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), id in 0u64..1 << 40) {
        let p = StableParams::new(1.3, 0.4).unwrap();
        let mut a = RngStream::new(seed, id);
        let mut b = RngStream::new(seed, id);
        let mut noise = RngStream::new(seed ^ 1, id);
        for _ in 0..50 {
            let _ = sample_stable_1d(&mut noise, p, 1.0);
            prop_assert_eq!(sample_stable_1d(&mut a, p, 0.7).to_bits(), sample_stable_1d(&mut b, p, 0.7).to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn winding_is_additive(seed in any::<u64>(), i in 1usize..60, j in 1usize..60) {
        let path = planar_walk(seed, 120);
        let t = path.times();
        let (a, b, c) = (t[0], t[i.min(j)], t[i.max(j) + 50]);
        let whole = winding_angle(&path, a, c).unwrap();
        let parts = winding_angle(&path, a, b).unwrap() + winding_angle(&path, b, c).unwrap();
        prop_assert!((whole - parts).abs() < 1e-12 * whole.abs().max(1.0));
    }

    #[test]
    fn crossings_interlace(seed in any::<u64>(), lo in 0usize..100, len in 1usize..100) {
        let path = line_walk(seed, 200, StableParams::new(0.8, 0.4).unwrap());
        let t = path.times();
        let (a, b) = (t[lo], t[(lo + len).min(199)]);
        let up = count_upcrossings(&path, a, b).count as i64;
        let down = count_downcrossings(&path, a, b).count as i64;
        prop_assert!((up - down).abs() <= 1);
    }

    #[test]
    fn clocks_are_monotone_and_additive(seed in any::<u64>(), k in 1usize..150) {
        let path = line_walk(seed, 200, StableParams::new(1.2, 0.5).unwrap());
        let c = clock(&path, ClockKind::Varsigma, 1.2).unwrap();
        prop_assert!(c.cumulative.windows(2).all(|w| w[1] >= w[0]));
        // Splitting the path at a grid point splits the clock exactly.
        let t = path.times();
        let head = PathSkeleton::new(t[..=k].to_vec(), path.values()[..=k].to_vec(), false).unwrap();
        let tail = PathSkeleton::new(t[k..].to_vec(), path.values()[k..].to_vec(), false).unwrap();
        let h = clock(&head, ClockKind::Varsigma, 1.2).unwrap().total();
        let r = clock(&tail, ClockKind::Varsigma, 1.2).unwrap().total();
        prop_assert!((h + r - c.total()).abs() <= 1e-12 * c.total());
    }

    #[test]
    fn clock_inverse_dominates(seed in any::<u64>(), frac in 0.0f64..1.0) {
        let path = line_walk(seed, 200, StableParams::new(0.7, 0.5).unwrap());
        let c = clock(&path, ClockKind::Varsigma, 0.7).unwrap();
        let s = frac * c.total();
        let k = invert_clock_index(&c, s).unwrap();
        prop_assert!(c.cumulative[k] >= s);
        prop_assert!(k == 0 || c.cumulative[k - 1] < s);
    }

    #[test]
    fn reversal_twice_restores_the_window(seed in any::<u64>()) {
        let path = planar_walk(seed, 150);
        let a = path.values().iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min) * 1.5;
        let once = reverse_from_last_exit(&path, a, None).unwrap().skeleton;
        let twice = reverse_from_last_exit(&once, f64::INFINITY, None).unwrap().skeleton;
        let last = path.values().iter().rposition(|v| v.norm() <= a).unwrap();
        prop_assert_eq!(twice.values(), &path.values()[..=last]);
        for (s, t) in twice.times().iter().zip(&path.times()[..=last]) {
            prop_assert!((s - (t - path.times()[0])).abs() < 1e-12 * path.end_time());
        }
        let fw = winding_angle(&path, path.times()[0], path.times()[last]).unwrap();
        let bw = winding_angle(&once, 0.0, once.end_time()).unwrap();
        prop_assert!((fw + bw).abs() < 1e-12 * fw.abs().max(1.0));
    }

    #[test]
    fn rbz_modulus_is_reciprocal(seed in any::<u64>()) {
        let path = planar_walk(seed, 150);
        let out = rbz_transform(&path, 1.3, None).unwrap().skeleton;
        let eta = clock(&path, ClockKind::Eta, 1.3).unwrap();
        prop_assert_eq!(out.len(), path.len());
        for (k, v) in out.values().iter().enumerate() {
            prop_assert!((v.norm() * path.values()[k].norm() - 1.0).abs() < 1e-14);
            prop_assert_eq!(out.times()[k], eta.cumulative[k]);
        }
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>()) {
        let path = planar_walk(seed, 40);
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let back = PathSkeleton::<Complex64>::read_csv(&buf[..]).unwrap();
        prop_assert_eq!(back.times(), path.times());
        prop_assert_eq!(back.values(), path.values());
    }
}
