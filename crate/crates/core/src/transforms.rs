//! Space inversion with a time change, time reversal from a last exit, and
//! Doob h-transform weights.
//!
//! For an input skeleton `X` the inverted path lives on the `η`-clock
//! `η_t = ∫ |X_u|^{-2α} du`: its value at clock time `η_{t_k}` is `K(X_{t_k})`
//! (planar) or `-1/X_{t_k}` (one-dimensional). The inverse clock is only ever
//! evaluated at images of source grid points.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{h_weight, planar_h_weight, StableParams};
use crate::path_engine::{clock, ClockKind, PathSkeleton, PathValue};

/// `x / |x|²`.
pub fn kelvin(x: Complex64) -> Result<Complex64> {
    let r2 = x.norm_sqr();
    if r2 == 0.0 {
        return Err(Error::Origin { index: 0 });
    }
    Ok(x / r2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvenanceKind {
    RbzPlanar,
    Rbz1d,
    Reversal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ProvenanceKind,
    /// `(seed, stream_id)` of the stream that generated the source path.
    pub source_seed: Option<(u64, u64)>,
    pub alpha: Option<f64>,
    /// Radius for reversals.
    pub radius: Option<f64>,
    pub source_points: usize,
}

#[derive(Debug, Clone)]
pub struct TransformedPath<T> {
    pub skeleton: PathSkeleton<T>,
    pub provenance: Provenance,
}

impl<T: PathValue> TransformedPath<T> {
    pub fn write_provenance<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.provenance)?;
        Ok(())
    }
}

/// Spatial inversion used by the time-changed transform.
pub trait Invertible: PathValue {
    const KIND: ProvenanceKind;
    fn invert(&self) -> Result<Self>;
}

impl Invertible for Complex64 {
    const KIND: ProvenanceKind = ProvenanceKind::RbzPlanar;
    fn invert(&self) -> Result<Self> {
        kelvin(*self)
    }
}

impl Invertible for f64 {
    const KIND: ProvenanceKind = ProvenanceKind::Rbz1d;
    fn invert(&self) -> Result<Self> {
        if *self == 0.0 {
            return Err(Error::Origin { index: 0 });
        }
        Ok(-1.0 / self)
    }
}

/// Inverted path run on the `η`-clock of the source.
///
/// Source points at which the clock does not advance in floating point (far
/// from the origin the increments of `η` underflow relative to its running
/// total) cannot be given distinct times and are dropped.
pub fn rbz_transform<T: Invertible>(
    path: &PathSkeleton<T>,
    alpha: f64,
    source_seed: Option<(u64, u64)>,
) -> Result<TransformedPath<T>> {
    let eta = clock(path, ClockKind::Eta, alpha)?;
    let mut times = Vec::with_capacity(path.len());
    let mut values = Vec::with_capacity(path.len());
    for (k, (&s, v)) in eta.cumulative.iter().zip(path.values()).enumerate() {
        if times.last().is_some_and(|&last| s <= last) {
            continue;
        }
        times.push(s);
        values.push(v.invert().map_err(|_| Error::Origin { index: k })?);
    }
    Ok(TransformedPath {
        skeleton: PathSkeleton::new(times, values, false)?,
        provenance: Provenance {
            kind: T::KIND,
            source_seed,
            alpha: Some(alpha),
            radius: None,
            source_points: path.len(),
        },
    })
}

/// `(X_{(ℓ_a - s)-}, 0 <= s <= ℓ_a)` on the skeleton, with `ℓ_a` the last grid
/// time at which `|X| <= a`. Reversed times are `t_L - t_{L-j}` and carry the
/// values `X_{L-j}`, the value held just before each reflected grid time.
pub fn reverse_from_last_exit<T: PathValue>(
    path: &PathSkeleton<T>,
    a: f64,
    source_seed: Option<(u64, u64)>,
) -> Result<TransformedPath<T>> {
    let last = path
        .values()
        .iter()
        .rposition(|v| v.modulus() <= a)
        .ok_or(Error::NoExit { radius: a })?;
    let t = path.times();
    let mut times: Vec<f64> = Vec::with_capacity(last + 1);
    let mut values: Vec<T> = Vec::with_capacity(last + 1);
    for j in 0..=last {
        let s = t[last] - t[last - j];
        let v = path.values()[last - j];
        // Steps far below the resolution of t_L collapse onto one reversed
        // time; keep the deepest value there.
        match times.last() {
            Some(&prev) if s <= prev => *values.last_mut().unwrap() = v,
            _ => {
                times.push(s);
                values.push(v);
            }
        }
    }
    Ok(TransformedPath {
        skeleton: PathSkeleton::new(times, values, path.origin_flag)?,
        provenance: Provenance {
            kind: ProvenanceKind::Reversal,
            source_seed,
            alpha: None,
            radius: Some(a),
            source_points: path.len(),
        },
    })
}

/// Which harmonic weight to use and how killing is detected.
#[derive(Debug, Clone, Copy)]
pub enum HMode {
    /// `|x|^{α-2}`.
    Planar { alpha: f64 },
    /// `h(x)` of the one-dimensional process. For `α ∈ (1, 2)` the weight is
    /// cut off at the first grid time in `(-ε, ε)`, the proxy for the hitting
    /// time of zero.
    OneD {
        params: StableParams,
        epsilon: Option<f64>,
    },
}

pub trait HWeighted: PathValue {
    fn h(&self, mode: HMode) -> Result<f64>;
}

impl HWeighted for Complex64 {
    fn h(&self, mode: HMode) -> Result<f64> {
        match mode {
            HMode::Planar { alpha } => planar_h_weight(*self, alpha),
            HMode::OneD { .. } => Err(Error::Params("one-dimensional weight on a planar path".into())),
        }
    }
}

impl HWeighted for f64 {
    fn h(&self, mode: HMode) -> Result<f64> {
        match mode {
            HMode::OneD { params, .. } => h_weight(*self, params),
            HMode::Planar { .. } => Err(Error::Params("planar weight on a one-dimensional path".into())),
        }
    }
}

/// Weighted Monte Carlo average with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Paths with a non-zero weight at `t`.
    pub n_alive: usize,
}

/// Average of `f(X_t) h(X_t) / h(x)` over paths issued from a common `x`.
pub fn h_transform_estimate<T, F>(
    paths: &[PathSkeleton<T>],
    f: F,
    t: f64,
    mode: HMode,
) -> Result<WeightedEstimate>
where
    T: HWeighted,
    F: Fn(&T) -> f64,
{
    let first = paths.first().ok_or(Error::Degenerate)?;
    let x = first.values()[0];
    let h0 = x.h(mode)?;
    let eps = match mode {
        HMode::OneD {
            params,
            epsilon: Some(e),
        } if params.alpha > 1.0 => Some(e),
        _ => None,
    };
    let mut terms = Vec::with_capacity(paths.len());
    for p in paths {
        if p.values()[0] != x {
            return Err(Error::Params("paths must share their starting point".into()));
        }
        if t < p.start_time() || t > p.end_time() {
            return Err(Error::Range {
                level: t,
                total: p.end_time(),
            });
        }
        let idx = p.times().partition_point(|&s| s <= t) - 1;
        let killed = eps.is_some_and(|e| p.values()[..=idx].iter().any(|v| v.modulus() < e));
        let v = p.values()[idx];
        let term = if killed || v.modulus() == 0.0 {
            0.0
        } else {
            f(&v) * v.h(mode)? / h0
        };
        terms.push(term);
    }
    let n_alive = terms.iter().filter(|&&w| w != 0.0).count();
    if n_alive == 0 {
        return Err(Error::Degenerate);
    }
    let n = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let var = if terms.len() > 1 {
        terms.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(WeightedEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        n_paths: terms.len(),
        n_alive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_engine::winding_angle;

    fn unit_circle(n: usize) -> PathSkeleton<Complex64> {
        PathSkeleton::new(
            (0..n).map(|k| k as f64 * 0.1).collect(),
            (0..n).map(|k| Complex64::from_polar(1.0, 0.3 * k as f64)).collect(),
            false,
        )
        .unwrap()
    }

    #[test]
    fn kelvin_basics() {
        let x = Complex64::new(2.0, 0.0);
        assert_eq!(kelvin(x).unwrap(), Complex64::new(0.5, 0.0));
        let u = Complex64::from_polar(1.0, 0.7);
        assert!((kelvin(u).unwrap() - u).norm() < 1e-15);
        let z = Complex64::new(-3.1, 0.4);
        assert!((kelvin(kelvin(z).unwrap()).unwrap() - z).norm() < 1e-15);
        assert!(kelvin(Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn rbz_on_unit_modulus_path() {
        let p = unit_circle(20);
        let y = rbz_transform(&p, 1.3, None).unwrap();
        for (k, (s, v)) in y.skeleton.times().iter().zip(y.skeleton.values()).enumerate() {
            assert!((s - p.times()[k]).abs() < 1e-12);
            assert!((v - p.values()[k]).norm() < 1e-14);
        }
        assert_eq!(y.provenance.kind, ProvenanceKind::RbzPlanar);
    }

    #[test]
    fn rbz_modulus_duality() {
        let times = vec![0.0, 0.5, 1.0, 3.0];
        let values = vec![
            Complex64::new(1.0, 1.0),
            Complex64::new(-2.0, 0.5),
            Complex64::new(0.1, 0.2),
            Complex64::new(4.0, -4.0),
        ];
        let p = PathSkeleton::new(times, values, false).unwrap();
        let y = rbz_transform(&p, 0.9, None).unwrap();
        for (a, b) in y.skeleton.values().iter().zip(p.values()) {
            assert!((a.norm() - 1.0 / b.norm()).abs() < 1e-14);
            assert!((a.arg() - b.arg()).abs() < 1e-14);
        }
    }

    #[test]
    fn rbz_one_d() {
        let p = PathSkeleton::new(vec![0.0, 1.0, 2.0], vec![2.0, -0.5, 4.0], false).unwrap();
        let y = rbz_transform(&p, 1.5, None).unwrap();
        assert_eq!(y.skeleton.values(), &[-0.5, 2.0, -0.25]);
        let expected = 2f64.powf(-3.0) + 0.5f64.powf(-3.0);
        assert!((y.skeleton.times()[2] - expected).abs() < 1e-12);
    }

    #[test]
    fn reversal_round_trip_and_winding() {
        let times: Vec<f64> = (0..30).map(|k| 0.5 + k as f64 * 0.25).collect();
        let values: Vec<Complex64> = (0..30)
            .map(|k| Complex64::from_polar(0.2 + 0.1 * k as f64, 0.4 * k as f64 - 0.1 * (k * k) as f64 * 0.05))
            .collect();
        let p = PathSkeleton::new(times.clone(), values.clone(), false).unwrap();
        let r = reverse_from_last_exit(&p, 1.0, None).unwrap();
        assert!(r.skeleton.values()[0].norm() <= 1.0);
        let last = values.iter().rposition(|v| v.norm() <= 1.0).unwrap();
        let rr = reverse_from_last_exit(&r.skeleton, f64::INFINITY, None).unwrap();
        for k in 0..=last {
            assert!((rr.skeleton.times()[k] - (times[k] - times[0])).abs() < 1e-12);
            assert_eq!(rr.skeleton.values()[k], values[k]);
        }
        let fw = winding_angle(&p, times[0], times[last]).unwrap();
        let bw = winding_angle(&r.skeleton, 0.0, r.skeleton.end_time()).unwrap();
        assert!((fw + bw).abs() < 1e-12);
        assert!(matches!(
            reverse_from_last_exit(&p, 0.01, None),
            Err(Error::NoExit { .. })
        ));
    }

    #[test]
    fn reversal_merges_unresolved_times() {
        let p = PathSkeleton::new(
            vec![0.0, 1e-30, 2e-30, 1.0, 2.0],
            vec![1e-8, 2e-8, 3e-8, 0.5, 5.0],
            true,
        )
        .unwrap();
        let r = reverse_from_last_exit(&p, 1.0, None).unwrap();
        assert_eq!(r.skeleton.times(), &[0.0, 1.0]);
        assert_eq!(r.skeleton.values(), &[0.5, 1e-8]);
    }

    #[test]
    fn h_weights_constant_at_cauchy() {
        let params = StableParams::new(1.0, 0.5).unwrap();
        let paths: Vec<_> = [3.0, -2.0, 0.1]
            .iter()
            .map(|&v| PathSkeleton::new(vec![0.0, 1.0], vec![1.0, v], false).unwrap())
            .collect();
        let e = h_transform_estimate(
            &paths,
            |_| 1.0,
            1.0,
            HMode::OneD {
                params,
                epsilon: None,
            },
        )
        .unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        assert!(e.std_error < 1e-12);
    }

    #[test]
    fn h_weights_kill_inside_interval() {
        let params = StableParams::new(1.5, 0.5).unwrap();
        let paths = vec![
            PathSkeleton::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.001, 1.0], false).unwrap(),
            PathSkeleton::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.5, 4.0], false).unwrap(),
        ];
        let mode = HMode::OneD {
            params,
            epsilon: Some(0.01),
        };
        let e = h_transform_estimate(&paths, |_| 1.0, 1.0, mode).unwrap();
        assert_eq!(e.n_alive, 1);
        assert!((e.value - 0.5 * 2.0).abs() < 1e-12);
        let dead = vec![paths[0].clone()];
        assert!(matches!(
            h_transform_estimate(&dead, |_| 1.0, 1.0, mode),
            Err(Error::Degenerate)
        ));
    }

    #[test]
    fn planar_weight_mode_mismatch() {
        let p = vec![unit_circle(3)];
        let mode = HMode::OneD {
            params: StableParams::new(0.5, 0.5).unwrap(),
            epsilon: None,
        };
        assert!(h_transform_estimate(&p, |_| 1.0, 0.1, mode).is_err());
        let e = h_transform_estimate(&p, |_| 1.0, 0.1, HMode::Planar { alpha: 1.2 }).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
    }
}
