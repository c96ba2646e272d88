//! Pairwise link math between two vehicles under a unit-disk radio.
//!
//! * connection duration `T`: time until the inter-vehicle distance first
//!   reaches the radius, from relative position and velocity;
//! * reliability `r`: probability mass of the relative-speed link-duration
//!   density `f(T)` over `[0, T]`;
//! * expected lifetime `LT = r × T`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Number of speed samples kept by [`VelocityStats`].
pub const VELOCITY_WINDOW: usize = 20;

/// Absolute tolerance of the reliability quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub position: Vec2,
    pub velocity: Vec2,
}

impl Kinematics {
    pub fn new(position: Vec2, velocity: Vec2) -> Self {
        Self { position, velocity }
    }
}

/// Sliding-window mean and population standard deviation of observed speed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VelocityStats {
    samples: VecDeque<f64>,
    mean: f64,
    deviation: f64,
}

impl VelocityStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stats with known moments and no sample history. A later
    /// [`update_velocity_stats`] starts the window from scratch.
    pub fn from_moments(mean: f64, deviation: f64) -> Self {
        Self {
            samples: VecDeque::new(),
            mean,
            deviation: deviation.max(0.0),
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn deviation(&self) -> f64 {
        self.deviation
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }
}

/// Pushes one speed observation, dropping the oldest beyond the window.
pub fn update_velocity_stats(stats: &VelocityStats, observed_speed: f64) -> VelocityStats {
    let mut samples = stats.samples.clone();
    samples.push_back(observed_speed);
    while samples.len() > VELOCITY_WINDOW {
        samples.pop_front();
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    VelocityStats {
        samples,
        mean,
        deviation: var.max(0.0).sqrt(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkEstimate {
    /// Seconds until the pair drifts out of range; `+∞` for equal velocities.
    pub duration: f64,
    pub reliability: f64,
    pub lifetime: f64,
}

/// Time until two currently connected vehicles reach separation `radius`.
pub fn connection_duration(a: &Kinematics, b: &Kinematics, radius: f64) -> Result<f64> {
    let dd = b.position - a.position;
    let dv = b.velocity - a.velocity;
    let dist = dd.norm();
    if dist > radius * (1.0 + 1e-12) {
        return Err(Error::NotConnected {
            distance: dist,
            radius,
        });
    }
    let qa = dv.norm_sq();
    if qa == 0.0 {
        return Ok(f64::INFINITY);
    }
    let qb = 2.0 * dd.dot(dv);
    if dist >= radius * (1.0 - 1e-12) && qb >= 0.0 {
        return Ok(0.0);
    }
    let qc = dd.norm_sq() - radius * radius;
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    // Positive root of A t² + B t + C = 0, in the cancellation-free form.
    let t = if qb >= 0.0 {
        2.0 * qc / (-qb - disc)
    } else {
        (-qb + disc) / (2.0 * qa)
    };
    Ok(t.max(0.0))
}

/// Link-duration density `f(T)` induced by a Gaussian relative speed with
/// mean `mu` and deviation `sigma`.
pub fn duration_density(t: f64, mu: f64, sigma: f64, radius: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let z = (2.0 * radius / t - mu) / sigma;
    2.0 * radius / ((2.0 * PI).sqrt() * sigma * t * t) * (-0.5 * z * z).exp()
}

/// `∫₀^duration f(T) dT` for relative-speed moments `mu`, `sigma`.
///
/// The integral is evaluated after substituting `u = 1/T`, which turns the
/// heavy `1/T²` tail into a bounded Gaussian bump and lets `duration = +∞`
/// be integrated directly.
pub fn reliability_from_moments(duration: f64, mu: f64, sigma: f64, radius: f64) -> f64 {
    if duration.is_nan() || duration <= 0.0 {
        return 0.0;
    }
    if sigma <= 0.0 {
        return 1.0;
    }
    // f(1/u) / u² in closed form, finite at u = 0.
    let scale = 2.0 * radius / ((2.0 * PI).sqrt() * sigma);
    let g = |u: f64| {
        let z = (2.0 * radius * u - mu) / sigma;
        scale * (-0.5 * z * z).exp()
    };
    let center = mu / (2.0 * radius);
    let width = sigma / (2.0 * radius);
    let span = 12.0;
    let lo = (1.0 / duration).max(center - span * width).max(0.0);
    let hi = center + span * width;
    if hi <= lo {
        return 0.0;
    }
    let mut cuts = vec![lo];
    for k in -(span as i32)..=(span as i32) {
        let c = center + k as f64 * width;
        if c > lo && c < hi {
            cuts.push(c);
        }
    }
    cuts.push(hi);
    let tol = QUADRATURE_TOLERANCE / cuts.len() as f64;
    let total: f64 = cuts
        .windows(2)
        .map(|w| adaptive_simpson(&g, w[0], w[1], tol))
        .sum();
    total.clamp(0.0, 1.0)
}

/// Reliability of a link of the given kinematic `duration`.
pub fn link_reliability(
    duration: f64,
    stats_a: &VelocityStats,
    stats_b: &VelocityStats,
    radius: f64,
) -> f64 {
    let mu = stats_a.mean() - stats_b.mean();
    let sigma = stats_a.deviation().hypot(stats_b.deviation());
    reliability_from_moments(duration, mu, sigma, radius)
}

/// `LT = r × T`, with `0 × ∞ = 0`.
pub fn expected_lifetime(duration: f64, reliability: f64) -> f64 {
    if reliability <= 0.0 {
        0.0
    } else {
        reliability * duration
    }
}

pub fn estimate_link(
    a: &Kinematics,
    stats_a: &VelocityStats,
    b: &Kinematics,
    stats_b: &VelocityStats,
    radius: f64,
) -> Result<LinkEstimate> {
    let duration = connection_duration(a, b, radius)?;
    let reliability = link_reliability(duration, stats_a, stats_b, radius);
    Ok(LinkEstimate {
        duration,
        reliability,
        lifetime: expected_lifetime(duration, reliability),
    })
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn kin(px: f64, py: f64, vx: f64, vy: f64) -> Kinematics {
        Kinematics::new(Vec2::new(px, py), Vec2::new(vx, vy))
    }

    fn distance_at(a: &Kinematics, b: &Kinematics, t: f64) -> f64 {
        let pa = a.position + a.velocity * t;
        let pb = b.position + b.velocity * t;
        pa.distance(pb)
    }

    /// Bisection on D(t) = R over a bracket found by doubling.
    fn root_by_bisection(a: &Kinematics, b: &Kinematics, r: f64) -> f64 {
        let mut hi = 1.0;
        while distance_at(a, b, hi) < r {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if distance_at(a, b, mid) < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn duration_examples() {
        let a = kin(0.0, 0.0, 10.0, 0.0);
        let b = kin(100.0, 0.0, 0.0, 0.0);
        let t = connection_duration(&a, &b, 200.0).unwrap();
        assert!((t - 30.0).abs() < 1e-12);
        assert!((t - root_by_bisection(&a, &b, 200.0)).abs() < 1e-9);

        let same = kin(50.0, 0.0, 10.0, 0.0);
        assert_eq!(
            connection_duration(&a, &same, 200.0).unwrap(),
            f64::INFINITY
        );

        // On the boundary and moving apart.
        let edge = kin(200.0, 0.0, 15.0, 0.0);
        assert_eq!(connection_duration(&a, &edge, 200.0).unwrap(), 0.0);
        // On the boundary but closing in: the link lasts.
        let closing = kin(200.0, 0.0, 0.0, 0.0);
        assert!((connection_duration(&a, &closing, 200.0).unwrap() - 40.0).abs() < 1e-9);

        assert!(matches!(
            connection_duration(&a, &kin(300.0, 0.0, 0.0, 0.0), 200.0),
            Err(Error::NotConnected { .. })
        ));
    }

    /// Stratified Monte Carlo estimate of `P(0 < 2R/Δv ≤ T)` with
    /// `Δv ~ N(mu, sigma²)`.
    fn reliability_monte_carlo(t: f64, mu: f64, sigma: f64, r: f64, n: usize, seed: u64) -> f64 {
        let normal = Normal::new(mu, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = 0usize;
        for i in 0..n {
            let u = (i as f64 + rng.random::<f64>()) / n as f64;
            let dv = normal.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16));
            let lifetime = 2.0 * r / dv;
            if lifetime > 0.0 && lifetime <= t {
                hits += 1;
            }
        }
        hits as f64 / n as f64
    }

    #[test]
    fn reliability_examples() {
        let s = VelocityStats::from_moments(5.0, 1.0);
        assert_eq!(link_reliability(0.0, &s, &s, 200.0), 0.0);
        let exact = VelocityStats::from_moments(5.0, 0.0);
        assert_eq!(link_reliability(12.0, &exact, &exact, 200.0), 1.0);

        let got = reliability_from_moments(50.0, 2.0, 1.0, 200.0);
        let mc = reliability_monte_carlo(50.0, 2.0, 1.0, 200.0, 1_000_000, 7);
        assert!((got - mc).abs() <= 1e-3, "{got} vs {mc}");
    }

    #[test]
    fn reliability_matches_monte_carlo_and_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for i in 0..10 {
            let mu = rng.random_range(-3.0..15.0);
            let sigma = rng.random_range(0.3..6.0);
            let r = rng.random_range(100.0..800.0);
            let t = rng.random_range(5.0..400.0);
            let got = reliability_from_moments(t, mu, sigma, r);
            let mc = reliability_monte_carlo(t, mu, sigma, r, 200_000, i);
            assert!((got - mc).abs() <= 3e-3, "case {i}: {got} vs {mc}");
            // Δv ≥ 2R/T under the Gaussian.
            let closed = 1.0 - Normal::new(mu, sigma).unwrap().cdf(2.0 * r / t);
            assert!((got - closed).abs() <= 1e-6, "case {i}: {got} vs {closed}");
        }
    }

    #[test]
    fn density_integrates_to_positive_speed_mass() {
        let total = reliability_from_moments(f64::INFINITY, 1.0, 2.0, 300.0);
        let closed = 1.0 - Normal::new(1.0, 2.0).unwrap().cdf(0.0);
        assert!((total - closed).abs() < 1e-6);
        assert!(total <= 1.0);
        // Direct quadrature of f over T agrees with the substituted form.
        let direct = adaptive_simpson(&|t| duration_density(t, 8.0, 1.5, 200.0), 1e-9, 120.0, 1e-9);
        let via_u = reliability_from_moments(120.0, 8.0, 1.5, 200.0);
        assert!((direct - via_u).abs() < 1e-6, "{direct} vs {via_u}");
    }

    #[test]
    fn lifetime_examples() {
        assert_eq!(expected_lifetime(30.0, 0.5), 15.0);
        assert_eq!(expected_lifetime(42.0, 0.0), 0.0);
        assert_eq!(expected_lifetime(f64::INFINITY, 0.9), f64::INFINITY);
        assert_eq!(expected_lifetime(f64::INFINITY, 0.0), 0.0);
    }

    #[test]
    fn velocity_stats_examples() {
        let mut s = VelocityStats::new();
        for _ in 0..30 {
            s = update_velocity_stats(&s, 8.0);
        }
        assert_eq!(
            (s.mean(), s.deviation(), s.sample_count()),
            (8.0, 0.0, VELOCITY_WINDOW)
        );

        let s = update_velocity_stats(&update_velocity_stats(&VelocityStats::new(), 10.0), 20.0);
        assert_eq!((s.mean(), s.deviation()), (15.0, 5.0));
    }

    proptest! {
        #[test]
        fn window_matches_full_recompute(speeds in prop::collection::vec(0.0f64..20.0, 1..60)) {
            let mut s = VelocityStats::new();
            for &v in &speeds {
                s = update_velocity_stats(&s, v);
            }
            let tail = &speeds[speeds.len().saturating_sub(VELOCITY_WINDOW)..];
            let n = tail.len() as f64;
            let mean = tail.iter().sum::<f64>() / n;
            let sd = (tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!((s.mean() - mean).abs() < 1e-9);
            prop_assert!((s.deviation() - sd).abs() < 1e-9);
        }

        #[test]
        fn duration_lands_on_radius_and_is_symmetric(
            r in 50.0f64..800.0, frac in 0.0f64..1.0, ang in 0.0f64..6.3,
            vax in -15.0f64..15.0, vay in -15.0f64..15.0, vbx in -15.0f64..15.0, vby in -15.0f64..15.0,
        ) {
            let a = kin(0.0, 0.0, vax, vay);
            let b = kin(frac * r * ang.cos(), frac * r * ang.sin(), vbx, vby);
            let t = connection_duration(&a, &b, r).unwrap();
            let t2 = connection_duration(&b, &a, r).unwrap();
            prop_assert!((t - t2).abs() <= 1e-9 * t.max(1.0) || t == t2);
            if t.is_finite() && t > 0.0 {
                prop_assert!((distance_at(&a, &b, t) - r).abs() <= 1e-6 * r);
            }
        }

        #[test]
        fn reliability_monotone_in_duration(
            mu in -5.0f64..15.0, sigma in 0.1f64..5.0, r in 100.0f64..800.0,
            t1 in 0.0f64..500.0, dt in 0.0f64..500.0,
        ) {
            let a = reliability_from_moments(t1, mu, sigma, r);
            let b = reliability_from_moments(t1 + dt, mu, sigma, r);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b + 1e-6 >= a);
        }
    }
}
