//! Sphere geometry: angles to hyperplanes, band-measure bounds, exact
//! surface-area ratios, uniform sampling, and the certifying rule for
//! halfspaces learned on the uniform sphere.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::learners::{dot, norm};
use crate::seeding::{next_gaussian, rng_from, sub_seed_indexed};

const UNIT_TOL: f64 = 1e-6;

/// Parameters of a certification task on the uniform sphere: the true
/// halfspace, a uniform-convergence slack, and the replaced fraction
/// beta = b(m)/m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereTask {
    pub d: usize,
    pub omega_truth: Vec<f64>,
    pub epsilon: f64,
    pub beta: f64,
}

impl SphereTask {
    pub fn new(d: usize, omega_truth: Vec<f64>, epsilon: f64, beta: f64) -> Result<Self> {
        if d < 2 {
            return Err(invalid("sphere tasks need d >= 2"));
        }
        if omega_truth.len() != d {
            return Err(invalid("omega_truth dimension mismatch"));
        }
        if (norm(&omega_truth) - 1.0).abs() > 1e-9 {
            return Err(invalid("omega_truth must be unit length (tolerance 1e-9)"));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon must be a finite non-negative real"));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(invalid("beta must lie in [0, 1]"));
        }
        Ok(SphereTask { d, omega_truth, epsilon, beta })
    }
}

/// Angle in [0, pi/2] between x and the hyperplane {z : omega . z = 0},
/// i.e. arcsin(|omega . x|) for unit vectors.
pub fn angle_to_halfspace(omega: &[f64], x: &[f64]) -> Result<f64> {
    if omega.len() != x.len() {
        return Err(invalid("dimension mismatch"));
    }
    if (norm(omega) - 1.0).abs() > UNIT_TOL || (norm(x) - 1.0).abs() > UNIT_TOL {
        return Err(invalid("angle_to_halfspace expects unit vectors (tolerance 1e-6)"));
    }
    Ok(dot(omega, x).abs().clamp(0.0, 1.0).asin())
}

/// Certified replace-budget for the prediction at x of a halfspace learned
/// on m uniform-sphere samples.
///
/// Let theta be the angle between x and the learned hyperplane. Whenever the
/// sample is epsilon-representative, any halfspace disagreeing with the
/// learned label at x carries at least theta/pi population risk, so fooling
/// empirical risk minimization costs at least (theta/(2 pi) - epsilon/2) * m
/// replacements. The budget is floored to an integer; below the activation
/// threshold theta/pi >= 2 beta + epsilon the rule certifies nothing.
pub fn halfspace_cert(task: &SphereTask, omega_learned: &[f64], x: &[f64], m: usize) -> Result<u64> {
    let theta = angle_to_halfspace(omega_learned, x)?;
    if theta / std::f64::consts::PI < 2.0 * task.beta + task.epsilon {
        return Ok(0);
    }
    let raw = (theta / std::f64::consts::TAU - task.epsilon / 2.0) * m as f64;
    Ok(raw.max(0.0).floor() as u64)
}

/// Upper bound theta * sqrt(2 d / pi) on the probability that a uniform
/// sphere point lies within angle theta of a fixed hyperplane (the band is
/// covered by a cylinder of height 2 theta over the equator).
pub fn band_measure_bound(theta: f64, d: usize) -> f64 {
    debug_assert!((0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&theta));
    debug_assert!(d >= 2);
    theta * (2.0 * d as f64 / std::f64::consts::PI).sqrt()
}

/// Exact ratio S_{d-1} / S_d of the surface areas of the unit spheres
/// bounding the d- and (d+1)-dimensional balls, evaluated in log space
/// (overflow-free up to d = 10^6).
///
/// Uses the two-step recurrence S_n = 2 pi S_{n-2} / (n - 1) from the
/// closed-form factorial expressions, and cross-checks even dimensions
/// against the binomial sandwich k/sqrt((k+1) pi) <= k C(2k,k)/4^k <=
/// sqrt(k/pi).
pub fn sphere_surface_ratio(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(invalid("surface ratio needs d >= 2"));
    }
    // ln S_0 = ln 2 (two points), ln S_1 = ln 2 pi (circle).
    let mut ln = [2.0f64.ln(), std::f64::consts::TAU.ln()];
    // ln[n mod 2] holds ln S_n for the two most recent n.
    for n in 2..=d {
        ln[n % 2] += std::f64::consts::TAU.ln() - ((n - 1) as f64).ln();
    }
    let ratio = (ln[(d - 1) % 2] - ln[d % 2]).exp();
    if d.is_multiple_of(2) {
        let k = (d / 2) as f64;
        let lo = k / ((k + 1.0) * std::f64::consts::PI).sqrt();
        let hi = (k / std::f64::consts::PI).sqrt();
        assert!(
            ratio >= lo * (1.0 - 1e-9) && ratio <= hi * (1.0 + 1e-9),
            "surface ratio {ratio} escapes the binomial sandwich [{lo}, {hi}] at d={d}"
        );
    }
    Ok(ratio)
}

/// n i.i.d. uniform points on the unit sphere in R^d via normalized
/// Gaussians. Each sample has its own counter-derived stream, so the output
/// is identical under any parallel split.
pub fn uniform_sphere_sample(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(d >= 1, "dimension must be >= 1");
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(sub_seed_indexed(seed, "sphere-sample", i as u64));
            loop {
                let mut v: Vec<f64> = (0..d).map(|_| next_gaussian(&mut rng)).collect();
                let nv = norm(&v);
                if nv > 1e-12 {
                    v.iter_mut().for_each(|c| *c /= nv);
                    return v;
                }
            }
        })
        .collect()
}

/// VC-style uniform-convergence slack: sqrt((d ln(2m/d) + ln(2/delta)) / m).
/// A heuristic default for callers that do not supply epsilon themselves.
pub fn vc_epsilon_heuristic(d: usize, m: usize, delta: f64) -> f64 {
    let d = d as f64;
    let m = (m as f64).max(d);
    ((d * (2.0 * m / d).ln() + (2.0 / delta).ln()) / m).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_pole_equator_diagonal() {
        let w = [1.0, 0.0, 0.0];
        assert!((angle_to_halfspace(&w, &[1.0, 0.0, 0.0]).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(angle_to_halfspace(&w, &[0.0, 1.0, 0.0]).unwrap().abs() < 1e-12);
        let x = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2, 0.0];
        assert!((angle_to_halfspace(&w, &x).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn angle_rejects_non_unit() {
        let w = [2.0, 0.0];
        assert!(angle_to_halfspace(&w, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn cert_formula_hand_values() {
        // gate fails -> 0
        let task = SphereTask::new(3, vec![1.0, 0.0, 0.0], 0.5, 0.4).unwrap();
        let w = [1.0, 0.0, 0.0];
        let x = [0.0, 1.0, 0.0]; // theta = 0
        assert_eq!(halfspace_cert(&task, &w, &x, 1000).unwrap(), 0);

        // theta = 0.4 pi, eps = 0.01, beta tiny: floor((0.2 - 0.005) * 1000) = 195
        let task = SphereTask::new(3, vec![1.0, 0.0, 0.0], 0.01, 1e-4).unwrap();
        let theta = 0.4 * std::f64::consts::PI;
        let x = [theta.sin(), theta.cos(), 0.0];
        assert_eq!(halfspace_cert(&task, &w, &x, 1000).unwrap(), 195);

        // eps = 0, beta = 0, theta = pi/2: floor(m/4)
        let task = SphereTask::new(3, vec![1.0, 0.0, 0.0], 0.0, 0.0).unwrap();
        assert_eq!(halfspace_cert(&task, &w, &[1.0, 0.0, 0.0], 100).unwrap(), 25);
    }

    #[test]
    fn cert_monotonicity() {
        let w = [1.0, 0.0, 0.0];
        let task = |eps: f64| SphereTask::new(3, vec![1.0, 0.0, 0.0], eps, 1e-3).unwrap();
        let point = |theta: f64| [theta.sin(), theta.cos(), 0.0];
        // non-decreasing in theta
        let mut prev = 0;
        for i in 0..40 {
            let theta = i as f64 * std::f64::consts::FRAC_PI_2 / 40.0;
            let c = halfspace_cert(&task(0.01), &w, &point(theta), 5000).unwrap();
            assert!(c >= prev, "theta sweep not monotone");
            prev = c;
        }
        // non-increasing in epsilon
        let mut prev = u64::MAX;
        for i in 0..20 {
            let eps = i as f64 * 0.01;
            let c = halfspace_cert(&task(eps), &w, &point(1.0), 5000).unwrap();
            assert!(c <= prev, "epsilon sweep not monotone");
            prev = c;
        }
    }

    #[test]
    fn band_bound_basics() {
        assert_eq!(band_measure_bound(0.0, 3), 0.0);
        let b1 = band_measure_bound(0.1, 3);
        let b2 = band_measure_bound(0.2, 3);
        assert!((b2 - 2.0 * b1).abs() < 1e-12, "bound must be linear in theta");
        assert!((b1 - 0.1 * (6.0f64 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn band_bound_dominates_monte_carlo_d3() {
        // Exact probability in d=3 is sin(theta); 10^5 samples as a sanity
        // run (the acceptance suite does the full grid at 10^6).
        let theta = 0.1f64;
        let pts = uniform_sphere_sample(3, 100_000, 77);
        let w = [0.0, 0.0, 1.0];
        let hits = pts
            .iter()
            .filter(|p| angle_to_halfspace(&w, p).unwrap() <= theta)
            .count();
        let p_hat = hits as f64 / pts.len() as f64;
        assert!((p_hat - theta.sin()).abs() < 0.005, "d=3 band measure should be sin(theta)");
        assert!(p_hat <= band_measure_bound(theta, 3));
    }

    #[test]
    fn surface_ratio_small_dimensions() {
        // circle over sphere: 2 pi / 4 pi = 1/2
        assert!((sphere_surface_ratio(2).unwrap() - 0.5).abs() < 1e-12);
        let lo = 1.0 / (std::f64::consts::TAU).sqrt();
        let hi = 2.0f64.sqrt() / (std::f64::consts::TAU).sqrt();
        let r2 = sphere_surface_ratio(2).unwrap();
        assert!(lo <= r2 && r2 <= hi);
        // d=3: S_2/S_3 = 4 pi / (2 pi^2) = 2/pi
        assert!((sphere_surface_ratio(3).unwrap() - 2.0 / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn surface_ratio_sandwich_sweep() {
        for d in 2..=2000usize {
            let r = sphere_surface_ratio(d).unwrap();
            let lo = ((d - 1) as f64).sqrt() / std::f64::consts::TAU.sqrt();
            let hi = (d as f64).sqrt() / std::f64::consts::TAU.sqrt();
            assert!(lo <= r * (1.0 + 1e-12) && r <= hi * (1.0 + 1e-12), "d={d}: {lo} <= {r} <= {hi}");
        }
        // stays finite far out
        let big = sphere_surface_ratio(1_000_000).unwrap();
        assert!(big.is_finite() && big > 100.0);
    }

    #[test]
    fn sphere_samples_are_unit_and_deterministic() {
        let a = uniform_sphere_sample(5, 200, 9);
        let b = uniform_sphere_sample(5, 200, 9);
        assert_eq!(a, b);
        for p in &a {
            assert!((norm(p) - 1.0).abs() <= 1e-9);
        }
        let c = uniform_sphere_sample(5, 200, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn sphere_marginals_centered() {
        let n = 100_000;
        let pts = uniform_sphere_sample(3, n, 4);
        for k in 0..3 {
            let mean: f64 = pts.iter().map(|p| p[k]).sum::<f64>() / n as f64;
            // 3 sigma with sigma = 1/sqrt(3 n)
            let tol = 3.0 / (3.0 * n as f64).sqrt();
            assert!(mean.abs() < tol.max(0.02), "coordinate {k} mean {mean}");
        }
    }
}
