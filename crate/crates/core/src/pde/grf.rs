//! Periodic Gaussian random fields with covariance `625 (−Δ + 25 I)⁻²`.
//!
//! Karhunen–Loève synthesis on the real Fourier basis of `[0, 1)`:
//! `u₀(x) = a₀ξ₀ + Σₖ aₖ (ξₖ √2 cos 2πkx + ηₖ √2 sin 2πkx)` with
//! `aₖ = 25 / ((2πk)² + 25)`, truncated at the Nyquist mode of the grid.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
use rand_distr::{Distribution, StandardNormal};

use crate::rng;

/// Grid size of the sampled initial conditions.
pub const GRF_POINTS: usize = 128;

/// Standard deviation of mode `k`.
pub fn grf_mode_std(k: usize) -> f64 {
    let w = 2.0 * PI * k as f64;
    25.0 / (w * w + 25.0)
}

/// `u₀` at `x_j = j / n` for `j < n`; `n` must be even.
pub fn sample_grf(seed: u64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "grid size must be even");
    let mut rng = rng::seeded(seed);
    let nyquist = n / 2;
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let a0 = grf_mode_std(0) * draw();
    // cos/sin table: entry m is the phase 2πm/n
    let cos: Vec<f64> = (0..n).map(|m| libm::cos(2.0 * PI * m as f64 / n as f64)).collect();
    let sin: Vec<f64> = (0..n).map(|m| libm::sin(2.0 * PI * m as f64 / n as f64)).collect();
    let mut u = vec![a0; n];
    for k in 1..=nyquist {
        let a = grf_mode_std(k) * SQRT_2;
        let c = a * draw();
        let s = if k < nyquist { a * draw() } else { 0.0 };
        for (j, uj) in u.iter_mut().enumerate() {
            let m = (k * j) % n;
            *uj += c * cos[m] + s * sin[m];
        }
    }
    u
}

/// One draw on the standard 128-point grid.
pub fn sample_grf_u0(seed: u64) -> Vec<f64> {
    sample_grf(seed, GRF_POINTS)
}

/// Trigonometric interpolant of periodic samples `u` (on `x_j = j/n`) at `x`.
pub fn trig_interpolate(u: &[f64], x: f64) -> f64 {
    let n = u.len();
    let nyq = n / 2;
    let mut out = 0.0;
    for k in 0..=nyq {
        let (mut a, mut b) = (0.0, 0.0);
        for (j, &v) in u.iter().enumerate() {
            let ph = 2.0 * PI * ((k * j) % n) as f64 / n as f64;
            a += v * libm::cos(ph);
            b += v * libm::sin(ph);
        }
        let w = if k == 0 || k == nyq { 1.0 } else { 2.0 };
        let ph = 2.0 * PI * k as f64 * x;
        out += w / n as f64 * (a * libm::cos(ph) + b * libm::sin(ph));
    }
    out
}
