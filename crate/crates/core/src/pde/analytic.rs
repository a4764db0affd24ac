//! Closed-form solutions together with their input derivatives.

use core::f64::consts::PI;

use super::residual::Field;
use crate::autodiff::log_sigmoid;

/// `λ = Re/2 − √(Re²/4 + 4π²)`
pub fn kovasznay_lambda(re: f64) -> f64 {
    re / 2.0 - libm::sqrt(re * re / 4.0 + 4.0 * PI * PI)
}

/// `(u, v, p)` of Kovasznay flow at `(x, y)`.
pub fn kovasznay(x: f64, y: f64, re: f64) -> [f64; 3] {
    kovasznay_fields(x, y, re).map(|f| f.value)
}

/// Kovasznay flow with first and second derivatives in `x` and `y`.
pub fn kovasznay_fields(x: f64, y: f64, re: f64) -> [Field<f64>; 3] {
    let lam = kovasznay_lambda(re);
    let k = 2.0 * PI;
    let e = libm::exp(lam * x);
    let (s, c) = (libm::sin(k * y), libm::cos(k * y));
    let u = Field {
        value: 1.0 - e * c,
        d1: [Some(-lam * e * c), Some(k * e * s), None],
        d2: [Some(-lam * lam * e * c), Some(k * k * e * c), None],
    };
    let v = Field {
        value: lam * e * s / k,
        d1: [Some(lam * lam * e * s / k), Some(lam * e * c), None],
        d2: [Some(lam * lam * lam * e * s / k), Some(-lam * k * e * s), None],
    };
    let e2 = e * e;
    let p = Field {
        value: 0.5 * (1.0 - e2),
        d1: [Some(-lam * e2), Some(0.0), None],
        d2: [Some(-2.0 * lam * lam * e2), Some(0.0), None],
    };
    [u, v, p]
}

/// Exponent of the travelling front, `(−4x + 4y − t) / (32ν)`.
pub fn burgers2d_exponent(x: f64, y: f64, t: f64, nu: f64) -> f64 {
    (-4.0 * x + 4.0 * y - t) / (32.0 * nu)
}

/// `(u, v)` of coupled 2D Burgers at `(x, y, t)`.
pub fn burgers2d(x: f64, y: f64, t: f64, nu: f64) -> [f64; 2] {
    burgers2d_fields(x, y, t, nu).map(|f| f.value)
}

/// `u = 3/4 − w`, `v = 3/4 + w` with `w = 1 / (4 (1 + e^z))`, evaluated
/// through `σ(−z) = exp(log σ(−z))` so no intermediate overflows.
pub fn burgers2d_fields(x: f64, y: f64, t: f64, nu: f64) -> [Field<f64>; 2] {
    let z = burgers2d_exponent(x, y, t, nu);
    let g = libm::exp(log_sigmoid(-z));
    // g(1 − g) with 1 − g = σ(z) taken directly to keep precision near g ≈ 1
    let h = libm::exp(log_sigmoid(z));
    let w = 0.25 * g;
    let wz = -0.25 * g * h;
    let wzz = 0.25 * g * h * (h - g);
    let dz = [-1.0 / (8.0 * nu), 1.0 / (8.0 * nu), -1.0 / (32.0 * nu)];
    let make = |sign: f64| Field {
        value: 0.75 + sign * w,
        d1: dz.map(|d| Some(sign * wz * d)),
        d2: [
            Some(sign * wzz * dz[0] * dz[0]),
            Some(sign * wzz * dz[1] * dz[1]),
            Some(sign * wzz * dz[2] * dz[2]),
        ],
    };
    [make(-1.0), make(1.0)]
}
