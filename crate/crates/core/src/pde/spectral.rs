//! Fourier pseudo-spectral solver for periodic viscous Burgers on `[0, 1)`.
//!
//! Diffusion is integrated exactly by the factor `e^{−νk²t}`; the nonlinear
//! term `−∂ₓ(u²/2)` is advanced with classical RK4 in the integrating-factor
//! variables (Kassam–Trefethen style with `E = e^{−νk²h/2}`).

use std::sync::Arc;
use std::vec;
use std::vec::Vec;

use core::f64::consts::PI;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

type C = Complex<f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralConfig {
    /// Number of grid points / Fourier modes.
    pub modes: usize,
    /// Step as a fraction of `dx / max|u|`.
    pub cfl: f64,
    /// Upper bound on the step.
    pub max_dt: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            modes: 128,
            cfl: 0.2,
            max_dt: 1e-3,
        }
    }
}

impl SpectralConfig {
    /// Same solver with `factor`× the modes and a `factor`× smaller step.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            modes: self.modes * factor,
            cfl: self.cfl / factor as f64,
            max_dt: self.max_dt / factor as f64,
        }
    }
}

/// Solution snapshots on the solver grid `x_j = j / modes`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSolution {
    pub nu: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    /// Half spectrum (`k = 0..=n/2`) of each snapshot, normalized by `n`.
    coeffs: Vec<Vec<C>>,
}

struct Solver {
    n: usize,
    nu: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `2πk` with the Nyquist entry zeroed for the first derivative.
    wave: Vec<f64>,
    /// `(2πk)²` including the Nyquist mode.
    wave2: Vec<f64>,
}

impl Solver {
    fn new(n: usize, nu: f64) -> Self {
        let mut planner = FftPlanner::new();
        let signed = |j: usize| if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
        let wave = (0..n)
            .map(|j| if j == n / 2 { 0.0 } else { 2.0 * PI * signed(j) })
            .collect();
        let wave2 = (0..n).map(|j| (2.0 * PI * signed(j)).powi(2)).collect();
        Self {
            n,
            nu,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            wave,
            wave2,
        }
    }

    fn to_physical(&self, hat: &[C]) -> Vec<f64> {
        let mut buf = hat.to_vec();
        self.inv.process(&mut buf);
        buf.iter().map(|c| c.re / self.n as f64).collect()
    }

    fn to_spectral(&self, u: &[f64]) -> Vec<C> {
        let mut buf: Vec<C> = u.iter().map(|&v| C::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    /// `−(ik/2) · FFT(u²)` scaled by the step `h`.
    fn nonlinear(&self, hat: &[C], h: f64) -> Vec<C> {
        let u = self.to_physical(hat);
        let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
        let mut out = self.to_spectral(&sq);
        for (o, &k) in out.iter_mut().zip(&self.wave) {
            *o *= C::new(0.0, -0.5 * k * h);
        }
        out
    }

    fn step(&self, v: &mut [C], h: f64) {
        let e: Vec<f64> = self.wave2.iter().map(|k2| (-self.nu * k2 * h / 2.0).exp()).collect();
        let a = self.nonlinear(v, h);
        let va: Vec<C> = (0..self.n).map(|j| e[j] * (v[j] + a[j] / 2.0)).collect();
        let b = self.nonlinear(&va, h);
        let vb: Vec<C> = (0..self.n).map(|j| e[j] * v[j] + b[j] / 2.0).collect();
        let c = self.nonlinear(&vb, h);
        let vc: Vec<C> = (0..self.n).map(|j| e[j] * e[j] * v[j] + e[j] * c[j]).collect();
        let d = self.nonlinear(&vc, h);
        for j in 0..self.n {
            let e2 = e[j] * e[j];
            v[j] = e2 * v[j] + (e2 * a[j] + 2.0 * e[j] * (b[j] + c[j]) + d[j]) / 6.0;
        }
    }
}

/// Spectral resampling of periodic samples onto `n` points.
fn resample(u: &[f64], n: usize) -> Vec<f64> {
    let m = u.len();
    if m == n {
        return u.to_vec();
    }
    let mut planner = FftPlanner::new();
    let mut hat: Vec<C> = u.iter().map(|&v| C::new(v, 0.0)).collect();
    planner.plan_fft_forward(m).process(&mut hat);
    let mut out = vec![C::new(0.0, 0.0); n];
    let half = m.min(n) / 2;
    for k in 0..half {
        out[k] = hat[k];
        if k > 0 {
            out[n - k] = hat[m - k];
        }
    }
    // shared Nyquist mode of the coarser grid, split symmetrically
    let nyq = if m < n { hat[m / 2] / 2.0 } else { (hat[n / 2] + hat[m - n / 2]) / 2.0 };
    if m < n {
        out[half] += nyq;
        out[n - half] += nyq;
    } else {
        out[half] = nyq * 2.0;
    }
    planner.plan_fft_inverse(n).process(&mut out);
    out.iter().map(|c| c.re / m as f64).collect()
}

/// Solves `u_t + u u_x = ν u_xx` from periodic samples `u0` (on `x_j = j/len`)
/// and records the field at every time in `times` (sorted, ≥ 0).
pub fn solve_burgers1d(
    u0: &[f64],
    nu: f64,
    times: &[f64],
    config: &SpectralConfig,
) -> Result<SpectralSolution> {
    if !(nu > 0.0) || config.modes < 4 || config.modes % 2 != 0 {
        return Err(Error::Config(format!(
            "spectral solver needs ν > 0 and an even grid (ν = {nu}, modes = {})",
            config.modes
        )));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Config("output times must be sorted and non-negative".into()));
    }
    let n = config.modes;
    let solver = Solver::new(n, nu);
    let start = resample(u0, n);
    let mut v = solver.to_spectral(&start);
    let mut t = 0.0;
    let mut snapshots = Vec::with_capacity(times.len());
    let dx = 1.0 / n as f64;
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let umax = solver
                .to_physical(&v)
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()))
                .max(1e-12);
            let dt = (config.cfl * dx / umax).min(config.max_dt);
            let steps = (span / dt).ceil() as usize;
            let h = span / steps as f64;
            for s in 0..steps {
                solver.step(&mut v, h);
                if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                    return Err(Error::Solver {
                        time: t + (s + 1) as f64 * h,
                    });
                }
            }
            t = target;
        }
        snapshots.push(solver.to_physical(&v));
    }
    let coeffs = snapshots
        .iter()
        .map(|u| {
            let hat = solver.to_spectral(u);
            hat[..=n / 2].iter().map(|c| c / n as f64).collect()
        })
        .collect();
    Ok(SpectralSolution {
        nu,
        times: times.to_vec(),
        snapshots,
        coeffs,
    })
}

impl SpectralSolution {
    pub fn modes(&self) -> usize {
        self.snapshots.first().map_or(0, Vec::len)
    }

    /// `(u, u_x, u_xx)` of snapshot `i` at `x` by Fourier interpolation.
    pub fn eval_snapshot(&self, i: usize, x: f64) -> (f64, f64, f64) {
        let n = self.modes();
        let c = &self.coeffs[i];
        let mut out = (c[0].re, 0.0, 0.0);
        for (k, ck) in c.iter().enumerate().skip(1) {
            let w = if k == n / 2 { 1.0 } else { 2.0 };
            let kk = 2.0 * PI * k as f64;
            let e = C::from_polar(1.0, kk * x);
            let z = ck * e;
            out.0 += w * z.re;
            if k != n / 2 {
                out.1 += w * (z * C::new(0.0, kk)).re;
            }
            out.2 -= w * kk * kk * z.re;
        }
        out
    }

    /// `u(x, t)`: Fourier interpolation in `x`, linear between snapshots in `t`.
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let ts = &self.times;
        let hi = ts.partition_point(|&s| s < t).min(ts.len() - 1);
        if ts[hi] == t || hi == 0 {
            return self.eval_snapshot(hi, x).0;
        }
        let lo = hi - 1;
        let w = (t - ts[lo]) / (ts[hi] - ts[lo]);
        (1.0 - w) * self.eval_snapshot(lo, x).0 + w * self.eval_snapshot(hi, x).0
    }
}
