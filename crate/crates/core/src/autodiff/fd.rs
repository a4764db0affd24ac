//! Central finite differences, used as an independent check of the tape.

use alloc::vec::Vec;

/// `∂f/∂x_i` for every `i` by `(f(x + h e_i) − f(x − h e_i)) / 2h`.
pub fn central_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `∂²f/∂x_i²` by `(f(x + h e_i) − 2 f(x) + f(x − h e_i)) / h²`.
pub fn central_second(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut probe = x.to_vec();
    let mid = f(&probe);
    probe[i] = x[i] + h;
    let up = f(&probe);
    probe[i] = x[i] - h;
    let down = f(&probe);
    (up - 2.0 * mid + down) / (h * h)
}

/// `|a − b| ≤ rel · max(|a|, |b|) + abs`.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + abs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        let f = |x: &[f64]| x[0] * x[0] * x[1] + x[1] * x[1] * x[1];
        let g = central_gradient(f, &[2.0, 3.0], 1e-5);
        assert!(close(g[0], 12.0, 1e-9, 0.0) && close(g[1], 31.0, 1e-9, 0.0), "{g:?}");
        assert!(close(central_second(f, &[2.0, 3.0], 1, 1e-3), 18.0, 1e-8, 0.0));
    }
}
