//! Residual operators, written once over [`Algebra`] so the same formula
//! runs on plain numbers (analytic checks) and on the tape (training).

use crate::autodiff::Algebra;

/// One output component with the input derivatives a residual may read.
///
/// Index `i` of `d1`/`d2` is input coordinate `i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Field<E> {
    pub value: E,
    pub d1: [Option<E>; 3],
    pub d2: [Option<E>; 3],
}

impl<E: Copy> Field<E> {
    pub fn constant(value: E) -> Self {
        Self {
            value,
            d1: [None; 3],
            d2: [None; 3],
        }
    }

    pub fn d(&self, dir: usize) -> E {
        self.d1[dir].expect("first derivative requested by the residual")
    }

    pub fn dd(&self, dir: usize) -> E {
        self.d2[dir].expect("second derivative requested by the residual")
    }
}

impl Field<f64> {
    /// Field whose every listed derivative is zero.
    pub fn flat(value: f64, dims: usize) -> Self {
        let mut f = Self::constant(value);
        for i in 0..dims {
            f.d1[i] = Some(0.0);
            f.d2[i] = Some(0.0);
        }
        f
    }
}

/// `u_t + u u_x − ν u_xx` with inputs `(x, t)`.
pub fn burgers1d<A: Algebra>(alg: &mut A, u: &Field<A::Elem>, nu: f64) -> A::Elem {
    let adv = alg.mul(u.value, u.d(0));
    let lhs = alg.add(u.d(1), adv);
    let diff = alg.scale(u.dd(0), nu);
    alg.sub(lhs, diff)
}

/// Momentum residuals of coupled 2D Burgers with inputs `(x, y, t)`.
pub fn burgers2d<A: Algebra>(
    alg: &mut A,
    u: &Field<A::Elem>,
    v: &Field<A::Elem>,
    nu: f64,
) -> [A::Elem; 2] {
    let momentum = |alg: &mut A, w: &Field<A::Elem>| {
        let a = alg.mul(u.value, w.d(0));
        let b = alg.mul(v.value, w.d(1));
        let adv = alg.add(a, b);
        let lhs = alg.add(w.d(2), adv);
        let lap = alg.add(w.dd(0), w.dd(1));
        let diff = alg.scale(lap, nu);
        alg.sub(lhs, diff)
    };
    [momentum(alg, u), momentum(alg, v)]
}

/// Continuity, x- and y-momentum of steady Navier–Stokes with inputs `(x, y)`.
pub fn kovasznay<A: Algebra>(
    alg: &mut A,
    u: &Field<A::Elem>,
    v: &Field<A::Elem>,
    p: &Field<A::Elem>,
    re: f64,
) -> [A::Elem; 3] {
    let continuity = alg.add(u.d(0), v.d(1));
    let momentum = |alg: &mut A, w: &Field<A::Elem>, dp: A::Elem| {
        let a = alg.mul(u.value, w.d(0));
        let b = alg.mul(v.value, w.d(1));
        let adv = alg.add(a, b);
        let lhs = alg.add(adv, dp);
        let lap = alg.add(w.dd(0), w.dd(1));
        let visc = alg.scale(lap, 1.0 / re);
        alg.sub(lhs, visc)
    };
    let mx = momentum(alg, u, p.d(0));
    let my = momentum(alg, v, p.d(1));
    [continuity, mx, my]
}
