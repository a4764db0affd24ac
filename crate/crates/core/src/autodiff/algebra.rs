//! Arithmetic shared by plain numbers and tape nodes, so one formula can be
//! evaluated either way.

use super::tape::{Tape, Var};

pub trait Algebra {
    type Elem: Copy;

    fn add(&mut self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn sub(&mut self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn mul(&mut self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn scale(&mut self, a: Self::Elem, c: f64) -> Self::Elem;
}

/// Ordinary `f64` arithmetic.
#[derive(Clone, Copy, Debug, Default)]
pub struct Plain;

impl Algebra for Plain {
    type Elem = f64;

    fn add(&mut self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        a - b
    }
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn scale(&mut self, a: f64, c: f64) -> f64 {
        a * c
    }
}

impl Algebra for Tape {
    type Elem = Var;

    fn add(&mut self, a: Var, b: Var) -> Var {
        Tape::add(self, a, b)
    }
    fn sub(&mut self, a: Var, b: Var) -> Var {
        Tape::sub(self, a, b)
    }
    fn mul(&mut self, a: Var, b: Var) -> Var {
        Tape::mul(self, a, b)
    }
    fn scale(&mut self, a: Var, c: f64) -> Var {
        Tape::scale(self, a, c)
    }
}
