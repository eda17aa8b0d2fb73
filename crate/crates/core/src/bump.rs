//! Smooth cutoff functions, usable on plain numbers and on jets.
//!
//! Every cutoff here is built from the flat exponential B(t) = exp(-1/t)
//! (extended by zero for t <= 0) and is applied to polynomial arguments such
//! as squared radii, so compositions stay smooth across the gluing seams and
//! on the symmetry axes.  Jet evaluation is piecewise: in the flat regions
//! the jet is exactly constant, which is the correct Taylor data there.

use crate::jet::Jet;

/// The operations cutoffs need; implemented for numbers and jets so the same
/// formulas serve pointwise evaluation and derivative certificates.
pub trait Smooth: Clone {
    fn value(&self) -> f64;
    fn lift(&self, v: f64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn scale(&self, s: f64) -> Self;
    fn recip(&self) -> Self;
    fn exp(&self) -> Self;
}

impl Smooth for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, v: f64) -> f64 {
        v
    }
    fn add(&self, o: &f64) -> f64 {
        self + o
    }
    fn sub(&self, o: &f64) -> f64 {
        self - o
    }
    fn mul(&self, o: &f64) -> f64 {
        self * o
    }
    fn scale(&self, s: f64) -> f64 {
        self * s
    }
    fn recip(&self) -> f64 {
        1.0 / self
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
}

impl Smooth for Jet {
    fn value(&self) -> f64 {
        self.val()
    }
    fn lift(&self, v: f64) -> Jet {
        Jet::constant(self.order(), v)
    }
    fn add(&self, o: &Jet) -> Jet {
        self + o
    }
    fn sub(&self, o: &Jet) -> Jet {
        self - o
    }
    fn mul(&self, o: &Jet) -> Jet {
        self * o
    }
    fn scale(&self, s: f64) -> Jet {
        Jet::scale(self, s)
    }
    fn recip(&self) -> Jet {
        Jet::recip(self)
    }
    fn exp(&self) -> Jet {
        Jet::exp(self)
    }
}

/// B(t) = exp(-1/t) for t > 0, identically 0 for t <= 0.
///
/// All derivatives vanish at t = 0, so the piecewise jet is exact.  For
/// 0 < t < 1/700 the exponential underflows and both branches agree anyway.
pub fn flat_exp<S: Smooth>(t: &S) -> S {
    if t.value() <= 0.0 {
        t.lift(0.0)
    } else {
        t.recip().scale(-1.0).exp()
    }
}

/// Smooth step: 0 for t <= 0, 1 for t >= 1, strictly increasing between.
/// step(t) + step(1 - t) = 1 identically.
pub fn step<S: Smooth>(t: &S) -> S {
    let v = t.value();
    if v <= 0.0 {
        return t.lift(0.0);
    }
    if v >= 1.0 {
        return t.lift(1.0);
    }
    let b = flat_exp(t);
    let bc = flat_exp(&t.lift(1.0).sub(t));
    b.mul(&b.add(&bc).recip())
}

/// 1 on {q <= lo}, 0 on {q >= hi}, smooth in between.  Intended for squared
/// radii: pass q = rho^2, lo = r_in^2, hi = r_out^2.
pub fn cut_above<S: Smooth>(q: &S, lo: f64, hi: f64) -> S {
    assert!(lo < hi);
    step(&q.lift(hi).sub(q).scale(1.0 / (hi - lo)))
}

/// 0 on {q <= lo}, 1 on {q >= hi}, smooth in between.
pub fn cut_below<S: Smooth>(q: &S, lo: f64, hi: f64) -> S {
    assert!(lo < hi);
    step(&q.sub(&q.lift(lo)).scale(1.0 / (hi - lo)))
}
