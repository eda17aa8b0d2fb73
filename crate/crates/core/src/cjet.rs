//! Truncated Taylor arithmetic for holomorphic functions of one variable.
//!
//! The seed surface is built from honest holomorphic functions, so its
//! sheets are differentiated here, in one complex variable, and converted to
//! real four-variable jets only at the chart boundary (see
//! [`CJet::to_real_jets`]).  This keeps the Cauchy-Riemann structure exact
//! instead of approximately satisfied.

use num_complex::Complex64;

use crate::jet::Jet;

/// Truncated Taylor expansion of a holomorphic function at a point.
/// Coefficient `c[j]` is the j-th derivative divided by j!.
#[derive(Debug, Clone)]
pub struct CJet {
    order: usize,
    c: Vec<Complex64>,
}

impl CJet {
    pub fn zeros(order: usize) -> CJet {
        CJet {
            order,
            c: vec![Complex64::ZERO; order + 1],
        }
    }

    pub fn constant(order: usize, v: Complex64) -> CJet {
        let mut j = CJet::zeros(order);
        j.c[0] = v;
        j
    }

    /// The identity function: value `v`, unit derivative.
    pub fn variable(order: usize, v: Complex64) -> CJet {
        let mut j = CJet::constant(order, v);
        if order >= 1 {
            j.c[1] = Complex64::ONE;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn val(&self) -> Complex64 {
        self.c[0]
    }

    pub fn coeff(&self, j: usize) -> Complex64 {
        if j <= self.order {
            self.c[j]
        } else {
            Complex64::ZERO
        }
    }

    /// j-th derivative at the expansion point.
    pub fn derivative(&self, j: usize) -> Complex64 {
        self.coeff(j) * (1..=j).map(|k| k as f64).product::<f64>()
    }

    pub fn scale(&self, s: Complex64) -> CJet {
        let mut out = self.clone();
        for x in &mut out.c {
            *x *= s;
        }
        out
    }

    pub fn add(&self, rhs: &CJet) -> CJet {
        assert_eq!(self.order, rhs.order);
        let mut out = self.clone();
        for (a, b) in out.c.iter_mut().zip(&rhs.c) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, rhs: &CJet) -> CJet {
        self.add(&rhs.scale(-Complex64::ONE))
    }

    pub fn add_const(&self, v: Complex64) -> CJet {
        let mut out = self.clone();
        out.c[0] += v;
        out
    }

    pub fn mul(&self, rhs: &CJet) -> CJet {
        assert_eq!(self.order, rhs.order);
        let mut out = CJet::zeros(self.order);
        for i in 0..=self.order {
            if self.c[i] == Complex64::ZERO {
                continue;
            }
            for j in 0..=self.order - i {
                out.c[i + j] += self.c[i] * rhs.c[j];
            }
        }
        out
    }

    fn nilpotent(&self) -> CJet {
        let mut n = self.clone();
        n.c[0] = Complex64::ZERO;
        n
    }

    /// Horner evaluation of a power series in the nilpotent part of `self`.
    /// `coeffs[j]` must be the j-th Taylor coefficient of the outer function
    /// at the value of `self`.
    pub fn apply_series(&self, coeffs: &[Complex64]) -> CJet {
        let n = self.nilpotent();
        let top = coeffs.len().min(self.order + 1);
        let mut out = CJet::constant(
            self.order,
            *coeffs[..top].last().unwrap_or(&Complex64::ZERO),
        );
        for j in (0..top.saturating_sub(1)).rev() {
            out = out.mul(&n);
            out.c[0] += coeffs[j];
        }
        out
    }

    pub fn exp(&self) -> CJet {
        let e = self.val().exp();
        let mut c = vec![Complex64::ZERO; self.order + 1];
        let mut f = 1.0;
        for (j, cj) in c.iter_mut().enumerate() {
            if j > 0 {
                f *= j as f64;
            }
            *cj = e / f;
        }
        self.apply_series(&c)
    }

    pub fn sin(&self) -> CJet {
        // sin(v + n) = sin v cos n + cos v sin n, expanded in n.
        let (s, co) = (self.val().sin(), self.val().cos());
        let mut c = vec![Complex64::ZERO; self.order + 1];
        let mut f = 1.0;
        for (j, cj) in c.iter_mut().enumerate() {
            if j > 0 {
                f *= j as f64;
            }
            *cj = match j % 4 {
                0 => s,
                1 => co,
                2 => -s,
                _ => -co,
            } / f;
        }
        self.apply_series(&c)
    }

    pub fn cos(&self) -> CJet {
        let (s, co) = (self.val().sin(), self.val().cos());
        let mut c = vec![Complex64::ZERO; self.order + 1];
        let mut f = 1.0;
        for (j, cj) in c.iter_mut().enumerate() {
            if j > 0 {
                f *= j as f64;
            }
            *cj = match j % 4 {
                0 => co,
                1 => -s,
                2 => -co,
                _ => s,
            } / f;
        }
        self.apply_series(&c)
    }

    /// Principal logarithm; the value must stay off the branch cut, which the
    /// callers guarantee by construction.
    pub fn ln(&self) -> CJet {
        let v = self.val();
        assert!(v != Complex64::ZERO, "ln of a jet with zero value");
        let mut c = vec![Complex64::ZERO; self.order + 1];
        c[0] = v.ln();
        let mut p = Complex64::ONE;
        for (j, cj) in c.iter_mut().enumerate().skip(1) {
            p *= -1.0 / v;
            *cj = -p / j as f64;
        }
        self.apply_series(&c)
    }

    /// log(1 + self), accurate when the value is tiny.
    pub fn ln_1p(&self) -> CJet {
        let w = self.val();
        // ln|1+w| via ln_1p of |1+w|^2 - 1 = 2 Re w + |w|^2; the argument via
        // atan2 directly on 1 + w.  Both avoid forming 1 + w multiplicatively.
        let re = 0.5 * (2.0 * w.re + w.norm_sqr()).ln_1p();
        let im = (w.im).atan2(1.0 + w.re);
        let mut c = vec![Complex64::ZERO; self.order + 1];
        c[0] = Complex64::new(re, im);
        let v = Complex64::ONE + w;
        let mut p = Complex64::ONE;
        for (j, cj) in c.iter_mut().enumerate().skip(1) {
            p *= -1.0 / v;
            *cj = -p / j as f64;
        }
        self.apply_series(&c)
    }

    pub fn recip(&self) -> CJet {
        let v = self.val();
        assert!(v != Complex64::ZERO, "recip of a jet with zero value");
        let mut c = vec![Complex64::ZERO; self.order + 1];
        let mut p = 1.0 / v;
        for cj in c.iter_mut() {
            *cj = p;
            p *= -1.0 / v;
        }
        self.apply_series(&c)
    }

    /// Complex power v^a with the principal branch, a real.
    pub fn powf(&self, a: f64) -> CJet {
        let v = self.val();
        assert!(v != Complex64::ZERO, "powf of a jet with zero value");
        let mut c = vec![Complex64::ZERO; self.order + 1];
        let mut binom = Complex64::ONE;
        for (j, cj) in c.iter_mut().enumerate() {
            if j > 0 {
                binom *= (a - (j as f64 - 1.0)) / j as f64;
            }
            *cj = binom * v.powf(a - j as f64);
        }
        self.apply_series(&c)
    }

    pub fn sqrt(&self) -> CJet {
        self.powf(0.5)
    }

    /// exp(self) - 1, with the value part free of cancellation.
    pub fn exp_m1(&self) -> CJet {
        let mut out = self.exp();
        out.c[0] = expm1_c(self.val());
        out
    }

    /// Series of the derivative, padded to the same order.
    pub fn differentiate(&self) -> CJet {
        let mut out = CJet::zeros(self.order);
        for j in 0..self.order {
            out.c[j] = self.c[j + 1] * (j + 1) as f64;
        }
        out
    }

    /// self composed with `inner`; `self` must be expanded at inner's value.
    pub fn compose(&self, inner: &CJet) -> CJet {
        inner.apply_series(&self.c)
    }

    /// Compositional inverse of a series with zero value and nonzero slope.
    pub fn revert(&self) -> CJet {
        assert!(self.c[0] == Complex64::ZERO, "revert needs zero value");
        assert!(self.c[1] != Complex64::ZERO, "revert needs nonzero slope");
        let t = CJet::variable(self.order, Complex64::ZERO);
        let mut x = t.scale(Complex64::ONE / self.c[1]);
        let d = self.differentiate();
        // Newton in the series ring doubles the correct order every pass.
        for _ in 0..5 {
            let step = self.compose(&x).sub(&t).mul(&d.compose(&x).recip());
            x = x.sub(&step);
        }
        x
    }

    pub fn powi(&self, n: u32) -> CJet {
        let mut out = CJet::constant(self.order, Complex64::ONE);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Real and imaginary parts as four-variable real jets, with the complex
    /// increment identified with the first two real variables.
    ///
    /// If this jet expands w(z) at z0, the results expand Re w and Im w as
    /// functions of (x1, x2, x3, x4) at (Re z0, Im z0, *, *) with no
    /// dependence on the last two variables.
    pub fn to_real_jets(&self, order: usize) -> (Jet, Jet) {
        let top = self.order.min(order);
        // Horner in t = x1 + i x2 (nilpotent): (re, im) accumulator pair.
        let x = Jet::variable(order, 0, 0.0).nilpotent();
        let y = Jet::variable(order, 1, 0.0).nilpotent();
        let mut re = Jet::constant(order, self.c[top].re);
        let mut im = Jet::constant(order, self.c[top].im);
        for j in (0..top).rev() {
            let nre = &(&re * &x) - &(&im * &y);
            let nim = &(&re * &y) + &(&im * &x);
            re = nre;
            im = nim;
            re.add_scaled(&Jet::constant(order, 1.0), self.c[j].re);
            im.add_scaled(&Jet::constant(order, 1.0), self.c[j].im);
        }
        (re, im)
    }
}

/// e^w - 1 for complex w, accurate when w is tiny.
pub fn expm1_c(w: Complex64) -> Complex64 {
    let s = (w.im * 0.5).sin();
    Complex64::new(
        w.re.exp_m1() * w.im.cos() - 2.0 * s * s,
        w.re.exp() * w.im.sin(),
    )
}
