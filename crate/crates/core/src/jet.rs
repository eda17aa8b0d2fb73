//! Truncated Taylor arithmetic in four real variables.
//!
//! A [`Jet`] stores the coefficients of a polynomial in four formal
//! increments, truncated at a runtime order.  Arithmetic on jets propagates
//! derivatives exactly (up to floating point roundoff), so one evaluation of
//! a composite expression yields every mixed partial up to the chosen order.
//! All derivative-based certificates in this crate are built on this type;
//! no finite differencing is used outside of tests.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

/// Number of formal variables.
pub const NVARS: usize = 4;
/// Largest supported truncation order.
pub const MAX_ORDER: usize = 8;

struct Tables {
    /// Multi-indices in graded order (degree-major, lexicographic within).
    idx: Vec<[u8; NVARS]>,
    /// Start offset of each degree block; block d is idx[off[d]..off[d+1]].
    off: [usize; MAX_ORDER + 2],
    /// Position of a multi-index, or u16::MAX when its degree exceeds MAX_ORDER.
    pos: Box<[[[[u16; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1]>,
    /// m! = m1! m2! m3! m4! per position.
    fact: Vec<f64>,
}

#[allow(clippy::needless_range_loop)]
fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut idx = Vec::new();
        let mut off = [0usize; MAX_ORDER + 2];
        for d in 0..=MAX_ORDER {
            off[d] = idx.len();
            for m1 in (0..=d).rev() {
                for m2 in (0..=d - m1).rev() {
                    for m3 in (0..=d - m1 - m2).rev() {
                        let m4 = d - m1 - m2 - m3;
                        idx.push([m1 as u8, m2 as u8, m3 as u8, m4 as u8]);
                    }
                }
            }
        }
        off[MAX_ORDER + 1] = idx.len();
        let mut pos =
            Box::new([[[[u16::MAX; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1]);
        for (p, m) in idx.iter().enumerate() {
            pos[m[0] as usize][m[1] as usize][m[2] as usize][m[3] as usize] = p as u16;
        }
        let fact = idx
            .iter()
            .map(|m| m.iter().map(|&k| factorial(k as usize)).product())
            .collect();
        Tables {
            idx,
            off,
            pos,
            fact,
        }
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[inline]
fn position(m: [usize; NVARS]) -> usize {
    tables().pos[m[0]][m[1]][m[2]][m[3]] as usize
}

/// Truncated Taylor expansion of a scalar function of four variables.
///
/// Coefficient `c[m]` is the partial derivative for multi-index `m` divided
/// by `m!`; the expansion point itself is not stored.
#[derive(Debug, Clone)]
pub struct Jet {
    order: usize,
    c: Vec<f64>,
}

impl Jet {
    pub fn zeros(order: usize) -> Jet {
        assert!(order <= MAX_ORDER);
        Jet {
            order,
            c: vec![0.0; tables().off[order + 1]],
        }
    }

    pub fn constant(order: usize, v: f64) -> Jet {
        let mut j = Jet::zeros(order);
        j.c[0] = v;
        j
    }

    /// The i-th coordinate as a function: value `v`, unit first derivative.
    pub fn variable(order: usize, i: usize, v: f64) -> Jet {
        assert!(i < NVARS);
        let mut j = Jet::constant(order, v);
        if order >= 1 {
            j.c[1 + i] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn val(&self) -> f64 {
        self.c[0]
    }

    pub fn coeff(&self, m: [usize; NVARS]) -> f64 {
        let p = position(m);
        if p < self.c.len() {
            self.c[p]
        } else {
            0.0
        }
    }

    pub fn set_coeff(&mut self, m: [usize; NVARS], v: f64) {
        let p = position(m);
        assert!(p < self.c.len(), "coefficient beyond truncation order");
        self.c[p] = v;
    }

    /// Mixed partial derivative at the expansion point.
    pub fn partial(&self, m: [usize; NVARS]) -> f64 {
        let p = position(m);
        if p < self.c.len() {
            self.c[p] * tables().fact[p]
        } else {
            0.0
        }
    }

    /// Gradient at the expansion point.
    pub fn grad(&self) -> [f64; NVARS] {
        let mut g = [0.0; NVARS];
        for i in 0..NVARS {
            let mut m = [0usize; NVARS];
            m[i] = 1;
            g[i] = self.partial(m);
        }
        g
    }

    /// Largest |partial derivative| over all orders up to `n`.
    pub fn cn_norm(&self, n: usize) -> f64 {
        let t = tables();
        let top = n.min(self.order);
        let mut best = 0.0f64;
        for p in 0..t.off[top + 1] {
            best = best.max((self.c[p] * t.fact[p]).abs());
        }
        best
    }

    pub fn truncated(&self, order: usize) -> Jet {
        let mut out = Jet::zeros(order.min(self.order));
        let n = out.c.len();
        out.c.copy_from_slice(&self.c[..n]);
        out
    }

    /// Self minus its value: the part that vanishes at the expansion point.
    pub fn nilpotent(&self) -> Jet {
        let mut n = self.clone();
        n.c[0] = 0.0;
        n
    }

    fn valuation(&self) -> usize {
        let t = tables();
        for d in 0..=self.order {
            if self.c[t.off[d]..t.off[d + 1]].iter().any(|&x| x != 0.0) {
                return d;
            }
        }
        self.order + 1
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut out = self.clone();
        for x in &mut out.c {
            *x *= s;
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Jet, s: f64) {
        assert_eq!(self.order, other.order);
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += s * b;
        }
    }

    pub fn mul_jet(&self, rhs: &Jet) -> Jet {
        assert_eq!(self.order, rhs.order);
        let t = tables();
        let ord = self.order;
        let mut out = Jet::zeros(ord);
        let va = self.valuation();
        let vb = rhs.valuation();
        if va + vb > ord {
            return out;
        }
        for da in va..=ord - vb {
            for ia in t.off[da]..t.off[da + 1] {
                let a = self.c[ia];
                if a == 0.0 {
                    continue;
                }
                let ma = t.idx[ia];
                for db in vb..=ord - da {
                    for ib in t.off[db]..t.off[db + 1] {
                        let b = rhs.c[ib];
                        if b == 0.0 {
                            continue;
                        }
                        let mb = t.idx[ib];
                        let p = t.pos[(ma[0] + mb[0]) as usize][(ma[1] + mb[1]) as usize]
                            [(ma[2] + mb[2]) as usize][(ma[3] + mb[3]) as usize];
                        out.c[p as usize] += a * b;
                    }
                }
            }
        }
        out
    }

    /// Evaluate a power series in the nilpotent part of `self` by Horner's
    /// scheme.  `coeffs[j]` must be the j-th Taylor coefficient of the outer
    /// function at the value of `self`.
    pub fn apply_series(&self, coeffs: &[f64]) -> Jet {
        let n = self.nilpotent();
        let top = coeffs.len().min(self.order + 1);
        let mut out = Jet::constant(self.order, *coeffs[..top].last().unwrap_or(&0.0));
        for j in (0..top.saturating_sub(1)).rev() {
            out = out.mul_jet(&n);
            out.c[0] += coeffs[j];
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.val().exp();
        let mut c = vec![0.0; self.order + 1];
        let mut f = 1.0;
        for (j, cj) in c.iter_mut().enumerate() {
            if j > 0 {
                f *= j as f64;
            }
            *cj = e / f;
        }
        self.apply_series(&c)
    }

    pub fn ln(&self) -> Jet {
        let v = self.val();
        assert!(v > 0.0, "ln of a jet with non-positive value");
        let mut c = vec![0.0; self.order + 1];
        c[0] = v.ln();
        for (j, cj) in c.iter_mut().enumerate().skip(1) {
            *cj = -(-1.0f64 / v).powi(j as i32) / j as f64;
        }
        self.apply_series(&c)
    }

    /// Real power; the value must be strictly positive.
    pub fn powf(&self, a: f64) -> Jet {
        let v = self.val();
        assert!(v > 0.0, "powf of a jet with non-positive value");
        let mut c = vec![0.0; self.order + 1];
        let mut binom = 1.0;
        for (j, cj) in c.iter_mut().enumerate() {
            if j > 0 {
                binom *= (a - (j as f64 - 1.0)) / j as f64;
            }
            *cj = binom * v.powf(a - j as f64);
        }
        self.apply_series(&c)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Jet {
        let v = self.val();
        assert!(v != 0.0, "recip of a jet with zero value");
        let mut c = vec![0.0; self.order + 1];
        let mut p = 1.0 / v;
        for cj in c.iter_mut() {
            *cj = p;
            p *= -1.0 / v;
        }
        self.apply_series(&c)
    }

    pub fn sin(&self) -> Jet {
        let v = self.val();
        let mut c = vec![0.0; self.order + 1];
        let mut f = 1.0;
        for (j, cj) in c.iter_mut().enumerate() {
            if j > 0 {
                f *= j as f64;
            }
            *cj = (v + j as f64 * std::f64::consts::FRAC_PI_2).sin() / f;
        }
        self.apply_series(&c)
    }

    pub fn cos(&self) -> Jet {
        let v = self.val();
        let mut c = vec![0.0; self.order + 1];
        let mut f = 1.0;
        for (j, cj) in c.iter_mut().enumerate() {
            if j > 0 {
                f *= j as f64;
            }
            *cj = (v + j as f64 * std::f64::consts::FRAC_PI_2).cos() / f;
        }
        self.apply_series(&c)
    }

    /// Composite F(Y(x)) of a jet `f` expanded at the value of `y` with the
    /// four component jets of Y.  All components of `y` must share one order.
    pub fn compose4(f: &Jet, y: &[Jet; NVARS]) -> Jet {
        let ord = y[0].order;
        let t = tables();
        let nil: Vec<Jet> = y.iter().map(|yi| yi.nilpotent()).collect();
        let top = f.order.min(ord);
        let len = t.off[top + 1];
        let mut mono: Vec<Jet> = Vec::with_capacity(len);
        let mut out = Jet::zeros(ord);
        for p in 0..len {
            let m = t.idx[p];
            let mj = if p == 0 {
                Jet::constant(ord, 1.0)
            } else {
                let i = (0..NVARS).rev().find(|&i| m[i] > 0).unwrap();
                let mut parent = [m[0] as usize, m[1] as usize, m[2] as usize, m[3] as usize];
                parent[i] -= 1;
                mono[position(parent)].mul_jet(&nil[i])
            };
            if f.c[p] != 0.0 {
                out.add_scaled(&mj, f.c[p]);
            }
            mono.push(mj);
        }
        out
    }

    /// Largest |coefficient| (not derivative) over the whole jet.
    pub fn max_abs_coeff(&self) -> f64 {
        self.c.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }

    /// Jet of the i-th partial derivative, one order lower.
    pub fn derivative_jet(&self, i: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let t = tables();
        let mut out = Jet::zeros(self.order - 1);
        for p in 0..out.c.len() {
            let m = t.idx[p];
            let mut src = [m[0] as usize, m[1] as usize, m[2] as usize, m[3] as usize];
            src[i] += 1;
            out.c[p] = self.c[position(src)] * src[i] as f64;
        }
        out
    }

    /// Reexpansion of x -> f(t x) given the jet of f at t x0: the degree-d
    /// coefficients pick up a factor t^d.
    pub fn scale_degrees(&self, t: f64) -> Jet {
        let tab = tables();
        let mut out = self.clone();
        let mut f = 1.0;
        for d in 0..=self.order {
            for p in tab.off[d]..tab.off[d + 1] {
                out.c[p] *= f;
            }
            f *= t;
        }
        out
    }

    /// Reexpansion under scaling only the listed variables by t: the
    /// coefficient of each monomial is multiplied by t to the power of its
    /// degree in those variables.
    pub fn scale_degrees_of(&self, vars: &[usize], t: f64) -> Jet {
        let tab = tables();
        let mut out = self.clone();
        for (p, m) in tab.idx[..tab.off[self.order + 1]].iter().enumerate() {
            let d: u8 = vars.iter().map(|&v| m[v]).sum();
            out.c[p] *= t.powi(d as i32);
        }
        out
    }
}

/// Jets of the inverse of a map R^4 -> R^4.
///
/// `y` holds the component jets of Y at some point x0 (which must be passed
/// explicitly since jets do not store expansion points).  The result is the
/// jet of the inverse map at Y(x0), found degree by degree from the fixed
/// point equation X = X + A^(-1) (id - Y o X).
pub fn invert_map(y: &[Jet; NVARS], x0: [f64; NVARS]) -> [Jet; NVARS] {
    let ord = y[0].order();
    // Linear part of Y and its inverse at plain f64 level.
    let mut a = [[0.0; NVARS]; NVARS];
    for (i, yi) in y.iter().enumerate() {
        let g = yi.grad();
        a[i] = g;
    }
    let ainv = invert4(&a).expect("map has singular linear part");

    let mut x: [Jet; NVARS] = std::array::from_fn(|i| {
        let mut xi = Jet::constant(ord, x0[i]);
        for (j, row) in ainv[i].iter().enumerate() {
            let u = Jet::variable(ord, j, 0.0).nilpotent();
            xi.add_scaled(&u, *row);
        }
        xi
    });

    for _ in 0..ord {
        // Residual id - Y o X, expressed in the target variables.
        let comps: [Jet; NVARS] = std::array::from_fn(|i| Jet::compose4(&y[i], &x));
        let mut err: [Jet; NVARS] = std::array::from_fn(|i| {
            let mut e = Jet::variable(ord, i, y[i].val());
            e.add_scaled(&comps[i], -1.0);
            e
        });
        let sup = err.iter().map(|e| e.max_abs_coeff()).fold(0.0f64, f64::max);
        for (i, xi) in x.iter_mut().enumerate() {
            for (j, e) in err.iter_mut().enumerate() {
                xi.add_scaled(e, ainv[i][j]);
            }
        }
        if sup == 0.0 {
            break;
        }
    }
    x
}

/// Plain Gauss-Jordan inverse of a 4x4 matrix of numbers.
pub fn invert4(a: &[[f64; NVARS]; NVARS]) -> Option<[[f64; NVARS]; NVARS]> {
    let mut m = *a;
    let mut inv = [[0.0; NVARS]; NVARS];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..NVARS {
        let piv = (col..NVARS).max_by(|&p, &q| {
            m[p][col]
                .abs()
                .partial_cmp(&m[q][col].abs())
                .expect("NaN in matrix inverse")
        })?;
        if m[piv][col] == 0.0 {
            return None;
        }
        m.swap(col, piv);
        inv.swap(col, piv);
        let d = 1.0 / m[col][col];
        for k in 0..NVARS {
            m[col][k] *= d;
            inv[col][k] *= d;
        }
        for r in 0..NVARS {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for k in 0..NVARS {
                        m[r][k] -= f * m[col][k];
                        inv[r][k] -= f * inv[col][k];
                    }
                }
            }
        }
    }
    Some(inv)
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.mul_jet(&rhs.recip())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_jets(order: usize, p: [f64; 4]) -> [Jet; 4] {
        std::array::from_fn(|i| Jet::variable(order, i, p[i]))
    }

    /// exp(sin(x1 x2) + x3) / (1 + x4^2), the workhorse test function.
    fn work(x: &[Jet; 4]) -> Jet {
        let s = (&x[0] * &x[1]).sin();
        let num = (&s + &x[2]).exp();
        let den = &Jet::constant(x[0].order(), 1.0) + &(&x[3] * &x[3]);
        &num / &den
    }

    fn work_val(p: [f64; 4]) -> f64 {
        ((p[0] * p[1]).sin() + p[2]).exp() / (1.0 + p[3] * p[3])
    }

    #[test]
    fn polynomial_product_is_exact() {
        let x = point_jets(3, [0.0; 4]);
        // (1 + 2 x1 + 3 x2^2)(x3 - x4)
        let mut a = Jet::constant(3, 1.0);
        a.add_scaled(&x[0], 2.0);
        a.add_scaled(&(&x[1] * &x[1]), 3.0);
        let b = &x[2] - &x[3];
        let p = &a * &b;
        assert_eq!(p.coeff([0, 0, 1, 0]), 1.0);
        assert_eq!(p.coeff([0, 0, 0, 1]), -1.0);
        assert_eq!(p.coeff([1, 0, 1, 0]), 2.0);
        assert_eq!(p.coeff([1, 0, 0, 1]), -2.0);
        assert_eq!(p.coeff([0, 2, 1, 0]), 3.0);
        assert_eq!(p.coeff([0, 0, 0, 0]), 0.0);
        assert_eq!(p.coeff([2, 0, 0, 0]), 0.0);
    }

    #[test]
    fn partials_match_finite_differences() {
        let p = [0.3, -0.7, 0.2, 0.5];
        let f = work(&point_jets(4, p));

        // d/dx1 via Richardson-extrapolated central differences.
        let d1 = |h: f64| (work_val([p[0] + h, p[1], p[2], p[3]]) - work_val([p[0] - h, p[1], p[2], p[3]])) / (2.0 * h);
        let fd = (4.0 * d1(5e-4) - d1(1e-3)) / 3.0;
        assert!((f.partial([1, 0, 0, 0]) - fd).abs() < 1e-9, "d1 {fd}");

        // d2/dx4^2.
        let d44 = |h: f64| {
            (work_val([p[0], p[1], p[2], p[3] + h]) - 2.0 * work_val(p)
                + work_val([p[0], p[1], p[2], p[3] - h]))
                / (h * h)
        };
        let fd = (4.0 * d44(5e-4) - d44(1e-3)) / 3.0;
        assert!((f.partial([0, 0, 0, 2]) - fd).abs() < 1e-6, "d44 {fd}");

        // d2/dx1 dx2 via the four-point cross stencil.
        let d12 = |h: f64| {
            (work_val([p[0] + h, p[1] + h, p[2], p[3]])
                - work_val([p[0] + h, p[1] - h, p[2], p[3]])
                - work_val([p[0] - h, p[1] + h, p[2], p[3]])
                + work_val([p[0] - h, p[1] - h, p[2], p[3]]))
                / (4.0 * h * h)
        };
        let fd = (4.0 * d12(5e-4) - d12(1e-3)) / 3.0;
        assert!((f.partial([1, 1, 0, 0]) - fd).abs() < 1e-6, "d12 {fd}");

        // d3/dx1 dx2 dx3: the x3 dependence is a clean exponential factor,
        // so d/dx3 of the function equals the function itself.
        assert!((f.partial([1, 1, 1, 0]) - f.partial([1, 1, 0, 0])).abs() < 1e-12);
    }

    #[test]
    fn composition_identities_hold() {
        let x = point_jets(6, [1.3, 0.4, -0.2, 2.0]);
        let f = &(&work(&x) * &work(&x)) + &Jet::constant(6, 0.7);
        let diff = &f.ln().exp() - &f;
        assert!(diff.max_abs_coeff() < 1e-12);
        let s = f.sin();
        let c = f.cos();
        let one = &(&s * &s) + &(&c * &c);
        assert!((one.val() - 1.0).abs() < 1e-14);
        assert!(one.nilpotent().max_abs_coeff() < 1e-13);
        let r = &f.sqrt() * &f.sqrt();
        assert!((&r - &f).max_abs_coeff() < 1e-12);
        let pw = &f.powf(-1.5) * &f.powf(1.5);
        assert!((&pw - &Jet::constant(6, 1.0)).max_abs_coeff() < 1e-12);
    }

    #[test]
    fn compose4_matches_direct_evaluation() {
        // Y: polynomial map, F: the workhorse function.  Composing the jet of
        // F at Y(x0) with the jets of Y must match evaluating F(Y(x)) in jet
        // arithmetic directly.
        let x0 = [0.2, -0.4, 0.1, 0.6];
        let x = point_jets(5, x0);
        let y: [Jet; 4] = [
            &x[0] + &(&x[1] * &x[1]),
            &(&x[2] * &x[3]) - &x[0],
            x[2].scale(0.5),
            &x[3] + &(&x[0] * &x[2]),
        ];
        let y0 = std::array::from_fn(|i| y[i].val());
        let f_at_y0 = work(&point_jets(5, y0));
        let composed = Jet::compose4(&f_at_y0, &y);
        let direct = work(&y);
        assert!((&composed - &direct).max_abs_coeff() < 1e-12);
    }

    #[test]
    fn invert_map_round_trips() {
        let x0 = [0.5, -0.3, 0.8, 0.1];
        let x = point_jets(5, x0);
        let y: [Jet; 4] = [
            &x[0] + &x[1].sin().scale(0.1),
            &x[1] + &(&x[2] * &x[2]).scale(0.1),
            &x[2] + &(&x[3].exp() - &Jet::constant(5, 1.0)).scale(0.1),
            &x[3] + &(&x[0] * &x[1]).scale(0.1),
        ];
        let xinv = invert_map(&y, x0);
        // X o Y must be the identity jet in the source variables.
        for i in 0..4 {
            let round = Jet::compose4(&xinv[i], &y);
            let diff = &round - &Jet::variable(5, i, x0[i]);
            assert!(diff.max_abs_coeff() < 1e-11, "component {i}");
        }
        // And the values of X at y0 must be x0.
        for i in 0..4 {
            assert!((xinv[i].val() - x0[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn cn_norm_reads_derivatives() {
        let x = point_jets(3, [0.0; 4]);
        // f = 5 x1 x2^2 has d3 f / dx1 dx2^2 = 10 and nothing else above 5.
        let f = (&x[0] * &(&x[1] * &x[1])).scale(5.0);
        assert_eq!(f.cn_norm(3), 10.0);
        assert_eq!(f.cn_norm(2), 0.0);
    }
}
