//! Differential forms on R^4 with jet-valued coefficients.
//!
//! A [`FormField`] owns one scalar coefficient field per ordered basis
//! monomial of its degree.  Exterior derivative, wedge product and pullback
//! are built lazily: they wrap the ingredient fields in new ones, and all
//! derivatives are taken through jet arithmetic at evaluation time.  The
//! module also provides primitives of closed 2-forms (radial homotopy
//! formula, plus the variant adapted to forms vanishing on a plane).

use std::cell::RefCell;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::jet::Jet;
use crate::quad;

/// Relative tolerance of the primitive quadratures.
const RAY_QUAD_TOL: f64 = 1e-13;
const RAY_QUAD_DEPTH: usize = 24;

// ---------------------------------------------------------------------------
// Scalar coefficient fields.
// ---------------------------------------------------------------------------

/// A scalar function of four variables that can report its Taylor jet at any
/// point.  Implementations must be pure: the jet may be requested many times
/// at the same point from several threads.
pub trait ScalarField: Send + Sync {
    fn jet(&self, p: [f64; 4], order: usize) -> Jet;

    fn value(&self, p: [f64; 4]) -> f64 {
        self.jet(p, 0).val()
    }
}

pub type Field = Arc<dyn ScalarField>;

pub struct ConstField(pub f64);

impl ScalarField for ConstField {
    fn jet(&self, _p: [f64; 4], order: usize) -> Jet {
        Jet::constant(order, self.0)
    }
}

/// Polynomial with exact jets; the workhorse of the randomized certificates.
pub struct PolyField {
    terms: Vec<([usize; 4], f64)>,
}

impl PolyField {
    pub fn new(terms: Vec<([usize; 4], f64)>) -> PolyField {
        PolyField { terms }
    }
}

impl ScalarField for PolyField {
    fn jet(&self, p: [f64; 4], order: usize) -> Jet {
        // Cache powers of the coordinate jets up to the needed degree.
        let max_deg: [usize; 4] = (0..4)
            .map(|i| self.terms.iter().map(|(m, _)| m[i]).max().unwrap_or(0))
            .collect::<Vec<_>>()
            .try_into()
            .unwrap();
        let pow: Vec<Vec<Jet>> = (0..4)
            .map(|i| {
                let mut v = vec![Jet::constant(order, 1.0)];
                let x = Jet::variable(order, i, p[i]);
                for k in 1..=max_deg[i] {
                    v.push(&v[k - 1] * &x);
                }
                v
            })
            .collect();
        let mut out = Jet::zeros(order);
        for (m, c) in &self.terms {
            let t = &(&pow[0][m[0]] * &pow[1][m[1]]) * &(&pow[2][m[2]] * &pow[3][m[3]]);
            out.add_scaled(&t, *c);
        }
        out
    }
}

/// Field defined by a closure producing jets directly.
pub struct FnField<F>(pub F);

impl<F: Fn([f64; 4], usize) -> Jet + Send + Sync> ScalarField for FnField<F> {
    fn jet(&self, p: [f64; 4], order: usize) -> Jet {
        (self.0)(p, order)
    }
}

struct LinComb {
    terms: Vec<(f64, Field)>,
}

impl ScalarField for LinComb {
    fn jet(&self, p: [f64; 4], order: usize) -> Jet {
        let mut out = Jet::zeros(order);
        for (s, f) in &self.terms {
            out.add_scaled(&f.jet(p, order), *s);
        }
        out
    }
}

struct Product(Field, Field);

impl ScalarField for Product {
    fn jet(&self, p: [f64; 4], order: usize) -> Jet {
        &self.0.jet(p, order) * &self.1.jet(p, order)
    }
}

struct Deriv {
    base: Field,
    dir: usize,
}

impl ScalarField for Deriv {
    fn jet(&self, p: [f64; 4], order: usize) -> Jet {
        self.base.jet(p, order + 1).derivative_jet(self.dir)
    }
}

// ---------------------------------------------------------------------------
// Basis bookkeeping.
// ---------------------------------------------------------------------------

fn binom4(d: usize) -> usize {
    [1, 4, 6, 4, 1][d]
}

/// Strictly increasing index tuples of each length, in lexicographic order.
pub(crate) fn basis(degree: usize) -> &'static [Vec<usize>] {
    static B: OnceLock<[Vec<Vec<usize>>; 5]> = OnceLock::new();
    &B.get_or_init(|| {
        let mut all: [Vec<Vec<usize>>; 5] = Default::default();
        for (d, slot) in all.iter_mut().enumerate() {
            let mut sets = Vec::new();
            for mask in 0u8..16 {
                if (mask.count_ones() as usize) == d {
                    sets.push((0..4).filter(|i| mask & (1 << i) != 0).collect());
                }
            }
            sets.sort();
            *slot = sets;
        }
        all
    })[degree]
}

pub(crate) fn basis_pos(degree: usize, set: &[usize]) -> usize {
    basis(degree)
        .iter()
        .position(|s| s == set)
        .expect("not a valid basis set")
}

/// Sorts the indices in place; returns the permutation sign, or None when an
/// index repeats (so the wedge monomial is zero).
fn sort_sign(v: &mut Vec<usize>) -> Option<f64> {
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] >= v[j] {
            if v[j - 1] == v[j] {
                return None;
            }
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    Some(sign)
}

// ---------------------------------------------------------------------------
// Maps and their jet cache.
// ---------------------------------------------------------------------------

/// A smooth map R^4 -> R^4 presented through its component jets.
pub trait MapField: Send + Sync {
    fn jet(&self, p: [f64; 4], order: usize) -> [Jet; 4];
}

thread_local! {
    #[allow(clippy::type_complexity)]
    static MAP_SLOT: RefCell<Option<(usize, [u64; 4], usize, [Jet; 4])>> =
        const { RefCell::new(None) };
    #[allow(clippy::type_complexity)]
    static RAY_SLOT: RefCell<Option<(usize, [u64; 4], usize, Vec<Jet>)>> =
        const { RefCell::new(None) };
}

/// Memoizes the most recent map-jet evaluation per thread, so the several
/// coefficients of a pulled-back form evaluated at one point share the work.
pub struct CachedMap {
    inner: Arc<dyn MapField>,
}

impl CachedMap {
    pub fn new(inner: Arc<dyn MapField>) -> CachedMap {
        CachedMap { inner }
    }

    fn jet(&self, p: [f64; 4], order: usize) -> [Jet; 4] {
        let key = (
            Arc::as_ptr(&self.inner) as *const () as usize,
            p.map(f64::to_bits),
            order,
        );
        MAP_SLOT.with(|slot| {
            let mut s = slot.borrow_mut();
            if let Some((k0, k1, k2, v)) = s.as_ref() {
                if (*k0, *k1, *k2) == key {
                    return v.clone();
                }
            }
            let v = self.inner.jet(p, order);
            *s = Some((key.0, key.1, key.2, v.clone()));
            v
        })
    }
}

// ---------------------------------------------------------------------------
// Differential forms.
// ---------------------------------------------------------------------------

/// A differential form of degree 0..=4 with lazily evaluated coefficients,
/// stored against the ordered basis of its degree.
#[derive(Clone)]
pub struct FormField {
    degree: usize,
    coeffs: Vec<Field>,
}

impl FormField {
    pub fn new(degree: usize, coeffs: Vec<Field>) -> FormField {
        assert_eq!(coeffs.len(), binom4(degree));
        FormField { degree, coeffs }
    }

    pub fn zero(degree: usize) -> FormField {
        FormField::new(
            degree,
            (0..binom4(degree))
                .map(|_| Arc::new(ConstField(0.0)) as Field)
                .collect(),
        )
    }

    /// Build a form from (index tuple, field) pairs; the tuples need not be
    /// sorted and repeated tuples accumulate.
    pub fn from_parts(degree: usize, parts: Vec<(Vec<usize>, Field)>) -> FormField {
        let mut acc: Vec<Vec<(f64, Field)>> = vec![Vec::new(); binom4(degree)];
        for (mut set, field) in parts {
            if let Some(sign) = sort_sign(&mut set) {
                acc[basis_pos(degree, &set)].push((sign, field));
            }
        }
        FormField::new(
            degree,
            acc.into_iter()
                .map(|terms| Arc::new(LinComb { terms }) as Field)
                .collect(),
        )
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeff(&self, i: usize) -> &Field {
        &self.coeffs[i]
    }

    pub fn eval(&self, p: [f64; 4], order: usize) -> Vec<Jet> {
        self.coeffs.iter().map(|c| c.jet(p, order)).collect()
    }

    pub fn values(&self, p: [f64; 4]) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.value(p)).collect()
    }

    pub fn add(&self, o: &FormField) -> FormField {
        assert_eq!(self.degree, o.degree);
        FormField::new(
            self.degree,
            self.coeffs
                .iter()
                .zip(&o.coeffs)
                .map(|(a, b)| {
                    Arc::new(LinComb {
                        terms: vec![(1.0, a.clone()), (1.0, b.clone())],
                    }) as Field
                })
                .collect(),
        )
    }

    pub fn sub(&self, o: &FormField) -> FormField {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> FormField {
        FormField::new(
            self.degree,
            self.coeffs
                .iter()
                .map(|a| {
                    Arc::new(LinComb {
                        terms: vec![(s, a.clone())],
                    }) as Field
                })
                .collect(),
        )
    }

    /// Multiply by a scalar function.
    pub fn mul_field(&self, f: &Field) -> FormField {
        FormField::new(
            self.degree,
            self.coeffs
                .iter()
                .map(|a| Arc::new(Product(f.clone(), a.clone())) as Field)
                .collect(),
        )
    }

    /// Exterior derivative.
    pub fn d(&self) -> FormField {
        assert!(self.degree < 4);
        let out = basis(self.degree + 1)
            .iter()
            .map(|s| {
                let mut terms: Vec<(f64, Field)> = Vec::new();
                for (t, &i) in s.iter().enumerate() {
                    let rest: Vec<usize> =
                        s.iter().enumerate().filter(|&(u, _)| u != t).map(|(_, &v)| v).collect();
                    let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                    terms.push((
                        sign,
                        Arc::new(Deriv {
                            base: self.coeffs[basis_pos(self.degree, &rest)].clone(),
                            dir: i,
                        }) as Field,
                    ));
                }
                Arc::new(LinComb { terms }) as Field
            })
            .collect();
        FormField::new(self.degree + 1, out)
    }

    /// Wedge product.
    pub fn wedge(&self, o: &FormField) -> FormField {
        let deg = self.degree + o.degree;
        assert!(deg <= 4);
        let mut acc: Vec<Vec<(f64, Field)>> = vec![Vec::new(); binom4(deg)];
        for (si, s) in basis(self.degree).iter().enumerate() {
            for (ti, t) in basis(o.degree).iter().enumerate() {
                let mut merged: Vec<usize> = s.iter().chain(t.iter()).copied().collect();
                if let Some(sign) = sort_sign(&mut merged) {
                    acc[basis_pos(deg, &merged)].push((
                        sign,
                        Arc::new(Product(self.coeffs[si].clone(), o.coeffs[ti].clone())) as Field,
                    ));
                }
            }
        }
        FormField::new(
            deg,
            acc.into_iter()
                .map(|terms| Arc::new(LinComb { terms }) as Field)
                .collect(),
        )
    }

    /// Pullback along a map.
    pub fn pullback(&self, map: Arc<dyn MapField>) -> FormField {
        let cached = Arc::new(CachedMap::new(map));
        let out = basis(self.degree)
            .iter()
            .map(|s| {
                Arc::new(PullbackCoeff {
                    map: cached.clone(),
                    target: self.clone(),
                    source_set: s.clone(),
                }) as Field
            })
            .collect();
        FormField::new(self.degree, out)
    }

    /// Value of a 2-form on a pair of vectors.
    pub fn eval_on_pair(&self, p: [f64; 4], v: [f64; 4], w: [f64; 4]) -> f64 {
        assert_eq!(self.degree, 2);
        let c = self.values(p);
        let mut out = 0.0;
        for (pos, s) in basis(2).iter().enumerate() {
            let (i, j) = (s[0], s[1]);
            out += c[pos] * (v[i] * w[j] - v[j] * w[i]);
        }
        out
    }
}

struct PullbackCoeff {
    map: Arc<CachedMap>,
    target: FormField,
    source_set: Vec<usize>,
}

impl ScalarField for PullbackCoeff {
    fn jet(&self, p: [f64; 4], order: usize) -> Jet {
        let phi = self.map.jet(p, order + 1);
        let phi_trunc: [Jet; 4] = std::array::from_fn(|i| phi[i].truncated(order));
        let phi0 = [phi[0].val(), phi[1].val(), phi[2].val(), phi[3].val()];
        let mut out = Jet::zeros(order);
        for (ti, tset) in basis(self.target.degree).iter().enumerate() {
            // Minor of the Jacobian: rows from the target set, columns from
            // the source set.
            let minor = det_jets(
                &tset
                    .iter()
                    .map(|&r| {
                        self.source_set
                            .iter()
                            .map(|&c| phi[r].derivative_jet(c))
                            .collect::<Vec<_>>()
                    })
                    .collect::<Vec<_>>(),
                order,
            );
            let cj = self.target.coeffs[ti].jet(phi0, order);
            let comp = Jet::compose4(&cj, &phi_trunc);
            out = &out + &(&comp * &minor);
        }
        out
    }
}

/// Determinant of a small matrix of jets by Laplace expansion.
fn det_jets(m: &[Vec<Jet>], order: usize) -> Jet {
    match m.len() {
        0 => Jet::constant(order, 1.0),
        1 => m[0][0].clone(),
        n => {
            let mut out = Jet::zeros(order);
            for c in 0..n {
                let sub: Vec<Vec<Jet>> = (1..n)
                    .map(|r| {
                        (0..n)
                            .filter(|&cc| cc != c)
                            .map(|cc| m[r][cc].clone())
                            .collect()
                    })
                    .collect();
                let term = &m[0][c] * &det_jets(&sub, order);
                out.add_scaled(&term, if c % 2 == 0 { 1.0 } else { -1.0 });
            }
            out
        }
    }
}

/// The standard 2-form dX1^dX2 + dX3^dX4.
pub fn standard_symplectic() -> FormField {
    FormField::from_parts(
        2,
        vec![
            (vec![0, 1], Arc::new(ConstField(1.0)) as Field),
            (vec![2, 3], Arc::new(ConstField(1.0)) as Field),
        ],
    )
}

// ---------------------------------------------------------------------------
// Primitives of closed 2-forms.
// ---------------------------------------------------------------------------

struct RayData {
    beta: FormField,
}

impl RayData {
    /// The six radial integrals q_S(p) = Int_0^1 t beta_S(t p) dt as jets,
    /// all in one adaptive pass, memoized per point.
    fn qvec(self: &Arc<Self>, p: [f64; 4], order: usize) -> Vec<Jet> {
        let key = (
            Arc::as_ptr(self) as *const () as usize,
            p.map(f64::to_bits),
            order,
        );
        RAY_SLOT.with(|slot| {
            let mut s = slot.borrow_mut();
            if let Some((k0, k1, k2, v)) = s.as_ref() {
                if (*k0, *k1, *k2) == key {
                    return v.clone();
                }
            }
            let integrand = |t: f64| -> Vec<Jet> {
                let tp = [t * p[0], t * p[1], t * p[2], t * p[3]];
                self.beta
                    .eval(tp, order)
                    .into_iter()
                    .map(|j| j.scale_degrees(t).scale(t))
                    .collect()
            };
            let v = quad::integrate_jet_vec(&integrand, 0.0, 1.0, RAY_QUAD_TOL, RAY_QUAD_DEPTH);
            *s = Some((key.0, key.1, key.2, v.clone()));
            v
        })
    }
}

struct RayCoeff {
    data: Arc<RayData>,
    k: usize,
}

impl ScalarField for RayCoeff {
    fn jet(&self, p: [f64; 4], order: usize) -> Jet {
        let q = self.data.qvec(p, order);
        let mut out = Jet::zeros(order);
        for i in 0..4 {
            if i == self.k {
                continue;
            }
            let xi = Jet::variable(order, i, p[i]);
            let (set, sign) = if i < self.k {
                (vec![i, self.k], 1.0)
            } else {
                (vec![self.k, i], -1.0)
            };
            out.add_scaled(&(&q[basis_pos(2, &set)] * &xi), sign);
        }
        out
    }
}

/// Radial primitive of a closed 2-form on a region star-shaped about the
/// origin: alpha = sum_{i<j} [Int_0^1 t beta_ij(t x) dt] (x_i dX_j - x_j dX_i),
/// which satisfies d(alpha) = beta.
pub fn ray_primitive(beta: &FormField) -> FormField {
    assert_eq!(beta.degree(), 2);
    let data = Arc::new(RayData { beta: beta.clone() });
    FormField::new(
        1,
        (0..4)
            .map(|k| {
                Arc::new(RayCoeff {
                    data: data.clone(),
                    k,
                }) as Field
            })
            .collect(),
    )
}

/// Primitive adapted to closed 2-forms whose restriction to the plane
/// {X3 = X4 = 0} vanishes: with lambda = beta_13 dX1 + beta_23 dX2 and
/// mu = beta_14 dX1 + beta_24 dX2 + beta_34 dX3, the correction
/// theta = -(X3 lambda + X4 mu) satisfies d(theta) = beta at every plane
/// point, so the remaining radial integrand vanishes along plane rays and
/// the whole primitive vanishes on the plane, not just its restriction.
pub fn adapted_primitive(beta: &FormField) -> FormField {
    assert_eq!(beta.degree(), 2);
    let b = |i: usize, j: usize| beta.coeffs[basis_pos(2, &[i, j])].clone();
    let x3: Field = Arc::new(PolyField::new(vec![([0, 0, 1, 0], 1.0)]));
    let x4: Field = Arc::new(PolyField::new(vec![([0, 0, 0, 1], 1.0)]));
    let lambda = FormField::from_parts(
        1,
        vec![(vec![0], b(0, 2)), (vec![1], b(1, 2))],
    );
    let mu = FormField::from_parts(
        1,
        vec![(vec![0], b(0, 3)), (vec![1], b(1, 3)), (vec![2], b(2, 3))],
    );
    let theta = lambda.mul_field(&x3).add(&mu.mul_field(&x4)).scale(-1.0);
    ray_primitive(&beta.sub(&theta.d())).add(&theta)
}

struct FiberData {
    beta: FormField,
}

impl FiberData {
    /// The five fiber integrals (beta_13, beta_14, beta_23, beta_24 plain
    /// and beta_34 weighted by t) along t -> (x1, x2, t x3, t x4), as jets
    /// at p, in one adaptive pass, memoized per point.
    fn qvec(self: &Arc<Self>, p: [f64; 4], order: usize) -> Vec<Jet> {
        let key = (
            Arc::as_ptr(self) as *const () as usize,
            p.map(f64::to_bits),
            order,
        );
        RAY_SLOT.with(|slot| {
            let mut s = slot.borrow_mut();
            if let Some((k0, k1, k2, v)) = s.as_ref() {
                if (*k0, *k1, *k2) == key {
                    return v.clone();
                }
            }
            let integrand = |t: f64| -> Vec<Jet> {
                let tp = [p[0], p[1], t * p[2], t * p[3]];
                let all = self.beta.eval(tp, order);
                let pick = |i: usize, j: usize| {
                    all[basis_pos(2, &[i, j])].scale_degrees_of(&[2, 3], t)
                };
                vec![
                    pick(0, 2),
                    pick(0, 3),
                    pick(1, 2),
                    pick(1, 3),
                    pick(2, 3).scale(t),
                ]
            };
            let v = quad::integrate_jet_vec(&integrand, 0.0, 1.0, RAY_QUAD_TOL, RAY_QUAD_DEPTH);
            *s = Some((key.0, key.1, key.2, v.clone()));
            v
        })
    }
}

struct FiberCoeff {
    data: Arc<FiberData>,
    k: usize,
}

impl ScalarField for FiberCoeff {
    fn jet(&self, p: [f64; 4], order: usize) -> Jet {
        let q = self.data.qvec(p, order);
        let x3 = Jet::variable(order, 2, p[2]);
        let x4 = Jet::variable(order, 3, p[3]);
        match self.k {
            0 => (&(&q[0] * &x3) + &(&q[1] * &x4)).scale(-1.0),
            1 => (&(&q[2] * &x3) + &(&q[3] * &x4)).scale(-1.0),
            2 => (&q[4] * &x4).scale(-1.0),
            _ => &q[4] * &x3,
        }
    }
}

/// Primitive of a closed 2-form vanishing on the plane {X3 = X4 = 0},
/// built from the homotopy (x1, x2, t x3, t x4) that squashes the normal
/// coordinates.  Every component of the result vanishes identically on the
/// plane, and the form is only ever sampled on the normal segment over the
/// evaluation point, never off its plane footprint.
pub fn fiber_primitive(beta: &FormField) -> FormField {
    assert_eq!(beta.degree(), 2);
    let data = Arc::new(FiberData { beta: beta.clone() });
    FormField::new(
        1,
        (0..4)
            .map(|k| {
                Arc::new(FiberCoeff {
                    data: data.clone(),
                    k,
                }) as Field
            })
            .collect(),
    )
}

/// Largest C^n distance between two forms over the given sample points:
/// the max over points, coefficients and partials up to order n.
pub fn sup_cn_distance(a: &FormField, b: &FormField, pts: &[[f64; 4]], n: usize) -> f64 {
    assert_eq!(a.degree(), b.degree());
    pts.par_iter()
        .map(|&p| {
            a.eval(p, n)
                .iter()
                .zip(b.eval(p, n))
                .map(|(ja, jb)| (ja - &jb).cn_norm(n))
                .fold(0.0f64, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poly(terms: Vec<([usize; 4], f64)>) -> Field {
        Arc::new(PolyField::new(terms))
    }

    fn random_poly(rng: &mut ChaCha8Rng, deg: usize) -> Field {
        let mut terms = Vec::new();
        for _ in 0..6 {
            let m: [usize; 4] = std::array::from_fn(|_| rng.gen_range(0..=deg));
            if m.iter().sum::<usize>() <= deg {
                terms.push((m, rng.gen_range(-1.0..1.0)));
            }
        }
        poly(terms)
    }

    #[test]
    fn exterior_derivative_of_known_form() {
        // theta = x3 dx1 has d theta = dx3 ^ dx1 = -dx1 ^ dx3.
        let theta = FormField::from_parts(1, vec![(vec![0], poly(vec![([0, 0, 1, 0], 1.0)]))]);
        let d = theta.d();
        let v = d.values([0.3, -0.2, 0.9, 0.1]);
        let expect = [0.0, -1.0, 0.0, 0.0, 0.0, 0.0];
        for (got, want) in v.iter().zip(expect) {
            assert_eq!(*got, want);
        }
    }

    #[test]
    fn d_squared_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let theta = FormField::new(1, (0..4).map(|_| random_poly(&mut rng, 3)).collect());
            let dd = theta.d().d();
            let p: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
            for c in dd.eval(p, 1) {
                assert!(c.max_abs_coeff() <= 1e-13);
            }
        }
    }

    #[test]
    fn wedge_is_graded_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = FormField::new(1, (0..4).map(|_| random_poly(&mut rng, 2)).collect());
        let b = FormField::new(2, (0..6).map(|_| random_poly(&mut rng, 2)).collect());
        let ab = a.wedge(&b);
        let ba = b.wedge(&a);
        // deg 1 * deg 2: a ^ b = (-1)^2 b ^ a = b ^ a.
        let p = [0.4, 0.7, -0.3, 0.2];
        for (x, y) in ab.values(p).iter().zip(ba.values(p)) {
            assert!((x - y).abs() < 1e-14);
        }
        // deg 1 * deg 1 anticommutes.
        let c = FormField::new(1, (0..4).map(|_| random_poly(&mut rng, 2)).collect());
        let ac = a.wedge(&c);
        let ca = c.wedge(&a);
        for (x, y) in ac.values(p).iter().zip(ca.values(p)) {
            assert!((x + y).abs() < 1e-14);
        }
    }

    #[test]
    fn leibniz_rule_for_d_of_wedge() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = FormField::new(1, (0..4).map(|_| random_poly(&mut rng, 2)).collect());
        let b = FormField::new(1, (0..4).map(|_| random_poly(&mut rng, 2)).collect());
        let lhs = a.wedge(&b).d();
        let rhs = a.d().wedge(&b).add(&a.wedge(&b.d()).scale(-1.0));
        let p = [0.6, -0.5, 0.2, 0.8];
        for (x, y) in lhs.values(p).iter().zip(rhs.values(p)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    struct PolyMap;

    impl MapField for PolyMap {
        fn jet(&self, p: [f64; 4], order: usize) -> [Jet; 4] {
            let x: [Jet; 4] = std::array::from_fn(|i| Jet::variable(order, i, p[i]));
            [
                &x[0] + &(&x[2] * &x[3]),
                &x[1] - &(&x[0] * &x[0]).scale(0.5),
                &x[2] + &x[1].scale(0.3),
                &x[3] + &(&x[1] * &x[2]).scale(0.2),
            ]
        }
    }

    #[test]
    fn pullback_commutes_with_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let theta = FormField::new(1, (0..4).map(|_| random_poly(&mut rng, 2)).collect());
        let map: Arc<dyn MapField> = Arc::new(PolyMap);
        let lhs = theta.d().pullback(map.clone());
        let rhs = theta.pullback(map).d();
        for _ in 0..4 {
            let p: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            for (x, y) in lhs.values(p).iter().zip(rhs.values(p)) {
                assert!((x - y).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn pullback_matches_jacobian_contraction() {
        // (Phi* w)(v, u) = w(DPhi v, DPhi u) for a 2-form at a point.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = FormField::new(2, (0..6).map(|_| random_poly(&mut rng, 2)).collect());
        let map: Arc<dyn MapField> = Arc::new(PolyMap);
        let pb = w.pullback(map.clone());
        let p = [0.3, 0.6, -0.4, 0.5];
        let phi = PolyMap.jet(p, 1);
        let phi0 = [phi[0].val(), phi[1].val(), phi[2].val(), phi[3].val()];
        let jac: Vec<[f64; 4]> = (0..4).map(|i| phi[i].grad()).collect();
        let push = |v: [f64; 4]| -> [f64; 4] {
            std::array::from_fn(|i| (0..4).map(|j| jac[i][j] * v[j]).sum())
        };
        for _ in 0..6 {
            let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let u: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let lhs = pb.eval_on_pair(p, v, u);
            let rhs = w.eval_on_pair(phi0, push(v), push(u));
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn ray_primitive_of_simple_closed_form() {
        // beta = x3 dx1 ^ dx3 integrates to (x3/3)(x1 dX3 - x3 dX1).
        let beta = FormField::from_parts(2, vec![(vec![0, 2], poly(vec![([0, 0, 1, 0], 1.0)]))]);
        let alpha = ray_primitive(&beta);
        let p = [1.2, -0.4, 0.9, 0.3];
        let v = alpha.values(p);
        assert!((v[0] - (-p[2] * p[2] / 3.0)).abs() < 1e-12);
        assert!(v[1].abs() < 1e-14);
        assert!((v[2] - p[0] * p[2] / 3.0).abs() < 1e-12);
        assert!(v[3].abs() < 1e-14);
        // And d alpha recovers beta.
        let da = alpha.d();
        for (x, y) in da.values(p).iter().zip(beta.values(p)) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn adapted_primitive_of_standard_vertical_form() {
        // beta = dX3 ^ dX4: the correction alone already has d(theta) = beta
        // (theta = -X4 dX3), so the ray part contributes nothing.
        let beta = FormField::from_parts(2, vec![(vec![2, 3], poly(vec![([0, 0, 0, 0], 1.0)]))]);
        let alpha = adapted_primitive(&beta);
        let p = [0.7, -0.2, 0.5, 0.8];
        let v = alpha.values(p);
        assert!(v[0].abs() < 1e-13);
        assert!(v[1].abs() < 1e-13);
        assert!((v[2] - -p[3]).abs() < 1e-12);
        assert!(v[3].abs() < 1e-13);
        let da = alpha.d();
        for (x, y) in da.values(p).iter().zip(beta.values(p)) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn fiber_primitive_of_simple_forms() {
        // beta = dX3 ^ dX4 gives (x3 dX4 - x4 dX3)/2; beta = dX1 ^ dX3
        // gives -x3 dX1.  Both are exact quadratures.
        let p = [0.7, -0.2, 0.5, 0.8];
        let vertical =
            FormField::from_parts(2, vec![(vec![2, 3], poly(vec![([0, 0, 0, 0], 1.0)]))]);
        let a = fiber_primitive(&vertical);
        let v = a.values(p);
        assert!(v[0].abs() < 1e-14 && v[1].abs() < 1e-14);
        assert!((v[2] - -0.5 * p[3]).abs() < 1e-13);
        assert!((v[3] - 0.5 * p[2]).abs() < 1e-13);

        let mixed = FormField::from_parts(2, vec![(vec![0, 2], poly(vec![([0, 0, 0, 0], 1.0)]))]);
        let b = fiber_primitive(&mixed);
        let w = b.values(p);
        assert!((w[0] - -p[2]).abs() < 1e-13);
        assert!(w[1].abs() < 1e-14 && w[2].abs() < 1e-14 && w[3].abs() < 1e-14);
        for (x, y) in b.d().values(p).iter().zip(mixed.values(p)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn adapted_primitive_vanishes_on_the_plane() {
        // A randomized closed plane-vanishing 2-form beta = d theta with
        // theta built to vanish on {x3 = x4 = 0}; its adapted primitive must
        // vanish there too, to quadrature accuracy, and differentiate back.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..3 {
            let mut vertical_parts: Vec<(Vec<usize>, Field)> = Vec::new();
            for dir in 0..2usize {
                // (x3 P + x4 Q) dx_dir.
                let tilt = |which: usize, f: Field| -> Field {
                    let m = if which == 0 { [0, 0, 1, 0] } else { [0, 0, 0, 1] };
                    Arc::new(Product(poly(vec![(m, 1.0)]), f))
                };
                vertical_parts.push((vec![dir], tilt(0, random_poly(&mut rng, 2))));
                vertical_parts.push((vec![dir], tilt(1, random_poly(&mut rng, 2))));
            }
            vertical_parts.push((vec![2], random_poly(&mut rng, 2)));
            vertical_parts.push((vec![3], random_poly(&mut rng, 2)));
            let theta = FormField::from_parts(1, vertical_parts);
            let beta = theta.d();

            for alpha in [adapted_primitive(&beta), fiber_primitive(&beta)] {
                for _ in 0..3 {
                    let q = [
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ];
                    let da = alpha.d();
                    for (x, y) in da.values(q).iter().zip(beta.values(q)) {
                        assert!((x - y).abs() < 1e-9, "d alpha mismatch: {x} vs {y}");
                    }
                    // Every component must vanish at plane points, not just
                    // the restriction; the collar estimates depend on it.
                    let flat = [q[0], q[1], 0.0, 0.0];
                    for v in alpha.values(flat) {
                        assert!(v.abs() < 1e-12, "primitive live on the plane: {v:.3e}");
                    }
                }
            }
        }
    }

    #[test]
    fn cn_distance_sees_derivative_gaps() {
        // Two forms equal in value at 0 but differing in first derivatives.
        let a = FormField::from_parts(2, vec![(vec![0, 1], poly(vec![([1, 0, 0, 0], 1.0)]))]);
        let b = FormField::from_parts(2, vec![(vec![0, 1], poly(vec![([0, 1, 0, 0], 1.0)]))]);
        let d0 = sup_cn_distance(&a, &b, &[[0.0; 4]], 0);
        let d1 = sup_cn_distance(&a, &b, &[[0.0; 4]], 1);
        assert_eq!(d0, 0.0);
        assert_eq!(d1, 1.0);
    }
}
