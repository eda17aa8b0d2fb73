//! The holomorphic seed surface and its self-intersection pattern.
//!
//! The seed is an immersed disk G(z) = (z^p, g(z)) over a flattened domain
//! touching the origin, where g is a finite product of bounded holomorphic
//! factors whose zeros sit on finitely many rays at geometrically growing
//! moduli.  Zeros on different rays share their first coordinate z^p in
//! groups, producing transversal self-intersections of the image that
//! accumulate at the origin together with the domain boundary.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::cjet::CJet;
use crate::config::{Config, ZERO_CLUSTER_TOL};
use crate::{Error, Result};

/// Principal logarithm on the plane slit along {Re z <= 0, Im z = 0}.
pub fn log_slit(z: Complex64) -> Complex64 {
    debug_assert!(
        !(z.im == 0.0 && z.re <= 0.0),
        "log_slit evaluated on the slit"
    );
    z.ln()
}

/// Principal power z^a on the slit plane.
pub fn pow_slit(z: Complex64, a: f64) -> Complex64 {
    (log_slit(z) * a).exp()
}

/// Flattening factor exp(-z^(-alpha)).
///
/// For alpha <= 1/2 the real part of z^(-alpha) is positive on the whole
/// slit plane, so the factor is bounded by 1 and all its derivatives vanish
/// as z -> 0 faster than any power of |z|.
pub fn damping(z: Complex64, alpha: f64) -> Complex64 {
    (-pow_slit(z, -alpha)).exp()
}

/// One factor of the seed product: exp(-z^(-alpha)) sin(Log z + c pi i),
/// extended by 0 at the origin.  Its zeros away from 0 are exactly the
/// points exp(n pi - i c pi), n integer.
pub fn f_factor(z: Complex64, c: f64, alpha: f64) -> Complex64 {
    if z == Complex64::ZERO {
        return Complex64::ZERO;
    }
    damping(z, alpha) * (log_slit(z) + Complex64::i() * (c * PI)).sin()
}

/// The product g of all ray factors of the variant.
pub fn g_product(z: Complex64, cfg: &Config) -> Complex64 {
    if z == Complex64::ZERO {
        return Complex64::ZERO;
    }
    cfg.variant
        .ray_offsets()
        .iter()
        .map(|&c| f_factor(z, c, cfg.alpha))
        .product()
}

/// The seed immersion G(z) = (z^p, g(z)).
pub fn seed(z: Complex64, cfg: &Config) -> [Complex64; 2] {
    [z.powu(cfg.variant.power()), g_product(z, cfg)]
}

/// Jet version of [`f_factor`]; the value of `z` must avoid the slit and 0.
pub fn f_factor_jet(z: &CJet, c: f64, alpha: f64) -> CJet {
    let lg = z.ln();
    let damp = lg.scale(Complex64::new(-alpha, 0.0)).exp().scale(-Complex64::ONE).exp();
    damp.mul(&lg.add_const(Complex64::i() * (c * PI)).sin())
}

/// Jet version of [`g_product`].
pub fn g_jet(z: &CJet, cfg: &Config) -> CJet {
    let mut out = CJet::constant(z.order(), Complex64::ONE);
    for &c in &cfg.variant.ray_offsets() {
        out = out.mul(&f_factor_jet(z, c, cfg.alpha));
    }
    out
}

/// Jet version of [`seed`].
pub fn seed_jet(z: &CJet, cfg: &Config) -> [CJet; 2] {
    [z.powi(cfg.variant.power()), g_jet(z, cfg)]
}

// ---------------------------------------------------------------------------
// Domain geometry.
// ---------------------------------------------------------------------------

/// Boundary curve (x - r + mu y^2)^2 + y^2 = r^2 of the seed domain.
///
/// The curve is a flattened loop through the origin, pinched so that near 0
/// it approaches the slit tangentially from the right while the enclosed
/// region stays inside the wedge |arg z| <= 3 pi / 4, where the flattening
/// factor of the seed is bounded.
#[derive(Debug, Clone, Copy)]
pub struct DomainCurve {
    pub r: f64,
    pub mu: f64,
}

impl DomainCurve {
    pub fn from_config(cfg: &Config) -> DomainCurve {
        DomainCurve {
            r: cfg.curve_r,
            mu: cfg.curve_mu,
        }
    }

    /// Defining function; negative inside, zero on the curve.
    pub fn implicit(&self, x: f64, y: f64) -> f64 {
        let u = x - self.r + self.mu * y * y;
        u * u + y * y - self.r * self.r
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.implicit(z.re, z.im) < 0.0
    }

    /// Global parametrization of the boundary over t in [-pi, pi]:
    /// x = r (1 + cos t) - mu r^2 sin^2 t, y = r sin t.  Satisfies the
    /// implicit equation identically and reaches the origin at t = +-pi.
    pub fn boundary(&self, t: f64) -> Complex64 {
        let (s, c) = t.sin_cos();
        Complex64::new(
            self.r * (1.0 + c) - self.mu * self.r * self.r * s * s,
            self.r * s,
        )
    }

    /// Distance from `z` to the boundary, by damped Newton on the
    /// parametrized squared distance (adequate here: the curve is smooth and
    /// the callers stay well inside).
    pub fn distance_to_boundary(&self, z: Complex64) -> f64 {
        let samples = 512;
        let mut best_t = 0.0;
        let mut best = f64::INFINITY;
        for i in 0..=samples {
            let t = -PI + 2.0 * PI * i as f64 / samples as f64;
            let d = (self.boundary(t) - z).norm_sqr();
            if d < best {
                best = d;
                best_t = t;
            }
        }
        // Newton refinement on d/dt |B(t) - z|^2.
        let mut t = best_t;
        for _ in 0..40 {
            let h = 1e-6;
            let dm = (self.boundary(t - h) - z).norm_sqr();
            let d0 = (self.boundary(t) - z).norm_sqr();
            let dp = (self.boundary(t + h) - z).norm_sqr();
            let g = (dp - dm) / (2.0 * h);
            let hh = (dp - 2.0 * d0 + dm) / (h * h);
            if hh <= 0.0 {
                break;
            }
            let step = g / hh;
            t -= step.clamp(-0.1, 0.1);
            if step.abs() < 1e-12 {
                break;
            }
        }
        (self.boundary(t) - z).norm()
    }
}

// ---------------------------------------------------------------------------
// Zeros and self-intersections.
// ---------------------------------------------------------------------------

/// A zero of the factor product inside the domain.
#[derive(Debug, Clone, Copy)]
pub struct SeedZero {
    /// Which ray factor vanishes here.
    pub ray: usize,
    /// Modulus is exp(generation * pi).
    pub generation: i32,
    pub z: Complex64,
}

/// All zeros of g inside the domain with modulus >= z_min, outermost
/// generation first, ordered by ray within a generation.
pub fn zeros_in_domain(cfg: &Config) -> Vec<SeedZero> {
    let curve = DomainCurve::from_config(cfg);
    let offsets = cfg.variant.ray_offsets();
    let n_lo = (cfg.z_min.ln() / PI).floor() as i32 - 1;
    let n_hi = ((3.0 * cfg.curve_r).ln() / PI).ceil() as i32 + 1;
    let mut out = Vec::new();
    for n in (n_lo..=n_hi).rev() {
        let rho = (n as f64 * PI).exp();
        if rho < cfg.z_min * (1.0 - 1e-12) {
            continue;
        }
        for (k, &c) in offsets.iter().enumerate() {
            let z = Complex64::from_polar(rho, -c * PI);
            if curve.contains(z) {
                out.push(SeedZero {
                    ray: k,
                    generation: n,
                    z,
                });
            }
        }
    }
    out
}

/// A self-intersection of the seed image: the zeros through it and their
/// common first coordinate.  The second coordinate is 0 at every zero.
#[derive(Debug, Clone)]
pub struct SingularPoint {
    pub zeros: Vec<SeedZero>,
    pub image1: Complex64,
}

/// Group the domain zeros into self-intersections of the image.
///
/// Zeros whose first coordinates z^p agree within a relative cluster
/// tolerance share an image point.  A full group has one sheet per ray
/// class; a zero whose partners fall outside the domain is not a crossing
/// and is dropped.  Partial groups larger than one sheet cannot be handled
/// and abort the construction.
pub fn singular_points(cfg: &Config) -> Result<Vec<SingularPoint>> {
    let zeros = zeros_in_domain(cfg);
    let mut used = vec![false; zeros.len()];
    let mut points = Vec::new();
    for i in 0..zeros.len() {
        if used[i] {
            continue;
        }
        let pi1 = zeros[i].z.powu(cfg.variant.power());
        let mut members = vec![zeros[i]];
        used[i] = true;
        for j in i + 1..zeros.len() {
            if used[j] {
                continue;
            }
            let pj = zeros[j].z.powu(cfg.variant.power());
            if (pj - pi1).norm() <= ZERO_CLUSTER_TOL * pi1.norm() {
                members.push(zeros[j]);
                used[j] = true;
            }
        }
        let expected = cfg.variant.sheets_per_point();
        match members.len() {
            1 => continue,
            n if n == expected => points.push(SingularPoint {
                zeros: members,
                image1: pi1,
            }),
            n => {
                return Err(Error::NotSupported(format!(
                    "{n} of {expected} sheets of a self-intersection lie in the domain; \
                     partial crossings have no neck model"
                )))
            }
        }
    }
    // Outermost first, then by image angle so runs are reproducible.
    points.sort_by(|a, b| {
        b.image1
            .norm()
            .partial_cmp(&a.image1.norm())
            .unwrap()
            .then(b.image1.arg().partial_cmp(&a.image1.arg()).unwrap())
    });
    Ok(points)
}

/// Derivative of g at a zero, in closed form: the vanishing factor
/// contributes exp(-z0^(-alpha)) (-1)^n / z0 and the others their plain
/// values.  Used as an independent oracle for the jet evaluation.
pub fn g_prime_at_zero_closed(zero: &SeedZero, cfg: &Config) -> Complex64 {
    let offsets = cfg.variant.ray_offsets();
    let sign = if zero.generation.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    let mut out = damping(zero.z, cfg.alpha) * sign / zero.z;
    for (j, &c) in offsets.iter().enumerate() {
        if j != zero.ray {
            out *= f_factor(zero.z, c, cfg.alpha);
        }
    }
    out
}

/// Seed coordinates relative to the singular value (z0^p, 0), as jets in the
/// scaled offset d, where z = z0 (1 + d).
///
/// Both components are computed so that their values keep full relative
/// accuracy even when |d| is far below floating point resolution of z
/// itself; this is what lets necks live at scales like 1e-9 without the
/// chart geometry degrading.
pub fn seed_offset_jet(zero: &SeedZero, cfg: &Config, order: usize, d0: Complex64) -> [CJet; 2] {
    assert!(d0.norm() < 0.9, "offset parameter leaves the safe collar");
    let z0 = zero.z;
    let p = cfg.variant.power() as f64;
    let d = CJet::variable(order, d0);
    let u = d.ln_1p();

    // z^p - z0^p = z0^p (exp(p log(1+d)) - 1).
    let first = u.scale(p.into()).exp_m1().scale(z0.powu(cfg.variant.power()));

    // Vanishing factor: damping(z) * (-1)^n sin(log(1+d)).
    let zpow = u
        .scale(Complex64::new(-cfg.alpha, 0.0))
        .exp()
        .scale(pow_slit(z0, -cfg.alpha));
    let damp = zpow.scale(-Complex64::ONE).exp();
    let sign = if zero.generation.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    let mut second = damp.mul(&u.sin()).scale(sign.into());

    // Remaining factors, evaluated directly: they are O(1) at the zero.
    let z = d.scale(z0).add_const(z0);
    for (j, &c) in cfg.variant.ray_offsets().iter().enumerate() {
        if j != zero.ray {
            second = second.mul(&f_factor_jet(&z, c, cfg.alpha));
        }
    }
    [first, second]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> Config {
        Config::default()
    }

    #[test]
    fn log_and_power_examples() {
        let i = Complex64::i();
        assert!((log_slit(i) - Complex64::new(0.0, PI / 2.0)).norm() < 1e-15);
        assert!((log_slit(-i) - Complex64::new(0.0, -PI / 2.0)).norm() < 1e-15);
        assert!((pow_slit(Complex64::new(4.0, 0.0), -0.5) - 0.5).norm() < 1e-15);
        // i^(-1/2) = exp(-i pi/4).
        let w = pow_slit(i, -0.5);
        assert!((w - Complex64::from_polar(1.0, -PI / 4.0)).norm() < 1e-15);
    }

    #[test]
    fn factor_frozen_value_at_one() {
        // f(1) with c = 1/2: sin(i pi / 2) = i sinh(pi/2), damping e^(-1).
        let f = f_factor(Complex64::ONE, 0.5, 0.5);
        let expect = Complex64::new(0.0, (PI / 2.0).sinh() * (-1.0f64).exp());
        assert!((f - expect).norm() < 1e-15);
    }

    #[test]
    fn product_frozen_value_at_one() {
        // g(1) = e^(-4) sinh^2(pi/2) sinh^2(pi/6), a positive real number.
        let g = g_product(Complex64::ONE, &cfg());
        let expect = (-4.0f64).exp() * (PI / 2.0).sinh().powi(2) * (PI / 6.0).sinh().powi(2);
        assert!((g.re - expect).abs() < 1e-14 * expect);
        assert!(g.im.abs() < 1e-15);
        // Frozen digits, so a regression in any factor shows up loudly.
        assert!((expect - 0.029114).abs() < 1e-6);
    }

    #[test]
    fn damping_modulus_formula() {
        // |exp(-z^(-a))| = exp(-|z|^(-a) cos(a theta)).
        for (rho, th) in [(0.3, 2.0), (2.0, -2.8), (11.0, 0.4)] {
            let z = Complex64::from_polar(rho, th);
            let expect = (-rho.powf(-0.5) * (0.5 * th).cos()).exp();
            assert!((damping(z, 0.5).norm() - expect).abs() < 1e-15 * expect);
        }
    }

    #[test]
    fn default_domain_has_two_generations_of_zeros() {
        let zeros = zeros_in_domain(&cfg());
        assert_eq!(zeros.len(), 8);
        assert!(zeros.iter().all(|z| z.generation == 0 || z.generation == 1));
        // Outermost generation listed first.
        assert_eq!(zeros[0].generation, 1);
        // Each reported zero kills g to near machine precision.
        for z in &zeros {
            let res = g_product(z.z, &cfg()).norm();
            assert!(res <= 1e-12, "zero {:?} residual {res:.3e}", z.z);
        }
    }

    #[test]
    fn small_domain_also_has_eight_zeros() {
        // A much smaller flattened domain with the cutoff tuned to keep two
        // generations of negative index.
        let cfg = Config {
            curve_r: 0.5,
            curve_mu: 2.0,
            z_min: (-2.0 * PI).exp(),
            ..Config::default()
        };
        cfg.validate().unwrap();
        let zeros = zeros_in_domain(&cfg);
        assert_eq!(zeros.len(), 8);
        assert!(zeros.iter().all(|z| z.generation == -1 || z.generation == -2));
    }

    #[test]
    fn branched_variant_zero_count() {
        let cfg = Config {
            variant: crate::Variant::Branched,
            ..Config::default()
        };
        let zeros = zeros_in_domain(&cfg);
        assert_eq!(zeros.len(), 16);
    }

    #[test]
    fn singular_points_pair_zeros_across_rays() {
        let pts = singular_points(&cfg()).unwrap();
        assert_eq!(pts.len(), 4);
        for p in &pts {
            assert_eq!(p.zeros.len(), 2);
            // Both sheets really land on the same image point.
            let a = p.zeros[0].z.powu(3);
            let b = p.zeros[1].z.powu(3);
            assert!((a - b).norm() <= 1e-9 * a.norm());
            // Different rays, same generation.
            assert_ne!(p.zeros[0].ray, p.zeros[1].ray);
            assert_eq!(p.zeros[0].generation, p.zeros[1].generation);
            // The image sits on the imaginary axis at modulus e^(3 n pi).
            let n = p.zeros[0].generation;
            assert!((p.image1.norm() - (3.0 * n as f64 * PI).exp()).abs() < 1e-9 * p.image1.norm());
            assert!(p.image1.re.abs() < 1e-9 * p.image1.norm());
        }
        // Outermost pair first: generations 1, 1, 0, 0.
        let gens: Vec<i32> = pts.iter().map(|p| p.zeros[0].generation).collect();
        assert_eq!(gens, vec![1, 1, 0, 0]);
    }

    #[test]
    fn branched_singular_points_are_quadruple() {
        let cfg = Config {
            variant: crate::Variant::Branched,
            ..Config::default()
        };
        let pts = singular_points(&cfg).unwrap();
        assert_eq!(pts.len(), 4);
        for p in &pts {
            assert_eq!(p.zeros.len(), 4);
        }
    }

    #[test]
    fn gprime_closed_form_matches_jet() {
        let c = cfg();
        for zero in zeros_in_domain(&c) {
            let closed = g_prime_at_zero_closed(&zero, &c);
            // dg/dz = (dg/dd) / z0 for z = z0 (1 + d).
            let jet = seed_offset_jet(&zero, &c, 3, Complex64::ZERO);
            let from_jet = jet[1].coeff(1) / zero.z;
            assert!(
                (closed - from_jet).norm() <= 1e-12 * closed.norm(),
                "zero {:?}",
                zero.z
            );
        }
    }

    #[test]
    fn offset_jet_matches_direct_evaluation_at_moderate_offsets() {
        let c = cfg();
        let zero = zeros_in_domain(&c)[0];
        for d in [
            Complex64::new(1e-3, 2e-3),
            Complex64::new(-4e-2, 1e-2),
            Complex64::new(0.0, -0.3),
        ] {
            let off = seed_offset_jet(&zero, &c, 2, d);
            let z = zero.z * (Complex64::ONE + d);
            let direct = seed(z, &c);
            let p1 = direct[0] - zero.z.powu(3);
            assert!((off[0].val() - p1).norm() <= 1e-9 * direct[0].norm());
            assert!((off[1].val() - direct[1]).norm() <= 1e-12 * (1.0 + direct[1].norm()));
        }
    }

    #[test]
    fn offset_jet_stays_accurate_below_float_resolution() {
        let c = cfg();
        let zero = zeros_in_domain(&c)[0];
        let d = Complex64::new(3e-20, -1e-20);
        let off = seed_offset_jet(&zero, &c, 2, d);
        // First coordinate: z0^p ((1+d)^p - 1) ~ p z0^p d.
        let lin = zero.z.powu(3) * 3.0 * d;
        assert!((off[0].val() - lin).norm() <= 1e-15 * lin.norm());
        // Second coordinate: g'(z0) z0 d to first order.
        let lin = g_prime_at_zero_closed(&zero, &c) * zero.z * d;
        assert!((off[1].val() - lin).norm() <= 1e-10 * lin.norm());
    }

    #[test]
    fn whole_sweep_decay_beats_tenth_power() {
        // Along its own zero ray, one factor drops by at least the tenth
        // power of the modulus ratio across three decades.
        let f = |t: f64| f_factor(Complex64::from_polar(t, PI / 2.0), -0.5, 0.5).norm();
        let ratio = f(1e-4) / f(1e-1);
        assert!(ratio <= 1e-30, "ratio {ratio:.3e}");
    }

    #[test]
    fn factor_is_c1_small_near_the_origin() {
        // On the circle |z| = 1e-4 inside the wedge |arg z| <= 3 pi/4 the
        // factor and its derivative are both negligible; this is what makes
        // the extension by zero at the origin C^1 (in fact C^infinity).
        let mut worst_f = 0.0f64;
        let mut worst_df = 0.0f64;
        for i in 0..=100 {
            let th = -0.75 * PI + 1.5 * PI * i as f64 / 100.0;
            let z = CJet::variable(1, Complex64::from_polar(1e-4, th));
            let f = f_factor_jet(&z, 0.5, 0.5);
            worst_f = worst_f.max(f.val().norm());
            worst_df = worst_df.max(f.derivative(1).norm());
        }
        assert!(worst_f <= 1e-12, "sup |f| = {worst_f:.3e}");
        assert!(worst_df <= 1e-8, "sup |f'| = {worst_df:.3e}");
    }

    #[test]
    fn domain_boundary_satisfies_implicit_equation() {
        let curve = DomainCurve::from_config(&cfg());
        for i in 0..=1000 {
            let t = -PI + 2.0 * PI * i as f64 / 1000.0;
            let b = curve.boundary(t);
            assert!(curve.implicit(b.re, b.im).abs() <= 1e-8);
        }
        // Closes up at the origin with a quadratic pinch.
        assert!(curve.boundary(PI).norm() < 1e-12);
        assert!(curve.boundary(-PI).norm() < 1e-12);
    }

    #[test]
    fn domain_stays_inside_the_wedge() {
        // x + |y| >= 0 on the boundary, still positive slightly inside, and
        // zero only at the pinch.
        let curve = DomainCurve::from_config(&cfg());
        for i in 1..1000 {
            let t = -PI + 2.0 * PI * i as f64 / 1000.0;
            let b = curve.boundary(t);
            assert!(b.re + b.im.abs() > 0.0, "t = {t}");
        }
    }

    #[test]
    fn jet_derivative_of_g_matches_finite_differences() {
        let c = cfg();
        for z0 in [
            Complex64::new(2.0, 1.0),
            Complex64::new(0.4, -0.9),
            Complex64::new(12.0, 6.0),
        ] {
            let jet = g_jet(&CJet::variable(1, z0), &c);
            let h = 1e-6;
            let fd = (g_product(z0 + h, &c) - g_product(z0 - h, &c)) / (2.0 * h);
            let fdi = (g_product(z0 + Complex64::new(0.0, h), &c)
                - g_product(z0 - Complex64::new(0.0, h), &c))
                / Complex64::new(0.0, 2.0 * h);
            let d = jet.derivative(1);
            // Agreement with both real and imaginary difference quotients is
            // the Cauchy-Riemann check.
            assert!((d - fd).norm() <= 1e-6 * (1.0 + d.norm()));
            assert!((d - fdi).norm() <= 1e-6 * (1.0 + d.norm()));
        }
    }

    proptest! {
        // ------------------------------------------------------------------
        // |f| <= cosh(5 pi/4) < 26 everywhere on the wedge: the flattening
        // factor has modulus <= 1 there and the sine argument has imaginary
        // part at most 3 pi/4 + pi/2.
        // ------------------------------------------------------------------
        #[test]
        fn factor_bounded_on_wedge(
            rho in 1e-6f64..50.0,
            th in -0.749f64..0.749,
            k in 0usize..4,
        ) {
            let z = Complex64::from_polar(rho, th * PI);
            let c = cfg().variant.ray_offsets()[k];
            prop_assert!(f_factor(z, c, 0.5).norm() <= 26.0);
        }

        // ------------------------------------------------------------------
        // Membership in the domain implies membership in the wedge; the
        // boundary curve was checked separately, this covers the interior.
        // ------------------------------------------------------------------
        #[test]
        fn interior_points_lie_in_the_wedge(x in -70.0f64..70.0, y in -40.0f64..40.0) {
            let curve = DomainCurve::from_config(&cfg());
            let z = Complex64::new(x, y);
            if curve.contains(z) {
                prop_assert!(z.re + z.im.abs() > 0.0);
            }
        }
    }
}
