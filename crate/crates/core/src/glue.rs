//! Gluing across a neck collar: an interpolated graph bridging two
//! holomorphic sheets, a model 2-form adapted to it, and a closed 2-form
//! that agrees with the standard symplectic form away from the collar.
//!
//! Everything lives at unit scale: the sheets are graphs over the annulus
//! D10 minus D1 in the first coordinate plane, and the collar has normal
//! half-width sigma.  In chart coordinates the glued form is assembled as
//!     omega = beta + phi (Y*omega0 - beta) + dphi ^ theta
//! with d theta = Y*omega0 - beta.  This telescoped expression equals
//! beta + d(phi theta), but makes "omega = Y*omega0 wherever phi = 1" an
//! arithmetic identity instead of a quadrature statement, so the support
//! property survives at full precision.
//!
//! theta comes from the normal-squashing homotopy, so it vanishes with all
//! components on the surface plane and the form is only ever sampled over
//! the annulus itself.  Both facts carry weight: the first cancels one
//! power of the collar width against the mask derivatives, the second
//! means the sheets never need extending inward.

use std::sync::Arc;

use num_complex::Complex64;

use crate::bump::{cut_above, cut_below};
use crate::chart::{Chart, InverseChart, PlaneMap};
use crate::cjet::CJet;
use crate::config::{
    TOL_GLUE_CLOSED, TOL_GLUE_MIXED, TOL_GLUE_PLANE, TOL_GLUE_SUPPORT,
};
use crate::forms::{
    fiber_primitive, standard_symplectic, sup_cn_distance, ConstField, Field, FnField,
    FormField, MapField,
};
use crate::jet::Jet;
use crate::{Error, Result};

/// Working annulus for the sheet data, as radii in the first plane.
pub const ANNULUS_INNER: f64 = 1.0;
pub const ANNULUS_OUTER: f64 = 10.0;

// Planar interpolation cutoff (squared radii): 1 on D4, 0 outside D5.
const MIX_LO: f64 = 16.0;
const MIX_HI: f64 = 25.0;

// Ring factor of the collar mask (squared radii): 1 on D6 minus D4, 0
// outside D7 minus D3.
const RING: [f64; 4] = [9.0, 16.0, 36.0, 49.0];

/// A holomorphic map given through its univariate complex jets.
pub trait HoloJet: Send + Sync {
    fn cjet(&self, z: Complex64, order: usize) -> CJet;
}

pub struct FnHolo<F>(pub F);

impl<F: Fn(Complex64, usize) -> CJet + Send + Sync> HoloJet for FnHolo<F> {
    fn cjet(&self, z: Complex64, order: usize) -> CJet {
        (self.0)(z, order)
    }
}

pub struct GlueInput {
    pub f: Arc<dyn HoloJet>,
    pub h: Arc<dyn HoloJet>,
    /// Target bound for the C^N distance of the glued form from the
    /// symplectic form.
    pub eta: f64,
    /// Derivative order N of that distance.
    pub big_n: usize,
    /// Normal half-width of the collar where the mask is allowed to vary.
    pub sigma: f64,
}

fn annulus_samples() -> Vec<Complex64> {
    let mut out = Vec::new();
    for i in 0..10 {
        // Geometric radii keep the inner edge, where derivatives of the
        // sheet data peak, as well sampled as the outer one.
        let r = 1.2 * (9.7f64 / 1.2).powf(i as f64 / 9.0);
        for j in 0..12 {
            let t = 2.0 * std::f64::consts::PI * (j as f64 + 0.3) / 12.0;
            out.push(Complex64::from_polar(r, t));
        }
    }
    out
}

impl GlueInput {
    /// Grid C^{N+2} norm of both sheets over the annulus.
    pub fn measured_norm(&self) -> f64 {
        let order = self.big_n + 2;
        let mut worst = 0.0f64;
        for z in annulus_samples() {
            for m in [&self.f, &self.h] {
                let (u, v) = m.cjet(z, order).to_real_jets(order);
                worst = worst.max(u.cn_norm(order)).max(v.cn_norm(order));
            }
        }
        worst
    }

    /// Worst Cauchy-Riemann defect of the sheet data over the annulus.
    pub fn cr_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for z in annulus_samples() {
            for m in [&self.f, &self.h] {
                let (u, v) = m.cjet(z, 1).to_real_jets(1);
                let a = u.partial([1, 0, 0, 0]) - v.partial([0, 1, 0, 0]);
                let b = u.partial([0, 1, 0, 0]) + v.partial([1, 0, 0, 0]);
                worst = worst.max(a.abs()).max(b.abs());
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config("glue eta must be positive".into()));
        }
        if !(1..=3).contains(&self.big_n) {
            return Err(Error::Config("glue derivative order must be 1..=3".into()));
        }
        if !(self.sigma > 0.0) || self.sigma > self.eta / 2.0 {
            return Err(Error::Config(
                "collar half-width must satisfy 0 < sigma <= eta/2".into(),
            ));
        }
        let eps = self.measured_norm();
        if eps > self.sigma / 100.0 {
            return Err(Error::Config(format!(
                "sheet norm {eps:.3e} exceeds sigma/100 = {:.3e}",
                self.sigma / 100.0
            )));
        }
        let cr = self.cr_residual();
        if cr > 1e-8 {
            return Err(Error::Config(format!(
                "sheet data fails the Cauchy-Riemann check: {cr:.3e}"
            )));
        }
        Ok(())
    }
}

/// The interpolated graph: sheet f inside D4, sheet h outside D5, blended on
/// the ring between.
pub struct TransitionGraph {
    f: Arc<dyn HoloJet>,
    h: Arc<dyn HoloJet>,
}

impl TransitionGraph {
    pub fn new(input: &GlueInput) -> TransitionGraph {
        Self::from_sheets(input.f.clone(), input.h.clone())
    }

    pub fn from_sheets(f: Arc<dyn HoloJet>, h: Arc<dyn HoloJet>) -> TransitionGraph {
        TransitionGraph { f, h }
    }
}

impl PlaneMap for TransitionGraph {
    fn jet(&self, x: [f64; 2], order: usize) -> [Jet; 2] {
        let r2v = x[0] * x[0] + x[1] * x[1];
        debug_assert!(
            r2v > ANNULUS_INNER && r2v < ANNULUS_OUTER * ANNULUS_OUTER,
            "graph sampled off the annulus"
        );
        let x1 = Jet::variable(order, 0, x[0]);
        let x2 = Jet::variable(order, 1, x[1]);
        let r2 = &(&x1 * &x1) + &(&x2 * &x2);
        let z = Complex64::new(x[0], x[1]);
        let mut zeta = [Jet::zeros(order), Jet::zeros(order)];
        // Each sheet is evaluated only where its cutoff weight can be
        // nonzero, so f is never sampled outside D5 nor h inside D4.
        if r2v < MIX_HI {
            let (u, v) = self.f.cjet(z, order).to_real_jets(order);
            let w = cut_above(&r2, MIX_LO, MIX_HI);
            zeta[0] = &zeta[0] + &(&u * &w);
            zeta[1] = &zeta[1] + &(&v * &w);
        }
        if r2v > MIX_LO {
            let (u, v) = self.h.cjet(z, order).to_real_jets(order);
            let w = cut_below(&r2, MIX_LO, MIX_HI);
            zeta[0] = &zeta[0] + &(&u * &w);
            zeta[1] = &zeta[1] + &(&v * &w);
        }
        zeta
    }
}

/// The collar mask phi: 0 on (D6\D4) x D_sigma, 1 outside (D7\D3) x D_2sigma,
/// smooth in between, built from squared-radius bump ramps.
fn collar_mask(sigma: f64) -> Field {
    Arc::new(FnField(move |p: [f64; 4], order: usize| {
        let s2 = sigma * sigma;
        let r1v = p[0] * p[0] + p[1] * p[1];
        let r2v = p[2] * p[2] + p[3] * p[3];
        // On any plateau of either factor the mask is exactly constant; the
        // early return must agree with the ramp plateaus, which it does
        // because the cut functions are exactly 0/1 there.
        if r1v <= RING[0] || r1v >= RING[3] || r2v >= 4.0 * s2 {
            return Jet::constant(order, 1.0);
        }
        let x: [Jet; 4] = std::array::from_fn(|i| Jet::variable(order, i, p[i]));
        let r1 = &(&x[0] * &x[0]) + &(&x[1] * &x[1]);
        let r2 = &(&x[2] * &x[2]) + &(&x[3] * &x[3]);
        let ring = &cut_below(&r1, RING[0], RING[1]) * &cut_above(&r1, RING[2], RING[3]);
        let disk = cut_above(&r2, s2, 4.0 * s2);
        &Jet::constant(order, 1.0) - &(&ring * &disk)
    }))
}

pub struct GlueCheck {
    pub name: &'static str,
    pub residual: f64,
    pub tol: f64,
}

impl GlueCheck {
    pub fn pass(&self) -> bool {
        self.residual.is_finite() && self.residual <= self.tol
    }
}

pub struct Gluing {
    pub eta: f64,
    pub big_n: usize,
    pub sigma: f64,
    pub chart: Arc<Chart>,
    /// Model form beta = a(X1,X2) dX1^dX2 + dX3^dX4 in chart coordinates.
    pub beta: FormField,
    /// Y*omega0 - beta: closed, and vanishing on the surface plane.
    pub gamma: FormField,
    /// Primitive of gamma vanishing on the surface plane.
    pub theta: FormField,
    pub phi: Field,
    /// The glued form in chart coordinates.
    pub omega: FormField,
    /// The glued form in the ambient coordinates.
    pub omega_euclid: FormField,
}

impl Gluing {
    pub fn build(input: &GlueInput) -> Result<Gluing> {
        input.validate()?;
        let eps = input.measured_norm();

        // The interpolation may only amplify the sheet norms by the fixed
        // cutoff constants; anything beyond that signals bad inputs.
        let trans = TransitionGraph::new(input);
        let order = input.big_n + 2;
        let mut znorm = 0.0f64;
        for z in annulus_samples() {
            let zeta = trans.jet([z.re, z.im], order);
            znorm = znorm.max(zeta[0].cn_norm(order)).max(zeta[1].cn_norm(order));
        }
        if znorm > 50.0 * eps {
            return Err(Error::Config(format!(
                "interpolated graph norm {znorm:.3e} exceeds its budget {:.3e}",
                50.0 * eps
            )));
        }

        let graph: Arc<dyn PlaneMap> = Arc::new(trans);
        let chart = Arc::new(Chart::new(graph));

        let omega0 = standard_symplectic();
        let pulled = omega0.pullback(chart.clone() as Arc<dyn MapField>);
        let c2 = chart.clone();
        let area: Field = Arc::new(FnField(move |p: [f64; 4], order: usize| {
            c2.area_factor([p[0], p[1]], order)
        }));
        let beta = FormField::from_parts(
            2,
            vec![
                (vec![0, 1], area),
                (vec![2, 3], Arc::new(ConstField(1.0)) as Field),
            ],
        );
        let gamma = pulled.sub(&beta);

        // gamma must vanish on the surface plane for the adapted primitive
        // to vanish there too; this is the defining property of the area
        // factor, checked rather than assumed.
        let mut plane = 0.0f64;
        for i in 0..12 {
            let r = 1.6 + 7.8 * i as f64 / 11.0;
            let t = 0.7 + 0.5 * i as f64;
            let p = [r * t.cos(), r * t.sin(), 0.0, 0.0];
            plane = plane.max(gamma.eval(p, 0)[0].val().abs());
        }
        if plane > 1e-8 {
            return Err(Error::Certificate {
                name: "glue-gamma-plane".into(),
                residual: plane,
                tol: 1e-8,
            });
        }

        let theta = fiber_primitive(&gamma);
        let phi = collar_mask(input.sigma);
        let phi_form = FormField::from_parts(0, vec![(vec![], phi.clone())]);
        let dphi = phi_form.d();
        let omega = beta
            .add(&gamma.mul_field(&phi))
            .add(&dphi.wedge(&theta));
        let omega_euclid = omega.pullback(Arc::new(InverseChart(chart.clone())));

        Ok(Gluing {
            eta: input.eta,
            big_n: input.big_n,
            sigma: input.sigma,
            chart,
            beta,
            gamma,
            theta,
            phi,
            omega,
            omega_euclid,
        })
    }

    /// Points spread over the collar where the mask varies, concentrated on
    /// the ramp zones where its derivatives peak.
    fn support_zone_points(&self) -> Vec<[f64; 4]> {
        let s = self.sigma;
        let mut out = Vec::new();
        for &r in &[3.3, 3.55, 4.5, 5.5, 6.45, 6.7] {
            for a in 0..4 {
                let t = 0.37 + std::f64::consts::FRAC_PI_2 * a as f64;
                let (x1, x2) = (r * t.cos(), r * t.sin());
                out.push([x1, x2, 0.0, 0.0]);
                for &q in &[0.7, 1.25, 1.55, 1.85] {
                    for b in 0..3 {
                        let u = 0.5 + 2.1 * b as f64;
                        out.push([x1, x2, q * s * u.cos(), q * s * u.sin()]);
                    }
                }
            }
        }
        out
    }

    /// Points outside the mask support, where the glued form must equal the
    /// symplectic form outright.
    fn outside_points(&self) -> Vec<[f64; 4]> {
        let s = self.sigma;
        let mut out = Vec::new();
        for &r in &[1.4, 2.3, 2.95, 7.05, 8.4, 9.6] {
            for a in 0..4 {
                let t = 0.9 + std::f64::consts::FRAC_PI_2 * a as f64;
                let (x1, x2) = (r * t.cos(), r * t.sin());
                out.push([x1, x2, 0.0, 0.0]);
                out.push([x1, x2, s, 0.0]);
                out.push([x1, x2, 0.0, 1.9 * s]);
                out.push([x1, x2, 1.9 * s, 2.0 * s]);
            }
        }
        for &r in &[4.3, 5.7] {
            for a in 0..4 {
                let t = 0.2 + std::f64::consts::FRAC_PI_2 * a as f64;
                let (x1, x2) = (r * t.cos(), r * t.sin());
                out.push([x1, x2, 2.1 * s, 0.0]);
                out.push([x1, x2, 0.0, 3.2 * s]);
            }
        }
        out
    }

    /// The five certified properties of the glued form, plus an ambient
    /// closedness spot check on a subsample.
    pub fn certify(&self) -> Vec<GlueCheck> {
        let zone = self.support_zone_points();
        let outside = self.outside_points();
        let all: Vec<[f64; 4]> = zone.iter().chain(outside.iter()).copied().collect();
        let omega0 = standard_symplectic();
        let zero3 = FormField::zero(3);

        let domega = self.omega.d();
        let closed = sup_cn_distance(&domega, &zero3, &all, 0);

        let sub: Vec<[f64; 4]> = zone.iter().step_by(9).copied().collect();
        let deu = self.omega_euclid.d();
        let closed_eu = sup_cn_distance(&deu, &zero3, &sub, 0);

        let mut restriction = 0.0f64;
        for &[r, t] in &surface_grid(9, 8, 1.6, 9.3) {
            let x = [r * t.cos(), r * t.sin()];
            let q = self.chart.y_value([x[0], x[1], 0.0, 0.0]);
            let y = self.chart.y_jet([x[0], x[1], 0.0, 0.0], 1);
            let t1: [f64; 4] = std::array::from_fn(|i| y[i].partial([1, 0, 0, 0]));
            let t2: [f64; 4] = std::array::from_fn(|i| y[i].partial([0, 1, 0, 0]));
            let got = self.omega_euclid.eval_on_pair(q, t1, t2);
            let want = omega0.eval_on_pair(q, t1, t2);
            restriction = restriction.max((got - want).abs());
        }

        let mut mixed = 0.0f64;
        for &[r, t] in &surface_grid(4, 8, 4.1, 5.9) {
            let x = [r * t.cos(), r * t.sin()];
            let q = self.chart.y_value([x[0], x[1], 0.0, 0.0]);
            let y = self.chart.y_jet([x[0], x[1], 0.0, 0.0], 1);
            let t1: [f64; 4] = std::array::from_fn(|i| y[i].partial([1, 0, 0, 0]));
            let t2: [f64; 4] = std::array::from_fn(|i| y[i].partial([0, 1, 0, 0]));
            let [xi, tau] = self.chart.frame(x, 0);
            let xiv: [f64; 4] = std::array::from_fn(|i| xi[i].val());
            let tauv: [f64; 4] = std::array::from_fn(|i| tau[i].val());
            for v in [t1, t2] {
                for w in [xiv, tauv] {
                    mixed = mixed.max(self.omega_euclid.eval_on_pair(q, v, w).abs());
                }
            }
        }

        let support = sup_cn_distance(&self.omega_euclid, &omega0, &outside, 0);
        let cn = sup_cn_distance(&self.omega, &omega0, &all, self.big_n);

        vec![
            GlueCheck { name: "glue-closed", residual: closed, tol: TOL_GLUE_CLOSED },
            GlueCheck {
                name: "glue-closed-euclidean",
                residual: closed_eu,
                tol: TOL_GLUE_CLOSED,
            },
            GlueCheck {
                name: "glue-surface-restriction",
                residual: restriction,
                tol: TOL_GLUE_PLANE,
            },
            GlueCheck { name: "glue-mixed-pairs", residual: mixed, tol: TOL_GLUE_MIXED },
            GlueCheck { name: "glue-support", residual: support, tol: TOL_GLUE_SUPPORT },
            GlueCheck { name: "glue-cn-distance", residual: cn, tol: self.eta },
        ]
    }

    /// C^n distance of the glued form from the symplectic form on a caller
    /// supplied point set (used by the scaling invariance checks).
    pub fn cn_distance_on(&self, pts: &[[f64; 4]], n: usize) -> f64 {
        sup_cn_distance(&self.omega, &standard_symplectic(), pts, n)
    }
}

fn surface_grid(nr: usize, nt: usize, r_lo: f64, r_hi: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for i in 0..nr {
        let r = if nr == 1 {
            r_lo
        } else {
            r_lo + (r_hi - r_lo) * i as f64 / (nr - 1) as f64
        };
        for j in 0..nt {
            let t = 2.0 * std::f64::consts::PI * (j as f64 + 0.15) / nt as f64;
            out.push([r, t]);
        }
    }
    out
}
