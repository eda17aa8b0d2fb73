//! The desingularized surface as an atlas of oriented quadrature patches,
//! and the area/flux certificates computed over it.
//!
//! With K necks the surface decomposes as
//!
//!   seed disk - (removed disk per treated sheet)
//!   + collar annulus per treated sheet + core per neck
//!
//! Adjacent patches share their seam curves exactly: the collar at rho = 1
//! is the rim |d| = d0 of the removed disk, and at rho = 0 it is the
//! unit-footprint cut of the core hyperbola.  Every patch pushes forward
//! the complex orientation of its parameter domain, so the fluxes add
//! coherently and total area equals total flux for a calibrated surface.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chart::PlaneMap;
use crate::cjet::CJet;
use crate::config::Config;
use crate::config::Variant;
use crate::glue::TransitionGraph;
use crate::kahler::polar_acs;
use crate::linalg::Mat4;
use crate::slitplane::{seed_jet, seed_offset_jet};
use crate::{Error, Result};

use super::lines::{LineFrame, SingularSite};
use super::metric::{frame_matrix, GlobalForm};
use super::necks::{AlignedNeck, NeckShape, SeedSheet};
use super::quad::{integrate, sup_on_grid, Patch, PatchPoint};
use super::schedule::{NeckPlan, Schedule};

fn c2r4(a: Complex64, b: Complex64) -> [f64; 4] {
    [a.re, a.im, b.re, b.im]
}

fn shift(base: &[f64; 4], off: [f64; 4]) -> [f64; 4] {
    std::array::from_fn(|i| base[i] + off[i])
}

fn quad_form(m: &Mat4<f64>, a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let mut out = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            out += a[i] * m.0[i][j] * b[j];
        }
    }
    out
}

/// Riemannian area element and omega-flux of the oriented tangent pair at
/// one patch point, both under the global structure.  For a calibrated
/// patch the two integrands agree pointwise.
pub fn area_and_flux(form: &GlobalForm, p: &PatchPoint) -> Result<[f64; 2]> {
    let a = form.matrix(&p.point);
    let acs = polar_acs(&a)?;
    let guu = quad_form(&acs.gram, &p.tu, &p.tu);
    let guv = quad_form(&acs.gram, &p.tu, &p.tv);
    let gvv = quad_form(&acs.gram, &p.tv, &p.tv);
    let area = (guu * gvv - guv * guv).max(0.0).sqrt();
    let flux = -quad_form(&a, &p.tu, &p.tv);
    Ok([area, flux])
}

/// Sup over a fixed grid of the pointwise calibration defect
/// (area - flux)/area.
pub fn calibration_defect(form: &GlobalForm, patch: &dyn Patch) -> Result<f64> {
    sup_on_grid(
        patch,
        &|p| {
            let [a, f] = area_and_flux(form, p)?;
            Ok(if a > 0.0 { (a - f) / a } else { 0.0 })
        },
        6,
        48,
    )
}

/// The whole seed image in shear-polar coordinates: for the boundary curve
/// with parameters (r, mu) the domain is exactly
///     z(R, phi) = r + R cos phi - mu R^2 sin^2 phi + i R sin phi,
/// R in [0, r].  The angular shear has unit Jacobian, so the parametrization
/// is a diffeomorphism away from R = 0 and meets the slit only at the corner
/// (R, phi) = (r, +-pi), which no quadrature node touches.
pub struct SeedDisk {
    cfg: Config,
}

impl SeedDisk {
    pub fn new(cfg: &Config) -> SeedDisk {
        SeedDisk { cfg: cfg.clone() }
    }
}

impl Patch for SeedDisk {
    fn name(&self) -> String {
        "seed-disk".into()
    }

    fn u_range(&self) -> (f64, f64) {
        (0.0, self.cfg.curve_r)
    }

    fn eval(&self, u: f64, v: f64) -> PatchPoint {
        let r = self.cfg.curve_r;
        let mu = self.cfg.curve_mu;
        let (sv, cv) = v.sin_cos();
        let z = Complex64::new(r + u * cv - mu * u * u * sv * sv, u * sv);
        let j = seed_jet(&CJet::variable(1, z), &self.cfg);
        let gp = [j[0].coeff(1), j[1].coeff(1)];
        let zu = Complex64::new(cv - 2.0 * mu * u * sv * sv, sv);
        let zv = Complex64::new(-u * sv * (1.0 + 2.0 * mu * u * cv), u * cv);
        PatchPoint {
            point: c2r4(j[0].val(), j[1].val()),
            tu: c2r4(gp[0] * zu, gp[1] * zu),
            tv: c2r4(gp[0] * zv, gp[1] * zv),
        }
    }
}

/// The seed material removed under one treated sheet: the image of the
/// domain disk |d| <= d0 around the sheet's zero, in offset polar
/// coordinates.  Integrated with negative sign.
pub struct SeedHole {
    name: String,
    cfg: Config,
    point: [f64; 4],
    line: LineFrame,
    d0: f64,
}

impl SeedHole {
    pub fn new(cfg: &Config, site: &SingularSite, line: usize, d0: f64) -> SeedHole {
        SeedHole {
            name: format!("hole-{}-{}", site.index, line),
            cfg: cfg.clone(),
            point: site.point,
            line: site.lines[line].clone(),
            d0,
        }
    }
}

impl Patch for SeedHole {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn u_range(&self) -> (f64, f64) {
        (0.0, self.d0)
    }

    fn eval(&self, u: f64, v: f64) -> PatchPoint {
        let d = Complex64::from_polar(u, v);
        let jets = seed_offset_jet(&self.line.zero, &self.cfg, 1, d);
        let dq = [jets[0].coeff(1), jets[1].coeff(1)];
        let du = Complex64::from_polar(1.0, v);
        let dv = Complex64::i() * d;
        PatchPoint {
            point: shift(&self.point, c2r4(jets[0].val(), jets[1].val())),
            tu: c2r4(dq[0] * du, dq[1] * du),
            tv: c2r4(dq[0] * dv, dq[1] * dv),
        }
    }
}

/// Footprint radius where the collar hands the surface back to the seed.
/// Chosen past the outer mask plateau edge at 7 but short of the working
/// annulus rim at 10.
const RIM_FOOTPRINT: f64 = 7.5;

/// One collar annulus: the interpolated graph over a treated tangent line,
/// between the unit-footprint circle shared with the core and the image of
/// the removed rim |d| = d0.
///
/// The ruling interpolates the derotated unit circle to the rim image
///     zeta(rho, psi) = (1 - rho) chi e^{i psi} + rho Z(psi),
/// where Z is the rim footprint curve and chi = Z(0)/|Z(0)|.  The
/// derotation keeps the two circles angularly aligned, so |zeta| grows
/// monotonically along the ruling and the Jacobian stays positive.
pub struct NeckCollar {
    name: String,
    cfg: Config,
    line: LineFrame,
    point: [f64; 4],
    scale: f64,
    u: Mat4<f64>,
    graph: TransitionGraph,
    d0: f64,
    chi: Complex64,
    rbar: f64,
}

impl NeckCollar {
    pub fn new(cfg: &Config, site: &SingularSite, shape: &Arc<NeckShape>, line: usize) -> NeckCollar {
        let lf = shape.lines[line].clone();
        let scale = shape.scale;
        let d0 = RIM_FOOTPRINT * scale / lf.speed();
        let graph = TransitionGraph::from_sheets(
            shape.sheet(line),
            Arc::new(SeedSheet {
                cfg: cfg.clone(),
                line: lf.clone(),
                scale,
            }),
        );
        let mut out = NeckCollar {
            name: format!("collar-{}-{}", site.index, line),
            cfg: cfg.clone(),
            line: lf,
            point: site.point,
            scale,
            u: frame_matrix(&shape.lines[line]),
            graph,
            d0,
            chi: Complex64::ONE,
            rbar: RIM_FOOTPRINT,
        };
        let z0 = out.rim(0.0).0;
        out.chi = z0 / z0.norm();
        out.rbar = z0.norm();
        // The rim curve must stay between the outer mask plateau and the
        // working annulus; curvature of the seed bends it away from the
        // nominal circle only by O(d0).
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for k in 0..32 {
            let n = out.rim(-std::f64::consts::PI + std::f64::consts::TAU * (k as f64 + 0.5) / 32.0)
                .0
                .norm();
            lo = lo.min(n);
            hi = hi.max(n);
        }
        assert!(
            lo > 7.05 && hi < 9.5,
            "collar rim wanders off its ring: [{lo:.6}, {hi:.6}]"
        );
        out
    }

    /// Footprint image of the removed rim at angle psi, with its
    /// psi-derivative: Z(psi) = zeta(d0 e^{i psi}) in the line frame.
    fn rim(&self, psi: f64) -> (Complex64, Complex64) {
        let d = Complex64::from_polar(self.d0, psi);
        let jets = seed_offset_jet(&self.line.zero, &self.cfg, 1, d);
        let c = [
            self.line.dir[0].conj() / self.scale,
            self.line.dir[1].conj() / self.scale,
        ];
        let z = jets[0].val() * c[0] + jets[1].val() * c[1];
        let slope = jets[0].coeff(1) * c[0] + jets[1].coeff(1) * c[1];
        (z, slope * Complex64::i() * d)
    }

    /// Offset radius |d| of the removed rim in the seed disk.
    pub fn rim_offset(&self) -> f64 {
        self.d0
    }

    /// Phase aligning the inner ruling circle with the rim footprint.
    pub fn derotation(&self) -> Complex64 {
        self.chi
    }

    /// Ruling parameter whose inner circle has the given footprint radius.
    pub fn ring_rho(&self, target: f64) -> f64 {
        assert!(target > 1.0 && target < self.rbar);
        (target - 1.0) / (self.rbar - 1.0)
    }
}

impl Patch for NeckCollar {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn u_range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    /// Panel edges where the ruling radius crosses the mask and blend
    /// seams at footprint radii 3, 4, 5, 6, 7.
    fn u_breaks(&self) -> Vec<f64> {
        [3.0, 4.0, 5.0, 6.0, 7.0]
            .iter()
            .map(|k| (k - 1.0) / (self.rbar - 1.0))
            .collect()
    }

    fn eval(&self, u: f64, v: f64) -> PatchPoint {
        let (zr, dzr) = self.rim(v);
        let e = self.chi * Complex64::from_polar(1.0, v);
        let zeta = (1.0 - u) * e + u * zr;
        let du = zr - e;
        let dv = Complex64::i() * (1.0 - u) * e + u * dzr;
        let zeta_jet = self.graph.jet([zeta.re, zeta.im], 1);
        let val = [zeta.re, zeta.im, zeta_jet[0].val(), zeta_jet[1].val()];
        let dx1 = [
            1.0,
            0.0,
            zeta_jet[0].partial([1, 0, 0, 0]),
            zeta_jet[1].partial([1, 0, 0, 0]),
        ];
        let dx2 = [
            0.0,
            1.0,
            zeta_jet[0].partial([0, 1, 0, 0]),
            zeta_jet[1].partial([0, 1, 0, 0]),
        ];
        let tu: [f64; 4] = std::array::from_fn(|i| dx1[i] * du.re + dx2[i] * du.im);
        let tv: [f64; 4] = std::array::from_fn(|i| dx1[i] * dv.re + dx2[i] * dv.im);
        PatchPoint {
            point: shift(&self.point, self.u.apply(&val.map(|x| x * self.scale))),
            tu: self.u.apply(&tu.map(|x| x * self.scale)),
            tv: self.u.apply(&tv.map(|x| x * self.scale)),
        }
    }
}

/// The neck core: the exact hyperbola between the two unit-footprint cut
/// curves, on the geometric radial interpolation
///     zt(t, u) = s2(u)^(1-t) s1(u)^t e^{iu},
/// which walks the aligned radius from the line-2 cut (|zt| ~ |eta_hat|) to
/// the line-1 cut (|zt| ~ 1) log-uniformly.
pub struct NeckCore {
    name: String,
    point: [f64; 4],
    scale: f64,
    aligned: AlignedNeck,
}

impl NeckCore {
    pub fn new(site: &SingularSite, shape: &NeckShape) -> NeckCore {
        NeckCore {
            name: format!("core-{}", site.index),
            point: site.point,
            scale: shape.scale,
            aligned: AlignedNeck::new(shape),
        }
    }
}

impl Patch for NeckCore {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn u_range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn eval(&self, u: f64, v: f64) -> PatchPoint {
        let (s1, ds1) = self.aligned.cut_radius(0, v, 1.0);
        let (s2, ds2) = self.aligned.cut_radius(1, v, 1.0);
        let s = s2.powf(1.0 - u) * s1.powf(u);
        let zt = Complex64::from_polar(s, v);
        let q = self.aligned.point(zt);
        let vel = self.aligned.velocity(zt);
        let dzt_du = zt * (s1 / s2).ln();
        let radial = (1.0 - u) * ds2 / s2 + u * ds1 / s1;
        let dzt_dv = zt * Complex64::new(radial, 1.0);
        PatchPoint {
            point: shift(&self.point, c2r4(q[0], q[1]).map(|x| x * self.scale)),
            tu: c2r4(vel[0] * dzt_du, vel[1] * dzt_du).map(|x| x * self.scale),
            tv: c2r4(vel[0] * dzt_dv, vel[1] * dzt_dv).map(|x| x * self.scale),
        }
    }
}

/// Quadrature certificate of one patch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchReport {
    pub name: String,
    /// +1 for surface pieces, -1 for removed seed material.
    pub sign: f64,
    pub area: f64,
    pub flux: f64,
    /// Relative change of the last quadrature doubling.
    pub rel_step: f64,
    pub nodes: usize,
    /// Sup of the pointwise calibration defect over the sample grid; absent
    /// for removed material, which is not part of the surface.
    pub defect: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceIntegrals {
    pub patches: Vec<PatchReport>,
    /// Signed totals over the surface.
    pub area: f64,
    pub flux: f64,
}

fn neck_patches(cfg: &Config, plan: &NeckPlan) -> Vec<(Box<dyn Patch>, f64)> {
    let mut out: Vec<(Box<dyn Patch>, f64)> = Vec::new();
    for lp in &plan.lines {
        let collar = NeckCollar::new(cfg, &plan.site, &plan.shape, lp.line);
        out.push((
            Box::new(SeedHole::new(cfg, &plan.site, lp.line, collar.d0)),
            -1.0,
        ));
        out.push((Box::new(collar), 1.0));
    }
    out.push((Box::new(NeckCore::new(&plan.site, &plan.shape)), 1.0));
    out
}

/// Integrate area and flux over the whole desingularized surface under the
/// scheduled global form.
pub fn surface_integrals(
    cfg: &Config,
    schedule: &Schedule,
    rel_tol: f64,
) -> Result<SurfaceIntegrals> {
    if !matches!(cfg.variant, Variant::Quadratic) {
        return Err(Error::NotSupported(
            "surface integrals cover the quadratic variant only; branched necks have \
             no two-line core decomposition"
                .into(),
        ));
    }
    let form = GlobalForm::from_plans(&schedule.necks);
    let mut pieces: Vec<(Box<dyn Patch>, f64)> = vec![(Box::new(SeedDisk::new(cfg)), 1.0)];
    for plan in &schedule.necks {
        pieces.extend(neck_patches(cfg, plan));
    }
    let mut out = SurfaceIntegrals {
        patches: Vec::new(),
        area: 0.0,
        flux: 0.0,
    };
    for (patch, sign) in &pieces {
        let q = integrate::<2>(patch.as_ref(), &|p| area_and_flux(&form, p), rel_tol)?;
        let defect = if *sign > 0.0 {
            Some(calibration_defect(&form, patch.as_ref())?)
        } else {
            None
        };
        out.area += sign * q.values[0];
        out.flux += sign * q.values[1];
        out.patches.push(PatchReport {
            name: patch.name(),
            sign: *sign,
            area: q.values[0],
            flux: q.values[1],
            rel_step: q.rel_step,
            nodes: q.nodes,
            defect,
        });
    }
    Ok(out)
}
