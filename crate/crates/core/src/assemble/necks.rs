//! Neck models at a crossing and the sheets they are made of.
//!
//! The neck replaces the union of tangent lines by the level set
//!
//!   prod_j l_j(q) = eta            (quadratic crossings)
//!   prod_j l_j(q) = eta (q1^3 - q2^2)   (branched crossings)
//!
//! in ambient offsets q from the crossing point.  Over each tangent line the
//! level set splits off one sheet that is a holomorphic graph in that line's
//! unitary frame; the solver below continues it from the line itself, which
//! is the eta = 0 member of the family.  Everything works in rescaled
//! offsets x = q/scale so that the glue annulus is always 1 <= |z| <= 10.

use super::lines::{LineFrame, SingularSite};
use crate::cjet::CJet;
use crate::config::{Config, Variant};
use crate::glue::HoloJet;
use crate::slitplane::seed_offset_jet;
use num_complex::Complex64;
use std::sync::Arc;

fn cjet_mag(j: &CJet) -> f64 {
    (0..=j.order()).map(|k| j.coeff(k).norm()).fold(0.0, f64::max)
}

/// The defining data of one neck in rescaled offset coordinates.
pub struct NeckShape {
    pub variant: Variant,
    pub lines: Vec<LineFrame>,
    /// Chart unit: rescaled x = (ambient offset)/scale.
    pub scale: f64,
    /// Original-scale neck parameter.
    pub eta: f64,
}

impl NeckShape {
    pub fn new(site: &SingularSite, variant: Variant, scale: f64, eta: f64) -> NeckShape {
        NeckShape {
            variant,
            lines: site.lines.clone(),
            scale,
            eta,
        }
    }

    /// Left-hand side minus right-hand side of the rescaled neck equation,
    /// together with its w-derivative, both as jets along a graph candidate
    /// (z, w(z)) in the frame of line `i`.
    fn defect(&self, i: usize, zj: &CJet, wj: &CJet) -> (CJet, CJet) {
        let order = zj.order();
        let frame = &self.lines[i];
        let q1 = zj.scale(frame.dir[0]).add(&wj.scale(frame.normal[0]));
        let q2 = zj.scale(frame.dir[1]).add(&wj.scale(frame.normal[1]));
        let mut prod = CJet::constant(order, Complex64::ONE);
        let mut dprod = CJet::zeros(order);
        for lf in &self.lines {
            let l = q1.scale(lf.form[0]).add(&q2.scale(lf.form[1]));
            let dl = lf.form[0] * frame.normal[0] + lf.form[1] * frame.normal[1];
            dprod = dprod.mul(&l).add(&prod.scale(dl));
            prod = prod.mul(&l);
        }
        match self.variant {
            Variant::Quadratic => {
                let eta_hat = self.eta / (self.scale * self.scale);
                (prod.add_const((-eta_hat).into()), dprod)
            }
            Variant::Branched => {
                let e3 = self.eta / self.scale;
                let e2 = self.eta / (self.scale * self.scale);
                let rhs = q1.powi(3).scale(e3.into()).sub(&q2.powi(2).scale(e2.into()));
                let drhs = q1
                    .powi(2)
                    .scale(3.0 * e3 * frame.normal[0])
                    .sub(&q2.scale(2.0 * e2 * frame.normal[1]));
                (prod.sub(&rhs), dprod.sub(&drhs))
            }
        }
    }

    /// The sheet of the neck over line `i` as a graph jet at footprint `z`.
    ///
    /// Newton from the tangent line; the iteration stays on the small branch
    /// because the competing roots sit at graph height O(|z|).
    pub fn sheet_jet(&self, i: usize, z: Complex64, order: usize) -> CJet {
        let zj = CJet::variable(order, z);
        // First-order prediction: defect at w = 0 divided by the w-slope.
        let mut w = {
            let z0 = CJet::variable(0, z);
            let w0 = CJet::zeros(0);
            let (f, fw) = self.defect(i, &z0, &w0);
            CJet::constant(order, -f.val() / fw.val())
        };
        let mut last = f64::INFINITY;
        for _ in 0..60 {
            let (f, fw) = self.defect(i, &zj, &w);
            let step = f.mul(&fw.recip());
            w = w.sub(&step);
            last = cjet_mag(&step);
            if last <= 1e-16 * (1.0 + cjet_mag(&w)) {
                return w;
            }
        }
        assert!(
            last <= 1e-12 * (1.0 + cjet_mag(&w)),
            "neck sheet iteration stalled at step {last:.3e}"
        );
        w
    }

    pub fn sheet(self: &Arc<Self>, i: usize) -> Arc<dyn HoloJet> {
        let shape = self.clone();
        Arc::new(SheetOverLine { shape, line: i })
    }
}

struct SheetOverLine {
    shape: Arc<NeckShape>,
    line: usize,
}

impl HoloJet for SheetOverLine {
    fn cjet(&self, z: Complex64, order: usize) -> CJet {
        self.shape.sheet_jet(self.line, z, order)
    }
}

/// Quadratic necks in coordinates aligned with the two tangent lines, where
/// the level set is the exact hyperbola zt * wt = eta_hat.  Used for the
/// neck core between the two graph regions and as an oracle for the
/// Newton-continued sheets.
pub struct AlignedNeck {
    pub v1: [Complex64; 2],
    pub v2: [Complex64; 2],
    /// Hermitian overlaps <v1,v2> and <v2,v1> with the opposite line.
    pub c12: Complex64,
    pub c21: Complex64,
    /// Hyperbola constant in rescaled aligned coordinates.
    pub eta_hat: Complex64,
}

impl AlignedNeck {
    pub fn new(shape: &NeckShape) -> AlignedNeck {
        assert!(matches!(shape.variant, Variant::Quadratic));
        assert_eq!(shape.lines.len(), 2);
        let v1 = shape.lines[0].dir;
        let v2 = shape.lines[1].dir;
        let l1 = shape.lines[0].form;
        let l2 = shape.lines[1].form;
        // prod l_j (zt v1 + wt v2) = zt wt l1(v2) l2(v1).
        let coupling = (l1[0] * v2[0] + l1[1] * v2[1]) * (l2[0] * v1[0] + l2[1] * v1[1]);
        let eta_hat = Complex64::from(shape.eta / (shape.scale * shape.scale)) / coupling;
        AlignedNeck {
            v1,
            v2,
            c12: v1[0] * v2[0].conj() + v1[1] * v2[1].conj(),
            c21: v2[0] * v1[0].conj() + v2[1] * v1[1].conj(),
            eta_hat,
        }
    }

    /// Rescaled ambient offset of the aligned point (zt, eta_hat/zt).
    pub fn point(&self, zt: Complex64) -> [Complex64; 2] {
        let wt = self.eta_hat / zt;
        [
            zt * self.v1[0] + wt * self.v2[0],
            zt * self.v1[1] + wt * self.v2[1],
        ]
    }

    /// Complex velocity d(point)/d(zt).
    pub fn velocity(&self, zt: Complex64) -> [Complex64; 2] {
        let dw = -self.eta_hat / (zt * zt);
        [
            self.v1[0] + dw * self.v2[0],
            self.v1[1] + dw * self.v2[1],
        ]
    }

    /// Footprint of the hyperbola point in the frame of line 1 or 2.
    pub fn footprint(&self, end: usize, zt: Complex64) -> Complex64 {
        let wt = self.eta_hat / zt;
        match end {
            0 => zt + wt * self.c21,
            _ => wt + zt * self.c12,
        }
    }

    /// Radius s such that the point at zt = s e^{iu} has |footprint| = rho
    /// in the frame of the given end, together with ds/du.  Newton on the
    /// squared footprint radius; the hyperbola term is a tiny perturbation,
    /// so three or four steps reach machine accuracy.
    pub fn cut_radius(&self, end: usize, u: f64, rho: f64) -> (f64, f64) {
        // In the end-2 frame the footprint is dominated by wt = eta_hat/zt,
        // so |zt| starts near |eta_hat|/rho instead of rho.
        let mut s = match end {
            0 => rho,
            _ => self.eta_hat.norm() / rho,
        };
        let eiu = Complex64::from_polar(1.0, u);
        for _ in 0..40 {
            let zt = s * eiu;
            let f = self.footprint(end, zt);
            // d(footprint)/ds along the ray; d(1/zt)/ds = -e^{iu}/zt^2.
            let dfs = match end {
                0 => eiu * (Complex64::ONE - self.c21 * self.eta_hat / (zt * zt)),
                _ => eiu * (self.c12 - self.eta_hat / (zt * zt)),
            };
            let g = f.norm_sqr() - rho * rho;
            let dg = 2.0 * (f.conj() * dfs).re;
            let step = g / dg;
            s -= step;
            if step.abs() <= 1e-15 * s {
                break;
            }
        }
        // Implicit derivative of the cut radius in the angle.
        let zt = s * eiu;
        let f = self.footprint(end, zt);
        let dfs = match end {
            0 => eiu * (Complex64::ONE - self.c21 * self.eta_hat / (zt * zt)),
            _ => eiu * (self.c12 - self.eta_hat / (zt * zt)),
        };
        let dfu = match end {
            0 => Complex64::i() * (zt - self.c21 * self.eta_hat / zt),
            _ => Complex64::i() * (-self.eta_hat / zt + self.c12 * zt),
        };
        let gs = 2.0 * (f.conj() * dfs).re;
        let gu = 2.0 * (f.conj() * dfu).re;
        (s, -gu / gs)
    }
}

/// The seed surface as a holomorphic graph over one tangent line, in the
/// rescaled unitary frame of that line.
pub struct SeedSheet {
    pub cfg: Config,
    pub line: LineFrame,
    pub scale: f64,
}

impl SeedSheet {
    /// Newton for the domain offset whose footprint is z.
    pub fn solve_d(&self, z: Complex64) -> Complex64 {
        let c = [
            self.line.dir[0].conj() / self.scale,
            self.line.dir[1].conj() / self.scale,
        ];
        let mut d = z * self.scale / self.line.speed();
        let mut ok = false;
        for _ in 0..50 {
            let jets = seed_offset_jet(&self.line.zero, &self.cfg, 1, d);
            let foot = jets[0].val() * c[0] + jets[1].val() * c[1];
            let slope = jets[0].coeff(1) * c[0] + jets[1].coeff(1) * c[1];
            let step = (foot - z) / slope;
            d -= step;
            if step.norm() <= 1e-15 * d.norm() {
                ok = true;
                break;
            }
        }
        assert!(ok, "seed footprint inversion stalled at footprint {z}");
        d
    }
}

impl HoloJet for SeedSheet {
    fn cjet(&self, z: Complex64, order: usize) -> CJet {
        let d = self.solve_d(z);
        let jets = seed_offset_jet(&self.line.zero, &self.cfg, order.max(1), d);
        let inv = 1.0 / self.scale;
        let foot = jets[0]
            .scale(self.line.dir[0].conj() * inv)
            .add(&jets[1].scale(self.line.dir[1].conj() * inv));
        let height = jets[0]
            .scale(self.line.normal[0].conj() * inv)
            .add(&jets[1].scale(self.line.normal[1].conj() * inv));
        // Reparametrize the height by the footprint increment.  The jets
        // stay fully accurate at heights far below |z| because both parts
        // are linear images of offset jets built for exactly that regime.
        let dz = foot.sub(&CJet::constant(foot.order(), foot.val()));
        height.compose(&dz.revert())
    }
}
