//! The ambient 2-form of the desingularized surface: the standard Kahler
//! form everywhere except inside the collar tubes, where the glued collar
//! forms take over.  The tube supports are pairwise disjoint, so the form
//! is the plain sum omega0 + sum_z (omega_z - omega0) with each summand
//! transported from its collar coordinates by the affine frame map.

use std::sync::Arc;

use crate::forms::{standard_symplectic, Field, FnField, FormField, MapField};
use crate::glue::Gluing;
use crate::jet::Jet;
use crate::kahler::{polar_acs, skew_matrix, Acs};
use crate::linalg::Mat4;
use crate::Result;

use super::lines::LineFrame;
use super::schedule::NeckPlan;

/// Real orthogonal matrix of the line's unitary frame: columns carry the
/// complex direction and normal, so collar coordinates x map to ambient
/// offsets U x.  Lies in U(2), hence preserves the standard form.
pub fn frame_matrix(line: &LineFrame) -> Mat4<f64> {
    let d = line.dir;
    let n = line.normal;
    Mat4([
        [d[0].re, -d[0].im, n[0].re, -n[0].im],
        [d[0].im, d[0].re, n[0].im, n[0].re],
        [d[1].re, -d[1].im, n[1].re, -n[1].im],
        [d[1].im, d[1].re, n[1].im, n[1].re],
    ])
}

/// One collar tube: the gluing of a single tangent line together with the
/// frame that places its collar coordinates in the ambient space.
pub struct ZoneFrame {
    pub point: [f64; 4],
    /// Chart unit 10 r.
    pub scale: f64,
    pub sigma: f64,
    pub u: Mat4<f64>,
    pub gluing: Arc<Gluing>,
}

impl ZoneFrame {
    /// Collar coordinates of the ambient point: x = U^T (q - p) / scale.
    pub fn coords(&self, q: &[f64; 4]) -> [f64; 4] {
        let o: [f64; 4] = std::array::from_fn(|i| q[i] - self.point[i]);
        std::array::from_fn(|i| {
            (0..4).map(|j| self.u.0[j][i] * o[j]).sum::<f64>() / self.scale
        })
    }

    /// Whether the glued form can differ from the standard one at x: the
    /// mask varies only on the footprint ring (3, 7) within normal
    /// distance 2 sigma of the interpolated graph, whose height stays
    /// under sigma / 2.
    pub fn in_support(&self, x: &[f64; 4]) -> bool {
        let r12 = x[0] * x[0] + x[1] * x[1];
        let r34 = x[2] * x[2] + x[3] * x[3];
        r12 > 9.0 && r12 < 49.0 && r34 < (2.5 * self.sigma) * (2.5 * self.sigma)
    }
}

/// The affine collar-coordinate map as a jet field, for pulling collar
/// forms back to ambient coordinates.
struct CollarCoords(Arc<ZoneFrame>);

impl MapField for CollarCoords {
    fn jet(&self, p: [f64; 4], order: usize) -> [Jet; 4] {
        let z = &self.0;
        let x = z.coords(&p);
        std::array::from_fn(|i| {
            let mut out = Jet::constant(order, x[i]);
            for j in 0..4 {
                out.add_scaled(&Jet::variable(order, j, 0.0), z.u.0[j][i] / z.scale);
            }
            out
        })
    }
}

pub struct GlobalForm {
    zones: Vec<Arc<ZoneFrame>>,
    form: FormField,
}

pub fn zone_frames(plan: &NeckPlan) -> Vec<ZoneFrame> {
    plan.lines
        .iter()
        .map(|l| ZoneFrame {
            point: plan.site.point,
            scale: plan.scale(),
            sigma: plan.sigma,
            u: frame_matrix(&plan.site.lines[l.line]),
            gluing: l.gluing.clone(),
        })
        .collect()
}

impl GlobalForm {
    pub fn new(zones: Vec<ZoneFrame>) -> GlobalForm {
        let zones: Vec<Arc<ZoneFrame>> = zones.into_iter().map(Arc::new).collect();
        let mut form = standard_symplectic();
        for z in &zones {
            let diff = z.gluing.omega_euclid.sub(&standard_symplectic());
            let map: Arc<dyn MapField> = Arc::new(CollarCoords(z.clone()));
            let pulled = diff.pullback(map).scale(z.scale * z.scale);
            // Gate every coefficient on the support tube: outside it the
            // difference is certified below 1e-12 and is taken as exactly
            // zero, which keeps far-field evaluation free of chart
            // inversions (and of their domain limits).
            let gated: Vec<Field> = (0..6)
                .map(|c| {
                    let inner = pulled.coeff(c).clone();
                    let zc = z.clone();
                    Arc::new(FnField(move |p: [f64; 4], order: usize| {
                        if zc.in_support(&zc.coords(&p)) {
                            inner.jet(p, order)
                        } else {
                            Jet::zeros(order)
                        }
                    })) as Field
                })
                .collect();
            form = form.add(&FormField::new(2, gated));
        }
        GlobalForm { zones, form }
    }

    pub fn from_plans(plans: &[NeckPlan]) -> GlobalForm {
        GlobalForm::new(plans.iter().flat_map(zone_frames).collect())
    }

    /// The form as a coefficient field, for certificates that want jets or
    /// pairings.
    pub fn form(&self) -> &FormField {
        &self.form
    }

    pub fn zones(&self) -> &[Arc<ZoneFrame>] {
        &self.zones
    }

    /// Index of the tube whose support covers q, if any; the supports are
    /// disjoint by the collar width schedule.
    pub fn zone_at(&self, q: &[f64; 4]) -> Option<usize> {
        self.zones.iter().position(|z| z.in_support(&z.coords(q)))
    }

    /// Skew matrix of the form at q through direct frame conjugation; the
    /// fast path for bulk quadrature.  A[i][j] = -omega(e_i, e_j), matching
    /// [`skew_matrix`].
    pub fn matrix(&self, q: &[f64; 4]) -> Mat4<f64> {
        let mut a = skew_matrix(&standard_symplectic(), *q);
        for z in &self.zones {
            let x = z.coords(q);
            if z.in_support(&x) {
                let ax = skew_matrix(&z.gluing.omega_euclid, x);
                let a0 = skew_matrix(&standard_symplectic(), x);
                let d = Mat4::from_fn(|i, j| ax.0[i][j] - a0.0[i][j]);
                let ud = z.u.matmul(&d).matmul(&z.u.transpose());
                a = Mat4::from_fn(|i, j| a.0[i][j] + ud.0[i][j]);
            }
        }
        a
    }

    /// Compatible pair (g, J) synthesized from the form at q.
    pub fn structure(&self, q: &[f64; 4]) -> Result<Acs> {
        polar_acs(&self.matrix(q))
    }
}
