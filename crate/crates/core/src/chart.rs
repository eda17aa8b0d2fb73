//! Tubular-neighborhood charts around surfaces given as graphs.
//!
//! A surface {(x1, x2, zeta(x1, x2))} gets the chart
//!     Y(x) = (x1, x2, zeta(x1, x2)) + x3 xi(x1, x2) + x4 tau(x1, x2)
//! where (xi, tau) is the orthonormal frame of the normal bundle obtained by
//! projecting e3, e4 off the tangent space and orthogonalizing.  Everything
//! is carried out in jet arithmetic, so Y, its inverse and all their
//! derivatives are available to the form machinery; the surface itself is
//! exactly {x3 = x4 = 0} in these coordinates.

use std::sync::Arc;

use crate::config::{NEWTON_MAX_ITERS, NEWTON_TOL};
use crate::forms::MapField;
use crate::jet::{invert4, invert_map, Jet};
use crate::{Error, Result};

/// The graph data: jets of (zeta1, zeta2) as functions of the first two
/// variables, reported as four-variable jets constant in the last two.
pub trait PlaneMap: Send + Sync {
    fn jet(&self, x: [f64; 2], order: usize) -> [Jet; 2];
}

pub struct FnGraph<F>(pub F);

impl<F: Fn([f64; 2], usize) -> [Jet; 2] + Send + Sync> PlaneMap for FnGraph<F> {
    fn jet(&self, x: [f64; 2], order: usize) -> [Jet; 2] {
        (self.0)(x, order)
    }
}

fn dot4(a: &[Jet; 4], b: &[Jet; 4]) -> Jet {
    let mut out = &a[0] * &b[0];
    for i in 1..4 {
        out = &out + &(&a[i] * &b[i]);
    }
    out
}

pub struct Chart {
    graph: Arc<dyn PlaneMap>,
}

impl Chart {
    pub fn new(graph: Arc<dyn PlaneMap>) -> Chart {
        Chart { graph }
    }

    /// Tangent jets of the graph embedding at (x1, x2), one order below the
    /// zeta jets that produced them.
    fn tangents(zeta: &[Jet; 2], order: usize) -> [[Jet; 4]; 2] {
        std::array::from_fn(|a| {
            [
                Jet::constant(order, if a == 0 { 1.0 } else { 0.0 }),
                Jet::constant(order, if a == 1 { 1.0 } else { 0.0 }),
                zeta[0].derivative_jet(a),
                zeta[1].derivative_jet(a),
            ]
        })
    }

    /// Orthonormal normal frame (xi, tau) at (x1, x2) as jets.
    ///
    /// xi is the normalized projection of e3 off the tangent plane and tau
    /// completes it; when zeta == 0 this reduces to (e3, e4) exactly.
    pub fn frame(&self, x: [f64; 2], order: usize) -> [[Jet; 4]; 2] {
        let zeta = self.graph.jet(x, order + 1);
        let [t1, t2] = Self::tangents(&zeta, order);
        let g11 = dot4(&t1, &t1);
        let g12 = dot4(&t1, &t2);
        let g22 = dot4(&t2, &t2);
        let det_inv = (&(&g11 * &g22) - &(&g12 * &g12)).recip();

        // Project v off the tangent plane: v - sum_a c_a t_a with the
        // coefficients solving the 2x2 Gram system.
        let project = |b1: &Jet, b2: &Jet, v: &[Jet; 4]| -> [Jet; 4] {
            let c1 = &(&(&g22 * b1) - &(&g12 * b2)) * &det_inv;
            let c2 = &(&(&g11 * b2) - &(&g12 * b1)) * &det_inv;
            std::array::from_fn(|i| &v[i] - &(&(&c1 * &t1[i]) + &(&c2 * &t2[i])))
        };

        let ord = g11.order();
        let e3: [Jet; 4] = std::array::from_fn(|i| Jet::constant(ord, ((i == 2) as u8).into()));
        let e4: [Jet; 4] = std::array::from_fn(|i| Jet::constant(ord, ((i == 3) as u8).into()));

        let p3 = project(&t1[2], &t2[2], &e3);
        let n3 = dot4(&p3, &p3).powf(-0.5);
        let xi: [Jet; 4] = std::array::from_fn(|i| &p3[i] * &n3);

        let mut p4 = project(&t1[3], &t2[3], &e4);
        let along = dot4(&p4, &xi);
        for (c, x) in p4.iter_mut().zip(&xi) {
            *c = &*c - &(&along * x);
        }
        let n4 = dot4(&p4, &p4).powf(-0.5);
        let tau: [Jet; 4] = std::array::from_fn(|i| &p4[i] * &n4);
        [xi, tau]
    }

    /// Jets of the chart map Y at x.
    pub fn y_jet(&self, x: [f64; 4], order: usize) -> [Jet; 4] {
        let zeta = self.graph.jet([x[0], x[1]], order);
        let [xi, tau] = self.frame([x[0], x[1]], order);
        let x3 = Jet::variable(order, 2, x[2]);
        let x4 = Jet::variable(order, 3, x[3]);
        std::array::from_fn(|i| {
            let mut out = match i {
                0 => Jet::variable(order, 0, x[0]),
                1 => Jet::variable(order, 1, x[1]),
                2 => zeta[0].clone(),
                _ => zeta[1].clone(),
            };
            out = &out + &(&x3 * &xi[i]);
            &out + &(&x4 * &tau[i])
        })
    }

    pub fn y_value(&self, x: [f64; 4]) -> [f64; 4] {
        let y = self.y_jet(x, 0);
        std::array::from_fn(|i| y[i].val())
    }

    /// Solve Y(x) = q by Newton iteration from the given starting point.
    pub fn invert_from(&self, q: [f64; 4], guess: [f64; 4]) -> Result<[f64; 4]> {
        let mut x = guess;
        for _ in 0..NEWTON_MAX_ITERS {
            let y = self.y_jet(x, 1);
            let r: [f64; 4] = std::array::from_fn(|i| y[i].val() - q[i]);
            let sup = r.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            if sup <= NEWTON_TOL {
                return Ok(x);
            }
            let jac: [[f64; 4]; 4] = std::array::from_fn(|i| y[i].grad());
            let inv = invert4(&jac).ok_or_else(|| {
                Error::NewtonDiverged("singular chart Jacobian".into())
            })?;
            for i in 0..4 {
                for (j, rj) in r.iter().enumerate() {
                    x[i] -= inv[i][j] * rj;
                }
            }
        }
        Err(Error::NewtonDiverged(format!(
            "chart inversion stalled at q = {q:?}"
        )))
    }

    /// Newton inversion seeded by projecting q onto the graph frame.
    pub fn invert(&self, q: [f64; 4]) -> Result<[f64; 4]> {
        let base = [q[0], q[1], 0.0, 0.0];
        let zeta = self.graph.jet([q[0], q[1]], 0);
        let [xi, tau] = self.frame([q[0], q[1]], 0);
        let rest = [
            0.0,
            0.0,
            q[2] - zeta[0].val(),
            q[3] - zeta[1].val(),
        ];
        let dot = |v: &[Jet; 4]| (0..4).map(|i| rest[i] * v[i].val()).sum::<f64>();
        let guess = [base[0], base[1], dot(&xi), dot(&tau)];
        self.invert_from(q, guess)
    }

    /// Jets of the inverse map at Y(x), for a source point x.
    pub fn x_jet(&self, x: [f64; 4], order: usize) -> [Jet; 4] {
        invert_map(&self.y_jet(x, order), x)
    }

    /// Area factor a(x1, x2) = 1 + det D zeta: the coefficient of the
    /// pullback of dX1^dX2 + dX3^dX4 to the graph in its own parameters.
    pub fn area_factor(&self, x: [f64; 2], order: usize) -> Jet {
        let zeta = self.graph.jet(x, order + 1);
        let d11 = zeta[0].derivative_jet(0);
        let d12 = zeta[0].derivative_jet(1);
        let d21 = zeta[1].derivative_jet(0);
        let d22 = zeta[1].derivative_jet(1);
        &Jet::constant(order, 1.0) + &(&(&d11 * &d22) - &(&d12 * &d21))
    }
}

impl MapField for Chart {
    fn jet(&self, p: [f64; 4], order: usize) -> [Jet; 4] {
        self.y_jet(p, order)
    }
}

/// The inverse chart as a map field, for pushing chart-coordinate forms to
/// the ambient space.  Inversion failures are hard errors: callers must stay
/// inside the chart's validity region.
pub struct InverseChart(pub Arc<Chart>);

impl MapField for InverseChart {
    fn jet(&self, q: [f64; 4], order: usize) -> [Jet; 4] {
        let x = self.0.invert(q).expect("inverse chart left its validity region");
        invert_map(&self.0.y_jet(x, order), x)
    }
}
