//! Composite quadrature over surface patches.
//!
//! Every patch is a rectangle (u, v) with v an angle of period 2 pi, mapped
//! to the surface with its tangent vectors.  Integration is 16-point
//! Gauss-Legendre in u, composited over the patch's break structure, times
//! the trapezoid rule in v; both directions are doubled together until the
//! integrals settle to the requested relative tolerance.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use crate::Result;

pub struct PatchPoint {
    pub point: [f64; 4],
    pub tu: [f64; 4],
    pub tv: [f64; 4],
}

/// A parametrized piece of the surface.  v is periodic with period 2 pi;
/// breaks mark radii where the integrand loses smoothness, so composite
/// panels never straddle them.
pub trait Patch: Send + Sync {
    fn name(&self) -> String;
    fn u_range(&self) -> (f64, f64);
    fn u_breaks(&self) -> Vec<f64> {
        Vec::new()
    }
    fn eval(&self, u: f64, v: f64) -> PatchPoint;
}

/// Nodes and weights of 16-point Gauss-Legendre on [-1, 1], by Newton on
/// the Legendre recurrence from the Chebyshev initial guesses.
fn gauss16() -> &'static [(f64, f64); 16] {
    static TABLE: OnceLock<[(f64, f64); 16]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = 16usize;
        let mut out = [(0.0, 0.0); 16];
        for k in 0..n {
            let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..60 {
                let mut p0 = 1.0f64;
                let mut p1 = x;
                for m in 2..=n {
                    let mf = m as f64;
                    let p2 = ((2.0 * mf - 1.0) * x * p1 - (mf - 1.0) * p0) / mf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() <= 1e-16 {
                    break;
                }
            }
            out[k] = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        out
    })
}

/// Sorted panel edges: the u range split at every interior break.
fn panel_edges(patch: &dyn Patch) -> Vec<f64> {
    let (lo, hi) = patch.u_range();
    let mut edges = vec![lo];
    let mut breaks = patch.u_breaks();
    breaks.sort_by(f64::total_cmp);
    for b in breaks {
        if b > lo + 1e-300 && b < hi - 1e-300 {
            edges.push(b);
        }
    }
    edges.push(hi);
    edges
}

pub struct QuadOutcome<const M: usize> {
    pub values: [f64; M],
    /// Relative change of the last doubling, the convergence certificate.
    pub rel_step: f64,
    pub nodes: usize,
}

fn pass<const M: usize>(
    patch: &dyn Patch,
    f: &dyn Fn(&PatchPoint) -> Result<[f64; M]>,
    edges: &[f64],
    splits: usize,
    nv: usize,
) -> Result<([f64; M], usize)> {
    let table = gauss16();
    let mut total = [0.0f64; M];
    let mut nodes = 0usize;
    for w in edges.windows(2) {
        for s in 0..splits {
            let a = w[0] + (w[1] - w[0]) * s as f64 / splits as f64;
            let b = w[0] + (w[1] - w[0]) * (s + 1) as f64 / splits as f64;
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for &(x, wu) in table.iter() {
                let u = mid + half * x;
                for j in 0..nv {
                    let v = -PI + TAU * (j as f64 + 0.5) / nv as f64;
                    let p = patch.eval(u, v);
                    let vals = f(&p)?;
                    let weight = wu * half * TAU / nv as f64;
                    for m in 0..M {
                        total[m] += weight * vals[m];
                    }
                    nodes += 1;
                }
            }
        }
    }
    Ok((total, nodes))
}

/// Integrate a vector of integrands over the patch, doubling panels and
/// angular nodes together until the worst relative change drops below
/// `rel_tol` (or the level budget runs out; the caller inspects rel_step).
pub fn integrate<const M: usize>(
    patch: &dyn Patch,
    f: &dyn Fn(&PatchPoint) -> Result<[f64; M]>,
    rel_tol: f64,
) -> Result<QuadOutcome<M>> {
    let edges = panel_edges(patch);
    let mut splits = 1usize;
    let mut nv = 32usize;
    let (mut values, mut nodes) = pass(patch, f, &edges, splits, nv)?;
    let mut rel_step = f64::INFINITY;
    for _ in 0..7 {
        splits *= 2;
        nv *= 2;
        let (next, n) = pass(patch, f, &edges, splits, nv)?;
        nodes += n;
        let scale = next
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(1e-300);
        rel_step = (0..M)
            .map(|m| (next[m] - values[m]).abs() / scale)
            .fold(0.0, f64::max);
        values = next;
        if rel_step <= rel_tol {
            break;
        }
    }
    Ok(QuadOutcome {
        values,
        rel_step,
        nodes,
    })
}

/// Largest value of `f` over a fixed (midpoint x uniform-angle) sample grid,
/// panel-aware in u.  Deterministic by construction.
pub fn sup_on_grid(
    patch: &dyn Patch,
    f: &dyn Fn(&PatchPoint) -> Result<f64>,
    per_panel: usize,
    nv: usize,
) -> Result<f64> {
    let edges = panel_edges(patch);
    let mut worst = 0.0f64;
    for w in edges.windows(2) {
        for s in 0..per_panel {
            let u = w[0] + (w[1] - w[0]) * (s as f64 + 0.5) / per_panel as f64;
            for j in 0..nv {
                let v = -PI + TAU * (j as f64 + 0.37) / nv as f64;
                worst = worst.max(f(&patch.eval(u, v))?);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Flat unit disk in the (x1, x2) plane.
    struct FlatDisk;

    impl Patch for FlatDisk {
        fn name(&self) -> String {
            "flat-disk".into()
        }
        fn u_range(&self) -> (f64, f64) {
            (0.0, 1.0)
        }
        fn eval(&self, u: f64, v: f64) -> PatchPoint {
            let (s, c) = v.sin_cos();
            PatchPoint {
                point: [u * c, u * s, 0.0, 0.0],
                tu: [c, s, 0.0, 0.0],
                tv: [-u * s, u * c, 0.0, 0.0],
            }
        }
    }

    fn euclid_area(p: &PatchPoint) -> Result<[f64; 1]> {
        let dot = |a: &[f64; 4], b: &[f64; 4]| (0..4).map(|i| a[i] * b[i]).sum::<f64>();
        let e = dot(&p.tu, &p.tu) * dot(&p.tv, &p.tv) - dot(&p.tu, &p.tv).powi(2);
        Ok([e.max(0.0).sqrt()])
    }

    #[test]
    fn gauss_nodes_integrate_high_degree_polynomials() {
        // 16-point Gauss is exact through degree 31.
        let mut sum = 0.0;
        for &(x, w) in gauss16() {
            sum += w * x.powi(30);
        }
        assert!((sum - 2.0 / 31.0).abs() < 1e-15);
        let total: f64 = gauss16().iter().map(|&(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-15);
    }

    #[test]
    fn unit_disk_area_is_pi() {
        let out = integrate(&FlatDisk, &euclid_area, 1e-12).unwrap();
        assert!((out.values[0] - PI).abs() < 1e-12 * PI);
        assert!(out.rel_step < 1e-12);
    }

    #[test]
    fn breaks_split_apart_a_kinked_integrand() {
        // |u - 1/3| integrated over the unit disk against plain area:
        // with the break the composite rule nails it quickly.
        struct Kinked;
        impl Patch for Kinked {
            fn name(&self) -> String {
                "kinked".into()
            }
            fn u_range(&self) -> (f64, f64) {
                (0.0, 1.0)
            }
            fn u_breaks(&self) -> Vec<f64> {
                vec![1.0 / 3.0]
            }
            fn eval(&self, u: f64, v: f64) -> PatchPoint {
                FlatDisk.eval(u, v)
            }
        }
        let f = |p: &PatchPoint| -> Result<[f64; 1]> {
            let r = (p.point[0] * p.point[0] + p.point[1] * p.point[1]).sqrt();
            Ok([(r - 1.0 / 3.0).abs() * r])
        };
        let out = integrate(&Kinked, &f, 1e-12).unwrap();
        // 2 pi int_0^1 |u - a| u du = 2 pi (a^3/3 + 1/3 - a/2) at a = 1/3.
        let exact = TAU * (1.0 / 81.0 + 1.0 / 3.0 - 1.0 / 6.0);
        assert!((out.values[0] - exact).abs() < 1e-12);
    }

    #[test]
    fn sup_grid_sees_the_peak() {
        let f = |p: &PatchPoint| -> Result<f64> {
            Ok(p.point[0].hypot(p.point[1]))
        };
        let sup = sup_on_grid(&FlatDisk, &f, 8, 16).unwrap();
        assert!(sup > 0.9 && sup < 1.0);
    }
}
