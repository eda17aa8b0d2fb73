//! Chooses the geometric parameters of every neck: the reserved ball
//! radius, the opening, and the collar half-width, all driven by
//! measurements of the actual sheets rather than by a priori estimates.
//!
//! The reserved ball B(p, 100 r) must clear the rest of the surface, the
//! two collar sheets must pass the gluing gates, and the synthesized
//! metric must fit inside this neck's share of the total decay budget.
//! The radius starts from a clearance cap and shrinks by measured
//! overshoot; the opening is the largest value under r^2 / 100 that
//! passes every gate, found by halving.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;

use crate::config::Config;
use crate::glue::{GlueInput, Gluing, HoloJet};
use crate::kahler::structure_jets;
use crate::slitplane::{seed, DomainCurve};
use crate::{Error, Result};

use super::lines::{sites, SingularSite};
use super::necks::{NeckShape, SeedSheet};

fn dist4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    (0..4).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum::<f64>().sqrt()
}

fn image_point(q: [Complex64; 2]) -> [f64; 4] {
    [q[0].re, q[0].im, q[1].re, q[1].im]
}

/// Least distance from p to the image of the domain boundary, by a coarse
/// scan and two zoom rounds.  The image curve moves at speed up to a few
/// hundred near the outer rim, so a plain 720-point scan alone could
/// overestimate the minimum badly.
fn boundary_image_distance(cfg: &Config, p: &[f64; 4]) -> f64 {
    let curve = DomainCurve::from_config(cfg);
    let at = |t: f64| dist4(&image_point(seed(curve.boundary(t), cfg)), p);
    // Stay strictly inside (-pi, pi): the corner itself maps to the
    // puncture at the origin and is covered by the origin term.
    let mut lo = -PI + 1e-6;
    let mut hi = PI - 1e-6;
    let mut best = f64::INFINITY;
    let mut best_t = 0.0;
    for round in 0..3 {
        let n = if round == 0 { 720 } else { 48 };
        let step = (hi - lo) / n as f64;
        for j in 0..=n {
            let t = lo + step * j as f64;
            let d = at(t);
            if d < best {
                best = d;
                best_t = t;
            }
        }
        lo = (best_t - 1.5 * step).max(-PI + 1e-6);
        hi = (best_t + 1.5 * step).min(PI - 1e-6);
    }
    best
}

/// Everything the reserved ball must stay away from: the other crossings,
/// the origin where the ends accumulate, the boundary image, and the stray
/// root branches of the seed lying over the same first coordinate.
pub fn site_clearance(cfg: &Config, all: &[SingularSite], idx: usize) -> f64 {
    let me = &all[idx];
    let origin = [0.0; 4];
    let mut d = dist4(&me.point, &origin);
    for (j, other) in all.iter().enumerate() {
        if j != idx {
            d = d.min(dist4(&me.point, &other.point));
        }
    }
    d = d.min(boundary_image_distance(cfg, &me.point));
    // The first coordinate z^p takes the same value on p rays; the sheets
    // over the roots outside this cluster pass the ball at distance about
    // |g| there.
    let p = cfg.variant.power();
    let z0 = me.lines[0].zero.z;
    for m in 1..p {
        let w = z0 * Complex64::from_polar(1.0, TAU * m as f64 / p as f64);
        if me.lines.iter().any(|l| (l.zero.z - w).norm() < 1e-6) {
            continue;
        }
        d = d.min(dist4(&image_point(seed(w, cfg)), &me.point));
    }
    d
}

/// Normal half-width of the collar where the gluing mask may vary.  Two
/// tubes of half-width 2 sigma around sheets whose planes open at angle
/// >= separation must stay disjoint; at the inner support edge the planes
/// are 3 * separation apart, so 0.6 leaves a margin of the same size.
fn collar_half_width(cfg: &Config, site: &SingularSite) -> f64 {
    cfg.sigma().min(0.6 * site.separation)
}

/// Sample points of the collar annulus, concentrated toward the inner edge
/// where the neck term peaks.
fn annulus_probe() -> Vec<Complex64> {
    let mut out = Vec::new();
    for (k, &r) in [1.25, 2.2, 4.0, 7.0, 9.7].iter().enumerate() {
        for j in 0..6 {
            let t = TAU * (j as f64 + 0.3) / 6.0 + 0.17 * k as f64;
            out.push(Complex64::from_polar(r, t));
        }
    }
    out
}

fn sheet_norm(sheet: &dyn HoloJet, order: usize) -> f64 {
    let mut worst = 0.0f64;
    for z in annulus_probe() {
        let (u, v) = sheet.cjet(z, order).to_real_jets(order);
        worst = worst.max(u.cn_norm(order)).max(v.cn_norm(order));
    }
    worst
}

fn sheet_c0(sheet: &dyn HoloJet) -> f64 {
    annulus_probe()
        .into_iter()
        .map(|z| sheet.cjet(z, 0).val().norm())
        .fold(0.0, f64::max)
}

fn sheet_slope(sheet: &dyn HoloJet) -> f64 {
    annulus_probe()
        .into_iter()
        .map(|z| sheet.cjet(z, 1).coeff(1).norm())
        .fold(0.0, f64::max)
}

/// Grid over the region where the glued form differs from the symplectic
/// one: both radial mask ramps, the sheet blend ring, and the normal ramp
/// between sigma and 2 sigma.
fn collar_grid(sigma: f64) -> Vec<[f64; 4]> {
    let mut out = Vec::new();
    for (k, &rho) in [3.35, 3.8, 4.5, 5.6, 6.6].iter().enumerate() {
        for a in 0..3 {
            let t = 0.31 + 0.47 * k as f64 + TAU * a as f64 / 3.0;
            let (x1, x2) = (rho * t.cos(), rho * t.sin());
            out.push([x1, x2, 0.0, 0.0]);
            for (b, &q) in [0.75, 1.3, 1.7].iter().enumerate() {
                let u = 0.45 + 2.1 * b as f64 + 0.6 * a as f64;
                out.push([x1, x2, q * sigma * u.cos(), q * sigma * u.sin()]);
            }
        }
    }
    out
}

/// Grid C^n distance of the synthesized metric from the flat one over the
/// collar support, in the rescaled ambient coordinates of the ball.
fn metric_decay(gluing: &Gluing, order: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in collar_grid(gluing.sigma) {
        let acs = structure_jets(&gluing.omega_euclid, p, order)?;
        for i in 0..4 {
            for j in 0..4 {
                let delta = if i == j { 1.0 } else { 0.0 };
                let dev = &acs.gram.0[i][j] - &crate::jet::Jet::constant(order, delta);
                worst = worst.max(dev.cn_norm(order));
            }
        }
    }
    Ok(worst)
}

/// One glued collar: the sheet pair over a tangent line together with its
/// measured certificates.
pub struct LinePlan {
    pub line: usize,
    pub gluing: Arc<Gluing>,
    /// Grid C^kbar distance of the synthesized metric from the flat one.
    pub metric_distance: f64,
    /// Largest first derivative of either sheet over the annulus; the
    /// graphicality slope of the collar.
    pub slope: f64,
}

pub struct NeckPlan {
    /// 1-based position in the schedule; the decay budget uses this.
    pub index: usize,
    pub site: SingularSite,
    pub kbar: usize,
    pub budget: f64,
    /// Ball scale: the chart unit is 10 r, the collar support stays inside
    /// |q - p| < 71 r, and the reserved ball is 100 r.
    pub r: f64,
    pub r_cap: f64,
    /// Neck opening in original coordinates.
    pub eta: f64,
    pub sigma: f64,
    pub shape: Arc<NeckShape>,
    pub lines: Vec<LinePlan>,
}

impl NeckPlan {
    pub fn scale(&self) -> f64 {
        10.0 * self.r
    }

    pub fn worst_decay(&self) -> f64 {
        self.lines
            .iter()
            .map(|l| l.metric_distance)
            .fold(0.0, f64::max)
    }
}

pub struct Schedule {
    pub necks: Vec<NeckPlan>,
    /// Sum of the per-neck metric distances; certified below epsilon.
    pub total_decay: f64,
}

fn build_lines(
    cfg: &Config,
    site: &SingularSite,
    r: f64,
    eta: f64,
    sigma: f64,
    kbar: usize,
) -> Result<(Arc<NeckShape>, Vec<LinePlan>)> {
    let scale = 10.0 * r;
    let shape = Arc::new(NeckShape::new(site, cfg.variant, scale, eta));
    let mut lines = Vec::new();
    for i in 0..site.lines.len() {
        let f = shape.sheet(i);
        let h: Arc<dyn HoloJet> = Arc::new(SeedSheet {
            cfg: cfg.clone(),
            line: site.lines[i].clone(),
            scale,
        });
        let slope = sheet_slope(f.as_ref()).max(sheet_slope(h.as_ref()));
        let input = GlueInput {
            f,
            h,
            eta: cfg.eta,
            big_n: kbar,
            sigma,
        };
        let gluing = Arc::new(Gluing::build(&input)?);
        let metric_distance = metric_decay(&gluing, kbar)?;
        lines.push(LinePlan {
            line: i,
            gluing,
            metric_distance,
            slope,
        });
    }
    Ok((shape, lines))
}

/// Schedule one site.  `index` is the 1-based neck index, `r_max` the
/// strict upper bound handed down by the previous neck.
pub fn plan_site(
    cfg: &Config,
    all: &[SingularSite],
    idx: usize,
    index: usize,
    r_max: f64,
) -> Result<NeckPlan> {
    let site = &all[idx];
    let (kbar, budget) = cfg.neck_budget(index);
    if kbar > 3 {
        return Err(Error::Schedule(format!(
            "neck {index} needs derivative order {kbar}, beyond the collar support"
        )));
    }
    let sigma = collar_half_width(cfg, site);
    let r_cap = (site_clearance(cfg, all, idx) / 300.0).min(r_max);
    let mut r = r_cap;

    // Seed curvature sets a floor on the sheet norms; pull the radius
    // under the gluing gate before trying any opening.  The norms scale
    // linearly in r, so this settles in one or two rounds.
    let norm_target = sigma / 400.0;
    for _ in 0..60 {
        let mut worst = 0.0f64;
        for line in &site.lines {
            let h = SeedSheet {
                cfg: cfg.clone(),
                line: line.clone(),
                scale: 10.0 * r,
            };
            worst = worst.max(sheet_norm(&h, kbar + 2));
        }
        if worst <= norm_target {
            break;
        }
        r *= (norm_target / worst * 0.8).clamp(1e-6, 0.5);
    }

    for _attempt in 0..24 {
        if !(r > 1e-100) {
            return Err(Error::Schedule(format!(
                "site {} radius collapsed below any representable scale",
                site.index
            )));
        }
        let eta_cap = r * r * 1e-2;
        let mut eta = eta_cap;
        let mut last_over = f64::NAN;
        // The sheet norm is linear in the opening; one probe at the cap
        // pins the opening where the gluing's norm gate sits.
        {
            let probe = Arc::new(NeckShape::new(site, cfg.variant, 10.0 * r, eta_cap));
            let n0 = sheet_norm(probe.sheet(0).as_ref(), kbar + 2);
            if n0 > 0.9 * sigma / 100.0 {
                eta = eta_cap * (0.9 * sigma / 100.0 / n0) * 0.9;
            }
        }
        while eta > eta_cap * 0.5f64.powi(60) {
            // Safety pre-gate: never pay for a full build while the first
            // neck sheet alone is over the norm limit.
            {
                let probe = Arc::new(NeckShape::new(site, cfg.variant, 10.0 * r, eta));
                if sheet_norm(probe.sheet(0).as_ref(), kbar + 2) > 0.9 * sigma / 100.0 {
                    eta *= 0.5;
                    continue;
                }
            }
            if let Ok((shape, lines)) = build_lines(cfg, site, r, eta, sigma, kbar) {
                let worst = lines
                    .iter()
                    .map(|l| l.metric_distance)
                    .fold(0.0, f64::max);
                if worst < budget {
                    return Ok(NeckPlan {
                        index,
                        site: site.clone(),
                        kbar,
                        budget,
                        r,
                        r_cap,
                        eta,
                        sigma,
                        shape,
                        lines,
                    });
                }
                last_over = worst;
                // Once the neck term is buried under the seed term the
                // distance no longer responds to the opening; the blend
                // of the two sheets carries the rest.
                let fc0 = (0..site.lines.len())
                    .map(|i| sheet_c0(shape.sheet(i).as_ref()))
                    .fold(0.0, f64::max);
                let hc0 = site
                    .lines
                    .iter()
                    .map(|line| {
                        sheet_c0(&SeedSheet {
                            cfg: cfg.clone(),
                            line: line.clone(),
                            scale: 10.0 * r,
                        })
                    })
                    .fold(0.0, f64::max);
                if fc0 < 0.25 * hc0 {
                    break;
                }
                // The distance responds linearly to the opening: jump to
                // the predicted pass with a safety half.
                eta *= (0.5 * budget / worst).clamp(1e-9, 0.5);
            } else {
                eta *= 0.5;
            }
        }
        // The leading contributions are linear in r: shrink by the
        // measured overshoot with a safety half.
        let factor = if last_over.is_finite() {
            (budget / last_over * 0.5).clamp(1e-8, 0.5)
        } else {
            0.5
        };
        r *= factor;
    }
    Err(Error::Schedule(format!(
        "site {} exhausted its radius search without meeting the budget {budget:.3e}",
        site.index
    )))
}

pub fn schedule(cfg: &Config) -> Result<Schedule> {
    if cfg.necks == 0 {
        return Ok(Schedule {
            necks: Vec::new(),
            total_decay: 0.0,
        });
    }
    let all = sites(cfg)?;
    if cfg.necks > all.len() {
        return Err(Error::Schedule(format!(
            "{} necks requested but only {} transversal crossings exist",
            cfg.necks,
            all.len()
        )));
    }
    let mut necks: Vec<NeckPlan> = Vec::new();
    let mut r_max = f64::INFINITY;
    for k in 1..=cfg.necks {
        let plan = plan_site(cfg, &all, k - 1, k, r_max)?;
        // Keep the ball scales strictly decreasing along the schedule.
        r_max = 0.75 * plan.r;
        necks.push(plan);
    }
    for i in 0..necks.len() {
        for j in i + 1..necks.len() {
            let d = dist4(&necks[i].site.point, &necks[j].site.point);
            if d <= 100.0 * (necks[i].r + necks[j].r) {
                return Err(Error::Schedule(format!(
                    "reserved balls of necks {} and {} overlap",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let total_decay: f64 = necks.iter().map(|n| n.worst_decay()).sum();
    if total_decay >= cfg.epsilon {
        return Err(Error::Schedule(format!(
            "summed metric decay {total_decay:.3e} reaches the budget {:.3e}",
            cfg.epsilon
        )));
    }
    Ok(Schedule { necks, total_decay })
}
