//! Combinatorial triangle mesh of the desingularized surface.
//!
//! The mesh is a chain of vertex rings joined by a two-pointer zip
//! triangulation keyed on per-ring angle coordinates.  Vertices are shared
//! by index, never matched by position: the deepest neck rings live at
//! scales far below the f64 resolution of the ambient coordinates, where
//! any geometric weld would see coincident points.
//!
//! Construction, per treated crossing sheet:
//!   - the global shear-polar grid carries a ring and a spoke exactly
//!     through the zero, with guard rings/spokes sized from the local gaps
//!     (the innermost zeros pass within 0.02 of the domain rim, so a
//!     uniform grid cannot host them);
//!   - the star of the zero vertex is removed (one Euler unit per sheet)
//!     and the hexagonal link is zipped to geometric island rings that
//!     descend to the removed-disk rim |d| = d0;
//!   - the two rim rings of a crossing are joined by a tube of collar
//!     rings and core rings on the aligned hyperbola, with the one
//!     orientation reversal of the tube placed at the far cut, where the
//!     footprint chart of the second line takes over.
//!
//! Removing 2K stars and gluing K tubes (each an annulus) gives
//! chi = 1 - 2K with a single boundary loop, which `audit` certifies
//! combinatorially.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;

use crate::config::{Config, Variant};
use crate::slitplane::{seed, seed_offset_jet};
use crate::{Error, Result};

use super::lines::SingularSite;
use super::necks::{AlignedNeck, NeckShape};
use super::patches::NeckCollar;
use super::quad::Patch;
use super::schedule::Schedule;

pub struct MeshSurface {
    pub vertices: Vec<[f64; 4]>,
    pub triangles: Vec<[usize; 3]>,
}

/// Combinatorial census of the complex; `violations` lists every failure
/// of the oriented-manifold-with-boundary conditions.
#[derive(Debug, Clone)]
pub struct MeshStats {
    pub vertices: usize,
    pub triangles: usize,
    pub edges: usize,
    pub boundary_edges: usize,
    pub boundary_loops: usize,
    pub euler: i64,
    pub violations: Vec<String>,
}

impl MeshSurface {
    pub fn euler(&self) -> i64 {
        let mut edges = std::collections::BTreeSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn audit(&self) -> MeshStats {
        let mut violations = Vec::new();
        let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut undirected: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut touched = vec![false; self.vertices.len()];
        for (i, t) in self.triangles.iter().enumerate() {
            if t[0] == t[1] || t[1] == t[2] || t[2] == t[0] {
                violations.push(format!("triangle {i} is degenerate"));
                continue;
            }
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if a >= self.vertices.len() || b >= self.vertices.len() {
                    violations.push(format!("triangle {i} references a missing vertex"));
                    continue;
                }
                touched[a] = true;
                *directed.entry((a, b)).or_default() += 1;
                *undirected.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for (&(a, b), &c) in &directed {
            if c > 1 {
                violations.push(format!("edge {a}->{b} used {c} times with one orientation"));
            }
        }
        let mut boundary_edges = 0usize;
        let mut boundary_next: BTreeMap<usize, usize> = BTreeMap::new();
        for (&(a, b), &c) in &undirected {
            match c {
                1 => {
                    boundary_edges += 1;
                    // Recover the direction the lone triangle used.
                    let (x, y) = if directed.contains_key(&(a, b)) { (a, b) } else { (b, a) };
                    if boundary_next.insert(x, y).is_some() {
                        violations.push(format!("boundary branches at vertex {x}"));
                    }
                }
                2 => {}
                _ => violations.push(format!("edge {a}-{b} borders {c} triangles")),
            }
        }
        // Count boundary loops by walking the successor map.
        let mut boundary_loops = 0usize;
        let mut seen: BTreeMap<usize, bool> = BTreeMap::new();
        for &start in boundary_next.keys() {
            if seen.contains_key(&start) {
                continue;
            }
            boundary_loops += 1;
            let mut at = start;
            for _ in 0..=boundary_next.len() {
                seen.insert(at, true);
                match boundary_next.get(&at) {
                    Some(&n) => at = n,
                    None => {
                        violations.push(format!("boundary walk dead-ends at vertex {at}"));
                        break;
                    }
                }
                if at == start {
                    break;
                }
            }
            if at != start {
                violations.push(format!("boundary walk from {start} never closed"));
            }
        }
        for (v, t) in touched.iter().enumerate() {
            if !t {
                violations.push(format!("vertex {v} is isolated"));
            }
        }
        // Umbrella condition: around each vertex the incident triangles chain
        // into a single cycle (interior) or a single open fan (boundary).
        let mut around: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); self.vertices.len()];
        for t in &self.triangles {
            for k in 0..3 {
                let (v, p, q) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
                if around[v].insert(p, q).is_some() {
                    violations.push(format!("vertex {v} has two fans through neighbor {p}"));
                }
            }
        }
        for (v, succ) in around.iter().enumerate() {
            if succ.is_empty() {
                continue;
            }
            let indeg: std::collections::BTreeSet<usize> = succ.values().copied().collect();
            let starts: Vec<usize> = succ.keys().filter(|k| !indeg.contains(k)).copied().collect();
            let components = match starts.len() {
                0 => {
                    // All cycles: walk one and demand it covers everything.
                    let &s = succ.keys().next().unwrap();
                    let mut at = s;
                    let mut n = 0usize;
                    loop {
                        at = succ[&at];
                        n += 1;
                        if at == s || n > succ.len() {
                            break;
                        }
                    }
                    if n == succ.len() {
                        1
                    } else {
                        2
                    }
                }
                1 => {
                    let mut at = starts[0];
                    let mut n = 0usize;
                    while let Some(&nx) = succ.get(&at) {
                        at = nx;
                        n += 1;
                        if n > succ.len() {
                            break;
                        }
                    }
                    if n == succ.len() {
                        1
                    } else {
                        2
                    }
                }
                _ => 2,
            };
            if components != 1 {
                violations.push(format!("vertex {v} link is not a single fan"));
            }
        }
        MeshStats {
            vertices: self.vertices.len(),
            triangles: self.triangles.len(),
            edges: undirected.len(),
            boundary_edges,
            boundary_loops,
            euler: self.euler(),
            violations,
        }
    }
}

/// One vertex ring with its zip angles, strictly increasing up to one wrap.
#[derive(Clone)]
struct Ring {
    ids: Vec<usize>,
    ang: Vec<f64>,
}

impl Ring {
    fn rotated_ascending(&self) -> Ring {
        let n = self.ang.len();
        let mut drops = Vec::new();
        for i in 0..n {
            if self.ang[(i + 1) % n] <= self.ang[i] {
                drops.push((i + 1) % n);
            }
        }
        assert!(
            drops.len() <= 1,
            "ring angles are not cyclically increasing: {:?}",
            self.ang
        );
        let s = drops.first().copied().unwrap_or(0);
        Ring {
            ids: (0..n).map(|k| self.ids[(s + k) % n]).collect(),
            ang: (0..n).map(|k| self.ang[(s + k) % n]).collect(),
        }
    }
}

/// Triangulate the annulus between two rings listed counterclockwise in a
/// shared oriented chart, `inner` enclosed by `outer`.  Classic two-pointer
/// zip: always emits |inner| + |outer| positively oriented triangles.
fn zip_rings(tris: &mut Vec<[usize; 3]>, inner: &Ring, outer: &Ring) {
    let inn = inner.rotated_ascending();
    let out = outer.rotated_ascending();
    let n = inn.ids.len();
    let m = out.ids.len();
    assert!(n >= 3 && m >= 3, "rings too short to zip");
    // Outer angles lifted into [inner start, inner start + tau), then
    // rotated so the zip starts at the outer vertex nearest ahead.
    let base = inn.ang[0];
    let lift: Vec<f64> = out.ang.iter().map(|&a| base + (a - base).rem_euclid(TAU)).collect();
    let o0 = (0..m).min_by(|&i, &j| lift[i].partial_cmp(&lift[j]).unwrap()).unwrap();
    let oang = |k: usize| lift[(o0 + k % m) % m] + TAU * ((k / m) as f64);
    let oid = |k: usize| out.ids[(o0 + k % m) % m];
    let iang = |k: usize| inn.ang[k % n] + TAU * ((k / n) as f64);
    let iid = |k: usize| inn.ids[k % n];
    let mut i = 0usize;
    let mut o = 0usize;
    while i < n || o < m {
        let advance_inner = if i >= n {
            false
        } else if o >= m {
            true
        } else {
            iang(i + 1) <= oang(o + 1)
        };
        if advance_inner {
            tris.push([iid(i), oid(o), iid(i + 1)]);
            i += 1;
        } else {
            tris.push([iid(i), oid(o), oid(o + 1)]);
            o += 1;
        }
    }
}

struct Build {
    vertices: Vec<[f64; 4]>,
    /// Domain coordinate of grid vertices, for link angles; rings built in
    /// offset coordinates do not need one.
    domain: Vec<Complex64>,
    triangles: Vec<[usize; 3]>,
}

impl Build {
    fn vertex(&mut self, p: [f64; 4], z: Complex64) -> usize {
        self.vertices.push(p);
        self.domain.push(z);
        self.vertices.len() - 1
    }
}

fn domain_point(cfg: &Config, rr: f64, phi: f64) -> Complex64 {
    let (s, c) = phi.sin_cos();
    Complex64::new(
        cfg.curve_r + rr * c - cfg.curve_mu * rr * rr * s * s,
        rr * s,
    )
}

fn domain_polar(cfg: &Config, z: Complex64) -> (f64, f64) {
    let u = z.re - cfg.curve_r + cfg.curve_mu * z.im * z.im;
    (u.hypot(z.im), z.im.atan2(u))
}

fn ambient(q: [Complex64; 2]) -> [f64; 4] {
    [q[0].re, q[0].im, q[1].re, q[1].im]
}

/// Offsets of a treated zero's disk image, absolute-point safe: the value
/// is accurate at the offset scale even when the sum with the crossing
/// point rounds it away.
fn seed_offset_point(site: &SingularSite, cfg: &Config, line: usize, d: Complex64) -> [f64; 4] {
    let jets = seed_offset_jet(&site.lines[line].zero, cfg, 1, d);
    let off = ambient([jets[0].val(), jets[1].val()]);
    std::array::from_fn(|i| site.point[i] + off[i])
}

/// Treated zero bookkeeping on the refined grid.
struct Treated {
    neck: usize,
    line: usize,
    z0: Complex64,
    rr: f64,
    phi: f64,
    /// Guard half-gaps around the host vertex, radial and angular.
    g: f64,
    h: f64,
}

const BASE_RINGS: usize = 24;
const BASE_SPOKES: usize = 48;
const RING_VERTS: usize = 48;
const ISLAND_SHRINK: f64 = 0.45;

/// Collar ring footprint radii walked by the tube, outermost first.
const TUBE_RINGS: [f64; 16] = [
    7.0, 6.6, 6.2, 5.8, 5.4, 5.0, 4.6, 4.2, 3.8, 3.4, 3.0, 2.6, 2.2, 1.8, 1.5, 1.2,
];

fn build_radii(cfg: &Config, zeros: &mut [Treated]) -> Vec<f64> {
    let r = cfg.curve_r;
    let step = r / BASE_RINGS as f64;
    let mut special: Vec<f64> = zeros.iter().map(|t| t.rr).collect();
    special.sort_by(|a, b| a.partial_cmp(b).unwrap());
    special.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * r);
    let mut all: Vec<f64> = (1..=BASE_RINGS)
        .map(|m| step * m as f64)
        .filter(|&x| {
            (x - r).abs() < 1e-12 * r
                || special.iter().all(|&s| (x - s).abs() > 0.35 * step)
        })
        .chain(special.iter().copied())
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Guards from the pre-guard neighbor gaps; same-gap guards of adjacent
    // specials stay ordered because both use 0.3 of the shared gap.
    let mut guards = Vec::new();
    for t in zeros.iter_mut() {
        let i = all
            .iter()
            .position(|&x| (x - t.rr).abs() < 1e-9 * r)
            .expect("special ring lost");
        let lo = if i == 0 { t.rr } else { t.rr - all[i - 1] };
        let hi = if i + 1 == all.len() { r - t.rr } else { all[i + 1] - t.rr };
        t.g = 0.3 * lo.min(hi);
        assert!(t.g > 0.0, "degenerate radial guard at R = {}", t.rr);
        guards.push(t.rr - t.g);
        guards.push(t.rr + t.g);
    }
    all.extend(guards);
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in all.windows(2) {
        assert!(w[1] - w[0] > 1e-11 * r, "radial rings collide near {}", w[0]);
    }
    assert!((all.last().unwrap() - r).abs() < 1e-12 * r);
    all
}

fn cyclic_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn build_angles(zeros: &mut [Treated]) -> Vec<f64> {
    let step = TAU / BASE_SPOKES as f64;
    let mut special: Vec<f64> = zeros.iter().map(|t| t.phi).collect();
    special.sort_by(|a, b| a.partial_cmp(b).unwrap());
    special.dedup_by(|a, b| cyclic_gap(*a, *b) < 1e-9);
    let mut all: Vec<f64> = (0..BASE_SPOKES)
        .map(|n| -PI + step * (n as f64 + 0.5))
        .filter(|&x| special.iter().all(|&s| cyclic_gap(x, s) > 0.35 * step))
        .chain(special.iter().copied())
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut guards = Vec::new();
    for t in zeros.iter_mut() {
        let i = all
            .iter()
            .position(|&x| cyclic_gap(x, t.phi) < 1e-9)
            .expect("special spoke lost");
        let n = all.len();
        let lo = cyclic_gap(all[i], all[(i + n - 1) % n]);
        let hi = cyclic_gap(all[(i + 1) % n], all[i]);
        t.h = (0.3 * lo.min(hi)).min(3.0 * t.g / t.rr);
        assert!(t.h > 0.0, "degenerate angular guard at phi = {}", t.phi);
        let wrap = |a: f64| {
            let mut a = a;
            if a <= -PI {
                a += TAU;
            }
            if a > PI {
                a -= TAU;
            }
            a
        };
        guards.push(wrap(t.phi - t.h));
        guards.push(wrap(t.phi + t.h));
    }
    all.extend(guards);
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = all.len();
    for i in 0..n {
        assert!(
            cyclic_gap(all[(i + 1) % n], all[i]) > 1e-10,
            "angular spokes collide near {}",
            all[i]
        );
    }
    all
}

/// Remove the star of vertex v and return its link as a counterclockwise
/// ring with honest domain angles around z0.
fn remove_star(build: &mut Build, dead: &mut [bool], v: usize, z0: Complex64) -> Ring {
    let mut succ: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, t) in build.triangles.iter().enumerate() {
        if let Some(k) = t.iter().position(|&x| x == v) {
            assert!(!dead[i], "stars of two treated zeros overlap");
            dead[i] = true;
            let (p, q) = (t[(k + 1) % 3], t[(k + 2) % 3]);
            assert!(succ.insert(p, q).is_none(), "non-manifold star at {v}");
        }
    }
    assert!(succ.len() >= 3, "treated zero vertex {v} has a tiny star");
    let start = *succ.keys().next().unwrap();
    let mut ids = vec![start];
    let mut at = start;
    loop {
        at = succ[&at];
        if at == start {
            break;
        }
        ids.push(at);
        assert!(ids.len() <= succ.len(), "star link does not close at {v}");
    }
    assert_eq!(ids.len(), succ.len(), "star link is not a single cycle");
    let ang = ids
        .iter()
        .map(|&i| {
            let dz = build.domain[i] - z0;
            assert!(dz.norm() > 0.0);
            dz.arg()
        })
        .collect();
    Ring { ids, ang }
}

/// Geometric island rings from the link scale down to the removed rim at
/// |d| = d0; returns the rim ring, whose angles are the uniform d-plane
/// angles shared with the tube.
fn build_island(
    build: &mut Build,
    cfg: &Config,
    site: &SingularSite,
    line: usize,
    link: Ring,
    d_isl: f64,
    d0: f64,
) -> Ring {
    assert!(
        d_isl > 4.0 * d0,
        "island start {d_isl:.3e} too close to the rim {d0:.3e}"
    );
    let mut stages: Vec<(usize, f64)> = vec![
        (12, d_isl),
        (24, 0.6 * d_isl),
        (RING_VERTS, 0.36 * d_isl),
    ];
    let mut rad = 0.36 * d_isl;
    while rad * ISLAND_SHRINK > 2.0 * d0 {
        rad *= ISLAND_SHRINK;
        stages.push((RING_VERTS, rad));
    }
    stages.push((RING_VERTS, d0));
    let mut prev = link;
    let mut tris = std::mem::take(&mut build.triangles);
    for (count, rad) in stages {
        let mut ids = Vec::with_capacity(count);
        let mut ang = Vec::with_capacity(count);
        for j in 0..count {
            let psi = -PI + TAU * j as f64 / count as f64;
            let d = Complex64::from_polar(rad, psi);
            let p = seed_offset_point(site, cfg, line, d);
            ids.push(build.vertex(p, Complex64::new(f64::NAN, 0.0)));
            ang.push(psi);
        }
        let ring = Ring { ids, ang };
        zip_rings(&mut tris, &ring, &prev);
        prev = ring;
    }
    build.triangles = tris;
    prev
}

/// The tube joining the two rim rings of one crossing: collar rings over
/// line 0 walked inward, core rings on the aligned hyperbola, collar rings
/// over line 1 walked back out.  The single orientation reversal sits at
/// the far cut, where the line-1 footprint chart (a holomorphic function
/// of 1/zt) takes over as the shared zip coordinate.
fn build_tube(
    build: &mut Build,
    site: &SingularSite,
    shape: &Arc<NeckShape>,
    collars: &[NeckCollar; 2],
    rims: [Ring; 2],
) {
    let aligned = AlignedNeck::new(shape);
    let scale = shape.scale;
    let nj = RING_VERTS;
    let uang: Vec<f64> = (0..nj).map(|j| -PI + TAU * j as f64 / nj as f64).collect();
    let mut tris = std::mem::take(&mut build.triangles);

    // Collar over line 0, inward.
    let mut prev = rims[0].clone();
    for &target in &TUBE_RINGS {
        let rho = collars[0].ring_rho(target);
        let ids = (0..nj)
            .map(|j| {
                let p = collars[0].eval(rho, uang[j]).point;
                build.vertex(p, Complex64::new(f64::NAN, 0.0))
            })
            .collect();
        let ring = Ring { ids, ang: uang.clone() };
        zip_rings(&mut tris, &ring, &prev);
        prev = ring;
    }

    // Near cut: core ring with |footprint_0| = 1, zipped in the collar-0
    // angle coordinate, then walked in the aligned coordinate.
    let cut0: Vec<(usize, Complex64)> = uang
        .iter()
        .map(|&u| {
            let (s1, _) = aligned.cut_radius(0, u, 1.0);
            let zt = Complex64::from_polar(s1, u);
            let p = ambient(aligned.point(zt)).map(|x| x * scale);
            let id = build.vertex(std::array::from_fn(|i| site.point[i] + p[i]), Complex64::new(f64::NAN, 0.0));
            (id, zt)
        })
        .collect();
    let chi0 = collars[0].derotation();
    let cut0_ring = Ring {
        ids: cut0.iter().map(|&(id, _)| id).collect(),
        ang: cut0
            .iter()
            .map(|&(_, zt)| (aligned.footprint(0, zt) / chi0).arg())
            .collect(),
    };
    zip_rings(&mut tris, &cut0_ring, &prev);

    // Core ladder between the cuts, log-uniform in the aligned radius.
    let (s1m, _) = aligned.cut_radius(0, 0.0, 1.0);
    let (s2m, _) = aligned.cut_radius(1, 0.0, 1.0);
    assert!(s2m < s1m, "aligned cuts out of order");
    let levels = ((s1m / s2m).ln() / std::f64::consts::LN_2).ceil().max(4.0) as usize;
    let mut prev_core = Ring {
        ids: cut0_ring.ids.clone(),
        ang: uang.clone(),
    };
    let mut cut1: Vec<(usize, Complex64)> = Vec::new();
    for c in 1..=levels {
        let tau = c as f64 / levels as f64;
        let ids: Vec<usize> = uang
            .iter()
            .map(|&u| {
                let (s1, _) = aligned.cut_radius(0, u, 1.0);
                let (s2, _) = aligned.cut_radius(1, u, 1.0);
                let zt = Complex64::from_polar(s2.powf(tau) * s1.powf(1.0 - tau), u);
                let p = ambient(aligned.point(zt)).map(|x| x * scale);
                let id = build.vertex(
                    std::array::from_fn(|i| site.point[i] + p[i]),
                    Complex64::new(f64::NAN, 0.0),
                );
                if c == levels {
                    cut1.push((id, zt));
                }
                id
            })
            .collect();
        let ring = Ring { ids, ang: uang.clone() };
        zip_rings(&mut tris, &ring, &prev_core);
        prev_core = ring;
    }

    // Far cut in the line-1 footprint coordinate: the chart reverses the
    // angular direction, so the ring is relisted backwards.
    let chi1 = collars[1].derotation();
    let mut rev_ids = Vec::with_capacity(nj);
    let mut rev_ang = Vec::with_capacity(nj);
    for k in 0..nj {
        let (id, zt) = cut1[(nj - k) % nj];
        rev_ids.push(id);
        rev_ang.push((aligned.footprint(1, zt) / chi1).arg());
    }
    let mut prev = Ring { ids: rev_ids, ang: rev_ang };

    // Collar over line 1, outward to its rim.
    for &target in TUBE_RINGS.iter().rev() {
        let rho = collars[1].ring_rho(target);
        let ids = (0..nj)
            .map(|j| {
                let p = collars[1].eval(rho, uang[j]).point;
                build.vertex(p, Complex64::new(f64::NAN, 0.0))
            })
            .collect();
        let ring = Ring { ids, ang: uang.clone() };
        zip_rings(&mut tris, &prev, &ring);
        prev = ring;
    }
    zip_rings(&mut tris, &prev, &rims[1]);
    build.triangles = tris;
}

/// Build the mesh for the given treated crossings.  Each entry pairs a
/// crossing with its neck shape; the removed-disk radii come from the same
/// collar construction the quadrature patches use.
pub fn build_mesh(cfg: &Config, necks: &[(SingularSite, Arc<NeckShape>)]) -> Result<MeshSurface> {
    if !matches!(cfg.variant, Variant::Quadratic) {
        return Err(Error::NotSupported(
            "mesh export covers the quadratic variant only".into(),
        ));
    }
    for (site, _) in necks {
        if site.lines.len() != 2 {
            return Err(Error::NotSupported(format!(
                "crossing {} has {} sheets; the tube builder pairs exactly two",
                site.index,
                site.lines.len()
            )));
        }
    }
    let collars: Vec<[NeckCollar; 2]> = necks
        .iter()
        .map(|(site, shape)| {
            [
                NeckCollar::new(cfg, site, shape, 0),
                NeckCollar::new(cfg, site, shape, 1),
            ]
        })
        .collect();

    let mut zeros: Vec<Treated> = Vec::new();
    for (k, (site, _)) in necks.iter().enumerate() {
        for line in 0..2 {
            let z0 = site.lines[line].zero.z;
            let (rr, phi) = domain_polar(cfg, z0);
            zeros.push(Treated {
                neck: k,
                line,
                z0,
                rr,
                phi,
                g: 0.0,
                h: 0.0,
            });
        }
    }
    let radii = build_radii(cfg, &mut zeros);
    let angles = build_angles(&mut zeros);
    let na = angles.len();

    let mut build = Build {
        vertices: Vec::new(),
        domain: Vec::new(),
        triangles: Vec::new(),
    };

    // Global grid: center fan plus quad cells split along one diagonal.
    let zc = Complex64::new(cfg.curve_r, 0.0);
    let center = build.vertex(ambient(seed(zc, cfg)), zc);
    let mut grid = vec![vec![0usize; na]; radii.len()];
    for (m, &rr) in radii.iter().enumerate() {
        for (n, &phi) in angles.iter().enumerate() {
            let z = domain_point(cfg, rr, phi);
            grid[m][n] = build.vertex(ambient(seed(z, cfg)), z);
        }
    }
    for n in 0..na {
        build.triangles.push([center, grid[0][n], grid[0][(n + 1) % na]]);
    }
    for m in 0..radii.len() - 1 {
        for n in 0..na {
            let (a, b, c, d) = (
                grid[m][n],
                grid[m + 1][n],
                grid[m + 1][(n + 1) % na],
                grid[m][(n + 1) % na],
            );
            build.triangles.push([a, b, c]);
            build.triangles.push([a, c, d]);
        }
    }

    // Star removal at every treated zero, then one compaction.
    let mut dead = vec![false; build.triangles.len()];
    let mut links: Vec<(usize, usize, Ring, f64)> = Vec::new();
    for t in &zeros {
        let m = radii
            .iter()
            .position(|&x| (x - t.rr).abs() < 1e-9 * cfg.curve_r)
            .expect("host ring vanished");
        let n = angles
            .iter()
            .position(|&x| cyclic_gap(x, t.phi) < 1e-9)
            .expect("host spoke vanished");
        let v = grid[m][n];
        let link = remove_star(&mut build, &mut dead, v, t.z0);
        let d_isl = 0.45 * t.g.min(t.h * t.rr) / t.z0.norm();
        links.push((t.neck, t.line, link, d_isl));
    }
    let mut kept = Vec::with_capacity(build.triangles.len());
    for (i, t) in build.triangles.iter().enumerate() {
        if !dead[i] {
            kept.push(*t);
        }
    }
    build.triangles = kept;

    // Islands down to each rim, then one tube per crossing.
    let mut rims: Vec<Vec<Option<Ring>>> = vec![vec![None, None]; necks.len()];
    for (neck, line, link, d_isl) in links {
        let (site, _) = &necks[neck];
        let d0 = collars[neck][line].rim_offset();
        let rim = build_island(&mut build, cfg, site, line, link, d_isl, d0);
        rims[neck][line] = Some(rim);
    }
    for (k, (site, shape)) in necks.iter().enumerate() {
        let pair = [
            rims[k][0].take().expect("missing rim"),
            rims[k][1].take().expect("missing rim"),
        ];
        build_tube(&mut build, site, shape, &collars[k], pair);
    }

    // Star centers are no longer referenced; compact them away.
    let mut remap = vec![usize::MAX; build.vertices.len()];
    let mut vertices = Vec::with_capacity(build.vertices.len());
    for t in &mut build.triangles {
        for v in t.iter_mut() {
            if remap[*v] == usize::MAX {
                remap[*v] = vertices.len();
                vertices.push(build.vertices[*v]);
            }
            *v = remap[*v];
        }
    }
    Ok(MeshSurface {
        vertices,
        triangles: build.triangles,
    })
}

/// Mesh of the scheduled surface.
pub fn mesh_from_schedule(cfg: &Config, schedule: &Schedule) -> Result<MeshSurface> {
    let necks: Vec<(SingularSite, Arc<NeckShape>)> = schedule
        .necks
        .iter()
        .map(|p| (p.site.clone(), p.shape.clone()))
        .collect();
    build_mesh(cfg, &necks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::lines::sites;

    #[test]
    fn zip_joins_mismatched_rings_into_an_annulus() {
        let mut v = Vec::new();
        let mut inner = Ring { ids: Vec::new(), ang: Vec::new() };
        let mut outer = Ring { ids: Vec::new(), ang: Vec::new() };
        for (k, &a) in [-3.0f64, -1.2, 0.3, 1.9, 2.8].iter().enumerate() {
            v.push([a.cos(), a.sin(), 0.0, 0.0]);
            inner.ids.push(k);
            inner.ang.push(a);
        }
        for j in 0..8 {
            let a = -PI + TAU * (j as f64 + 0.7) / 8.0;
            v.push([2.0 * a.cos(), 2.0 * a.sin(), 0.0, 0.0]);
            outer.ids.push(5 + j);
            outer.ang.push(a);
        }
        let mut tris = Vec::new();
        zip_rings(&mut tris, &inner, &outer);
        assert_eq!(tris.len(), 13);
        let mesh = MeshSurface { vertices: v, triangles: tris };
        let stats = mesh.audit();
        assert!(stats.violations.is_empty(), "{:?}", stats.violations);
        assert_eq!(stats.euler, 0);
        assert_eq!(stats.boundary_loops, 2);
    }

    #[test]
    fn audit_catches_an_orientation_flip() {
        let mesh = MeshSurface {
            vertices: vec![
                [0.0, 0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0, 0.0],
            ],
            triangles: vec![[0, 1, 2], [1, 2, 3]],
        };
        let stats = mesh.audit();
        assert!(stats
            .violations
            .iter()
            .any(|s| s.contains("one orientation")));
    }

    /// Synthetic neck shapes at a mesh-friendly scale: the topology does not
    /// depend on the scheduled radii, so the Euler count is tested without
    /// paying for a scheduler run.
    fn synthetic_necks(cfg: &Config, k: usize) -> Vec<(SingularSite, Arc<NeckShape>)> {
        let all = sites(cfg).unwrap();
        (0..k)
            .map(|i| {
                let site = all[i].clone();
                let scale = 1e-6;
                let probe = AlignedNeck::new(&NeckShape::new(&site, cfg.variant, scale, scale * scale));
                let eta = 1e-4 * scale * scale / probe.eta_hat.norm();
                let shape = Arc::new(NeckShape::new(&site, cfg.variant, scale, eta));
                (site, shape)
            })
            .collect()
    }

    #[test]
    fn euler_drops_by_two_per_neck() {
        let cfg = Config::default();
        for k in 1..=3 {
            let necks = synthetic_necks(&cfg, k);
            let mesh = build_mesh(&cfg, &necks).unwrap();
            let stats = mesh.audit();
            assert!(
                stats.violations.is_empty(),
                "K = {k}: {:?}",
                &stats.violations[..stats.violations.len().min(8)]
            );
            assert_eq!(stats.euler, 1 - 2 * k as i64, "K = {k}");
            assert_eq!(stats.boundary_loops, 1, "K = {k}");
            eprintln!(
                "K = {k}: V {} E {} F {} boundary {} chi {}",
                stats.vertices, stats.edges, stats.triangles, stats.boundary_edges, stats.euler
            );
        }
    }

    #[test]
    fn branched_mesh_is_not_supported() {
        let cfg = Config {
            variant: Variant::Branched,
            curve_r: 10.0,
            curve_mu: 0.1,
            ..Config::default()
        };
        match build_mesh(&cfg, &[]) {
            Err(Error::NotSupported(_)) => {}
            Err(e) => panic!("expected a scope refusal, got {e:?}"),
            Ok(_) => panic!("branched mesh unexpectedly built"),
        }
    }
}
