//! Tangent lines of the seed surface at its self-intersections.
//!
//! Every crossing carries one complex tangent line per sheet, read off the
//! first derivative of the seed map at the matching domain zero.  All later
//! stages work in per-line unitary frames, so the frames are fixed here once
//! with a deterministic phase normalization.

use crate::config::{Config, MIN_TANGENT_SEPARATION};
use crate::slitplane::{seed_offset_jet, singular_points, SeedZero};
use crate::{Error, Result};
use num_complex::Complex64;

/// Unitary frame attached to one sheet of a crossing.
#[derive(Debug, Clone)]
pub struct LineFrame {
    pub zero: SeedZero,
    /// Seed velocity d(seed)/dd at the zero; d is the scaled domain offset,
    /// so footprint lengths translate to |d| through 1/|velocity|.
    pub velocity: [Complex64; 2],
    /// Unit tangent direction of the sheet in C^2.
    pub dir: [Complex64; 2],
    /// Unit Hermitian complement of `dir`; [dir, normal] is the unitary
    /// frame used for graph coordinates over the line.
    pub normal: [Complex64; 2],
    /// Unit linear form vanishing on the line, largest component made real
    /// positive so serialized output does not depend on evaluation order.
    pub form: [Complex64; 2],
}

impl LineFrame {
    fn from_zero(zero: SeedZero, cfg: &Config) -> LineFrame {
        let jets = seed_offset_jet(&zero, cfg, 1, Complex64::ZERO);
        let velocity = [jets[0].coeff(1), jets[1].coeff(1)];
        let speed = (velocity[0].norm_sqr() + velocity[1].norm_sqr()).sqrt();
        let dir = [velocity[0] / speed, velocity[1] / speed];
        let normal = [-dir[1].conj(), dir[0].conj()];
        let mut form = [dir[1], -dir[0]];
        let lead = if form[0].norm() >= form[1].norm() {
            form[0]
        } else {
            form[1]
        };
        let phase = lead / lead.norm();
        form = [form[0] / phase, form[1] / phase];
        LineFrame {
            zero,
            velocity,
            dir,
            normal,
            form,
        }
    }

    pub fn speed(&self) -> f64 {
        (self.velocity[0].norm_sqr() + self.velocity[1].norm_sqr()).sqrt()
    }

    /// Graph coordinates of an ambient offset: q = z dir + w normal.
    pub fn coords(&self, q: [Complex64; 2]) -> (Complex64, Complex64) {
        let z = q[0] * self.dir[0].conj() + q[1] * self.dir[1].conj();
        let w = q[0] * self.normal[0].conj() + q[1] * self.normal[1].conj();
        (z, w)
    }

    /// Ambient offset of graph coordinates.
    pub fn embed(&self, z: Complex64, w: Complex64) -> [Complex64; 2] {
        [
            z * self.dir[0] + w * self.normal[0],
            z * self.dir[1] + w * self.normal[1],
        ]
    }
}

fn hermitian(a: &[Complex64; 2], b: &[Complex64; 2]) -> Complex64 {
    a[0] * b[0].conj() + a[1] * b[1].conj()
}

/// Sine of the principal angle between two complex lines given by unit
/// directions.
pub fn line_separation(a: &[Complex64; 2], b: &[Complex64; 2]) -> f64 {
    (1.0 - hermitian(a, b).norm_sqr()).max(0.0).sqrt()
}

fn check_separations(lines: &[LineFrame], index: usize) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            worst = worst.min(line_separation(&lines[i].dir, &lines[j].dir));
        }
    }
    if worst < MIN_TANGENT_SEPARATION {
        return Err(Error::NonTransversal {
            index,
            separation: worst,
            min: MIN_TANGENT_SEPARATION,
        });
    }
    Ok(worst)
}

/// A self-intersection of the seed surface together with its sheet frames.
#[derive(Debug, Clone)]
pub struct SingularSite {
    /// Position in the outermost-first site listing.
    pub index: usize,
    /// First seed coordinate of the crossing; the second vanishes there.
    pub image1: Complex64,
    /// Ambient crossing point.
    pub point: [f64; 4],
    pub lines: Vec<LineFrame>,
    /// Smallest pairwise principal-angle sine among the sheets.
    pub separation: f64,
}

/// All crossings, outermost first, with transversality enforced.
pub fn sites(cfg: &Config) -> Result<Vec<SingularSite>> {
    let points = singular_points(cfg)?;
    let mut out = Vec::with_capacity(points.len());
    for (index, sp) in points.iter().enumerate() {
        let lines: Vec<LineFrame> = sp
            .zeros
            .iter()
            .map(|&z| LineFrame::from_zero(z, cfg))
            .collect();
        let separation = check_separations(&lines, index)?;
        out.push(SingularSite {
            index,
            image1: sp.image1,
            point: [sp.image1.re, sp.image1.im, 0.0, 0.0],
            lines,
            separation,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Variant;
    use crate::slitplane::{g_prime_at_zero_closed, zeros_in_domain};

    #[test]
    fn default_crossing_census_and_ordering() {
        let cfg = Config::default();
        let s = sites(&cfg).unwrap();
        assert_eq!(zeros_in_domain(&cfg).len(), 8);
        assert_eq!(s.len(), 4);
        // Frozen angles: the outer pair of crossings is fairly shallow
        // because the first seed coordinate dominates there, the inner pair
        // is strongly transversal.
        let seps = [8.116472e-4, 8.116472e-4, 7.719596e-1, 7.719596e-1];
        for (k, site) in s.iter().enumerate() {
            assert_eq!(site.index, k);
            assert_eq!(site.lines.len(), 2);
            assert!((site.separation - seps[k]).abs() <= 1e-6 * seps[k]);
            assert_eq!(site.point[2], 0.0);
            assert_eq!(site.point[3], 0.0);
        }
        // Two crossings per generation, and the listing never grows in norm.
        let e3pi = (3.0 * std::f64::consts::PI).exp();
        assert!((s[0].image1.norm() - e3pi).abs() / e3pi < 1e-12);
        assert!((s[1].image1.norm() - e3pi).abs() / e3pi < 1e-12);
        assert!((s[2].image1.norm() - 1.0).abs() < 1e-12);
        assert!((s[3].image1.norm() - 1.0).abs() < 1e-12);
        for w in s.windows(2) {
            assert!(w[1].image1.norm() <= w[0].image1.norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn velocities_match_the_closed_form_derivative() {
        let cfg = Config::default();
        for site in sites(&cfg).unwrap() {
            for line in &site.lines {
                let z0 = line.zero.z;
                let p = cfg.variant.power();
                let want0 = z0.powu(p) * p as f64;
                let want1 = g_prime_at_zero_closed(&line.zero, &cfg) * z0;
                assert!((line.velocity[0] - want0).norm() <= 1e-12 * want0.norm());
                assert!((line.velocity[1] - want1).norm() <= 1e-12 * want1.norm());
                // The form vanishes on the direction and is phase-pinned.
                let ev = line.form[0] * line.dir[0] + line.form[1] * line.dir[1];
                assert!(ev.norm() < 1e-15);
                let lead = if line.form[0].norm() >= line.form[1].norm() {
                    line.form[0]
                } else {
                    line.form[1]
                };
                assert!(lead.im.abs() < 1e-15 && lead.re > 0.0);
                let n2 = line.form[0].norm_sqr() + line.form[1].norm_sqr();
                assert!((n2 - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn frames_are_unitary() {
        let cfg = Config::default();
        for site in sites(&cfg).unwrap() {
            for line in &site.lines {
                assert!((hermitian(&line.dir, &line.dir).re - 1.0).abs() < 1e-14);
                assert!((hermitian(&line.normal, &line.normal).re - 1.0).abs() < 1e-14);
                assert!(hermitian(&line.dir, &line.normal).norm() < 1e-15);
                // Round trip between ambient offsets and graph coordinates.
                let q = [Complex64::new(0.3, -1.1), Complex64::new(0.7, 0.2)];
                let (z, w) = line.coords(q);
                let back = line.embed(z, w);
                assert!((back[0] - q[0]).norm() + (back[1] - q[1]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn clustering_agrees_with_brute_force_pairing() {
        let cfg = Config::default();
        let zeros = zeros_in_domain(&cfg);
        let p = cfg.variant.power();
        // Quadratic images pair up two at a time; collect every close pair.
        let mut pairs = Vec::new();
        for i in 0..zeros.len() {
            for j in i + 1..zeros.len() {
                let a = zeros[i].z.powu(p);
                let b = zeros[j].z.powu(p);
                if (a - b).norm() <= 1e-9 * a.norm() {
                    pairs.push((i, j));
                }
            }
        }
        let s = sites(&cfg).unwrap();
        assert_eq!(pairs.len(), s.len());
        for site in &s {
            let found = pairs.iter().any(|&(i, j)| {
                let zs = [zeros[i].z, zeros[j].z];
                site.lines
                    .iter()
                    .all(|l| zs.iter().any(|&z| (z - l.zero.z).norm() < 1e-12))
            });
            assert!(found, "cluster without matching brute-force pair");
        }
    }

    #[test]
    fn branched_crossings_carry_four_lines() {
        // A domain holding only the innermost zero generation: for the
        // branched power the next generation's sheets hug the z^7 axis so
        // tightly (|7 z^7| ~ 2e10 against an O(10) second component) that
        // they fall below any usable transversality floor.
        let cfg = Config {
            variant: Variant::Branched,
            curve_r: 10.0,
            curve_mu: 0.1,
            ..Config::default()
        };
        let s = sites(&cfg).unwrap();
        assert_eq!(zeros_in_domain(&cfg).len(), 8);
        assert_eq!(s.len(), 2);
        for site in &s {
            assert_eq!(site.lines.len(), 4);
            assert!(site.separation >= MIN_TANGENT_SEPARATION);
        }
    }

    #[test]
    fn branched_outer_generation_is_rejected_as_non_transversal() {
        let cfg = Config {
            variant: Variant::Branched,
            ..Config::default()
        };
        match sites(&cfg) {
            Err(Error::NonTransversal { separation, .. }) => {
                assert!(separation < MIN_TANGENT_SEPARATION)
            }
            other => panic!("expected near-parallel sheets, got {other:?}"),
        }
    }

    #[test]
    fn shallow_sheet_angles_are_rejected() {
        let cfg = Config::default();
        let site = &sites(&cfg).unwrap()[0];
        let mut lines = vec![site.lines[0].clone(), site.lines[0].clone()];
        // Tilt the copy by an angle below the admissible floor.
        let t = 1e-8;
        lines[1].dir = [
            (lines[0].dir[0] + t * lines[0].normal[0]) / (1.0 + t * t).sqrt(),
            (lines[0].dir[1] + t * lines[0].normal[1]) / (1.0 + t * t).sqrt(),
        ];
        match check_separations(&lines, 7) {
            Err(Error::NonTransversal {
                index, separation, ..
            }) => {
                assert_eq!(index, 7);
                assert!(separation < MIN_TANGENT_SEPARATION);
            }
            other => panic!("expected a transversality failure, got {other:?}"),
        }
    }
}
