//! Metric and almost complex structure synthesized from a nondegenerate
//! 2-form, with the comass and calibration certificates built on them.
//!
//! A 2-form is represented against the euclidean pairing by the skew matrix
//! field A with omega(v, w) = -<v, A w>.  Where A is invertible, Q = A A^T is
//! symmetric positive definite and its positive square root S is the Gram
//! matrix of a metric for which J = S^{-1} A is an orthogonal almost complex
//! structure; the triple satisfies J^2 = -Id, g(Jv, Jw) = g(v, w) and
//! omega(v, w) = -g(v, Jw).  Plain values go through the Jacobi eigen
//! decomposition, jet fields through the comparison-free square-root
//! iteration, and the certificate suite cross-checks the two routes against
//! each other and against finite differences.

use rand::Rng;

use crate::config::EIG_CLAMP;
use crate::forms::{basis, basis_pos, FormField};
use crate::jet::Jet;
use crate::linalg::{jacobi_eigh, Mat4};
use crate::{Error, Result};

/// The standard complex structure, J0 (a, b, c, d) = (-b, a, -d, c).
pub const J0: [[f64; 4]; 4] = [
    [0.0, -1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0, 0.0],
];

/// Skew matrix of a 2-form at a point: A_ij = -omega_p(e_i, e_j), so that
/// omega_p(v, w) = -<v, A_p w> for all v, w.
pub fn skew_matrix(omega: &FormField, p: [f64; 4]) -> Mat4<f64> {
    assert_eq!(omega.degree(), 2);
    let c = omega.values(p);
    Mat4::from_fn(|i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => -c[basis_pos(2, &[i, j])],
        std::cmp::Ordering::Equal => 0.0,
        std::cmp::Ordering::Greater => c[basis_pos(2, &[j, i])],
    })
}

/// Jet-valued version of [`skew_matrix`]; entries carry the Taylor expansion
/// of the form's coefficients around p.
pub fn skew_jets(omega: &FormField, p: [f64; 4], order: usize) -> Mat4<Jet> {
    assert_eq!(omega.degree(), 2);
    let c = omega.eval(p, order);
    Mat4::from_fn(|i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => c[basis_pos(2, &[i, j])].scale(-1.0),
        std::cmp::Ordering::Equal => Jet::zeros(order),
        std::cmp::Ordering::Greater => c[basis_pos(2, &[j, i])].clone(),
    })
}

/// Compatible pair at one point, with plain-number entries.
pub struct Acs {
    /// Skew matrix of the form.
    pub a: Mat4<f64>,
    /// Gram matrix of the synthesized metric.
    pub gram: Mat4<f64>,
    /// Almost complex structure.
    pub j: Mat4<f64>,
    /// Least eigenvalue of A A^T before clamping; how far the form is from
    /// degenerating.
    pub least_square: f64,
    /// Whether the eigenvalue clamp engaged (near-degenerate input; the
    /// returned metric is then a regularization, not a faithful synthesis).
    pub clamped: bool,
}

/// Jet-valued compatible pair; the square root runs through the
/// Denman-Beavers iteration, so every entry carries derivatives.
pub struct AcsJets {
    pub a: Mat4<Jet>,
    pub gram: Mat4<Jet>,
    pub j: Mat4<Jet>,
}

/// Polar synthesis from a skew matrix: Gram = (A A^T)^(1/2), J = Gram^{-1} A.
pub fn polar_acs(a: &Mat4<f64>) -> Result<Acs> {
    let q = a.matmul(&a.transpose());
    let (vals, v) = jacobi_eigh(&q.0);
    let least = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if !least.is_finite() || least <= 0.0 {
        return Err(Error::Degenerate(format!(
            "squared field has eigenvalue {least:.3e}; the 2-form is degenerate here"
        )));
    }
    let clamped = least < EIG_CLAMP;
    let from_eigen = |f: &dyn Fn(f64) -> f64| {
        Mat4::from_fn(|i, j| (0..4).map(|k| v[i][k] * f(vals[k].max(EIG_CLAMP)) * v[j][k]).sum())
    };
    let gram = from_eigen(&|l| l.sqrt());
    let gram_inv = from_eigen(&|l| 1.0 / l.sqrt());
    let j = gram_inv.matmul(a);
    Ok(Acs {
        a: a.clone(),
        gram,
        j,
        least_square: least,
        clamped,
    })
}

/// Jet-field version of [`polar_acs`].  The caller is responsible for
/// nondegeneracy of the value part (the iteration does not compare entries);
/// [`structure_jets`] vets it through the eigen route first.
pub fn polar_acs_jets(a: &Mat4<Jet>) -> AcsJets {
    let gram = a.matmul(&a.transpose()).sqrt_db();
    let j = gram.inverse().matmul(a);
    AcsJets {
        a: a.clone(),
        gram,
        j,
    }
}

/// Synthesized structure of a 2-form at a point.
pub fn structure_at(omega: &FormField, p: [f64; 4]) -> Result<Acs> {
    polar_acs(&skew_matrix(omega, p))
}

/// Synthesized structure with derivatives up to the given order.
pub fn structure_jets(omega: &FormField, p: [f64; 4], order: usize) -> Result<AcsJets> {
    let a = skew_jets(omega, p, order);
    polar_acs(&Mat4::from_fn(|i, j| a.0[i][j].val()))?;
    Ok(polar_acs_jets(&a))
}

/// Inner product <v, G w> of the metric with Gram matrix G.
pub fn g_inner(gram: &Mat4<f64>, v: [f64; 4], w: [f64; 4]) -> f64 {
    let gw = gram.apply(&w);
    (0..4).map(|i| v[i] * gw[i]).sum()
}

/// Area of the parallelogram spanned by v and w in the metric with Gram
/// matrix G.
pub fn g_area(gram: &Mat4<f64>, v: [f64; 4], w: [f64; 4]) -> f64 {
    let (vv, ww, vw) = (g_inner(gram, v, v), g_inner(gram, w, w), g_inner(gram, v, w));
    (vv * ww - vw * vw).max(0.0).sqrt()
}

/// Contraction of cached 2-form component values with a pair of vectors.
fn contract(c: &[f64], v: [f64; 4], w: [f64; 4]) -> f64 {
    basis(2)
        .iter()
        .enumerate()
        .map(|(pos, s)| c[pos] * (v[s[0]] * w[s[1]] - v[s[1]] * w[s[0]]))
        .sum()
}

/// Comass estimate of the form at the point where `acs` was synthesized.
pub struct ComassEstimate {
    /// Largest ratio omega(v, w) / |v wedge w|_g over the random pairs.
    pub sampled: f64,
    /// The ratio at the analytic maximizer pair (v, J v).
    pub attained: f64,
}

/// Estimates sup omega(v, w) over pairs with unit g-area by random sampling,
/// together with the deterministic candidate (v, J v) that attains the sup
/// for a compatible triple.  Pairs that are too g-collinear to normalize are
/// resampled.
pub fn wirtinger_comass(acs: &Acs, samples: usize, rng: &mut impl Rng) -> ComassEstimate {
    let ratio = |v: [f64; 4], w: [f64; 4]| {
        let area = g_area(&acs.gram, v, w);
        let aw = acs.a.apply(&w);
        let flux: f64 = -(0..4).map(|i| v[i] * aw[i]).sum::<f64>();
        (flux, area)
    };
    let mut sampled = f64::NEG_INFINITY;
    let mut drawn = 0;
    for _ in 0..10 * samples {
        if drawn == samples {
            break;
        }
        let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let w: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let (flux, area) = ratio(v, w);
        if area < 1e-6 {
            continue;
        }
        drawn += 1;
        sampled = sampled.max(flux / area);
    }
    let v = [0.6, -0.2, 0.7, 0.3];
    let jv = acs.j.apply(&v);
    let (flux, area) = ratio(v, jv);
    ComassEstimate {
        sampled,
        attained: flux / area,
    }
}

/// One sample of a parametrized surface piece: the ambient point and the two
/// coordinate tangent vectors there.
#[derive(Clone, Copy, Debug)]
pub struct TangentSample {
    pub p: [f64; 4],
    pub t1: [f64; 4],
    pub t2: [f64; 4],
}

fn norm4(v: [f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot4(v: [f64; 4], w: [f64; 4]) -> f64 {
    (0..4).map(|i| v[i] * w[i]).sum()
}

/// Sup over the samples of |omega(t1, t2) - g-area(t1, t2)|.  Zero certifies
/// that the sampled tangent planes are calibrated with the right orientation;
/// an anti-complex plane scores twice its area.
pub fn calibration_residual<G>(omega: &FormField, gram: G, samples: &[TangentSample]) -> f64
where
    G: Fn([f64; 4]) -> Mat4<f64>,
{
    samples
        .iter()
        .map(|s| {
            assert!(
                g_area(&Mat4::from_fn(|i, j| ((i == j) as u8) as f64), s.t1, s.t2) > 1e-12,
                "degenerate tangent sample at {:?}",
                s.p
            );
            let flux = contract(&omega.values(s.p), s.t1, s.t2);
            (flux - g_area(&gram(s.p), s.t1, s.t2)).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest fraction of J t sticking out of the tangent plane, over the
/// samples and both tangents; zero certifies that J maps the sampled tangent
/// planes into themselves.
pub fn j_invariance_residual<GJ>(j_at: GJ, samples: &[TangentSample]) -> f64
where
    GJ: Fn([f64; 4]) -> Mat4<f64>,
{
    samples
        .iter()
        .map(|s| {
            let e1 = {
                let n = norm4(s.t1);
                std::array::from_fn(|i| s.t1[i] / n)
            };
            let mut e2: [f64; 4] = s.t2;
            let c = dot4(e2, e1);
            for i in 0..4 {
                e2[i] -= c * e1[i];
            }
            let n = norm4(e2);
            assert!(n > 1e-12, "degenerate tangent sample at {:?}", s.p);
            for x in e2.iter_mut() {
                *x /= n;
            }
            let j = j_at(s.p);
            [s.t1, s.t2]
                .iter()
                .map(|t| {
                    let jt = j.apply(t);
                    let mut out = jt;
                    let (c1, c2) = (dot4(jt, e1), dot4(jt, e2));
                    for i in 0..4 {
                        out[i] -= c1 * e1[i] + c2 * e2[i];
                    }
                    norm4(out) / norm4(jt)
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Residuals of the identities defining a compatible pair, measured at the
/// point where `acs` was synthesized.
pub struct StructureResiduals {
    /// A + A^T.
    pub skew: f64,
    /// A A^T - (-A^2).
    pub square_def: f64,
    /// Gram Gram - A A^T.
    pub root: f64,
    /// J J + Id.
    pub involution: f64,
    /// g(J v, J w) - g(v, w) over the sampled pairs.
    pub isometry: f64,
    /// omega(v, w) + g(v, J w) over the sampled pairs, with omega evaluated
    /// from its own coefficients, not through A.
    pub compatibility: f64,
}

impl StructureResiduals {
    pub fn max(&self) -> f64 {
        [
            self.skew,
            self.square_def,
            self.root,
            self.involution,
            self.isometry,
            self.compatibility,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Measures all six defining identities on random vector pairs.
pub fn identity_residuals(
    omega: &FormField,
    p: [f64; 4],
    acs: &Acs,
    pairs: usize,
    rng: &mut impl Rng,
) -> StructureResiduals {
    let q = acs.a.matmul(&acs.a.transpose());
    let minus_a2 = acs.a.matmul(&acs.a).scale(-1.0);
    let ident = Mat4::from_fn(|i, j| ((i == j) as u8) as f64);
    let c = omega.values(p);
    let mut isometry = 0.0f64;
    let mut compatibility = 0.0f64;
    for _ in 0..pairs {
        let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let w: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let (jv, jw) = (acs.j.apply(&v), acs.j.apply(&w));
        isometry = isometry.max((g_inner(&acs.gram, jv, jw) - g_inner(&acs.gram, v, w)).abs());
        compatibility =
            compatibility.max((contract(&c, v, w) + g_inner(&acs.gram, v, jw)).abs());
    }
    StructureResiduals {
        skew: acs.a.add(&acs.a.transpose()).max_mag(),
        square_def: q.sub(&minus_a2).max_mag(),
        root: acs.gram.matmul(&acs.gram).sub(&q).max_mag(),
        involution: acs.j.matmul(&acs.j).add(&ident).max_mag(),
        isometry,
        compatibility,
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::config::{TOL_COMASS, TOL_KAHLER_ID};
    use crate::forms::{standard_symplectic, ConstField, Field, PolyField};

    fn mat_close(m: &Mat4<f64>, want: &[[f64; 4]; 4], tol: f64) {
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (m.0[i][j] - want[i][j]).abs() <= tol,
                    "entry ({i},{j}): {} vs {}",
                    m.0[i][j],
                    want[i][j]
                );
            }
        }
    }

    const IDENT: [[f64; 4]; 4] = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];

    /// Constant-coefficient form with omega(e_i, e_j) = -a_ij.
    fn form_from_skew(a: &Mat4<f64>) -> FormField {
        let mut parts: Vec<(Vec<usize>, Field)> = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                parts.push((vec![i, j], Arc::new(ConstField(-a.0[i][j])) as Field));
            }
        }
        FormField::from_parts(2, parts)
    }

    fn random_form(rng: &mut ChaCha8Rng, scale: f64) -> FormField {
        let coeffs = (0..6)
            .map(|_| {
                let mut terms: Vec<([usize; 4], f64)> = vec![([0; 4], rng.gen_range(-1.0..1.0))];
                for _ in 0..3 {
                    let mut m = [0usize; 4];
                    m[rng.gen_range(0..4)] = rng.gen_range(1..=2);
                    terms.push((m, rng.gen_range(-1.0..1.0)));
                }
                Arc::new(PolyField::new(
                    terms.into_iter().map(|(m, c)| (m, c * scale)).collect(),
                )) as Field
            })
            .collect();
        FormField::new(2, coeffs)
    }

    /// The standard form plus a small smooth perturbation of every component.
    fn perturbed_form(rng: &mut ChaCha8Rng, scale: f64) -> FormField {
        standard_symplectic().add(&random_form(rng, scale))
    }

    #[test]
    fn standard_form_gives_the_flat_structure() {
        let acs = structure_at(&standard_symplectic(), [0.3, -1.2, 0.5, 2.0]).unwrap();
        mat_close(&acs.a, &J0, 0.0);
        mat_close(&acs.gram, &IDENT, 1e-12);
        mat_close(&acs.j, &J0, 1e-12);
        assert!((acs.least_square - 1.0).abs() < 1e-12);
        assert!(!acs.clamped);

        let jets = structure_jets(&standard_symplectic(), [0.0; 4], 2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want_g = Jet::constant(2, IDENT[i][j]);
                let want_j = Jet::constant(2, J0[i][j]);
                assert!((&jets.gram.0[i][j] - &want_g).max_abs_coeff() < 1e-11);
                assert!((&jets.j.0[i][j] - &want_j).max_abs_coeff() < 1e-11);
            }
        }
    }

    #[test]
    fn doubled_plane_form_has_the_hand_computed_polar_parts() {
        // omega = 2 dx1^dx2 + dx3^dx4: the skew matrix is block(2R, R) with
        // R the rotation generator, its squared field diag(4,4,1,1), the
        // metric diag(2,2,1,1) and J the standard structure.
        let omega = standard_symplectic().add(&FormField::from_parts(
            2,
            vec![(vec![0, 1], Arc::new(ConstField(1.0)) as Field)],
        ));
        let acs = structure_at(&omega, [0.0; 4]).unwrap();
        let a_want = [
            [0.0, -2.0, 0.0, 0.0],
            [2.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, -1.0],
            [0.0, 0.0, 1.0, 0.0],
        ];
        let gram_want = [
            [2.0, 0.0, 0.0, 0.0],
            [0.0, 2.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        mat_close(&acs.a, &a_want, 0.0);
        mat_close(
            &acs.a.matmul(&acs.a).scale(-1.0),
            &[
                [4.0, 0.0, 0.0, 0.0],
                [0.0, 4.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ],
            0.0,
        );
        mat_close(&acs.gram, &gram_want, 1e-12);
        mat_close(&acs.j, &J0, 1e-12);
        assert!((acs.least_square - 1.0).abs() < 1e-12);
    }

    #[test]
    fn skew_matrix_represents_the_form_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let omega = random_form(&mut rng, 1.0);
        for _ in 0..4 {
            let p: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
            let a = skew_matrix(&omega, p);
            for _ in 0..25 {
                let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                let w: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                let aw = a.apply(&w);
                let through_a: f64 = -(0..4).map(|i| v[i] * aw[i]).sum::<f64>();
                let direct = omega.eval_on_pair(p, v, w);
                assert!((through_a - direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn random_structures_near_the_standard_one_satisfy_all_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..20 {
            // Skew perturbation of J0 with Frobenius norm exactly 0.3, inside
            // the regime where A stays invertible.
            let mut d = [[0.0f64; 4]; 4];
            for i in 0..4 {
                for j in i + 1..4 {
                    d[i][j] = rng.gen_range(-1.0..1.0);
                    d[j][i] = -d[i][j];
                }
            }
            let fro: f64 = d.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            let a = Mat4::from_fn(|i, j| J0[i][j] + 0.3 * d[i][j] / fro);
            let acs = polar_acs(&a).unwrap();
            assert!(acs.least_square > 0.4);
            let omega = form_from_skew(&a);
            let res = identity_residuals(&omega, [0.0; 4], &acs, 50, &mut rng);
            assert!(
                res.max() <= TOL_KAHLER_ID,
                "residuals {:.3e} {:.3e} {:.3e} {:.3e} {:.3e} {:.3e}",
                res.skew,
                res.square_def,
                res.root,
                res.involution,
                res.isometry,
                res.compatibility
            );
        }
    }

    #[test]
    fn jet_route_agrees_with_the_eigen_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let omega = perturbed_form(&mut rng, 0.1);
        for _ in 0..3 {
            let p: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let jets = structure_jets(&omega, p, 2).unwrap();
            let acs = structure_at(&omega, p).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    assert!((jets.gram.0[i][j].val() - acs.gram.0[i][j]).abs() < 1e-11);
                    assert!((jets.j.0[i][j].val() - acs.j.0[i][j]).abs() < 1e-11);
                }
            }
            // Taylor coefficients against central differences of the eigen
            // route: two fully independent paths to the first derivatives.
            let h = 1e-4;
            for k in 0..4 {
                let (mut pp, mut pm) = (p, p);
                pp[k] += h;
                pm[k] -= h;
                let gp = structure_at(&omega, pp).unwrap().gram;
                let gm = structure_at(&omega, pm).unwrap().gram;
                for i in 0..4 {
                    for j in 0..4 {
                        let fd = (gp.0[i][j] - gm.0[i][j]) / (2.0 * h);
                        let jet = jets.gram.0[i][j].derivative_jet(k).val();
                        assert!(
                            (fd - jet).abs() < 1e-6,
                            "d gram[{i}][{j}] / dx{k}: fd {fd} vs jet {jet}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn comass_of_the_standard_structure_is_attained_at_complex_pairs() {
        let omega = standard_symplectic();
        let acs = structure_at(&omega, [0.0; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let est = wirtinger_comass(&acs, 2000, &mut rng);
        assert!((est.attained - 1.0).abs() < 1e-13);
        assert!(est.sampled <= 1.0 + 1e-12);
        assert!(est.sampled > 0.7, "sampling failed to explore: {}", est.sampled);
        // A Lagrangian-type plane scores zero flux.
        assert_eq!(
            omega.eval_on_pair([0.0; 4], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]),
            0.0
        );
    }

    #[test]
    fn comass_of_a_perturbed_structure_stays_wirtinger_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let omega = perturbed_form(&mut rng, 0.05);
        for _ in 0..5 {
            let p: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let acs = structure_at(&omega, p).unwrap();
            let est = wirtinger_comass(&acs, 2000, &mut rng);
            assert!((est.attained - 1.0).abs() < 1e-10);
            assert!(est.sampled <= 1.0 + TOL_COMASS, "sampled {}", est.sampled);
        }
    }

    #[test]
    fn calibration_residual_of_flat_and_holomorphic_graphs() {
        let omega = standard_symplectic();
        let euclid = |_: [f64; 4]| Mat4::from_fn(|i, j| IDENT[i][j]);

        let flat: Vec<TangentSample> = (0..9)
            .map(|k| TangentSample {
                p: [0.3 * k as f64, -0.2 * k as f64, 0.0, 0.0],
                t1: [1.0, 0.0, 0.0, 0.0],
                t2: [0.0, 1.0, 0.0, 0.0],
            })
            .collect();
        assert!(calibration_residual(&omega, euclid, &flat) <= 1e-15);

        // Graph of w = c z^2: tangents (1, 0, 2cx, 2cy) and (0, 1, -2cy, 2cx).
        let c = 1e-3;
        let mut holo = Vec::new();
        let mut anti = Vec::new();
        for ix in -2i32..=2 {
            for iy in -2i32..=2 {
                let (x, y) = (0.5 * ix as f64, 0.5 * iy as f64);
                let (u, v) = (c * (x * x - y * y), 2.0 * c * x * y);
                holo.push(TangentSample {
                    p: [x, y, u, v],
                    t1: [1.0, 0.0, 2.0 * c * x, 2.0 * c * y],
                    t2: [0.0, 1.0, -2.0 * c * y, 2.0 * c * x],
                });
                // Conjugate graph w = c zbar: orientation-reversing fibers.
                anti.push(TangentSample {
                    p: [x, y, c * x, -c * y],
                    t1: [1.0, 0.0, c, 0.0],
                    t2: [0.0, 1.0, 0.0, -c],
                });
            }
        }
        assert!(calibration_residual(&omega, euclid, &holo) <= 1e-12);
        let defect = calibration_residual(&omega, euclid, &anti);
        assert!((defect - 2.0 * c * c).abs() < 1e-15, "defect {defect}");
    }

    #[test]
    fn tangent_planes_of_holomorphic_graphs_are_j_invariant() {
        let j0 = |_: [f64; 4]| Mat4::from_fn(|i, j| J0[i][j]);
        let c = 1e-3;
        let holo: Vec<TangentSample> = (0..16)
            .map(|k| {
                let (x, y) = (0.25 * (k % 4) as f64, 0.25 * (k / 4) as f64);
                TangentSample {
                    p: [x, y, 0.0, 0.0],
                    t1: [1.0, 0.0, 2.0 * c * x, 2.0 * c * y],
                    t2: [0.0, 1.0, -2.0 * c * y, 2.0 * c * x],
                }
            })
            .collect();
        assert!(j_invariance_residual(j0, &holo) <= 1e-13);

        // A totally real plane: J throws its tangents fully outside.
        let real_plane = [TangentSample {
            p: [0.0; 4],
            t1: [1.0, 0.0, 0.0, 0.0],
            t2: [0.0, 0.0, 1.0, 0.0],
        }];
        let res = j_invariance_residual(j0, &real_plane);
        assert!((res - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_form_is_rejected_and_near_degenerate_reported() {
        let omega = FormField::from_parts(
            2,
            vec![(vec![0, 1], Arc::new(ConstField(1.0)) as Field)],
        );
        assert!(matches!(
            structure_at(&omega, [0.0; 4]),
            Err(Error::Degenerate(_))
        ));

        let near = standard_symplectic().add(&FormField::from_parts(
            2,
            vec![(vec![2, 3], Arc::new(ConstField(-1.0 + 1e-7)) as Field)],
        ));
        let acs = structure_at(&near, [0.0; 4]).unwrap();
        assert!(acs.clamped);
        assert!(acs.least_square < EIG_CLAMP && acs.least_square > 0.0);
    }

    proptest! {
        // Wherever the form sits within t of the standard one, the skew field
        // sits within 2t of J0 (entrywise it is within t exactly; the slack
        // covers the certified constant).
        #[test]
        fn nearby_forms_have_nearby_skew_fields(
            coeffs in proptest::array::uniform6(-0.1f64..0.1),
            lin in proptest::array::uniform6(-0.05f64..0.05),
            p in proptest::array::uniform4(-1.0f64..1.0),
        ) {
            let pert = FormField::new(2, (0..6).map(|k| {
                Arc::new(PolyField::new(vec![
                    ([0; 4], coeffs[k]),
                    ([1, 0, 0, 0], lin[k]),
                ])) as Field
            }).collect());
            let omega = standard_symplectic().add(&pert);
            let t = (0..6)
                .map(|k| (omega.values(p)[k] - standard_symplectic().values(p)[k]).abs())
                .fold(0.0f64, f64::max);
            let dist = skew_matrix(&omega, p)
                .sub(&Mat4::from_fn(|i, j| J0[i][j]))
                .max_mag();
            prop_assert!(dist <= 2.0 * t + 1e-15);
        }
    }
}
