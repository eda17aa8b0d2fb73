//! Gauss-Legendre quadrature, scalar and jet valued, with adaptive
//! bisection controlled by an 8-vs-16 point comparison.

use std::sync::OnceLock;

use crate::jet::Jet;

/// Nodes and weights of n-point Gauss-Legendre quadrature on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Tricomi initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// P_n(x) and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Cached nodes and weights on [0, 1] for the two adaptive stages.
pub fn unit_rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static R8: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static R16: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let build = |n: usize| {
        let (x, w) = gauss_legendre(n);
        (
            x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
            w.iter().map(|&t| 0.5 * t).collect(),
        )
    };
    match n {
        8 => R8.get_or_init(|| build(8)),
        16 => R16.get_or_init(|| build(16)),
        _ => panic!("only the 8 and 16 point unit rules are cached"),
    }
}

fn fixed_jet<F: Fn(f64) -> Jet>(f: &F, a: f64, b: f64, n: usize) -> Jet {
    let (x, w) = unit_rule(n);
    let mut acc: Option<Jet> = None;
    for (xi, wi) in x.iter().zip(w) {
        let v = f(a + (b - a) * xi);
        match &mut acc {
            None => acc = Some(v.scale(wi * (b - a))),
            Some(s) => s.add_scaled(&v, wi * (b - a)),
        }
    }
    acc.unwrap()
}

/// Adaptive integral of a jet-valued function over [a, b].  The error
/// control compares the 8- and 16-point rules coefficientwise and bisects
/// until they agree to `tol` relative to the running magnitude.
pub fn integrate_jet<F: Fn(f64) -> Jet>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> Jet {
    let c8 = fixed_jet(f, a, b, 8);
    let c16 = fixed_jet(f, a, b, 16);
    let err = (&c16 - &c8).max_abs_coeff();
    if err <= tol * (1.0 + c16.max_abs_coeff()) || depth == 0 {
        return c16;
    }
    let m = 0.5 * (a + b);
    let left = integrate_jet(f, a, m, tol, depth - 1);
    let right = integrate_jet(f, m, b, tol, depth - 1);
    &left + &right
}

fn fixed_jet_vec<F: Fn(f64) -> Vec<Jet>>(f: &F, a: f64, b: f64, n: usize) -> Vec<Jet> {
    let (x, w) = unit_rule(n);
    let mut acc: Option<Vec<Jet>> = None;
    for (xi, wi) in x.iter().zip(w) {
        let v = f(a + (b - a) * xi);
        match &mut acc {
            None => acc = Some(v.iter().map(|j| j.scale(wi * (b - a))).collect()),
            Some(s) => {
                for (sj, vj) in s.iter_mut().zip(&v) {
                    sj.add_scaled(vj, wi * (b - a));
                }
            }
        }
    }
    acc.unwrap()
}

/// Adaptive integral of several jet-valued components in one pass, so the
/// integrand is evaluated once per node for all of them.
pub fn integrate_jet_vec<F: Fn(f64) -> Vec<Jet>>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
) -> Vec<Jet> {
    let c8 = fixed_jet_vec(f, a, b, 8);
    let c16 = fixed_jet_vec(f, a, b, 16);
    let err = c8
        .iter()
        .zip(&c16)
        .map(|(a, b)| (b - a).max_abs_coeff())
        .fold(0.0f64, f64::max);
    let mag = c16.iter().map(|j| j.max_abs_coeff()).fold(0.0f64, f64::max);
    if err <= tol * (1.0 + mag) || depth == 0 {
        return c16;
    }
    let m = 0.5 * (a + b);
    let left = integrate_jet_vec(f, a, m, tol, depth - 1);
    let right = integrate_jet_vec(f, m, b, tol, depth - 1);
    left.iter().zip(&right).map(|(l, r)| l + r).collect()
}

pub fn fixed_f64<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = unit_rule(n);
    x.iter()
        .zip(w)
        .map(|(xi, wi)| wi * (b - a) * f(a + (b - a) * xi))
        .sum()
}

/// Adaptive scalar integral, same strategy as [`integrate_jet`].
pub fn integrate_f64<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let c8 = fixed_f64(f, a, b, 8);
    let c16 = fixed_f64(f, a, b, 16);
    if (c16 - c8).abs() <= tol * (1.0 + c16.abs()) || depth == 0 {
        return c16;
    }
    let m = 0.5 * (a + b);
    integrate_f64(f, a, m, tol, depth - 1) + integrate_f64(f, m, b, tol, depth - 1)
}
