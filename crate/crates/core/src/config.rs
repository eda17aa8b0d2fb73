//! Run parameters and the numeric budgets shared by the certificate suites.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Certificate tolerances.
//
// Residuals compare against these; a residual is what is left of an identity
// that should hold exactly in exact arithmetic, measured on grids or random
// samples.  Values are chosen so that honest double-precision evaluation of
// the construction passes with margin, while breaking any single ingredient
// (wrong sign, dropped term, shifted cutoff) lands orders of magnitude above.
// ---------------------------------------------------------------------------

/// Seed zeros must satisfy |g| below this at every reported zero.
pub const TOL_ZERO: f64 = 1e-12;

/// Primitive reconstruction: sup of |d(alpha) - beta| over the test grid.
pub const TOL_PRIMITIVE_D: f64 = 1e-7;
/// Primitive reconstruction: sup of the pullback of alpha to the plane.
pub const TOL_PRIMITIVE_PLANE: f64 = 1e-10;

/// Pointwise algebraic identities of the synthesized pair (g, J).
pub const TOL_KAHLER_ID: f64 = 1e-10;

/// Glued form: sup of |d(omega)| coefficients over the sample grid.
pub const TOL_GLUE_CLOSED: f64 = 1e-8;
/// Glued form: restriction of omega - omega0 to the first coordinate plane.
pub const TOL_GLUE_PLANE: f64 = 1e-9;
/// Glued form: mixed-pair contraction residual.
pub const TOL_GLUE_MIXED: f64 = 1e-8;
/// Glued form: deviation from omega0 outside the declared support.
pub const TOL_GLUE_SUPPORT: f64 = 1e-12;

/// Calibration defect allowed on any surface patch.
pub const TOL_CALIBRATION: f64 = 1e-6;
/// Relative disagreement allowed between total area and total flux.
pub const TOL_AREA_FLUX: f64 = 1e-6;

/// Comass sampling: max_v omega(v, w) over unit pairs may exceed 1 by this.
pub const TOL_COMASS: f64 = 1e-9;

/// Residual bound for locating points and roots by Newton iteration.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITERS: usize = 50;

/// Jacobi eigensolver: off-diagonal rotations stop below this.
pub const JACOBI_TOL: f64 = 1e-14;
/// Eigenvalues of the (positive) squared field are clamped from below.
pub const EIG_CLAMP: f64 = 1e-12;

/// Square-root iteration on jets stops when the step is below this.
pub const SQRT_ITER_TOL: f64 = 1e-15;
pub const SQRT_ITER_MAX: usize = 60;

/// Two candidate zeros closer than this are treated as one point.
pub const ZERO_CLUSTER_TOL: f64 = 1e-9;

/// Tangent-plane separations below this abort the construction outright.
pub const MIN_TANGENT_SEPARATION: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Run configuration.
// ---------------------------------------------------------------------------

/// Which seed family to build.
///
/// `Quadratic` crosses two sheets transversally at every treated
/// self-intersection; `Branched` sends four sheets through each treated point
/// and desingularizes them with a single branched neck.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Quadratic,
    Branched,
}

impl Variant {
    /// Exponent of the first coordinate of the seed immersion.
    pub fn power(self) -> u32 {
        match self {
            Variant::Quadratic => 3,
            Variant::Branched => 7,
        }
    }

    /// Number of rays on which the zeros of the seed factor product lie.
    pub fn ray_count(self) -> usize {
        match self {
            Variant::Quadratic => 4,
            Variant::Branched => 8,
        }
    }

    /// Phase offsets c_k of the factors, in units of pi.
    pub fn ray_offsets(self) -> Vec<f64> {
        match self {
            Variant::Quadratic => (0..4).map(|k| (3.0 - 2.0 * k as f64) / 6.0).collect(),
            Variant::Branched => (0..8).map(|k| (7.0 - 2.0 * k as f64) / 14.0).collect(),
        }
    }

    /// How many sheets pass through one treated self-intersection.
    pub fn sheets_per_point(self) -> usize {
        match self {
            Variant::Quadratic => 2,
            Variant::Branched => 4,
        }
    }
}

/// Full parameter set of one construction run.
///
/// The defaults build the quadratic variant on a domain large enough to
/// contain two generations of self-intersections, desingularize the three
/// outermost ones, and certify closeness budgets that the double-precision
/// pipeline meets with two to four orders of magnitude of headroom.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    pub variant: Variant,
    /// Exponent of the damping factor exp(-z^(-alpha)); must stay below 1 so
    /// the factor is bounded on the whole slit plane.
    pub alpha: f64,
    /// Radius parameter of the domain boundary curve.
    pub curve_r: f64,
    /// Flattening parameter of the domain boundary curve; mu*r >= 1/2 keeps
    /// the curve embedded with a single vertical tangent at the origin.
    pub curve_mu: f64,
    /// Zeros with modulus below this are left untouched by the construction.
    pub z_min: f64,
    /// Number K of self-intersections to replace by necks.
    pub necks: usize,
    /// Total decay budget epsilon for the neck metric certificates.
    pub epsilon: f64,
    /// Order N up to which glued objects are compared with the standard ones.
    pub big_n: usize,
    /// Allowed C^N distance between the glued form and the standard form.
    pub eta: f64,
    /// Seed for every randomized certificate in the run.
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            variant: Variant::Quadratic,
            alpha: 0.5,
            curve_r: 30.0,
            curve_mu: 1.0 / 30.0,
            z_min: 0.5,
            necks: 3,
            epsilon: 1e-2,
            big_n: 2,
            eta: 1e-2,
            seed: 0,
        }
    }
}

impl Config {
    /// Half-width of the inner cutoff collar of the glued form.
    ///
    /// Cutoff derivatives scale like sigma^(-N), so sigma must stay
    /// comparable to eta or the C^N budget is spent on the cutoff alone.
    pub fn sigma(&self) -> f64 {
        self.eta / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !self.curve_r.is_finite()
            || !self.curve_mu.is_finite()
            || self.curve_r <= 0.0
            || self.curve_mu <= 0.0
        {
            return Err(Error::Config("curve parameters must be positive".into()));
        }
        if 2.0 * self.curve_mu * self.curve_r < 1.0 {
            return Err(Error::Config(format!(
                "2*mu*r = {} < 1: boundary curve fails to close around the origin",
                2.0 * self.curve_mu * self.curve_r
            )));
        }
        if self.necks == 0 {
            return Err(Error::Config("need at least one neck".into()));
        }
        if !self.z_min.is_finite() || self.z_min <= 0.0 {
            return Err(Error::Config("z_min must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 0.1) {
            return Err(Error::Config("epsilon must lie in (0, 0.1]".into()));
        }
        if self.big_n == 0 || self.big_n > 4 {
            return Err(Error::Config("big_n must lie in 1..=4".into()));
        }
        if !(self.eta > 0.0 && self.eta <= 0.1) {
            return Err(Error::Config("eta must lie in (0, 0.1]".into()));
        }
        Ok(())
    }

    /// Decay budget of the k-th neck (1-based): the per-neck certificate
    /// order is kbar = max(k, N) and the budget epsilon * 2^(-kbar-1), so the
    /// budgets sum below epsilon regardless of K.
    pub fn neck_budget(&self, k: usize) -> (usize, f64) {
        let kbar = k.max(self.big_n);
        (kbar, self.epsilon * 0.5f64.powi(kbar as i32 + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn neck_budgets_sum_below_epsilon() {
        let cfg = Config::default();
        let total: f64 = (1..=cfg.necks).map(|k| cfg.neck_budget(k).1).sum();
        assert!(total < cfg.epsilon);
        // With K = 3 and N = 2 the orders are 2, 2, 3.
        assert_eq!(cfg.neck_budget(1).0, 2);
        assert_eq!(cfg.neck_budget(2).0, 2);
        assert_eq!(cfg.neck_budget(3).0, 3);
    }

    #[test]
    fn ray_offsets_are_symmetric() {
        for v in [Variant::Quadratic, Variant::Branched] {
            let c = v.ray_offsets();
            assert_eq!(c.len(), v.ray_count());
            for (a, b) in c.iter().zip(c.iter().rev()) {
                assert_eq!(*a, -*b);
            }
        }
    }

    #[test]
    fn degenerate_curve_rejected() {
        let cfg = Config {
            curve_mu: 1.0 / 100.0,
            ..Config::default()
        };
        assert!(cfg.validate().is_err());
    }
}
