use std::fmt::Write as _;

use super::OracleError;
use crate::game::GameConstants;
use crate::network::AugmentedMatrix;
use crate::schedule::{Schedule, ScheduleKind};

/// Closed-form right-hand sides of the constant-step convergence results,
/// together with every ingredient for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryBounds {
    pub alpha: f64,
    pub w: f64,
    pub m: usize,
    pub n: usize,
    pub horizon: usize,
    pub mu: f64,
    pub lip: f64,
    /// `kappa = L / mu`.
    pub kappa: f64,
    pub gbound: f64,
    pub sigma_star_sq: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `A0 = E|x0 - x*|^2`.
    pub a0: f64,
    pub ybar0_sq: f64,
    /// `r = 1 - (alpha mu - alpha^2 mu^2)`.
    pub r: f64,
    /// `s = 1 - (w lmin - w^2 lmax)`.
    pub s: f64,
    pub rho: f64,
    /// Steady consensus error `(n^2 a^2 G^2/(w lmin) + n^2 a^2 G^2) / (w lmin - w^2 lmax)`.
    pub lemma2_steady: f64,
}

impl TheoryBounds {
    /// `(1 - mu alpha)^{mK} A0 + alpha^3 L m n^2 sigma*^2 / (2 mu)`.
    pub fn theorem1_rhs(&self, k: usize) -> f64 {
        (1.0 - self.mu * self.alpha).powf((self.m * k) as f64) * self.a0 + self.theorem1_residual()
    }

    pub fn theorem1_residual(&self) -> f64 {
        self.alpha.powi(3) * self.lip * self.m as f64 * (self.n * self.n) as f64 * self.sigma_star_sq / (2.0 * self.mu)
    }

    /// Partial-information constant-step bound with the consensus transient `4 kappa m |ybar0|^2 K rho^{K-1}`.
    pub fn theorem2_rhs(&self, k: usize) -> f64 {
        self.theorem2_with_exponent(k, k as f64 - 1.0)
    }

    /// Variant with the transient exponent `m (K - 1)`.
    pub fn theorem2_rhs_alt(&self, k: usize) -> f64 {
        self.theorem2_with_exponent(k, self.m as f64 * (k as f64 - 1.0))
    }

    fn theorem2_with_exponent(&self, k: usize, exponent: f64) -> f64 {
        let transient_x = self.r.powf((self.m * k) as f64) * self.a0;
        let transient_y = if k == 0 || self.ybar0_sq == 0.0 {
            0.0
        } else {
            4.0 * self.kappa * self.m as f64 * self.ybar0_sq * k as f64 * self.rho.powf(exponent)
        };
        transient_x + transient_y + self.theorem2_residual()
    }

    /// `16 kappa n^2 G^2 (w lmin + 1)/(w^2 lmin^2) alpha^2 + m n^3 kappa sigma*^2 alpha^2 + 4 alpha n G^2 / mu`.
    pub fn theorem2_residual(&self) -> f64 {
        let (a, n, g2) = (self.alpha, self.n as f64, self.gbound * self.gbound);
        let wl = self.w * self.lambda_min;
        16.0 * self.kappa * n * n * g2 * (wl + 1.0) / (wl * wl) * a * a
            + self.m as f64 * n.powi(3) * self.kappa * self.sigma_star_sq * a * a
            + 4.0 * a * n * g2 / self.mu
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let k = self.horizon;
        for (name, v) in [
            ("alpha", self.alpha),
            ("w", self.w),
            ("m", self.m as f64),
            ("n", self.n as f64),
            ("epochs", k as f64),
            ("mu", self.mu),
            ("L", self.lip),
            ("kappa", self.kappa),
            ("G", self.gbound),
            ("sigma_star_sq", self.sigma_star_sq),
            ("lambda_min", self.lambda_min),
            ("lambda_max", self.lambda_max),
            ("A0", self.a0),
            ("ybar0_sq", self.ybar0_sq),
            ("r", self.r),
            ("s", self.s),
            ("rho", self.rho),
            ("lemma2_steady", self.lemma2_steady),
            ("theorem1_residual", self.theorem1_residual()),
            ("theorem1_rhs_K", self.theorem1_rhs(k)),
            ("theorem2_residual", self.theorem2_residual()),
            ("theorem2_rhs_K", self.theorem2_rhs(k)),
            ("theorem2_rhs_K_exponent_mK", self.theorem2_rhs_alt(k)),
        ] {
            let _ = writeln!(s, "{name} = {v}");
        }
        s
    }
}

/// Evaluates the bounds for a constant schedule with conservative constants.
pub fn theory_bounds(
    constants: &GameConstants,
    h: &AugmentedMatrix,
    schedule: &Schedule,
    m: usize,
    n: usize,
    a0: f64,
    ybar0_sq: f64,
) -> Result<TheoryBounds, OracleError> {
    if schedule.kind != ScheduleKind::Constant {
        return Err(OracleError::NotConstant);
    }
    let c = constants.conservative();
    let (alpha, w) = (schedule.alpha0, schedule.w0);
    let r = 1.0 - (alpha * c.mu - alpha * alpha * c.mu * c.mu);
    let contraction = w * h.lambda_min - w * w * h.lambda_max;
    let s = 1.0 - contraction;
    for (name, value) in [("r", r), ("s", s)] {
        if !(value > 0.0 && value < 1.0) {
            return Err(OracleError::Contraction { name, value });
        }
    }
    let nf = n as f64;
    let g2 = c.gbound * c.gbound;
    let lemma2_steady = (nf * nf * alpha * alpha * g2 / (w * h.lambda_min) + nf * nf * alpha * alpha * g2) / contraction;
    Ok(TheoryBounds {
        alpha,
        w,
        m,
        n,
        horizon: schedule.horizon,
        mu: c.mu,
        lip: c.lip,
        kappa: c.lip / c.mu,
        gbound: c.gbound,
        sigma_star_sq: c.sigma_star_sq,
        lambda_min: h.lambda_min,
        lambda_max: h.lambda_max,
        a0,
        ybar0_sq,
        r,
        s,
        rho: r.max(s),
        lemma2_steady,
    })
}
