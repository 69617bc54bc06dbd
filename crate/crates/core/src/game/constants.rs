//! Numeric extraction of the game constants `mu`, `L`, `mu_F`, `G` and
//! `sigma_*^2`.

use nalgebra::DMatrix;
use rand::Rng;

use super::{Components, GameError, GameSpec};
use crate::linalg::symmetric_eigen;
use crate::sampling::{stream_rng, StreamPurpose};

/// Grid points per player coordinate for curvature and gradient extrema.
pub const GRID_POINTS: usize = 1024;
/// Random pairs used to estimate `mu_F` and the Lipschitz constant of `grad F`.
pub const MONOTONE_PAIRS: usize = 2048;
/// Base points at which the finite-difference Jacobian picks extremal directions.
pub const JACOBIAN_PROBES: usize = 64;
/// Relative safety margin applied to sampled or gridded constants.
pub const SAFETY: f64 = 0.05;

const SAMPLING_SEED: u64 = 0x6d75_5f46;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameConstants {
    /// Per-component strong convexity modulus in the own coordinate.
    pub mu: f64,
    /// Per-component smoothness in the own coordinate.
    pub lip: f64,
    /// Strong monotonicity modulus of `grad F`.
    pub mu_f: f64,
    /// Lipschitz constant of `grad F` (used by the fixed-point oracle).
    pub lip_f: f64,
    /// Uniform bound on `|grad_i f_i(x; l)|` over the box.
    pub gbound: f64,
    /// `(1/(mn)) sum_i sum_l |grad_i f_i(x*; l)|^2`.
    pub sigma_star_sq: f64,
    /// `L / mu`.
    pub kappa_cond: f64,
    /// `mu` and `lip` are exact (EV kind) rather than gridded.
    pub exact_curvature: bool,
}

impl GameConstants {
    /// Constants widened by [`SAFETY`]: lower bounds shrink, upper bounds
    /// grow. Exact curvature constants are kept as they are.
    pub fn conservative(&self) -> GameConstants {
        let (mu, lip) = if self.exact_curvature {
            (self.mu, self.lip)
        } else {
            (self.mu * (1.0 - SAFETY), self.lip * (1.0 + SAFETY))
        };
        GameConstants {
            mu,
            lip,
            mu_f: self.mu_f * (1.0 - SAFETY),
            lip_f: self.lip_f * (1.0 + SAFETY),
            gbound: self.gbound * (1.0 + SAFETY),
            sigma_star_sq: self.sigma_star_sq,
            kappa_cond: lip / mu,
            exact_curvature: self.exact_curvature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneEstimate {
    pub mu_f: f64,
    pub lip_f: f64,
    pub pairs: usize,
}

struct PairStats {
    min_quotient: f64,
    max_ratio: f64,
    pairs: usize,
}

impl PairStats {
    fn push(&mut self, game: &GameSpec, x: &[f64], y: &[f64]) -> Result<(), GameError> {
        let gx = game.full_pseudo_gradient(x)?;
        let gy = game.full_pseudo_gradient(y)?;
        let mut inner = 0.0;
        let mut dx2 = 0.0;
        let mut dg2 = 0.0;
        for k in 0..x.len() {
            let dx = x[k] - y[k];
            let dg = gx[k] - gy[k];
            inner += dg * dx;
            dx2 += dx * dx;
            dg2 += dg * dg;
        }
        if dx2 > 0.0 {
            self.min_quotient = self.min_quotient.min(inner / dx2);
            self.max_ratio = self.max_ratio.max((dg2 / dx2).sqrt());
            self.pairs += 1;
        }
        Ok(())
    }
}

/// Largest step along `dir` from `x` that stays inside the box.
fn max_step(game: &GameSpec, x: &[f64], dir: &[f64]) -> f64 {
    let b = game.bounds();
    let mut t = f64::INFINITY;
    for j in 0..x.len() {
        if dir[j] > 0.0 {
            t = t.min((b.upper()[j] - x[j]) / dir[j]);
        } else if dir[j] < 0.0 {
            t = t.min((b.lower()[j] - x[j]) / dir[j]);
        }
    }
    t
}

fn fd_jacobian(game: &GameSpec, x: &[f64]) -> Result<DMatrix<f64>, GameError> {
    let n = game.n();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for c in 0..n {
        let h = 1e-5 * game.bounds().width(c);
        xp[c] = x[c] + h;
        let gp = game.full_pseudo_gradient(&xp)?;
        xp[c] = x[c] - h;
        let gm = game.full_pseudo_gradient(&xp)?;
        xp[c] = x[c];
        for r in 0..n {
            jac[(r, c)] = (gp[r] - gm[r]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Sampled estimates of the monotonicity modulus and Lipschitz constant
/// of `grad F` over the box.
///
/// Uniform random pairs are complemented by pairs aligned with the extremal
/// eigenvectors of the symmetrised finite-difference Jacobian (and of
/// `J^T J`) at random base points, which pins the extremes for affine
/// pseudo-gradients.
pub fn monotonicity_estimates(game: &GameSpec) -> Result<MonotoneEstimate, GameError> {
    let n = game.n();
    let b = game.bounds();
    let mut rng = stream_rng(SAMPLING_SEED, StreamPurpose::Constants, 0, 0);
    let mut stats = PairStats {
        min_quotient: f64::INFINITY,
        max_ratio: 0.0,
        pairs: 0,
    };
    for _ in 0..MONOTONE_PAIRS {
        let x = b.sample(&mut rng);
        let y = b.sample(&mut rng);
        stats.push(game, &x, &y)?;
    }
    for _ in 0..JACOBIAN_PROBES {
        // keep the finite-difference stencil inside the box
        let x: Vec<f64> = (0..n)
            .map(|j| {
                let w = b.width(j);
                b.lower()[j] + 0.01 * w + 0.98 * w * rng.gen::<f64>()
            })
            .collect();
        let jac = fd_jacobian(game, &x)?;
        let sym = (&jac + jac.transpose()) * 0.5;
        let (_, vecs) = symmetric_eigen(&sym);
        let (_, svecs) = symmetric_eigen(&(jac.transpose() * &jac));
        let min_width = (0..n).map(|j| b.width(j)).fold(f64::INFINITY, f64::min);
        for dir in [vecs.column(0).iter().cloned().collect::<Vec<_>>(), svecs.column(n - 1).iter().cloned().collect()] {
            for sign in [1.0, -1.0] {
                let d: Vec<f64> = dir.iter().map(|v| sign * v).collect();
                let t = (0.5 * max_step(game, &x, &d)).min(0.05 * min_width);
                if t > 0.0 && t.is_finite() {
                    let y: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
                    stats.push(game, &x, &y)?;
                }
            }
        }
    }
    if !(stats.min_quotient > 0.0) {
        return Err(GameError::MonotonicityViolation {
            mu_f: stats.min_quotient,
        });
    }
    Ok(MonotoneEstimate {
        mu_f: stats.min_quotient,
        lip_f: stats.max_ratio,
        pairs: stats.pairs,
    })
}

/// Profiles minimising and maximising `sum_j C_ij x_j` over the box, with
/// `x_i` left as a placeholder.
fn coupling_extremes(game: &GameSpec, i: usize) -> (Vec<f64>, Vec<f64>) {
    let b = game.bounds();
    let c = game.coupling();
    let mut lo = b.lower().to_vec();
    let mut hi = b.upper().to_vec();
    for j in 0..game.n() {
        if c[(i, j)] < 0.0 {
            lo[j] = b.upper()[j];
            hi[j] = b.lower()[j];
        }
    }
    (lo, hi)
}

/// Numeric game constants around the equilibrium `x_star`.
///
/// `mu`/`lip` are exact for the EV kind; for the edge kind they extremise the
/// analytic own curvature over a [`GRID_POINTS`]-point grid of each player's
/// coordinate, with the other players placed where the coupling sum is
/// smallest, largest, and where the congestion curvature peaks. `gbound`
/// uses the same grid and extreme placements.
pub fn game_constants(game: &GameSpec, x_star: &[f64]) -> Result<GameConstants, GameError> {
    let n = game.n();
    let m = game.m();
    if x_star.len() != n {
        return Err(GameError::DimensionMismatch {
            expected: n,
            got: x_star.len(),
        });
    }
    let b = game.bounds();
    let mut mu = f64::INFINITY;
    let mut lip = 0.0f64;
    let mut gbound = 0.0f64;
    let exact = matches!(game.components(), Components::Ev(_));
    if let Components::Ev(params) = game.components() {
        for p in params {
            mu = mu.min(p.q);
            lip = lip.max(p.q);
        }
    }
    for i in 0..n {
        let (mut lo_cfg, mut hi_cfg) = coupling_extremes(game, i);
        let s_lo = game.coupling_sum(i, &{
            let mut v = lo_cfg.clone();
            v[i] = 0.0;
            v
        });
        let s_hi = game.coupling_sum(i, &{
            let mut v = hi_cfg.clone();
            v[i] = 0.0;
            v
        });
        for g in 0..GRID_POINTS {
            let xi = b.lower()[i] + b.width(i) * g as f64 / (GRID_POINTS - 1) as f64;
            lo_cfg[i] = xi;
            hi_cfg[i] = xi;
            for ell in 0..m {
                gbound = gbound
                    .max(game.component_grad(i, ell, &lo_cfg)?.abs())
                    .max(game.component_grad(i, ell, &hi_cfg)?.abs());
                if exact {
                    continue;
                }
                let mut curv = [
                    game.component_curvature(i, ell, &lo_cfg)?,
                    game.component_curvature(i, ell, &hi_cfg)?,
                    f64::NAN,
                ];
                if let Components::Edge { params, slope, .. } = game.components() {
                    // coupling sum putting the logistic argument at zero
                    let target = params[i * m + ell].r - slope[i] * xi;
                    if s_hi > s_lo && target > s_lo && target < s_hi {
                        let t = (target - s_lo) / (s_hi - s_lo);
                        let peak: Vec<f64> = lo_cfg
                            .iter()
                            .zip(&hi_cfg)
                            .map(|(l, h)| l + t * (h - l))
                            .collect();
                        curv[2] = game.component_curvature(i, ell, &peak)?;
                    }
                }
                for v in curv.into_iter().filter(|v| !v.is_nan()) {
                    mu = mu.min(v);
                    lip = lip.max(v);
                }
            }
        }
    }
    let mono = monotonicity_estimates(game)?;
    let mut sum = 0.0;
    for i in 0..n {
        for ell in 0..m {
            let g = game.component_grad(i, ell, x_star)?;
            sum += g * g;
        }
    }
    Ok(GameConstants {
        mu,
        lip,
        mu_f: mono.mu_f,
        lip_f: mono.lip_f,
        gbound,
        sigma_star_sq: sum / (m * n) as f64,
        kappa_cond: lip / mu,
        exact_curvature: exact,
    })
}
