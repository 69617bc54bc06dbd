use rand::Rng;

use super::{reference_trajectory, NeSolution, OracleError};
use crate::game::GameSpec;
use crate::sampling::{fresh_permutation, Permutation};

pub const DEFAULT_NUM_PERMS: usize = 512;

/// Monte Carlo estimate of the per-player shuffling variance
/// `max_l E[D_{f_i, pi_l}(x*^l_i, x*_i)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuffleVarianceEstimate {
    pub sigma_shuffle_sq: Vec<f64>,
    /// Standard error of each player's maximising mean.
    pub std_error: Vec<f64>,
    /// Inner step attaining the maximum.
    pub argmax_step: Vec<usize>,
    pub num_permutations: usize,
    pub alpha: f64,
    /// Set when the equilibrium is on the boundary.
    pub approximate: bool,
}

impl ShuffleVarianceEstimate {
    pub fn max(&self) -> f64 {
        self.sigma_shuffle_sq.iter().copied().fold(0.0, f64::max)
    }
}

/// The expectation is taken jointly over the permutation tuple of all
/// players; the divergence of `f_i(.; pi_l^i)` is taken in player `i`'s own
/// coordinate with the others held at `x*`.
pub fn shuffling_variance_mc<R: Rng + ?Sized>(
    game: &GameSpec,
    ne: &NeSolution,
    alpha: f64,
    num_perms: usize,
    rng: &mut R,
) -> Result<ShuffleVarianceEstimate, OracleError> {
    let (n, m) = (game.n(), game.m());
    let num_perms = num_perms.max(1);
    let mut sum = vec![0.0; n * m];
    let mut sum_sq = vec![0.0; n * m];
    for _ in 0..num_perms {
        let perms: Vec<Permutation> = (0..n).map(|_| fresh_permutation(rng, m)).collect();
        let traj = reference_trajectory(game, ne, alpha, &perms)?;
        for i in 0..n {
            for l in 0..m {
                let d = game.component_bregman(i, perms[i].order[l], traj.points[l][i], &ne.x_star)?;
                sum[i * m + l] += d;
                sum_sq[i * m + l] += d * d;
            }
        }
    }
    let np = num_perms as f64;
    let mut est = vec![0.0; n];
    let mut se = vec![0.0; n];
    let mut arg = vec![0; n];
    for i in 0..n {
        for l in 0..m {
            let mean = sum[i * m + l] / np;
            if l == 0 || mean > est[i] {
                est[i] = mean;
                arg[i] = l;
                se[i] = if num_perms > 1 {
                    let var = (sum_sq[i * m + l] - np * mean * mean).max(0.0) / (np - 1.0);
                    (var / np).sqrt()
                } else {
                    0.0
                };
            }
        }
    }
    Ok(ShuffleVarianceEstimate {
        sigma_shuffle_sq: est,
        std_error: se,
        argmax_step: arg,
        num_permutations: num_perms,
        alpha,
        approximate: !ne.interior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::solve_ne_affine;
    use crate::game::{make_ev_game, EvRanges};
    use crate::sampling::{stream_rng, StreamPurpose};

    #[test]
    fn single_component_has_no_variance() {
        let g = make_ev_game(3, 1, 4, &EvRanges::default()).unwrap();
        let ne = solve_ne_affine(&g).unwrap();
        let mut rng = stream_rng(0, StreamPurpose::Variance, 0, 0);
        let est = shuffling_variance_mc(&g, &ne, 0.01, 16, &mut rng).unwrap();
        assert!(est.sigma_shuffle_sq.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_components_closed_form() {
        // m = 2: x*^1 - x* = -alpha g_{pi_0}, and D = q/2 (alpha g)^2 averaged
        // over the two equally likely first components
        let g = make_ev_game(2, 2, 6, &EvRanges::default()).unwrap();
        let ne = solve_ne_affine(&g).unwrap();
        let alpha = 1e-3;
        let mut rng = stream_rng(3, StreamPurpose::Variance, 0, 0);
        let est = shuffling_variance_mc(&g, &ne, alpha, 4000, &mut rng).unwrap();
        let crate::game::Components::Ev(p) = g.components() else { unreachable!() };
        for i in 0..2 {
            let exact: f64 = (0..2)
                .map(|l| {
                    let gl = g.component_grad(i, l, &ne.x_star).unwrap();
                    0.5 * p[i * 2 + l].q * (alpha * gl).powi(2) / 2.0
                })
                .sum();
            assert!((est.sigma_shuffle_sq[i] - exact).abs() <= 4.0 * est.std_error[i] + 1e-18, "{i}");
            assert_eq!(est.argmax_step[i], 1);
        }
    }
}
