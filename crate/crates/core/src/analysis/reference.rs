use super::{NeSolution, OracleError};
use crate::game::{ActionProfile, GameSpec};
use crate::sampling::Permutation;

/// Points `x*^0, ..., x*^m` traced by the equilibrium under permuted
/// component gradients frozen at `x*`:
/// `x*^l = P[x* - alpha * sum_{p<l} grad f_i(x*; pi_p^i)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub points: Vec<ActionProfile>,
}

impl ReferenceTrajectory {
    pub fn endpoint(&self) -> &ActionProfile {
        self.points.last().expect("trajectory holds x*^0")
    }
}

pub fn reference_trajectory(
    game: &GameSpec,
    ne: &NeSolution,
    alpha: f64,
    perms: &[Permutation],
) -> Result<ReferenceTrajectory, OracleError> {
    let (n, m) = (game.n(), game.m());
    if perms.len() != n {
        return Err(OracleError::Dimension { expected: n, got: perms.len() });
    }
    if let Some(p) = perms.iter().find(|p| p.len() != m || !p.is_bijection()) {
        return Err(OracleError::Dimension { expected: m, got: p.len() });
    }
    let xs = &ne.x_star;
    // frozen gradients, reordered by each player's permutation
    let mut grads = vec![0.0; n * m];
    for i in 0..n {
        for (l, &c) in perms[i].order.iter().enumerate() {
            grads[i * m + l] = game.component_grad(i, c, xs)?;
        }
    }
    let mut sums = vec![0.0; n];
    let mut points = Vec::with_capacity(m + 1);
    points.push(xs.clone());
    for l in 0..m {
        for i in 0..n {
            sums[i] += grads[i * m + l];
        }
        let mut p: Vec<f64> = (0..n).map(|i| xs[i] - alpha * sums[i]).collect();
        game.bounds().project_in_place(&mut p);
        points.push(ActionProfile(p));
    }
    Ok(ReferenceTrajectory { points })
}
