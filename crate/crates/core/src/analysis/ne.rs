use nalgebra::DVector;

use super::OracleError;
use crate::game::{monotonicity_estimates, project, ActionProfile, Components, GameSpec, SAFETY};

pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITERS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeMethod {
    Affine,
    FixedPoint,
}

impl NeMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            NeMethod::Affine => "affine",
            NeMethod::FixedPoint => "fixed_point",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeSolution {
    pub x_star: ActionProfile,
    /// `|grad F(x_star)|`; only expected to vanish when `interior` holds.
    pub residual: f64,
    pub interior: bool,
    pub method: NeMethod,
    pub iterations: usize,
}

impl NeSolution {
    pub fn to_text(&self) -> String {
        let xs: Vec<String> = self.x_star.iter().map(f64::to_string).collect();
        format!(
            "method = {}\nresidual = {}\ninterior = {}\niterations = {}\nx_star = {}\n",
            self.method.as_str(),
            self.residual,
            self.interior,
            self.iterations,
            xs.join(",")
        )
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Direct solve of `(diag(qbar) + C) x = mean(q d) - bbar` for EV games.
///
/// Falls back to the projected fixed-point iteration when the solution is
/// not strictly inside the box.
pub fn solve_ne_affine(game: &GameSpec) -> Result<NeSolution, OracleError> {
    let Components::Ev(params) = game.components() else {
        return Err(OracleError::NotAffine);
    };
    let (n, m) = (game.n(), game.m());
    let mut a = game.coupling().clone();
    let mut rhs = DVector::zeros(n);
    for i in 0..n {
        let comps = &params[i * m..(i + 1) * m];
        a[(i, i)] = comps.iter().map(|p| p.q).sum::<f64>() / m as f64;
        rhs[i] = comps.iter().map(|p| p.q * p.d - p.b).sum::<f64>() / m as f64;
    }
    let sol = a.lu().solve(&rhs).ok_or(OracleError::Singular)?;
    let x: Vec<f64> = sol.iter().copied().collect();
    if !game.bounds().contains_interior(&x) {
        let start = project(&x, game.bounds());
        return fixed_point_from(game, start.into_inner(), FIXED_POINT_TOL, FIXED_POINT_MAX_ITERS);
    }
    let residual = norm(&game.full_pseudo_gradient(&x)?);
    Ok(NeSolution {
        x_star: ActionProfile(x),
        residual,
        interior: true,
        method: NeMethod::Affine,
        iterations: 0,
    })
}

/// Projected iteration `x <- P[x - tau grad F(x)]` with
/// `tau = mu_F / L_F^2`, started from the box centre.
pub fn solve_ne_fixed_point(game: &GameSpec, tol: f64, max_iters: usize) -> Result<NeSolution, OracleError> {
    let b = game.bounds();
    let start = (0..game.n()).map(|j| 0.5 * (b.lower()[j] + b.upper()[j])).collect();
    fixed_point_from(game, start, tol, max_iters)
}

fn fixed_point_from(game: &GameSpec, mut x: Vec<f64>, tol: f64, max_iters: usize) -> Result<NeSolution, OracleError> {
    let est = monotonicity_estimates(game)?;
    let mu_f = est.mu_f * (1.0 - SAFETY);
    let lip_f = est.lip_f * (1.0 + SAFETY);
    let tau = mu_f / (lip_f * lip_f);
    let b = game.bounds();
    let mut step = f64::INFINITY;
    for it in 1..=max_iters {
        let g = game.full_pseudo_gradient(&x)?;
        let mut next: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - tau * gi).collect();
        b.project_in_place(&mut next);
        step = x.iter().zip(&next).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
        x = next;
        if step <= tol {
            let residual = norm(&game.full_pseudo_gradient(&x)?);
            return Ok(NeSolution {
                interior: b.contains_interior(&x),
                x_star: ActionProfile(x),
                residual,
                method: NeMethod::FixedPoint,
                iterations: it,
            });
        }
    }
    Err(OracleError::NoConvergence { iters: max_iters, step })
}

/// Affine solve for EV games, fixed-point iteration otherwise.
pub fn solve_ne(game: &GameSpec) -> Result<NeSolution, OracleError> {
    match game.components() {
        Components::Ev(_) => solve_ne_affine(game),
        Components::Edge { .. } => solve_ne_fixed_point(game, FIXED_POINT_TOL, FIXED_POINT_MAX_ITERS),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use crate::game::{make_edge_game, make_ev_game, ActionBox, EdgeRanges, EvComponentParams, EvRanges};

    #[test]
    fn scalar_minimiser() {
        let g = GameSpec::new(
            ActionBox::new(vec![-5.0], vec![5.0]).unwrap(),
            1,
            DMatrix::zeros(1, 1),
            Components::Ev(vec![EvComponentParams { q: 2.0, d: 1.0, b: 0.0 }]),
        )
        .unwrap();
        let ne = solve_ne_affine(&g).unwrap();
        assert!((ne.x_star[0] - 1.0).abs() < 1e-15);
        assert!(ne.interior);
    }

    #[test]
    fn symmetric_pair() {
        let p = EvComponentParams { q: 1.0, d: 1.0, b: 0.0 };
        let g = GameSpec::new(
            ActionBox::new(vec![-5.0; 2], vec![5.0; 2]).unwrap(),
            2,
            DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]),
            Components::Ev(vec![p; 4]),
        )
        .unwrap();
        let ne = solve_ne_affine(&g).unwrap();
        // 2x2 oracle: (x - 1) + 0.5 x = 0
        for v in ne.x_star.iter() {
            assert!((v - 2.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_equilibrium_falls_back() {
        // unconstrained minimiser 1 lies outside [2, 3]
        let g = GameSpec::new(
            ActionBox::new(vec![2.0], vec![3.0]).unwrap(),
            1,
            DMatrix::zeros(1, 1),
            Components::Ev(vec![EvComponentParams { q: 2.0, d: 1.0, b: 0.0 }]),
        )
        .unwrap();
        let ne = solve_ne_affine(&g).unwrap();
        assert!(!ne.interior);
        assert_eq!(ne.method, NeMethod::FixedPoint);
        assert!((ne.x_star[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oracles_agree_on_ev() {
        for seed in 0..5 {
            let g = make_ev_game(5, 6, seed, &EvRanges::default()).unwrap();
            let a = solve_ne_affine(&g).unwrap();
            let f = solve_ne_fixed_point(&g, 1e-13, FIXED_POINT_MAX_ITERS).unwrap();
            assert!(a.residual <= 1e-10, "{}", a.residual);
            let d = a.x_star.sq_dist(&f.x_star).sqrt();
            assert!(d <= 1e-8, "seed {seed}: {d}");
        }
    }

    #[test]
    fn edge_oracle_converges() {
        let g = make_edge_game(3, 4, 11, &EdgeRanges::default()).unwrap();
        let ne = solve_ne_fixed_point(&g, FIXED_POINT_TOL, FIXED_POINT_MAX_ITERS).unwrap();
        assert!(ne.residual <= 1e-8 || !ne.interior);
        // one more step stays put
        let again = fixed_point_from(&g, ne.x_star.0.clone(), f64::INFINITY, 1).unwrap();
        assert!(again.x_star.sq_dist(&ne.x_star).sqrt() <= FIXED_POINT_TOL);
    }
}
