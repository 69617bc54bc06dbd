//! Finite-sum games with scalar actions in a box.
//!
//! Player `i` minimises `f_i(x) = (1/m) sum_l f_i(x; l)` over its own
//! coordinate `x_i`. Indices are zero-based throughout the API; CSV output
//! uses the same zero-based `player` and `component` columns.

mod constants;
mod generate;
mod table;

use std::fmt;
use std::ops::{Deref, DerefMut};

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

pub use constants::{game_constants, monotonicity_estimates, GameConstants, MonotoneEstimate, SAFETY};
pub use generate::{make_edge_game, make_ev_game, EdgeRanges, EvRanges, Range};
pub use table::{game_hash, read_tables, GameTables};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("index out of range: {what} = {index}, limit {limit}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("player {player}: x_i = {value} outside the component domain ({lower}, {upper})")]
    Domain {
        player: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("invalid game configuration: {0}")]
    Config(String),
    #[error("pseudo-gradient is not strongly monotone: estimated modulus {mu_f}")]
    MonotonicityViolation { mu_f: f64 },
    #[error("malformed game table: {0}")]
    Table(String),
}

/// Product of intervals `[lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ActionBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GameError> {
        if lower.len() != upper.len() {
            return Err(GameError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(GameError::Config("box must have at least one coordinate".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GameError::Config(format!(
                    "box coordinate {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    /// Strictly inside every interval.
    pub fn contains_interior(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo < *v && *v < *hi)
    }

    pub fn project_in_place(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Uniform point of the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ActionProfile {
        ActionProfile(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
                .collect(),
        )
    }
}

/// Euclidean projection onto the box: a componentwise clamp.
pub fn project(x: &[f64], bounds: &ActionBox) -> ActionProfile {
    let mut out = x.to_vec();
    bounds.project_in_place(&mut out);
    ActionProfile(out)
}

/// Joint action `x`, entry `i` is player `i`'s scalar action.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActionProfile(pub Vec<f64>);

impl ActionProfile {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sq_dist(&self, other: &[f64]) -> f64 {
        sq_dist(&self.0, other)
    }
}

impl Deref for ActionProfile {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ActionProfile {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ActionProfile {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `f(x; l) = q/2 (x_i - d)^2 + b x_i + x_i sum_j C_ij x_j`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvComponentParams {
    pub q: f64,
    pub d: f64,
    pub b: f64,
}

/// `f(x; l) = a (x_i ln x_i - x_i) - kappa ln(cap_i - x_i) + b x_i
///  + dcong ln(1 + exp(beta_i x_i + sum_j C_ij x_j - r))`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeComponentParams {
    pub a: f64,
    pub kappa: f64,
    pub b: f64,
    pub dcong: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GameKind {
    Ev,
    Edge,
}

impl GameKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GameKind::Ev => "ev",
            GameKind::Edge => "edge",
        }
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Component parameter tables, row-major in `(player, component)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Components {
    Ev(Vec<EvComponentParams>),
    Edge {
        params: Vec<EdgeComponentParams>,
        /// Service capacity `cap_i`; the barrier needs `x_i < cap_i`.
        capacity: Vec<f64>,
        /// Congestion slope `beta_i`.
        slope: Vec<f64>,
    },
}

/// An immutable finite-sum game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    n: usize,
    m: usize,
    bounds: ActionBox,
    coupling: DMatrix<f64>,
    components: Components,
}

impl GameSpec {
    pub fn new(
        bounds: ActionBox,
        m: usize,
        coupling: DMatrix<f64>,
        components: Components,
    ) -> Result<Self, GameError> {
        let n = bounds.dim();
        if m == 0 {
            return Err(GameError::Config("need at least one component per player".into()));
        }
        if coupling.nrows() != n || coupling.ncols() != n {
            return Err(GameError::Config(format!(
                "coupling must be {n}x{n}, got {}x{}",
                coupling.nrows(),
                coupling.ncols()
            )));
        }
        if coupling.iter().any(|c| !c.is_finite()) {
            return Err(GameError::Config("coupling entries must be finite".into()));
        }
        for i in 0..n {
            if coupling[(i, i)] != 0.0 {
                return Err(GameError::Config(format!(
                    "coupling diagonal must be zero, C[{i}][{i}] = {}",
                    coupling[(i, i)]
                )));
            }
        }
        match &components {
            Components::Ev(params) => {
                if params.len() != n * m {
                    return Err(GameError::DimensionMismatch {
                        expected: n * m,
                        got: params.len(),
                    });
                }
                for (k, p) in params.iter().enumerate() {
                    if !(p.q > 0.0 && p.q.is_finite() && p.d.is_finite() && p.b.is_finite()) {
                        return Err(GameError::Config(format!(
                            "EV component ({}, {}): need finite q > 0, got {p:?}",
                            k / m,
                            k % m
                        )));
                    }
                }
            }
            Components::Edge {
                params,
                capacity,
                slope,
            } => {
                if params.len() != n * m {
                    return Err(GameError::DimensionMismatch {
                        expected: n * m,
                        got: params.len(),
                    });
                }
                if capacity.len() != n || slope.len() != n {
                    return Err(GameError::DimensionMismatch {
                        expected: n,
                        got: capacity.len().min(slope.len()),
                    });
                }
                for (k, p) in params.iter().enumerate() {
                    let ok = p.a > 0.0
                        && p.kappa >= 0.0
                        && p.dcong >= 0.0
                        && [p.a, p.kappa, p.b, p.dcong, p.r].iter().all(|v| v.is_finite());
                    if !ok {
                        return Err(GameError::Config(format!(
                            "edge component ({}, {}): need a > 0, kappa >= 0, dcong >= 0, got {p:?}",
                            k / m,
                            k % m
                        )));
                    }
                }
                for i in 0..n {
                    if !(bounds.lower[i] > 0.0 && bounds.upper[i] < capacity[i]) {
                        return Err(GameError::Config(format!(
                            "edge player {i}: box [{}, {}] must satisfy 0 < lower and upper < capacity {}",
                            bounds.lower[i], bounds.upper[i], capacity[i]
                        )));
                    }
                    if !slope[i].is_finite() {
                        return Err(GameError::Config(format!("edge player {i}: slope not finite")));
                    }
                }
            }
        }
        Ok(Self {
            n,
            m,
            bounds,
            coupling,
            components,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> GameKind {
        match self.components {
            Components::Ev(_) => GameKind::Ev,
            Components::Edge { .. } => GameKind::Edge,
        }
    }

    pub fn bounds(&self) -> &ActionBox {
        &self.bounds
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn components(&self) -> &Components {
        &self.components
    }

    /// `sum_j C_ij x_j`; the diagonal is zero.
    pub fn coupling_sum(&self, i: usize, x: &[f64]) -> f64 {
        (0..self.n).map(|j| self.coupling[(i, j)] * x[j]).sum()
    }

    fn check_indices(&self, i: usize, ell: usize, x: &[f64]) -> Result<(), GameError> {
        if i >= self.n {
            return Err(GameError::IndexOutOfRange {
                what: "player",
                index: i,
                limit: self.n,
            });
        }
        if ell >= self.m {
            return Err(GameError::IndexOutOfRange {
                what: "component",
                index: ell,
                limit: self.m,
            });
        }
        if x.len() != self.n {
            return Err(GameError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn edge_domain(&self, i: usize, xi: f64, capacity: f64) -> Result<(), GameError> {
        if xi > 0.0 && xi < capacity {
            Ok(())
        } else {
            Err(GameError::Domain {
                player: i,
                value: xi,
                lower: 0.0,
                upper: capacity,
            })
        }
    }

    /// Component cost `f_i(x; ell)`.
    pub fn component_cost(&self, i: usize, ell: usize, x: &[f64]) -> Result<f64, GameError> {
        self.check_indices(i, ell, x)?;
        let xi = x[i];
        let s = self.coupling_sum(i, x);
        match &self.components {
            Components::Ev(params) => {
                let p = params[i * self.m + ell];
                Ok(0.5 * p.q * (xi - p.d).powi(2) + p.b * xi + xi * s)
            }
            Components::Edge {
                params,
                capacity,
                slope,
            } => {
                let p = params[i * self.m + ell];
                self.edge_domain(i, xi, capacity[i])?;
                Ok(p.a * (xi * xi.ln() - xi) - p.kappa * (capacity[i] - xi).ln()
                    + p.b * xi
                    + p.dcong * softplus(slope[i] * xi + s - p.r))
            }
        }
    }

    /// `d f_i(x; ell) / d x_i`.
    pub fn component_grad(&self, i: usize, ell: usize, x: &[f64]) -> Result<f64, GameError> {
        self.check_indices(i, ell, x)?;
        let xi = x[i];
        let s = self.coupling_sum(i, x);
        match &self.components {
            Components::Ev(params) => {
                let p = params[i * self.m + ell];
                Ok(p.q * (xi - p.d) + p.b + s)
            }
            Components::Edge {
                params,
                capacity,
                slope,
            } => {
                let p = params[i * self.m + ell];
                self.edge_domain(i, xi, capacity[i])?;
                Ok(p.a * xi.ln()
                    + p.kappa / (capacity[i] - xi)
                    + p.b
                    + p.dcong * slope[i] * logistic(slope[i] * xi + s - p.r))
            }
        }
    }

    /// Own curvature `d^2 f_i(x; ell) / d x_i^2`.
    pub fn component_curvature(&self, i: usize, ell: usize, x: &[f64]) -> Result<f64, GameError> {
        self.check_indices(i, ell, x)?;
        let xi = x[i];
        match &self.components {
            Components::Ev(params) => Ok(params[i * self.m + ell].q),
            Components::Edge {
                params,
                capacity,
                slope,
            } => {
                let p = params[i * self.m + ell];
                self.edge_domain(i, xi, capacity[i])?;
                let z = slope[i] * xi + self.coupling_sum(i, x) - p.r;
                let sig = logistic(z);
                Ok(p.a / xi
                    + p.kappa / (capacity[i] - xi).powi(2)
                    + p.dcong * slope[i] * slope[i] * sig * (1.0 - sig))
            }
        }
    }

    /// Bregman divergence of `f_i(.; ell)` in the own coordinate:
    /// `f(u, x_-i) - f(x) - grad f(x) (u - x_i)` with the other players fixed
    /// at `x`. Evaluated in closed form to avoid cancellation.
    pub fn component_bregman(
        &self,
        i: usize,
        ell: usize,
        u: f64,
        x: &[f64],
    ) -> Result<f64, GameError> {
        self.check_indices(i, ell, x)?;
        let v = x[i];
        let h = u - v;
        match &self.components {
            Components::Ev(params) => Ok(0.5 * params[i * self.m + ell].q * h * h),
            Components::Edge {
                params,
                capacity,
                slope,
            } => {
                let p = params[i * self.m + ell];
                self.edge_domain(i, v, capacity[i])?;
                self.edge_domain(i, u, capacity[i])?;
                let entropy = p.a * (u * (u / v).ln() - h);
                let gap = capacity[i] - v;
                let barrier = p.kappa * (-(-h / gap).ln_1p() - h / gap);
                let s = self.coupling_sum(i, x);
                let zv = slope[i] * v + s - p.r;
                let zu = zv + slope[i] * h;
                let congestion =
                    p.dcong * (softplus(zu) - softplus(zv) - logistic(zv) * slope[i] * h);
                Ok(entropy + barrier + congestion)
            }
        }
    }

    /// Player cost `f_i(x) = (1/m) sum_l f_i(x; l)`.
    pub fn player_cost(&self, i: usize, x: &[f64]) -> Result<f64, GameError> {
        let mut acc = 0.0;
        for ell in 0..self.m {
            acc += self.component_cost(i, ell, x)?;
        }
        Ok(acc / self.m as f64)
    }

    /// `grad F(x)_i = (1/m) sum_l d f_i(x; l) / d x_i`.
    pub fn full_pseudo_gradient(&self, x: &[f64]) -> Result<Vec<f64>, GameError> {
        (0..self.n)
            .map(|i| {
                let mut acc = 0.0;
                for ell in 0..self.m {
                    acc += self.component_grad(i, ell, x)?;
                }
                Ok(acc / self.m as f64)
            })
            .collect()
    }

    /// Whether `x_i` lies in the domain of player `i`'s components.
    pub fn in_domain(&self, i: usize, xi: f64) -> bool {
        match &self.components {
            Components::Ev(_) => xi.is_finite(),
            Components::Edge { capacity, .. } => xi > 0.0 && xi < capacity[i],
        }
    }
}

pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_ev(q: f64, d: f64, b: f64) -> GameSpec {
        GameSpec::new(
            ActionBox::new(vec![-10.0], vec![10.0]).unwrap(),
            1,
            DMatrix::zeros(1, 1),
            Components::Ev(vec![EvComponentParams { q, d, b }]),
        )
        .unwrap()
    }

    fn edge_pair() -> GameSpec {
        let params = vec![
            EdgeComponentParams { a: 1.0, kappa: 0.0, b: 0.0, dcong: 0.0, r: 0.0 },
            EdgeComponentParams { a: 0.9, kappa: 0.2, b: -0.7, dcong: 0.5, r: 2.0 },
            EdgeComponentParams { a: 1.1, kappa: 0.1, b: -1.0, dcong: 0.3, r: 1.5 },
            EdgeComponentParams { a: 1.0, kappa: 0.3, b: -0.8, dcong: 0.4, r: 2.5 },
        ];
        let mut c = DMatrix::zeros(2, 2);
        c[(0, 1)] = 0.2;
        c[(1, 0)] = 0.2;
        GameSpec::new(
            ActionBox::new(vec![0.5, 0.5], vec![4.0, 4.0]).unwrap(),
            2,
            c,
            Components::Edge {
                params,
                capacity: vec![5.0, 5.5],
                slope: vec![0.6, 0.5],
            },
        )
        .unwrap()
    }

    #[test]
    fn ev_gradient_at_component_minimum_is_zero() {
        let g = single_ev(2.0, 1.0, 0.0);
        assert_eq!(g.component_grad(0, 0, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn ev_gradient_affine_substitution() {
        // sum_j C_ij x_j = 0.5 through a neighbour at 1.0 with C = 0.5
        let mut c = DMatrix::zeros(2, 2);
        c[(0, 1)] = 0.5;
        c[(1, 0)] = 0.5;
        let p = EvComponentParams { q: 1.0, d: 0.0, b: 1.0 };
        let g = GameSpec::new(
            ActionBox::new(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap(),
            1,
            c,
            Components::Ev(vec![p, p]),
        )
        .unwrap();
        assert_eq!(g.component_grad(0, 0, &[0.0, 1.0]).unwrap(), 1.5);
    }

    #[test]
    fn edge_entropy_only_gradient_at_one() {
        let g = edge_pair();
        assert_eq!(g.component_grad(0, 0, &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn edge_domain_errors() {
        let g = edge_pair();
        assert!(matches!(
            g.component_grad(0, 1, &[5.0, 1.0]),
            Err(GameError::Domain { player: 0, .. })
        ));
        assert!(matches!(
            g.component_grad(1, 1, &[1.0, 0.0]),
            Err(GameError::Domain { player: 1, .. })
        ));
        assert!(matches!(
            g.component_grad(0, 1, &[-1.0, 1.0]),
            Err(GameError::Domain { .. })
        ));
    }

    #[test]
    fn index_errors() {
        let g = edge_pair();
        assert!(matches!(
            g.component_grad(2, 0, &[1.0, 1.0]),
            Err(GameError::IndexOutOfRange { what: "player", .. })
        ));
        assert!(matches!(
            g.component_grad(0, 2, &[1.0, 1.0]),
            Err(GameError::IndexOutOfRange { what: "component", .. })
        ));
        assert!(matches!(
            g.component_grad(0, 0, &[1.0]),
            Err(GameError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_player_pseudo_gradient_is_component_average() {
        let params = vec![
            EvComponentParams { q: 1.0, d: 0.0, b: 0.0 },
            EvComponentParams { q: 3.0, d: 2.0, b: 1.0 },
        ];
        let g = GameSpec::new(
            ActionBox::new(vec![-1.0], vec![4.0]).unwrap(),
            2,
            DMatrix::zeros(1, 1),
            Components::Ev(params),
        )
        .unwrap();
        let x = [0.5];
        let expected = (g.component_grad(0, 0, &x).unwrap() + g.component_grad(0, 1, &x).unwrap()) / 2.0;
        assert_eq!(g.full_pseudo_gradient(&x).unwrap(), vec![expected]);
    }

    #[test]
    fn symmetric_game_symmetric_gradient() {
        let mut c = DMatrix::zeros(2, 2);
        c[(0, 1)] = 0.5;
        c[(1, 0)] = 0.5;
        let p = EvComponentParams { q: 1.0, d: 1.0, b: 0.0 };
        let g = GameSpec::new(
            ActionBox::new(vec![-3.0, -3.0], vec![3.0, 3.0]).unwrap(),
            1,
            c,
            Components::Ev(vec![p, p]),
        )
        .unwrap();
        let grad = g.full_pseudo_gradient(&[0.3, 0.3]).unwrap();
        assert_eq!(grad[0], grad[1]);
    }

    #[test]
    fn projection_examples() {
        let b = ActionBox::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(project(&[0.5], &b).0, vec![0.5]);
        assert_eq!(project(&[5.0], &b).0, vec![1.0]);
        assert_eq!(project(&[-3.0], &b).0, vec![0.0]);
    }

    #[test]
    fn invalid_boxes_and_games() {
        assert!(ActionBox::new(vec![1.0], vec![1.0]).is_err());
        assert!(ActionBox::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let mut c = DMatrix::zeros(1, 1);
        c[(0, 0)] = 0.1;
        assert!(matches!(
            GameSpec::new(
                ActionBox::new(vec![0.0], vec![1.0]).unwrap(),
                1,
                c,
                Components::Ev(vec![EvComponentParams { q: 1.0, d: 0.0, b: 0.0 }]),
            ),
            Err(GameError::Config(_))
        ));
        assert!(GameSpec::new(
            ActionBox::new(vec![0.0], vec![1.0]).unwrap(),
            1,
            DMatrix::zeros(1, 1),
            Components::Ev(vec![EvComponentParams { q: 0.0, d: 0.0, b: 0.0 }]),
        )
        .is_err());
        // edge box reaching the capacity
        assert!(GameSpec::new(
            ActionBox::new(vec![0.5], vec![5.0]).unwrap(),
            1,
            DMatrix::zeros(1, 1),
            Components::Edge {
                params: vec![EdgeComponentParams { a: 1.0, kappa: 0.1, b: 0.0, dcong: 0.0, r: 0.0 }],
                capacity: vec![5.0],
                slope: vec![0.5],
            },
        )
        .is_err());
    }

    #[test]
    fn bregman_matches_definition() {
        let g = edge_pair();
        let x = [1.7, 2.2];
        for i in 0..2 {
            for ell in 0..2 {
                let u = x[i] + 0.3;
                let mut xu = x;
                xu[i] = u;
                let direct = g.component_cost(i, ell, &xu).unwrap()
                    - g.component_cost(i, ell, &x).unwrap()
                    - g.component_grad(i, ell, &x).unwrap() * (u - x[i]);
                let closed = g.component_bregman(i, ell, u, &x).unwrap();
                assert!((direct - closed).abs() < 1e-12, "{direct} vs {closed}");
            }
        }
    }

    #[test]
    fn stable_logistic_and_softplus() {
        assert!((logistic(0.0) - 0.5).abs() < 1e-16);
        assert!(logistic(-800.0) >= 0.0 && logistic(800.0) <= 1.0);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
