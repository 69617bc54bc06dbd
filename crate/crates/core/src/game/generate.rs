//! Seeded generators for the two benchmark games.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    ActionBox, Components, EdgeComponentParams, EvComponentParams, GameError, GameSpec,
};
use crate::linalg::symmetric_eigen;
use crate::sampling::{stream_rng, StreamPurpose};

/// Closed interval for uniform parameter draws; `lo == hi` pins the value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn validate(&self, name: &str) -> Result<(), GameError> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi {
            return Err(GameError::Config(format!(
                "range {name} = [{}, {}] is empty or not finite",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.lo + (self.hi - self.lo) * rng.gen::<f64>()
    }
}

/// Parameter ranges of the EV charging game.
#[derive(Debug, Clone, PartialEq)]
pub struct EvRanges {
    pub q: Range,
    pub d: Range,
    pub b: Range,
    /// Raw coupling entries before symmetrisation and scaling.
    pub coupling: Range,
    /// Target `||C||_2 / min_i qbar_i`, in `[0, 1)`.
    pub coupling_ratio: f64,
    /// Box half-width in units of `||x*||_inf` around the pre-solved NE.
    pub box_margin: f64,
}

impl Default for EvRanges {
    fn default() -> Self {
        Self {
            q: Range::new(1.0, 2.0),
            d: Range::new(5.0, 15.0),
            b: Range::new(-1.0, 1.0),
            coupling: Range::new(0.0, 1.0),
            coupling_ratio: 0.5,
            box_margin: 3.0,
        }
    }
}

impl EvRanges {
    pub fn validate(&self) -> Result<(), GameError> {
        self.q.validate("q")?;
        self.d.validate("d")?;
        self.b.validate("b")?;
        self.coupling.validate("coupling")?;
        if self.q.lo <= 0.0 {
            return Err(GameError::Config(format!("range q must be positive, got lo = {}", self.q.lo)));
        }
        validate_ratio(self.coupling_ratio)?;
        if !(self.box_margin > 0.0 && self.box_margin.is_finite()) {
            return Err(GameError::Config(format!("box margin must be positive, got {}", self.box_margin)));
        }
        Ok(())
    }
}

/// Parameter ranges of the edge resource admission game.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRanges {
    pub a: Range,
    pub kappa: Range,
    pub b: Range,
    pub dcong: Range,
    pub r: Range,
    pub capacity: Range,
    pub slope: Range,
    pub coupling: Range,
    /// Target `||C||_2` relative to the smallest own-curvature lower bound `a / upper`.
    pub coupling_ratio: f64,
    /// Common lower end of every player's box.
    pub lower: f64,
    /// `upper_i = capacity_i - gap`.
    pub gap: f64,
}

impl Default for EdgeRanges {
    fn default() -> Self {
        Self {
            a: Range::new(0.8, 1.2),
            kappa: Range::new(0.1, 0.3),
            b: Range::new(-1.2, -0.6),
            dcong: Range::new(0.2, 0.6),
            r: Range::new(1.0, 3.0),
            capacity: Range::new(5.0, 6.0),
            slope: Range::new(0.4, 0.8),
            coupling: Range::new(0.0, 1.0),
            coupling_ratio: 0.5,
            lower: 0.5,
            gap: 1.0,
        }
    }
}

impl EdgeRanges {
    pub fn validate(&self) -> Result<(), GameError> {
        for (name, r) in [
            ("a", self.a),
            ("kappa", self.kappa),
            ("b", self.b),
            ("dcong", self.dcong),
            ("r", self.r),
            ("capacity", self.capacity),
            ("slope", self.slope),
            ("coupling", self.coupling),
        ] {
            r.validate(name)?;
        }
        if self.a.lo <= 0.0 {
            return Err(GameError::Config(format!("range a must be positive, got lo = {}", self.a.lo)));
        }
        if self.kappa.lo < 0.0 || self.dcong.lo < 0.0 {
            return Err(GameError::Config("ranges kappa and dcong must be nonnegative".into()));
        }
        validate_ratio(self.coupling_ratio)?;
        if !(self.lower > 0.0 && self.gap > 0.0 && self.capacity.lo - self.gap > self.lower) {
            return Err(GameError::Config(format!(
                "edge box needs 0 < lower < capacity - gap, got lower = {}, gap = {}, capacity lo = {}",
                self.lower, self.gap, self.capacity.lo
            )));
        }
        Ok(())
    }
}

fn validate_ratio(r: f64) -> Result<(), GameError> {
    if !(0.0..1.0).contains(&r) {
        return Err(GameError::Config(format!("coupling ratio must lie in [0, 1), got {r}")));
    }
    Ok(())
}

fn check_size(n: usize, m: usize) -> Result<(), GameError> {
    if n < 2 || m < 1 {
        return Err(GameError::Config(format!("need n >= 2 and m >= 1, got n = {n}, m = {m}")));
    }
    Ok(())
}

/// Symmetric, zero-diagonal coupling with spectral norm `target`.
fn draw_coupling(rng: &mut ChaCha8Rng, n: usize, range: Range, target: f64) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = range.draw(rng);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let (eig, _) = symmetric_eigen(&c);
    let spec_norm = eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if spec_norm > 0.0 {
        c *= target / spec_norm;
    }
    c
}

/// EV charging game. The box is centred on the unconstrained equilibrium
/// with half-width `box_margin * max(||x*||_inf, 1)`, so the equilibrium
/// is interior.
pub fn make_ev_game(n: usize, m: usize, seed: u64, ranges: &EvRanges) -> Result<GameSpec, GameError> {
    check_size(n, m)?;
    ranges.validate()?;
    let mut rng = stream_rng(seed, StreamPurpose::GameParams, 0, 0);
    let mut params = Vec::with_capacity(n * m);
    for _ in 0..n * m {
        params.push(EvComponentParams {
            q: ranges.q.draw(&mut rng),
            d: ranges.d.draw(&mut rng),
            b: ranges.b.draw(&mut rng),
        });
    }
    let qbar: Vec<f64> = (0..n)
        .map(|i| params[i * m..(i + 1) * m].iter().map(|p| p.q).sum::<f64>() / m as f64)
        .collect();
    let min_qbar = qbar.iter().cloned().fold(f64::INFINITY, f64::min);
    let coupling = draw_coupling(&mut rng, n, ranges.coupling, ranges.coupling_ratio * min_qbar);

    // Unconstrained equilibrium: (diag(qbar) + C) x = mean(q d) - mean(b).
    let mut mat = coupling.clone();
    let mut rhs = DVector::zeros(n);
    for i in 0..n {
        mat[(i, i)] = qbar[i];
        let row = &params[i * m..(i + 1) * m];
        rhs[i] = row.iter().map(|p| p.q * p.d - p.b).sum::<f64>() / m as f64;
    }
    let x_star = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| GameError::Config("EV interaction matrix is singular".into()))?;
    let half = ranges.box_margin * x_star.amax().max(1.0);
    let bounds = ActionBox::new(
        x_star.iter().map(|v| v - half).collect(),
        x_star.iter().map(|v| v + half).collect(),
    )?;
    GameSpec::new(bounds, m, coupling, Components::Ev(params))
}

/// Edge resource admission game on boxes `[lower, capacity_i - gap]`.
pub fn make_edge_game(
    n: usize,
    m: usize,
    seed: u64,
    ranges: &EdgeRanges,
) -> Result<GameSpec, GameError> {
    check_size(n, m)?;
    ranges.validate()?;
    let mut rng = stream_rng(seed, StreamPurpose::GameParams, 0, 0);
    let mut capacity = Vec::with_capacity(n);
    let mut slope = Vec::with_capacity(n);
    for _ in 0..n {
        capacity.push(ranges.capacity.draw(&mut rng));
        slope.push(ranges.slope.draw(&mut rng));
    }
    let mut params = Vec::with_capacity(n * m);
    for _ in 0..n * m {
        params.push(EdgeComponentParams {
            a: ranges.a.draw(&mut rng),
            kappa: ranges.kappa.draw(&mut rng),
            b: ranges.b.draw(&mut rng),
            dcong: ranges.dcong.draw(&mut rng),
            r: ranges.r.draw(&mut rng),
        });
    }
    let upper: Vec<f64> = capacity.iter().map(|c| c - ranges.gap).collect();
    let curvature_floor = (0..n * m)
        .map(|k| params[k].a / upper[k / m])
        .fold(f64::INFINITY, f64::min);
    let coupling = draw_coupling(&mut rng, n, ranges.coupling, ranges.coupling_ratio * curvature_floor);
    let bounds = ActionBox::new(vec![ranges.lower; n], upper)?;
    GameSpec::new(
        bounds,
        m,
        coupling,
        Components::Edge {
            params,
            capacity,
            slope,
        },
    )
}
