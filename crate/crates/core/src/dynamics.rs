//! Full- and partial-information solvers.
//!
//! Every epoch performs exactly `m` inner steps. In random-reshuffling mode
//! each player walks through its own fresh permutation of the components;
//! in SGD mode each player draws `m` indices with replacement. All players
//! read the step-`l` state and write the step-`l+1` state simultaneously.
//!
//! Partial-information runs follow the compact form
//!
//! ```text
//! x <- P[x - alpha * grad F_pi(y)]
//! y <- y - w * H (y - 1 (x) x)
//! ```
//!
//! where player `i` evaluates its component gradient at its own estimate
//! row `y_i`.

use std::fmt::Write as _;

use rand::Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{disagreement_norm, error_metric};
use crate::game::{game_hash, ActionProfile, GameError, GameKind, GameSpec};
use crate::network::{AugmentedMatrix, NetworkSpec};
use crate::sampling::{epoch_indices, stream_rng, SamplingMode, StreamPurpose};
use crate::schedule::{ConditionReport, Schedule, ScheduleKind};

/// Distance kept from the box faces when clamping edge-game estimates.
pub const CLAMP_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("constant schedule needs a passing condition report (use the override to run anyway)")]
    ConditionsMissing,
    #[error("step-size conditions fail: {0}")]
    ConditionsFailed(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("initial point coincides with the equilibrium; the error metric is undefined")]
    DegenerateStart,
    #[error("iterate left the feasible box at epoch {0}")]
    Infeasible(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InfoMode {
    Full,
    Partial,
}

impl InfoMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InfoMode::Full => "full",
            InfoMode::Partial => "partial",
        }
    }
}

impl std::str::FromStr for InfoMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(InfoMode::Full),
            "partial" => Ok(InfoMode::Partial),
            other => Err(format!("unknown information mode `{other}` (allowed: full, partial)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub mode: SamplingMode,
    /// Run constant schedules without a passing condition report.
    pub force: bool,
    /// Half-width of the uniform perturbation added to `y0 = 1 (x) x0`.
    pub perturb_y0: f64,
    /// Experimental: keep `y_ii = x_i` (not the compact form).
    pub overwrite_own: bool,
    /// Record one row per inner step.
    pub debug_inner: bool,
    /// Overrides the seeded uniform draw of `x0`.
    pub x0: Option<ActionProfile>,
}

impl RunOptions {
    pub fn new(seed: u64, mode: SamplingMode) -> Self {
        Self {
            seed,
            mode,
            force: false,
            perturb_y0: 0.0,
            overwrite_own: false,
            debug_inner: false,
            x0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub e: f64,
    pub sq_err: f64,
    pub disagreement: f64,
    pub alpha: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerRow {
    pub k: usize,
    pub ell: usize,
    pub sq_err: f64,
    pub disagreement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub mode: SamplingMode,
    pub info: InfoMode,
    pub seed: u64,
    pub game_hash: String,
    pub network_hash: Option<String>,
    pub x0_hash: String,
    pub schedule: String,
    pub epochs: usize,
    pub m: usize,
    /// Component-gradient evaluations per player over the whole run.
    pub grad_evals: Vec<u64>,
    /// Gradient evaluations at which an estimate had to be clamped.
    pub clamp_events: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub inner: Vec<InnerRow>,
    pub meta: TraceMeta,
    pub x0: ActionProfile,
    pub x_final: ActionProfile,
    pub y_final: Option<Vec<f64>>,
}

pub const TRACE_HEADER: &str = "k,e,sq_err,disagreement,alpha,w";

impl RunTrace {
    pub fn final_row(&self) -> &TraceRow {
        self.rows.last().expect("a trace has at least one row")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * self.rows.len());
        s.push_str(TRACE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.k, r.e, r.sq_err, r.disagreement, r.alpha, r.w);
        }
        s
    }

    pub fn inner_csv(&self) -> String {
        let mut s = String::from("k,ell,sq_err,disagreement\n");
        for r in &self.inner {
            let _ = writeln!(s, "{},{},{},{}", r.k, r.ell, r.sq_err, r.disagreement);
        }
        s
    }

    /// Grad evaluations per player per epoch, if identical for all players.
    pub fn evals_per_epoch(&self) -> Option<u64> {
        let first = *self.meta.grad_evals.first()?;
        if self.meta.epochs == 0 || self.meta.grad_evals.iter().any(|&g| g != first) {
            return None;
        }
        (first % self.meta.epochs as u64 == 0).then(|| first / self.meta.epochs as u64)
    }

    pub fn meta_text(&self) -> String {
        let m = &self.meta;
        let evals: Vec<String> = m.grad_evals.iter().map(u64::to_string).collect();
        let mut s = String::new();
        let _ = writeln!(s, "mode = {}", m.mode);
        let _ = writeln!(s, "info = {}", m.info.as_str());
        let _ = writeln!(s, "seed = {}", m.seed);
        let _ = writeln!(s, "game_hash = {}", m.game_hash);
        let _ = writeln!(s, "network_hash = {}", m.network_hash.as_deref().unwrap_or("none"));
        let _ = writeln!(s, "x0_hash = {}", m.x0_hash);
        let _ = writeln!(s, "schedule = {}", m.schedule);
        let _ = writeln!(s, "epochs = {}", m.epochs);
        let _ = writeln!(s, "components = {}", m.m);
        let _ = writeln!(s, "grad_evals_per_player = {}", evals.join(","));
        let per_epoch = self.evals_per_epoch().map_or("mismatch".to_string(), |v| v.to_string());
        let _ = writeln!(s, "grad_evals_per_player_per_epoch = {per_epoch}");
        let _ = writeln!(s, "clamp_events = {}", m.clamp_events);
        s
    }
}

/// One inner step as seen by a [`StepObserver`].
pub struct InnerStep<'a> {
    pub k: usize,
    pub ell: usize,
    /// Component each player used at this step.
    pub components: &'a [usize],
    pub alpha: f64,
    pub w: f64,
    pub x_before: &'a [f64],
    pub x_after: &'a [f64],
    pub y_before: Option<&'a [f64]>,
    pub y_after: Option<&'a [f64]>,
}

pub trait StepObserver {
    fn on_inner(&mut self, step: &InnerStep<'_>);
}

struct NoObserver;

impl StepObserver for NoObserver {
    fn on_inner(&mut self, _: &InnerStep<'_>) {}
}

/// Hash of a profile's shortest round-trip decimal form.
pub fn profile_hash(x: &[f64]) -> String {
    let text: Vec<String> = x.iter().map(f64::to_string).collect();
    hex::encode(Sha256::digest(text.join(",").as_bytes()))
}

/// Seeded uniform draw of `x0` from the box; shared by every arm of a seed.
pub fn initial_point(game: &GameSpec, seed: u64) -> ActionProfile {
    game.bounds().sample(&mut stream_rng(seed, StreamPurpose::Init, 0, 0))
}

/// `y0 = 1 (x) x0`, plus the optional seeded uniform perturbation.
pub fn initial_estimates(x0: &[f64], opts: &RunOptions) -> Vec<f64> {
    let n = x0.len();
    let mut rng = stream_rng(opts.seed, StreamPurpose::Perturb, 0, 0);
    let mut y = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let noise = if opts.perturb_y0 > 0.0 {
                rng.gen_range(-opts.perturb_y0..=opts.perturb_y0)
            } else {
                0.0
            };
            y[i * n + j] = if opts.overwrite_own && i == j { x0[j] } else { x0[j] + noise };
        }
    }
    y
}

/// `|y0 - 1 (x) x0|^2` for the estimates a run with `opts` would start from.
pub fn disagreement_of_start(x0: &[f64], opts: &RunOptions) -> f64 {
    disagreement_norm(&initial_estimates(x0, opts), x0)
}

fn check_schedule(schedule: &Schedule, conditions: Option<&ConditionReport>, force: bool) -> Result<(), DynamicsError> {
    if force || schedule.kind != ScheduleKind::Constant {
        return Ok(());
    }
    let rep = conditions.ok_or(DynamicsError::ConditionsMissing)?;
    if rep.pass() {
        return Ok(());
    }
    let names: Vec<&str> = rep.failures().map(|c| c.name.as_str()).collect();
    Err(DynamicsError::ConditionsFailed(names.join("; ")))
}

fn setup(game: &GameSpec, x_star: &[f64], opts: &RunOptions) -> Result<ActionProfile, DynamicsError> {
    let n = game.n();
    if x_star.len() != n {
        return Err(DynamicsError::Dimension(format!("x_star has {} entries, game has {n} players", x_star.len())));
    }
    let x0 = match &opts.x0 {
        Some(x) if x.len() != n => {
            return Err(DynamicsError::Dimension(format!("x0 has {} entries, game has {n} players", x.len())))
        }
        Some(x) => x.clone(),
        None => initial_point(game, opts.seed),
    };
    if !game.bounds().contains(&x0) {
        return Err(DynamicsError::Infeasible(0));
    }
    if x0.sq_dist(x_star) == 0.0 {
        return Err(DynamicsError::DegenerateStart);
    }
    Ok(x0)
}

fn row(k: usize, x: &[f64], x0: &[f64], x_star: &[f64], disagreement: f64, ab: (f64, f64)) -> TraceRow {
    let sq_err: f64 = x.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum();
    TraceRow {
        k,
        e: error_metric(x, x0, x_star).expect("start checked against the equilibrium"),
        sq_err,
        disagreement,
        alpha: ab.0,
        w: ab.1,
    }
}

fn epoch_plan(opts: &RunOptions, n: usize, m: usize, k: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| epoch_indices(opts.seed, opts.mode, i, k as u64, m)).collect()
}

/// Full-information run: every player sees the joint profile.
pub fn run_full_info(
    game: &GameSpec,
    schedule: &Schedule,
    x_star: &[f64],
    conditions: Option<&ConditionReport>,
    opts: &RunOptions,
) -> Result<RunTrace, DynamicsError> {
    run_full_info_observed(game, schedule, x_star, conditions, opts, &mut NoObserver)
}

pub fn run_full_info_observed(
    game: &GameSpec,
    schedule: &Schedule,
    x_star: &[f64],
    conditions: Option<&ConditionReport>,
    opts: &RunOptions,
    observer: &mut dyn StepObserver,
) -> Result<RunTrace, DynamicsError> {
    check_schedule(schedule, conditions, opts.force)?;
    let x0 = setup(game, x_star, opts)?;
    let (n, m, big_k) = (game.n(), game.m(), schedule.horizon);
    let bounds = game.bounds();
    let mut x = x0.0.clone();
    let mut next = vec![0.0; n];
    let mut comps = vec![0usize; n];
    let mut evals = vec![0u64; n];
    let mut rows = Vec::with_capacity(big_k + 1);
    let mut inner = Vec::new();
    for k in 0..big_k {
        rows.push(row(k, &x, &x0, x_star, 0.0, schedule.value(k)));
        let (alpha, w) = schedule.value(k);
        let plan = epoch_plan(opts, n, m, k);
        for ell in 0..m {
            for i in 0..n {
                comps[i] = plan[i][ell];
                let g = game.component_grad(i, comps[i], &x)?;
                evals[i] += 1;
                next[i] = x[i] - alpha * g;
            }
            bounds.project_in_place(&mut next);
            observer.on_inner(&InnerStep {
                k,
                ell,
                components: &comps,
                alpha,
                w,
                x_before: &x,
                x_after: &next,
                y_before: None,
                y_after: None,
            });
            std::mem::swap(&mut x, &mut next);
            if opts.debug_inner {
                inner.push(InnerRow {
                    k,
                    ell,
                    sq_err: x.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum(),
                    disagreement: 0.0,
                });
            }
        }
        if !bounds.contains(&x) {
            return Err(DynamicsError::Infeasible(k + 1));
        }
    }
    rows.push(row(big_k, &x, &x0, x_star, 0.0, schedule.value(big_k)));
    Ok(RunTrace {
        rows,
        inner,
        meta: TraceMeta {
            mode: opts.mode,
            info: InfoMode::Full,
            seed: opts.seed,
            game_hash: game_hash(game),
            network_hash: None,
            x0_hash: profile_hash(&x0),
            schedule: schedule.describe(),
            epochs: big_k,
            m,
            grad_evals: evals,
            clamp_events: 0,
        },
        x0,
        x_final: ActionProfile(x),
        y_final: None,
    })
}

/// Partial-information run: player `i` only holds the estimate row `y_i`
/// and mixes it with its neighbours through `H`.
#[allow(clippy::too_many_arguments)]
pub fn run_partial_info(
    game: &GameSpec,
    network: &NetworkSpec,
    h: &AugmentedMatrix,
    schedule: &Schedule,
    x_star: &[f64],
    conditions: Option<&ConditionReport>,
    opts: &RunOptions,
) -> Result<RunTrace, DynamicsError> {
    run_partial_info_observed(game, network, h, schedule, x_star, conditions, opts, &mut NoObserver)
}

#[allow(clippy::too_many_arguments)]
pub fn run_partial_info_observed(
    game: &GameSpec,
    network: &NetworkSpec,
    h: &AugmentedMatrix,
    schedule: &Schedule,
    x_star: &[f64],
    conditions: Option<&ConditionReport>,
    opts: &RunOptions,
    observer: &mut dyn StepObserver,
) -> Result<RunTrace, DynamicsError> {
    check_schedule(schedule, conditions, opts.force)?;
    let x0 = setup(game, x_star, opts)?;
    let (n, m, big_k) = (game.n(), game.m(), schedule.horizon);
    if network.n != n || h.n != n {
        return Err(DynamicsError::Dimension(format!(
            "network has {} nodes, game has {n} players",
            network.n
        )));
    }
    let bounds = game.bounds();
    let clamp = game.kind() == GameKind::Edge;
    let mut x = x0.0.clone();
    let mut y = initial_estimates(&x, opts);
    let mut x_next = vec![0.0; n];
    let mut y_next = vec![0.0; n * n];
    let mut z = vec![0.0; n * n];
    let mut hz = vec![0.0; n * n];
    let mut est = vec![0.0; n];
    let mut comps = vec![0usize; n];
    let mut evals = vec![0u64; n];
    let mut clamp_events = 0u64;
    let mut rows = Vec::with_capacity(big_k + 1);
    let mut inner = Vec::new();
    for k in 0..big_k {
        rows.push(row(k, &x, &x0, x_star, disagreement_norm(&y, &x), schedule.value(k)));
        let (alpha, w) = schedule.value(k);
        let plan = epoch_plan(opts, n, m, k);
        for ell in 0..m {
            for i in 0..n {
                comps[i] = plan[i][ell];
                est.copy_from_slice(&y[i * n..(i + 1) * n]);
                if clamp {
                    let mut clamped = false;
                    for (j, v) in est.iter_mut().enumerate() {
                        let c = v.clamp(bounds.lower()[j] + CLAMP_EPS, bounds.upper()[j] - CLAMP_EPS);
                        clamped |= c != *v;
                        *v = c;
                    }
                    clamp_events += clamped as u64;
                }
                let g = game.component_grad(i, comps[i], &est)?;
                evals[i] += 1;
                x_next[i] = x[i] - alpha * g;
            }
            bounds.project_in_place(&mut x_next);
            for t in 0..n * n {
                z[t] = y[t] - x[t % n];
            }
            h.apply(&z, &mut hz);
            for t in 0..n * n {
                y_next[t] = y[t] - w * hz[t];
            }
            if opts.overwrite_own {
                for i in 0..n {
                    y_next[i * n + i] = x_next[i];
                }
            }
            observer.on_inner(&InnerStep {
                k,
                ell,
                components: &comps,
                alpha,
                w,
                x_before: &x,
                x_after: &x_next,
                y_before: Some(&y),
                y_after: Some(&y_next),
            });
            std::mem::swap(&mut x, &mut x_next);
            std::mem::swap(&mut y, &mut y_next);
            if opts.debug_inner {
                inner.push(InnerRow {
                    k,
                    ell,
                    sq_err: x.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum(),
                    disagreement: disagreement_norm(&y, &x),
                });
            }
        }
        if !bounds.contains(&x) {
            return Err(DynamicsError::Infeasible(k + 1));
        }
    }
    rows.push(row(big_k, &x, &x0, x_star, disagreement_norm(&y, &x), schedule.value(big_k)));
    Ok(RunTrace {
        rows,
        inner,
        meta: TraceMeta {
            mode: opts.mode,
            info: InfoMode::Partial,
            seed: opts.seed,
            game_hash: game_hash(game),
            network_hash: Some(network.hash()),
            x0_hash: profile_hash(&x0),
            schedule: schedule.describe(),
            epochs: big_k,
            m,
            grad_evals: evals,
            clamp_events,
        },
        x0,
        x_final: ActionProfile(x),
        y_final: Some(y),
    })
}
