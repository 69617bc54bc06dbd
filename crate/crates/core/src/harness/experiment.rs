use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::aggregate::{aggregate, AggregateStats};
use super::config::{Arm, ExperimentConfig};
use super::HarnessError;
use crate::analysis::{
    loglog_slope, shuffling_variance_mc, solve_ne, theory_bounds, NeSolution, ShuffleVarianceEstimate, TheoryBounds,
};
use crate::dynamics::{
    disagreement_of_start, initial_point, run_full_info, run_partial_info, InfoMode, RunOptions, RunTrace,
};
use crate::game::{game_constants, make_edge_game, make_ev_game, GameConstants, GameKind, GameSpec};
use crate::network::{build_graph, build_h, metropolis_weights, AugmentedMatrix, NetworkSpec};
use crate::sampling::{stream_rng, StreamPurpose};
use crate::schedule::{check_conditions, ConditionReport, Sandwich, Schedule, ScheduleKind};

/// Everything shared by all runs of an experiment.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub game: GameSpec,
    pub ne: NeSolution,
    pub constants: GameConstants,
    pub network: Option<(NetworkSpec, AugmentedMatrix)>,
    pub schedule: Schedule,
    pub conditions: ConditionReport,
}

impl Prepared {
    fn needs_network(cfg: &ExperimentConfig) -> bool {
        cfg.arms.iter().any(|a| a.info == InfoMode::Partial)
    }

    pub fn run_options(&self, arm: Arm, seed: u64, debug_inner: bool) -> RunOptions {
        RunOptions {
            force: self.config.force,
            perturb_y0: self.config.perturb_y0,
            overwrite_own: self.config.overwrite_own,
            debug_inner,
            ..RunOptions::new(seed, arm.mode)
        }
    }

    /// `A0` and `|ybar0|^2` averaged over the configured seeds.
    pub fn initial_errors(&self) -> (f64, f64) {
        let seeds = self.config.runs.seeds();
        let mut a0 = 0.0;
        let mut y0 = 0.0;
        for &s in &seeds {
            let x0 = initial_point(&self.game, s);
            a0 += x0.sq_dist(&self.ne.x_star);
            y0 += disagreement_of_start(&x0, &self.run_options(Arm::new(crate::sampling::SamplingMode::Rr, InfoMode::Partial), s, false));
        }
        (a0 / seeds.len() as f64, y0 / seeds.len() as f64)
    }

    /// Constant-step bounds; `Err` holds the reason they are unavailable.
    pub fn bounds(&self, a0: f64, ybar0_sq: f64) -> Result<TheoryBounds, String> {
        let (_, h) = self
            .network
            .as_ref()
            .ok_or_else(|| "no partial-information arm, so no network".to_string())?;
        theory_bounds(&self.constants, h, &self.schedule, self.game.m(), self.game.n(), a0, ybar0_sq)
            .map_err(|e| e.to_string())
    }
}

/// Builds the game, solves for the equilibrium, builds the network and
/// checks the schedule.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    let g = &cfg.game;
    let game = match g.kind {
        GameKind::Ev => make_ev_game(g.n, g.m, g.seed, &g.ev)?,
        GameKind::Edge => make_edge_game(g.n, g.m, g.seed, &g.edge)?,
    };
    let ne = solve_ne(&game)?;
    let constants = game_constants(&game, &ne.x_star)?;
    let network = if Prepared::needs_network(cfg) {
        let adj = build_graph(cfg.network.kind, g.n, cfg.network.seed)?;
        let net = metropolis_weights(&adj)?;
        let h = build_h(&net);
        Some((net, h))
    } else {
        None
    };
    let sc = &cfg.schedule;
    let schedule = match sc.kind {
        ScheduleKind::Constant => Schedule::constant(sc.alpha0, sc.w0, sc.epochs)?,
        ScheduleKind::Diminishing => {
            let sandwich = match (&network, sc.clamp) {
                (Some((_, h)), true) => Some(Sandwich::new(constants.conservative().lip, h.lambda_min, g.m)),
                _ => None,
            };
            Schedule::diminishing(sc.alpha0, sc.w0, sc.epochs, sandwich)?
        }
    };
    let conditions = check_conditions(&schedule, &constants, network.as_ref().map(|(_, h)| h), g.m);
    if schedule.kind == ScheduleKind::Constant && !conditions.pass() && !cfg.force {
        return Err(HarnessError::ConditionsFailed(conditions.to_string()));
    }
    Ok(Prepared {
        config: cfg.clone(),
        game,
        ne,
        constants,
        network,
        schedule,
        conditions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExecOptions {
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
    pub debug_inner: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub prepared: Prepared,
    /// Traces keyed and ordered by `(arm, seed)`.
    pub traces: BTreeMap<(Arm, u64), RunTrace>,
    pub aggregate: AggregateStats,
    pub bounds: Result<TheoryBounds, String>,
}

impl ExperimentResult {
    pub fn arm_traces(&self, arm: Arm) -> impl Iterator<Item = (u64, &RunTrace)> {
        self.traces.iter().filter(move |((a, _), _)| *a == arm).map(|((_, s), t)| (*s, t))
    }
}

fn run_one(p: &Prepared, arm: Arm, seed: u64, debug_inner: bool) -> Result<RunTrace, HarnessError> {
    let opts = p.run_options(arm, seed, debug_inner);
    let x_star = &p.ne.x_star;
    let trace = match arm.info {
        InfoMode::Full => run_full_info(&p.game, &p.schedule, x_star, Some(&p.conditions), &opts)?,
        InfoMode::Partial => {
            let (net, h) = p.network.as_ref().expect("network built for partial arms");
            run_partial_info(&p.game, net, h, &p.schedule, x_star, Some(&p.conditions), &opts)?
        }
    };
    Ok(trace)
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Aggregate(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every `(arm, seed)` pair of a prepared experiment.
pub fn execute_prepared(p: Prepared, opts: &ExecOptions) -> Result<ExperimentResult, HarnessError> {
    let mut arms = p.config.arms.clone();
    arms.sort();
    let mut seeds = p.config.runs.seeds();
    seeds.sort_unstable();
    seeds.dedup();
    let jobs: Vec<(Arm, u64)> = arms.iter().flat_map(|&a| seeds.iter().map(move |&s| (a, s))).collect();
    let results: Vec<Result<RunTrace, HarnessError>> = with_pool(opts.jobs, || {
        jobs.par_iter()
            .map(|&(arm, seed)| run_one(&p, arm, seed, opts.debug_inner))
            .collect()
    })?;
    let mut traces = BTreeMap::new();
    for (key, r) in jobs.into_iter().zip(results) {
        traces.insert(key, r?);
    }
    check_pairing(&traces)?;
    let aggregate = aggregate(traces.iter().map(|((a, _), t)| (*a, t)))?;
    let bounds = if p.schedule.kind == ScheduleKind::Constant {
        let (a0, y0) = p.initial_errors();
        p.bounds(a0, y0)
    } else {
        Err("bounds are stated for constant schedules".into())
    };
    Ok(ExperimentResult {
        prepared: p,
        traces,
        aggregate,
        bounds,
    })
}

pub fn execute(cfg: &ExperimentConfig, opts: &ExecOptions) -> Result<ExperimentResult, HarnessError> {
    execute_prepared(prepare(cfg)?, opts)
}

/// Paired arms must share game, network and initial point for every seed.
fn check_pairing(traces: &BTreeMap<(Arm, u64), RunTrace>) -> Result<(), HarnessError> {
    let mut first: BTreeMap<u64, &RunTrace> = BTreeMap::new();
    for ((arm, seed), t) in traces {
        let Some(base) = first.get(seed) else {
            first.insert(*seed, t);
            continue;
        };
        if base.meta.game_hash != t.meta.game_hash || base.meta.x0_hash != t.meta.x0_hash || base.meta.schedule != t.meta.schedule {
            return Err(HarnessError::Pairing(format!("arm {} differs from its pair at seed {seed}", arm.name())));
        }
    }
    let nets: Vec<&String> = traces.values().filter_map(|t| t.meta.network_hash.as_ref()).collect();
    if nets.windows(2).any(|w| w[0] != w[1]) {
        return Err(HarnessError::Pairing("partial-information arms use different networks".into()));
    }
    Ok(())
}

fn sha(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), HarnessError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| HarnessError::Io { path, source: e })
}

pub fn constants_text(c: &GameConstants) -> String {
    format!(
        "mu = {}\nL = {}\nmu_F = {}\nL_F = {}\nG = {}\nsigma_star_sq = {}\nkappa = {}\nexact_curvature = {}\n",
        c.mu, c.lip, c.mu_f, c.lip_f, c.gbound, c.sigma_star_sq, c.kappa_cond, c.exact_curvature
    )
}

/// Writes all artifacts of a finished experiment to `dir`.
pub fn write_artifacts(res: &ExperimentResult, dir: &Path) -> Result<(), HarnessError> {
    let traces_dir = dir.join("traces");
    std::fs::create_dir_all(&traces_dir).map_err(|e| HarnessError::Io {
        path: traces_dir.clone(),
        source: e,
    })?;
    let p = &res.prepared;
    let config_text = p.config.to_text();
    write(dir, "config.txt", &config_text)?;
    let tables = p.game.tables();
    write(dir, "game_components.csv", &tables.components)?;
    write(dir, "game_players.csv", &tables.players)?;
    write(dir, "ne.txt", &p.ne.to_text())?;
    write(dir, "constants.txt", &constants_text(&p.constants))?;
    write(dir, "conditions.txt", &p.conditions.to_string())?;
    match &res.bounds {
        Ok(b) => write(dir, "bounds.txt", &b.to_text())?,
        Err(reason) => write(dir, "bounds.txt", &format!("unavailable = {reason}\n"))?,
    }
    if let Some((net, _)) = &p.network {
        write(dir, "network_adjacency.csv", &net.adjacency_csv())?;
        write(dir, "network_mixing.csv", &net.mixing_csv())?;
    }
    let mut manifest = String::new();
    let _ = writeln!(manifest, "config_hash = {}", sha(&config_text));
    let _ = writeln!(manifest, "game_kind = {}", p.game.kind().as_str());
    let _ = writeln!(manifest, "game_hash = {}", crate::game::game_hash(&p.game));
    let _ = writeln!(
        manifest,
        "network_hash = {}",
        p.network.as_ref().map_or("none".to_string(), |(n, _)| n.hash())
    );
    let _ = writeln!(manifest, "schedule = {}", p.schedule.describe());
    let _ = writeln!(manifest, "schedule_hash = {}", sha(&p.schedule.describe()));
    let _ = writeln!(manifest, "ne_method = {}", p.ne.method.as_str());
    let _ = writeln!(manifest, "conditions = {}", if p.conditions.pass() { "pass" } else { "fail" });
    let seeds: Vec<String> = p.config.runs.seeds().iter().map(u64::to_string).collect();
    let _ = writeln!(manifest, "seeds = {}", seeds.join(","));
    let mut x0_by_seed: BTreeMap<u64, &str> = BTreeMap::new();
    for ((arm, seed), t) in &res.traces {
        x0_by_seed.entry(*seed).or_insert(&t.meta.x0_hash);
        let stem = format!("{}_seed{seed}", arm.name());
        let csv = t.to_csv();
        write(&traces_dir, &format!("{stem}.csv"), &csv)?;
        write(&traces_dir, &format!("{stem}.meta.txt"), &t.meta_text())?;
        if !t.inner.is_empty() {
            write(&traces_dir, &format!("{stem}.inner.csv"), &t.inner_csv())?;
        }
        let _ = writeln!(
            manifest,
            "run.{}.{seed} = traces/{stem}.csv sha256={} grad_evals_per_epoch={}",
            arm.name(),
            sha(&csv),
            t.evals_per_epoch().map_or("mismatch".into(), |v| v.to_string())
        );
    }
    for (seed, h) in x0_by_seed {
        let _ = writeln!(manifest, "x0_hash.{seed} = {h}");
    }
    let _ = writeln!(manifest, "pairing = ok");
    let agg = res.aggregate.to_csv();
    write(dir, "aggregate.csv", &agg)?;
    let _ = writeln!(manifest, "aggregate_sha256 = {}", sha(&agg));
    write(dir, "manifest.txt", &manifest)
}

/// Runs an experiment and writes its artifacts to `output.dir`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &ExecOptions) -> Result<PathBuf, HarnessError> {
    let res = execute(cfg, opts)?;
    write_artifacts(&res, &cfg.output_dir)?;
    Ok(cfg.output_dir.clone())
}

#[derive(Debug, Clone)]
pub struct VariancePoint {
    pub alpha: f64,
    pub estimate: ShuffleVarianceEstimate,
    /// `alpha^2 L m n / 4 * sigma*^2`.
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct VarianceStudy {
    pub points: Vec<VariancePoint>,
    /// Log-log slope of the largest per-player estimate against `alpha`.
    pub slope: Option<f64>,
}

impl VarianceStudy {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,player,sigma_shuffle_sq,std_error,bound\n");
        for p in &self.points {
            for (i, (v, se)) in p.estimate.sigma_shuffle_sq.iter().zip(&p.estimate.std_error).enumerate() {
                let _ = writeln!(s, "{},{i},{v},{se},{}", p.alpha, p.bound);
            }
        }
        s
    }
}

/// Shuffling-variance estimates over the configured step sizes. Every step
/// size reuses the same permutation stream.
pub fn variance_study(p: &Prepared) -> Result<VarianceStudy, HarnessError> {
    let v = &p.config.variance;
    let c = p.constants.conservative();
    let (n, m) = (p.game.n() as f64, p.game.m() as f64);
    let mut points = Vec::with_capacity(v.alphas.len());
    for &alpha in &v.alphas {
        let mut rng = stream_rng(v.seed, StreamPurpose::Variance, 0, 0);
        let estimate = shuffling_variance_mc(&p.game, &p.ne, alpha, v.num_perms, &mut rng)?;
        points.push(VariancePoint {
            alpha,
            estimate,
            bound: alpha * alpha * c.lip * m * n / 4.0 * c.sigma_star_sq,
        });
    }
    let slope = (points.len() >= 2 && points.iter().all(|p| p.estimate.max() > 0.0)).then(|| {
        let a: Vec<f64> = points.iter().map(|p| p.alpha).collect();
        let s: Vec<f64> = points.iter().map(|p| p.estimate.max()).collect();
        loglog_slope(&a, &s)
    });
    Ok(VarianceStudy { points, slope })
}
