//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Keys carry a dotted section
//! prefix. Required keys are marked; everything else has the default shown.
//!
//! ```text
//! game.kind = ev | edge             (required)
//! game.n = 5
//! game.m = 10
//! game.seed = 0
//! game.coupling_ratio = 0.5
//! game.coupling = 0,1               range "lo,hi"
//! # EV only
//! game.q = 1,2
//! game.d = 5,15
//! game.b = -1,1
//! game.box_margin = 3
//! # edge only
//! game.a = 0.8,1.2
//! game.kappa = 0.1,0.3
//! game.b = -1.2,-0.6
//! game.dcong = 0.2,0.6
//! game.r = 1,3
//! game.capacity = 5,6
//! game.slope = 0.4,0.8
//! game.lower = 0.5
//! game.gap = 1
//!
//! network.kind = ring | complete | random
//! network.p = 0.5                   random graphs only
//! network.seed = 0
//!
//! schedule.kind = constant | diminishing   (required)
//! schedule.alpha0 = <real>          (required)
//! schedule.w0 = 0
//! schedule.epochs = <integer>       (required)
//! schedule.clamp = true             diminishing: clamp w_k into the
//!                                   8L/lmin alpha_k < w_k < 1/(2 m lmin) band
//!
//! runs.count = 20
//! runs.seed_base = 0
//! runs.seeds = 3,5,8                overrides count/seed_base
//! arms = rr-full,sgd-full,rr-partial,sgd-partial
//!
//! init.perturb_y0 = 0
//! run.force = false                 run constant schedules failing the checks
//! run.overwrite_own = false         experimental estimate overwrite
//! output.dir = out
//!
//! variance.alphas = 0.01,0.005,0.0025
//! variance.num_perms = 512
//! variance.seed = 0
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::dynamics::InfoMode;
use crate::game::{EdgeRanges, EvRanges, GameKind, Range};
use crate::network::GraphKind;
use crate::sampling::SamplingMode;
use crate::schedule::ScheduleKind;

use super::HarnessError;

/// One (sampling rule, information pattern) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Arm {
    pub mode: SamplingMode,
    pub info: InfoMode,
}

impl Arm {
    pub fn new(mode: SamplingMode, info: InfoMode) -> Self {
        Self { mode, info }
    }

    pub fn name(&self) -> String {
        format!("{}-{}", self.mode, self.info.as_str())
    }
}

impl FromStr for Arm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (mode, info) = s
            .split_once('-')
            .ok_or_else(|| format!("arm `{s}` is not of the form <rr|sgd>-<full|partial>"))?;
        Ok(Arm::new(mode.parse()?, info.parse()?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameBlock {
    pub kind: GameKind,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub ev: EvRanges,
    pub edge: EdgeRanges,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkBlock {
    pub kind: GraphKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleBlock {
    pub kind: ScheduleKind,
    pub alpha0: f64,
    pub w0: f64,
    pub epochs: usize,
    pub clamp: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunsBlock {
    pub count: usize,
    pub seed_base: u64,
    pub explicit: Option<Vec<u64>>,
}

impl RunsBlock {
    pub fn seeds(&self) -> Vec<u64> {
        match &self.explicit {
            Some(s) => s.clone(),
            None => (0..self.count as u64).map(|k| self.seed_base + k).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceBlock {
    pub alphas: Vec<f64>,
    pub num_perms: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub game: GameBlock,
    pub network: NetworkBlock,
    pub schedule: ScheduleBlock,
    pub runs: RunsBlock,
    pub arms: Vec<Arm>,
    pub perturb_y0: f64,
    pub force: bool,
    pub overwrite_own: bool,
    pub output_dir: PathBuf,
    pub variance: VarianceBlock,
}

const REQUIRED: [&str; 4] = ["game.kind", "schedule.kind", "schedule.alpha0", "schedule.epochs"];

const SHARED_GAME_KEYS: [&str; 6] = ["game.n", "game.m", "game.seed", "game.coupling_ratio", "game.coupling", "game.b"];
const EV_KEYS: [&str; 4] = ["game.q", "game.d", "game.box_margin", "game.b"];
const EDGE_KEYS: [&str; 8] = [
    "game.a",
    "game.kappa",
    "game.dcong",
    "game.r",
    "game.capacity",
    "game.slope",
    "game.lower",
    "game.gap",
];
const OTHER_KEYS: [&str; 18] = [
    "game.kind",
    "network.kind",
    "network.p",
    "network.seed",
    "schedule.kind",
    "schedule.alpha0",
    "schedule.w0",
    "schedule.epochs",
    "schedule.clamp",
    "runs.count",
    "runs.seed_base",
    "runs.seeds",
    "arms",
    "init.perturb_y0",
    "run.force",
    "run.overwrite_own",
    "output.dir",
    "variance.alphas",
];
const VARIANCE_KEYS: [&str; 2] = ["variance.num_perms", "variance.seed"];

fn known(key: &str) -> bool {
    SHARED_GAME_KEYS.contains(&key)
        || EV_KEYS.contains(&key)
        || EDGE_KEYS.contains(&key)
        || OTHER_KEYS.contains(&key)
        || VARIANCE_KEYS.contains(&key)
}

fn err(line: usize, msg: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        line: Some(line),
        msg: msg.into(),
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, v: &str, what: &str) -> Result<T, HarnessError> {
    v.parse()
        .map_err(|_| err(line, format!("`{key}` expects {what}, got `{v}`")))
}

fn parse_real(line: usize, key: &str, v: &str) -> Result<f64, HarnessError> {
    let x: f64 = parse_num(line, key, v, "a real number")?;
    if !x.is_finite() {
        return Err(err(line, format!("`{key}` must be finite, got `{v}`")));
    }
    Ok(x)
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str, what: &str) -> Result<Vec<T>, HarnessError> {
    v.split(',')
        .map(|t| parse_num(line, key, t.trim(), what))
        .collect()
}

fn parse_range(line: usize, key: &str, v: &str) -> Result<Range, HarnessError> {
    let vals: Vec<f64> = parse_list(line, key, v, "a range `lo,hi`")?;
    match vals[..] {
        [lo, hi] if lo.is_finite() && hi.is_finite() && lo <= hi => Ok(Range::new(lo, hi)),
        _ => Err(err(line, format!("`{key}` expects a range `lo,hi` with lo <= hi, got `{v}`"))),
    }
}

fn parse_enum<T: FromStr<Err = String>>(line: usize, key: &str, v: &str) -> Result<T, HarnessError> {
    v.parse().map_err(|e: String| err(line, format!("`{key}`: {e}")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool, HarnessError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(err(line, format!("`{key}` expects true or false, got `{v}`"))),
    }
}

fn parse_game_kind(line: usize, v: &str) -> Result<GameKind, HarnessError> {
    match v {
        "ev" => Ok(GameKind::Ev),
        "edge" => Ok(GameKind::Edge),
        _ => Err(err(line, format!("`game.kind`: unknown value `{v}` (allowed: ev, edge)"))),
    }
}

fn parse_schedule_kind(line: usize, v: &str) -> Result<ScheduleKind, HarnessError> {
    match v {
        "constant" => Ok(ScheduleKind::Constant),
        "diminishing" => Ok(ScheduleKind::Diminishing),
        _ => Err(err(
            line,
            format!("`schedule.kind`: unknown value `{v}` (allowed: constant, diminishing)"),
        )),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if !known(k) {
                return Err(err(line, format!("unknown key `{k}`")));
            }
            if v.is_empty() {
                return Err(err(line, format!("`{k}` has an empty value")));
            }
            if let Some((first, _)) = entries.get(k) {
                return Err(err(line, format!("duplicate key `{k}` (first set on line {first})")));
            }
            entries.insert(k.to_string(), (line, v.to_string()));
        }
        for key in REQUIRED {
            if !entries.contains_key(key) {
                return Err(HarnessError::Config {
                    line: None,
                    msg: format!("missing required key `{key}`"),
                });
            }
        }
        let (kline, kv) = &entries["game.kind"];
        let kind = parse_game_kind(*kline, kv)?;
        let foreign: &[&str] = match kind {
            GameKind::Ev => &EDGE_KEYS,
            GameKind::Edge => &["game.q", "game.d", "game.box_margin"],
        };
        for key in foreign {
            if let Some((line, _)) = entries.get(*key) {
                return Err(err(*line, format!("`{key}` does not apply to game.kind = {}", kind.as_str())));
            }
        }
        let (sline, sv) = &entries["schedule.kind"];
        let mut cfg = ExperimentConfig {
            game: GameBlock {
                kind,
                n: 5,
                m: 10,
                seed: 0,
                ev: EvRanges::default(),
                edge: EdgeRanges::default(),
            },
            network: NetworkBlock {
                kind: GraphKind::Ring,
                seed: 0,
            },
            schedule: ScheduleBlock {
                kind: parse_schedule_kind(*sline, sv)?,
                alpha0: 0.0,
                w0: 0.0,
                epochs: 0,
                clamp: true,
            },
            runs: RunsBlock {
                count: 20,
                seed_base: 0,
                explicit: None,
            },
            arms: vec![
                Arm::new(SamplingMode::Rr, InfoMode::Full),
                Arm::new(SamplingMode::Sgd, InfoMode::Full),
                Arm::new(SamplingMode::Rr, InfoMode::Partial),
                Arm::new(SamplingMode::Sgd, InfoMode::Partial),
            ],
            perturb_y0: 0.0,
            force: false,
            overwrite_own: false,
            output_dir: PathBuf::from("out"),
            variance: VarianceBlock {
                alphas: vec![0.01, 0.005, 0.0025],
                num_perms: crate::analysis::DEFAULT_NUM_PERMS,
                seed: 0,
            },
        };
        let mut network_p: Option<(usize, f64)> = None;
        for (key, (line, v)) in &entries {
            let line = *line;
            let v = v.as_str();
            let key = key.as_str();
            let ev = kind == GameKind::Ev;
            match key {
                "game.kind" | "schedule.kind" => {}
                "game.n" => cfg.game.n = parse_num(line, key, v, "an integer")?,
                "game.m" => cfg.game.m = parse_num(line, key, v, "an integer")?,
                "game.seed" => cfg.game.seed = parse_num(line, key, v, "an integer")?,
                "game.coupling_ratio" => {
                    let r = parse_real(line, key, v)?;
                    cfg.game.ev.coupling_ratio = r;
                    cfg.game.edge.coupling_ratio = r;
                }
                "game.coupling" => {
                    let r = parse_range(line, key, v)?;
                    cfg.game.ev.coupling = r;
                    cfg.game.edge.coupling = r;
                }
                "game.b" if ev => cfg.game.ev.b = parse_range(line, key, v)?,
                "game.b" => cfg.game.edge.b = parse_range(line, key, v)?,
                "game.q" => cfg.game.ev.q = parse_range(line, key, v)?,
                "game.d" => cfg.game.ev.d = parse_range(line, key, v)?,
                "game.box_margin" => cfg.game.ev.box_margin = parse_real(line, key, v)?,
                "game.a" => cfg.game.edge.a = parse_range(line, key, v)?,
                "game.kappa" => cfg.game.edge.kappa = parse_range(line, key, v)?,
                "game.dcong" => cfg.game.edge.dcong = parse_range(line, key, v)?,
                "game.r" => cfg.game.edge.r = parse_range(line, key, v)?,
                "game.capacity" => cfg.game.edge.capacity = parse_range(line, key, v)?,
                "game.slope" => cfg.game.edge.slope = parse_range(line, key, v)?,
                "game.lower" => cfg.game.edge.lower = parse_real(line, key, v)?,
                "game.gap" => cfg.game.edge.gap = parse_real(line, key, v)?,
                "network.kind" => cfg.network.kind = parse_enum(line, key, v)?,
                "network.p" => network_p = Some((line, parse_real(line, key, v)?)),
                "network.seed" => cfg.network.seed = parse_num(line, key, v, "an integer")?,
                "schedule.alpha0" => cfg.schedule.alpha0 = parse_real(line, key, v)?,
                "schedule.w0" => cfg.schedule.w0 = parse_real(line, key, v)?,
                "schedule.epochs" => cfg.schedule.epochs = parse_num(line, key, v, "an integer")?,
                "schedule.clamp" => cfg.schedule.clamp = parse_bool(line, key, v)?,
                "runs.count" => cfg.runs.count = parse_num(line, key, v, "an integer")?,
                "runs.seed_base" => cfg.runs.seed_base = parse_num(line, key, v, "an integer")?,
                "runs.seeds" => cfg.runs.explicit = Some(parse_list(line, key, v, "a list of integers")?),
                "arms" => {
                    let arms: Vec<Arm> = v
                        .split(',')
                        .map(|a| parse_enum(line, key, a.trim()))
                        .collect::<Result<_, _>>()?;
                    let mut sorted = arms.clone();
                    sorted.sort();
                    sorted.dedup();
                    if sorted.len() != arms.len() {
                        return Err(err(line, "`arms` lists an arm twice"));
                    }
                    cfg.arms = arms;
                }
                "init.perturb_y0" => cfg.perturb_y0 = parse_real(line, key, v)?,
                "run.force" => cfg.force = parse_bool(line, key, v)?,
                "run.overwrite_own" => cfg.overwrite_own = parse_bool(line, key, v)?,
                "output.dir" => cfg.output_dir = PathBuf::from(v),
                "variance.alphas" => {
                    cfg.variance.alphas = parse_list(line, key, v, "a list of reals")?;
                    if cfg.variance.alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                        return Err(err(line, "`variance.alphas` must be positive"));
                    }
                }
                "variance.num_perms" => cfg.variance.num_perms = parse_num(line, key, v, "an integer")?,
                "variance.seed" => cfg.variance.seed = parse_num(line, key, v, "an integer")?,
                other => unreachable!("key `{other}` passed the known-key filter"),
            }
        }
        match (cfg.network.kind, network_p) {
            (GraphKind::Random { .. }, Some((_, p))) => cfg.network.kind = GraphKind::Random { p },
            (_, Some((line, _))) => return Err(err(line, "`network.p` only applies to network.kind = random")),
            _ => {}
        }
        cfg.validate(&entries)?;
        Ok(cfg)
    }

    fn validate(&self, entries: &BTreeMap<String, (usize, String)>) -> Result<(), HarnessError> {
        let line_of = |k: &str| entries.get(k).map(|(l, _)| *l);
        let fail = |k: &str, msg: String| HarnessError::Config { line: line_of(k), msg };
        if self.schedule.epochs < 1 {
            return Err(fail("schedule.epochs", "`schedule.epochs` must be >= 1".into()));
        }
        if self.runs.seeds().is_empty() {
            return Err(fail("runs.count", "at least one run is required".into()));
        }
        if self.arms.is_empty() {
            return Err(fail("arms", "at least one arm is required".into()));
        }
        if self.perturb_y0 < 0.0 {
            return Err(fail("init.perturb_y0", "`init.perturb_y0` must be >= 0".into()));
        }
        if self.variance.num_perms < 1 {
            return Err(fail("variance.num_perms", "`variance.num_perms` must be >= 1".into()));
        }
        let game = match self.game.kind {
            GameKind::Ev => self.game.ev.validate(),
            GameKind::Edge => self.game.edge.validate(),
        };
        game.map_err(|e| HarnessError::Config { line: None, msg: e.to_string() })
    }

    /// Canonical text form; [`ExperimentConfig::parse`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let r = |r: Range| format!("{},{}", r.lo, r.hi);
        let g = &self.game;
        let _ = writeln!(s, "game.kind = {}", g.kind.as_str());
        let _ = writeln!(s, "game.n = {}", g.n);
        let _ = writeln!(s, "game.m = {}", g.m);
        let _ = writeln!(s, "game.seed = {}", g.seed);
        match g.kind {
            GameKind::Ev => {
                let e = &g.ev;
                let _ = writeln!(s, "game.coupling_ratio = {}", e.coupling_ratio);
                let _ = writeln!(s, "game.coupling = {}", r(e.coupling));
                let _ = writeln!(s, "game.q = {}", r(e.q));
                let _ = writeln!(s, "game.d = {}", r(e.d));
                let _ = writeln!(s, "game.b = {}", r(e.b));
                let _ = writeln!(s, "game.box_margin = {}", e.box_margin);
            }
            GameKind::Edge => {
                let e = &g.edge;
                let _ = writeln!(s, "game.coupling_ratio = {}", e.coupling_ratio);
                let _ = writeln!(s, "game.coupling = {}", r(e.coupling));
                let _ = writeln!(s, "game.a = {}", r(e.a));
                let _ = writeln!(s, "game.kappa = {}", r(e.kappa));
                let _ = writeln!(s, "game.b = {}", r(e.b));
                let _ = writeln!(s, "game.dcong = {}", r(e.dcong));
                let _ = writeln!(s, "game.r = {}", r(e.r));
                let _ = writeln!(s, "game.capacity = {}", r(e.capacity));
                let _ = writeln!(s, "game.slope = {}", r(e.slope));
                let _ = writeln!(s, "game.lower = {}", e.lower);
                let _ = writeln!(s, "game.gap = {}", e.gap);
            }
        }
        let _ = writeln!(s, "network.kind = {}", self.network.kind.name());
        if let GraphKind::Random { p } = self.network.kind {
            let _ = writeln!(s, "network.p = {p}");
        }
        let _ = writeln!(s, "network.seed = {}", self.network.seed);
        let sc = &self.schedule;
        let _ = writeln!(s, "schedule.kind = {}", sc.kind.as_str());
        let _ = writeln!(s, "schedule.alpha0 = {}", sc.alpha0);
        let _ = writeln!(s, "schedule.w0 = {}", sc.w0);
        let _ = writeln!(s, "schedule.epochs = {}", sc.epochs);
        let _ = writeln!(s, "schedule.clamp = {}", sc.clamp);
        match &self.runs.explicit {
            Some(seeds) => {
                let v: Vec<String> = seeds.iter().map(u64::to_string).collect();
                let _ = writeln!(s, "runs.seeds = {}", v.join(","));
            }
            None => {
                let _ = writeln!(s, "runs.count = {}", self.runs.count);
                let _ = writeln!(s, "runs.seed_base = {}", self.runs.seed_base);
            }
        }
        let arms: Vec<String> = self.arms.iter().map(Arm::name).collect();
        let _ = writeln!(s, "arms = {}", arms.join(","));
        let _ = writeln!(s, "init.perturb_y0 = {}", self.perturb_y0);
        let _ = writeln!(s, "run.force = {}", self.force);
        let _ = writeln!(s, "run.overwrite_own = {}", self.overwrite_own);
        let _ = writeln!(s, "output.dir = {}", self.output_dir.display());
        let alphas: Vec<String> = self.variance.alphas.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "variance.alphas = {}", alphas.join(","));
        let _ = writeln!(s, "variance.num_perms = {}", self.variance.num_perms);
        let _ = writeln!(s, "variance.seed = {}", self.variance.seed);
        s
    }

    /// Shifts every run seed by `offset`.
    pub fn with_seed_offset(mut self, offset: u64) -> Self {
        match &mut self.runs.explicit {
            Some(seeds) => seeds.iter_mut().for_each(|s| *s += offset),
            None => self.runs.seed_base += offset,
        }
        self
    }
}

/// Reads and parses a config file.
pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    ExperimentConfig::parse(&text)
}
