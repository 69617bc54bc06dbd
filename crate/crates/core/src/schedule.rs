//! Step-size schedules `(alpha_k, w_k)` and their admissibility checks.

use std::fmt;

use thiserror::Error;

use crate::game::GameConstants;
use crate::network::AugmentedMatrix;

/// Relative margin keeping clamped `w_k` strictly inside the sandwich.
pub const SANDWICH_MARGIN: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("invalid schedule: {0}")]
    Invalid(String),
    #[error("infeasible schedule: {inequality} fails at k = 0 ({lhs} >= {rhs})")]
    Infeasible {
        inequality: String,
        lhs: f64,
        rhs: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    Diminishing,
}

impl ScheduleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::Diminishing => "diminishing",
        }
    }
}

/// Bounds `8L/lambda_min * alpha_k < w_k < 1/(2 m lambda_min)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    pub lower_coef: f64,
    pub upper: f64,
}

impl Sandwich {
    pub fn new(lip: f64, lambda_min: f64, m: usize) -> Self {
        Self {
            lower_coef: 8.0 * lip / lambda_min,
            upper: 1.0 / (2.0 * m as f64 * lambda_min),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub alpha0: f64,
    pub w0: f64,
    /// Number of epochs `K`.
    pub horizon: usize,
    /// Clamp applied to diminishing `w_k`; `None` leaves `w0/sqrt(k+1)` as is.
    pub sandwich: Option<Sandwich>,
}

impl Schedule {
    /// `alpha_k = alpha`, `w_k = w`. A zero `alpha` is allowed (frozen actions).
    pub fn constant(alpha: f64, w: f64, horizon: usize) -> Result<Self, ScheduleError> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(ScheduleError::Invalid(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if !(0.0..1.0).contains(&w) {
            return Err(ScheduleError::Invalid(format!("w must lie in [0, 1), got {w}")));
        }
        Ok(Self {
            kind: ScheduleKind::Constant,
            alpha0: alpha,
            w0: w,
            horizon,
            sandwich: None,
        })
    }

    /// `alpha_k = alpha0/(k+1)` and `w_k = w0/sqrt(k+1)`, clamped into the
    /// sandwich when one is given. Fails if the clamp is empty at `k = 0`.
    pub fn diminishing(
        alpha0: f64,
        w0: f64,
        horizon: usize,
        sandwich: Option<Sandwich>,
    ) -> Result<Self, ScheduleError> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(ScheduleError::Invalid(format!("alpha0 must be positive, got {alpha0}")));
        }
        if !(w0 > 0.0 && w0 < 1.0) {
            return Err(ScheduleError::Invalid(format!("w0 must lie in (0, 1), got {w0}")));
        }
        if let Some(s) = sandwich {
            let lo = s.lower_coef * alpha0 * (1.0 + SANDWICH_MARGIN);
            let hi = s.upper * (1.0 - SANDWICH_MARGIN);
            if lo >= hi {
                return Err(ScheduleError::Infeasible {
                    inequality: "8L/lambda_min * alpha_0 < w_0 < 1/(2 m lambda_min)".into(),
                    lhs: lo,
                    rhs: hi,
                });
            }
            if hi >= 1.0 {
                return Err(ScheduleError::Invalid(format!(
                    "sandwich upper end {hi} does not keep w_k below 1"
                )));
            }
        }
        Ok(Self {
            kind: ScheduleKind::Diminishing,
            alpha0,
            w0,
            horizon,
            sandwich,
        })
    }

    /// `(alpha_k, w_k)` for epoch `k`.
    pub fn value(&self, k: usize) -> (f64, f64) {
        match self.kind {
            ScheduleKind::Constant => (self.alpha0, self.w0),
            ScheduleKind::Diminishing => {
                let kp1 = (k + 1) as f64;
                let alpha = self.alpha0 / kp1;
                let base = self.w0 / kp1.sqrt();
                let w = match self.sandwich {
                    Some(s) => base.clamp(
                        s.lower_coef * alpha * (1.0 + SANDWICH_MARGIN),
                        s.upper * (1.0 - SANDWICH_MARGIN),
                    ),
                    None => base,
                };
                (alpha, w)
            }
        }
    }

    pub fn describe(&self) -> String {
        let mut s = format!(
            "kind={} alpha0={} w0={} epochs={}",
            self.kind.as_str(),
            self.alpha0,
            self.w0,
            self.horizon
        );
        if let Some(sw) = self.sandwich {
            s.push_str(&format!(" sandwich=[{}*alpha_k, {}]", sw.lower_coef, sw.upper));
        }
        s
    }
}

/// Free-function form of [`Schedule::value`].
pub fn schedule_value(s: &Schedule, k: usize) -> (f64, f64) {
    s.value(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl Condition {
    fn less(name: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            satisfied: lhs < rhs,
        }
    }
}

/// Outcome of [`check_conditions`]: the inequalities plus reference values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConditionReport {
    pub entries: Vec<Condition>,
    /// Informational values, e.g. the horizon-tuned step `alpha_K`.
    pub reference: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|c| c.satisfied)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Condition> {
        self.entries.iter().filter(|c| !c.satisfied)
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<52} {:>14} {:>14}  status", "condition", "lhs", "rhs")?;
        for c in &self.entries {
            writeln!(
                f,
                "{:<52} {:>14.6e} {:>14.6e}  {}",
                c.name,
                c.lhs,
                c.rhs,
                if c.satisfied { "ok" } else { "FAIL" }
            )?;
        }
        for (name, v) in &self.reference {
            writeln!(f, "{name:<52} {v:>14.6e}")?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        writeln!(f, "overall: {}", if self.pass() { "pass" } else { "FAIL" })
    }
}

/// `alpha_bar = min{1/L, 1/(2 mu)}`.
pub fn alpha_bar(c: &GameConstants) -> f64 {
    (1.0 / c.lip).min(1.0 / (2.0 * c.mu))
}

/// Horizon-tuned constant step `alpha_K = min{alpha_bar, 4 ln(mK) / (mu m K)}`.
pub fn corollary_alpha(c: &GameConstants, m: usize, horizon: usize) -> f64 {
    let mk = (m * horizon) as f64;
    alpha_bar(c).min(4.0 * mk.ln() / (c.mu * mk))
}

/// Checks a schedule against the step-size conditions of the convergence
/// results, using [`GameConstants::conservative`] constants. Without an
/// augmented matrix (full-information runs) only the `alpha` conditions are
/// checked.
pub fn check_conditions(
    s: &Schedule,
    constants: &GameConstants,
    h: Option<&AugmentedMatrix>,
    m: usize,
) -> ConditionReport {
    let c = constants.conservative();
    let mut rep = ConditionReport::default();
    let abar = alpha_bar(&c);
    match s.kind {
        ScheduleKind::Constant => {
            rep.entries.push(Condition::less("alpha < min{1/L, 1/(2 mu)}", s.alpha0, abar));
            if let Some(h) = h {
                let (lmin, lmax) = (h.lambda_min, h.lambda_max);
                let w = s.w0;
                rep.entries.push(Condition::less(
                    "w < min{lmin/(2 lmax), 1/lmin}",
                    w,
                    (lmin / (2.0 * lmax)).min(1.0 / lmin),
                ));
                let contraction = w * lmin - w * w * lmax;
                rep.entries.push(Condition::less("0 < w lmin - w^2 lmax", 0.0, contraction));
                rep.entries.push(Condition::less("w lmin - w^2 lmax < 1", contraction, 1.0));
            }
            rep.reference.push(("alpha_bar = min{1/L, 1/(2 mu)}".into(), abar));
            if s.horizon > 0 {
                rep.reference.push((
                    "alpha_K = min{alpha_bar, 4 ln(mK)/(mu m K)}".into(),
                    corollary_alpha(&c, m, s.horizon),
                ));
            }
        }
        ScheduleKind::Diminishing => {
            let (a0, w0) = s.value(0);
            rep.entries.push(Condition::less("alpha_0 < 1/(2 mu)", a0, 1.0 / (2.0 * c.mu)));
            if let Some(h) = h {
                let (lmin, lmax) = (h.lambda_min, h.lambda_max);
                rep.entries.push(Condition::less("w_0 < lmin/(2 lmax)", w0, lmin / (2.0 * lmax)));
                rep.entries.push(Condition::less("8L/lmin * alpha_0 < w_0", 8.0 * c.lip / lmin * a0, w0));
                rep.entries.push(Condition::less("w_0 < 1/(2 m lmin)", w0, 1.0 / (2.0 * m as f64 * lmin)));
                let sandwich = Sandwich::new(c.lip, lmin, m);
                let violations = (0..=s.horizon)
                    .filter(|&k| {
                        let (a, w) = s.value(k);
                        !(sandwich.lower_coef * a < w && w < sandwich.upper)
                    })
                    .count();
                rep.entries.push(Condition::less(
                    "epochs k <= K violating the w_k sandwich",
                    violations as f64,
                    0.5,
                ));
            }
            rep.notes.push("sum alpha_k = inf: alpha_k = alpha0/(k+1) is harmonic".into());
            rep.notes.push("sum alpha_k^2 < inf: alpha_k^2 = alpha0^2/(k+1)^2".into());
            rep.notes.push("sum w_k = inf: w_k >= min(w0/sqrt(k+1), const)".into());
        }
    }
    rep
}
