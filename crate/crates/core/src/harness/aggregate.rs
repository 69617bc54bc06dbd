use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::config::Arm;
use super::HarnessError;
use crate::dynamics::RunTrace;

pub const AGGREGATE_HEADER: &str = "k,arm,mean_e,std_e";

/// Per-epoch statistics of `e_k` for one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmStats {
    pub arm: Arm,
    pub runs: usize,
    pub mean_e: Vec<f64>,
    /// Sample standard deviation (`n - 1` denominator); zero for one run.
    pub std_e: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub arms: Vec<ArmStats>,
}

/// Mean and sample standard deviation of `e_k` per epoch and arm. Arms
/// appear in sorted order.
pub fn aggregate<'a, I>(traces: I) -> Result<AggregateStats, HarnessError>
where
    I: IntoIterator<Item = (Arm, &'a RunTrace)>,
{
    let mut groups: BTreeMap<Arm, Vec<&RunTrace>> = BTreeMap::new();
    for (arm, t) in traces {
        groups.entry(arm).or_default().push(t);
    }
    if groups.is_empty() {
        return Err(HarnessError::Aggregate("no traces to aggregate".into()));
    }
    let epochs = groups.values().next().and_then(|g| g.first()).map(|t| t.rows.len());
    let mut arms = Vec::with_capacity(groups.len());
    for (arm, runs) in groups {
        if runs.is_empty() {
            return Err(HarnessError::Aggregate(format!("arm {} has no runs", arm.name())));
        }
        let len = runs[0].rows.len();
        if Some(len) != epochs || runs.iter().any(|t| t.rows.len() != len) {
            return Err(HarnessError::Aggregate(format!("arm {} has mismatched epoch grids", arm.name())));
        }
        for t in &runs {
            if t.rows.iter().enumerate().any(|(k, r)| r.k != k) {
                return Err(HarnessError::Aggregate(format!("arm {} has a non-contiguous epoch grid", arm.name())));
            }
        }
        let cnt = runs.len() as f64;
        let mut mean_e = vec![0.0; len];
        let mut std_e = vec![0.0; len];
        for k in 0..len {
            let mean = runs.iter().map(|t| t.rows[k].e).sum::<f64>() / cnt;
            mean_e[k] = mean;
            if runs.len() > 1 {
                let ss: f64 = runs.iter().map(|t| (t.rows[k].e - mean).powi(2)).sum();
                std_e[k] = (ss / (cnt - 1.0)).sqrt();
            }
        }
        arms.push(ArmStats {
            arm,
            runs: runs.len(),
            mean_e,
            std_e,
        });
    }
    Ok(AggregateStats { arms })
}

impl AggregateStats {
    pub fn arm(&self, arm: Arm) -> Option<&ArmStats> {
        self.arms.iter().find(|a| a.arm == arm)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(AGGREGATE_HEADER);
        s.push('\n');
        for a in &self.arms {
            let name = a.arm.name();
            for k in 0..a.mean_e.len() {
                let _ = writeln!(s, "{k},{name},{},{}", a.mean_e[k], a.std_e[k]);
            }
        }
        s
    }
}

/// Writes the aggregate CSV to `path`.
pub fn write_csv(stats: &AggregateStats, path: &std::path::Path) -> Result<(), HarnessError> {
    std::fs::write(path, stats.to_csv()).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
