use super::OracleError;

/// Lower clamp for the log error, reached when the iterate hits `x_star`.
pub const E_FLOOR: f64 = -16.0;

/// `e = log10(|x - x_star| / |x0 - x_star|)`, floored at [`E_FLOOR`].
pub fn error_metric(x: &[f64], x0: &[f64], x_star: &[f64]) -> Result<f64, OracleError> {
    if x.len() != x_star.len() || x0.len() != x_star.len() {
        return Err(OracleError::Dimension {
            expected: x_star.len(),
            got: x.len().min(x0.len()),
        });
    }
    let d0 = dist(x0, x_star);
    if d0 == 0.0 {
        return Err(OracleError::DegenerateNormalization);
    }
    let d = dist(x, x_star);
    if d == 0.0 {
        return Ok(E_FLOOR);
    }
    Ok((d / d0).log10().max(E_FLOOR))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// `|y - 1 (x) x|^2` for the row-major stacked estimates `y[i * n + j]`.
pub fn disagreement_norm(y: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    debug_assert_eq!(y.len(), n * n);
    y.iter()
        .enumerate()
        .map(|(t, v)| {
            let d = v - x[t % n];
            d * d
        })
        .sum()
}

/// Estimates of all players, row `i` holding player `i`'s view of the profile.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateMatrix {
    n: usize,
    data: Vec<f64>,
}

impl EstimateMatrix {
    /// `1 (x) x`: every player knows the profile exactly.
    pub fn consensus(x: &[f64]) -> Self {
        let n = x.len();
        Self {
            n,
            data: (0..n * n).map(|t| x[t % n]).collect(),
        }
    }

    pub fn from_stacked(n: usize, data: Vec<f64>) -> Result<Self, OracleError> {
        if data.len() != n * n {
            return Err(OracleError::Dimension {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_stacked(&self) -> &[f64] {
        &self.data
    }

    pub fn disagreement(&self, x: &[f64]) -> f64 {
        disagreement_norm(&self.data, x)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "slope fit needs at least two points");
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
