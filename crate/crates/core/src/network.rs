//! Communication graphs, Metropolis mixing weights and the augmented
//! consensus matrix `H = L (x) I_n + Delta`.
//!
//! The stacked estimate vector `y` is laid out player-major: entry
//! `i * n + j` is player `i`'s estimate of player `j`'s action.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::linalg::symmetric_eigen;
use crate::sampling::{stream_rng, StreamPurpose};

/// Resampling budget for random graphs.
pub const MAX_GRAPH_RETRIES: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("invalid network parameter: {0}")]
    Invalid(String),
    #[error("graph is not connected")]
    Disconnected,
    #[error("no connected random graph after {0} attempts")]
    RetriesExhausted(usize),
    #[error("matrix is not symmetric (max asymmetry {0})")]
    NotSymmetric(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphKind {
    Ring,
    Complete,
    /// Erdos-Renyi with edge probability `p`, resampled until connected.
    Random { p: f64 },
}

impl GraphKind {
    pub fn name(&self) -> &'static str {
        match self {
            GraphKind::Ring => "ring",
            GraphKind::Complete => "complete",
            GraphKind::Random { .. } => "random",
        }
    }
}

impl FromStr for GraphKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ring" => Ok(GraphKind::Ring),
            "complete" => Ok(GraphKind::Complete),
            "random" => Ok(GraphKind::Random { p: 0.5 }),
            other => Err(format!("unknown graph kind `{other}` (allowed: ring, complete, random)")),
        }
    }
}

/// Symmetric zero-diagonal 0/1 adjacency matrix of a connected graph.
pub fn build_graph(kind: GraphKind, n: usize, seed: u64) -> Result<DMatrix<f64>, NetworkError> {
    if n < 2 {
        return Err(NetworkError::Invalid(format!("need n >= 2 nodes, got {n}")));
    }
    let mut adj = DMatrix::zeros(n, n);
    match kind {
        GraphKind::Ring => {
            for i in 0..n {
                let j = (i + 1) % n;
                adj[(i, j)] = 1.0;
                adj[(j, i)] = 1.0;
            }
        }
        GraphKind::Complete => {
            adj.fill(1.0);
            adj.fill_diagonal(0.0);
        }
        GraphKind::Random { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(NetworkError::Invalid(format!("edge probability must lie in (0, 1], got {p}")));
            }
            let mut rng = stream_rng(seed, StreamPurpose::Graph, 0, 0);
            for _ in 0..MAX_GRAPH_RETRIES {
                adj.fill(0.0);
                for i in 0..n {
                    for j in (i + 1)..n {
                        if rng.gen::<f64>() < p {
                            adj[(i, j)] = 1.0;
                            adj[(j, i)] = 1.0;
                        }
                    }
                }
                if is_connected(&adj) {
                    return Ok(adj);
                }
            }
            return Err(NetworkError::RetriesExhausted(MAX_GRAPH_RETRIES));
        }
    }
    Ok(adj)
}

pub fn is_connected(adj: &DMatrix<f64>) -> bool {
    let n = adj.nrows();
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if adj[(i, j)] != 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Graph, edge weights and mixing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub n: usize,
    pub adjacency: DMatrix<f64>,
    /// Consensus weights `a_ij` entering `H` (unit weight on every edge).
    pub weights: DMatrix<f64>,
    /// Symmetric doubly stochastic mixing matrix.
    pub mixing: DMatrix<f64>,
    /// Smallest positive entry of `mixing`.
    pub eta: f64,
}

/// Metropolis-Hastings mixing: `w_ij = 1 / (1 + max(deg_i, deg_j))` on
/// edges, the diagonal takes the remainder of each row.
pub fn metropolis_weights(adjacency: &DMatrix<f64>) -> Result<NetworkSpec, NetworkError> {
    let n = adjacency.nrows();
    if n < 2 || adjacency.ncols() != n {
        return Err(NetworkError::Invalid(format!(
            "adjacency must be square with n >= 2, got {}x{}",
            n,
            adjacency.ncols()
        )));
    }
    for i in 0..n {
        if adjacency[(i, i)] != 0.0 {
            return Err(NetworkError::Invalid(format!("self loop at node {i}")));
        }
        for j in 0..n {
            let v = adjacency[(i, j)];
            if v != 0.0 && v != 1.0 {
                return Err(NetworkError::Invalid(format!("adjacency entry ({i}, {j}) = {v} is not 0/1")));
            }
            if v != adjacency[(j, i)] {
                return Err(NetworkError::NotSymmetric(1.0));
            }
        }
    }
    if !is_connected(adjacency) {
        return Err(NetworkError::Disconnected);
    }
    let deg: Vec<f64> = (0..n).map(|i| adjacency.row(i).sum()).collect();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if adjacency[(i, j)] != 0.0 {
                w[(i, j)] = 1.0 / (1.0 + deg[i].max(deg[j]));
            }
        }
        let off: f64 = w.row(i).sum();
        w[(i, i)] = 1.0 - off;
    }
    let eta = w.iter().cloned().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    Ok(NetworkSpec {
        n,
        adjacency: adjacency.clone(),
        weights: adjacency.clone(),
        mixing: w,
        eta,
    })
}

fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

impl NetworkSpec {
    pub fn adjacency_csv(&self) -> String {
        matrix_csv(&self.adjacency)
    }

    pub fn mixing_csv(&self) -> String {
        matrix_csv(&self.mixing)
    }

    /// SHA-256 over the adjacency, weights and mixing matrix, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.adjacency_csv().as_bytes());
        h.update(matrix_csv(&self.weights).as_bytes());
        h.update(self.mixing_csv().as_bytes());
        hex::encode(h.finalize())
    }
}

/// `H = L (x) I_n + Delta` with its extreme eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMatrix {
    pub n: usize,
    pub h: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Sparse form of the consensus weights: neighbours `(s, a_is)` of each node.
    neighbours: Vec<Vec<(usize, f64)>>,
    weights: DMatrix<f64>,
}

impl AugmentedMatrix {
    /// `out = H z` for a stacked `z` of length `n^2`, without forming `H`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(z.len(), n * n);
        debug_assert_eq!(out.len(), n * n);
        for i in 0..n {
            for j in 0..n {
                let zij = z[i * n + j];
                let mut acc = self.weights[(i, j)] * zij;
                for &(s, a) in &self.neighbours[i] {
                    acc += a * (zij - z[s * n + j]);
                }
                out[i * n + j] = acc;
            }
        }
    }
}

/// Assembles `H` densely and computes its spectral bounds.
pub fn build_h(network: &NetworkSpec) -> AugmentedMatrix {
    let n = network.n;
    let a = &network.weights;
    let nn = n * n;
    let mut h = DMatrix::zeros(nn, nn);
    for i in 0..n {
        let deg: f64 = a.row(i).sum();
        for s in 0..n {
            let lap = if i == s { deg } else { -a[(i, s)] };
            if lap == 0.0 {
                continue;
            }
            for j in 0..n {
                h[(i * n + j, s * n + j)] += lap;
            }
        }
        for j in 0..n {
            h[(i * n + j, i * n + j)] += a[(i, j)];
        }
    }
    let (lambda_min, lambda_max) =
        spectral_bounds(&h).expect("H is symmetric by construction");
    let neighbours = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&s| s != i && a[(i, s)] != 0.0)
                .map(|s| (s, a[(i, s)]))
                .collect()
        })
        .collect();
    AugmentedMatrix {
        n,
        h,
        lambda_min,
        lambda_max,
        neighbours,
        weights: a.clone(),
    }
}

/// Extreme eigenvalues of a symmetric matrix.
pub fn spectral_bounds(m: &DMatrix<f64>) -> Result<(f64, f64), NetworkError> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(NetworkError::Invalid("spectral bounds need a nonempty square matrix".into()));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(NetworkError::NotSymmetric(asym));
    }
    let (vals, _) = symmetric_eigen(m);
    Ok((vals[0], vals[vals.len() - 1]))
}
