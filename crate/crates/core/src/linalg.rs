//! Dense symmetric eigensolver (cyclic Jacobi).
//!
//! The matrices in this crate are at most `n^2 x n^2` with `n <= 8`, so the
//! `O(N^3)` per-sweep cost is irrelevant and the method is deterministic.

use nalgebra::DMatrix;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in ascending order and the matching eigenvectors as columns.
///
/// Only the upper triangle is trusted; the input should be symmetric.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    let mut a = a.clone();
    for i in 0..n {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.iter().map(|x| x * x).sum::<f64>();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_identity() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let (vals, _) = symmetric_eigen(&d);
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        let (vals, _) = symmetric_eigen(&DMatrix::identity(5, 5));
        assert!(vals.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn eigenpairs_reconstruct() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, -2.0, 1.0, 2.0, 0.5, -2.0, 0.5, 3.0]);
        let (vals, vecs) = symmetric_eigen(&a);
        for (k, lambda) in vals.iter().enumerate() {
            let v = vecs.column(k);
            let r = &a * v - v * *lambda;
            assert!(r.norm() < 1e-12);
        }
        let orth = vecs.transpose() * &vecs;
        assert!((orth - DMatrix::identity(3, 3)).norm() < 1e-12);
    }
}
