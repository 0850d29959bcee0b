//! Small dense singular value decomposition used by the projection module.
//!
//! One-sided Jacobi: rotate column pairs until all columns are mutually
//! orthogonal; the column norms are then the singular values, the
//! normalized columns the left singular vectors, and the accumulated
//! rotations the right singular vectors. Slower than bidiagonalization for
//! big matrices but simple, deterministic, accurate at small singular
//! values, and well-behaved on rank-deficient input — which the centered
//! matrices here always are (centered rows sum to zero).

/// Thin SVD of an m×n matrix: A = U · diag(sigma) · Vᵀ with r = min(m, n)
/// columns retained and singular values sorted in descending order.
#[derive(Debug, Clone)]
pub(crate) struct ThinSvd {
    /// Left singular vectors as columns (each of length m). Columns whose
    /// singular value is exactly zero are zero vectors, not arbitrary
    /// orthonormal fill — callers skip them via the singular value.
    pub u: Vec<Vec<f64>>,
    /// Singular values, descending, length r.
    pub sigma: Vec<f64>,
    /// Right singular vectors as columns (each of length n).
    pub v: Vec<Vec<f64>>,
}

/// Computes the thin SVD of `rows` (a matrix given as m rows of length n).
#[allow(clippy::needless_range_loop)] // index loops mirror the matrix algebra
pub(crate) fn thin_svd(rows: &[Vec<f64>]) -> ThinSvd {
    let m = rows.len();
    let n = if m == 0 { 0 } else { rows[0].len() };
    if m < n {
        // Jacobi wants at least as many rows as columns; decompose the
        // transpose and swap the roles of U and V.
        let transposed: Vec<Vec<f64>> =
            (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let svd = thin_svd(&transposed);
        return ThinSvd { u: svd.v, sigma: svd.sigma, v: svd.u };
    }

    // Work on columns of A; V accumulates the plane rotations.
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    const MAX_SWEEPS: usize = 60;
    const ORTHO_TOL: f64 = 1e-15;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = a[p].iter().map(|x| x * x).sum();
                let beta: f64 = a[q].iter().map(|x| x * x).sum();
                let gamma: f64 = a[p].iter().zip(&a[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    1.0 / (zeta - (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let ap = a[p][i];
                    let aq = a[q][i];
                    a[p][i] = c * ap - s * aq;
                    a[q][i] = s * ap + c * aq;
                }
                for i in 0..n {
                    let vp = v[p][i];
                    let vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = a.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).expect("norms are finite"));

    let mut u = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut v_sorted = Vec::with_capacity(n);
    for &j in &order {
        let norm = norms[j];
        sigma.push(norm);
        if norm > 0.0 {
            u.push(a[j].iter().map(|x| x / norm).collect());
        } else {
            u.push(vec![0.0; m]);
        }
        v_sorted.push(v[j].clone());
    }
    ThinSvd { u, sigma, v: v_sorted }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // checks are written as naive index loops
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn reconstruction_error(rows: &[Vec<f64>], svd: &ThinSvd) -> f64 {
        let m = rows.len();
        let n = rows[0].len();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..n {
                let rebuilt: f64 = svd
                    .sigma
                    .iter()
                    .enumerate()
                    .map(|(c, s)| s * svd.u[c][i] * svd.v[c][j])
                    .sum();
                worst = worst.max((rows[i][j] - rebuilt).abs());
            }
        }
        worst
    }

    fn orthonormality_error(cols: &[Vec<f64>], sigma: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in cols.iter().enumerate() {
            for (j, b) in cols.iter().enumerate() {
                if sigma[i] == 0.0 || sigma[j] == 0.0 {
                    continue;
                }
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - expected).abs());
            }
        }
        worst
    }

    #[test]
    fn diagonal_matrix() {
        let rows = vec![vec![3.0, 0.0], vec![0.0, 2.0], vec![0.0, 0.0]];
        let svd = thin_svd(&rows);
        assert_eq!(svd.sigma, vec![3.0, 2.0]);
        assert!(reconstruction_error(&rows, &svd) < 1e-15);
    }

    #[test]
    fn zero_matrix() {
        let rows = vec![vec![0.0; 4]; 2];
        let svd = thin_svd(&rows);
        assert_eq!(svd.sigma, vec![0.0, 0.0]);
    }

    #[test]
    fn single_column() {
        let rows = vec![vec![3.0], vec![4.0]];
        let svd = thin_svd(&rows);
        assert_eq!(svd.sigma, vec![5.0]);
        assert!((svd.u[0][0] - 0.6).abs() < 1e-15);
        assert!((svd.u[0][1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn random_centered_matrices_reconstruct() {
        // Centered random matrices are exactly rank deficient — the shape
        // that trips less careful SVD implementations.
        let mut rng = StdRng::seed_from_u64(31);
        for case in 0..200 {
            let m = rng.random_range(2..8usize);
            let n = rng.random_range(1..16usize);
            let mut rows: Vec<Vec<f64>> =
                (0..m).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
            for j in 0..n {
                let mean = rows.iter().map(|r| r[j]).sum::<f64>() / m as f64;
                for row in &mut rows {
                    row[j] -= mean;
                }
            }
            let svd = thin_svd(&rows);
            let scale: f64 = rows
                .iter()
                .flatten()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
                .max(1.0);
            assert!(
                reconstruction_error(&rows, &svd) <= 1e-12 * scale,
                "case {case} ({m}x{n}): reconstruction error too large"
            );
            assert!(orthonormality_error(&svd.u, &svd.sigma) <= 1e-13, "case {case}: U");
            assert!(orthonormality_error(&svd.v, &svd.sigma) <= 1e-13, "case {case}: V");
            for pair in svd.sigma.windows(2) {
                assert!(pair[0] >= pair[1]);
            }
            // Frobenius identity: sum of squared singular values equals the
            // squared Frobenius norm.
            let fro2: f64 = rows.iter().flatten().map(|x| x * x).sum();
            let sig2: f64 = svd.sigma.iter().map(|s| s * s).sum();
            assert!((fro2 - sig2).abs() <= 1e-12 * fro2.max(1.0), "case {case}: Frobenius");
        }
    }
}
