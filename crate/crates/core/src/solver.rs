//! Sparse SPD linear algebra: preconditioned conjugate gradients, diagonal
//! scaling, an envelope Cholesky factorization, and 2-norm condition number
//! estimation via Lanczos with full reorthogonalization.

use crate::error::{Error, Result};
use crate::fem::SparseSpdMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Extremal eigenvalues and the 2-norm condition number of an SPD matrix.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub kappa: f64,
    pub scaled: bool,
    /// Lanczos iterations used for (lambda_max, lambda_min).
    pub iterations_used: [usize; 2],
}

/// Jacobi-preconditioned conjugate gradients. Stops when the true residual
/// satisfies `||Ax - b|| <= rel_tol ||b||`.
pub fn cg_solve(
    a: &SparseSpdMatrix,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    cg_solve_with_stats(a, b, rel_tol, max_iter).map(|(x, _)| x)
}

/// As [`cg_solve`], additionally returning the iteration count.
pub fn cg_solve_with_stats(
    a: &SparseSpdMatrix,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    assert!(rel_tol > 0.0 && rel_tol < 1.0);
    let n = a.n;
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for iter in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::FactorizationFailure);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= rel_tol * bnorm {
            return Ok((x, iter));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDivergence { max_iter, residual: norm2(&r) / bnorm })
}

/// Symmetric diagonal scaling `S = D^{-1/2} A D^{-1/2}` with `D = diag(A)`.
pub fn diagonal_scale(a: &SparseSpdMatrix) -> Result<SparseSpdMatrix> {
    let diag = a.diagonal();
    for (i, &d) in diag.iter().enumerate() {
        if d <= 0.0 {
            return Err(Error::NonpositiveDiagonal { index: i, value: d });
        }
    }
    let inv_sqrt: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut out = a.clone();
    for i in 0..a.n {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            out.values[k] = a.values[k] * inv_sqrt[i] * inv_sqrt[a.col_idx[k]];
        }
    }
    Ok(out)
}

/// Reverse Cuthill-McKee ordering for envelope reduction.
fn rcm_ordering(a: &SparseSpdMatrix) -> Vec<usize> {
    let n = a.n;
    let degree = |i: usize| a.row_ptr[i + 1] - a.row_ptr[i];
    let bfs = |start: usize| -> Vec<usize> {
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        // cover disconnected components too
        let push_start = |s: usize, seen: &mut Vec<bool>, q: &mut std::collections::VecDeque<usize>| {
            if !seen[s] {
                seen[s] = true;
                q.push_back(s);
            }
        };
        push_start(start, &mut seen, &mut queue);
        let mut next_unseen = 0usize;
        loop {
            while let Some(i) = queue.pop_front() {
                order.push(i);
                let mut nbrs: Vec<usize> = (a.row_ptr[i]..a.row_ptr[i + 1])
                    .map(|k| a.col_idx[k])
                    .filter(|&j| j != i && !seen[j])
                    .collect();
                nbrs.sort_unstable_by_key(|&j| (degree(j), j));
                for j in nbrs {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            while next_unseen < n && seen[next_unseen] {
                next_unseen += 1;
            }
            if next_unseen == n {
                break;
            }
            push_start(next_unseen, &mut seen, &mut queue);
        }
        order
    };
    if n == 0 {
        return Vec::new();
    }
    // pseudo-peripheral start: two BFS sweeps from a minimum-degree vertex
    let start = (0..n).min_by_key(|&i| (degree(i), i)).unwrap();
    let far = *bfs(start).last().unwrap();
    let mut order = bfs(far);
    order.reverse();
    order
}

/// Envelope (skyline) Cholesky factorization with RCM reordering.
pub struct SparseCholesky {
    n: usize,
    /// perm[k] = original index of permuted row k
    perm: Vec<usize>,
    first: Vec<usize>,
    /// row k of L stored densely over columns first[k]..=k
    rows: Vec<Vec<f64>>,
}

impl SparseCholesky {
    pub fn factor(a: &SparseSpdMatrix) -> Result<SparseCholesky> {
        let n = a.n;
        let perm = rcm_ordering(a);
        let mut inv_perm = vec![0usize; n];
        for (k, &i) in perm.iter().enumerate() {
            inv_perm[i] = k;
        }
        // envelope of the permuted lower triangle
        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            let pi = inv_perm[i];
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let pj = inv_perm[a.col_idx[k]];
                if pj < pi {
                    first[pi] = first[pi].min(pj);
                }
            }
        }
        let mut rows: Vec<Vec<f64>> = (0..n).map(|k| vec![0.0; k - first[k] + 1]).collect();
        for i in 0..n {
            let pi = inv_perm[i];
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let pj = inv_perm[a.col_idx[k]];
                if pj <= pi {
                    rows[pi][pj - first[pi]] = a.values[k];
                }
            }
        }
        // row-wise factorization; fill stays within the envelope
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = rows[i][j - fi];
                for k in lo..j {
                    s -= rows[i][k - fi] * rows[j][k - fj];
                }
                rows[i][j - fi] = s / rows[j][j - fj];
            }
            let mut d = rows[i][i - fi];
            for k in fi..i {
                d -= rows[i][k - fi] * rows[i][k - fi];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::FactorizationFailure);
            }
            rows[i][i - fi] = d.sqrt();
        }
        Ok(SparseCholesky { n, perm, first, rows })
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let fi = self.first[i];
            let mut s = b[self.perm[i]];
            for k in fi..i {
                s -= self.rows[i][k - fi] * y[k];
            }
            y[i] = s / self.rows[i][i - fi];
        }
        // back substitution with L^T
        for i in (0..n).rev() {
            let fi = self.first[i];
            y[i] /= self.rows[i][i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.rows[i][k - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }
}

/// Count of eigenvalues of the symmetric tridiagonal (alpha, beta) below x
/// (Sturm sequence).
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0f64;
    for i in 0..alpha.len() {
        let b2 = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
        d = alpha[i] - x - b2 / d;
        if d == 0.0 {
            d = -1e-300;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue of the symmetric tridiagonal (alpha, beta) by Sturm
/// bisection.
fn tridiag_max_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let bl = if i == 0 { 0.0 } else { beta[i - 1].abs() };
        let br = if i + 1 == m { 0.0 } else { beta[i].abs() };
        lo = lo.min(alpha[i] - bl - br);
        hi = hi.max(alpha[i] + bl + br);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(alpha, beta, mid) < m {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Lanczos with full reorthogonalization for the largest eigenvalue of a
/// symmetric positive (semi)definite operator.
fn lanczos_max_eig<F>(
    n: usize,
    apply: F,
    rel_tol: f64,
    max_iter: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, usize)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if n == 1 {
        let e = apply(&[1.0])?;
        return Ok((e[0], 1));
    }
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut basis = vec![v.clone()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut theta_old = f64::NAN;
    let cap = max_iter.min(n);
    for iter in 1..=cap {
        let mut w = apply(basis.last().unwrap())?;
        let a = dot(basis.last().unwrap(), &w);
        alpha.push(a);
        // full reorthogonalization, twice for stability
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                for i in 0..n {
                    w[i] -= c * q[i];
                }
            }
        }
        let theta = tridiag_max_eigenvalue(&alpha, &beta);
        if iter > 2 && (theta - theta_old).abs() <= rel_tol * theta.abs().max(1e-300) {
            return Ok((theta, iter));
        }
        theta_old = theta;
        let b = norm2(&w);
        if b <= 1e-14 * a.abs().max(1.0) || iter == cap {
            return Ok((theta, iter));
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(w);
    }
    Ok((theta_old, cap))
}

/// Exact (to `rel_tol` relative accuracy) extremal eigenvalues and 2-norm
/// condition number: lambda_max by Lanczos on A, lambda_min by Lanczos on
/// A^{-1} through an envelope Cholesky factorization. Start vectors are
/// seeded so reports are reproducible.
pub fn condition_number(a: &SparseSpdMatrix, rel_tol: f64, seed: u64) -> Result<ConditionReport> {
    assert!(rel_tol <= 1e-6, "rel_tol must be <= 1e-6");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // tighter inner tolerance so the ratio meets rel_tol
    let tol = rel_tol * 0.01;
    let (lambda_max, it_max) = lanczos_max_eig(
        a.n,
        |v| {
            let mut y = vec![0.0; a.n];
            a.matvec(v, &mut y);
            Ok(y)
        },
        tol,
        300,
        &mut rng,
    )?;
    let chol = SparseCholesky::factor(a)?;
    let (inv_max, it_min) = lanczos_max_eig(a.n, |v| Ok(chol.solve(v)), tol, 300, &mut rng)?;
    let lambda_min = 1.0 / inv_max;
    Ok(ConditionReport {
        lambda_max,
        lambda_min,
        kappa: lambda_max / lambda_min,
        scaled: false,
        iterations_used: [it_max, it_min],
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn identity(n: usize) -> SparseSpdMatrix {
        SparseSpdMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    fn dense_to_sparse(d: &[Vec<f64>]) -> SparseSpdMatrix {
        let n = d.len();
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if d[i][j] != 0.0 {
                    t.push((i, j, d[i][j]));
                }
            }
        }
        SparseSpdMatrix::from_triplets(n, t)
    }

    fn tridiag_laplacian(n: usize) -> SparseSpdMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseSpdMatrix::from_triplets(n, t)
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> SparseSpdMatrix {
        // A^T A + I construction
        let b: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    s += b[k][i] * b[k][j];
                }
                d[i][j] = s;
            }
        }
        dense_to_sparse(&d)
    }

    #[test]
    fn cg_on_identity_converges_in_one_iteration() {
        let a = identity(5);
        let b = vec![3.0, -1.0, 2.0, 0.5, 4.0];
        let (x, iters) = cg_solve_with_stats(&a, &b, 1e-12, 10).unwrap();
        assert_eq!(iters, 1);
        for (xi, bi) in x.iter().zip(&b) {
            assert_relative_eq!(xi, bi, epsilon = 1e-12);
        }
    }

    #[test]
    fn cg_small_hand_solve() {
        let a = dense_to_sparse(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let x = cg_solve(&a, &[3.0, 3.0], 1e-12, 10).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn cg_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(50, &mut rng);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = cg_solve(&a, &b, 1e-12, 1000).unwrap();
        let ad = nalgebra::DMatrix::from_fn(50, 50, |i, j| a.get(i, j));
        let bd = nalgebra::DVector::from_column_slice(&b);
        let xd = ad.lu().solve(&bd).unwrap();
        let err: f64 = x
            .iter()
            .zip(xd.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-8, "err {err}");
    }

    #[test]
    fn cg_divergence_error() {
        let a = tridiag_laplacian(100);
        let b = vec![1.0; 100];
        assert!(matches!(
            cg_solve(&a, &b, 1e-12, 3),
            Err(Error::SolverDivergence { .. })
        ));
    }

    #[test]
    fn diagonal_scale_of_diagonal_matrix() {
        let a = dense_to_sparse(&[vec![4.0, 0.0], vec![0.0, 9.0]]);
        let s = diagonal_scale(&a).unwrap();
        assert_relative_eq!(s.get(0, 0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.get(1, 1), 1.0, epsilon = 1e-14);
        assert_eq!(s.get(0, 1), 0.0);
    }

    #[test]
    fn diagonal_scale_hand_example() {
        let a = dense_to_sparse(&[vec![4.0, 2.0], vec![2.0, 4.0]]);
        let s = diagonal_scale(&a).unwrap();
        assert_relative_eq!(s.get(0, 0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.get(0, 1), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_scale_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_spd(20, &mut rng);
        let s1 = diagonal_scale(&a).unwrap();
        let s2 = diagonal_scale(&s1).unwrap();
        for k in 0..s1.values.len() {
            assert_relative_eq!(s1.values[k], s2.values[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn diagonal_scale_rejects_nonpositive_diagonal() {
        let a = dense_to_sparse(&[vec![0.0, 1.0], vec![1.0, 2.0]]);
        assert!(matches!(
            diagonal_scale(&a),
            Err(Error::NonpositiveDiagonal { index: 0, .. })
        ));
    }

    #[test]
    fn cholesky_solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_spd(40, &mut rng);
        let chol = SparseCholesky::factor(&a).unwrap();
        let b: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = chol.solve(&b);
        let mut r = vec![0.0; 40];
        a.matvec(&x, &mut r);
        for i in 0..40 {
            assert_relative_eq!(r[i], b[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = dense_to_sparse(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            SparseCholesky::factor(&a),
            Err(Error::FactorizationFailure)
        ));
    }

    #[test]
    fn condition_number_of_identity() {
        let r = condition_number(&identity(10), 1e-8, 42).unwrap();
        assert_relative_eq!(r.kappa, 1.0, max_relative = 1e-7);
    }

    #[test]
    fn condition_number_of_diagonal() {
        let a = dense_to_sparse(&[vec![1.0, 0.0], vec![0.0, 4.0]]);
        let r = condition_number(&a, 1e-8, 42).unwrap();
        assert_relative_eq!(r.kappa, 4.0, max_relative = 1e-7);
    }

    #[test]
    fn condition_number_of_1d_laplacian() {
        // eigenvalues are 4 sin^2(k pi / 22), k = 1..10
        let a = tridiag_laplacian(10);
        let r = condition_number(&a, 1e-8, 42).unwrap();
        let s = |k: f64| (k * std::f64::consts::PI / 22.0).sin().powi(2);
        let exact = s(10.0) / s(1.0);
        assert_relative_eq!(r.kappa, exact, max_relative = 1e-6);
        assert!(r.lambda_min > 0.0 && r.kappa >= 1.0);
    }

    #[test]
    fn condition_number_matches_dense_eigensolve() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [20usize, 60, 120] {
            let a = random_spd(n, &mut rng);
            let r = condition_number(&a, 1e-7, 1).unwrap();
            let ad = nalgebra::DMatrix::from_fn(n, n, |i, j| a.get(i, j));
            let eig = ad.symmetric_eigen().eigenvalues;
            let max = eig.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.iter().cloned().fold(f64::MAX, f64::min);
            assert_relative_eq!(r.kappa, max / min, max_relative = 1e-5);
        }
    }

    #[test]
    fn cg_iterations_grow_with_sqrt_kappa() {
        // monotonicity regression on the 1D Laplacian family
        let mut last = 0usize;
        for n in [16usize, 64, 256] {
            let a = tridiag_laplacian(n);
            let b = vec![1.0; n];
            let (_, iters) = cg_solve_with_stats(&a, &b, 1e-10, 10_000).unwrap();
            assert!(iters >= last, "iters {iters} at n={n}");
            last = iters;
        }
    }
}
