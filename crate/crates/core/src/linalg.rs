//! Compressed sparse row matrices on a shared sparsity pattern and a
//! Jacobi-preconditioned conjugate gradient solver.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Row-compressed sparsity pattern with sorted column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Builds a pattern from per-row column sets (duplicates allowed).
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            debug_assert!(row.iter().all(|&c| c < dim));
            col_idx.extend(row);
            row_ptr.push(col_idx.len());
        }
        SparsityPattern { dim, row_ptr, col_idx }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Storage offset of entry (i, j), if it is in the pattern.
    pub fn offset(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }
}

/// Square CSR matrix. Matrices sharing one `Arc<SparsityPattern>` can be
/// combined entrywise without reallocating the structure.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Adds `v` to entry (i, j). Panics if (i, j) is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.pattern.offset(i, j).expect("entry outside sparsity pattern");
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.offset(i, j).map_or(0.0, |k| self.values[k])
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &*self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (p.row_ptr[i], p.row_ptr[i + 1]);
            *yi = p.col_idx[s..e].iter().zip(&self.values[s..e]).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// xᵀ A y.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// Σ cᵢ Aᵢ over matrices sharing a pattern.
    ///
    /// Panics if the list is empty or the patterns differ.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        let (_, first) = terms.first().expect("empty linear combination");
        let mut values = vec![0.0; first.values.len()];
        for &(c, a) in terms {
            assert!(
                Arc::ptr_eq(&a.pattern, &first.pattern) || a.pattern == first.pattern,
                "linear combination of matrices with different patterns"
            );
            for (v, &w) in values.iter_mut().zip(&a.values) {
                *v += c * w;
            }
        }
        CsrMatrix { pattern: first.pattern.clone(), values }
    }

    /// Largest |A_ij − A_ji| over the pattern.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for (&j, &v) in self.pattern.row(i).iter().zip(&self.values[self.pattern.row_ptr[i]..]) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Dense row-major copy, for small-matrix checks.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            let s = self.pattern.row_ptr[i];
            for (k, &j) in self.pattern.row(i).iter().enumerate() {
                row[j] = self.values[s + k];
            }
        }
        d
    }
}

/// Symmetric linear operator usable by [`solve_spd`].
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        CsrMatrix::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y)
    }

    fn diagonal(&self) -> Vec<f64> {
        CsrMatrix::diagonal(self)
    }
}

/// Lazily evaluated Σ cᵢ Aᵢ.
pub struct MatrixSum<'a> {
    pub terms: Vec<(f64, &'a CsrMatrix)>,
}

impl LinearOperator for MatrixSum<'_> {
    fn dim(&self) -> usize {
        self.terms.first().map_or(0, |(_, a)| a.dim())
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut tmp = vec![0.0; y.len()];
        for &(c, a) in &self.terms {
            a.mul_vec_into(x, &mut tmp);
            axpy(c, &tmp, y);
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        for &(c, a) in &self.terms {
            axpy(c, &a.diagonal(), &mut d);
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual target ‖Ax − b‖ ≤ tol·‖b‖.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions { tol: 1e-10, max_iters: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final true residual norm ‖Ax − b‖.
    pub residual: f64,
}

/// Solves `A x = rhs` for symmetric positive definite `A` by conjugate
/// gradients with a diagonal preconditioner, starting from zero.
pub fn solve_spd(a: &dyn LinearOperator, rhs: &[f64], opts: CgOptions) -> Result<CgSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("cg tolerance must be positive, got {}", opts.tol)));
    }
    let n = a.dim();
    assert_eq!(rhs.len(), n, "rhs length does not match operator");
    let bnorm = norm(rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgSolution { x, iterations: 0, residual: 0.0 });
    }
    let target = opts.tol * bnorm;
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut r = rhs.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    // Restarts recompute the true residual so that the reported residual
    // never relies on the drifting recursive estimate.
    for _restart in 0..4 {
        precondition(&inv_diag, &r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        let mut rnorm = norm(&r);
        while rnorm > target {
            if iterations >= opts.max_iters {
                return Err(Error::CgNotConverged { iterations, residual: rnorm });
            }
            a.apply(&p, &mut ap);
            let curvature = dot(&p, &ap);
            if !(curvature > 0.0) {
                return Err(Error::NotPositiveDefinite { iteration: iterations, curvature });
            }
            let alpha = rz / curvature;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            precondition(&inv_diag, &r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, &zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
            rnorm = norm(&r);
            iterations += 1;
        }
        a.apply(&x, &mut ap);
        for ((ri, &bi), &axi) in r.iter_mut().zip(rhs).zip(&ap) {
            *ri = bi - axi;
        }
        let true_res = norm(&r);
        if true_res <= target {
            return Ok(CgSolution { x, iterations, residual: true_res });
        }
    }
    Err(Error::CgNotConverged { iterations, residual: norm(&r) })
}

fn precondition(inv_diag: &[f64], r: &[f64], z: &mut [f64]) {
    for ((zi, &ri), &di) in z.iter_mut().zip(r).zip(inv_diag) {
        *zi = ri * di;
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// y += a x
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, diag: f64, off: f64) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![i];
                if i > 0 {
                    r.push(i - 1);
                }
                if i + 1 < n {
                    r.push(i + 1);
                }
                r
            })
            .collect();
        let mut a = CsrMatrix::zeros(Arc::new(SparsityPattern::from_rows(rows)));
        for i in 0..n {
            a.add(i, i, diag);
            if i + 1 < n {
                a.add(i, i + 1, off);
                a.add(i + 1, i, off);
            }
        }
        a
    }

    #[test]
    fn scalar_system() {
        let mut a = CsrMatrix::zeros(Arc::new(SparsityPattern::from_rows(vec![vec![0]])));
        a.add(0, 0, 0.125);
        let sol = solve_spd(&a, &[1.0], CgOptions::default()).unwrap();
        assert!((sol.x[0] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = tridiag(5, 2.0, -1.0);
        let sol = solve_spd(&a, &[0.0; 5], CgOptions::default()).unwrap();
        assert_eq!(sol.x, vec![0.0; 5]);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn residual_meets_tolerance() {
        let a = tridiag(200, 2.0, -1.0);
        let rhs: Vec<f64> = (0..200).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let opts = CgOptions { tol: 1e-10, max_iters: 10_000 };
        let sol = solve_spd(&a, &rhs, opts).unwrap();
        let mut r = a.mul_vec(&sol.x);
        axpy(-1.0, &rhs, &mut r);
        assert!(norm(&r) <= 1e-10 * norm(&rhs));
        assert!((norm(&r) - sol.residual).abs() < 1e-14);
    }

    #[test]
    fn indefinite_operator_is_detected() {
        let a = tridiag(4, -2.0, 0.5);
        let err = solve_spd(&a, &[1.0, 0.0, 0.0, 1.0], CgOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn iteration_cap_reports_last_residual() {
        let a = tridiag(100, 2.0, -1.0);
        let rhs = vec![1.0; 100];
        let err = solve_spd(&a, &rhs, CgOptions { tol: 1e-12, max_iters: 3 }).unwrap_err();
        match err {
            Error::CgNotConverged { iterations, residual } => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matrix_sum_matches_assembled_combination() {
        let a = tridiag(10, 2.0, -1.0);
        let mut b = CsrMatrix::zeros(a.pattern().clone());
        for i in 0..10 {
            b.add(i, i, 1.0 + i as f64);
        }
        let combo = CsrMatrix::linear_combination(&[(1.0, &b), (0.25, &a)]);
        let lazy = MatrixSum { terms: vec![(1.0, &b), (0.25, &a)] };
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        let mut y = vec![0.0; 10];
        lazy.apply(&x, &mut y);
        let y2 = combo.mul_vec(&x);
        for (u, v) in y.iter().zip(&y2) {
            assert!((u - v).abs() < 1e-14);
        }
        assert_eq!(lazy.diagonal(), combo.diagonal());
        let s1 = solve_spd(&lazy, &x, CgOptions::default()).unwrap();
        let s2 = solve_spd(&combo, &x, CgOptions::default()).unwrap();
        for (u, v) in s1.x.iter().zip(&s2.x) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}
