//! Preconditioned conjugate gradients.

use super::sparse::{dot, norm2, SparseSymMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-12;

enum Preconditioner {
    Jacobi(Vec<f64>),
    Ic0(Ic0),
}

/// Incomplete Cholesky factor with the sparsity of the lower triangle.
struct Ic0 {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// Row `i` stores L[i][j] for j < i followed by the diagonal.
    values: Vec<f64>,
}

impl Ic0 {
    fn new(a: &SparseSymMatrix) -> Ic0 {
        let n = a.dim();
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::new();
        let mut lower = Vec::new();
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    col_idx.push(j);
                    lower.push(v);
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        let mut shift = 0.0;
        loop {
            if let Some(values) = Self::factor(n, &row_ptr, &col_idx, &lower, shift) {
                return Ic0 {
                    row_ptr,
                    col_idx,
                    values,
                };
            }
            shift = if shift == 0.0 { 1e-3 } else { 2.0 * shift };
            log::debug!("incomplete Cholesky breakdown, diagonal shift {shift}");
        }
    }

    fn factor(n: usize, row_ptr: &[usize], col_idx: &[usize], a: &[f64], shift: f64) -> Option<Vec<f64>> {
        let mut l = a.to_vec();
        for i in 0..n {
            let (s, e) = (row_ptr[i], row_ptr[i + 1]);
            if e == s || col_idx[e - 1] != i {
                return None;
            }
            for p in s..e - 1 {
                let k = col_idx[p];
                // sparse dot of rows i and k over columns < k
                let (mut pi, mut pk) = (s, row_ptr[k]);
                let ek = row_ptr[k + 1] - 1;
                let mut acc = 0.0;
                while pi < p && pk < ek {
                    match col_idx[pi].cmp(&col_idx[pk]) {
                        std::cmp::Ordering::Less => pi += 1,
                        std::cmp::Ordering::Greater => pk += 1,
                        std::cmp::Ordering::Equal => {
                            acc += l[pi] * l[pk];
                            pi += 1;
                            pk += 1;
                        }
                    }
                }
                l[p] = (l[p] - acc) / l[ek];
            }
            let d = a[e - 1] * (1.0 + shift) - l[s..e - 1].iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            l[e - 1] = d.sqrt();
        }
        Some(l)
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        // L y = r
        for i in 0..n {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = r[i];
            for p in s..e - 1 {
                acc -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = acc / self.values[e - 1];
        }
        // Lᵀ z = y, column sweep
        for i in (0..n).rev() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            z[i] /= self.values[e - 1];
            let zi = z[i];
            for p in s..e - 1 {
                z[self.col_idx[p]] -= self.values[p] * zi;
            }
        }
    }
}

/// A matrix paired with a preconditioner, reusable across right-hand sides.
pub struct SpdSolver {
    a: SparseSymMatrix,
    pre: Preconditioner,
}

impl SpdSolver {
    /// Incomplete Cholesky preconditioning (diagonal shift on breakdown).
    pub fn ic0(a: SparseSymMatrix) -> Self {
        let pre = Preconditioner::Ic0(Ic0::new(&a));
        SpdSolver {
            a,
            pre,
        }
    }

    pub fn jacobi(a: SparseSymMatrix) -> Self {
        let inv = a
            .diagonal()
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        SpdSolver {
            a,
            pre: Preconditioner::Jacobi(inv),
        }
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.a
    }

    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        match &self.pre {
            Preconditioner::Jacobi(inv) => {
                for ((z, r), d) in z.iter_mut().zip(r).zip(inv) {
                    *z = r * d;
                }
            }
            Preconditioner::Ic0(f) => f.apply(r, z),
        }
    }

    /// Solves A x = b to `‖Ax − b‖₂ ≤ rel_tol ‖b‖₂`, optionally starting
    /// from `x0`.
    pub fn solve(&self, b: &[f64], x0: Option<&[f64]>, rel_tol: f64) -> Result<Vec<f64>> {
        let n = self.a.dim();
        if !(rel_tol > 0.0 && rel_tol <= 1e-6) {
            return Err(Error::InvalidArgument(format!("rel_tol {rel_tol} outside (0, 1e-6]")));
        }
        if b.len() != n || x0.is_some_and(|x| x.len() != n) {
            return Err(Error::InvalidArgument("right-hand side length mismatch".into()));
        }
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let target = rel_tol * bnorm;
        let cap = 20 * n.max(1);

        let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
        let mut r = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut q = vec![0.0; n];
        let residual = |x: &[f64], r: &mut [f64], q: &mut [f64]| {
            self.a.mul_vec_into(x, q);
            for i in 0..n {
                r[i] = b[i] - q[i];
            }
        };
        residual(&x, &mut r, &mut q);
        let mut best = norm2(&r);
        let mut stalls = 0;
        let mut it = 0;
        'restart: loop {
            self.precondition(&r, &mut z);
            let mut p = z.clone();
            let mut rz = dot(&r, &z);
            loop {
                if norm2(&r) <= target {
                    // confirm against the true residual
                    residual(&x, &mut r, &mut q);
                    let true_norm = norm2(&r);
                    if true_norm <= target {
                        return Ok(x);
                    }
                    if true_norm < 0.5 * best {
                        stalls = 0;
                    } else {
                        stalls += 1;
                    }
                    best = best.min(true_norm);
                    if stalls >= 3 {
                        return Err(Error::SolverFailure {
                            iterations: it,
                            residual: true_norm / bnorm,
                        });
                    }
                    continue 'restart;
                }
                if it >= cap {
                    residual(&x, &mut r, &mut q);
                    return Err(Error::SolverFailure {
                        iterations: it,
                        residual: norm2(&r) / bnorm,
                    });
                }
                it += 1;
                self.a.mul_vec_into(&p, &mut q);
                let pq = dot(&p, &q);
                if !(pq > 0.0) {
                    residual(&x, &mut r, &mut q);
                    return Err(Error::SolverFailure {
                        iterations: it,
                        residual: norm2(&r) / bnorm,
                    });
                }
                let alpha = rz / pq;
                for i in 0..n {
                    x[i] += alpha * p[i];
                    r[i] -= alpha * q[i];
                }
                self.precondition(&r, &mut z);
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                for i in 0..n {
                    p[i] = z[i] + beta * p[i];
                }
            }
        }
    }
}

/// Solves A x = b with incomplete Cholesky preconditioned CG.
pub fn solve_spd(a: &SparseSymMatrix, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    SpdSolver::ic0(a.clone()).solve(b, None, rel_tol)
}
