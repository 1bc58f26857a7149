//! Reference computations that share no code with the solver.
//!
//! L-shape eigenvalues: the 5-point Laplacian on uniform grids, its lowest
//! eigenvalues by block inverse iteration with a banded Cholesky factor, and
//! extrapolation in h over three grids.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};

/// Lower band of an SPD matrix; `band[i][d]` holds entry (i, i − d).
pub struct Banded {
    pub n: usize,
    pub bw: usize,
    pub band: Vec<Vec<f64>>,
}

impl Banded {
    pub fn cholesky(mut self) -> Banded {
        for i in 0..self.n {
            for d in (1..=self.bw.min(i)).rev() {
                let j = i - d;
                // L[i][j] = (A[i][j] − Σ_k L[i][k] L[j][k]) / L[j][j]
                let mut s = self.band[i][d];
                let lo = i.saturating_sub(self.bw);
                for k in lo..j {
                    s -= self.band[i][i - k] * self.band[j][j - k];
                }
                self.band[i][d] = s / self.band[j][0];
            }
            let lo = i.saturating_sub(self.bw);
            let mut s = self.band[i][0];
            for k in lo..i {
                s -= self.band[i][i - k].powi(2);
            }
            assert!(s > 0.0);
            self.band[i][0] = s.sqrt();
        }
        self
    }

    pub fn solve(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let mut s = b[i];
            for k in lo..i {
                s -= self.band[i][i - k] * b[k];
            }
            b[i] = s / self.band[i][0];
        }
        for i in (0..self.n).rev() {
            b[i] /= self.band[i][0];
            let lo = i.saturating_sub(self.bw);
            let bi = b[i];
            for k in lo..i {
                b[k] -= self.band[i][i - k] * bi;
            }
        }
    }
}

/// 5-point Laplacian on (0,2)² ∖ [1,2]×[0,1] with `n` cells per unit
/// length, as (banded matrix, index of each interior grid point).
pub fn lshape_laplacian(n: usize) -> (Vec<Vec<(usize, f64)>>, usize, usize) {
    let m = 2 * n;
    let inside = |i: usize, j: usize| i > 0 && j > 0 && i < m && j < m && !(i >= n && j <= n);
    let mut index = vec![usize::MAX; (m + 1) * (m + 1)];
    let mut count = 0;
    for j in 0..=m {
        for i in 0..=m {
            if inside(i, j) {
                index[j * (m + 1) + i] = count;
                count += 1;
            }
        }
    }
    let h2 = 1.0 / (n * n) as f64;
    let mut rows = vec![Vec::new(); count];
    let mut bw = 0;
    for j in 0..=m {
        for i in 0..=m {
            if !inside(i, j) {
                continue;
            }
            let r = index[j * (m + 1) + i];
            rows[r].push((r, 4.0 / h2));
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (a, b) = ((i as i64 + di) as usize, (j as i64 + dj) as usize);
                if inside(a, b) {
                    let c = index[b * (m + 1) + a];
                    rows[r].push((c, -1.0 / h2));
                    bw = bw.max(r.abs_diff(c));
                }
            }
        }
    }
    (rows, count, bw)
}

/// Lowest `k` eigenvalues of the grid Laplacian.
pub fn lowest_eigenvalues(n: usize, k: usize) -> Vec<f64> {
    let (rows, dim, bw) = lshape_laplacian(n);
    let mut band = vec![vec![0.0; bw + 1]; dim];
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            if c <= r {
                band[r][r - c] = v;
            }
        }
    }
    let chol = Banded { n: dim, bw, band }.cholesky();
    let apply = |x: &[f64]| -> Vec<f64> {
        rows.iter().map(|row| row.iter().map(|&(c, v)| v * x[c]).sum()).collect()
    };

    let block = 2 * k + 2;
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut q: Vec<Vec<f64>> = (0..block)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect()
        })
        .collect();
    let mut previous = vec![f64::INFINITY; k];
    for _ in 0..500 {
        for v in q.iter_mut() {
            chol.solve(v);
        }
        // orthonormalize, then Rayleigh-Ritz
        for i in 0..block {
            for _ in 0..2 {
                for j in 0..i {
                    let c: f64 = q[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
                    let qj = q[j].clone();
                    q[i].iter_mut().zip(&qj).for_each(|(a, b)| *a -= c * b);
                }
            }
            let nrm = q[i].iter().map(|a| a * a).sum::<f64>().sqrt();
            q[i].iter_mut().for_each(|a| *a /= nrm);
        }
        let aq: Vec<Vec<f64>> = q.iter().map(|v| apply(v)).collect();
        let small = DMatrix::from_fn(block, block, |i, j| q[i].iter().zip(&aq[j]).map(|(a, b)| a * b).sum());
        let small = (&small + small.transpose()) * 0.5;
        let eig = SymmetricEigen::new(small);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        q = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; dim];
                for (i, qi) in q.iter().enumerate() {
                    let w = eig.eigenvectors[(i, c)];
                    v.iter_mut().zip(qi).for_each(|(a, b)| *a += w * b);
                }
                v
            })
            .collect();
        let values: Vec<f64> = order.iter().take(k).map(|&c| eig.eigenvalues[c]).collect();
        let done = values.iter().zip(&previous).all(|(a, b)| (a - b).abs() <= 1e-13 * a);
        previous = values;
        if done {
            break;
        }
    }
    previous
}

/// λ from λ_h = λ + a h^{4/3} + b h² at h, h/2, h/4.
pub fn extrapolate(values: [f64; 3], h: f64) -> f64 {
    let hs = [h, h / 2.0, h / 4.0];
    let m = DMatrix::from_fn(3, 3, |i, j| match j {
        0 => 1.0,
        1 => hs[i].powf(4.0 / 3.0),
        _ => hs[i].powi(2),
    });
    let rhs = nalgebra::DVector::from_column_slice(&values);
    m.lu().solve(&rhs).expect("nonsingular")[0]
}

/// Oracle values of the four lowest L-shape eigenvalues from grids with
/// 32, 64 and 128 cells per unit length.
pub fn lshape_oracle_eigenvalues() -> Vec<f64> {
    let levels: Vec<Vec<f64>> = [32, 64, 128].iter().map(|&n| lowest_eigenvalues(n, 4)).collect();
    (0..4)
        .map(|k| extrapolate([levels[0][k], levels[1][k], levels[2][k]], 1.0 / 32.0))
        .collect()
}

/// Generalized eigenvalues of the pencil (A, M), ascending, by a dense
/// Cholesky reduction to a standard symmetric problem.
pub fn dense_generalized_eigenvalues(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Vec<f64> {
    let l = m.clone().cholesky().expect("M is SPD").l();
    let linv = l.clone().try_inverse().expect("invertible");
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
