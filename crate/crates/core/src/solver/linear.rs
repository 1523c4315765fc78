//! Sparse linear algebra for the Newton correction: a CSR matrix, an ILU(0)
//! factorization and restarted GMRES with right preconditioning.

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, duplicate-free columns.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a square matrix from per-row `(column, value)` lists.
    /// Entries sharing a column are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                debug_assert!(c < n);
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(p) => self.vals[span.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag = vec![usize::MAX; n];
        for (i, d) in diag.iter_mut().enumerate() {
            for p in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.cols[p] == i {
                    *d = p;
                }
            }
            if *d == usize::MAX {
                return Err(Error::Precondition(format!("row {i} has no diagonal entry")));
            }
        }
        // Column position lookup for the current row.
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let span = lu.row_ptr[i]..lu.row_ptr[i + 1];
            for p in span.clone() {
                pos[lu.cols[p]] = p;
            }
            for p in span.clone() {
                let k = lu.cols[p];
                if k >= i {
                    break;
                }
                let pivot = lu.vals[diag[k]];
                let factor = lu.vals[p] / pivot;
                lu.vals[p] = factor;
                for q in (diag[k] + 1)..lu.row_ptr[k + 1] {
                    let j = lu.cols[q];
                    let target = pos[j];
                    if target != usize::MAX {
                        lu.vals[target] -= factor * lu.vals[q];
                    }
                }
            }
            for p in span {
                pos[lu.cols[p]] = usize::MAX;
            }
            let d = lu.vals[diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Precondition(format!("zero pivot in row {i}")));
            }
        }
        Ok(Self { lu, diag })
    }

    /// Solves `L U x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = x[i];
            for p in lu.row_ptr[i]..self.diag[i] {
                s -= lu.vals[p] * x[lu.cols[p]];
            }
            x[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = x[i];
            for p in (self.diag[i] + 1)..lu.row_ptr[i + 1] {
                s -= lu.vals[p] * x[lu.cols[p]];
            }
            x[i] = s / lu.vals[self.diag[i]];
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearStats {
    pub iterations: usize,
    /// `|b - A x| / |b|` recomputed from the returned iterate.
    pub relative_residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Restarted GMRES with ILU(0) right preconditioning, starting from zero.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    rel_tol: f64,
    restart: usize,
    max_iters: usize,
) -> Result<(Vec<f64>, LinearStats)> {
    let n = a.dim();
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((x, LinearStats { iterations: 0, relative_residual: 0.0 }));
    }
    let ilu = Ilu0::new(a)?;
    let restart = restart.max(1);
    let mut total = 0;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    loop {
        a.mul_vec(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm(&r);
        if beta <= rel_tol * b_norm {
            return Ok((x, LinearStats { iterations: total, relative_residual: beta / b_norm }));
        }
        if total >= max_iters {
            return Err(Error::NoConvergence {
                reason: "linear solver stalled".into(),
                iterations: total,
                residual: beta / b_norm,
            });
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..restart {
            let mut z = basis[j].clone();
            ilu.solve_in_place(&mut z);
            a.mul_vec(&z, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let hn = norm(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = h[j][j].hypot(h[j + 1][j]);
            cs[j] = h[j][j] / d;
            sn[j] = h[j + 1][j] / d;
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            total += 1;
            if g[j + 1].abs() <= 0.5 * rel_tol * b_norm || hn == 0.0 || total >= max_iters {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // Back substitution for the Krylov coefficients.
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in (i + 1)..used {
                s -= h[i][k] * y[k];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            for (u, vk) in update.iter_mut().zip(v) {
                *u += yi * vk;
            }
        }
        ilu.solve_in_place(&mut update);
        for (xi, ui) in x.iter_mut().zip(&update) {
            *xi += ui;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn convection_diffusion(m: usize) -> CsrMatrix {
        // 2D upwind-free convection-diffusion, nonsymmetric.
        let idx = |i: usize, j: usize| i * m + j;
        let mut rows = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let mut row = vec![(idx(i, j), 4.0)];
                if i > 0 {
                    row.push((idx(i - 1, j), -1.3));
                }
                if i + 1 < m {
                    row.push((idx(i + 1, j), -0.7));
                }
                if j > 0 {
                    row.push((idx(i, j - 1), -1.0));
                }
                if j + 1 < m {
                    row.push((idx(i, j + 1), -1.0));
                }
                rows.push(row);
            }
        }
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_rows(vec![vec![(1, 2.0), (0, 1.0), (1, 3.0)], vec![(1, 1.0)]]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 5.0);
        assert_eq!(a.get(1, 0), 0.0);
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        let n = 20;
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 3.0)];
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.5));
                }
                r
            })
            .collect();
        let a = CsrMatrix::from_rows(rows);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&x_true, &mut b);
        Ilu0::new(&a).unwrap().solve_in_place(&mut b);
        for (x, y) in b.iter().zip(&x_true) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gmres_reaches_tolerance() {
        let a = convection_diffusion(30);
        let x_true: Vec<f64> = (0..a.dim()).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let mut b = vec![0.0; a.dim()];
        a.mul_vec(&x_true, &mut b);
        let (x, stats) = gmres(&a, &b, 1e-10, 30, 1000).unwrap();
        assert!(stats.relative_residual <= 1e-10);
        let err = x.iter().zip(&x_true).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn gmres_zero_rhs() {
        let a = convection_diffusion(4);
        let (x, stats) = gmres(&a, &[0.0; 16], 1e-10, 10, 10).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
        assert_eq!(stats.iterations, 0);
    }
}
