//! Discrete checks of the Codazzi and Gauss equations.
//!
//! Both work in graph coordinates with the induced metric
//! `g_ij = delta_ij + u_i u_j` and second fundamental form `h_ij = u_ij / w`.
//! Christoffel symbols come from centered differences of the nodal metric,
//! and the curvature tensor from centered second differences of it, so every
//! quantity at ring >= 2 is built from centered stencils only.

use rayon::prelude::*;

use super::{diff1, diff2, node_derivatives, GraphPatch, Grid, Region};

/// Residual maxima skip this many boundary rings.
pub const STRUCTURE_MIN_RING: usize = 2;

/// Nodal metric and second fundamental form, `n x n` row-major per node.
#[derive(Debug, Clone)]
pub struct MetricFields {
    pub grid: Grid,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl MetricFields {
    fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn g_at(&self, node: usize, i: usize, j: usize) -> f64 {
        let n = self.n();
        self.g[node * n * n + i * n + j]
    }

    pub fn h_at(&self, node: usize, i: usize, j: usize) -> f64 {
        let n = self.n();
        self.h[node * n * n + i * n + j]
    }

    /// Inverse metric `delta - Du Du^T / w^2` at a node.
    pub fn g_inv(&self, node: usize) -> Vec<f64> {
        let n = self.n();
        let m = nalgebra::DMatrix::from_row_slice(n, n, &self.g[node * n * n..(node + 1) * n * n]);
        let inv = m.try_inverse().expect("induced metric is positive definite");
        inv.transpose().as_slice().to_vec()
    }
}

pub fn metric_field(patch: &GraphPatch) -> MetricFields {
    let grid = *patch.grid();
    let n = grid.n();
    let per_node: Vec<(Vec<f64>, Vec<f64>)> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let (du, d2) = node_derivatives(&grid, patch.u(), node);
            let w = (1.0 + du.iter().map(|v| v * v).sum::<f64>()).sqrt();
            let mut g = vec![0.0; n * n];
            let mut h = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    g[i * n + j] = if i == j { 1.0 } else { 0.0 } + du[i] * du[j];
                    h[i * n + j] = d2[(i, j)] / w;
                }
            }
            (g, h)
        })
        .collect();
    let mut g = Vec::with_capacity(grid.len() * n * n);
    let mut h = Vec::with_capacity(grid.len() * n * n);
    for (a, b) in per_node {
        g.extend(a);
        h.extend(b);
    }
    MetricFields { grid, g, h }
}

/// Second fundamental form field only (`n x n` per node).
pub fn second_form_field(patch: &GraphPatch) -> Vec<f64> {
    metric_field(patch).h
}

/// `Gamma^m_{ij}` at `node` (ring >= 1), stored at `m n^2 + i n + j`.
pub fn christoffel(mf: &MetricFields, node: usize) -> Vec<f64> {
    let grid = &mf.grid;
    let n = grid.n();
    // dg[k][i][j] = d_k g_ij
    let mut dg = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let v = diff1(grid, |q| mf.g_at(q, i, j), node, k);
                dg[k * n * n + i * n + j] = v;
                dg[k * n * n + j * n + i] = v;
            }
        }
    }
    let ginv = mf.g_inv(node);
    let mut gamma = vec![0.0; n * n * n];
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    let lower = 0.5
                        * (dg[i * n * n + j * n + l] + dg[j * n * n + i * n + l]
                            - dg[l * n * n + i * n + j]);
                    s += ginv[m * n + l] * lower;
                }
                gamma[m * n * n + i * n + j] = s;
            }
        }
    }
    gamma
}

/// Max over ring >= 2 nodes and all index triples of `|h_{ij;k} - h_{ik;j}|`.
pub fn codazzi_residual(patch: &GraphPatch) -> f64 {
    codazzi_residual_in(patch, &Region::from_ring(STRUCTURE_MIN_RING))
}

/// As [`codazzi_residual`], restricted to `region`.
pub fn codazzi_residual_in(patch: &GraphPatch, region: &Region) -> f64 {
    let mf = metric_field(patch);
    mf.grid
        .nodes_in(region)
        .par_iter()
        .map(|&node| codazzi_at(&mf, node))
        .reduce(|| 0.0, f64::max)
}

fn codazzi_at(mf: &MetricFields, node: usize) -> f64 {
    let grid = mf.grid;
    let n = grid.n();
    {
        {
            let gam = christoffel(mf, node);
            let gm = |m: usize, i: usize, j: usize| gam[m * n * n + i * n + j];
            // cov[i][j][k] = h_{ij;k}
            let mut cov = vec![0.0; n * n * n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = diff1(&grid, |q| mf.h_at(q, i, j), node, k);
                        for m in 0..n {
                            v -= gm(m, k, i) * mf.h_at(node, m, j) + gm(m, k, j) * mf.h_at(node, i, m);
                        }
                        cov[i * n * n + j * n + k] = v;
                    }
                }
            }
            let mut worst = 0.0_f64;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let r = cov[i * n * n + j * n + k] - cov[i * n * n + k * n + j];
                        worst = worst.max(r.abs());
                    }
                }
            }
            worst
        }
    }
}

/// Max over ring >= 2 nodes of `|R_ijkl - (h_ik h_jl - h_il h_jk)|` for
/// `i < j`, `k < l`, with `R` the discrete curvature tensor of the metric.
pub fn gauss_residual(patch: &GraphPatch) -> f64 {
    gauss_residual_in(patch, &Region::from_ring(STRUCTURE_MIN_RING))
}

/// As [`gauss_residual`], restricted to `region`.
pub fn gauss_residual_in(patch: &GraphPatch, region: &Region) -> f64 {
    let mf = metric_field(patch);
    mf.grid
        .nodes_in(region)
        .par_iter()
        .map(|&node| gauss_at(&mf, node))
        .reduce(|| 0.0, f64::max)
}

fn gauss_at(mf: &MetricFields, node: usize) -> f64 {
    let grid = mf.grid;
    let n = grid.n();
    {
        {
            let gam = christoffel(mf, node);
            let gm = |m: usize, i: usize, j: usize| gam[m * n * n + i * n + j];
            let ddg = |a: usize, b: usize, i: usize, j: usize| {
                diff2(&grid, |q| mf.g_at(q, i, j), node, a, b)
            };
            let h = |i: usize, j: usize| mf.h_at(node, i, j);
            let mut worst = 0.0_f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    for k in 0..n {
                        for l in (k + 1)..n {
                            let mut r = 0.5
                                * (ddg(j, k, i, l) + ddg(i, l, j, k)
                                    - ddg(j, l, i, k)
                                    - ddg(i, k, j, l));
                            for p in 0..n {
                                for q in 0..n {
                                    r += mf.g_at(node, p, q)
                                        * (gm(p, j, k) * gm(q, i, l) - gm(p, j, l) * gm(q, i, k));
                                }
                            }
                            let expected = h(i, k) * h(j, l) - h(i, l) * h(j, k);
                            worst = worst.max((r - expected).abs());
                        }
                    }
                }
            }
            worst
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::analytic_surface;
    use super::*;

    #[test]
    fn flat_plane_has_zero_residuals() {
        let grid = Grid::new(3, 1.0, 7).unwrap();
        let patch = GraphPatch::from_fn(grid, |x| 0.3 * x[0] - 0.1 * x[1] + 4.0);
        assert!(codazzi_residual(&patch) < 1e-13);
        assert!(gauss_residual(&patch) < 1e-13);
    }

    #[test]
    fn christoffel_matches_graph_formula() {
        // For a graph, Gamma^m_ij = u_m u_ij / w^2.
        let (s, patch, _) = analytic_surface("quartic", &[1.0, 2.0, 0.5, 1.0], 3, 1.0, 33).unwrap();
        let mf = metric_field(&patch);
        let grid = *patch.grid();
        let node = grid.nearest(&[0.25, -0.375, 0.125]);
        let x = grid.position(node);
        let du = s.gradient(&x);
        let d2 = s.hessian(&x);
        let w2 = 1.0 + du.iter().map(|v| v * v).sum::<f64>();
        let gam = christoffel(&mf, node);
        for m in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let exact = du[m] * d2[(i, j)] / w2;
                    assert!((gam[m * 9 + i * 3 + j] - exact).abs() < 5e-3, "{m}{i}{j}");
                }
            }
        }
    }

    #[test]
    fn sphere_residuals_are_small() {
        let (_, patch, _) = analytic_surface("sphere", &[2.0], 3, 1.0, 49).unwrap();
        let inner = Region::from_ring(STRUCTURE_MIN_RING).within(0.75);
        assert!(codazzi_residual_in(&patch, &inner) <= 1e-3);
        assert!(gauss_residual_in(&patch, &inner) <= 5e-3);
        // The full interior reaches towards the steep corners of the cube.
        assert!(codazzi_residual(&patch) >= codazzi_residual_in(&patch, &inner));
    }
}
