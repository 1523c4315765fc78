//! Graph hypersurface kernel.
//!
//! From nodal values of `u` on a [`Grid`], build `Du`, `D^2u`, the upward
//! unit normal `(-Du, 1)/w`, the symmetric shape operator
//! `a = gamma D^2u gamma / w` with `gamma = I - Du Du^T / (w (1 + w))`, and
//! the principal curvatures as its eigenvalues.

mod grid;
mod structure;
mod surface;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::{diff1, diff2, Grid, Region};
pub use structure::{
    christoffel, codazzi_residual, codazzi_residual_in, gauss_residual, gauss_residual_in, metric_field, second_form_field, MetricFields,
    STRUCTURE_MIN_RING,
};
pub use surface::{analytic_surface, AnalyticSurface};

/// Nodal values of a graph `x -> u(x)` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPatch {
    grid: Grid,
    u: Vec<f64>,
}

impl GraphPatch {
    pub fn new(grid: Grid, u: Vec<f64>) -> Result<Self> {
        if u.len() != grid.len() {
            return Err(Error::Argument(format!(
                "field has {} values, grid has {} nodes",
                u.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, u })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let u = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Self { grid, u }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn u_mut(&mut self) -> &mut [f64] {
        &mut self.u
    }

    pub fn into_values(self) -> Vec<f64> {
        self.u
    }
}

/// Pointwise shape data from `Du` and `D^2u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointShape {
    pub w: f64,
    pub gamma: DMatrix<f64>,
    pub shape: DMatrix<f64>,
}

/// `w`, `gamma` and the symmetric shape operator at one point.
pub fn point_shape(du: &[f64], d2u: &DMatrix<f64>) -> PointShape {
    let n = du.len();
    let p2: f64 = du.iter().map(|v| v * v).sum();
    let w = (1.0 + p2).sqrt();
    let c = 1.0 / (w * (1.0 + w));
    let gamma = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - c * du[i] * du[j]
    });
    let mut shape = &gamma * d2u * &gamma / w;
    // symmetrize away rounding
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (shape[(i, j)] + shape[(j, i)]);
            shape[(i, j)] = s;
            shape[(j, i)] = s;
        }
    }
    PointShape { w, gamma, shape }
}

/// Discrete `Du` and `D^2u` at one node.
pub fn node_derivatives(grid: &Grid, u: &[f64], node: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = grid.n();
    let field = |i: usize| u[i];
    let du: Vec<f64> = (0..n).map(|a| diff1(grid, field, node, a)).collect();
    let mut d2 = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = diff2(grid, field, node, a, b);
            d2[(a, b)] = v;
            d2[(b, a)] = v;
        }
    }
    (du, d2)
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn descending_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Discrete principal curvatures at one node, descending.
pub fn node_curvatures(grid: &Grid, u: &[f64], node: usize) -> Vec<f64> {
    let (du, d2) = node_derivatives(grid, u, node);
    descending_eigenvalues(&point_shape(&du, &d2).shape)
}

/// Derived geometric fields on every node of a patch, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryFields {
    n: usize,
    pub du: Vec<f64>,
    pub d2u: Vec<f64>,
    pub w: Vec<f64>,
    pub nu: Vec<f64>,
    pub shape: Vec<f64>,
    pub curvatures: Vec<f64>,
}

impl GeometryFields {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn du_at(&self, node: usize) -> &[f64] {
        &self.du[node * self.n..(node + 1) * self.n]
    }

    pub fn d2u_at(&self, node: usize) -> DMatrix<f64> {
        let nn = self.n * self.n;
        DMatrix::from_row_slice(self.n, self.n, &self.d2u[node * nn..(node + 1) * nn])
    }

    pub fn nu_at(&self, node: usize) -> &[f64] {
        &self.nu[node * (self.n + 1)..(node + 1) * (self.n + 1)]
    }

    pub fn shape_at(&self, node: usize) -> DMatrix<f64> {
        let nn = self.n * self.n;
        DMatrix::from_row_slice(self.n, self.n, &self.shape[node * nn..(node + 1) * nn])
    }

    /// Principal curvatures at `node`, descending.
    pub fn curvatures_at(&self, node: usize) -> &[f64] {
        &self.curvatures[node * self.n..(node + 1) * self.n]
    }
}

struct NodeFields {
    du: Vec<f64>,
    d2u: Vec<f64>,
    w: f64,
    nu: Vec<f64>,
    shape: Vec<f64>,
    curvatures: Vec<f64>,
}

/// Computes every derived field of a patch.
///
/// Interior nodes use centered second-order stencils; the outermost ring
/// uses one-sided second-order stencils.
pub fn derive_fields(patch: &GraphPatch) -> GeometryFields {
    let grid = *patch.grid();
    let n = grid.n();
    let u = patch.u();
    let per_node: Vec<NodeFields> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let (du, d2) = node_derivatives(&grid, u, node);
            let ps = point_shape(&du, &d2);
            let mut nu: Vec<f64> = du.iter().map(|v| -v / ps.w).collect();
            nu.push(1.0 / ps.w);
            NodeFields {
                curvatures: descending_eigenvalues(&ps.shape),
                d2u: d2.transpose().as_slice().to_vec(),
                shape: ps.shape.transpose().as_slice().to_vec(),
                du,
                w: ps.w,
                nu,
            }
        })
        .collect();
    let mut f = GeometryFields {
        n,
        du: Vec::with_capacity(grid.len() * n),
        d2u: Vec::with_capacity(grid.len() * n * n),
        w: Vec::with_capacity(grid.len()),
        nu: Vec::with_capacity(grid.len() * (n + 1)),
        shape: Vec::with_capacity(grid.len() * n * n),
        curvatures: Vec::with_capacity(grid.len() * n),
    };
    for p in per_node {
        f.du.extend(p.du);
        f.d2u.extend(p.d2u);
        f.w.push(p.w);
        f.nu.extend(p.nu);
        f.shape.extend(p.shape);
        f.curvatures.extend(p.curvatures);
    }
    f
}

/// Max over the nodes of `region` of `|discrete - exact|` curvatures.
pub fn curvature_error(patch: &GraphPatch, exact: &[f64], region: &Region) -> f64 {
    let grid = *patch.grid();
    let n = grid.n();
    grid.nodes_in(region)
        .par_iter()
        .map(|&node| {
            let k = node_curvatures(&grid, patch.u(), node);
            k.iter()
                .zip(&exact[node * n..(node + 1) * n])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_plane() {
        let grid = Grid::new(3, 1.0, 7).unwrap();
        let patch = GraphPatch::from_fn(grid, |_| 2.5);
        let f = derive_fields(&patch);
        for node in 0..grid.len() {
            assert!(f.curvatures_at(node).iter().all(|k| k.abs() < 1e-12));
            assert_eq!(f.nu_at(node), &[0.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn paraboloid_vertex() {
        use crate::quotient::QuotientOperator;
        for n in [3, 4] {
            let grid = Grid::new(n, 1.0, 9).unwrap();
            let patch = GraphPatch::from_fn(grid, |x| x.iter().map(|v| v * v).sum::<f64>() / 2.0);
            let f = derive_fields(&patch);
            let centre = grid.nearest(&vec![0.0; n]);
            for k in f.curvatures_at(centre) {
                assert!((k - 1.0).abs() < 1e-12);
            }
            let op = QuotientOperator::standard(n).unwrap();
            let val = op.value(f.curvatures_at(centre)).unwrap();
            let binom = (n * (n - 1) / 2) as f64;
            assert!((val - 1.0 / binom).abs() < 1e-12);
        }
    }

    #[test]
    fn invariants_on_tilted_surface() {
        let grid = Grid::new(3, 1.0, 9).unwrap();
        let s = AnalyticSurface::Quartic { diag: vec![1.0, 2.0, 0.5], q: 1.0 };
        let patch = GraphPatch::from_fn(grid, |x| s.value(x) + 0.7 * x[0] - 0.3 * x[2]);
        let f = derive_fields(&patch);
        for node in 0..grid.len() {
            let nu = f.nu_at(node);
            assert!((nu.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
            let a = f.shape_at(node);
            assert!((&a - a.transpose()).amax() < 1e-12);
            let k = f.curvatures_at(node);
            assert!(k.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn sphere_cap_curvatures() {
        let (_, patch, _) = analytic_surface("sphere", &[2.0], 3, 1.0, 17).unwrap();
        let grid = *patch.grid();
        let h = grid.spacing();
        let f = derive_fields(&patch);
        for node in grid.nodes_from_ring(1) {
            let x = grid.position(node);
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() <= 0.5 {
                for k in f.curvatures_at(node) {
                    assert!((k - 0.5).abs() < 2.0 * h * h, "{k}");
                }
            }
        }
    }
}
