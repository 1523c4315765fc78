//! Curvature suprema, the auxiliary function `P` and the Jacobi slack.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    christoffel, derive_fields, diff1, diff2, metric_field, node_derivatives, point_shape,
    GeometryFields, GraphPatch, Grid, MetricFields,
};
use crate::quotient::{sorted_eigen, QuotientOperator};
use crate::solver::ProblemSpec;

/// Jacobi slack is evaluated only this many rings inside the boundary.
pub const JACOBI_MIN_RING: usize = 3;
/// Required `lambda_1 - lambda_2` in units of the grid spacing.
pub const JACOBI_GAP_FACTOR: f64 = 10.0;

/// Curvature bound and the norms it depends on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremDiagnostics {
    /// Max of `lambda_1` over interior nodes with `|x| <= r/2`.
    pub sup_lambda1_inner: f64,
    pub location_node: usize,
    pub location: Vec<f64>,
    /// Max of `lambda_1` over all interior nodes.
    pub sup_lambda1_interior: f64,
    /// Max over nodes of `|f|`, `|Df|` and the spectral norm of `D^2 f`.
    pub f_c2_norm: f64,
    pub f_min: f64,
    /// Max over nodes of `|u|` and `|Du|`.
    pub m_c1_norm: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_field(grid: &Grid, u: &[f64]) -> Result<GraphPatch> {
    GraphPatch::new(*grid, u.to_vec())
}

fn inner_ball(grid: &Grid, node: usize) -> bool {
    let half = 0.5 * grid.r();
    norm(&grid.position(node)) <= half * (1.0 + 1e-12)
}

/// Sup of `lambda_1` on the inner half ball and the norms of the data.
pub fn curvature_report(u: &[f64], spec: &ProblemSpec) -> Result<TheoremDiagnostics> {
    let grid = *spec.grid();
    let patch = check_field(&grid, u)?;
    let fields = derive_fields(&patch);
    let n = grid.n();
    let interior = spec.interior_nodes();
    if let Some(&bad) = interior.iter().find(|&&i| fields.curvatures_at(i)[n - 1] <= 0.0) {
        return Err(Error::Domain(format!(
            "field is not admissible at {:?} (curvature {:e})",
            grid.position(bad),
            fields.curvatures_at(bad)[n - 1]
        )));
    }
    let mut inner: Option<(usize, f64)> = None;
    let mut sup_all = f64::NEG_INFINITY;
    for &node in &interior {
        let l1 = fields.curvatures_at(node)[0];
        sup_all = sup_all.max(l1);
        if inner_ball(&grid, node) && inner.is_none_or(|(_, v)| l1 > v) {
            inner = Some((node, l1));
        }
    }
    let (location_node, sup_inner) =
        inner.ok_or_else(|| Error::Domain("no interior node in the inner ball".into()))?;

    let rhs = spec.rhs();
    let f_min = rhs.iter().copied().fold(f64::INFINITY, f64::min);
    let f_field = |i: usize| rhs[i];
    let f_c2_norm = interior
        .par_iter()
        .map(|&node| {
            let df: Vec<f64> = (0..n).map(|a| diff1(&grid, f_field, node, a)).collect();
            let d2f = DMatrix::from_fn(n, n, |a, b| diff2(&grid, f_field, node, a, b));
            let spectral = d2f.symmetric_eigenvalues().amax();
            rhs[node].abs().max(norm(&df)).max(spectral)
        })
        .reduce(|| 0.0, f64::max)
        .max(rhs.iter().fold(0.0, |a, v| a.max(v.abs())));
    let m_c1_norm = (0..grid.len())
        .map(|i| u[i].abs().max(norm(fields.du_at(i))))
        .fold(0.0, f64::max);
    Ok(TheoremDiagnostics {
        sup_lambda1_inner: sup_inner,
        location_node,
        location: grid.position(location_node),
        sup_lambda1_interior: sup_all,
        f_c2_norm,
        f_min,
        m_c1_norm,
    })
}

/// Parameters of `P = 2 ln rho + ln ln lambda_1 - beta (X, nu)/(nu, E) + alpha/(nu, E)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuxFunction {
    pub alpha: f64,
    pub beta: f64,
}

impl AuxFunction {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Argument(format!(
                "alpha and beta must be finite and nonnegative, got {alpha}, {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }
}

/// `P` at a node of the patch, with `rho = 1 - |x|^2 / r^2`, `X = (x, u)` and
/// `nu = (-Du, 1)/w`, so `(X, nu)/(nu, E) = u - x.Du` and `1/(nu, E) = w`.
pub fn aux_p(patch: &GraphPatch, aux: &AuxFunction, node: usize) -> Result<f64> {
    let grid = patch.grid();
    if node >= grid.len() {
        return Err(Error::Argument(format!("node {node} is outside the grid")));
    }
    let x = grid.position(node);
    let rho = 1.0 - x.iter().map(|v| v * v).sum::<f64>() / (grid.r() * grid.r());
    if rho <= 0.0 {
        return Err(Error::Domain(format!("rho = {rho:e} <= 0 at {x:?}")));
    }
    let (du, d2) = node_derivatives(grid, patch.u(), node);
    let ps = point_shape(&du, &d2);
    let lambda1 = ps.shape.symmetric_eigenvalues().max();
    if lambda1 <= 1.0 {
        return Err(Error::Domain(format!("lambda_1 = {lambda1} <= 1 at {x:?}")));
    }
    let support = patch.u()[node] - x.iter().zip(&du).map(|(a, b)| a * b).sum::<f64>();
    Ok(2.0 * rho.ln() + lambda1.ln().ln() - aux.beta * support + aux.alpha * ps.w * ps.w)
}

/// Location and value of the maximum of `P`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuxMax {
    pub node: usize,
    pub position: Vec<f64>,
    pub value: f64,
    /// Max-norm of `gamma . DP` at the maximizer (centered differences);
    /// `None` when a stencil neighbor is not eligible.
    pub gradient_residual: Option<f64>,
    /// `rho^2 ln lambda_1` at the maximizer.
    pub rho2_log_lambda1: f64,
}

/// Maximizes `P` over eligible interior nodes (`rho > 0`, `lambda_1 > 1`).
pub fn aux_p_max(patch: &GraphPatch, aux: &AuxFunction) -> Result<AuxMax> {
    let grid = *patch.grid();
    let values: Vec<Option<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            if grid.ring(node) == 0 {
                None
            } else {
                aux_p(patch, aux, node).ok()
            }
        })
        .collect();
    let (node, value) = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|p| (i, p)))
        .fold(None, |best: Option<(usize, f64)>, (i, p)| match best {
            Some((_, b)) if b >= p => best,
            _ => Some((i, p)),
        })
        .ok_or_else(|| Error::Domain("no node with rho > 0 and lambda_1 > 1".into()))?;
    let n = grid.n();
    let h = grid.spacing();
    let mut dp = Vec::with_capacity(n);
    for a in 0..n {
        let plus = values[grid.shift(node, a, 1)];
        let minus = values[grid.shift(node, a, -1)];
        match (plus, minus) {
            (Some(p), Some(m)) if grid.ring(node) >= 1 => dp.push((p - m) / (2.0 * h)),
            _ => break,
        }
    }
    let (du, d2) = node_derivatives(&grid, patch.u(), node);
    let ps = point_shape(&du, &d2);
    let gradient_residual = (dp.len() == n).then(|| {
        let g = &ps.gamma * nalgebra::DVector::from_vec(dp);
        g.amax()
    });
    let x = grid.position(node);
    let rho = 1.0 - x.iter().map(|v| v * v).sum::<f64>() / (grid.r() * grid.r());
    let lambda1 = ps.shape.symmetric_eigenvalues().max();
    Ok(AuxMax {
        node,
        position: x,
        value,
        gradient_residual,
        rho2_log_lambda1: rho * rho * lambda1.ln(),
    })
}

/// Precomputed fields shared by Jacobi-slack evaluations on one patch.
pub struct JacobiContext<'a> {
    patch: &'a GraphPatch,
    operator: QuotientOperator,
    fields: GeometryFields,
    metric: MetricFields,
    log_lambda1: Vec<f64>,
}

impl<'a> JacobiContext<'a> {
    pub fn new(patch: &'a GraphPatch, operator: QuotientOperator) -> Result<Self> {
        if operator.n() != patch.grid().n() {
            return Err(Error::Argument("operator and patch dimensions differ".into()));
        }
        let fields = derive_fields(patch);
        let log_lambda1 = (0..fields.len())
            .map(|i| fields.curvatures_at(i)[0].ln())
            .collect();
        Ok(Self {
            patch,
            operator,
            metric: metric_field(patch),
            fields,
            log_lambda1,
        })
    }

    fn gap_ok(&self, node: usize) -> bool {
        let k = self.fields.curvatures_at(node);
        k[k.len() - 1] > 0.0 && k[0] - k[1] > JACOBI_GAP_FACTOR * self.patch.grid().spacing()
    }

    /// True when `lambda_1` is simple at the node and at every node its
    /// stencils touch.
    pub fn eligible(&self, node: usize) -> bool {
        let grid = self.patch.grid();
        if grid.ring(node) < JACOBI_MIN_RING {
            return false;
        }
        let n = grid.n();
        for a in 0..n {
            for sa in [-1isize, 0, 1] {
                let p = grid.shift(node, a, sa);
                if !self.gap_ok(p) {
                    return false;
                }
                for b in (a + 1)..n {
                    for sb in [-1isize, 1] {
                        if !self.gap_ok(grid.shift(p, b, sb)) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// `J = sum F^ii b_ii - c sum F^ii b_i^2 - lambda_1 sum F^ii lambda_i + sum F^ii lambda_i^2`
    /// with `b = ln lambda_1` differentiated covariantly in the principal
    /// frame. `Ok(None)` signals a skipped node (eigenvalue gap too small).
    pub fn slack(&self, node: usize, c_candidate: f64) -> Result<Option<f64>> {
        let grid = *self.patch.grid();
        if node >= grid.len() || grid.ring(node) < JACOBI_MIN_RING {
            return Err(Error::Precondition(format!(
                "Jacobi slack needs a node at least {JACOBI_MIN_RING} rings inside"
            )));
        }
        if !self.eligible(node) {
            return Ok(None);
        }
        let n = grid.n();
        let b = |i: usize| self.log_lambda1[i];
        let db: Vec<f64> = (0..n).map(|a| diff1(&grid, b, node, a)).collect();
        let gamma_sym = christoffel(&self.metric, node);
        let hess = DMatrix::from_fn(n, n, |k, l| {
            let mut v = diff2(&grid, b, node, k, l);
            for (m, dbm) in db.iter().enumerate() {
                v -= gamma_sym[m * n * n + k * n + l] * dbm;
            }
            v
        });
        let (du, d2) = node_derivatives(&grid, self.patch.u(), node);
        let ps = point_shape(&du, &d2);
        let (lambda, vectors) = sorted_eigen(ps.shape.clone());
        let grad = self.operator.jet(&lambda)?.grad;
        let dbv = nalgebra::DVector::from_vec(db);
        let mut j = 0.0;
        for i in 0..n {
            let e = &ps.gamma * vectors.column(i);
            let bi = e.dot(&dbv);
            let bii = (e.transpose() * &hess * &e)[(0, 0)];
            j += grad[i] * (bii - c_candidate * bi * bi - lambda[0] * lambda[i] + lambda[i] * lambda[i]);
        }
        Ok(Some(j))
    }

    /// Minimum slack over eligible nodes, with its node and the eligible count.
    pub fn minimum(&self, c_candidate: f64) -> Result<JacobiSummary> {
        let grid = self.patch.grid();
        let nodes = grid.nodes_from_ring(JACOBI_MIN_RING);
        let values: Vec<Option<f64>> = nodes
            .par_iter()
            .map(|&node| self.slack(node, c_candidate))
            .collect::<Result<_>>()?;
        let mut summary = JacobiSummary { eligible: 0, min: None };
        for (&node, v) in nodes.iter().zip(values) {
            if let Some(j) = v {
                summary.eligible += 1;
                if summary.min.is_none_or(|(_, m)| j < m) {
                    summary.min = Some((node, j));
                }
            }
        }
        Ok(summary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobiSummary {
    pub eligible: usize,
    /// Node and value of the minimum; `None` when every node was skipped.
    pub min: Option<(usize, f64)>,
}

/// Jacobi slack at one node; see [`JacobiContext::slack`].
pub fn jacobi_slack(
    u: &[f64],
    spec: &ProblemSpec,
    node: usize,
    c_candidate: f64,
) -> Result<Option<f64>> {
    let patch = check_field(spec.grid(), u)?;
    JacobiContext::new(&patch, *spec.operator())?.slack(node, c_candidate)
}

/// Default `c` in the Jacobi slack: `1 / (2 (n - 1))`.
pub fn default_c_candidate(n: usize) -> f64 {
    1.0 / (2.0 * (n as f64 - 1.0))
}
