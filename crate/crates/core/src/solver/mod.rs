//! Damped Newton solver for the discrete Dirichlet problem `F(lambda(x)) = f(x)`.
//!
//! Unknowns are the nodal values of `u` on the interior nodes (ring >= 1),
//! where every derivative uses centered stencils. Boundary nodes are pinned
//! to the Dirichlet data and the Newton correction vanishes there.

mod linear;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    descending_eigenvalues, diff1, diff2, node_derivatives, point_shape, GraphPatch, Grid,
};
use crate::quotient::QuotientOperator;
use crate::symfun::binomial;

pub use linear::{gmres, CsrMatrix, Ilu0, LinearStats};

/// Nodes at ring >= this are unknowns.
pub const INTERIOR_RING: usize = 1;

/// Outer fraction of the cube over which the automatic guess blends into
/// the boundary data.
const BLEND_BAND: f64 = 0.2;
const MAX_GUESS_DOUBLINGS: usize = 20;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITERS: usize = 3000;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// See [`auto_initial_guess`].
    Auto,
    /// Nodal values on the full grid; boundary entries are replaced by the
    /// Dirichlet data.
    Field(Vec<f64>),
}

/// A discrete Dirichlet problem with nodal data.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    grid: Grid,
    operator: QuotientOperator,
    rhs: Vec<f64>,
    boundary: Vec<f64>,
    initial_guess: InitialGuess,
}

impl ProblemSpec {
    /// Samples `rhs` and `boundary` at every node. The boundary evaluator is
    /// used on all nodes because the automatic initial guess blends into it.
    pub fn new(
        n: usize,
        k: usize,
        r: f64,
        m: usize,
        rhs: impl Fn(&[f64]) -> f64,
        boundary: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let grid = Grid::new(n, r, m)?;
        let rhs: Vec<f64> = (0..grid.len()).map(|i| rhs(&grid.position(i))).collect();
        let boundary: Vec<f64> = (0..grid.len()).map(|i| boundary(&grid.position(i))).collect();
        Self::from_fields(grid, QuotientOperator::new(n, k)?, rhs, boundary)
    }

    pub fn from_fields(
        grid: Grid,
        operator: QuotientOperator,
        rhs: Vec<f64>,
        boundary: Vec<f64>,
    ) -> Result<Self> {
        if operator.n() != grid.n() {
            return Err(Error::Argument(format!(
                "operator dimension {} does not match grid dimension {}",
                operator.n(),
                grid.n()
            )));
        }
        if rhs.len() != grid.len() || boundary.len() != grid.len() {
            return Err(Error::Argument(format!(
                "nodal data must have {} entries (rhs {}, boundary {})",
                grid.len(),
                rhs.len(),
                boundary.len()
            )));
        }
        if let Some(i) = (0..grid.len()).find(|&i| !(rhs[i] > 0.0 && rhs[i].is_finite())) {
            return Err(Error::Argument(format!(
                "right-hand side must be positive and finite, got {} at {:?}",
                rhs[i],
                grid.position(i)
            )));
        }
        if let Some(i) = (0..grid.len()).find(|&i| grid.is_boundary_layer(i) && !boundary[i].is_finite()) {
            return Err(Error::Argument(format!(
                "boundary data is not finite at {:?}",
                grid.position(i)
            )));
        }
        Ok(Self {
            grid,
            operator,
            rhs,
            boundary,
            initial_guess: InitialGuess::Auto,
        })
    }

    pub fn with_initial_guess(mut self, guess: InitialGuess) -> Result<Self> {
        if let InitialGuess::Field(f) = &guess {
            if f.len() != self.grid.len() {
                return Err(Error::Argument(format!(
                    "initial guess has {} entries, grid has {}",
                    f.len(),
                    self.grid.len()
                )));
            }
        }
        self.initial_guess = guess;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn operator(&self) -> &QuotientOperator {
        &self.operator
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn boundary(&self) -> &[f64] {
        &self.boundary
    }

    pub fn initial_guess(&self) -> &InitialGuess {
        &self.initial_guess
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        self.grid.nodes_from_ring(INTERIOR_RING)
    }
}

impl Grid {
    /// True on the pinned outer ring.
    pub fn is_boundary_layer(&self, node: usize) -> bool {
        self.ring(node) < INTERIOR_RING
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol_residual: f64,
    pub max_iters: usize,
    pub backtrack: f64,
    pub min_step: f64,
    pub linear_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_residual: 1e-9,
            max_iters: 50,
            backtrack: 0.5,
            min_step: 2f64.powi(-20),
            linear_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_residual > 0.0
            && self.max_iters > 0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.min_step > 0.0
            && self.min_step <= 1.0
            && self.linear_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid solver configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: Vec<f64>,
    pub residual_norm: f64,
    pub step: usize,
    pub damping: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub residual_max: f64,
    pub step_length: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    StepUnderflow,
    MaxIterations,
    LinearSolveFailed,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::StepUnderflow => "step underflow",
            Self::MaxIterations => "max iterations",
            Self::LinearSolveFailed => "linear solve failed",
        }
    }
}

/// Result of a Newton run; non-convergence keeps the last accepted state
/// and the trace.
#[derive(Debug, Clone)]
pub struct NewtonRun {
    pub state: SolverState,
    pub trace: Vec<TraceRow>,
    pub status: SolveStatus,
}

impl NewtonRun {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn into_result(self) -> Result<Self> {
        if self.converged() {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                reason: self.status.as_str().into(),
                iterations: self.state.step,
                residual: self.state.residual_norm,
            })
        }
    }
}

/// Residual field and admissibility of one iterate.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub admissible: bool,
    pub min_curvature: f64,
}

fn singular_at(e: Error, node: usize) -> Error {
    match e {
        Error::Singular { k, value, .. } => Error::Singular { k, value, node: Some(node) },
        other => other,
    }
}

fn check_len(grid: &Grid, u: &[f64]) -> Result<()> {
    if u.len() != grid.len() {
        return Err(Error::Argument(format!(
            "field has {} entries, grid has {}",
            u.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// `F(lambda) - f` at interior nodes, zero on the boundary ring, together
/// with the admissibility of `u`.
pub fn evaluate(u: &[f64], spec: &ProblemSpec) -> Result<Evaluation> {
    let grid = spec.grid;
    check_len(&grid, u)?;
    let per_node: Vec<(f64, f64)> = spec
        .interior_nodes()
        .par_iter()
        .map(|&node| {
            let (du, d2) = node_derivatives(&grid, u, node);
            let kappa = descending_eigenvalues(&point_shape(&du, &d2).shape);
            let value = spec.operator.value(&kappa).map_err(|e| singular_at(e, node))?;
            Ok((value - spec.rhs[node], kappa[kappa.len() - 1]))
        })
        .collect::<Result<_>>()?;
    let mut residual = vec![0.0; grid.len()];
    let mut norm = 0.0_f64;
    let mut min_curvature = f64::INFINITY;
    for (&node, (res, kmin)) in spec.interior_nodes().iter().zip(per_node) {
        residual[node] = res;
        norm = norm.max(res.abs());
        min_curvature = min_curvature.min(kmin);
    }
    Ok(Evaluation {
        residual,
        residual_norm: norm,
        admissible: min_curvature > 0.0,
        min_curvature,
    })
}

/// `F(lambda(u)) - f` at interior nodes, zero on boundary nodes.
pub fn residual(u: &[f64], spec: &ProblemSpec) -> Result<Vec<f64>> {
    evaluate(u, spec).map(|e| e.residual)
}

/// First-order coefficients of the residual at one node:
/// `d residual = A : D^2 v + b . D v`.
#[derive(Debug, Clone)]
pub struct NodeLinearization {
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
}

/// Chains `dF/dW` through `W = gamma(p) H gamma(p) / w(p)`.
pub fn linearize(op: &QuotientOperator, du: &[f64], d2u: &DMatrix<f64>) -> Result<NodeLinearization> {
    let n = du.len();
    let ps = point_shape(du, d2u);
    let jet = op.matrix_jet(&ps.shape, true)?;
    let g = jet.derivative.expect("derivative requested");
    let w = ps.w;
    let gamma = &ps.gamma;
    let a = gamma * &g * gamma / w;
    let g_dot_w = g.dot(&ps.shape);
    let s = w * (1.0 + w);
    let h_gamma = d2u * gamma;
    let mut b = vec![0.0; n];
    for (m, bm) in b.iter_mut().enumerate() {
        let dgamma = DMatrix::from_fn(n, n, |i, k| {
            let di = if i == m { du[k] } else { 0.0 };
            let dk = if k == m { du[i] } else { 0.0 };
            -(di + dk) / s + du[i] * du[k] * (1.0 + 2.0 * w) * (du[m] / w) / (s * s)
        });
        *bm = 2.0 / w * g.dot(&(dgamma * &h_gamma)) - du[m] / (w * w) * g_dot_w;
    }
    Ok(NodeLinearization { a, b })
}

fn node_linearization(u: &[f64], spec: &ProblemSpec, node: usize) -> Result<NodeLinearization> {
    let (du, d2) = node_derivatives(&spec.grid, u, node);
    linearize(&spec.operator, &du, &d2).map_err(|e| singular_at(e, node))
}

/// Directional derivative of [`residual`] at `u` along `v` (rows of boundary
/// nodes are zero; `v` may be nonzero anywhere).
pub fn jacobian_apply(u: &[f64], spec: &ProblemSpec, v: &[f64]) -> Result<Vec<f64>> {
    let grid = spec.grid;
    check_len(&grid, u)?;
    check_len(&grid, v)?;
    let n = grid.n();
    let nodes = spec.interior_nodes();
    let rows: Vec<f64> = nodes
        .par_iter()
        .map(|&node| {
            let lin = node_linearization(u, spec, node)?;
            let field = |i: usize| v[i];
            let mut s = 0.0;
            for p in 0..n {
                s += lin.b[p] * diff1(&grid, field, node, p);
                for q in 0..n {
                    s += lin.a[(p, q)] * diff2(&grid, field, node, p, q);
                }
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; grid.len()];
    for (&node, s) in nodes.iter().zip(rows) {
        out[node] = s;
    }
    Ok(out)
}

/// Sparse Jacobian restricted to interior unknowns (zero Dirichlet data on
/// the boundary ring), rows and columns in the order of
/// [`ProblemSpec::interior_nodes`].
pub fn assemble_jacobian(u: &[f64], spec: &ProblemSpec) -> Result<CsrMatrix> {
    let grid = spec.grid;
    check_len(&grid, u)?;
    let n = grid.n();
    let h = grid.spacing();
    let nodes = spec.interior_nodes();
    let mut unknown = vec![usize::MAX; grid.len()];
    for (i, &node) in nodes.iter().enumerate() {
        unknown[node] = i;
    }
    let rows: Vec<Vec<(usize, f64)>> = nodes
        .par_iter()
        .map(|&node| {
            let lin = node_linearization(u, spec, node)?;
            let mut row = Vec::with_capacity(1 + 2 * n + 2 * n * (n - 1));
            let mut push = |target: usize, val: f64| {
                let col = unknown[target];
                if col != usize::MAX {
                    row.push((col, val));
                }
            };
            let mut center = 0.0;
            for p in 0..n {
                let app = lin.a[(p, p)] / (h * h);
                let bp = lin.b[p] / (2.0 * h);
                center -= 2.0 * app;
                push(grid.shift(node, p, 1), app + bp);
                push(grid.shift(node, p, -1), app - bp);
                for q in (p + 1)..n {
                    // A is symmetric: the (p,q) and (q,p) terms coincide.
                    let c = 2.0 * lin.a[(p, q)] / (4.0 * h * h);
                    let plus = grid.shift(node, p, 1);
                    let minus = grid.shift(node, p, -1);
                    push(grid.shift(plus, q, 1), c);
                    push(grid.shift(minus, q, -1), c);
                    push(grid.shift(plus, q, -1), -c);
                    push(grid.shift(minus, q, 1), -c);
                }
            }
            push(node, center);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(CsrMatrix::from_rows(rows))
}

/// Weight of the boundary data in the automatic guess: 0 inside the inner
/// cube, rising linearly to 1 on the boundary over the outer band.
fn blend_weight(grid: &Grid, node: usize) -> f64 {
    let s = grid.position(node).iter().fold(0.0_f64, |a, v| a.max(v.abs())) / grid.r();
    ((s - (1.0 - BLEND_BAND)) / BLEND_BAND).clamp(0.0, 1.0)
}

fn admissible(u: &[f64], spec: &ProblemSpec) -> bool {
    matches!(evaluate(u, spec), Ok(e) if e.admissible)
}

/// Automatic initial guess.
///
/// First tries the convex quadratic `q = c |x|^2 + d`, with `c` chosen so
/// that `F(2c, ..., 2c)` is the mean of `f` and `d` fitted to the mean
/// boundary value, blended linearly to the boundary data over the outer 20%
/// of the cube; `c` doubles (up to 20 times) while the blend is
/// inadmissible. The blend's cross term grows with `c` as fast as `D^2 q`,
/// so on a cube it often never becomes admissible; the boundary data
/// evaluator itself (the natural extension of the data) is used then.
///
/// Lifts that add a convex bump below the data were tried and rejected:
/// any jump or steep drop at the boundary ring steers Newton towards
/// spurious discrete solutions with a boundary layer, which the quotient
/// operator admits because it stays bounded as one curvature blows up.
pub fn auto_initial_guess(spec: &ProblemSpec) -> Result<Vec<f64>> {
    let grid = spec.grid;
    let interior = spec.interior_nodes();
    let mean_f = interior.iter().map(|&i| spec.rhs[i]).sum::<f64>() / interior.len() as f64;
    let (n, k) = (spec.operator.n(), spec.operator.k());
    // F(t, ..., t) = t^(n-k) / binom(n, k)
    let t = (mean_f * binomial(n, k)).powf(1.0 / (n - k) as f64);
    let boundary: Vec<usize> = (0..grid.len()).filter(|&i| grid.is_boundary_layer(i)).collect();
    let r2: Vec<f64> = (0..grid.len())
        .map(|i| grid.position(i).iter().map(|v| v * v).sum())
        .collect();
    let weights: Vec<f64> = (0..grid.len()).map(|i| blend_weight(&grid, i)).collect();
    let mut c = 0.5 * t;
    for _ in 0..=MAX_GUESS_DOUBLINGS {
        let d = boundary.iter().map(|&i| spec.boundary[i] - c * r2[i]).sum::<f64>()
            / boundary.len() as f64;
        let u: Vec<f64> = (0..grid.len())
            .map(|i| (1.0 - weights[i]) * (c * r2[i] + d) + weights[i] * spec.boundary[i])
            .collect();
        if admissible(&u, spec) {
            return Ok(u);
        }
        c *= 2.0;
    }
    if admissible(&spec.boundary, spec) {
        return Ok(spec.boundary.clone());
    }
    Err(Error::Precondition(
        "no admissible automatic initial guess: the blended quadratic and the boundary data \
         extension are both non-convex"
            .into(),
    ))
}

fn initial_field(spec: &ProblemSpec) -> Result<Vec<f64>> {
    match &spec.initial_guess {
        InitialGuess::Auto => auto_initial_guess(spec),
        InitialGuess::Field(f) => {
            let grid = spec.grid;
            Ok((0..grid.len())
                .map(|i| if grid.is_boundary_layer(i) { spec.boundary[i] } else { f[i] })
                .collect())
        }
    }
}

/// Damped Newton iteration with a monotone, admissibility-gated backtracking
/// line search.
pub fn newton_solve(spec: &ProblemSpec, config: &SolverConfig) -> Result<NewtonRun> {
    config.validate()?;
    let mut u = initial_field(spec)?;
    let mut eval = match evaluate(&u, spec) {
        Ok(e) => e,
        Err(Error::Singular { node, .. }) => {
            return Err(Error::Precondition(format!(
                "initial guess is not admissible (singular operator at node {node:?})"
            )))
        }
        Err(e) => return Err(e),
    };
    if !eval.admissible {
        return Err(Error::Precondition(format!(
            "initial guess is not admissible (min interior curvature {:e})",
            eval.min_curvature
        )));
    }
    let nodes = spec.interior_nodes();
    let mut trace = vec![TraceRow {
        iter: 0,
        residual_max: eval.residual_norm,
        step_length: 0.0,
        admissible: true,
    }];
    let mut damping = 0.0;
    let mut iter = 0;
    let status = loop {
        if eval.residual_norm <= config.tol_residual {
            break SolveStatus::Converged;
        }
        if iter >= config.max_iters {
            break SolveStatus::MaxIterations;
        }
        iter += 1;
        let jac = assemble_jacobian(&u, spec)?;
        let rhs: Vec<f64> = nodes.iter().map(|&i| -eval.residual[i]).collect();
        let delta = match gmres(&jac, &rhs, config.linear_tol, GMRES_RESTART, GMRES_MAX_ITERS) {
            Ok((d, _)) => d,
            Err(Error::NoConvergence { .. }) => break SolveStatus::LinearSolveFailed,
            Err(e) => return Err(e),
        };
        let mut t = 1.0;
        let accepted = loop {
            let mut trial = u.clone();
            for (&node, d) in nodes.iter().zip(&delta) {
                trial[node] += t * d;
            }
            if let Ok(e) = evaluate(&trial, spec) {
                if e.admissible && e.residual_norm < eval.residual_norm {
                    break Some((trial, e));
                }
            }
            t *= config.backtrack;
            if t < config.min_step {
                break None;
            }
        };
        let Some((trial, e)) = accepted else {
            break SolveStatus::StepUnderflow;
        };
        u = trial;
        eval = e;
        damping = t;
        trace.push(TraceRow {
            iter,
            residual_max: eval.residual_norm,
            step_length: t,
            admissible: true,
        });
    };
    Ok(NewtonRun {
        state: SolverState {
            u,
            residual_norm: eval.residual_norm,
            step: iter,
            damping,
            admissible: eval.admissible,
        },
        trace,
        status,
    })
}

/// Problem whose exact discrete solution is `u_star` sampled on the grid:
/// the right-hand side is `F` of the discrete curvatures of `u_star` computed
/// with the solver's own stencils (one-sided on the boundary ring, where it
/// only feeds diagnostics).
pub fn manufacture(
    u_star: impl Fn(&[f64]) -> f64,
    n: usize,
    k: usize,
    r: f64,
    m: usize,
) -> Result<ProblemSpec> {
    let grid = Grid::new(n, r, m)?;
    let op = QuotientOperator::new(n, k)?;
    let patch = GraphPatch::from_fn(grid, u_star);
    let u = patch.u();
    let rhs: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let (du, d2) = node_derivatives(&grid, u, node);
            let kappa = descending_eigenvalues(&point_shape(&du, &d2).shape);
            if kappa[n - 1] <= 0.0 {
                return Err(Error::Argument(format!(
                    "manufactured solution is not strictly convex at {:?} (curvature {:e})",
                    grid.position(node),
                    kappa[n - 1]
                )));
            }
            op.value(&kappa).map_err(|e| singular_at(e, node))
        })
        .collect::<Result<_>>()?;
    ProblemSpec::from_fields(grid, op, rhs, u.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quartic(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>() / 2.0 + x[0].powi(4) / 12.0
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    #[test]
    fn linearization_matches_finite_differences() {
        let op = QuotientOperator::new(3, 1).unwrap();
        let du = [0.3, -0.7, 0.2];
        let d2 = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.1, 0.3, 1.2, 0.2, -0.1, 0.2, 0.8]);
        let lin = linearize(&op, &du, &d2).unwrap();
        let f = |p: &[f64], hm: &DMatrix<f64>| {
            op.value(&descending_eigenvalues(&point_shape(p, hm).shape)).unwrap()
        };
        let eps = 1e-6;
        for m in 0..3 {
            let mut a = du;
            let mut b = du;
            a[m] += eps;
            b[m] -= eps;
            let fd = (f(&a, &d2) - f(&b, &d2)) / (2.0 * eps);
            assert!((fd - lin.b[m]).abs() < 1e-8, "b[{m}]: {fd} vs {}", lin.b[m]);
        }
        for p in 0..3 {
            for q in 0..3 {
                let mut a = d2.clone();
                let mut b = d2.clone();
                a[(p, q)] += eps;
                b[(p, q)] -= eps;
                let fd = (f(&du, &a) - f(&du, &b)) / (2.0 * eps);
                // `a` here perturbs one entry of a general matrix; only the
                // symmetric part of A pairs with it.
                let expect = lin.a[(p, q)];
                let a_sym = if p == q { expect } else { 0.5 * (lin.a[(p, q)] + lin.a[(q, p)]) };
                assert!((fd - a_sym).abs() < 1e-8, "A[{p}{q}]: {fd} vs {a_sym}");
            }
        }
    }

    #[test]
    fn manufactured_residual_vanishes() {
        let spec = manufacture(quartic, 3, 1, 1.0, 9).unwrap();
        let u = GraphPatch::from_fn(*spec.grid(), quartic).into_values();
        let e = evaluate(&u, &spec).unwrap();
        assert!(e.admissible);
        assert!(e.residual_norm <= 1e-12);
    }

    #[test]
    fn manufacture_rejects_saddle() {
        let err = manufacture(|x| x[0] * x[0] - x[1] * x[1] + x[2] * x[2], 3, 1, 1.0, 7).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn paraboloid_rhs_is_constant() {
        let spec = manufacture(|x| x.iter().map(|v| v * v).sum::<f64>() / 2.0, 3, 1, 0.5, 9).unwrap();
        // Curvatures of the paraboloid are 1/w^3 (radial) and 1/w: not
        // constant, but close to F(1,1,1) = 1/3 near the vertex.
        let centre = spec.grid().nearest(&[0.0; 3]);
        assert!((spec.rhs()[centre] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn large_paraboloid_gives_positive_residual() {
        let spec = ProblemSpec::new(3, 1, 1.0, 9, |_| 1e-6, |_| 0.0).unwrap();
        let u = GraphPatch::from_fn(*spec.grid(), |x| 50.0 * x.iter().map(|v| v * v).sum::<f64>())
            .into_values();
        let res = residual(&u, &spec).unwrap();
        for node in spec.interior_nodes() {
            assert!(res[node] > 0.0);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences_and_assembly() {
        let spec = manufacture(quartic, 3, 1, 1.0, 9).unwrap();
        let grid = *spec.grid();
        let u: Vec<f64> = GraphPatch::from_fn(grid, |x| quartic(x) + 0.05 * x[1] * x[2] + 0.02 * x[0].powi(3))
            .into_values();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let nodes = spec.interior_nodes();
        let jac = assemble_jacobian(&u, &spec).unwrap();
        for _ in 0..5 {
            let v: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let jv = jacobian_apply(&u, &spec, &v).unwrap();
            let eps = 1e-6 * max_abs(&u);
            let plus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
            let minus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
            let rp = residual(&plus, &spec).unwrap();
            let rm = residual(&minus, &spec).unwrap();
            let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
            let diff: Vec<f64> = fd.iter().zip(&jv).map(|(a, b)| a - b).collect();
            assert!(max_abs(&diff) <= 1e-6 * max_abs(&jv), "{}", max_abs(&diff) / max_abs(&jv));

            // The assembled matrix acts on interior values with zero boundary.
            let mut v0 = v.clone();
            for i in 0..grid.len() {
                if grid.is_boundary_layer(i) {
                    v0[i] = 0.0;
                }
            }
            let jv0 = jacobian_apply(&u, &spec, &v0).unwrap();
            let x: Vec<f64> = nodes.iter().map(|&i| v0[i]).collect();
            let mut y = vec![0.0; nodes.len()];
            jac.mul_vec(&x, &mut y);
            for (yi, &node) in y.iter().zip(&nodes) {
                assert!((yi - jv0[node]).abs() <= 1e-10 * (1.0 + jv0[node].abs()));
            }
        }
        let zero = jacobian_apply(&u, &spec, &vec![0.0; grid.len()]).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn newton_recovers_manufactured_solution() {
        let spec = manufacture(quartic, 3, 1, 1.0, 11).unwrap();
        // The automatic guess is the exact solution here; start elsewhere.
        let guess = GraphPatch::from_fn(*spec.grid(), |x| {
            quartic(x) + 0.3 * x.iter().map(|v| 1.0 - v * v).product::<f64>()
        });
        let spec = spec.with_initial_guess(InitialGuess::Field(guess.into_values())).unwrap();
        let run = newton_solve(&spec, &SolverConfig::default()).unwrap();
        assert!(run.converged(), "{:?}", run.trace);
        let exact = GraphPatch::from_fn(*spec.grid(), quartic).into_values();
        let err = run.state.u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "{err}");
        assert!(run.state.step >= 3);
        for pair in run.trace.windows(2) {
            assert!(pair[1].residual_max < pair[0].residual_max);
        }
    }

    #[test]
    fn auto_guess_falls_back_to_boundary_extension() {
        let spec = manufacture(quartic, 3, 1, 1.0, 9).unwrap();
        let run = newton_solve(&spec, &SolverConfig::default()).unwrap();
        assert!(run.converged());
        assert_eq!(run.state.step, 0);
    }

    #[test]
    fn inadmissible_initial_guess_is_rejected() {
        let spec = manufacture(quartic, 3, 1, 1.0, 7)
            .unwrap()
            .with_initial_guess(InitialGuess::Field(vec![0.0; 343]))
            .unwrap();
        assert!(matches!(newton_solve(&spec, &SolverConfig::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn rejects_nonpositive_rhs() {
        assert!(ProblemSpec::new(3, 1, 1.0, 7, |x| x[0], |_| 0.0).is_err());
    }
}
