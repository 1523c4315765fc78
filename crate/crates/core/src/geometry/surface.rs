//! Closed-form convex graphs with exact curvature oracles.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{point_shape, Grid, GraphPatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnalyticSurface {
    /// `u = R - sqrt(R^2 - |x|^2)`.
    Sphere { radius: f64 },
    /// `u = c |x|^2 / 2`.
    Paraboloid { c: f64 },
    /// `u = x^T A x / 2`, `A` row-major.
    Quadratic { n: usize, a: Vec<f64> },
    /// `u = (cosh(a |x|) - 1) / a`.
    Radial { a: f64 },
    /// `u = sum_i d_i x_i^2 / 2 + q x_1^4 / 12`.
    Quartic { diag: Vec<f64>, q: f64 },
}

impl AnalyticSurface {
    /// Builds a surface from a kind name and a flat parameter list.
    ///
    /// `quadratic` accepts either `n` diagonal entries or `n^2` row-major
    /// entries; `quartic` takes `n` diagonal entries followed by `q`.
    pub fn from_params(kind: &str, params: &[f64], n: usize) -> Result<Self> {
        let want = |k: usize| -> Result<()> {
            if params.len() != k {
                return Err(Error::Argument(format!(
                    "surface {kind:?} takes {k} parameter(s), got {}",
                    params.len()
                )));
            }
            Ok(())
        };
        match kind {
            "sphere" => {
                want(1)?;
                Ok(Self::Sphere { radius: params[0] })
            }
            "paraboloid" => {
                want(1)?;
                Ok(Self::Paraboloid { c: params[0] })
            }
            "radial" => {
                want(1)?;
                Ok(Self::Radial { a: params[0] })
            }
            "quadratic" => {
                let a = if params.len() == n {
                    let mut a = vec![0.0; n * n];
                    for i in 0..n {
                        a[i * n + i] = params[i];
                    }
                    a
                } else if params.len() == n * n {
                    params.to_vec()
                } else {
                    return Err(Error::Argument(format!(
                        "quadratic takes {n} or {} parameters, got {}",
                        n * n,
                        params.len()
                    )));
                };
                Ok(Self::Quadratic { n, a })
            }
            "quartic" => {
                want(n + 1)?;
                Ok(Self::Quartic {
                    diag: params[..n].to_vec(),
                    q: params[n],
                })
            }
            other => Err(Error::Argument(format!(
                "unknown surface kind {other:?} (expected sphere, paraboloid, quadratic, radial or quartic)"
            ))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Sphere { .. } => "sphere",
            Self::Paraboloid { .. } => "paraboloid",
            Self::Quadratic { .. } => "quadratic",
            Self::Radial { .. } => "radial",
            Self::Quartic { .. } => "quartic",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Self::Sphere { radius } => vec![*radius],
            Self::Paraboloid { c } => vec![*c],
            Self::Quadratic { a, .. } => a.clone(),
            Self::Radial { a } => vec![*a],
            Self::Quartic { diag, q } => {
                let mut p = diag.clone();
                p.push(*q);
                p
            }
        }
    }

    /// Checks that the surface is a strictly convex graph over `[-r, r]^n`.
    pub fn validate(&self, n: usize, r: f64) -> Result<()> {
        let fail = |msg: String| Err(Error::Argument(msg));
        match self {
            Self::Sphere { radius } => {
                if !(*radius > 0.0) || r * (n as f64).sqrt() >= *radius {
                    return fail(format!(
                        "sphere of radius {radius} is not a graph over [-{r}, {r}]^{n} (need r < R / sqrt(n))"
                    ));
                }
            }
            Self::Paraboloid { c } | Self::Radial { a: c } => {
                if !(*c > 0.0) {
                    return fail(format!("{} parameter must be positive, got {c}", self.kind()));
                }
            }
            Self::Quadratic { n: qn, a } => {
                if *qn != n || a.len() != n * n {
                    return fail(format!("quadratic form is {qn}-dimensional, grid is {n}"));
                }
                let m = DMatrix::from_row_slice(n, n, a);
                if (&m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
                    return fail("quadratic form matrix is not symmetric".into());
                }
                let min = m.symmetric_eigenvalues().min();
                if !(min > 0.0) {
                    return fail(format!(
                        "quadratic form is not positive definite (smallest eigenvalue {min})"
                    ));
                }
            }
            Self::Quartic { diag, q } => {
                if diag.len() != n {
                    return fail(format!("quartic has {} diagonal entries, grid is {n}", diag.len()));
                }
                if diag.iter().any(|d| !(*d > 0.0)) || !(*q >= 0.0) {
                    return fail(format!(
                        "quartic needs positive diagonal and q >= 0, got {diag:?}, {q}"
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let rho2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            Self::Sphere { radius } => radius - (radius * radius - rho2).sqrt(),
            Self::Paraboloid { c } => c * rho2 / 2.0,
            Self::Quadratic { n, a } => {
                let mut s = 0.0;
                for i in 0..*n {
                    for j in 0..*n {
                        s += x[i] * a[i * n + j] * x[j];
                    }
                }
                s / 2.0
            }
            Self::Radial { a } => ((a * rho2.sqrt()).cosh() - 1.0) / a,
            Self::Quartic { diag, q } => {
                let s: f64 = diag.iter().zip(x).map(|(d, v)| d * v * v).sum();
                s / 2.0 + q * x[0].powi(4) / 12.0
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let rho2: f64 = x.iter().map(|v| v * v).sum();
        let rho = rho2.sqrt();
        match self {
            Self::Sphere { radius } => {
                let s = (radius * radius - rho2).sqrt();
                x.iter().map(|v| v / s).collect()
            }
            Self::Paraboloid { c } => x.iter().map(|v| c * v).collect(),
            Self::Quadratic { a, .. } => (0..n)
                .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
                .collect(),
            Self::Radial { a } => {
                if rho == 0.0 {
                    return vec![0.0; n];
                }
                let d = (a * rho).sinh();
                x.iter().map(|v| d * v / rho).collect()
            }
            Self::Quartic { diag, q } => {
                let mut g: Vec<f64> = diag.iter().zip(x).map(|(d, v)| d * v).collect();
                g[0] += q * x[0].powi(3) / 3.0;
                g
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let rho2: f64 = x.iter().map(|v| v * v).sum();
        let rho = rho2.sqrt();
        match self {
            Self::Sphere { radius } => {
                let s2 = radius * radius - rho2;
                let s = s2.sqrt();
                DMatrix::from_fn(n, n, |i, j| {
                    let d = if i == j { 1.0 / s } else { 0.0 };
                    d + x[i] * x[j] / (s2 * s)
                })
            }
            Self::Paraboloid { c } => DMatrix::identity(n, n) * *c,
            Self::Quadratic { a, .. } => DMatrix::from_row_slice(n, n, a),
            Self::Radial { a } => {
                if rho == 0.0 {
                    return DMatrix::identity(n, n) * *a;
                }
                // u' = sinh(a rho), u'' = a cosh(a rho)
                let d1 = (a * rho).sinh();
                let d2 = a * (a * rho).cosh();
                DMatrix::from_fn(n, n, |i, j| {
                    let e = x[i] * x[j] / rho2;
                    let id = if i == j { 1.0 } else { 0.0 };
                    d2 * e + d1 / rho * (id - e)
                })
            }
            Self::Quartic { diag, q } => {
                let mut h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone()));
                h[(0, 0)] += q * x[0] * x[0];
                h
            }
        }
    }

    /// Exact principal curvatures at `x`, descending.
    ///
    /// Rotationally symmetric surfaces use the profile formulas
    /// `u''/w^3` (radial) and `u'/(rho w)` (tangential); the others evaluate
    /// the shape operator on the exact derivatives.
    pub fn curvatures(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let rho = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let radial = |d1: f64, d2: f64, tangential_at_zero: f64| {
            let w = (1.0 + d1 * d1).sqrt();
            let kr = d2 / (w * w * w);
            let kt = if rho == 0.0 {
                tangential_at_zero
            } else {
                d1 / (rho * w)
            };
            let mut v = vec![kt; n];
            v[0] = kr;
            v.sort_by(|a, b| b.total_cmp(a));
            v
        };
        match self {
            Self::Sphere { radius } => vec![1.0 / radius; n],
            Self::Paraboloid { c } => radial(c * rho, *c, *c),
            Self::Radial { a } => radial((a * rho).sinh(), a * (a * rho).cosh(), *a),
            _ => {
                let du = self.gradient(x);
                let shape = point_shape(&du, &self.hessian(x)).shape;
                let mut v: Vec<f64> = shape.symmetric_eigenvalues().iter().copied().collect();
                v.sort_by(|a, b| b.total_cmp(a));
                v
            }
        }
    }

    /// Samples the surface on a grid and attaches the exact curvature field
    /// (`n` values per node, descending).
    pub fn sample(&self, grid: Grid) -> Result<(GraphPatch, Vec<f64>)> {
        self.validate(grid.n(), grid.r())?;
        let mut u = Vec::with_capacity(grid.len());
        let mut exact = Vec::with_capacity(grid.len() * grid.n());
        for node in 0..grid.len() {
            let x = grid.position(node);
            u.push(self.value(&x));
            exact.extend(self.curvatures(&x));
        }
        Ok((GraphPatch::new(grid, u)?, exact))
    }
}

/// Samples `kind(params)` on the `m^n` grid over `[-r, r]^n`.
pub fn analytic_surface(
    kind: &str,
    params: &[f64],
    n: usize,
    r: f64,
    m: usize,
) -> Result<(AnalyticSurface, GraphPatch, Vec<f64>)> {
    let s = AnalyticSurface::from_params(kind, params, n)?;
    let (patch, exact) = s.sample(Grid::new(n, r, m)?)?;
    Ok((s, patch, exact))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(s: &AnalyticSurface, x: &[f64]) {
        let n = x.len();
        let h = 1e-5;
        let g = s.gradient(x);
        let hess = s.hessian(x);
        for i in 0..n {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            let fd = (s.value(&a) - s.value(&b)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "{} d{i}: {fd} vs {}", s.kind(), g[i]);
            let ga = s.gradient(&a);
            let gb = s.gradient(&b);
            for j in 0..n {
                let fd2 = (ga[j] - gb[j]) / (2.0 * h);
                assert!((fd2 - hess[(i, j)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn closed_forms_are_consistent() {
        let x = [0.3, -0.2, 0.4];
        let surfaces = [
            AnalyticSurface::Sphere { radius: 2.0 },
            AnalyticSurface::Paraboloid { c: 1.5 },
            AnalyticSurface::from_params("quadratic", &[2.0, 0.5, 0.0, 0.5, 1.0, 0.1, 0.0, 0.1, 3.0], 3)
                .unwrap(),
            AnalyticSurface::Radial { a: 1.0 },
            AnalyticSurface::Quartic { diag: vec![1.0, 2.0, 0.5], q: 1.0 },
        ];
        for s in &surfaces {
            fd_check(s, &x);
            // oracle curvatures vs shape operator of the exact derivatives
            let shape = point_shape(&s.gradient(&x), &s.hessian(&x)).shape;
            let mut ev: Vec<f64> = shape.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(|a, b| b.total_cmp(a));
            for (a, b) in ev.iter().zip(s.curvatures(&x)) {
                assert!((a - b).abs() < 1e-10, "{}: {a} vs {b}", s.kind());
            }
        }
    }

    #[test]
    fn curvature_examples() {
        let sphere = AnalyticSurface::Sphere { radius: 3.0 };
        assert_eq!(sphere.curvatures(&[0.1, 0.2, 0.3]), vec![1.0 / 3.0; 3]);
        let quad = AnalyticSurface::from_params("quadratic", &[3.0, 1.0, 2.0], 3).unwrap();
        assert_eq!(quad.curvatures(&[0.0; 3]), vec![3.0, 2.0, 1.0]);
        let radial = AnalyticSurface::Radial { a: 1.0 };
        assert_eq!(radial.value(&[0.0, 0.5]), 0.5f64.cosh() - 1.0);
        assert_eq!(radial.curvatures(&[0.0, 0.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn rejects_non_convex() {
        assert!(AnalyticSurface::Sphere { radius: 1.5 }.validate(3, 1.0).is_err());
        assert!(AnalyticSurface::Sphere { radius: 2.0 }.validate(3, 1.0).is_ok());
        assert!(AnalyticSurface::Paraboloid { c: -1.0 }.validate(2, 1.0).is_err());
        let saddle = AnalyticSurface::from_params("quadratic", &[1.0, -1.0, 1.0], 3).unwrap();
        assert!(saddle.validate(3, 1.0).is_err());
        assert!(AnalyticSurface::from_params("torus", &[1.0], 3).is_err());
        assert!(AnalyticSurface::from_params("sphere", &[1.0, 2.0], 3).is_err());
    }
}
