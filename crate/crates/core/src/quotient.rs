//! The curvature quotient operator `F = sigma_n / sigma_k`.
//!
//! Derivatives are taken in eigenvalue coordinates from minor formulas, so
//! repeated eigenvalues need no special handling. The second derivatives
//! at a diagonal point split into `F^{ii,jj}` (the Hessian in `lambda`) and
//! the mixed entries `F^{pq,qp}`, `p != q`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::symfun::{all_sigmas, sigma_ext, sigma_minor2_ext, sigma_minor_ext, OrderedSpectrum};

/// Default separation below which the divided-difference identity is not checked.
pub const DEFAULT_SEPARATION: f64 = 1e-3;

/// A signed gap together with the magnitude of the terms it was built from.
///
/// `value >= 0` means the inequality holds. Tolerances are applied against
/// [`Gap::scale`], i.e. `1 + terms_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gap {
    pub value: f64,
    pub terms_max: f64,
}

impl Gap {
    pub fn new(value: f64, terms: &[f64]) -> Self {
        let terms_max = terms.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
        Self { value, terms_max }
    }

    pub fn scale(&self) -> f64 {
        1.0 + self.terms_max
    }

    /// Gap divided by [`Gap::scale`].
    pub fn normalized(&self) -> f64 {
        self.value / self.scale()
    }

    /// Gap divided by the largest term alone (strict relative form).
    pub fn relative(&self) -> f64 {
        if self.terms_max == 0.0 {
            self.value
        } else {
            self.value / self.terms_max
        }
    }
}

/// `F = sigma_n / sigma_k` on `R^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuotientOperator {
    n: usize,
    k: usize,
}

/// Value and derivatives of `F` at a diagonal point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorJet {
    pub value: f64,
    /// `F^{ii} = dF/dlambda_i`.
    pub grad: Vec<f64>,
    /// `F^{ii,jj}`, row-major `n x n`.
    pub hess_diag: Vec<f64>,
    /// `F^{pq,qp}` for `p != q`, row-major `n x n`, zero diagonal.
    pub hess_off: Vec<f64>,
}

impl OperatorJet {
    pub fn n(&self) -> usize {
        self.grad.len()
    }

    pub fn hess(&self, p: usize, q: usize) -> f64 {
        self.hess_diag[p * self.n() + q]
    }

    pub fn off(&self, p: usize, q: usize) -> f64 {
        self.hess_off[p * self.n() + q]
    }
}

/// Terms of the concavity inequality; `gap = lhs_hessian + lhs_top + rhs_gradient - rhs_top`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcavityTerms {
    /// `-sum_{ij} F^{ii,jj} xi_i xi_j`
    pub lhs_hessian: f64,
    /// `-F^{11} xi_1^2 / lambda_1`
    pub lhs_top: f64,
    /// `(2/F) (sum_i F^{ii} xi_i)^2`
    pub rhs_gradient: f64,
    /// `F^{11} xi_1^2 / (2 (n-1) lambda_1)`
    pub rhs_top: f64,
}

impl ConcavityTerms {
    pub fn gap(&self) -> Gap {
        Gap::new(
            self.lhs_hessian + self.lhs_top + self.rhs_gradient - self.rhs_top,
            &[self.lhs_hessian, self.lhs_top, self.rhs_gradient, self.rhs_top],
        )
    }
}

/// Result of evaluating `F` on a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixJet {
    pub value: f64,
    /// Eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// `dF/dW = sum_p F^{pp} v_p v_p^T`, when requested.
    pub derivative: Option<DMatrix<f64>>,
}

impl QuotientOperator {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Argument(format!("operator needs n >= 2, got {n}")));
        }
        if k >= n {
            return Err(Error::Argument(format!(
                "operator needs k < n, got k = {k}, n = {n}"
            )));
        }
        Ok(Self { n, k })
    }

    /// `sigma_n / sigma_{n-2}` (for `n = 2` this is `sigma_2 / sigma_0`).
    pub fn standard(n: usize) -> Result<Self> {
        Self::new(n, n.saturating_sub(2))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Degree of homogeneity, `n - k`.
    pub fn degree(&self) -> usize {
        self.n - self.k
    }

    fn check_len(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.n {
            return Err(Error::Argument(format!(
                "spectrum has {} entries, operator expects {}",
                lambda.len(),
                self.n
            )));
        }
        Ok(())
    }

    fn denominator(&self, lambda: &[f64]) -> Result<(f64, f64)> {
        self.check_len(lambda)?;
        let s = all_sigmas(lambda);
        let (num, den) = (s[self.n], s[self.k]);
        if den == 0.0 || !den.is_finite() {
            return Err(Error::Singular {
                k: self.k,
                value: den,
                node: None,
            });
        }
        Ok((num, den))
    }

    pub fn value(&self, lambda: &[f64]) -> Result<f64> {
        let (num, den) = self.denominator(lambda)?;
        Ok(num / den)
    }

    pub fn jet(&self, lambda: &[f64]) -> Result<OperatorJet> {
        let (sn, sk) = self.denominator(lambda)?;
        let n = self.n;
        let (ni, ki) = (n as i64, self.k as i64);
        let f = sn / sk;
        let sk2 = sk * sk;
        let sk3 = sk2 * sk;

        // sigma_n^{pp} and sigma_k^{pp}
        let dn: Vec<f64> = (0..n).map(|p| sigma_minor_ext(ni - 1, lambda, p)).collect();
        let dk: Vec<f64> = (0..n).map(|p| sigma_minor_ext(ki - 1, lambda, p)).collect();

        let grad: Vec<f64> = (0..n).map(|p| dn[p] / sk - sn * dk[p] / sk2).collect();

        let mut hess_diag = vec![0.0; n * n];
        let mut hess_off = vec![0.0; n * n];
        for p in 0..n {
            hess_diag[p * n + p] = -2.0 * dn[p] * dk[p] / sk2 + 2.0 * sn * dk[p] * dk[p] / sk3;
            for r in (p + 1)..n {
                let dn2 = sigma_minor2_ext(ni - 2, lambda, p, r);
                let dk2 = sigma_minor2_ext(ki - 2, lambda, p, r);
                let h = dn2 / sk - dn[p] * dk[r] / sk2 - dn[r] * dk[p] / sk2 - sn * dk2 / sk2
                    + 2.0 * sn * dk[p] * dk[r] / sk3;
                hess_diag[p * n + r] = h;
                hess_diag[r * n + p] = h;
                // sigma^{pq,qp} = -sigma_{m-2}(lambda|pq)
                let o = -dn2 / sk + sn * dk2 / sk2;
                hess_off[p * n + r] = o;
                hess_off[r * n + p] = o;
            }
        }
        Ok(OperatorJet {
            value: f,
            grad,
            hess_diag,
            hess_off,
        })
    }

    /// Closed form `F^{ii} = F^2 / lambda_i^2 * sum_{k != i} 1/lambda_k`, valid for `k = n-2`
    /// on the positive cone.
    pub fn grad_alt(&self, lambda: &OrderedSpectrum) -> Result<Vec<f64>> {
        self.check_len(lambda)?;
        if self.k + 2 != self.n {
            return Err(Error::Argument(format!(
                "closed-form gradient needs k = n-2, got k = {}, n = {}",
                self.k, self.n
            )));
        }
        require_positive(lambda)?;
        let f = self.value(lambda)?;
        let inv_sum: f64 = lambda.iter().map(|v| 1.0 / v).sum();
        Ok(lambda
            .iter()
            .map(|&li| f * f / (li * li) * (inv_sum - 1.0 / li))
            .collect())
    }

    /// `|-F^{pq,qp} - (F^{pp} - F^{qq}) / (lambda_q - lambda_p)|`.
    pub fn divided_difference_gap(
        &self,
        lambda: &[f64],
        p: usize,
        q: usize,
        separation: f64,
    ) -> Result<Gap> {
        self.check_len(lambda)?;
        if p == q || p >= self.n || q >= self.n {
            return Err(Error::Argument(format!(
                "need distinct in-range indices, got ({p}, {q})"
            )));
        }
        let sep = (lambda[p] - lambda[q]).abs();
        if sep <= separation {
            return Err(Error::Precondition(format!(
                "eigenvalues {p} and {q} are {sep:e} apart, below separation {separation:e}"
            )));
        }
        let jet = self.jet(lambda)?;
        let lhs = -jet.off(p, q);
        let rhs = (jet.grad[p] - jet.grad[q]) / (lambda[q] - lambda[p]);
        Ok(Gap::new(-(lhs - rhs).abs(), &[lhs, rhs]))
    }

    /// Terms of the concavity inequality for `F = sigma_n / sigma_{n-2}`, `n >= 3`,
    /// on a descending positive spectrum.
    pub fn concavity_terms(&self, lambda: &OrderedSpectrum, xi: &[f64]) -> Result<ConcavityTerms> {
        self.check_len(lambda)?;
        if self.n < 3 || self.k + 2 != self.n {
            return Err(Error::Argument(format!(
                "concavity inequality needs n >= 3 and k = n-2, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        if xi.len() != self.n {
            return Err(Error::Argument(format!(
                "direction has {} entries, expected {}",
                xi.len(),
                self.n
            )));
        }
        require_positive(lambda)?;
        let n = self.n;
        let jet = self.jet(lambda)?;
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += jet.hess(i, j) * xi[i] * xi[j];
            }
        }
        let lin: f64 = jet.grad.iter().zip(xi).map(|(g, x)| g * x).sum();
        let top = jet.grad[0] * xi[0] * xi[0] / lambda[0];
        Ok(ConcavityTerms {
            lhs_hessian: -quad,
            lhs_top: -top,
            rhs_gradient: 2.0 / jet.value * lin * lin,
            rhs_top: top / (2.0 * (n - 1) as f64),
        })
    }

    pub fn concavity_gap(&self, lambda: &OrderedSpectrum, xi: &[f64]) -> Result<Gap> {
        Ok(self.concavity_terms(lambda, xi)?.gap())
    }

    /// `F` of the eigenvalues of a symmetric matrix, with the first Frechet
    /// derivative on request.
    pub fn matrix_jet(&self, w: &DMatrix<f64>, need_derivative: bool) -> Result<MatrixJet> {
        if w.nrows() != self.n || w.ncols() != self.n {
            return Err(Error::Argument(format!(
                "matrix is {}x{}, operator expects {}x{}",
                w.nrows(),
                w.ncols(),
                self.n,
                self.n
            )));
        }
        let norm = w.amax();
        let asym = (w - w.transpose()).amax();
        if asym > 1e-12 * (1.0 + norm) {
            return Err(Error::Argument(format!(
                "matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let (eigenvalues, vectors) = sorted_eigen(w.clone());
        if !need_derivative {
            let value = self.value(&eigenvalues)?;
            return Ok(MatrixJet {
                value,
                eigenvalues,
                derivative: None,
            });
        }
        let jet = self.jet(&eigenvalues)?;
        let mut d = DMatrix::zeros(self.n, self.n);
        for (p, g) in jet.grad.iter().enumerate() {
            let v = vectors.column(p);
            d += *g * v * v.transpose();
        }
        Ok(MatrixJet {
            value: jet.value,
            eigenvalues,
            derivative: Some(d),
        })
    }
}

/// `sigma_{n-k}/sigma_{n-l}(lambda) - (sigma_k/sigma_l)(1/lambda)` as an absolute gap,
/// for `1 <= l < k <= n` and a strictly positive spectrum.
pub fn duality_gap(k: usize, l: usize, lambda: &[f64]) -> Result<Gap> {
    let n = lambda.len();
    if !(1 <= l && l < k && k <= n) {
        return Err(Error::Argument(format!(
            "duality needs 1 <= l < k <= n, got l = {l}, k = {k}, n = {n}"
        )));
    }
    require_positive(lambda)?;
    let inv: Vec<f64> = lambda.iter().map(|v| 1.0 / v).collect();
    let (n, k, l) = (n as i64, k as i64, l as i64);
    let lhs = sigma_ext(n - k, lambda) / sigma_ext(n - l, lambda);
    let rhs = sigma_ext(k, &inv) / sigma_ext(l, &inv);
    Ok(Gap::new(-(lhs - rhs).abs(), &[lhs, rhs]))
}

fn require_positive(lambda: &[f64]) -> Result<()> {
    if let Some(i) = lambda.iter().position(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "entry {i} = {} is not strictly positive",
            lambda[i]
        )));
    }
    Ok(())
}

/// Symmetric eigen-decomposition with eigenvalues sorted descending and
/// eigenvectors permuted to match (columns).
pub fn sorted_eigen(w: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = w.nrows();
    let eig = SymmetricEigen::new(w);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}
