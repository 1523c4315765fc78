//! Elementary symmetric polynomials and their deletions.
//!
//! All evaluation goes through the coefficient recurrence for
//! `prod_i (t + lambda_i)`, which costs O(n k) and is forward stable for
//! entries of one sign. Minors `sigma_k(lambda | i)` and
//! `sigma_k(lambda | ij)` run the same recurrence with entries skipped.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite vector of principal curvatures, `n >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Argument(format!(
                "spectrum needs at least 2 entries, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "spectrum entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_ordered(self) -> OrderedSpectrum {
        OrderedSpectrum::from_unsorted(self)
    }
}

impl Deref for Spectrum {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A spectrum sorted in descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedSpectrum(Vec<f64>);

impl OrderedSpectrum {
    /// Accepts values that are already descending.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let s = Spectrum::new(values)?;
        if s.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Argument(format!(
                "spectrum is not sorted descending: {:?}",
                s.values()
            )));
        }
        Ok(Self(s.0))
    }

    /// Like [`OrderedSpectrum::new`] but also requires `lambda_n > 0`.
    pub fn positive(values: Vec<f64>) -> Result<Self> {
        let s = Self::new(values)?;
        if !s.is_convex() {
            return Err(Error::Domain(format!(
                "spectrum is outside the positive cone: {:?}",
                s.values()
            )));
        }
        Ok(s)
    }

    pub fn from_unsorted(s: Spectrum) -> Self {
        let mut v = s.0;
        v.sort_by(|a, b| b.total_cmp(a));
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Positive cone membership: the smallest entry is strictly positive.
    pub fn is_convex(&self) -> bool {
        self.0.last().is_some_and(|&v| v > 0.0)
    }
}

impl Deref for OrderedSpectrum {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// All coefficients `sigma_0 ..= sigma_n` of the entries not listed in `skip`.
fn coefficients(lambda: &[f64], skip: &[usize], top: usize) -> Vec<f64> {
    let mut e = vec![0.0; top + 1];
    e[0] = 1.0;
    let mut used = 0usize;
    for (i, &x) in lambda.iter().enumerate() {
        if skip.contains(&i) {
            continue;
        }
        used += 1;
        for j in (1..=used.min(top)).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// Binomial coefficient as a float (exact for the small sizes used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Every `sigma_j(lambda)` for `j = 0..=n`.
pub fn all_sigmas(lambda: &[f64]) -> Vec<f64> {
    coefficients(lambda, &[], lambda.len())
}

/// `sigma_k` with the convention `sigma_k = 0` for `k < 0` or `k > n`.
pub fn sigma_ext(k: i64, lambda: &[f64]) -> f64 {
    if k < 0 || k as usize > lambda.len() {
        return 0.0;
    }
    coefficients(lambda, &[], k as usize)[k as usize]
}

/// `sigma_k(lambda|i)` with the same zero convention as [`sigma_ext`].
pub fn sigma_minor_ext(k: i64, lambda: &[f64], i: usize) -> f64 {
    if k < 0 || k as usize > lambda.len().saturating_sub(1) {
        return 0.0;
    }
    coefficients(lambda, &[i], k as usize)[k as usize]
}

/// `sigma_k(lambda|ij)` with the same zero convention as [`sigma_ext`].
pub fn sigma_minor2_ext(k: i64, lambda: &[f64], i: usize, j: usize) -> f64 {
    if k < 0 || k as usize > lambda.len().saturating_sub(2) {
        return 0.0;
    }
    coefficients(lambda, &[i, j], k as usize)[k as usize]
}

/// The k-th elementary symmetric polynomial, `0 <= k <= n`.
pub fn sigma(k: usize, lambda: &[f64]) -> Result<f64> {
    if k > lambda.len() {
        return Err(Error::Argument(format!(
            "sigma_{k} undefined for n = {}",
            lambda.len()
        )));
    }
    Ok(coefficients(lambda, &[], k)[k])
}

/// `sigma_k` of the spectrum with entry `i` removed.
pub fn sigma_minor(k: usize, lambda: &[f64], i: usize) -> Result<f64> {
    let n = lambda.len();
    if i >= n {
        return Err(Error::Argument(format!("index {i} out of range for n = {n}")));
    }
    if k + 1 > n {
        return Err(Error::Argument(format!(
            "sigma_{k}(lambda|i) undefined for n = {n}"
        )));
    }
    Ok(coefficients(lambda, &[i], k)[k])
}

/// `sigma_k` of the spectrum with entries `i` and `j` removed.
pub fn sigma_minor2(k: usize, lambda: &[f64], i: usize, j: usize) -> Result<f64> {
    let n = lambda.len();
    if i == j {
        return Err(Error::Argument(format!(
            "double deletion needs distinct indices, got i = j = {i}"
        )));
    }
    if i >= n || j >= n {
        return Err(Error::Argument(format!(
            "indices ({i}, {j}) out of range for n = {n}"
        )));
    }
    if k + 2 > n {
        return Err(Error::Argument(format!(
            "sigma_{k}(lambda|ij) undefined for n = {n}"
        )));
    }
    Ok(coefficients(lambda, &[i, j], k)[k])
}

/// Residuals of the four basic identities for `1 <= k <= n-1`:
///
/// * (a) `sigma_k = lambda_i sigma_{k-1}(lambda|i) + sigma_k(lambda|i)`
/// * (b) `sum_i sigma_k(lambda|i) = (n-k) sigma_k`
/// * (c) `sum_i lambda_i sigma_{k-1}(lambda|i) = k sigma_k`
/// * (d) `sum_i lambda_i^2 sigma_{k-1}(lambda|i) = sigma_1 sigma_k - (k+1) sigma_{k+1}`
///
/// Each residual is divided by `1 + reference`, where the reference is the
/// largest term of that identity evaluated at `|lambda|`. That is the
/// magnitude floating-point cancellation is measured against when entries
/// have mixed signs. When `index` is `None`, (a) reports the worst `i`.
pub fn identity_residuals(k: usize, lambda: &[f64], index: Option<usize>) -> Result<[f64; 4]> {
    let n = lambda.len();
    if k < 1 || k + 1 > n {
        return Err(Error::Argument(format!(
            "identity residuals need 1 <= k <= n-1, got k = {k}, n = {n}"
        )));
    }
    if let Some(i) = index {
        if i >= n {
            return Err(Error::Argument(format!("index {i} out of range for n = {n}")));
        }
    }
    let abs: Vec<f64> = lambda.iter().map(|v| v.abs()).collect();
    let s = all_sigmas(lambda);
    let sa = all_sigmas(&abs);
    let ki = k as i64;

    let minors_k: Vec<f64> = (0..n).map(|i| sigma_minor_ext(ki, lambda, i)).collect();
    let minors_km1: Vec<f64> = (0..n).map(|i| sigma_minor_ext(ki - 1, lambda, i)).collect();
    let abs_k: Vec<f64> = (0..n).map(|i| sigma_minor_ext(ki, &abs, i)).collect();
    let abs_km1: Vec<f64> = (0..n).map(|i| sigma_minor_ext(ki - 1, &abs, i)).collect();

    let a_range: Vec<usize> = match index {
        Some(i) => vec![i],
        None => (0..n).collect(),
    };
    let a = a_range
        .into_iter()
        .map(|i| {
            let r = (s[k] - lambda[i] * minors_km1[i] - minors_k[i]).abs();
            r / (1.0 + sa[k])
        })
        .fold(0.0, f64::max);

    let sum_b: f64 = minors_k.iter().sum();
    let ref_b = abs_k.iter().sum::<f64>().max((n - k) as f64 * sa[k]);
    let b = (sum_b - (n - k) as f64 * s[k]).abs() / (1.0 + ref_b);

    let sum_c: f64 = (0..n).map(|i| lambda[i] * minors_km1[i]).sum();
    let ref_c = (0..n).map(|i| abs[i] * abs_km1[i]).sum::<f64>().max(k as f64 * sa[k]);
    let c = (sum_c - k as f64 * s[k]).abs() / (1.0 + ref_c);

    let sum_d: f64 = (0..n).map(|i| lambda[i] * lambda[i] * minors_km1[i]).sum();
    let next = if k < n { s[k + 1] } else { 0.0 };
    let next_abs = if k < n { sa[k + 1] } else { 0.0 };
    let ref_d = (0..n)
        .map(|i| abs[i] * abs[i] * abs_km1[i])
        .sum::<f64>()
        .max(sa[1] * sa[k])
        .max((k + 1) as f64 * next_abs);
    let d = (sum_d - s[1] * s[k] + (k + 1) as f64 * next).abs() / (1.0 + ref_d);

    Ok([a, b, c, d])
}
