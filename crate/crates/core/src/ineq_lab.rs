//! Sampling campaigns over the ordered positive cone.
//!
//! Every check turns one inequality of the operator `sigma_n / sigma_{n-2}`
//! into a signed gap (nonnegative when the inequality holds), normalized by
//! `1 + max |term|`. Where an inequality hides a dimensional constant, the
//! record also carries the ratio that constant must dominate.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quotient::{duality_gap, Gap, QuotientOperator, DEFAULT_SEPARATION};
use crate::symfun::{identity_residuals, OrderedSpectrum};

/// Samples per independent random sub-stream.
const CHUNK: usize = 1024;
/// Violating records kept per row for replay.
const MAX_EXAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// Entries log-uniform over `[1e-3, 1e3]`.
    LogUniform,
    /// Entries uniform over `[1e-3, 1]`, each replaced with probability 0.1
    /// by a spike log-uniform over `[10, 1e3]`.
    Uniform,
    /// `lambda_n` log-uniform over `[1e-3, 1]`, `lambda_1 / lambda_n` log-uniform
    /// over `[1, 1e9]`, middle entries log-uniform in between.
    Aniso,
}

impl FromStr for Distribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loguniform" => Ok(Self::LogUniform),
            "uniform" => Ok(Self::Uniform),
            "aniso" => Ok(Self::Aniso),
            other => Err(Error::Argument(format!(
                "unknown distribution {other:?} (expected loguniform, uniform or aniso)"
            ))),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LogUniform => "loguniform",
            Self::Uniform => "uniform",
            Self::Aniso => "aniso",
        })
    }
}

/// Deterministic generator of descending, strictly positive spectra.
#[derive(Debug, Clone)]
pub struct ConeSampler {
    n: usize,
    distribution: Distribution,
    rng: ChaCha8Rng,
}

impl ConeSampler {
    pub fn new(n: usize, distribution: Distribution, seed: u64) -> Self {
        Self::substream(n, distribution, seed, 0)
    }

    /// Independent sub-stream `stream` of the generator for `(n, distribution, seed)`.
    pub fn substream(n: usize, distribution: Distribution, seed: u64, stream: u64) -> Self {
        let tag = (n as u64) << 8 | distribution as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        rng.set_stream(stream);
        Self {
            n,
            distribution,
            rng,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        10f64.powf(self.rng.random_range(lo..=hi))
    }

    pub fn sample(&mut self) -> OrderedSpectrum {
        let n = self.n;
        let mut v: Vec<f64> = match self.distribution {
            Distribution::LogUniform => (0..n).map(|_| self.log_uniform(-3.0, 3.0)).collect(),
            Distribution::Uniform => (0..n)
                .map(|_| {
                    if self.rng.random_bool(0.1) {
                        self.log_uniform(1.0, 3.0)
                    } else {
                        self.rng.random_range(1e-3..=1.0)
                    }
                })
                .collect(),
            Distribution::Aniso => {
                let low = self.rng.random_range(-3.0..=0.0);
                let span = self.rng.random_range(0.0..=9.0);
                let mut v = vec![10f64.powf(low), 10f64.powf(low + span)];
                for _ in 2..n {
                    v.push(self.log_uniform(low, low + span));
                }
                v
            }
        };
        v.sort_by(|a, b| b.total_cmp(a));
        OrderedSpectrum::positive(v).expect("sampler emits positive finite spectra")
    }

    /// A uniformly random unit direction.
    pub fn direction(&mut self) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..self.n).map(|_| self.rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }
}

/// Which inequality or identity a record certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum LemmaId {
    Identities,
    Duality,
    DividedDifference,
    OffDiagonalSign,
    PairLower,
    PairUpper,
    GradElementwise,
    GradSumLower,
    GradSumUpper,
    Euler,
    WeightedSquaresLower,
    WeightedSquaresUpper,
    SmallestLower,
    SmallestUpper,
    Concavity,
}

impl LemmaId {
    pub const ALL: [LemmaId; 15] = [
        Self::Identities,
        Self::Duality,
        Self::DividedDifference,
        Self::OffDiagonalSign,
        Self::PairLower,
        Self::PairUpper,
        Self::GradElementwise,
        Self::GradSumLower,
        Self::GradSumUpper,
        Self::Euler,
        Self::WeightedSquaresLower,
        Self::WeightedSquaresUpper,
        Self::SmallestLower,
        Self::SmallestUpper,
        Self::Concavity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Identities => "identities",
            Self::Duality => "duality",
            Self::DividedDifference => "divided-difference",
            Self::OffDiagonalSign => "off-diagonal-sign",
            Self::PairLower => "pair-lower",
            Self::PairUpper => "pair-upper",
            Self::GradElementwise => "grad-elementwise",
            Self::GradSumLower => "grad-sum-lower",
            Self::GradSumUpper => "grad-sum-upper",
            Self::Euler => "euler",
            Self::WeightedSquaresLower => "weighted-squares-lower",
            Self::WeightedSquaresUpper => "weighted-squares-upper",
            Self::SmallestLower => "smallest-lower",
            Self::SmallestUpper => "smallest-upper",
            Self::Concavity => "concavity",
        }
    }

    /// Candidate bound for the implied constant of this row, if it has one.
    pub fn candidate(&self, n: usize) -> Option<f64> {
        let nf = n as f64;
        match self {
            Self::PairUpper => Some(nf * (nf - 1.0) / 2.0),
            Self::GradSumLower => Some(nf),
            Self::GradSumUpper => Some(2.0),
            Self::WeightedSquaresUpper => Some(nf * (nf - 1.0)),
            Self::SmallestUpper => Some(nf),
            _ => None,
        }
    }
}

impl fmt::Display for LemmaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One evaluated predicate on one spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRecord {
    pub lemma: LemmaId,
    pub lambda: OrderedSpectrum,
    /// Normalized gap; negative means the predicate is violated.
    pub gap: f64,
    pub implied_constant: Option<f64>,
}

impl GapRecord {
    fn new(lemma: LemmaId, lambda: &OrderedSpectrum, gap: Gap, implied: Option<f64>) -> Self {
        Self {
            lemma,
            lambda: lambda.clone(),
            gap: gap.normalized(),
            implied_constant: implied,
        }
    }
}

fn lab_operator(lambda: &OrderedSpectrum) -> Result<QuotientOperator> {
    let n = lambda.len();
    if n < 3 {
        return Err(Error::Argument(format!(
            "inequality lab needs n >= 3, got {n}"
        )));
    }
    if !lambda.is_convex() {
        return Err(Error::Domain(format!(
            "spectrum outside the positive cone: {:?}",
            lambda.values()
        )));
    }
    QuotientOperator::standard(n)
}

/// `lambda_{n-1} lambda_n >= F` and `lambda_{n-1} lambda_n <= C(n) F` with
/// `C(n) = binom(n, 2)`; implied constant `lambda_{n-1} lambda_n / F`.
pub fn check_eigenvalue_bounds(lambda: &OrderedSpectrum) -> Result<(GapRecord, GapRecord)> {
    let op = lab_operator(lambda)?;
    let n = lambda.len();
    let f = op.value(lambda)?;
    let pair = lambda[n - 2] * lambda[n - 1];
    let c = LemmaId::PairUpper.candidate(n).unwrap();
    let implied = pair / f;
    Ok((
        GapRecord::new(LemmaId::PairLower, lambda, Gap::new(pair - f, &[pair, f]), None),
        GapRecord::new(
            LemmaId::PairUpper,
            lambda,
            Gap::new(c * f - pair, &[c * f, pair]),
            Some(implied),
        ),
    ))
}

/// Gradient bounds: elementwise lower bounds, the two-sided bound on
/// `sum F^{ii}`, the Euler identity `sum F^{ii} lambda_i = 2F`, and the
/// two-sided bound on `sum F^{ii} lambda_i^2`.
pub fn check_gradient_bounds(lambda: &OrderedSpectrum) -> Result<Vec<GapRecord>> {
    let op = lab_operator(lambda)?;
    let n = lambda.len();
    let nf = n as f64;
    let jet = op.jet(lambda)?;
    let f = jet.value;
    let ln = lambda[n - 1];

    let elementwise = (0..n)
        .map(|i| {
            let bound = if i + 1 < n {
                f * f / (lambda[i] * lambda[i] * ln)
            } else {
                f * f / (ln * ln * lambda[n - 2])
            };
            Gap::new(jet.grad[i] - bound, &[jet.grad[i], bound]).normalized()
        })
        .fold(f64::INFINITY, f64::min);

    let sum: f64 = jet.grad.iter().sum();
    let lower = f / (nf * ln);
    let upper = 2.0 * f / ln;

    let euler: f64 = jet.grad.iter().zip(lambda.iter()).map(|(g, l)| g * l).sum();

    let squares: f64 = jet
        .grad
        .iter()
        .zip(lambda.iter())
        .map(|(g, l)| g * l * l)
        .sum();
    let sq_lower = (nf - 1.0) * f * f / ln;
    let sq_upper = nf * (nf - 1.0) * f * f / ln;

    Ok(vec![
        GapRecord {
            lemma: LemmaId::GradElementwise,
            lambda: lambda.clone(),
            gap: elementwise,
            implied_constant: None,
        },
        GapRecord::new(
            LemmaId::GradSumLower,
            lambda,
            Gap::new(sum - lower, &[sum, lower]),
            Some((f / ln) / sum),
        ),
        GapRecord::new(
            LemmaId::GradSumUpper,
            lambda,
            Gap::new(upper - sum, &[upper, sum]),
            Some(sum * ln / f),
        ),
        GapRecord::new(
            LemmaId::Euler,
            lambda,
            Gap::new(-(euler - 2.0 * f).abs(), &[euler, 2.0 * f]),
            Some(euler / f),
        ),
        GapRecord::new(
            LemmaId::WeightedSquaresLower,
            lambda,
            Gap::new(squares - sq_lower, &[squares, sq_lower]),
            None,
        ),
        GapRecord::new(
            LemmaId::WeightedSquaresUpper,
            lambda,
            Gap::new(sq_upper - squares, &[sq_upper, squares]),
            Some(squares * ln / (f * f)),
        ),
    ])
}

/// `sum_{i<n} 1/lambda_i <= lambda_n / F <= C(n) sum_{i<n} 1/lambda_i`;
/// implied constant `(lambda_n / F) / sum_{i<n} 1/lambda_i`.
pub fn check_smallest_bounds(lambda: &OrderedSpectrum) -> Result<(GapRecord, GapRecord)> {
    let op = lab_operator(lambda)?;
    let n = lambda.len();
    let f = op.value(lambda)?;
    let mid = lambda[n - 1] / f;
    let inv: f64 = lambda[..n - 1].iter().map(|v| 1.0 / v).sum();
    let c = LemmaId::SmallestUpper.candidate(n).unwrap();
    Ok((
        GapRecord::new(LemmaId::SmallestLower, lambda, Gap::new(mid - inv, &[mid, inv]), None),
        GapRecord::new(
            LemmaId::SmallestUpper,
            lambda,
            Gap::new(c * inv - mid, &[c * inv, mid]),
            Some(mid / inv),
        ),
    ))
}

/// The concavity inequality in direction `xi`.
pub fn check_concavity(lambda: &OrderedSpectrum, xi: &[f64]) -> Result<GapRecord> {
    let op = lab_operator(lambda)?;
    let gap = op.concavity_gap(lambda, xi)?;
    Ok(GapRecord::new(LemmaId::Concavity, lambda, gap, None))
}

/// The basic identities for every `k`, the reciprocal duality for every
/// admissible `(l, k)`, and the two second-derivative facts (sign of
/// `F^{pq,qp}` and the divided-difference identity where eigenvalues separate).
pub fn check_algebra(lambda: &OrderedSpectrum, separation: f64) -> Result<Vec<GapRecord>> {
    let op = lab_operator(lambda)?;
    let n = lambda.len();
    let mut worst_identity = 0.0_f64;
    for k in 1..n {
        for r in identity_residuals(k, lambda, None)? {
            worst_identity = worst_identity.max(r);
        }
    }
    let mut worst_duality = f64::INFINITY;
    for k in 2..=n {
        for l in 1..k {
            worst_duality = worst_duality.min(duality_gap(k, l, lambda)?.normalized());
        }
    }
    let mut out = vec![
        GapRecord {
            lemma: LemmaId::Identities,
            lambda: lambda.clone(),
            gap: -worst_identity,
            implied_constant: None,
        },
        GapRecord {
            lemma: LemmaId::Duality,
            lambda: lambda.clone(),
            gap: worst_duality,
            implied_constant: None,
        },
    ];

    let jet = op.jet(lambda)?;
    let mut sign = f64::INFINITY;
    let mut divdiff: Option<f64> = None;
    for p in 0..n {
        for q in (p + 1)..n {
            let off = -jet.off(p, q);
            sign = sign.min(off / (1.0 + off.abs()));
            if (lambda[p] - lambda[q]).abs() > separation {
                let g = op.divided_difference_gap(lambda, p, q, separation)?.normalized();
                divdiff = Some(divdiff.map_or(g, |d: f64| d.min(g)));
            }
        }
    }
    out.push(GapRecord {
        lemma: LemmaId::OffDiagonalSign,
        lambda: lambda.clone(),
        gap: sign,
        implied_constant: None,
    });
    if let Some(g) = divdiff {
        out.push(GapRecord {
            lemma: LemmaId::DividedDifference,
            lambda: lambda.clone(),
            gap: g,
            implied_constant: None,
        });
    }
    Ok(out)
}

/// Every check on one spectrum and one direction.
pub fn check_all(lambda: &OrderedSpectrum, xi: &[f64], separation: f64) -> Result<Vec<GapRecord>> {
    let mut out = check_algebra(lambda, separation)?;
    let (a, b) = check_eigenvalue_bounds(lambda)?;
    out.push(a);
    out.push(b);
    out.extend(check_gradient_bounds(lambda)?);
    let (a, b) = check_smallest_bounds(lambda)?;
    out.push(a);
    out.push(b);
    out.push(check_concavity(lambda, xi)?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignConfig {
    pub dimensions: Vec<usize>,
    pub samples: usize,
    pub distribution: Distribution,
    pub seed: u64,
    /// Violation threshold on normalized gaps.
    pub tolerance: f64,
    /// Minimum eigenvalue separation for the divided-difference identity.
    pub separation: f64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            dimensions: vec![3, 4, 5, 6],
            samples: 100_000,
            distribution: Distribution::Aniso,
            seed: 42,
            tolerance: 1e-9,
            separation: DEFAULT_SEPARATION,
        }
    }
}

/// Aggregate of one lemma row for one dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSummary {
    pub lemma: LemmaId,
    pub n: usize,
    pub samples: usize,
    pub min_gap: f64,
    pub argmin_lambda: Vec<f64>,
    pub implied_constant_max: Option<f64>,
    pub candidate: Option<f64>,
    pub violations: usize,
    /// The first few violating records in sample order.
    pub violation_examples: Vec<GapRecord>,
}

impl LemmaSummary {
    fn empty(lemma: LemmaId, n: usize) -> Self {
        Self {
            lemma,
            n,
            samples: 0,
            min_gap: f64::INFINITY,
            argmin_lambda: Vec::new(),
            implied_constant_max: None,
            candidate: lemma.candidate(n),
            violations: 0,
            violation_examples: Vec::new(),
        }
    }

    fn push(&mut self, rec: GapRecord, tolerance: f64) {
        self.samples += 1;
        if rec.gap < self.min_gap || self.argmin_lambda.is_empty() {
            self.min_gap = rec.gap;
            self.argmin_lambda = rec.lambda.values().to_vec();
        }
        if let Some(c) = rec.implied_constant {
            self.implied_constant_max = Some(self.implied_constant_max.map_or(c, |m| m.max(c)));
        }
        if !(rec.gap >= -tolerance) {
            self.violations += 1;
            if self.violation_examples.len() < MAX_EXAMPLES {
                self.violation_examples.push(rec);
            }
        }
    }

    /// Merges a summary of later samples into this one; ties keep the earlier argmin.
    fn merge(&mut self, later: LemmaSummary) {
        self.samples += later.samples;
        if later.samples > 0 && (later.min_gap < self.min_gap || self.argmin_lambda.is_empty()) {
            self.min_gap = later.min_gap;
            self.argmin_lambda = later.argmin_lambda;
        }
        if let Some(c) = later.implied_constant_max {
            self.implied_constant_max = Some(self.implied_constant_max.map_or(c, |m| m.max(c)));
        }
        self.violations += later.violations;
        let room = MAX_EXAMPLES.saturating_sub(self.violation_examples.len());
        self.violation_examples
            .extend(later.violation_examples.into_iter().take(room));
    }

    /// True when the empirical constant exceeds the candidate by more than `rel`.
    pub fn exceeds_candidate(&self, rel: f64) -> bool {
        match (self.implied_constant_max, self.candidate) {
            (Some(m), Some(c)) => m > c * (1.0 + rel),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignReport {
    pub config: CampaignConfig,
    pub rows: Vec<LemmaSummary>,
}

pub const CAMPAIGN_HEADER: [&str; 7] = [
    "lemma_id",
    "n",
    "samples",
    "min_gap",
    "argmin_lambda",
    "implied_constant_max",
    "violations",
];

impl CampaignReport {
    pub fn total_violations(&self) -> usize {
        self.rows.iter().map(|r| r.violations).sum()
    }

    pub fn row(&self, lemma: LemmaId, n: usize) -> Option<&LemmaSummary> {
        self.rows.iter().find(|r| r.lemma == lemma && r.n == n)
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let wrap = |e| Error::csv("<memory>", e);
        w.write_record(CAMPAIGN_HEADER).map_err(wrap)?;
        for r in &self.rows {
            let argmin = serde_json::to_string(&r.argmin_lambda)
                .map_err(|e| Error::Argument(format!("cannot encode spectrum: {e}")))?;
            w.write_record([
                r.lemma.as_str().to_string(),
                r.n.to_string(),
                r.samples.to_string(),
                format!("{:e}", r.min_gap),
                argmin,
                r.implied_constant_max.map(|c| format!("{c:e}")).unwrap_or_default(),
                r.violations.to_string(),
            ])
            .map_err(wrap)?;
        }
        w.into_inner()
            .map_err(|e| Error::Argument(format!("cannot flush CSV buffer: {e}")))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let bytes = self.to_csv_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

fn run_chunk(
    config: &CampaignConfig,
    n: usize,
    chunk: usize,
) -> Result<Vec<LemmaSummary>> {
    let mut rows: Vec<LemmaSummary> = LemmaId::ALL.iter().map(|&l| LemmaSummary::empty(l, n)).collect();
    let start = chunk * CHUNK;
    let count = CHUNK.min(config.samples - start);
    let mut sampler = ConeSampler::substream(n, config.distribution, config.seed, chunk as u64);
    for _ in 0..count {
        let lambda = sampler.sample();
        let xi = sampler.direction();
        for rec in check_all(&lambda, &xi, config.separation)? {
            let idx = LemmaId::ALL.iter().position(|&l| l == rec.lemma).unwrap();
            rows[idx].push(rec, config.tolerance);
        }
    }
    Ok(rows)
}

/// Runs every check over `samples` spectra per dimension.
///
/// Samples are split into fixed chunks with their own random sub-streams, so
/// the report does not depend on how many workers process the chunks.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignReport> {
    if config.dimensions.iter().any(|&n| n < 3) {
        return Err(Error::Argument(format!(
            "campaign dimensions must be >= 3, got {:?}",
            config.dimensions
        )));
    }
    if !(config.tolerance >= 0.0) {
        return Err(Error::Argument(format!(
            "tolerance must be nonnegative, got {}",
            config.tolerance
        )));
    }
    let mut rows = Vec::new();
    if config.samples == 0 {
        return Ok(CampaignReport {
            config: config.clone(),
            rows,
        });
    }
    for &n in &config.dimensions {
        let chunks = config.samples.div_ceil(CHUNK);
        let parts: Vec<Vec<LemmaSummary>> = (0..chunks)
            .into_par_iter()
            .map(|c| run_chunk(config, n, c))
            .collect::<Result<_>>()?;
        let mut acc: Vec<LemmaSummary> =
            LemmaId::ALL.iter().map(|&l| LemmaSummary::empty(l, n)).collect();
        for part in parts {
            for (a, p) in acc.iter_mut().zip(part) {
                a.merge(p);
            }
        }
        rows.extend(acc.into_iter().filter(|r| r.samples > 0));
    }
    Ok(CampaignReport {
        config: config.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(v: &[f64]) -> OrderedSpectrum {
        OrderedSpectrum::positive(v.to_vec()).unwrap()
    }

    fn binom2(n: usize) -> f64 {
        (n * (n - 1) / 2) as f64
    }

    #[test]
    fn sampler_is_sorted_positive_and_reproducible() {
        for dist in [Distribution::LogUniform, Distribution::Uniform, Distribution::Aniso] {
            let mut a = ConeSampler::new(5, dist, 7);
            let mut b = ConeSampler::new(5, dist, 7);
            for _ in 0..200 {
                let x = a.sample();
                assert_eq!(x, b.sample());
                assert!(x.is_convex());
                assert!(x.windows(2).all(|w| w[0] >= w[1]));
            }
            let d = a.direction();
            assert!((d.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let mut c = ConeSampler::new(5, Distribution::Aniso, 8);
        let mut d = ConeSampler::new(5, Distribution::Aniso, 7);
        assert_ne!(c.sample(), d.sample());
    }

    #[test]
    fn aniso_reaches_extreme_ratios() {
        let mut s = ConeSampler::new(4, Distribution::Aniso, 1);
        let worst = (0..5000)
            .map(|_| {
                let l = s.sample();
                l[0] / l[3]
            })
            .fold(0.0, f64::max);
        assert!(worst > 1e8);
    }

    #[test]
    fn eigenvalue_bounds_symmetric_and_degenerate() {
        for n in 3..=6 {
            let (lower, upper) = check_eigenvalue_bounds(&spectrum(&vec![2.5; n])).unwrap();
            assert!(lower.gap >= 0.0);
            let c = upper.implied_constant.unwrap();
            assert!((c - binom2(n)).abs() < 1e-12 * binom2(n));
        }
        let (_, upper) = check_eigenvalue_bounds(&spectrum(&[1e3, 1.0, 1.0])).unwrap();
        // sigma_2(1/lambda) / (1 * 1) = 1 + 2e-3
        assert!((upper.implied_constant.unwrap() - 1.002).abs() < 1e-12);
    }

    #[test]
    fn gradient_bounds_at_unit_spectrum() {
        let recs = check_gradient_bounds(&spectrum(&[1.0, 1.0, 1.0])).unwrap();
        let get = |id| recs.iter().find(|r| r.lemma == id).unwrap();
        // sum F^ii = 2/3, F / lambda_n = 1/3
        assert!((get(LemmaId::GradSumUpper).implied_constant.unwrap() - 2.0).abs() < 1e-14);
        // sum F^ii lambda_i^2 = 2/3, F^2 / lambda_n = 1/9
        assert!((get(LemmaId::WeightedSquaresUpper).implied_constant.unwrap() - 6.0).abs() < 1e-13);
        assert!((get(LemmaId::Euler).implied_constant.unwrap() - 2.0).abs() < 1e-14);
        assert!(get(LemmaId::Euler).gap.abs() < 1e-15);
        for r in &recs {
            assert!(r.gap >= -1e-15, "{:?}", r);
        }
    }

    #[test]
    fn smallest_bounds_symmetric_constant() {
        for n in 3..=6 {
            let t = 0.37;
            let (lower, upper) = check_smallest_bounds(&spectrum(&vec![t; n])).unwrap();
            assert!(lower.gap >= 0.0);
            let c = upper.implied_constant.unwrap();
            assert!((c - n as f64 / 2.0).abs() < 1e-12 * n as f64);
        }
    }

    #[test]
    fn concavity_examples() {
        let l = spectrum(&[1e3, 1.0, 1.0]);
        assert_eq!(check_concavity(&l, &[0.0; 3]).unwrap().gap, 0.0);
        assert!(check_concavity(&l, &[1.0, 0.0, 0.0]).unwrap().gap >= 0.0);
    }

    #[test]
    fn implied_constants_are_scale_invariant() {
        let l = spectrum(&[40.0, 3.0, 0.2, 0.05]);
        let t = 17.3;
        let lt = spectrum(&l.iter().map(|v| v * t).collect::<Vec<_>>());
        let a = check_all(&l, &[0.5, 0.5, 0.5, 0.5], 1e-3).unwrap();
        let b = check_all(&lt, &[0.5, 0.5, 0.5, 0.5], 1e-3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.lemma, y.lemma);
            if let (Some(cx), Some(cy)) = (x.implied_constant, y.implied_constant) {
                assert!((cx - cy).abs() <= 1e-10 * cx.abs(), "{} {cx} {cy}", x.lemma);
            }
        }
    }

    #[test]
    fn domain_errors() {
        let two = OrderedSpectrum::positive(vec![2.0, 1.0]).unwrap();
        assert!(check_eigenvalue_bounds(&two).is_err());
        let nonpos = OrderedSpectrum::new(vec![2.0, 1.0, 0.0]).unwrap();
        assert!(matches!(check_smallest_bounds(&nonpos), Err(Error::Domain(_))));
    }

    #[test]
    fn campaign_small_run_is_clean_and_deterministic() {
        let cfg = CampaignConfig {
            samples: 3000,
            ..CampaignConfig::default()
        };
        let a = run_campaign(&cfg).unwrap();
        assert_eq!(a.total_violations(), 0, "{:#?}", a.rows.iter().filter(|r| r.violations > 0).collect::<Vec<_>>());
        let b = crate::parallel::install(1, || run_campaign(&cfg)).unwrap().unwrap();
        assert_eq!(a.to_csv_bytes().unwrap(), b.to_csv_bytes().unwrap());
        for r in &a.rows {
            assert!(!r.exceeds_candidate(1e-6), "{:?}", r);
        }
    }

    #[test]
    fn empty_campaign_has_no_rows() {
        let cfg = CampaignConfig {
            samples: 0,
            ..CampaignConfig::default()
        };
        let r = run_campaign(&cfg).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.total_violations(), 0);
        let csv = String::from_utf8(r.to_csv_bytes().unwrap()).unwrap();
        assert_eq!(csv.trim_end(), CAMPAIGN_HEADER.join(","));
    }
}
