//! Two-sample Kolmogorov–Smirnov testing with asymptotic p-values, and
//! diagnostics for whether a batch of p-values looks uniform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `lambda` the Kolmogorov survival function is 1 to well beyond
/// double precision, and the alternating series has not converged within
/// its term budget.
const SMALL_LAMBDA: f64 = 0.2;
const SERIES_TOL: f64 = 1e-12;
const SERIES_TERMS: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic_d: f64,
    pub p_value: f64,
    pub n: usize,
    pub m: usize,
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup_x |F_a(x) - F_b(x)|` for the right-continuous empirical CDFs.
///
/// Both ECDFs are evaluated after every distinct sample value, with all
/// copies of a tied value consumed before comparing.
pub fn ecdf_sup_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    // once one sample is exhausted the gap only shrinks
    Ok(d)
}

/// Survival function of the Kolmogorov distribution,
/// `2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)`, clamped to `[0, 1]`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < SMALL_LAMBDA {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=SERIES_TERMS {
        let kf = f64::from(k);
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < SERIES_TOL {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic two-sided p-value for statistic `d` from samples of sizes
/// `n` and `m`.
pub fn ks_p_value(d: f64, n: usize, m: usize) -> f64 {
    let n_eff = (n as f64 * m as f64) / (n + m) as f64;
    kolmogorov_survival(n_eff.sqrt() * d)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let d = ecdf_sup_distance(a, b)?;
    Ok(KsResult {
        statistic_d: d,
        p_value: ks_p_value(d, a.len(), b.len()),
        n: a.len(),
        m: b.len(),
    })
}

/// One-sample KS distance of `xs` against the uniform CDF on `[0, 1]`.
pub fn ks_distance_uniform(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let v = sorted(xs);
    let n = v.len() as f64;
    Ok(v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let below = x - i as f64 / n;
            let above = (i + 1) as f64 / n - x;
            below.max(above)
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    /// Share of p-values strictly below 0.05.
    pub fraction_below_0_05: f64,
    pub ks_vs_uniform_d: f64,
    pub ks_vs_uniform_p: f64,
    /// Counts over `[0, 0.1), [0.1, 0.2), ..., [0.9, 1.0]`.
    pub histogram: [usize; 10],
}

/// Summarises how far a batch of p-values is from uniform on `[0, 1]`.
pub fn pvalue_uniformity(pvalues: &[f64]) -> Result<UniformityReport> {
    if pvalues.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(&bad) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::PValueRange(bad));
    }
    let mut histogram = [0usize; 10];
    for &p in pvalues {
        histogram[((p * 10.0).floor() as usize).min(9)] += 1;
    }
    let below = pvalues.iter().filter(|&&p| p < 0.05).count();
    let d = ks_distance_uniform(pvalues)?;
    Ok(UniformityReport {
        fraction_below_0_05: below as f64 / pvalues.len() as f64,
        ks_vs_uniform_d: d,
        ks_vs_uniform_p: kolmogorov_survival((pvalues.len() as f64).sqrt() * d),
        histogram,
    })
}

/// Bin counts of two samples over a common equal-width range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramPair {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

pub fn shared_histogram(a: &[f64], b: &[f64], bins: usize) -> Result<HistogramPair> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let mut hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let count = |xs: &[f64]| {
        let mut c = vec![0; bins];
        for &x in xs {
            c[(((x - lo) / width).floor() as usize).min(bins - 1)] += 1;
        }
        c
    };
    Ok(HistogramPair {
        edges,
        a: count(a),
        b: count(b),
    })
}

/// Per-observation outcome in a comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationComparison {
    pub observation_id: usize,
    #[serde(rename = "D")]
    pub d: f64,
    pub p: f64,
    pub n: usize,
    pub m: usize,
    pub histogram: HistogramPair,
}

/// Report document comparing two sets of predictive distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub observations: Vec<ObservationComparison>,
    pub uniformity: UniformityReport,
}

/// KS-compares paired samples observation by observation.
pub fn compare_samples(pairs: &[(usize, &[f64], &[f64])], bins: usize) -> Result<ComparisonReport> {
    let observations = pairs
        .iter()
        .map(|&(id, a, b)| {
            let ks = ks_two_sample(a, b)?;
            Ok(ObservationComparison {
                observation_id: id,
                d: ks.statistic_d,
                p: ks.p_value,
                n: ks.n,
                m: ks.m,
                histogram: shared_histogram(a, b, bins)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pvalues: Vec<f64> = observations.iter().map(|o| o.p).collect();
    Ok(ComparisonReport {
        uniformity: pvalue_uniformity(&pvalues)?,
        observations,
    })
}
