// SPDX-License-Identifier: Apache-2.0

//! Empirical CDFs and the two-sample Kolmogorov-Smirnov test.
//!
//! The ECDF here is normalized by `1/(n+1)` and counts strictly smaller
//! samples, so `F(x) = #{x_i < x} / (n + 1)`. Its upper plateau is
//! `n/(n+1)`, not 1. Two samples of different sizes therefore never agree in
//! the limit `x -> +inf`, and the KS statistic picks that difference up.
//!
//! Hourly concentrations are autocorrelated, while the p-value assumes iid
//! samples. Nothing here corrects for that; the p-value is used as a
//! consistent alarm threshold rather than a calibrated error rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::WindowSlice;

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Step-function ECDF with `1/(n+1)` normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::insufficient("ECDF of an empty sample"));
        }
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries("ECDF sample contains a non-finite value".into()));
        }
        Ok(Ecdf { sorted: sorted(sample) })
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    fn norm(&self) -> f64 {
        (self.sorted.len() + 1) as f64
    }

    /// `#{x_i < x} / (n+1)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v < x) as f64 / self.norm()
    }

    /// Right limit `F(x+) = #{x_i <= x} / (n+1)`.
    pub fn eval_right(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.norm()
    }
}

/// KS statistic and p-value for one pair of windows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
    pub m: usize,
    pub n: usize,
}

/// `sup_x |F_a(x) - F_b(x)|` under the `1/(n+1)` ECDF.
///
/// Both step functions only change at sample points, so the supremum is
/// attained either at a pooled sample value (the left value, by the strict
/// inequality) or immediately to its right. The scan walks the merged sorted
/// samples once and checks both sides of each distinct value, which also
/// handles ties across samples.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::insufficient("KS statistic needs two non-empty samples"));
    }
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = ((a.len() + 1) as f64, (b.len() + 1) as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        // left value at x: counts strictly below x
        d = d.max((i as f64 / na - j as f64 / nb).abs());
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        // right limit at x
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Kolmogorov survival function `Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2)`.
///
/// The alternating series converges slowly for small `lambda`; there the
/// equivalent theta-function form `1 - sqrt(2 pi)/lambda sum exp(-(2j-1)^2 pi^2 / (8 lambda^2))`
/// is summed instead. Terms below `1e-12` end either sum.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    const TERM_EPS: f64 = 1e-12;
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for j in 1..=100u32 {
            let k = (2 * j - 1) as f64;
            let term = (c * k * k).exp();
            s += term;
            if term < TERM_EPS {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let mut s = 0.0;
        let mut sign = 1.0;
        for j in 1..=100u32 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            s += sign * term;
            if term < TERM_EPS {
                break;
            }
            sign = -sign;
        }
        2.0 * s
    };
    q.clamp(0.0, 1.0)
}

/// Asymptotic two-sample p-value with the Stephens small-sample correction.
pub fn ks_pvalue(d: f64, m: usize, n: usize) -> f64 {
    assert!(m >= 1 && n >= 1, "sample sizes must be positive");
    let ne = (m as f64 * n as f64) / (m + n) as f64;
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d.clamp(0.0, 1.0);
    kolmogorov_q(lambda)
}

/// KS test between two windows, each required to meet `completeness_min`.
pub fn ks_test(a: &WindowSlice, b: &WindowSlice, completeness_min: f64) -> Result<KsResult> {
    a.require_complete(completeness_min)?;
    b.require_complete(completeness_min)?;
    let d = ks_statistic(&a.samples, &b.samples)?;
    Ok(KsResult { d, p_value: ks_pvalue(d, a.len(), b.len()), m: a.len(), n: b.len() })
}
