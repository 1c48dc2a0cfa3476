//! Lag-polynomial machinery behind the hyperbolic volatility filter.
//!
//! Coefficient sequences are stored lowest lag first (`c[0]` multiplies `L^0`).
//! The distributed-lag weights are
//!
//! ```text
//! psi(L) = delta * [1 - (1 - gamma L) (1 - beta L)^{-1} (1 - L)^d]
//! ```
//!
//! whose `L^0` term cancels, so `psi_1, ..., psi_K` are returned.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Coefficients `c_0..=c_K` of `(1 - L)^d`.
pub fn fracdiff_coeffs(d: f64, k: usize) -> Result<Vec<f64>> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::domain("fractional order d must be finite and non-negative"));
    }
    let mut c = Vec::with_capacity(k + 1);
    c.push(1.0);
    for j in 1..=k {
        let prev = c[j - 1];
        c.push(prev * ((j - 1) as f64 - d) / j as f64);
    }
    Ok(c)
}

/// Cauchy product of two coefficient sequences, truncated at lag `k`.
pub fn poly_mul(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k + 1];
    for (i, &ai) in a.iter().enumerate().take(k + 1) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(k + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// `a(L) / (1 - beta L)` truncated at lag `k`: `q_j = a_j + beta q_{j-1}`.
pub fn poly_div_geometric(a: &[f64], beta: f64, k: usize) -> Result<Vec<f64>> {
    if !(beta.abs() < 1.0) {
        return Err(Error::domain("|beta| must be < 1 for the geometric inverse"));
    }
    let mut q = Vec::with_capacity(k + 1);
    let mut prev = 0.0;
    for j in 0..=k {
        let aj = a.get(j).copied().unwrap_or(0.0);
        let v = aj + beta * prev;
        q.push(v);
        prev = v;
    }
    Ok(q)
}

/// Truncated distributed-lag weights of the log-volatility filter.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiWeights {
    weights: Vec<f64>,
    partial_sum: f64,
    tail_estimate: f64,
}

impl PsiWeights {
    /// `psi_1..=psi_K`; `weights()[i]` is the weight on lag `i + 1`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn truncation(&self) -> usize {
        self.weights.len()
    }

    /// `sum_{i<=K} psi_i`, the truncated `psi(1)`.
    pub fn partial_sum(&self) -> f64 {
        self.partial_sum
    }

    pub fn abs_sum(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    /// Estimate of `sum_{i>K} |psi_i|`.
    pub fn tail_estimate(&self) -> f64 {
        self.tail_estimate
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }
}

/// `a(L) = (1 - gamma L)(1 - beta L)^{-1}(1 - L)^d` up to lag `k`.
fn hyperbolic_numerator(d: f64, gamma: f64, beta: f64, k: usize) -> Result<Vec<f64>> {
    let frac = fracdiff_coeffs(d, k)?;
    let num = poly_mul(&frac, &[1.0, -gamma], k);
    poly_div_geometric(&num, beta, k)
}

pub fn psi_weights(delta: f64, d: f64, gamma: f64, beta: f64, k: usize) -> Result<PsiWeights> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::domain("delta must lie in [0, 1]"));
    }
    if k == 0 {
        return Err(Error::domain("truncation K must be at least 1"));
    }
    if !gamma.is_finite() {
        return Err(Error::domain("gamma must be finite"));
    }
    let a = hyperbolic_numerator(d, gamma, beta, k)?;
    let weights: Vec<f64> = a[1..].iter().map(|&v| -delta * v).collect();
    let partial_sum = weights.iter().sum();
    let tail_estimate = tail_mass(&weights, delta, d, gamma, beta)?;
    Ok(PsiWeights { weights, partial_sum, tail_estimate })
}

/// For non-integer `d` the weights decay like `C k^{-1-d}` with
/// `C = -delta (1 - gamma)/(1 - beta) / Gamma(-d)`, so the tail is bounded by
/// `|C| K^{-d} / d`. For integer `d` the fractional factor is a finite polynomial
/// and the tail is geometric in `beta`, which is summed exactly.
fn tail_mass(weights: &[f64], delta: f64, d: f64, gamma: f64, beta: f64) -> Result<f64> {
    let k = weights.len();
    if delta == 0.0 {
        return Ok(0.0);
    }
    if libm::trunc(d) != d {
        let c = delta * (1.0 - gamma) / (1.0 - beta) / libm::tgamma(-d);
        return Ok(c.abs() * libm::pow(k as f64, -d) / d);
    }
    // beyond lag d + 1 every coefficient is beta times the previous one
    let geometric_from = d as usize + 2;
    if k >= geometric_from {
        return Ok(weights[k - 1].abs() * beta.abs() / (1.0 - beta.abs()));
    }
    let ext = hyperbolic_numerator(d, gamma, beta, geometric_from)?;
    let mut tail: f64 = ext[k + 1..].iter().map(|v| (delta * v).abs()).sum();
    tail += (delta * ext[geometric_from]).abs() * beta.abs() / (1.0 - beta.abs());
    Ok(tail)
}

/// `sum_{i=1..K} psi_i y_{t-i}` for `t = 0..=T`, where lags before the sample take
/// the value `presample`. The last entry is the one-step-ahead sum.
pub fn lagged_sums(weights: &[f64], y: &[f64], presample: f64) -> Vec<f64> {
    let k = weights.len();
    let rev: Vec<f64> = weights.iter().rev().copied().collect();
    let mut buf = Vec::with_capacity(k + y.len());
    buf.resize(k, presample);
    buf.extend_from_slice(y);
    (0..=y.len()).map(|t| dot(&rev, &buf[t..t + k])).collect()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}
