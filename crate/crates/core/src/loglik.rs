//! Volatility filtering from observed data and the two quasi-log-likelihoods.
//!
//! Both likelihoods share the Gaussian measurement part
//! `-1/2 sum [log 2pi + log sigma_u^2 + u_t^2 / sigma_u^2]`; they differ in the
//! return part (Gaussian, or standardized t with `nu` degrees of freedom).

use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dist::InnovationDist;
use crate::error::{Error, Result};
use crate::filter::lagged_sums;
use crate::model::RhygarchParams;
use crate::sim::SeriesPair;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Bound applied to `log h_t` so trial points far from the data cannot overflow.
pub const LOG_H_BOUND: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikOptions {
    pub truncation: usize,
    /// Drop the first `K` observations from the sums (only when `T > K`).
    pub drop_presample: bool,
}

impl Default for LikOptions {
    fn default() -> Self {
        LikOptions { truncation: crate::DEFAULT_TRUNCATION, drop_presample: false }
    }
}

impl LikOptions {
    pub fn with_truncation(truncation: usize) -> Self {
        LikOptions { truncation, ..Default::default() }
    }

    pub(crate) fn first_index(&self, n: usize) -> usize {
        if self.drop_presample && n > self.truncation {
            self.truncation
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodValue {
    pub total: f64,
    /// Log-likelihood of returns given the realized measures.
    pub returns_part: f64,
    /// Log-likelihood of the realized measures.
    pub measure_part: f64,
    pub z_resid: Vec<f64>,
    pub u_resid: Vec<f64>,
    pub logh: Vec<f64>,
    /// Number of `log h_t` values clamped to `[-LOG_H_BOUND, LOG_H_BOUND]`.
    pub clamp_events: usize,
}

pub(crate) fn log_realized(x: &[f64]) -> Result<Vec<f64>> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > 0.0 && v.is_finite() {
                Ok(libm::log(v))
            } else {
                Err(Error::Data { index: i, reason: "realized measure must be positive".into() })
            }
        })
        .collect()
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// `sum_i psi_i log x_{t-i}` for `t = 0..=T` with the sample mean of `log x`
/// standing in for lags before the sample.
pub(crate) fn filter_sums(p: &RhygarchParams, logx: &[f64], k: usize) -> Result<Vec<f64>> {
    let psi = p.psi(k)?;
    Ok(lagged_sums(psi.weights(), logx, mean(logx)))
}

/// `log h_t = omega + sum_{i=1..K} psi_i log x_{t-i}` for every observation.
pub fn filter_volatility(p: &RhygarchParams, x: &[f64], k: usize) -> Result<Vec<f64>> {
    let logx = log_realized(x)?;
    let mut s = filter_sums(p, &logx, k)?;
    s.pop();
    s.iter_mut().for_each(|v| *v += p.omega);
    Ok(s)
}

/// Per-observation return log-density given `log h`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum ReturnDensity {
    Gaussian,
    StudentT { constant: f64, nu: f64 },
}

impl ReturnDensity {
    pub(crate) fn new(dist: &InnovationDist) -> Result<Self> {
        match *dist {
            InnovationDist::Gaussian => Ok(ReturnDensity::Gaussian),
            InnovationDist::StudentT { nu } => {
                if !(nu > 2.0) {
                    return Err(Error::domain("nu must exceed 2"));
                }
                // A(nu) + 1/2 log[pi (nu - 2)]
                let a = libm::lgamma(0.5 * nu) - libm::lgamma(0.5 * (nu + 1.0));
                Ok(ReturnDensity::StudentT { constant: a + 0.5 * libm::log(PI * (nu - 2.0)), nu })
            }
        }
    }

    #[inline]
    fn log_density(&self, r: f64, log_h: f64, h: f64) -> f64 {
        match *self {
            ReturnDensity::Gaussian => -0.5 * (LN_2PI + log_h + r * r / h),
            ReturnDensity::StudentT { constant, nu } => {
                -(constant + 0.5 * log_h + 0.5 * (nu + 1.0) * libm::log1p(r * r / (h * (nu - 2.0))))
            }
        }
    }
}

/// Accumulates both likelihood parts from precomputed filter sums.
/// `keep` controls whether residual series are recorded.
pub(crate) fn assemble(
    p: &RhygarchParams,
    density: ReturnDensity,
    returns: &[f64],
    logx: &[f64],
    sums: &[f64],
    first: usize,
    keep: bool,
) -> LikelihoodValue {
    let n = returns.len();
    let cap = if keep { n - first } else { 0 };
    let mut z_resid = Vec::with_capacity(cap);
    let mut u_resid = Vec::with_capacity(cap);
    let mut logh = Vec::with_capacity(cap);
    let mut clamp_events = 0;
    let mut returns_part = 0.0;
    let mut sq = 0.0;
    let inv_var = 1.0 / (p.sigma_u * p.sigma_u);
    for t in first..n {
        let mut lh = p.omega + sums[t];
        if !(lh.abs() <= LOG_H_BOUND) {
            clamp_events += 1;
            lh = if lh.is_nan() { LOG_H_BOUND } else { lh.clamp(-LOG_H_BOUND, LOG_H_BOUND) };
        }
        let h = libm::exp(lh);
        let r = returns[t];
        let z = r / libm::sqrt(h);
        let u = logx[t] - p.xi - p.phi * lh - p.leverage(z);
        returns_part += density.log_density(r, lh, h);
        sq += u * u;
        if keep {
            z_resid.push(z);
            u_resid.push(u);
            logh.push(lh);
        }
    }
    let m = (n - first) as f64;
    let measure_part = -0.5 * (m * (LN_2PI + libm::log(p.sigma_u * p.sigma_u)) + sq * inv_var);
    LikelihoodValue {
        total: returns_part + measure_part,
        returns_part,
        measure_part,
        z_resid,
        u_resid,
        logh,
        clamp_events,
    }
}

fn evaluate(
    p: &RhygarchParams,
    data: &SeriesPair,
    opts: &LikOptions,
    density: ReturnDensity,
) -> Result<LikelihoodValue> {
    if !(p.sigma_u > 0.0) {
        return Err(Error::domain("sigma_u must be positive"));
    }
    data.check()?;
    let logx = log_realized(&data.realized)?;
    let sums = filter_sums(p, &logx, opts.truncation)?;
    let first = opts.first_index(data.len());
    Ok(assemble(p, density, &data.returns, &logx, &sums, first, true))
}

/// Gaussian-Gaussian quasi-log-likelihood.
pub fn loglik_gg(p: &RhygarchParams, data: &SeriesPair, opts: &LikOptions) -> Result<LikelihoodValue> {
    if p.innovation != InnovationDist::Gaussian {
        return Err(Error::domain("loglik_gg needs Gaussian innovations"));
    }
    evaluate(p, data, opts, ReturnDensity::Gaussian)
}

/// Standardized-t / Gaussian quasi-log-likelihood.
pub fn loglik_tg(p: &RhygarchParams, data: &SeriesPair, opts: &LikOptions) -> Result<LikelihoodValue> {
    if !matches!(p.innovation, InnovationDist::StudentT { .. }) {
        return Err(Error::domain("loglik_tg needs standardized-t innovations"));
    }
    evaluate(p, data, opts, ReturnDensity::new(&p.innovation)?)
}

/// Dispatches on the innovation law carried by `p`.
pub fn loglik(p: &RhygarchParams, data: &SeriesPair, opts: &LikOptions) -> Result<LikelihoodValue> {
    evaluate(p, data, opts, ReturnDensity::new(&p.innovation)?)
}
