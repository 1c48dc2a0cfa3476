//! Parameter container, validation and the stationarity/moment diagnostics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::dist::InnovationDist;
use crate::error::{Error, Result};
use crate::filter::{psi_weights, PsiWeights};

/// Full parameter vector of the realized HYGARCH(1,d,1) model.
///
/// Serializes to a flat JSON object; the innovation law is carried by an
/// `"innovation"` tag (`"gaussian"` or `"student_t"`) plus `"nu"` for the t case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhygarchParams {
    /// Intercept of the log-volatility equation.
    pub omega: f64,
    /// Numerator lag coefficient in `(1 - gamma L)`.
    pub gamma: f64,
    /// Denominator lag coefficient in `(1 - beta L)^{-1}`.
    pub beta: f64,
    /// Hyperbolic amplitude in `[0, 1]`.
    pub delta: f64,
    /// Fractional differencing order.
    pub d: f64,
    /// Intercept of the measurement equation.
    pub xi: f64,
    /// Loading of `log h_t` in the measurement equation.
    pub phi: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// Standard deviation of the measurement noise `u_t`.
    pub sigma_u: f64,
    #[serde(flatten)]
    pub innovation: InnovationDist,
}

impl RhygarchParams {
    /// Gaussian-innovation design used for the GG simulation study.
    pub fn model1() -> Self {
        RhygarchParams {
            omega: 0.1,
            gamma: 0.1,
            beta: 0.4,
            delta: 0.4,
            d: 0.4,
            xi: -0.1,
            phi: 1.0,
            tau1: -0.08,
            tau2: 0.06,
            sigma_u: 0.4,
            innovation: InnovationDist::Gaussian,
        }
    }

    /// Same dynamics with standardized t(3) return innovations.
    pub fn model2() -> Self {
        RhygarchParams { innovation: InnovationDist::StudentT { nu: 3.0 }, ..Self::model1() }
    }

    pub fn psi(&self, k: usize) -> Result<PsiWeights> {
        psi_weights(self.delta, self.d, self.gamma, self.beta, k)
    }

    /// Leverage function `tau1 z + tau2 (z^2 - 1)`.
    pub fn leverage(&self, z: f64) -> f64 {
        self.tau1 * z + self.tau2 * (z * z - 1.0)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate(self);
        if v.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = v.iter().map(|e| format!("{e}")).collect();
            Err(Error::InvalidParams(msg.join("; ")))
        }
    }
}

/// A single violated parameter constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn validate(p: &RhygarchParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: &'static str, message: &str| {
        out.push(Violation { field, message: String::from(message) });
    };
    let finite =
        [("omega", p.omega), ("gamma", p.gamma), ("xi", p.xi), ("phi", p.phi), ("tau1", p.tau1), ("tau2", p.tau2)];
    for (name, v) in finite {
        if !v.is_finite() {
            push(name, "must be finite");
        }
    }
    if !(0.0..=1.0).contains(&p.delta) {
        push("delta", "delta out of [0,1]");
    }
    if !(p.d >= 0.0 && p.d.is_finite()) {
        push("d", "d must be finite and non-negative");
    }
    if !(p.beta.abs() < 1.0) {
        push("beta", "|beta| must be < 1");
    }
    if !(p.sigma_u > 0.0 && p.sigma_u.is_finite()) {
        push("sigma_u", "sigma_u must be positive");
    }
    if let InnovationDist::StudentT { nu } = p.innovation {
        if !(nu > 2.0) {
            push("nu", "nu must exceed 2");
        }
    }
    out
}

/// Truncated versions of the first- and second-moment conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub truncation: usize,
    pub sum_psi: f64,
    pub phi_sum_psi: f64,
    pub abs_sum_psi: f64,
    pub tail_estimate: f64,
    pub psi_min: f64,
    /// `phi * psi(1) < 1` and `sum |psi_i| < inf`.
    pub first_moment_ok: bool,
    /// `omega = 0`, `phi > 0`, all `psi_i >= 0`, and `z` has finite third and fourth moments.
    pub second_moment_ok: bool,
}

/// Tolerance used when reading "psi_i >= 0" off the truncated weights.
pub const PSI_NONNEG_TOL: f64 = 1e-12;

pub fn check_stationarity(p: &RhygarchParams, k: usize) -> Result<StationarityReport> {
    p.ensure_valid()?;
    let psi = p.psi(k)?;
    Ok(report_from_weights(p, &psi))
}

pub(crate) fn report_from_weights(p: &RhygarchParams, psi: &PsiWeights) -> StationarityReport {
    let sum_psi = psi.partial_sum();
    let phi_sum_psi = p.phi * sum_psi;
    let abs_sum_psi = psi.abs_sum();
    let tail_estimate = psi.tail_estimate();
    let psi_min = psi.min();
    let first_moment_ok = phi_sum_psi < 1.0 && (abs_sum_psi + tail_estimate).is_finite();
    let second_moment_ok =
        p.omega == 0.0 && p.phi > 0.0 && psi_min >= -PSI_NONNEG_TOL && p.innovation.has_fourth_moment();
    StationarityReport {
        truncation: psi.truncation(),
        sum_psi,
        phi_sum_psi,
        abs_sum_psi,
        tail_estimate,
        psi_min,
        first_moment_ok,
        second_moment_ok,
    }
}

/// Unconditional means `(E log h, E log x)` with `psi(1)` read off the truncated weights.
pub fn implied_means(p: &RhygarchParams, k: usize) -> Result<(f64, f64)> {
    p.ensure_valid()?;
    let psi1 = p.psi(k)?.partial_sum();
    means_from_psi1(p, psi1)
}

pub(crate) fn means_from_psi1(p: &RhygarchParams, psi1: f64) -> Result<(f64, f64)> {
    let denom = 1.0 - p.phi * psi1;
    if !(denom > 0.0) {
        return Err(Error::NonStationary(format!("phi * psi(1) = {} is not below 1", p.phi * psi1)));
    }
    let mean_log_h = (p.omega + p.xi * psi1) / denom;
    let mean_log_x = (p.xi + p.phi * p.omega) / denom;
    Ok((mean_log_h, mean_log_x))
}

/// Truncated Volterra expansion of `log h_t`:
/// `H_0 + ... + H_{max_order}` with `H_0 = omega` and
/// `H_l = sum_{i_1..i_l = 1..K} phi^{l-1} psi_{i_1}..psi_{i_l} (omega phi + v_{t - i_1 - .. - i_l})`.
///
/// `v_lags[j]` holds `v_{t-j}` where `v_t = log x_t - phi log h_t`; it needs at least
/// `max_order * K + 1` entries. Brute-force enumeration, intended for small `K` and
/// orders only.
pub fn volterra_oracle(p: &RhygarchParams, v_lags: &[f64], max_order: usize, k: usize) -> Result<f64> {
    let need = max_order * k + 1;
    if v_lags.len() < need {
        return Err(Error::domain(format!("need {need} lags of v, got {}", v_lags.len())));
    }
    let psi = p.psi(k)?;
    let w = psi.weights();
    let mut total = p.omega;
    for order in 1..=max_order {
        let mut acc = 0.0;
        enumerate(w, order, 0, 1.0, &mut |lag, prod| {
            acc += prod * (p.omega * p.phi + v_lags[lag]);
        });
        total += libm::pow(p.phi, (order - 1) as f64) * acc;
    }
    Ok(total)
}

fn enumerate(w: &[f64], depth: usize, lag: usize, prod: f64, f: &mut dyn FnMut(usize, f64)) {
    if depth == 0 {
        f(lag, prod);
        return;
    }
    for (i, wi) in w.iter().enumerate() {
        enumerate(w, depth - 1, lag + i + 1, prod * wi, f);
    }
}
