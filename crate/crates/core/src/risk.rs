//! One-step-ahead variance, Value-at-Risk and Expected Shortfall.
//!
//! Two ES conventions are supported:
//!
//! * `Paper`: the upper-complement form `sqrt(h) * phi(q_a) / (1 - a)` (and its t
//!   analogue), reported as a positive number;
//! * `Standard`: the lower-tail mean `E[r | r <= VaR_a]`, a negative number for
//!   small `a`.
//!
//! For t innovations the quantile can be taken on the standardized (unit-variance)
//! scale or on the raw t scale; see [`QuantileFlavor`].

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::dist::{norm_pdf, t_pdf, t_quantile, t_scale, InnovationDist};
use crate::error::{Error, Result};
use crate::loglik::filter_sums;
use crate::model::RhygarchParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    Paper,
    Standard,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::Paper => "paper",
            Convention::Standard => "standard",
        })
    }
}

/// Scale on which Student-t quantiles and densities are read. Irrelevant for
/// Gaussian innovations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuantileFlavor {
    /// Unit-variance t, consistent with the innovation law.
    #[default]
    Standardized,
    /// Raw t(nu) quantile and density.
    Raw,
}

impl fmt::Display for QuantileFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuantileFlavor::Standardized => "standardized",
            QuantileFlavor::Raw => "raw",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskForecast {
    pub h_next: f64,
    pub level: f64,
    pub var_value: f64,
    pub es_value: f64,
    pub convention: Convention,
    pub flavor: QuantileFlavor,
    pub dist: InnovationDist,
}

impl Serialize for RiskForecast {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        m.serialize_entry("h_next", &self.h_next)?;
        m.serialize_entry("alpha", &self.level)?;
        m.serialize_entry("var", &self.var_value)?;
        m.serialize_entry("es", &self.es_value)?;
        m.serialize_entry("convention", &self.convention)?;
        m.serialize_entry("dist", self.dist.label())?;
        if let Some(nu) = self.dist.nu() {
            m.serialize_entry("nu", &nu)?;
            m.serialize_entry("quantile", &self.flavor)?;
        }
        m.end()
    }
}

fn check_inputs(h: f64, alpha: f64, dist: &InnovationDist) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::domain("forecast variance must be positive and finite"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("level must lie in (0, 1)"));
    }
    dist.check()
}

/// Scale factor and raw-quantile for a t law under the chosen flavor.
fn t_pieces(alpha: f64, nu: f64, flavor: QuantileFlavor) -> Result<(f64, f64)> {
    let scale = match flavor {
        QuantileFlavor::Standardized => t_scale(nu),
        QuantileFlavor::Raw => 1.0,
    };
    Ok((scale, t_quantile(alpha, nu)?))
}

/// `h_{T+1} = exp(omega + sum_i psi_i log x_{T+1-i})`.
pub fn forecast_h(p: &RhygarchParams, x_history: &[f64], k: usize) -> Result<f64> {
    if x_history.is_empty() {
        return Err(Error::Data { index: 0, reason: "empty history".into() });
    }
    let logx: Vec<f64> = x_history
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if x > 0.0 && x.is_finite() {
                Ok(libm::log(x))
            } else {
                Err(Error::Data { index: i, reason: "realized measure must be positive".into() })
            }
        })
        .collect::<Result<_>>()?;
    let sums = filter_sums(p, &logx, k)?;
    Ok(libm::exp(p.omega + sums[logx.len()]))
}

/// `VaR_a = sqrt(h) * q_a`.
pub fn var_forecast(h: f64, alpha: f64, dist: &InnovationDist, flavor: QuantileFlavor) -> Result<f64> {
    check_inputs(h, alpha, dist)?;
    let q = match *dist {
        InnovationDist::Gaussian => crate::dist::norm_quantile(alpha)?,
        InnovationDist::StudentT { nu } => {
            let (scale, q) = t_pieces(alpha, nu, flavor)?;
            scale * q
        }
    };
    Ok(libm::sqrt(h) * q)
}

/// Lower-tail mean of a unit-scale innovation: `E[z | z <= q_a]`.
fn lower_tail_mean(alpha: f64, dist: &InnovationDist, flavor: QuantileFlavor) -> Result<f64> {
    match *dist {
        InnovationDist::Gaussian => {
            let q = crate::dist::norm_quantile(alpha)?;
            Ok(-norm_pdf(q) / alpha)
        }
        InnovationDist::StudentT { nu } => {
            let (scale, q) = t_pieces(alpha, nu, flavor)?;
            Ok(-scale * t_pdf(q, nu) / alpha * (nu + q * q) / (nu - 1.0))
        }
    }
}

pub fn es_forecast(
    h: f64,
    alpha: f64,
    dist: &InnovationDist,
    convention: Convention,
    flavor: QuantileFlavor,
) -> Result<f64> {
    check_inputs(h, alpha, dist)?;
    let tail = lower_tail_mean(alpha, dist, flavor)?;
    let unit = match convention {
        Convention::Standard => tail,
        // sqrt(h) f(q) / (1 - a) [(nu + q^2) / (nu - 1)] = -a / (1 - a) * E[z | z <= q]
        Convention::Paper => -tail * alpha / (1.0 - alpha),
    };
    Ok(libm::sqrt(h) * unit)
}

/// Full forecast at one level.
pub fn forecast_risk(
    p: &RhygarchParams,
    x_history: &[f64],
    k: usize,
    alpha: f64,
    convention: Convention,
    flavor: QuantileFlavor,
) -> Result<RiskForecast> {
    let h_next = forecast_h(p, x_history, k)?;
    risk_at(h_next, alpha, &p.innovation, convention, flavor)
}

pub fn risk_at(
    h_next: f64,
    alpha: f64,
    dist: &InnovationDist,
    convention: Convention,
    flavor: QuantileFlavor,
) -> Result<RiskForecast> {
    Ok(RiskForecast {
        h_next,
        level: alpha,
        var_value: var_forecast(h_next, alpha, dist, flavor)?,
        es_value: es_forecast(h_next, alpha, dist, convention, flavor)?,
        convention,
        flavor,
        dist: *dist,
    })
}

/// `sqrt(h) / a * int_{-inf}^{q_a} x f(x) dx` by adaptive Gauss-Kronrod quadrature
/// on `x = q_a - s / (1 - s)`, `s in [0, 1)`. Independent of the closed forms above.
pub fn es_quadrature_oracle(h: f64, alpha: f64, dist: &InnovationDist, flavor: QuantileFlavor) -> Result<f64> {
    check_inputs(h, alpha, dist)?;
    let law = *dist;
    let (q, density): (f64, Box<dyn Fn(f64) -> f64>) = match law {
        InnovationDist::Gaussian => (crate::dist::norm_quantile(alpha)?, Box::new(norm_pdf)),
        InnovationDist::StudentT { nu } => match flavor {
            QuantileFlavor::Standardized => (law.quantile(alpha)?, Box::new(move |x| law.pdf(x))),
            QuantileFlavor::Raw => (t_quantile(alpha, nu)?, Box::new(move |x| t_pdf(x, nu))),
        },
    };
    let integrand = |s: f64| {
        let w = 1.0 - s;
        let x = q - s / w;
        x * density(x) / (w * w)
    };
    let integral = adaptive_gk(&integrand, 0.0, 1.0, 1e-13, 60);
    Ok(libm::sqrt(h) * integral / alpha)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G_WEIGHTS: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// 15-point Kronrod estimate and its difference from the embedded 7-point Gauss rule.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = r * GK_NODES[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += GK_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += G_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * r, (kronrod - gauss).abs() * r)
}

fn adaptive_gk(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (est, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return est;
    }
    let m = 0.5 * (a + b);
    adaptive_gk(f, a, m, 0.5 * tol, depth - 1) + adaptive_gk(f, m, b, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const G: InnovationDist = InnovationDist::Gaussian;
    const STD: QuantileFlavor = QuantileFlavor::Standardized;

    #[test]
    fn forecast_h_cases() {
        let p = RhygarchParams { delta: 0.0, ..RhygarchParams::model1() };
        assert_eq!(forecast_h(&p, &[0.3, 4.0, 1.0], 50).unwrap(), libm::exp(p.omega));

        let p = RhygarchParams::model1();
        let c: f64 = 0.25;
        let h = forecast_h(&p, &vec![libm::exp(c); 5000], 4096).unwrap();
        let psi = p.psi(4096).unwrap();
        assert!((libm::log(h) - (p.omega + c * psi.partial_sum())).abs() < 1e-12);
        // psi(1) = delta up to the slowly decaying tail
        assert!((libm::log(h) - (p.omega + c * p.delta)).abs() <= c * 1.15 * psi.tail_estimate());

        // deterministic path sits at log h = (omega + xi psi(1)) / (1 - phi psi(1)) ~ 0.1
        let q = RhygarchParams { tau1: 0.0, tau2: 0.0, sigma_u: 1e-300, ..p };
        let s = crate::sim::simulate(&q, &crate::sim::SimOptions::new(1500, 1)).unwrap();
        let h = forecast_h(&q, &s.realized, 1000).unwrap();
        assert!((h - 1.105_17).abs() < 3e-3, "{h}");
        assert!((h - s.latent_h_next.unwrap()).abs() < 1e-12);

        assert!(forecast_h(&p, &[], 10).is_err());
        assert!(forecast_h(&p, &[1.0, -1.0], 10).is_err());
    }

    #[test]
    fn var_examples() {
        assert_eq!(var_forecast(1.0, 0.5, &G, STD).unwrap(), 0.0);
        assert!((var_forecast(1.0, 0.05, &G, STD).unwrap() + 1.644_853_6).abs() < 1e-7);
        assert!((var_forecast(1.27128, 0.05, &G, STD).unwrap() + 1.8547).abs() < 5e-4);
        assert!(var_forecast(0.0, 0.05, &G, STD).is_err());
        assert!(var_forecast(1.0, 1.0, &G, STD).is_err());
    }

    #[test]
    fn es_examples() {
        let es = es_forecast(1.27128, 0.05, &G, Convention::Paper, STD).unwrap();
        assert!((es - 0.12241).abs() < 5e-5, "{es}");
        let es = es_forecast(1.0, 0.05, &G, Convention::Standard, STD).unwrap();
        assert!((es + 2.062_713).abs() < 1e-5, "{es}");
        let es = es_forecast(1.0, 0.5, &G, Convention::Paper, STD).unwrap();
        assert!((es - 0.797_884_6).abs() < 1e-7);
    }

    #[test]
    fn t_raw_flavor_matches_t_formula() {
        // raw flavor: sqrt(h) t_nu(q) / (1 - a) (nu + q^2) / (nu - 1) with q = T_nu^{-1}(a)
        let dist = InnovationDist::StudentT { nu: 3.0 };
        let h = 1.3;
        let q = t_quantile(0.05, 3.0).unwrap();
        let direct = libm::sqrt(h) * t_pdf(q, 3.0) / 0.95 * (3.0 + q * q) / 2.0;
        let es = es_forecast(h, 0.05, &dist, Convention::Paper, QuantileFlavor::Raw).unwrap();
        assert!((es - direct).abs() < 1e-14);
        let var = var_forecast(h, 0.05, &dist, QuantileFlavor::Raw).unwrap();
        assert!((var - libm::sqrt(h) * q).abs() < 1e-14);
    }

    #[test]
    fn standard_es_matches_quadrature() {
        for alpha in [0.01, 0.05, 0.1] {
            let a = es_forecast(1.0, alpha, &G, Convention::Standard, STD).unwrap();
            let b = es_quadrature_oracle(1.0, alpha, &G, STD).unwrap();
            assert!((a - b).abs() < 1e-6);
            for nu in [3.0, 5.0, 10.0] {
                let d = InnovationDist::StudentT { nu };
                for flavor in [STD, QuantileFlavor::Raw] {
                    let a = es_forecast(2.0, alpha, &d, Convention::Standard, flavor).unwrap();
                    let b = es_quadrature_oracle(2.0, alpha, &d, flavor).unwrap();
                    assert!((a - b).abs() < 1e-5, "nu={nu} alpha={alpha} {a} {b}");
                }
            }
        }
    }

    #[test]
    fn quadrature_oracle_sanity() {
        let b = es_quadrature_oracle(1.0, 0.05, &G, STD).unwrap();
        assert!((b + 2.062_713).abs() < 1e-6);
        // median split of a symmetric law: the lower-half mean is -E|T|
        let d = InnovationDist::StudentT { nu: 3.0 };
        let half = es_quadrature_oracle(1.0, 0.5, &d, STD).unwrap();
        // E|X| for t_3 is 2 sqrt(3) / pi, scaled by sqrt(1/3)
        let expect = -2.0 / core::f64::consts::PI;
        assert!((half - expect).abs() < 1e-8, "{half}");
        let whole = es_quadrature_oracle(1.0, 1.0 - 1e-12, &G, STD).unwrap();
        assert!(whole.abs() < 1e-9);
    }

    #[test]
    fn positive_homogeneity() {
        let d = InnovationDist::StudentT { nu: 5.0 };
        for c in [0.3, 1.0, 2.7] {
            for conv in [Convention::Paper, Convention::Standard] {
                let base = es_forecast(1.1, 0.01, &d, conv, STD).unwrap();
                let scaled = es_forecast(c * c * 1.1, 0.01, &d, conv, STD).unwrap();
                assert!((scaled - c * base).abs() < 1e-12);
            }
            let base = var_forecast(1.1, 0.01, &G, STD).unwrap();
            let scaled = var_forecast(c * c * 1.1, 0.01, &G, STD).unwrap();
            assert!((scaled - c * base).abs() < 1e-12);
        }
    }

    #[test]
    fn forecast_invariants() {
        for dist in [G, InnovationDist::StudentT { nu: 4.0 }] {
            let f = risk_at(1.7, 0.05, &dist, Convention::Standard, STD).unwrap();
            assert_eq!(f.var_value, libm::sqrt(1.7) * dist.quantile(0.05).unwrap());
            assert!(f.es_value <= f.var_value);
        }
    }

    #[test]
    fn forecast_json_shape() {
        let f = risk_at(1.0, 0.05, &InnovationDist::StudentT { nu: 3.0 }, Convention::Paper, STD).unwrap();
        let v: serde_json::Value = serde_json::to_value(f).unwrap();
        for key in ["h_next", "alpha", "var", "es", "convention", "dist", "nu"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["dist"], "student_t");
        let g = risk_at(1.0, 0.05, &G, Convention::Paper, STD).unwrap();
        assert!(serde_json::to_value(g).unwrap().get("nu").is_none());
    }
}
