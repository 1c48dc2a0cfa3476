//! Gaussian and variance-standardized Student-t primitives.
//!
//! The standardized t is `T = X * sqrt((nu - 2) / nu)` with `X ~ t(nu)`, so that
//! `Var(T) = 1`. Raw-t helpers are exposed as well because some risk conventions
//! quote quantiles on the raw scale.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Distribution of the return innovation `z_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "innovation", rename_all = "snake_case")]
pub enum InnovationDist {
    Gaussian,
    /// Student-t with `nu` degrees of freedom, rescaled to unit variance.
    StudentT {
        nu: f64,
    },
}

impl InnovationDist {
    pub fn nu(&self) -> Option<f64> {
        match self {
            InnovationDist::Gaussian => None,
            InnovationDist::StudentT { nu } => Some(*nu),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            InnovationDist::Gaussian => "gaussian",
            InnovationDist::StudentT { .. } => "student_t",
        }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            InnovationDist::Gaussian => Ok(()),
            InnovationDist::StudentT { nu } => check_nu(*nu),
        }
    }

    /// Finite third and fourth moments.
    pub fn has_fourth_moment(&self) -> bool {
        match self {
            InnovationDist::Gaussian => true,
            InnovationDist::StudentT { nu } => *nu > 4.0,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            InnovationDist::Gaussian => norm_pdf(x),
            InnovationDist::StudentT { nu } => std_t_pdf_unchecked(x, *nu),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            InnovationDist::Gaussian => norm_cdf(x),
            InnovationDist::StudentT { nu } => t_cdf_unchecked(x / t_scale(*nu), *nu),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            InnovationDist::Gaussian => norm_quantile(p),
            InnovationDist::StudentT { nu } => std_t_quantile(p, *nu),
        }
    }

    /// One draw with mean zero and unit variance.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InnovationDist::Gaussian => rng.sample(StandardNormal),
            InnovationDist::StudentT { nu } => {
                // nu was validated by the caller; StudentT::new only rejects nu <= 0
                let t = StudentT::new(*nu).expect("degrees of freedom validated");
                t.sample(rng) * t_scale(*nu)
            }
        }
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if nu.is_finite() && nu > 2.0 || nu == f64::INFINITY {
        Ok(())
    } else {
        Err(Error::domain("student-t degrees of freedom must exceed 2"))
    }
}

fn check_prob(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("probability must lie in (0, 1)"))
    }
}

/// `sqrt((nu - 2) / nu)`, the factor that maps a raw t draw to unit variance.
pub fn t_scale(nu: f64) -> f64 {
    libm::sqrt((nu - 2.0) / nu)
}

pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * x * x)
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Inverse of [`norm_cdf`]: Wichura's AS 241 rational approximation followed by
/// one Newton step on the erfc-based CDF.
pub fn norm_quantile(p: f64) -> Result<f64> {
    check_prob(p)?;
    let x = as241(p);
    let f = norm_pdf(x);
    if f < 1e-300 {
        return Ok(x);
    }
    // residual F(x) - p, taken through the survival function on the upper half
    let err = if x < 0.0 { norm_cdf(x) - p } else { (1.0 - p) - 0.5 * libm::erfc(x * FRAC_1_SQRT_2) };
    let step = err / f;
    // Halley step
    Ok(x - step / (1.0 + 0.5 * x * step))
}

fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_128) * r + 67265.770_927_008_7) * r
                + 45921.953_931_549_87)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((r * 5226.495_278_852_545 + 28729.085_735_721_943) * r + 39307.895_800_092_71) * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = libm::sqrt(-libm::log(r));
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_184) * r + 0.241_780_725_177_450_6) * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((r * 1.050_750_071_644_416_9e-9 + 5.475_938_084_995_345e-4) * r + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r + 0.001_242_660_947_388_078_4) * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Density of the raw Student-t with `nu` degrees of freedom.
pub fn t_pdf(x: f64, nu: f64) -> f64 {
    let log_norm = libm::lgamma(0.5 * (nu + 1.0)) - libm::lgamma(0.5 * nu) - 0.5 * libm::log(nu * PI);
    libm::exp(log_norm - 0.5 * (nu + 1.0) * libm::log1p(x * x / nu))
}

/// CDF of the raw Student-t, through the regularized incomplete beta function.
pub fn t_cdf(x: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::domain("degrees of freedom must be positive"));
    }
    Ok(t_cdf_unchecked(x, nu))
}

fn t_cdf_unchecked(x: f64, nu: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    if nu == f64::INFINITY {
        return norm_cdf(x);
    }
    let x2 = x * x;
    // lower tail mass P(T < -|x|) = I_{nu/(nu+x^2)}(nu/2, 1/2) / 2
    let tail = if x2 < nu {
        let s = x2 / (nu + x2);
        0.5 * (1.0 - reg_inc_beta(0.5, 0.5 * nu, s))
    } else {
        0.5 * reg_inc_beta(0.5 * nu, 0.5, nu / (nu + x2))
    };
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Regularized incomplete beta `I_x(a, b)` by Lentz's continued fraction.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    if x < (a + 1.0) / (a + b + 2.0) {
        libm::exp(ln_front) * beta_cf(a, b, x) / a
    } else {
        1.0 - libm::exp(ln_front) * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Quantile of the raw Student-t: safeguarded Newton iteration inside a bracket
/// that is halved whenever a Newton step leaves it.
pub fn t_quantile(p: f64, nu: f64) -> Result<f64> {
    check_prob(p)?;
    if !(nu > 0.0) {
        return Err(Error::domain("degrees of freedom must be positive"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if nu == f64::INFINITY {
        return norm_quantile(p);
    }
    // Solve on the lower tail and reflect; the lower-tail CDF keeps relative precision.
    let (target, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    let f = |x: f64| t_cdf_unchecked(-x, nu) - target;
    // f is decreasing in x >= 0, f(0) = 0.5 - target > 0
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    let mut x = {
        let z = -as241(target);
        if z > lo && z < hi {
            z
        } else {
            0.5 * (lo + hi)
        }
    };
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            break;
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // d/dx of F(-x) is -pdf(x)
        let newton = x + fx / t_pdf(x, nu);
        let next = if newton > lo && newton < hi && newton.is_finite() { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(sign * x)
}

/// Density of the variance-standardized t.
pub fn std_t_pdf(x: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    Ok(std_t_pdf_unchecked(x, nu))
}

fn std_t_pdf_unchecked(x: f64, nu: f64) -> f64 {
    if nu == f64::INFINITY {
        return norm_pdf(x);
    }
    let s = t_scale(nu);
    t_pdf(x / s, nu) / s
}

pub fn std_t_cdf(x: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    if nu == f64::INFINITY {
        return Ok(norm_cdf(x));
    }
    Ok(t_cdf_unchecked(x / t_scale(nu), nu))
}

pub fn std_t_quantile(p: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    if nu == f64::INFINITY {
        return norm_quantile(p);
    }
    Ok(t_quantile(p, nu)? * t_scale(nu))
}

/// `n` i.i.d. draws of `mean + sd * z` with `z` from `dist`.
pub fn sample<R: Rng + ?Sized>(dist: &InnovationDist, mean: f64, sd: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(sd >= 0.0) {
        return Err(Error::domain("standard deviation must be non-negative"));
    }
    dist.check()?;
    Ok((0..n).map(|_| mean + sd * dist.draw(rng)).collect())
}
