//! Path simulation for the (1,d,1) dynamics.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::dot;
use crate::model::{means_from_psi1, report_from_weights, RhygarchParams};

/// ChaCha stream carrying the return innovations `z_t`.
pub const Z_STREAM: u64 = 0;
/// ChaCha stream carrying the measurement noise `u_t`.
pub const U_STREAM: u64 = 1;

/// Aligned returns and realized measures, plus the latent series when simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPair {
    pub returns: Vec<f64>,
    pub realized: Vec<f64>,
    pub latent_h: Option<Vec<f64>>,
    pub latent_z: Option<Vec<f64>>,
    pub latent_u: Option<Vec<f64>>,
    /// `h_{T+1}` implied by the full simulated history.
    pub latent_h_next: Option<f64>,
    pub seed: u64,
    pub burn_in: usize,
    pub truncation: usize,
}

impl SeriesPair {
    /// Observed data only; checks equal lengths and positive realized values.
    pub fn observed(returns: Vec<f64>, realized: Vec<f64>) -> Result<Self> {
        let s = SeriesPair {
            returns,
            realized,
            latent_h: None,
            latent_z: None,
            latent_u: None,
            latent_h_next: None,
            seed: 0,
            burn_in: 0,
            truncation: 0,
        };
        s.check()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        if self.returns.is_empty() {
            return Err(Error::Data { index: 0, reason: "empty series".into() });
        }
        if self.returns.len() != self.realized.len() {
            return Err(Error::Data {
                index: self.returns.len().min(self.realized.len()),
                reason: "returns and realized differ in length".into(),
            });
        }
        for (i, r) in self.returns.iter().enumerate() {
            if !r.is_finite() {
                return Err(Error::Data { index: i, reason: "non-finite return".into() });
            }
        }
        for (i, x) in self.realized.iter().enumerate() {
            if !(*x > 0.0) || !x.is_finite() {
                return Err(Error::Data { index: i, reason: "realized measure must be positive".into() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub t: usize,
    pub burn_in: usize,
    pub truncation: usize,
    pub seed: u64,
    /// Simulate even when `phi * psi(1) >= 1`, starting from `log x = 0`.
    pub allow_nonstationary: bool,
}

impl SimOptions {
    pub fn new(t: usize, seed: u64) -> Self {
        SimOptions { t, burn_in: 2000, truncation: crate::DEFAULT_TRUNCATION, seed, allow_nonstationary: false }
    }
}

/// Simulate `T` observations after discarding `burn_in` points.
///
/// Lags before the first simulated point use the unconditional mean of `log x`.
/// `z` and `u` come from two ChaCha streams keyed by the same seed.
pub fn simulate(p: &RhygarchParams, opts: &SimOptions) -> Result<SeriesPair> {
    if opts.t == 0 {
        return Err(Error::domain("T must be at least 1"));
    }
    p.ensure_valid()?;
    let k = opts.truncation;
    let psi = p.psi(k)?;
    let report = report_from_weights(p, &psi);
    let presample = if report.first_moment_ok {
        means_from_psi1(p, psi.partial_sum())?.1
    } else if opts.allow_nonstationary {
        0.0
    } else {
        return Err(Error::NonStationary(alloc::format!(
            "phi * sum(psi) = {:.6} >= 1 at K = {}",
            report.phi_sum_psi,
            k
        )));
    };

    let mut z_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    z_rng.set_stream(Z_STREAM);
    let mut u_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    u_rng.set_stream(U_STREAM);

    let n = opts.burn_in + opts.t;
    let rev: Vec<f64> = psi.weights().iter().rev().copied().collect();
    // log x buffer: K presample slots followed by the simulated values
    let mut logx = Vec::with_capacity(k + n);
    logx.resize(k, presample);

    let keep = opts.t;
    let mut returns = Vec::with_capacity(keep);
    let mut realized = Vec::with_capacity(keep);
    let mut hs = Vec::with_capacity(keep);
    let mut zs = Vec::with_capacity(keep);
    let mut us = Vec::with_capacity(keep);

    for t in 0..n {
        let log_h = p.omega + dot(&rev, &logx[t..t + k]);
        let z = p.innovation.draw(&mut z_rng);
        let e: f64 = u_rng.sample(StandardNormal);
        let u = p.sigma_u * e;
        let h = libm::exp(log_h);
        let lx = p.xi + p.phi * log_h + p.leverage(z) + u;
        logx.push(lx);
        if t >= opts.burn_in {
            returns.push(libm::sqrt(h) * z);
            realized.push(libm::exp(lx));
            hs.push(h);
            zs.push(z);
            us.push(u);
        }
    }
    let h_next = libm::exp(p.omega + dot(&rev, &logx[n..n + k]));

    Ok(SeriesPair {
        returns,
        realized,
        latent_h: Some(hs),
        latent_z: Some(zs),
        latent_u: Some(us),
        latent_h_next: Some(h_next),
        seed: opts.seed,
        burn_in: opts.burn_in,
        truncation: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::InnovationDist;

    #[test]
    fn deterministic_fixed_point() {
        // without leverage or noise log h settles at (omega + xi psi(1)) / (1 - phi psi(1))
        let p = RhygarchParams { tau1: 0.0, tau2: 0.0, sigma_u: 1e-300, ..RhygarchParams::model1() };
        let s = simulate(&p, &SimOptions { t: 500, ..SimOptions::new(500, 3) }).unwrap();
        let psi1 = p.psi(1000).unwrap().partial_sum();
        let fixed = (p.omega + p.xi * psi1) / (1.0 - p.phi * psi1);
        for h in s.latent_h.as_ref().unwrap() {
            assert!((libm::log(*h) - fixed).abs() < 1e-12);
        }
        assert!((fixed - 0.1).abs() < 2e-3);
    }

    #[test]
    fn collapses_to_white_noise() {
        let p = RhygarchParams { delta: 0.0, omega: 0.0, tau1: 0.0, tau2: 0.0, ..RhygarchParams::model1() };
        let s = simulate(&p, &SimOptions::new(20_000, 1)).unwrap();
        assert!(s.latent_h.as_ref().unwrap().iter().all(|&h| h == 1.0));
        let var = s.returns.iter().map(|r| r * r).sum::<f64>() / s.len() as f64;
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn seed_determinism_and_shape() {
        let p = RhygarchParams::model2();
        let o = SimOptions { burn_in: 300, truncation: 200, ..SimOptions::new(400, 99) };
        let a = simulate(&p, &o).unwrap();
        let b = simulate(&p, &o).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 400);
        assert!(a.realized.iter().all(|&x| x > 0.0));
        let c = simulate(&p, &SimOptions { seed: 100, ..o }).unwrap();
        assert_ne!(a.returns, c.returns);
        a.check().unwrap();
    }

    #[test]
    fn refuses_nonstationary() {
        let p = RhygarchParams { phi: 3.0, delta: 1.0, ..RhygarchParams::model1() };
        let o = SimOptions { truncation: 500, burn_in: 10, ..SimOptions::new(10, 1) };
        assert!(matches!(simulate(&p, &o), Err(Error::NonStationary(_))));
        let o = SimOptions { allow_nonstationary: true, ..o };
        assert!(simulate(&p, &o).is_ok());
    }

    #[test]
    fn measurability() {
        // r_t depends only on z_t and the past; changing later draws leaves earlier values intact
        let p = RhygarchParams::model1();
        let short = simulate(&p, &SimOptions { burn_in: 100, truncation: 100, ..SimOptions::new(50, 5) }).unwrap();
        let long = simulate(&p, &SimOptions { burn_in: 100, truncation: 100, ..SimOptions::new(80, 5) }).unwrap();
        assert_eq!(&long.returns[..50], &short.returns[..]);
        assert_eq!(&long.realized[..50], &short.realized[..]);
        assert_eq!(long.latent_h.as_ref().unwrap()[50], short.latent_h_next.unwrap());
    }

    #[test]
    fn conditional_moments() {
        // fixed past: h_t is fixed, only z_t varies across seeds
        let p = RhygarchParams { innovation: InnovationDist::StudentT { nu: 6.0 }, ..RhygarchParams::model1() };
        let base = SimOptions { burn_in: 0, truncation: 50, ..SimOptions::new(1, 0) };
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let m = 20_000;
        let mut h0 = None;
        for seed in 0..m {
            let s = simulate(&p, &SimOptions { seed, ..base }).unwrap();
            let h = s.latent_h.unwrap()[0];
            assert_eq!(*h0.get_or_insert(h), h);
            sum += s.returns[0];
            sum2 += s.returns[0] * s.returns[0];
        }
        let h = h0.unwrap();
        let mean = sum / m as f64;
        let second = sum2 / m as f64;
        // standard errors from Var(z) = 1 and Var(z^2) = 2 + 6/(nu-4) = 5
        assert!(mean.abs() < 4.0 * libm::sqrt(h / m as f64));
        assert!((second - h).abs() < 4.0 * h * libm::sqrt(5.0 / m as f64));
    }
}
