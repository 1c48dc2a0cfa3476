//! Quasi-maximum-likelihood estimation in an unconstrained coordinate system.
//!
//! Coordinates, in order:
//! `[omega, xi, phi, tau1, tau2, log sigma_u, (log(nu - 2)), gamma, atanh beta, logit delta, logit d]`.
//! The four filter coordinates come last so that, while a finite-difference
//! gradient walks the measurement coordinates, the filtered lag sums are reused.
//!
//! Boundary values map to `±BOUNDARY` (`logit 0 = -40`, `logit 1 = 40`); `|beta|`
//! is clamped to `1 - 1e-12` before `atanh`.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::dist::InnovationDist;
use crate::error::{Error, Result};
use crate::filter::lagged_sums;
use crate::loglik::{assemble, log_realized, mean as mean_of, LikOptions, LikelihoodValue, ReturnDensity};
use crate::model::{validate, RhygarchParams};
use crate::optim::{bfgs, nelder_mead, newton_polish, numeric_gradient, BfgsOptions, Gradient, NelderMeadOptions};
use crate::sim::SeriesPair;

/// Image of the closed ends of the logit-mapped intervals.
pub const BOUNDARY: f64 = 40.0;
const BETA_LIMIT: f64 = 1.0 - 1e-12;

/// Which return likelihood to maximize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    /// Gaussian returns (GG likelihood).
    Gaussian,
    /// Standardized t returns with `nu` estimated jointly (tG likelihood).
    StudentT,
}

impl DistKind {
    pub fn of(dist: &InnovationDist) -> Self {
        match dist {
            InnovationDist::Gaussian => DistKind::Gaussian,
            InnovationDist::StudentT { .. } => DistKind::StudentT,
        }
    }

    /// Length of the unconstrained vector.
    pub fn dim(self) -> usize {
        match self {
            DistKind::Gaussian => 10,
            DistKind::StudentT => 11,
        }
    }
}

fn logit(p: f64) -> f64 {
    if p <= 0.0 {
        -BOUNDARY
    } else if p >= 1.0 {
        BOUNDARY
    } else {
        libm::log(p / (1.0 - p)).clamp(-BOUNDARY, BOUNDARY)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn to_unconstrained(p: &RhygarchParams) -> Vec<f64> {
    let mut v = vec![p.omega, p.xi, p.phi, p.tau1, p.tau2, libm::log(p.sigma_u)];
    if let InnovationDist::StudentT { nu } = p.innovation {
        v.push(libm::log(nu - 2.0));
    }
    v.push(p.gamma);
    v.push(libm::atanh(p.beta.clamp(-BETA_LIMIT, BETA_LIMIT)));
    v.push(logit(p.delta));
    v.push(logit(p.d));
    v
}

pub fn from_unconstrained(v: &[f64], kind: DistKind) -> Result<RhygarchParams> {
    if v.len() != kind.dim() {
        return Err(Error::domain("unconstrained vector has the wrong length"));
    }
    let (innovation, f) = match kind {
        DistKind::Gaussian => (InnovationDist::Gaussian, 6),
        DistKind::StudentT => (InnovationDist::StudentT { nu: 2.0 + libm::exp(v[6]) }, 7),
    };
    Ok(RhygarchParams {
        omega: v[0],
        xi: v[1],
        phi: v[2],
        tau1: v[3],
        tau2: v[4],
        sigma_u: libm::exp(v[5]),
        innovation,
        gamma: v[f],
        beta: libm::tanh(v[f + 1]),
        delta: sigmoid(v[f + 2]),
        d: sigmoid(v[f + 3]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub truncation: usize,
    pub drop_presample: bool,
    /// Convergence requires the gradient norm of the total log-likelihood,
    /// in unconstrained coordinates, to fall below this.
    pub grad_tol: f64,
    /// Simplex objective-spread tolerance on the per-observation scale.
    pub ftol: f64,
    pub max_evals: usize,
    pub max_iter: usize,
    /// Jittered restarts tried when a fit does not converge.
    pub restarts: usize,
    /// Seed for the restart jitter.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            truncation: crate::DEFAULT_TRUNCATION,
            drop_presample: false,
            grad_tol: 1e-4,
            ftol: 1e-8,
            max_evals: 6000,
            max_iter: 400,
            restarts: 3,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn with_truncation(truncation: usize) -> Self {
        FitOptions { truncation, ..Default::default() }
    }

    fn lik_options(&self) -> LikOptions {
        LikOptions { truncation: self.truncation, drop_presample: self.drop_presample }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub estimates: RhygarchParams,
    pub loglik: LikelihoodValue,
    pub converged: bool,
    pub iterations: usize,
    /// Gradient norm of the total log-likelihood at the optimum, unconstrained coordinates.
    pub grad_norm: f64,
    /// A coordinate of the final gradient needed a one-sided difference.
    pub one_sided: bool,
    pub start: RhygarchParams,
    pub clamp_events: usize,
    pub seed: u64,
    pub evals: usize,
    pub restarts_used: usize,
    /// Best log-likelihood after each optimizer iteration.
    pub trace: Vec<f64>,
}

struct LoglikSummary<'a>(&'a LikelihoodValue);

impl Serialize for LoglikSummary<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("LikelihoodValue", 3)?;
        st.serialize_field("total", &self.0.total)?;
        st.serialize_field("returns_part", &self.0.returns_part)?;
        st.serialize_field("measure_part", &self.0.measure_part)?;
        st.end()
    }
}

impl Serialize for FitResult {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("FitResult", 11)?;
        st.serialize_field("estimates", &self.estimates)?;
        st.serialize_field("loglik", &LoglikSummary(&self.loglik))?;
        st.serialize_field("converged", &self.converged)?;
        st.serialize_field("iterations", &self.iterations)?;
        st.serialize_field("grad_norm", &self.grad_norm)?;
        st.serialize_field("one_sided", &self.one_sided)?;
        st.serialize_field("start", &self.start)?;
        st.serialize_field("clamp_events", &self.clamp_events)?;
        st.serialize_field("seed", &self.seed)?;
        st.serialize_field("evals", &self.evals)?;
        st.serialize_field("restarts_used", &self.restarts_used)?;
        st.end()
    }
}

/// Negative mean log-likelihood over unconstrained coordinates, with the
/// lag sums of the last filter parameters kept around.
struct Objective<'a> {
    kind: DistKind,
    returns: &'a [f64],
    logx: Vec<f64>,
    presample: f64,
    k: usize,
    first: usize,
    cache_key: Option<[u64; 4]>,
    cache: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(data: &'a SeriesPair, kind: DistKind, opts: &FitOptions) -> Result<Self> {
        data.check()?;
        let logx = log_realized(&data.realized)?;
        let presample = mean_of(&logx);
        Ok(Objective {
            kind,
            returns: &data.returns,
            logx,
            presample,
            k: opts.truncation,
            first: opts.lik_options().first_index(data.len()),
            cache_key: None,
            cache: Vec::new(),
        })
    }

    fn n_eff(&self) -> f64 {
        (self.returns.len() - self.first) as f64
    }

    fn evaluate(&mut self, p: &RhygarchParams, keep: bool) -> Option<LikelihoodValue> {
        if !validate(p).is_empty() {
            return None;
        }
        let key = [p.gamma.to_bits(), p.beta.to_bits(), p.delta.to_bits(), p.d.to_bits()];
        if self.cache_key != Some(key) {
            let psi = p.psi(self.k).ok()?;
            self.cache = lagged_sums(psi.weights(), &self.logx, self.presample);
            self.cache_key = Some(key);
        }
        let density = ReturnDensity::new(&p.innovation).ok()?;
        Some(assemble(p, density, self.returns, &self.logx, &self.cache, self.first, keep))
    }

    fn value(&mut self, x: &[f64]) -> f64 {
        let Ok(p) = from_unconstrained(x, self.kind) else { return f64::INFINITY };
        match self.evaluate(&p, false) {
            Some(v) if v.total.is_finite() => -v.total / self.n_eff(),
            _ => f64::INFINITY,
        }
    }
}

/// Default interior starting point for `data`.
pub fn default_start(data: &SeriesPair, kind: DistKind, opts: &FitOptions) -> Result<RhygarchParams> {
    let mut obj = Objective::new(data, kind, opts)?;
    let mean_r2 = data.returns.iter().map(|r| r * r).sum::<f64>() / data.len() as f64;
    let xi = if mean_r2 > 0.0 { obj.presample - libm::log(mean_r2) } else { 0.0 };
    let innovation = match kind {
        DistKind::Gaussian => InnovationDist::Gaussian,
        DistKind::StudentT => InnovationDist::StudentT { nu: 8.0 },
    };
    let mut p = RhygarchParams {
        omega: 0.05,
        gamma: 0.05,
        beta: 0.5,
        delta: 0.5,
        d: 0.3,
        xi,
        phi: 1.0,
        tau1: -0.05,
        tau2: 0.05,
        sigma_u: 1.0,
        innovation,
    };
    if let Some(v) = obj.evaluate(&p, true) {
        let u = &v.u_resid;
        let m = mean_of(u);
        let var = u.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / u.len().max(1) as f64;
        if var > 0.0 && var.is_finite() {
            p.sigma_u = libm::sqrt(var);
        }
    }
    Ok(p)
}

/// Finite-difference gradient of the total log-likelihood in unconstrained
/// coordinates, evaluated at `p`.
pub fn loglik_gradient(p: &RhygarchParams, data: &SeriesPair, opts: &FitOptions) -> Result<Gradient> {
    let kind = DistKind::of(&p.innovation);
    let mut obj = Objective::new(data, kind, opts)?;
    let n = obj.n_eff();
    let x = to_unconstrained(p);
    let mut f = |x: &[f64]| obj.value(x);
    let mut g = numeric_gradient(&mut f, &x, None);
    g.g.iter_mut().for_each(|v| *v *= -n);
    Ok(g)
}

struct Attempt {
    x: Vec<f64>,
    fx: f64,
    converged: bool,
    grad: Gradient,
    iterations: usize,
    evals: usize,
    trace: Vec<f64>,
}

fn run_once(obj: &mut Objective<'_>, x0: &[f64], opts: &FitOptions) -> Attempt {
    let n = obj.n_eff();
    let mut f = |x: &[f64]| obj.value(x);
    let steps: Vec<f64> = x0.iter().map(|v| 0.1f64.max(0.1 * v.abs()).min(1.0)).collect();
    let nm_opts = NelderMeadOptions { max_evals: opts.max_evals, ftol: opts.ftol, xtol: 1e-4 };
    let nm = nelder_mead(&mut f, x0, &steps, &nm_opts);
    let b_opts = BfgsOptions { grad_tol: opts.grad_tol / n, max_iter: opts.max_iter };
    let mut b = bfgs(&mut f, &nm.x, &b_opts);
    if !b.result.converged && b.result.fx.is_finite() {
        let polish = newton_polish(&mut f, &b.result.x, b_opts.grad_tol, 10);
        b.result.evals += polish.result.evals;
        b.result.iterations += polish.result.iterations;
        b.result.trace.extend(polish.result.trace.iter().skip(1));
        b.result.x = polish.result.x;
        b.result.fx = polish.result.fx;
        b.result.converged = polish.result.converged;
        b.gradient = polish.gradient;
    }
    let mut trace = nm.trace;
    trace.extend(b.result.trace.iter().skip(1));
    Attempt {
        x: b.result.x,
        fx: b.result.fx,
        converged: b.result.converged,
        grad: b.gradient,
        iterations: nm.iterations + b.result.iterations,
        evals: nm.evals + b.result.evals,
        trace,
    }
}

/// Maximize the likelihood matching `kind`: a simplex search followed by a
/// BFGS polish with central-difference gradients. On non-convergence up to
/// `opts.restarts` jittered restarts from the best point are tried.
pub fn fit(data: &SeriesPair, kind: DistKind, start: Option<&RhygarchParams>, opts: &FitOptions) -> Result<FitResult> {
    let default = default_start(data, kind, opts)?;
    let start = match start {
        Some(s) => {
            if DistKind::of(&s.innovation) != kind {
                return Err(Error::domain("start innovation does not match the requested likelihood"));
            }
            *s
        }
        None => default,
    };
    let mut obj = Objective::new(data, kind, opts)?;
    let n = obj.n_eff();

    let mut x0 = to_unconstrained(&start);
    if !obj.value(&x0).is_finite() {
        // pull the start toward the default interior point
        let anchor = to_unconstrained(&default);
        let mut repaired = false;
        for _ in 0..30 {
            for (a, b) in x0.iter_mut().zip(&anchor) {
                *a = 0.5 * (*a + b);
            }
            if obj.value(&x0).is_finite() {
                repaired = true;
                break;
            }
        }
        if !repaired && !obj.value(&anchor).is_finite() {
            return Err(Error::Optimizer("likelihood is not finite at the start".into()));
        }
        if !repaired {
            x0 = anchor;
        }
    }

    let mut best = run_once(&mut obj, &x0, opts);
    let mut iterations = best.iterations;
    let mut evals = best.evals;
    let mut trace = best.trace.clone();
    let mut restarts_used = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while !best.converged && restarts_used < opts.restarts {
        restarts_used += 1;
        let jittered: Vec<f64> = best
            .x
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + 0.1 * e
            })
            .collect();
        let a = run_once(&mut obj, &jittered, opts);
        iterations += a.iterations;
        evals += a.evals;
        if a.fx < best.fx || (a.converged && !best.converged && a.fx <= best.fx + 1e-12) {
            best = a;
        }
        // the reported trace only ever records improvements
        let last = trace.last().copied().unwrap_or(f64::INFINITY);
        trace.push(last.min(best.fx));
    }

    let estimates = from_unconstrained(&best.x, kind)?;
    let loglik = obj
        .evaluate(&estimates, true)
        .ok_or_else(|| Error::Optimizer("likelihood is not finite at the optimum".into()))?;
    let grad_norm = best.grad.norm() * n;
    let converged = best.converged && grad_norm <= opts.grad_tol && validate(&estimates).is_empty();
    Ok(FitResult {
        estimates,
        clamp_events: loglik.clamp_events,
        loglik,
        converged,
        iterations,
        grad_norm,
        one_sided: best.grad.one_sided,
        start,
        seed: opts.seed,
        evals,
        restarts_used,
        trace: trace.iter().map(|v| -v * n).collect(),
    })
}
