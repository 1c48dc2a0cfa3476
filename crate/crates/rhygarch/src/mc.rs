//! Simulate / fit / forecast replications and their Mean-MSE summaries.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rhygarch_core::fit::DistKind;
use rhygarch_core::risk::forecast_h;
use rhygarch_core::{
    check_stationarity, es_forecast, fit, simulate, var_forecast, Convention, FitOptions, InnovationDist,
    QuantileFlavor, RhygarchParams, SimOptions,
};

/// Environment variable capping the number of replication threads.
pub const THREADS_ENV: &str = "RHYGARCH_THREADS";

fn default_burn_in() -> usize {
    2000
}

fn default_true() -> bool {
    true
}

fn default_levels() -> Vec<f64> {
    vec![0.05, 0.01]
}

fn default_conventions() -> Vec<Convention> {
    vec![Convention::Paper]
}

/// Study configuration, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// True parameters.
    pub model: RhygarchParams,
    /// Likelihood used for estimation; defaults to the law of `model`.
    #[serde(default)]
    pub dist: Option<DistKind>,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_conventions")]
    pub conventions: Vec<Convention>,
    #[serde(default)]
    pub quantile: QuantileFlavor,
    pub master_seed: u64,
    /// When false the true parameters stand in for the estimates.
    #[serde(default = "default_true")]
    pub fit: bool,
    #[serde(default)]
    pub label: Option<String>,
}

fn default_k() -> usize {
    rhygarch_core::DEFAULT_TRUNCATION
}

impl StudyConfig {
    pub fn new(model: RhygarchParams, t: usize, m: usize, master_seed: u64) -> Self {
        StudyConfig {
            model,
            dist: None,
            t,
            m,
            k: default_k(),
            burn_in: default_burn_in(),
            levels: default_levels(),
            conventions: default_conventions(),
            quantile: QuantileFlavor::Standardized,
            master_seed,
            fit: true,
            label: None,
        }
    }

    pub fn dist_kind(&self) -> DistKind {
        self.dist.unwrap_or_else(|| DistKind::of(&self.model.innovation))
    }

    pub fn check(&self) -> Result<(), String> {
        if self.t == 0 || self.m == 0 || self.k == 0 {
            return Err("T, M and K must be positive".into());
        }
        if let Some(bad) = self.levels.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(format!("level {bad} is outside (0, 1)"));
        }
        if !self.fit && self.dist_kind() != DistKind::of(&self.model.innovation) {
            return Err("without fitting, dist must match the model's innovation law".into());
        }
        self.model.ensure_valid().map_err(|e| e.to_string())?;
        let report = check_stationarity(&self.model, self.k).map_err(|e| e.to_string())?;
        if !report.first_moment_ok {
            return Err(format!("model is not stationary: phi * sum(psi) = {}", report.phi_sum_psi));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `m`; depends only on `(master_seed, m)`.
pub fn replication_seed(master_seed: u64, m: usize) -> u64 {
    splitmix64(splitmix64(master_seed) ^ (m as u64))
}

/// One risk quantity at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSpec {
    pub level: f64,
    /// `None` for VaR, which does not depend on the convention.
    pub es: Option<Convention>,
}

impl RiskSpec {
    pub fn name(&self, conventions: &[Convention]) -> String {
        let pct = format_percent(self.level);
        match self.es {
            None => format!("{pct}VaR"),
            Some(c) if conventions.len() > 1 => format!("{pct}ES ({c})"),
            Some(_) => format!("{pct}ES"),
        }
    }

    fn eval(&self, h: f64, dist: &InnovationDist, flavor: QuantileFlavor) -> Option<f64> {
        match self.es {
            None => var_forecast(h, self.level, dist, flavor).ok(),
            Some(c) => es_forecast(h, self.level, dist, c, flavor).ok(),
        }
    }
}

fn format_percent(level: f64) -> String {
    let p = level * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}%", p.round() as i64)
    } else {
        format!("{p}%")
    }
}

/// VaR rows for every level, then ES rows per convention and level.
pub fn risk_specs(levels: &[f64], conventions: &[Convention]) -> Vec<RiskSpec> {
    let mut out: Vec<RiskSpec> = levels.iter().map(|&level| RiskSpec { level, es: None }).collect();
    for &c in conventions {
        out.extend(levels.iter().map(|&level| RiskSpec { level, es: Some(c) }));
    }
    out
}

/// Parameter names in table order for the given likelihood.
pub fn param_names(kind: DistKind) -> Vec<&'static str> {
    let mut v = vec!["omega", "gamma", "beta", "delta", "d"];
    if kind == DistKind::StudentT {
        v.push("nu");
    }
    v.extend(["xi", "phi", "tau1", "tau2", "sigma_u"]);
    v
}

fn param_values(p: &RhygarchParams, kind: DistKind) -> Vec<f64> {
    let mut v = vec![p.omega, p.gamma, p.beta, p.delta, p.d];
    if kind == DistKind::StudentT {
        v.push(p.innovation.nu().unwrap_or(f64::NAN));
    }
    v.extend([p.xi, p.phi, p.tau1, p.tau2, p.sigma_u]);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub converged: bool,
    pub estimates: Option<RhygarchParams>,
    pub h_next_true: Option<f64>,
    pub h_next_est: Option<f64>,
    /// Risk values `(true, estimated)` in [`risk_specs`] order.
    pub risk: Vec<(f64, f64)>,
    pub grad_norm: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub true_value: f64,
    pub mean: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub model_label: String,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub rows: Vec<Row>,
    pub risk_rows: Vec<Row>,
    /// Share of replications whose fit converged.
    pub convergence_rate: f64,
    pub master_seed: u64,
    pub replications: Vec<Replication>,
}

fn run_replication(cfg: &StudyConfig, specs: &[RiskSpec], index: usize) -> Replication {
    let seed = replication_seed(cfg.master_seed, index);
    let mut rep = Replication {
        index,
        seed,
        converged: false,
        estimates: None,
        h_next_true: None,
        h_next_est: None,
        risk: Vec::new(),
        grad_norm: None,
        error: None,
    };
    let sim = SimOptions { t: cfg.t, burn_in: cfg.burn_in, truncation: cfg.k, seed, allow_nonstationary: false };
    let data = match simulate(&cfg.model, &sim) {
        Ok(d) => d,
        Err(e) => {
            rep.error = Some(format!("simulate: {e}"));
            return rep;
        }
    };
    let h_true = data.latent_h_next.unwrap_or(f64::NAN);
    rep.h_next_true = Some(h_true);

    let estimates = if cfg.fit {
        let opts = FitOptions { seed, ..FitOptions::with_truncation(cfg.k) };
        match fit(&data, cfg.dist_kind(), None, &opts) {
            Ok(r) => {
                rep.converged = r.converged;
                rep.grad_norm = Some(r.grad_norm);
                r.estimates
            }
            Err(e) => {
                rep.error = Some(format!("fit: {e}"));
                return rep;
            }
        }
    } else {
        rep.converged = true;
        cfg.model
    };
    rep.estimates = Some(estimates);

    let h_est = match forecast_h(&estimates, &data.realized, cfg.k) {
        Ok(h) => h,
        Err(e) => {
            rep.converged = false;
            rep.error = Some(format!("forecast: {e}"));
            return rep;
        }
    };
    rep.h_next_est = Some(h_est);
    for s in specs {
        let truth = s.eval(h_true, &cfg.model.innovation, cfg.quantile);
        let est = s.eval(h_est, &estimates.innovation, cfg.quantile);
        match (truth, est) {
            (Some(a), Some(b)) => rep.risk.push((a, b)),
            _ => {
                rep.converged = false;
                rep.error = Some(format!("risk evaluation failed at level {}", s.level));
                return rep;
            }
        }
    }
    rep
}

/// Mean and MSE of `est` against per-replication `truth`; the reported true
/// value is the average truth.
fn summarize(name: String, pairs: &[(f64, f64)]) -> Row {
    let n = pairs.len() as f64;
    if pairs.is_empty() {
        return Row { name, true_value: f64::NAN, mean: f64::NAN, mse: f64::NAN };
    }
    let true_value = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mse = pairs.iter().map(|p| (p.1 - p.0) * (p.1 - p.0)).sum::<f64>() / n;
    Row { name, true_value, mean, mse }
}

fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)
}

/// Run every replication and aggregate over the converged ones.
pub fn run_study(cfg: &StudyConfig) -> Result<McSummary, String> {
    cfg.check()?;
    let specs = risk_specs(&cfg.levels, &cfg.conventions);
    let work = || -> Vec<Replication> { (0..cfg.m).into_par_iter().map(|i| run_replication(cfg, &specs, i)).collect() };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count() {
        builder = builder.num_threads(n);
    }
    let replications = builder.build().map_err(|e| e.to_string())?.install(work);
    Ok(aggregate(cfg, replications))
}

pub fn aggregate(cfg: &StudyConfig, replications: Vec<Replication>) -> McSummary {
    let kind = cfg.dist_kind();
    let specs = risk_specs(&cfg.levels, &cfg.conventions);
    let ok: Vec<&Replication> = replications.iter().filter(|r| r.converged && r.error.is_none()).collect();
    let truth = param_values(&cfg.model, kind);
    let names = param_names(kind);
    let rows = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let pairs: Vec<(f64, f64)> =
                ok.iter().filter_map(|r| r.estimates.as_ref()).map(|e| (truth[j], param_values(e, kind)[j])).collect();
            summarize(name.to_string(), &pairs)
        })
        .collect();
    let risk_rows = specs
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let pairs: Vec<(f64, f64)> = ok.iter().map(|r| r.risk[j]).collect();
            summarize(s.name(&cfg.conventions), &pairs)
        })
        .collect();
    let label = cfg.label.clone().unwrap_or_else(|| match kind {
        DistKind::Gaussian => "RHYGARCH-GG".into(),
        DistKind::StudentT => "RHYGARCH-tG".into(),
    });
    McSummary {
        model_label: label,
        t: cfg.t,
        m: cfg.m,
        rows,
        risk_rows,
        convergence_rate: ok.len() as f64 / cfg.m.max(1) as f64,
        master_seed: cfg.master_seed,
        replications,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
    Json,
}

fn fmt_mse(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}")
    }
}

/// Render a summary; columns are parameter, true, MSE, mean.
pub fn emit_table(s: &McSummary, format: TableFormat) -> String {
    let all: Vec<&Row> = s.rows.iter().chain(&s.risk_rows).collect();
    match format {
        TableFormat::Json => {
            let mut text = serde_json::to_string_pretty(&serde_json::json!({
                "model_label": s.model_label,
                "T": s.t,
                "M": s.m,
                "convergence_rate": s.convergence_rate,
                "master_seed": s.master_seed,
                "rows": s.rows,
                "risk_rows": s.risk_rows,
            }))
            .unwrap_or_default();
            text.push('\n');
            text
        }
        TableFormat::Csv => {
            let mut out = String::from("parameter,true,mse,mean\n");
            for r in all {
                let _ = writeln!(out, "{},{},{},{}", r.name, r.true_value, r.mse, r.mean);
            }
            out
        }
        TableFormat::Text => {
            let width = all.iter().map(|r| r.name.len()).max().unwrap_or(9).max(9);
            let mut out = String::new();
            let _ = writeln!(out, "{} T={} M={} converged={:.3}", s.model_label, s.t, s.m, s.convergence_rate);
            let _ = writeln!(out, "{:<width$}  {:>10}  {:>10}  {:>10}", "parameter", "true", "MSE", "mean");
            let rule = "-".repeat(width + 36);
            let _ = writeln!(out, "{rule}");
            for r in &s.rows {
                let _ = writeln!(
                    out,
                    "{:<width$}  {:>10.4}  {:>10}  {:>10.4}",
                    r.name,
                    r.true_value,
                    fmt_mse(r.mse),
                    r.mean
                );
            }
            if !s.risk_rows.is_empty() {
                let _ = writeln!(out, "{rule}");
                for r in &s.risk_rows {
                    let _ = writeln!(
                        out,
                        "{:<width$}  {:>10.4}  {:>10}  {:>10.4}",
                        r.name,
                        r.true_value,
                        fmt_mse(r.mse),
                        r.mean
                    );
                }
            }
            out
        }
    }
}
