//! Acceptance checks, one line per criterion. Exits non-zero if any fail.
//!
//! Criteria 6 and 7 run full Monte Carlo studies and take several minutes.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rhygarch::mc::{run_study, McSummary, StudyConfig};
use rhygarch_core::dist::{norm_quantile, InnovationDist};
use rhygarch_core::fit::{loglik_gradient, DistKind};
use rhygarch_core::model::volterra_oracle;
use rhygarch_core::{
    es_forecast, filter_volatility, fit, loglik, psi_weights, simulate, var_forecast, Convention, FitOptions,
    LikOptions, QuantileFlavor, RhygarchParams, SeriesPair, SimOptions,
};

type Outcome = (bool, String);

const STD: QuantileFlavor = QuantileFlavor::Standardized;

/// `(1 - L)^d` coefficients from the gamma-function ratio.
fn binomial_gamma(d: f64, k: usize) -> Vec<f64> {
    let lg_neg_d = libm::lgamma(-d);
    (0..=k)
        .map(|j| {
            if j == 0 {
                1.0
            } else {
                // Gamma(j - d) > 0 and Gamma(-d) < 0 for 0 < d < 1
                -libm::exp(libm::lgamma(j as f64 - d) - lg_neg_d - libm::lgamma(j as f64 + 1.0))
            }
        })
        .collect()
}

/// `delta [1 - (1 - gamma L)(1 - L)^d sum_j beta^j L^j]` by explicit convolution.
fn psi_brute_force(delta: f64, d: f64, gamma: f64, beta: f64, k: usize) -> Vec<f64> {
    let c = binomial_gamma(d, k);
    let num: Vec<f64> = (0..=k).map(|j| c[j] - if j > 0 { gamma * c[j - 1] } else { 0.0 }).collect();
    let geo: Vec<f64> = (0..=k).map(|j| beta.powi(j as i32)).collect();
    (1..=k).map(|n| -delta * (0..=n).map(|j| num[j] * geo[n - j]).sum::<f64>()).collect()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let k = 512;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let delta = rng.random_range(0.0..=1.0);
        let d = rng.random_range(0.01..0.99);
        let gamma = rng.random_range(-0.9..0.9);
        let beta = rng.random_range(-0.9..0.9);
        let got = psi_weights(delta, d, gamma, beta, k).unwrap();
        let want = psi_brute_force(delta, d, gamma, beta, k);
        for (a, b) in got.weights().iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    (worst <= 1e-12, format!("max |diff| = {worst:.2e} over 200 draws, K = 512 (tol 1e-12)"))
}

fn criterion_2() -> Outcome {
    let p = RhygarchParams::model1();
    let mut gaps = Vec::new();
    for k in [64, 256, 1024, 4096] {
        gaps.push((p.psi(k).unwrap().partial_sum() - 0.4).abs());
    }
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = gaps[3];
    let detail = format!(
        "|sum psi - 0.4| at K = 64, 256, 1024, 4096: {:.5}, {:.5}, {:.5}, {:.5} (need < 0.008 at 4096, decreasing)",
        gaps[0], gaps[1], gaps[2], gaps[3]
    );
    (decreasing && last < 0.008, detail)
}

/// Mean and batch-means standard error.
fn mean_and_se(v: &[f64], batches: usize) -> (f64, f64) {
    let n = v.len() / batches;
    let means: Vec<f64> = v.chunks_exact(n).map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (batches - 1) as f64;
    (v.iter().sum::<f64>() / v.len() as f64, (var / batches as f64).sqrt())
}

fn criterion_3() -> Outcome {
    let p = RhygarchParams::model1();
    let s = simulate(&p, &SimOptions::new(200_000, 3)).unwrap();
    let logh: Vec<f64> = s.latent_h.as_ref().unwrap().iter().map(|h| h.ln()).collect();
    let logx: Vec<f64> = s.realized.iter().map(|x| x.ln()).collect();
    let (mh, seh) = mean_and_se(&logh, 20);
    let (mx, sex) = mean_and_se(&logx, 20);
    let ok = (mh - 0.1).abs() < 3.0 * seh && mx.abs() < 3.0 * sex;
    (ok, format!("mean log h = {mh:.5} (SE {seh:.5}, target 0.1); mean log x = {mx:.5} (SE {sex:.5}, target 0)"))
}

fn criterion_4() -> Outcome {
    let g = InnovationDist::Gaussian;
    let sqrt_h5 = 1.8547 / -norm_quantile(0.05).unwrap();
    let sqrt_h1 = 2.6834 / -norm_quantile(0.01).unwrap();
    let es5 = es_forecast(sqrt_h5 * sqrt_h5, 0.05, &g, Convention::Paper, STD).unwrap();
    let es1 = es_forecast(sqrt_h1 * sqrt_h1, 0.01, &g, Convention::Paper, STD).unwrap();
    let var5 = var_forecast(sqrt_h5 * sqrt_h5, 0.05, &g, STD).unwrap();
    let ok = (es5 - 0.1224).abs() < 5e-4 && (es1 - 0.0310).abs() < 5e-4 && (var5 + 1.8547).abs() < 1e-12;
    (ok, format!("ES(5%) = {es5:.5} vs 0.1224, ES(1%) = {es1:.5} vs 0.0310 (tol 5e-4)"))
}

fn criterion_5() -> Outcome {
    use rhygarch_core::risk::es_quadrature_oracle;
    let mut worst_g: f64 = 0.0;
    let mut worst_t: f64 = 0.0;
    for alpha in [0.01, 0.05, 0.1] {
        let g = InnovationDist::Gaussian;
        let closed = es_forecast(1.0, alpha, &g, Convention::Standard, STD).unwrap();
        worst_g = worst_g.max((closed - es_quadrature_oracle(1.0, alpha, &g, STD).unwrap()).abs());
        for nu in [3.0, 5.0, 10.0] {
            let t = InnovationDist::StudentT { nu };
            for flavor in [QuantileFlavor::Standardized, QuantileFlavor::Raw] {
                let closed = es_forecast(1.0, alpha, &t, Convention::Standard, flavor).unwrap();
                let quad = es_quadrature_oracle(1.0, alpha, &t, flavor).unwrap();
                worst_t = worst_t.max((closed - quad).abs());
            }
        }
    }
    (
        worst_g < 1e-6 && worst_t < 1e-5,
        format!("max |closed - quadrature|: Gaussian {worst_g:.2e} (tol 1e-6), t {worst_t:.2e} (tol 1e-5)"),
    )
}

/// Reference GG results at T = 1000: (name, mean, MSE).
const REFERENCE: [(&str, f64, f64); 10] = [
    ("omega", 0.1178, 0.0030),
    ("gamma", 0.1268, 0.0334),
    ("beta", 0.3710, 0.0327),
    ("delta", 0.4113, 0.0546),
    ("d", 0.4511, 0.0573),
    ("xi", 0.0533, 0.0036),
    ("phi", 0.9688, 0.0433),
    ("tau1", -0.0801, 0.0001),
    ("tau2", 0.0612, 0.000103),
    ("sigma_u", 0.3667, 0.00139),
];

fn study(model: RhygarchParams, t: usize, m: usize, seed: u64) -> McSummary {
    let start = Instant::now();
    let s = run_study(&StudyConfig::new(model, t, m, seed)).expect("study config");
    println!(
        "    study T={t} M={m}: {:.0} s, convergence rate {:.3}",
        start.elapsed().as_secs_f64(),
        s.convergence_rate
    );
    s
}

fn criterion_6() -> Outcome {
    let s = study(RhygarchParams::model1(), 1000, 200, 6006);
    let mut failures = Vec::new();
    for (name, mean_ref, mse_ref) in REFERENCE {
        let row = s.rows.iter().find(|r| r.name == name).unwrap();
        let band = 0.05f64.max(3.0 * (mse_ref / 200.0).sqrt());
        let mean_ok = (row.mean - mean_ref).abs() <= band;
        let mse_ok = row.mse >= mse_ref / 3.0 && row.mse <= mse_ref * 3.0;
        println!(
            "    {name:<8} mean {:>10.4} (ref {mean_ref:>7.4}, band {band:.4}) {}   MSE {:>10.3e} (ref {mse_ref:.2e}) {}",
            row.mean,
            if mean_ok { "ok" } else { "OUT" },
            row.mse,
            if mse_ok { "ok" } else { "OUT" },
        );
        if !mean_ok {
            failures.push(format!("{name} mean"));
        }
        if !mse_ok {
            failures.push(format!("{name} MSE"));
        }
    }
    let detail = if failures.is_empty() {
        "all 10 means and MSEs within bounds".to_string()
    } else {
        format!("outside bounds: {}", failures.join(", "))
    };
    (failures.is_empty(), detail)
}

fn criterion_7() -> Outcome {
    let p = RhygarchParams::model2();
    let short = study(p, 1000, 100, 7007);
    let long = study(p, 3000, 100, 7007);
    let get = |s: &McSummary, name: &str| s.rows.iter().chain(&s.risk_rows).find(|r| r.name == name).unwrap().clone();
    let nu = get(&short, "nu").mean;
    let d = get(&short, "d").mean;
    let var_short = get(&short, "5%VaR").mse;
    let var_long = get(&long, "5%VaR").mse;
    let ok = (2.8..=3.6).contains(&nu) && (0.30..=0.45).contains(&d) && var_long < var_short;
    (
        ok,
        format!(
            "mean nu = {nu:.4} (need [2.8, 3.6]), mean d = {d:.4} (need [0.30, 0.45]), 5%VaR MSE {var_short:.4e} -> {var_long:.4e} (T 1000 -> 3000)"
        ),
    )
}

fn criterion_8() -> Outcome {
    let p = RhygarchParams::model1();
    let opts = FitOptions::default();
    let mut found = None;
    for seed in 80..85 {
        let s = simulate(&p, &SimOptions::new(3000, seed)).unwrap();
        let r = fit(&s, DistKind::Gaussian, None, &opts).unwrap();
        if r.converged {
            found = Some((seed, s, r));
            break;
        }
    }
    let Some((seed, data, r)) = found else {
        return (false, "no converged Model 1 fit among seeds 80..85".into());
    };
    let g = loglik_gradient(&r.estimates, &data, &opts).unwrap().norm();

    // additivity over random parameter points
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let short = SeriesPair::observed(data.returns[..500].to_vec(), data.realized[..500].to_vec()).unwrap();
    let (mut mismatches, mut skipped) = (0, 0);
    for i in 0..1000 {
        let mut q = RhygarchParams {
            omega: rng.random_range(-0.5..0.5),
            gamma: rng.random_range(-0.9..0.9),
            beta: rng.random_range(-0.9..0.9),
            delta: rng.random_range(0.0..=1.0),
            d: rng.random_range(0.0..1.0),
            xi: rng.random_range(-0.5..0.5),
            phi: rng.random_range(0.0..1.5),
            tau1: rng.random_range(-0.2..0.2),
            tau2: rng.random_range(-0.2..0.2),
            sigma_u: rng.random_range(0.05..1.0),
            innovation: InnovationDist::Gaussian,
        };
        if i % 2 == 1 {
            q.innovation = InnovationDist::StudentT { nu: rng.random_range(2.1..30.0) };
        }
        let Ok(v) = loglik(&q, &short, &LikOptions::with_truncation(200)) else {
            skipped += 1;
            continue;
        };
        if v.total != v.returns_part + v.measure_part {
            mismatches += 1;
        }
    }
    (
        g <= 1e-3 && mismatches == 0,
        format!(
            "seed {seed}: gradient norm {g:.2e} (tol 1e-3, fit reported {:.2e}); total != returns + measure in {mismatches} of {} evaluations",
            r.grad_norm,
            1000 - skipped
        ),
    )
}

/// `lambda(L) = 1 - (1 - beta L)^{-1} (1 - gamma L)(1 - L)^d` from
/// `(1 - beta L)(1 - lambda(L)) = (1 - gamma L)(1 - L)^d`.
fn flogarch_weights(d: f64, gamma: f64, beta: f64, k: usize) -> Vec<f64> {
    let mut c = vec![1.0; k + 1];
    for j in 1..=k {
        c[j] = c[j - 1] * (j as f64 - 1.0 - d) / j as f64;
    }
    let mut lam = vec![0.0; k + 1];
    for j in 1..=k {
        lam[j] = beta * lam[j - 1] - c[j] + gamma * c[j - 1] - if j == 1 { beta } else { 0.0 };
    }
    lam[1..].to_vec()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst: f64 = 0.0;
    let mut exact_misses = 0;
    for _ in 0..100 {
        let gamma = rng.random_range(-0.95..0.95);
        let beta = rng.random_range(-0.95..0.95);
        let d = rng.random_range(0.05..0.95);
        let got = psi_weights(1.0, d, gamma, beta, 300).unwrap();
        for (a, b) in got.weights().iter().zip(flogarch_weights(d, gamma, beta, 300)) {
            worst = worst.max((a - b).abs());
        }
        let one = psi_weights(1.0, 1.0, gamma, beta, 10).unwrap();
        if one.weights()[0] != 1.0 + gamma - beta {
            exact_misses += 1;
        }
    }
    (
        worst < 1e-12 && exact_misses == 0,
        format!("delta = 1 vs FLoGARCH recursion max |diff| {worst:.2e}; psi_1 != 1 + gamma - beta in {exact_misses} of 100 draws"),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let (k, order) = (20usize, 3usize);
    let mut paths = 0;
    let mut worst_ratio: f64 = 0.0;
    while paths < 20 {
        let p = RhygarchParams {
            omega: rng.random_range(-0.3..0.3),
            gamma: rng.random_range(-0.5..0.5),
            beta: rng.random_range(-0.5..0.7),
            delta: rng.random_range(0.1..1.0),
            d: rng.random_range(0.1..0.9),
            xi: rng.random_range(-0.3..0.3),
            phi: rng.random_range(0.2..1.2),
            tau1: -0.08,
            tau2: 0.06,
            sigma_u: 0.4,
            innovation: InnovationDist::Gaussian,
        };
        let psi = p.psi(k).unwrap();
        let s_abs = psi.abs_sum();
        if p.phi * s_abs > 0.4 {
            continue;
        }
        paths += 1;
        // log h_t = omega + sum psi_i log x_{t-i}, log x_t = phi log h_t + v_t, zero presample
        let n = 150;
        let w = psi.weights();
        let v: Vec<f64> = (0..n).map(|_| p.xi + rng.random_range(-1.0..1.0)).collect();
        let mut logh = vec![0.0; n];
        let mut logx = vec![0.0; n];
        for t in 0..n {
            logh[t] = p.omega + (1..=k.min(t)).map(|i| w[i - 1] * logx[t - i]).sum::<f64>();
            logx[t] = p.phi * logh[t] + v[t];
        }
        let x: Vec<f64> = logx.iter().map(|l| l.exp()).collect();
        let filtered = filter_volatility(&p, &x, k).unwrap();
        let m_h = logh.iter().map(|l| l.abs()).fold(0.0, f64::max);
        let m_v = v.iter().map(|e| e.abs()).fold(0.0, f64::max);
        // remainder after L terms is phi^L sum psi..psi (log h - omega), and
        // |log h - omega| <= S (phi max|log h| + max|v|)
        let bound = (p.phi * s_abs).powi(order as i32) * s_abs * (p.phi * m_h + m_v);
        for t in [n - 1, n - 10, n - 25] {
            let lags: Vec<f64> = (0..=order * k).map(|j| v[t - j]).collect();
            let approx = volterra_oracle(&p, &lags, order, k).unwrap();
            let err = (approx - filtered[t]).abs();
            worst_ratio = worst_ratio.max(err / bound);
        }
    }
    (worst_ratio <= 1.0, format!("20 paths, K = 20, L = 3: largest error / remainder bound = {worst_ratio:.3}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("filter oracle equivalence", criterion_1),
        ("psi-sum convergence", criterion_2),
        ("stationary means", criterion_3),
        ("Gaussian risk-table consistency", criterion_4),
        ("ES quadrature oracle", criterion_5),
        ("Model 1 GG Monte Carlo, T = 1000, M = 200", criterion_6),
        ("Model 2 tG Monte Carlo spot-check", criterion_7),
        ("likelihood sanity", criterion_8),
        ("nesting checks", criterion_9),
        ("Volterra cross-check", criterion_10),
    ];
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = check();
        println!(
            "criterion {id:>2} {}: {name}: {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        if !ok {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
