//! Derivative-free simplex search, a finite-difference BFGS polish and a
//! damped Newton finish.
//!
//! Both routines minimize; non-finite objective values are treated as `+inf`.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Spread of objective values across the simplex.
    pub ftol: f64,
    /// Largest coordinate distance from the best vertex.
    pub xtol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_evals: 5000, ftol: 1e-8, xtol: 1e-6 }
    }
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Nelder-Mead with dimension-adaptive coefficients (Gao and Han).
/// `steps[i]` is the initial simplex edge along coordinate `i`.
pub fn nelder_mead<F>(f: &mut F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let nf = n as f64;
    let (reflect, expand) = (1.0, 1.0 + 2.0 / nf);
    let contract = 0.75 - 1.0 / (2.0 * nf);
    let shrink = 1.0 - 1.0 / nf;

    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        finite_or_inf(f(x))
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if steps[i] != 0.0 { steps[i] } else { 0.05 };
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        trace.push(simplex[0].1);
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread.is_finite() && spread <= opts.ftol && size <= opts.xtol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let worst = simplex[n].0.clone();
        let f_worst = simplex[n].1;
        let along = |t: f64, out: &mut Vec<f64>, centroid: &[f64]| {
            for i in 0..n {
                out[i] = centroid[i] + t * (centroid[i] - worst[i]);
            }
        };

        along(reflect, &mut trial, &centroid);
        let fr = eval(&trial, &mut evals);
        if fr < simplex[0].1 {
            let mut exp_pt = vec![0.0; n];
            along(expand, &mut exp_pt, &centroid);
            let fe = eval(&exp_pt, &mut evals);
            simplex[n] = if fe < fr { (exp_pt, fe) } else { (trial.clone(), fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (trial.clone(), fr);
            continue;
        }
        // contraction: outside if the reflection improved on the worst point
        let (t, bound) = if fr < f_worst { (contract, fr) } else { (-contract, f_worst) };
        let mut con = vec![0.0; n];
        along(t, &mut con, &centroid);
        let fc = eval(&con, &mut evals);
        if fc <= bound {
            simplex[n] = (con, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for (x, fx) in simplex[1..].iter_mut() {
            for i in 0..n {
                x[i] = best[i] + shrink * (x[i] - best[i]);
            }
            *fx = eval(x, &mut evals);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    OptimResult { x, fx, evals, iterations, converged, trace }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub g: Vec<f64>,
    /// At least one coordinate fell back to a one-sided difference.
    pub one_sided: bool,
    pub evals: usize,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.g.iter().map(|v| v * v).sum())
    }
}

/// Finite-difference step for coordinate value `xi`.
pub fn fd_step(xi: f64) -> f64 {
    1e-5f64.max(1e-5 * xi.abs())
}

/// Central differences with step `max(1e-5, 1e-5 |x_i|)`; a coordinate whose
/// neighbour is not finite uses the other side, and `fx` is then required.
pub fn numeric_gradient<F>(f: &mut F, x: &[f64], fx: Option<f64>) -> Gradient
where
    F: FnMut(&[f64]) -> f64,
{
    let mut g = vec![0.0; x.len()];
    let mut one_sided = false;
    let mut evals = 0;
    let mut probe = x.to_vec();
    let mut center = fx;
    for i in 0..x.len() {
        let h = fd_step(x[i]);
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        evals += 2;
        g[i] = if up.is_finite() && down.is_finite() {
            (up - down) / (2.0 * h)
        } else {
            one_sided = true;
            let c = *center.get_or_insert_with(|| {
                evals += 1;
                f(x)
            });
            if up.is_finite() {
                (up - c) / h
            } else if down.is_finite() {
                (c - down) / h
            } else {
                f64::NAN
            }
        };
    }
    Gradient { g, one_sided, evals }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    /// Stop once the Euclidean gradient norm falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions { grad_tol: 1e-6, max_iter: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub result: OptimResult,
    pub gradient: Gradient,
}

/// Quasi-Newton minimization with finite-difference gradients and an Armijo
/// backtracking line search. The inverse Hessian is reset to a scaled identity
/// whenever a search direction fails to descend.
pub fn bfgs<F>(f: &mut F, x0: &[f64], opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0;
    let mut x = x0.to_vec();
    let mut fx = finite_or_inf(f(&x));
    evals += 1;
    let mut grad = numeric_gradient(f, &x, Some(fx));
    evals += grad.evals;
    let mut hinv = identity(n);
    let mut trace = vec![fx];
    let mut iterations = 0;
    let mut converged = false;
    let mut fresh = true;

    while iterations < opts.max_iter {
        if grad.norm() <= opts.grad_tol {
            converged = true;
            break;
        }
        if !fx.is_finite() || grad.g.iter().any(|v| !v.is_finite()) {
            break;
        }
        iterations += 1;
        let mut dir: Vec<f64> = mat_vec(&hinv, &grad.g).into_iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &grad.g);
        if !(slope < 0.0) {
            hinv = identity(n);
            dir = grad.g.iter().map(|v| -v).collect();
            slope = -dot(&grad.g, &grad.g);
            fresh = true;
        }
        let mut step = 1.0;
        if fresh {
            // keep the first steepest-descent step modest
            let gn = grad.norm();
            if gn > 1.0 {
                step = 1.0 / gn;
            }
        }
        let mut accepted = None;
        let mut trial = vec![0.0; n];
        for _ in 0..50 {
            for i in 0..n {
                trial[i] = x[i] + step * dir[i];
            }
            let ft = finite_or_inf(f(&trial));
            evals += 1;
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some(ft);
                break;
            }
            step *= 0.5;
        }
        let Some(f_new) = accepted else {
            if fresh {
                break;
            }
            hinv = identity(n);
            fresh = true;
            continue;
        };
        let g_new = numeric_gradient(f, &trial, Some(f_new));
        evals += g_new.evals;
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.g.iter().zip(&grad.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * libm::sqrt(dot(&s, &s) * dot(&y, &y)) && sy.is_finite() {
            if fresh {
                let scale = sy / dot(&y, &y);
                hinv.iter_mut().for_each(|row| row.iter_mut().for_each(|v| *v *= scale));
            }
            update_inverse(&mut hinv, &s, &y, sy);
            fresh = false;
        }
        let improvement = fx - f_new;
        x.copy_from_slice(&trial);
        fx = f_new;
        grad = g_new;
        trace.push(fx);
        if improvement.abs() <= 1e-16 * (1.0 + fx.abs()) && grad.norm() > opts.grad_tol {
            // stalled: no representable progress left
            if fresh {
                break;
            }
            hinv = identity(n);
            fresh = true;
        }
    }
    if !converged && grad.norm() <= opts.grad_tol {
        converged = true;
    }
    BfgsResult { result: OptimResult { x, fx, evals, iterations, converged, trace }, gradient: grad }
}

/// Central-difference Hessian from function values, step `1e-4 max(1, |x_i|)`.
pub fn numeric_hessian<F>(f: &mut F, x: &[f64], fx: f64) -> Vec<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let mut hess = vec![vec![0.0; n]; n];
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + h[i];
        let up = f(&p);
        p[i] = x[i] - h[i];
        let down = f(&p);
        p[i] = x[i];
        hess[i][i] = (up - 2.0 * fx + down) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64, p: &mut Vec<f64>| {
                p[i] = x[i] + si * h[i];
                p[j] = x[j] + sj * h[j];
                let v = f(p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0, &mut p) - corner(1.0, -1.0, &mut p) - corner(-1.0, 1.0, &mut p)
                + corner(-1.0, -1.0, &mut p))
                / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

/// Solve `(H + mu I) s = -g` by Cholesky; `None` if the shifted matrix is not positive definite.
fn damped_newton_step(hess: &[Vec<f64>], g: &[f64], mu: f64) -> Option<Vec<f64>> {
    let n = g.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = hess[i][j] + if i == j { mu } else { 0.0 };
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = libm::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (-g[i] - s) / l[i][i];
    }
    let mut out = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * out[k]).sum();
        out[i] = (y[i] - s) / l[i][i];
    }
    Some(out)
}

/// Levenberg-damped Newton iterations that accept a step when the gradient
/// norm shrinks and the objective does not rise beyond rounding.
///
/// Meant for the last digits of an optimum, where objective changes fall
/// below floating-point resolution and a descent line search stalls.
pub fn newton_polish<F>(f: &mut F, x0: &[f64], grad_tol: f64, max_iter: usize) -> BfgsResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = finite_or_inf(f(&x));
    let mut evals = 1;
    let mut grad = numeric_gradient(f, &x, Some(fx));
    evals += grad.evals;
    let mut trace = vec![fx];
    let mut iterations = 0;
    while iterations < max_iter && grad.norm() > grad_tol && fx.is_finite() {
        iterations += 1;
        let hess = numeric_hessian(f, &x, fx);
        evals += 2 * n * n + 1;
        let scale = (0..n).map(|i| hess[i][i].abs()).fold(0.0, f64::max).max(1e-300);
        let slack = 1e-13 * (1.0 + fx.abs());
        let mut moved = false;
        let mut mu = 0.0;
        for _ in 0..12 {
            if let Some(step) = damped_newton_step(&hess, &grad.g, mu) {
                let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + s).collect();
                let ft = finite_or_inf(f(&trial));
                evals += 1;
                if ft <= fx + slack {
                    let gt = numeric_gradient(f, &trial, Some(ft));
                    evals += gt.evals;
                    if gt.norm() < grad.norm() {
                        x = trial;
                        fx = ft;
                        grad = gt;
                        moved = true;
                        break;
                    }
                }
            }
            mu = if mu == 0.0 { 1e-8 * scale } else { mu * 10.0 };
        }
        // best value seen; accepted steps may rise within rounding
        let best = trace.last().copied().unwrap_or(fx).min(fx);
        trace.push(best);
        if !moved {
            break;
        }
    }
    let converged = grad.norm() <= grad_tol;
    BfgsResult { result: OptimResult { x, fx, evals, iterations, converged, trace }, gradient: grad }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// `H <- (I - rho s y') H (I - rho y s') + rho s s'`.
fn update_inverse(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
