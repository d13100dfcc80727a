//! Derivative-free simplex minimization.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    /// Stop once the spread of simplex values falls below this.
    pub tol: f64,
    /// Objective evaluations allowed per start, restarts included.
    pub max_evals: usize,
    /// Edge length of the initial simplex.
    pub step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_evals: 5000, step: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

fn run(f: &mut impl FnMut(&[f64]) -> f64, x0: &[f64], step: f64, tol: f64, budget: usize) -> Minimum {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += if p[i] == 0.0 { step } else { step * (1.0 + p[i].abs()) };
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;
    let mut converged = false;
    while evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if vals[n] - vals[0] <= tol {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(0.5);
            (xc.clone(), f(&xc))
        } else {
            let xc = along(-0.5);
            (xc.clone(), f(&xc))
        };
        evals += 1;
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = pts[0].iter().zip(&pts[i]).map(|(b, p)| b + 0.5 * (p - b)).collect();
            vals[i] = f(&shrunk);
            pts[i] = shrunk;
        }
        evals += n;
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("non-empty simplex");
    Minimum { x: pts[best].clone(), value: vals[best], evals, converged }
}

/// Nelder-Mead from `x0`. After convergence the search restarts from the
/// best point with a fresh simplex until a restart no longer improves by
/// more than `tol`, which guards against collapsed simplices.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: &SimplexOptions) -> Minimum {
    if x0.is_empty() {
        return Minimum { x: vec![], value: f(&[]), evals: 1, converged: true };
    }
    let mut best = run(&mut f, x0, opts.step, opts.tol, opts.max_evals);
    let mut step = opts.step;
    while best.converged && best.evals < opts.max_evals {
        step *= 0.5;
        let again = run(&mut f, &best.x, step.max(1e-6), opts.tol, opts.max_evals - best.evals);
        let evals = best.evals + again.evals;
        let improved = again.value < best.value - opts.tol;
        if again.value < best.value {
            best = Minimum { evals, ..again };
        } else {
            best.evals = evals;
        }
        if !improved {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(rosen, &[-1.2, 1.0], &SimplexOptions { tol: 1e-14, max_evals: 5000, step: 0.5 });
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m);
    }

    #[test]
    fn respects_budget() {
        let m =
            nelder_mead(|x: &[f64]| x.iter().map(|v| v.abs()).sum(), &[5.0; 6], &SimplexOptions { tol: 0.0, max_evals: 100, step: 1.0 });
        assert!(m.evals <= 100 + 6);
        assert!(!m.converged || m.value < 1e-12);
    }

    #[test]
    fn quadratic_in_six_dimensions() {
        let target = [1.0, -2.0, 0.5, 3.0, 0.0, -1.0];
        let f = |x: &[f64]| x.iter().zip(&target).enumerate().map(|(i, (a, b))| (i + 1) as f64 * (a - b).powi(2)).sum::<f64>();
        let m = nelder_mead(f, &[0.0; 6], &SimplexOptions::default());
        assert!(m.value < 1e-7, "{m:?}");
    }
}
