//! Derivative-free local search (Nelder–Mead via `argmin`) with restarts and
//! seeded multistart.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::states::rng_from_seed;

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Iteration cap per Nelder–Mead run.
    pub max_iters: u64,
    /// Simplex standard-deviation stopping threshold.
    pub sd_tol: f64,
    /// Restarts of the simplex around the incumbent.
    pub restarts: usize,
    /// Initial simplex edge.
    pub step: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { max_iters: 4000, sd_tol: 1e-13, restarts: 4, step: 0.3 }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct OptimizerDiag {
    pub iterations: u64,
    pub restarts: usize,
    pub starts: usize,
    /// Simplex edge of the last restart.
    pub final_step: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub diag: OptimizerDiag,
}

struct Cost<'a>(&'a dyn Fn(&[f64]) -> f64);

impl CostFunction for Cost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let v = (self.0)(p);
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    }
}

fn run_once(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, opts: &SearchOptions) -> Result<(Vec<f64>, f64, u64)> {
    let n = x0.len();
    if n == 0 {
        return Ok((Vec::new(), f(x0), 0));
    }
    let mut simplex = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(opts.sd_tol)
        .map_err(|e| Error::Solver(e.to_string()))?;
    let res = Executor::new(Cost(f), solver)
        .configure(|s| s.max_iters(opts.max_iters))
        .run()
        .map_err(|e| Error::Solver(e.to_string()))?;
    let st = res.state();
    let x = st.get_best_param().cloned().unwrap_or_else(|| x0.to_vec());
    Ok((x, st.get_best_cost(), st.get_iter()))
}

/// Minimize `f` from `x0`, restarting the simplex around the incumbent with a
/// shrinking edge until a restart no longer improves the value.
pub fn minimize(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], opts: &SearchOptions) -> Result<SearchResult> {
    let mut x = x0.to_vec();
    let mut value = f(&x);
    let mut diag = OptimizerDiag { starts: 1, ..Default::default() };
    let mut step = opts.step;
    for r in 0..=opts.restarts {
        let (nx, nv, it) = run_once(f, &x, step, opts)?;
        diag.iterations += it;
        diag.restarts = r;
        diag.final_step = step;
        let improvement = value - nv;
        if nv < value {
            x = nx;
            value = nv;
        }
        if r > 0 && improvement.abs() <= 1e-13 * value.abs().max(1.0) {
            diag.converged = true;
            break;
        }
        step *= 0.3;
    }
    Ok(SearchResult { x, value, diag })
}

/// Run [`minimize`] from each seed point plus `random_starts` points drawn with
/// the given seed; the lowest value wins, ties going to the earliest start.
pub fn multistart(
    f: &dyn Fn(&[f64]) -> f64,
    seeds: &[Vec<f64>],
    dim: usize,
    random_starts: usize,
    spread: f64,
    seed: u64,
    opts: &SearchOptions,
) -> Result<SearchResult> {
    let mut starts: Vec<Vec<f64>> = seeds.to_vec();
    for k in 0..random_starts {
        let mut rng = rng_from_seed(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64));
        starts.push((0..dim).map(|_| rng.random_range(-spread..spread)).collect());
    }
    if starts.is_empty() {
        starts.push(vec![0.0; dim]);
    }
    let mut best: Option<SearchResult> = None;
    let mut total = OptimizerDiag::default();
    for s in &starts {
        let res = minimize(f, s, opts)?;
        total.iterations += res.diag.iterations;
        total.restarts += res.diag.restarts;
        total.starts += 1;
        if best.as_ref().is_none_or(|b| res.value < b.value) {
            total.final_step = res.diag.final_step;
            total.converged = res.diag.converged;
            best = Some(res);
        }
    }
    let mut best = best.expect("at least one start");
    best.diag = total;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize(&f, &[-1.2, 1.0], &SearchOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn multistart_is_deterministic() {
        let f = |x: &[f64]| (x[0] * 3.0).sin() + 0.1 * x[0] * x[0];
        let a = multistart(&f, &[], 1, 5, 3.0, 7, &SearchOptions::default()).unwrap();
        let b = multistart(&f, &[], 1, 5, 3.0, 7, &SearchOptions::default()).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.diag.starts, 5);
    }
}
