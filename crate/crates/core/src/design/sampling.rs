//! Relaxed sampling design: minimize `φ(F(w))` over `0 ≤ w ≤ 1` with one
//! weighted budget `Σ_j w_ij Δt_j ≤ M_i` per observable.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fim::{criterion_gradient_w, CriterionGradient, Criterion, GramianAtoms};
use crate::numerics::TimeGrid;

/// Weights considered saturated at 0 or 1.
pub const BINARY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingDesign {
    pub grid: TimeGrid,
    /// n_y × N
    pub w: DMatrix<f64>,
    pub budgets: Vec<f64>,
}

impl SamplingDesign {
    pub fn new(grid: TimeGrid, w: DMatrix<f64>, budgets: Vec<f64>) -> Result<Self> {
        if w.ncols() != grid.n_intervals() || w.nrows() != budgets.len() {
            return Err(Error::Input("sampling weights do not match grid and budgets".into()));
        }
        let d = SamplingDesign { grid, w, budgets };
        if d.w.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
            return Err(Error::Input("sampling weights must lie in [0, 1]".into()));
        }
        for i in 0..d.budgets.len() {
            if d.used(i) > d.budgets[i] + 1e-9 {
                return Err(Error::Input(format!("observable {i} exceeds its measurement budget")));
            }
        }
        Ok(d)
    }

    /// Budget-proportional uniform weights `min(1, M_i / T)`.
    pub fn uniform(grid: TimeGrid, budgets: Vec<f64>) -> Self {
        let span = grid.end() - grid.start();
        let n = grid.n_intervals();
        let w = DMatrix::from_fn(budgets.len(), n, |i, _| (budgets[i] / span).min(1.0));
        SamplingDesign { grid, w, budgets }
    }

    /// Time spent measuring observable `i`.
    pub fn used(&self, i: usize) -> f64 {
        self.w.row(i).iter().zip(self.grid.dts()).map(|(w, dt)| w * dt).sum()
    }

    pub fn is_slack(&self, i: usize) -> bool {
        self.used(i) < self.budgets[i] - 1e-6 * self.budgets[i].max(1.0)
    }

    /// Fraction of entries within `BINARY_TOL` of 0 or 1.
    pub fn binary_fraction(&self) -> f64 {
        let n = self.w.len().max(1);
        self.w.iter().filter(|&&v| v <= BINARY_TOL || v >= 1.0 - BINARY_TOL).count() as f64 / n as f64
    }
}

/// Euclidean projection of one row onto `{0 ≤ w ≤ 1, Σ w_j dt_j ≤ budget}`.
pub fn project_row(v: &[f64], dt: &[f64], budget: f64) -> Vec<f64> {
    let clip = |tau: f64| -> Vec<f64> { v.iter().zip(dt).map(|(x, d)| (x - tau * d).clamp(0.0, 1.0)).collect() };
    let total = |w: &[f64]| -> f64 { w.iter().zip(dt).map(|(a, b)| a * b).sum() };
    let w0 = clip(0.0);
    if total(&w0) <= budget {
        return w0;
    }
    // the weighted sum is nonincreasing in τ and reaches 0 at τ_hi
    let mut lo = 0.0;
    let mut hi = v.iter().zip(dt).map(|(x, d)| x / d).fold(0.0, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(&clip(mid)) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clip(hi)
}

pub fn project(w: &DMatrix<f64>, grid: &TimeGrid, budgets: &[f64]) -> DMatrix<f64> {
    let dt = grid.dts();
    let mut out = DMatrix::zeros(w.nrows(), w.ncols());
    for i in 0..w.nrows() {
        let row: Vec<f64> = w.row(i).iter().copied().collect();
        for (j, v) in project_row(&row, &dt, budgets[i]).into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub max_iter: usize,
    /// Stop when `‖w − P(w − ∇φ)‖_∞ ≤ rel_tol·|φ|`.
    pub rel_tol: f64,
    /// Nonmonotone line-search memory.
    pub memory: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { max_iter: 5000, rel_tol: 1e-8, memory: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct SamplingResult {
    pub design: SamplingDesign,
    pub phi: f64,
    /// `∂φ/∂w` at the solution
    pub grad: DMatrix<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub nonsmooth: bool,
}

/// Per-interval gains `−∂φ/∂w_ij / Δt_j`.
pub fn interval_gains(grad: &DMatrix<f64>, grid: &TimeGrid) -> DMatrix<f64> {
    let dt = grid.dts();
    DMatrix::from_fn(grad.nrows(), grad.ncols(), |i, j| -grad[(i, j)] / dt[j])
}

/// Budget multipliers from stationarity: zero for a slack budget; otherwise the
/// mean gain over fractional intervals, or the midpoint between the best
/// unsampled and the worst sampled gain when the row is binary.
pub fn extract_multipliers(design: &SamplingDesign, grad: &DMatrix<f64>) -> Vec<f64> {
    let gains = interval_gains(grad, &design.grid);
    (0..design.w.nrows())
        .map(|i| {
            if design.is_slack(i) {
                return 0.0;
            }
            let mut frac = Vec::new();
            let mut on_min = f64::INFINITY;
            let mut off_max = f64::NEG_INFINITY;
            for j in 0..design.w.ncols() {
                let (w, g) = (design.w[(i, j)], gains[(i, j)]);
                if w >= 1.0 - BINARY_TOL {
                    on_min = on_min.min(g);
                } else if w <= BINARY_TOL {
                    off_max = off_max.max(g);
                } else {
                    frac.push(g);
                }
            }
            let mu = if !frac.is_empty() {
                frac.iter().sum::<f64>() / frac.len() as f64
            } else {
                match (on_min.is_finite(), off_max.is_finite()) {
                    (true, true) => 0.5 * (on_min + off_max),
                    (true, false) => on_min,
                    (false, true) => off_max,
                    (false, false) => 0.0,
                }
            };
            mu.max(0.0)
        })
        .collect()
}

fn evaluate(atoms: &GramianAtoms, w: &DMatrix<f64>, crit: Criterion) -> Option<CriterionGradient> {
    match criterion_gradient_w(atoms, w, crit) {
        Ok(g) if g.phi.is_finite() => Some(g),
        _ => None,
    }
}

/// Spectral projected gradient with a nonmonotone Armijo search.
pub fn optimize_sampling(
    atoms: &GramianAtoms,
    budgets: &[f64],
    crit: Criterion,
    opts: &SamplingOptions,
    strategy_label: &str,
) -> Result<SamplingResult> {
    optimize_sampling_from(atoms, budgets, crit, opts, strategy_label, None)
}

pub fn optimize_sampling_from(
    atoms: &GramianAtoms,
    budgets: &[f64],
    crit: Criterion,
    opts: &SamplingOptions,
    strategy_label: &str,
    start: Option<&DMatrix<f64>>,
) -> Result<SamplingResult> {
    let grid = &atoms.grid;
    if budgets.len() != atoms.n_y {
        return Err(Error::Input("one budget per observable required".into()));
    }
    let uniform = SamplingDesign::uniform(grid.clone(), budgets.to_vec()).w;
    let infeasible = |reason: String| Error::DesignInfeasible { strategy: strategy_label.to_string(), reason };

    let mut w = match start {
        Some(s) => project(s, grid, budgets),
        None => uniform.clone(),
    };
    let mut cur = match evaluate(atoms, &w, crit) {
        Some(c) => c,
        None => {
            w = uniform.clone();
            evaluate(atoms, &w, crit).ok_or_else(|| {
                infeasible("Fisher information is singular for the budget-proportional uniform design".into())
            })?
        }
    };

    let (alpha_min, alpha_max) = (1e-30, 1e30);
    let stationarity = |w: &DMatrix<f64>, g: &DMatrix<f64>| -> f64 { (project(&(w - g), grid, budgets) - w).amax() };
    // initial step scaled so that the first move is at most one unit
    let mut alpha = {
        let gmax = cur.grad.amax();
        if gmax > 0.0 { 1.0 / gmax } else { 1.0 }
    };
    let mut history = vec![cur.phi];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        if stationarity(&w, &cur.grad) <= opts.rel_tol * cur.phi.abs() {
            converged = true;
            break;
        }
        iterations += 1;
        let trial = project(&(&w - &cur.grad * alpha), grid, budgets);
        let d = &trial - &w;
        let slope = cur.grad.dot(&d);
        if d.amax() == 0.0 || slope >= 0.0 {
            // the scaled step stalls; fall back to the unit projected gradient
            alpha = 1.0;
            if (project(&(&w - &cur.grad), grid, budgets) - &w).amax() == 0.0 {
                converged = true;
                break;
            }
            continue;
        }
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &w + &d * lambda;
            if let Some(e) = evaluate(atoms, &cand, crit) {
                if e.phi <= reference + 1e-4 * lambda * slope {
                    accepted = Some((cand, e));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((w_new, next)) = accepted else {
            break;
        };
        let s = &w_new - &w;
        let y = &next.grad - &cur.grad;
        let sy = s.dot(&y);
        alpha = if sy > 0.0 { (s.dot(&s) / sy).clamp(alpha_min, alpha_max) } else { alpha_max.min(alpha * 10.0) };
        w = w_new;
        cur = next;
        history.push(cur.phi);
        if history.len() > opts.memory {
            history.remove(0);
        }
    }

    let design = SamplingDesign { grid: grid.clone(), w, budgets: budgets.to_vec() };
    let mu = extract_multipliers(&design, &cur.grad);
    Ok(SamplingResult { design, phi: cur.phi, grad: cur.grad, mu, iterations, converged, nonsmooth: cur.nonsmooth })
}

/// Evaluates a fixed design without optimizing.
pub fn evaluate_sampling(atoms: &GramianAtoms, design: &SamplingDesign, crit: Criterion, strategy_label: &str) -> Result<SamplingResult> {
    let cur = criterion_gradient_w(atoms, &design.w, crit).map_err(|e| match e {
        Error::Singular { .. } => Error::DesignInfeasible {
            strategy: strategy_label.to_string(),
            reason: format!("Fisher information is singular for the fixed design: {e}"),
        },
        other => other,
    })?;
    let mu = extract_multipliers(design, &cur.grad);
    Ok(SamplingResult {
        design: design.clone(),
        phi: cur.phi,
        grad: cur.grad,
        mu,
        iterations: 0,
        converged: true,
        nonsmooth: cur.nonsmooth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SymMatrix;
    use proptest::prelude::*;

    #[test]
    fn single_interval_takes_everything() {
        let grid = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let atoms = GramianAtoms::from_parts(grid, 1, vec![SymMatrix::from_diagonal(&[2.0, 3.0])]).unwrap();
        let r = optimize_sampling(&atoms, &[2.0], Criterion::A, &SamplingOptions::default(), "test").unwrap();
        assert!((r.design.w[(0, 0)] - 1.0).abs() < 1e-12);
        assert_eq!(r.mu, vec![0.0]);
    }

    #[test]
    fn identical_atoms_tie() {
        let grid = TimeGrid::uniform(0.0, 2.0, 2).unwrap();
        let a = SymMatrix::from_diagonal(&[1.0, 2.0]);
        let atoms = GramianAtoms::from_parts(grid.clone(), 1, vec![a.clone(), a]).unwrap();
        let first = GramianAtoms::from_parts(grid.clone(), 1, vec![SymMatrix::from_diagonal(&[1.0, 2.0]); 2]).unwrap();
        let r = optimize_sampling(&atoms, &[1.0], Criterion::D, &SamplingOptions::default(), "test").unwrap();
        let on_first = crate::fim::assemble_fim(&first, &DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        let on_second = crate::fim::assemble_fim(&first, &DMatrix::from_row_slice(1, 2, &[0.0, 1.0])).unwrap();
        let pf = crate::fim::criterion(&on_first.f, Criterion::D, 2).unwrap();
        let ps = crate::fim::criterion(&on_second.f, Criterion::D, 2).unwrap();
        assert!((pf - ps).abs() <= 1e-10);
        assert!((r.phi - pf).abs() <= 1e-10);
        // uniform atoms: gains constant, μ equals that constant
        let g = interval_gains(&r.grad, &grid);
        assert!((g[(0, 0)] - g[(0, 1)]).abs() < 1e-12);
        assert!((r.mu[0] - g[(0, 0)]).abs() < 1e-12);
    }

    #[test]
    fn uniform_start_is_budget_proportional() {
        let grid = TimeGrid::uniform(0.0, 12.0, 48).unwrap();
        let d = SamplingDesign::uniform(grid, vec![4.0, 20.0]);
        assert!((d.w[(0, 5)] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.w[(1, 5)], 1.0);
        assert!((d.used(0) - 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_idempotent(v in proptest::collection::vec(-1.0f64..2.0, 1..20), budget in 0.0f64..3.0) {
            let dt: Vec<f64> = (0..v.len()).map(|k| 0.1 + 0.05 * (k % 3) as f64).collect();
            let p = project_row(&v, &dt, budget);
            let used: f64 = p.iter().zip(&dt).map(|(a, b)| a * b).sum();
            prop_assert!(used <= budget + 1e-9);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let again = project_row(&p, &dt, budget);
            for (a, b) in p.iter().zip(&again) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
            // variational inequality: (v − p)·(q − p) ≤ 0 for feasible q
            let q: Vec<f64> = project_row(&vec![0.5; v.len()], &dt, budget);
            let vi: f64 = v.iter().zip(&p).zip(&q).map(|((vv, pp), qq)| (vv - pp) * (qq - pp)).sum();
            prop_assert!(vi <= 1e-7);
        }
    }
}
