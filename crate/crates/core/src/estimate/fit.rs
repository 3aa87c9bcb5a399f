//! Weighted least squares: Gauss-Newton for `p̂`, Adam for `θ`, and the alternating fit.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::design::ControlDesign;
use crate::error::{Error, Result};
use crate::models::{ParamVector, UdeModel};
use crate::numerics::{spd_inverse, sym_eig, IntegratorOptions, SymMatrix, TimeGrid};
use crate::sensitivity::{propagate, simulate, ReductionMatrix};

/// One least-squares problem: a model, fixed controls and a dataset.
pub struct Problem<'a> {
    pub model: &'a UdeModel,
    pub controls: &'a ControlDesign,
    pub data: &'a Dataset,
    grid: TimeGrid,
}

impl<'a> Problem<'a> {
    pub fn new(model: &'a UdeModel, controls: &'a ControlDesign, data: &'a Dataset) -> Result<Self> {
        if data.n_observables() != model.n_y() {
            return Err(Error::Input("dataset and model observables differ".into()));
        }
        if data.is_empty() {
            return Err(Error::Input("dataset has no measurements".into()));
        }
        let grid = data.grid(&controls.grid)?;
        Ok(Problem { model, controls, data, grid })
    }

    fn sigma(&self) -> f64 {
        if self.data.sigma > 0.0 { self.data.sigma } else { 1.0 }
    }

    /// Residuals `(h(x(t_k)) − y_k)/σ`, observable-major.
    pub fn residuals(&self, params: &ParamVector, opts: &IntegratorOptions) -> Result<Vec<f64>> {
        let sol = simulate(self.model, params, self.controls, &self.grid, opts)?;
        let s = self.sigma();
        let mut r = Vec::with_capacity(self.data.len());
        for (i, (ts, ys)) in self.data.times.iter().zip(&self.data.values).enumerate() {
            for (&t, &y) in ts.iter().zip(ys) {
                r.push((self.model.observe(&sol.eval_vec(t))?.y[i] - y) / s);
            }
        }
        Ok(r)
    }

    /// Residuals with their Jacobian against the columns of `reduction`.
    pub fn residuals_jacobian(
        &self,
        params: &ParamVector,
        reduction: &ReductionMatrix,
        opts: &IntegratorOptions,
    ) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let traj = propagate(self.model, params, self.controls, &self.grid, reduction, opts)?;
        let s = self.sigma();
        let mut r = Vec::with_capacity(self.data.len());
        let mut jac = DMatrix::zeros(self.data.len(), reduction.n_r());
        let mut row = 0;
        for (i, (ts, ys)) in self.data.times.iter().zip(&self.data.values).enumerate() {
            for (&t, &y) in ts.iter().zip(ys) {
                let (x, g) = traj.eval(t);
                let obs = self.model.observe(&x)?;
                r.push((obs.y[i] - y) / s);
                let jrow = obs.h_x.row(i) * g;
                for c in 0..reduction.n_r() {
                    jac[(row, c)] = jrow[c] / s;
                }
                row += 1;
            }
        }
        Ok((r, jac))
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn with_free(model: &UdeModel, params: &ParamVector, free: &[f64]) -> ParamVector {
    let mut p = params.clone();
    for (&k, &v) in model.free_params.iter().zip(free) {
        p.p_hat[k] = v;
    }
    p
}

fn free_values(model: &UdeModel, params: &ParamVector) -> Vec<f64> {
    model.free_params.iter().map(|&k| params.p_hat[k]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussNewtonOptions {
    pub max_iter: usize,
    pub step_tol: f64,
    pub integrator_tol: f64,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        GaussNewtonOptions { max_iter: 100, step_tol: 1e-8, integrator_tol: 1e-9 }
    }
}

#[derive(Debug, Clone)]
pub struct GaussNewtonResult {
    pub params: ParamVector,
    /// `(JᵀJ)⁻¹` over the free mechanistic parameters, σ-scaled
    pub covariance: SymMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// `Σ r²` of the scaled residuals
    pub cost: f64,
}

impl GaussNewtonResult {
    pub fn std(&self) -> Vec<f64> {
        (0..self.covariance.dim()).map(|k| self.covariance.get(k, k).max(0.0).sqrt()).collect()
    }
}

fn normal_matrix(jac: &DMatrix<f64>) -> Result<SymMatrix> {
    let jtj = SymMatrix::from_symmetrized(&(jac.transpose() * jac))?;
    let spec = sym_eig(&jtj)?;
    let (lo, hi) = (spec.lambda_min(), spec.lambda_max());
    if !(hi > 0.0) || lo <= 1e-12 * hi {
        return Err(Error::Identifiability(format!(
            "residual Jacobian is rank deficient (eigenvalues of JᵀJ in [{lo:e}, {hi:e}])"
        )));
    }
    Ok(jtj)
}

/// Levenberg-damped Gauss-Newton over the free mechanistic parameters, `θ` fixed.
pub fn gauss_newton(problem: &Problem, init: &ParamVector, opts: &GaussNewtonOptions) -> Result<GaussNewtonResult> {
    let model = problem.model;
    model.check_params(init)?;
    let red = ReductionMatrix::mechanistic_only(model);
    if red.n_r() == 0 {
        return Err(Error::Input("model has no free mechanistic parameters".into()));
    }
    let iopts = IntegratorOptions::with_tol(opts.integrator_tol);
    let mut p = free_values(model, init);
    let mut params = init.clone();
    let (mut r, mut jac) = problem.residuals_jacobian(&params, &red, &iopts)?;
    let mut cost = sum_sq(&r);
    let mut lambda = 0.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let jtj = normal_matrix(&jac)?;
        let jtr = jac.transpose() * DVector::from_column_slice(&r);
        let mut accepted = false;
        let mut step_norm = f64::INFINITY;
        for _ in 0..30 {
            let mut a = jtj.matrix().clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * jtj.get(k, k);
            }
            let Some(chol) = a.cholesky() else {
                lambda = (lambda * 10.0).max(1e-3);
                continue;
            };
            let delta = chol.solve(&(-&jtr));
            step_norm = delta.amax();
            let cand: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            let cand_params = with_free(model, &params, &cand);
            let trial = problem.residuals(&cand_params, &iopts).map(|rr| sum_sq(&rr));
            match trial {
                Ok(c) if c <= cost || step_norm <= opts.step_tol * p.iter().fold(1.0f64, |m, v| m.max(v.abs())) => {
                    p = cand;
                    params = cand_params;
                    cost = c;
                    lambda = if lambda < 1e-9 { 0.0 } else { lambda / 10.0 };
                    accepted = true;
                    break;
                }
                _ => lambda = (lambda * 10.0).max(1e-3),
            }
        }
        if !accepted {
            break;
        }
        let (r_new, j_new) = problem.residuals_jacobian(&params, &red, &iopts)?;
        r = r_new;
        jac = j_new;
        if step_norm <= opts.step_tol * p.iter().fold(1.0f64, |m, v| m.max(v.abs())) {
            converged = true;
            break;
        }
    }
    let covariance = spd_inverse(&normal_matrix(&jac)?)?;
    Ok(GaussNewtonResult { params, covariance, iterations, converged, cost: sum_sq(&r) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamOptions {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub integrator_tol: f64,
}

impl Default for AdamOptions {
    fn default() -> Self {
        AdamOptions { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, epochs: 2000, integrator_tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct AdamResult {
    pub theta: Vec<f64>,
    pub initial_loss: f64,
    pub best_loss: f64,
    /// Best loss so far after each evaluated iterate
    pub best_history: Vec<f64>,
    pub diverged: bool,
}

fn with_theta(params: &ParamVector, theta: &[f64]) -> Result<ParamVector> {
    let mut p = params.clone();
    p.ann.as_mut().ok_or_else(|| Error::Input("model has no network".into()))?.set_theta(theta)?;
    Ok(p)
}

/// Full-batch Adam on the mean squared scaled residual over `θ`, `p̂` fixed.
/// Returns the best iterate seen.
pub fn adam_train(problem: &Problem, init: &ParamVector, opts: &AdamOptions) -> Result<AdamResult> {
    let model = problem.model;
    model.check_params(init)?;
    let red = ReductionMatrix::theta_only(model);
    let n = red.n_r();
    if n == 0 {
        return Err(Error::Input("model has no network weights".into()));
    }
    let iopts = IntegratorOptions::with_tol(opts.integrator_tol);
    let m_count = problem.data.len() as f64;
    let mut theta = init.theta().to_vec();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut best = (theta.clone(), f64::INFINITY);
    let mut initial_loss = f64::NAN;
    let mut history = Vec::with_capacity(opts.epochs + 1);
    let mut diverged = false;

    for epoch in 0..=opts.epochs {
        let params = with_theta(init, &theta)?;
        let eval = if epoch < opts.epochs {
            problem.residuals_jacobian(&params, &red, &iopts).map(|(r, j)| (sum_sq(&r) / m_count, Some((r, j))))
        } else {
            problem.residuals(&params, &iopts).map(|r| (sum_sq(&r) / m_count, None))
        };
        let (loss, rj) = match eval {
            Ok(v) => v,
            Err(e) if epoch == 0 => return Err(e),
            Err(_) => {
                diverged = true;
                break;
            }
        };
        if epoch == 0 {
            initial_loss = loss;
        }
        if !loss.is_finite() || loss >= 10.0 * initial_loss.max(f64::MIN_POSITIVE) {
            diverged = true;
            break;
        }
        if loss < best.1 {
            best = (theta.clone(), loss);
        }
        history.push(best.1);
        let Some((r, jac)) = rj else { break };
        let grad = jac.transpose() * DVector::from_column_slice(&r) * (2.0 / m_count);
        let t = (epoch + 1) as i32;
        let (c1, c2) = (1.0 - opts.beta1.powi(t), 1.0 - opts.beta2.powi(t));
        for k in 0..n {
            m[k] = opts.beta1 * m[k] + (1.0 - opts.beta1) * grad[k];
            v[k] = opts.beta2 * v[k] + (1.0 - opts.beta2) * grad[k] * grad[k];
            theta[k] -= opts.lr * (m[k] / c1) / ((v[k] / c2).sqrt() + opts.eps);
        }
    }
    Ok(AdamResult { theta: best.0, initial_loss, best_loss: best.1, best_history: history, diverged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub gauss_newton: GaussNewtonOptions,
    pub adam: AdamOptions,
    pub replicates: usize,
    pub max_rounds: usize,
    /// Relative change of `p̂` between rounds that ends the alternation
    pub p_rel_tol: f64,
    /// Standard deviation of the perturbation of `θ` for replicates after the first
    pub replicate_jitter: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            gauss_newton: GaussNewtonOptions::default(),
            adam: AdamOptions::default(),
            replicates: 5,
            max_rounds: 20,
            p_rel_tol: 1e-4,
            replicate_jitter: 1e-2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub replicate: usize,
    pub round: usize,
    pub p_free: Vec<f64>,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub params: ParamVector,
    pub free_names: Vec<String>,
    pub p_std: Vec<f64>,
    /// Over the free mechanistic parameters; `None` when there are none
    pub covariance: Option<SymMatrix>,
    /// `‖r‖₂` of the scaled residuals at the result
    pub residual_norm: f64,
    pub trace: Vec<RoundTrace>,
    pub converged: bool,
    pub adam_diverged: bool,
}

struct ReplicateOutcome {
    params: ParamVector,
    trace: Vec<RoundTrace>,
    converged: bool,
    diverged: bool,
}

fn alternate(problem: &Problem, start: ParamVector, replicate: usize, cfg: &FitConfig) -> Result<ReplicateOutcome> {
    let model = problem.model;
    let mut params = start;
    let mut trace = Vec::new();
    let mut diverged = false;
    if model.n_free() == 0 {
        let a = adam_train(problem, &params, &cfg.adam).map_err(|e| Error::Round { round: 1, source: Box::new(e) })?;
        params = with_theta(&params, &a.theta)?;
        trace.push(RoundTrace { replicate, round: 1, p_free: Vec::new(), loss: a.best_loss });
        return Ok(ReplicateOutcome { params, trace, converged: true, diverged: a.diverged });
    }
    let mut converged = false;
    for round in 1..=cfg.max_rounds {
        let wrap = |e| Error::Round { round, source: Box::new(e) };
        let before = free_values(model, &params);
        let gn = gauss_newton(problem, &params, &cfg.gauss_newton).map_err(wrap)?;
        let a = adam_train(problem, &gn.params, &cfg.adam).map_err(wrap)?;
        diverged |= a.diverged;
        params = with_theta(&gn.params, &a.theta)?;
        let after = free_values(model, &params);
        trace.push(RoundTrace { replicate, round, p_free: after.clone(), loss: a.best_loss });
        let change = before.iter().zip(&after).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = after.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        if change <= cfg.p_rel_tol * scale {
            converged = true;
            break;
        }
    }
    Ok(ReplicateOutcome { params, trace, converged, diverged })
}

/// Alternates Gauss-Newton (θ fixed) and Adam (p̂ fixed) per replicate, averages
/// the replicate weights and finishes with one Gauss-Newton solve at the mean.
pub fn alternating_fit(problem: &Problem, init: &ParamVector, cfg: &FitConfig) -> Result<EstimationResult> {
    let model = problem.model;
    model.check_params(init)?;
    let free_names = model.free_param_names();
    let iopts = IntegratorOptions::with_tol(cfg.gauss_newton.integrator_tol);
    let finish = |params: ParamVector, covariance: Option<SymMatrix>, trace, converged, adam_diverged| -> Result<EstimationResult> {
        let p_std = covariance
            .as_ref()
            .map(|c: &SymMatrix| (0..c.dim()).map(|k| c.get(k, k).max(0.0).sqrt()).collect())
            .unwrap_or_default();
        let residual_norm = sum_sq(&problem.residuals(&params, &iopts)?).sqrt();
        Ok(EstimationResult { params, free_names: free_names.clone(), p_std, covariance, residual_norm, trace, converged, adam_diverged })
    };

    if model.n_theta() == 0 {
        let gn = gauss_newton(problem, init, &cfg.gauss_newton)?;
        let trace = vec![RoundTrace { replicate: 0, round: 1, p_free: free_values(model, &gn.params), loss: gn.cost / problem.data.len() as f64 }];
        return finish(gn.params, Some(gn.covariance), trace, gn.converged, false);
    }

    let reps = cfg.replicates.max(1);
    let starts: Vec<ParamVector> = (0..reps)
        .map(|r| {
            if r == 0 || cfg.replicate_jitter == 0.0 {
                return Ok(init.clone());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
            let noise = Normal::new(0.0, cfg.replicate_jitter).map_err(|e| Error::Input(e.to_string()))?;
            let theta: Vec<f64> = init.theta().iter().map(|t| t + noise.sample(&mut rng)).collect();
            with_theta(init, &theta)
        })
        .collect::<Result<_>>()?;
    let outcomes: Vec<ReplicateOutcome> = starts
        .into_par_iter()
        .enumerate()
        .map(|(r, s)| alternate(problem, s, r, cfg))
        .collect::<Result<_>>()?;

    let n_theta = model.n_theta();
    let mut theta = vec![0.0; n_theta];
    let mut p_hat = vec![0.0; model.n_p()];
    for o in &outcomes {
        theta.iter_mut().zip(o.params.theta()).for_each(|(a, b)| *a += b / reps as f64);
        p_hat.iter_mut().zip(&o.params.p_hat).for_each(|(a, b)| *a += b / reps as f64);
    }
    let mut mean = with_theta(init, &theta)?;
    mean.p_hat = p_hat;
    let converged = outcomes.iter().all(|o| o.converged);
    let diverged = outcomes.iter().any(|o| o.diverged);
    let trace: Vec<RoundTrace> = outcomes.into_iter().flat_map(|o| o.trace).collect();
    if model.n_free() == 0 {
        return finish(mean, None, trace, converged, diverged);
    }
    let gn = gauss_newton(problem, &mean, &cfg.gauss_newton).map_err(|e| Error::Round { round: cfg.max_rounds + 1, source: Box::new(e) })?;
    finish(gn.params, Some(gn.covariance), trace, converged && gn.converged, diverged)
}
