//! Block-coordinate solution of the design problem: sampling weights by a
//! convex inner solve, piecewise-constant controls by Nelder-Mead.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::controls::ControlDesign;
use super::neldermead::{nelder_mead, NelderMeadOptions};
use super::sampling::{
    evaluate_sampling, interval_gains, optimize_sampling_from, SamplingDesign, SamplingOptions, SamplingResult,
};
use super::scenario::{ControlPolicy, SamplingPolicy, Scenario};
use crate::error::Result;
use crate::fim::{assemble_fim, criterion, gramian_atoms, Criterion, GramianAtoms};
use crate::models::{ParamVector, UdeModel};
use crate::numerics::{sym_eig, IntegratorOptions, Spectrum, SymMatrix, TimeGrid};
use crate::sensitivity::{propagate, reduction_matrix, ReductionMatrix, ReductionStrategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OedConfig {
    pub grid: TimeGrid,
    pub control_pieces: usize,
    pub sampling: SamplingOptions,
    pub nm_max_evals: usize,
    pub restarts: usize,
    pub max_sweeps: usize,
    /// Outer loop stops when one sweep improves φ by less than this, relatively.
    pub sweep_rel_tol: f64,
    pub integrator_tol: f64,
    pub seed: u64,
}

impl OedConfig {
    pub fn new(grid: TimeGrid, control_pieces: usize) -> Self {
        OedConfig {
            grid,
            control_pieces,
            sampling: SamplingOptions::default(),
            nm_max_evals: 400,
            restarts: 3,
            max_sweeps: 50,
            sweep_rel_tol: 1e-6,
            integrator_tol: 1e-8,
            seed: 0,
        }
    }

    pub fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions::with_tol(self.integrator_tol)
    }

    pub fn control_grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.grid.start(), self.grid.end(), self.control_pieces)
    }
}

#[derive(Debug, Clone)]
pub struct OedSolution {
    pub scenario: Scenario,
    pub crit: Criterion,
    pub w_star: SamplingDesign,
    pub u_star: ControlDesign,
    pub phi_star: f64,
    pub mu_star: Vec<f64>,
    /// `∂φ/∂w` at `w_star`
    pub grad: DMatrix<f64>,
    pub fim: SymMatrix,
    pub spectrum: Spectrum,
    pub reduction: ReductionMatrix,
    pub atoms: GramianAtoms,
    pub sweeps: usize,
    pub evaluations: usize,
    /// The control search never improved on the initial controls.
    pub local_optimum: bool,
    pub inner_converged: bool,
    pub nonsmooth: bool,
}

impl OedSolution {
    /// `−∂φ/∂w_ij / Δt_j`, the interval-averaged information gain.
    pub fn gains(&self) -> DMatrix<f64> {
        interval_gains(&self.grad, &self.w_star.grid)
    }

    /// `max_i μ_i (M_i − used_i) / max(1, μ_i)`
    pub fn complementary_slackness(&self) -> f64 {
        self.mu_star
            .iter()
            .enumerate()
            .map(|(i, &mu)| mu * (self.w_star.budgets[i] - self.w_star.used(i)) / mu.max(1.0))
            .fold(0.0, f64::max)
    }
}

/// Complete FIM over `(p̂_free, θ)` with every interval sampled.
pub fn complete_fim(model: &UdeModel, params: &ParamVector, controls: &ControlDesign, grid: &TimeGrid, opts: &IntegratorOptions) -> Result<SymMatrix> {
    complete_fim_weighted(model, params, controls, grid, None, opts)
}

pub fn complete_fim_weighted(
    model: &UdeModel,
    params: &ParamVector,
    controls: &ControlDesign,
    grid: &TimeGrid,
    w: Option<&DMatrix<f64>>,
    opts: &IntegratorOptions,
) -> Result<SymMatrix> {
    let red = ReductionMatrix::complete(model);
    let traj = propagate(model, params, controls, grid, &red, opts)?;
    let atoms = gramian_atoms(&traj, model)?;
    let ones = atoms.ones();
    Ok(assemble_fim(&atoms, w.unwrap_or(&ones))?.f)
}

/// Reduction at the given controls; spectral bases come from the complete FIM with `w ≡ 1`.
pub fn build_reduction(
    strategy: ReductionStrategy,
    model: &UdeModel,
    params: &ParamVector,
    controls: &ControlDesign,
    grid: &TimeGrid,
    opts: &IntegratorOptions,
) -> Result<ReductionMatrix> {
    if strategy.needs_fim() {
        let f = complete_fim(model, params, controls, grid, opts)?;
        reduction_matrix(strategy, model, params, Some(&f))
    } else {
        reduction_matrix(strategy, model, params, None)
    }
}

pub fn reduced_atoms(
    model: &UdeModel,
    params: &ParamVector,
    controls: &ControlDesign,
    grid: &TimeGrid,
    reduction: &ReductionMatrix,
    opts: &IntegratorOptions,
) -> Result<GramianAtoms> {
    let traj = propagate(model, params, controls, grid, reduction, opts)?;
    gramian_atoms(&traj, model)
}

/// `φ_D` (or another criterion) of a fixed `(w, u)` in the top-`n_eval`
/// eigenbasis of the complete FIM at `(u, w ≡ 1)`: a strategy-independent yardstick.
#[allow(clippy::too_many_arguments)]
pub fn reference_phi(
    model: &UdeModel,
    params: &ParamVector,
    controls: &ControlDesign,
    w: &DMatrix<f64>,
    grid: &TimeGrid,
    crit: Criterion,
    n_eval: usize,
    opts: &IntegratorOptions,
) -> Result<f64> {
    let red = build_reduction(ReductionStrategy::Svd(n_eval), model, params, controls, grid, opts)?;
    let atoms = reduced_atoms(model, params, controls, grid, &red, opts)?;
    criterion(&assemble_fim(&atoms, w)?.f, crit, n_eval)
}

struct Inner<'a> {
    model: &'a UdeModel,
    params: &'a ParamVector,
    scenario: Scenario,
    crit: Criterion,
    config: &'a OedConfig,
}

impl Inner<'_> {
    fn label(&self) -> String {
        self.scenario.to_string()
    }

    fn solve(&self, controls: &ControlDesign, reduction: &ReductionMatrix, warm: Option<&DMatrix<f64>>) -> Result<(SamplingResult, GramianAtoms)> {
        let grid = &self.config.grid;
        let atoms = reduced_atoms(self.model, self.params, controls, grid, reduction, &self.config.integrator())?;
        let budgets = &self.model.budgets;
        let res = match self.scenario.sampling {
            SamplingPolicy::Optimized => {
                optimize_sampling_from(&atoms, budgets, self.crit, &self.config.sampling, &self.label(), warm)?
            }
            SamplingPolicy::Equidistant => {
                let w0 = SamplingDesign::uniform(grid.clone(), budgets.clone());
                evaluate_sampling(&atoms, &w0, self.crit, &self.label())?
            }
        };
        Ok((res, atoms))
    }
}

/// Solves one scenario. `u_init` seeds the control search; with the zero
/// control policy it is replaced by `u ≡ 0`.
pub fn optimize_controls(
    model: &UdeModel,
    params: &ParamVector,
    scenario: Scenario,
    crit: Criterion,
    u_init: Option<&ControlDesign>,
    config: &OedConfig,
) -> Result<OedSolution> {
    model.check_params(params)?;
    let cgrid = config.control_grid()?;
    let u0 = match (scenario.control, u_init) {
        (ControlPolicy::Zero, _) | (_, None) => ControlDesign::zero(model, cgrid),
        (ControlPolicy::Optimized, Some(u)) => {
            ControlDesign::new(u.grid.clone(), u.values.clone(), model.control_bounds.clone())?
        }
    };
    let inner = Inner { model, params, scenario, crit, config };
    let opts = config.integrator();

    let mut reduction = build_reduction(scenario.strategy, model, params, &u0, &config.grid, &opts)?;
    let (mut best_res, mut best_atoms) = inner.solve(&u0, &reduction, None)?;
    let mut best_u = u0.clone();
    let mut evaluations = 1;
    let mut sweeps = 0;
    let mut improved = false;

    let optimize_u = scenario.control == ControlPolicy::Optimized && !u0.is_fixed();
    while optimize_u && sweeps < config.max_sweeps {
        sweeps += 1;
        let bounds = best_u.flat_bounds();
        let warm = best_res.design.w.clone();
        let mut objective = |flat: &[f64]| -> f64 {
            let u = best_u.with_flat(flat);
            match inner.solve(&u, &reduction, Some(&warm)) {
                Ok((r, _)) => r.phi,
                Err(_) => f64::INFINITY,
            }
        };
        let nm = NelderMeadOptions { max_evals: config.nm_max_evals, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (sweeps as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut sweep_best: Option<(Vec<f64>, f64)> = None;
        // random restarts explore once; later sweeps only refine the incumbent
        let starts = if sweeps == 1 { config.restarts.max(1) } else { 1 };
        for r in 0..starts {
            let start: Vec<f64> = if r == 0 {
                best_u.to_flat()
            } else {
                bounds.iter().map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo }).collect()
            };
            let out = nelder_mead(&mut objective, &start, &bounds, &nm);
            evaluations += out.evals;
            // strict comparison keeps the lowest restart index on ties
            if sweep_best.as_ref().is_none_or(|(_, f)| out.f < *f) {
                sweep_best = Some((out.x, out.f));
            }
        }
        let (flat, _) = sweep_best.expect("at least one restart");
        let u_new = best_u.with_flat(&flat);
        // refresh the basis at the new controls and re-solve consistently
        let red_new = build_reduction(scenario.strategy, model, params, &u_new, &config.grid, &opts)?;
        let (res_new, atoms_new) = match inner.solve(&u_new, &red_new, Some(&best_res.design.w)) {
            Ok(v) => v,
            Err(_) => break,
        };
        evaluations += 1;
        let gain = (best_res.phi - res_new.phi) / best_res.phi.abs().max(f64::MIN_POSITIVE);
        if res_new.phi < best_res.phi {
            best_res = res_new;
            best_atoms = atoms_new;
            best_u = u_new;
            reduction = red_new;
            improved = true;
        }
        if gain < config.sweep_rel_tol {
            break;
        }
    }

    let fim = assemble_fim(&best_atoms, &best_res.design.w)?.f;
    let spectrum = sym_eig(&fim)?;
    Ok(OedSolution {
        scenario,
        crit,
        w_star: best_res.design,
        u_star: best_u,
        phi_star: best_res.phi,
        mu_star: best_res.mu,
        grad: best_res.grad,
        fim,
        spectrum,
        reduction,
        atoms: best_atoms,
        sweeps,
        evaluations,
        local_optimum: optimize_u && !improved,
        inner_converged: best_res.converged,
        nonsmooth: best_res.nonsmooth,
    })
}

