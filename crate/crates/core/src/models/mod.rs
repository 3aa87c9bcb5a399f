//! Universal differential equations `x' = f_S(f̂(x, u, p̂), U(x, θ))`.
//!
//! Both benchmarks couple the network additively, `f = f̂ + c(x)·U`, so the
//! composition is described by the coupling vector `c(x)` and its state
//! Jacobian. A model without a network is purely mechanistic.

pub mod lotka;
pub mod urethane;

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::ann::{Ann, AnnArchitecture};
use crate::error::{Error, Result};

pub use lotka::{default_lotka_arch, lotka_hybrid, lotka_hybrid_concurrent, lotka_mechanistic, LotkaHybrid, LotkaMechanistic};
pub use urethane::{isocyanurate_rate, urethane_hybrid, urethane_mechanistic, UrethaneConstants, default_urethane_arch};

/// Mechanistic part `f̂` with its partials.
#[derive(Debug, Clone)]
pub struct MechEval {
    pub f: Vec<f64>,
    /// n_x × n_x
    pub f_x: DMatrix<f64>,
    /// n_x × n_p̂
    pub f_p: DMatrix<f64>,
}

impl MechEval {
    pub fn zeros(n_x: usize, n_p: usize) -> Self {
        MechEval { f: vec![0.0; n_x], f_x: DMatrix::zeros(n_x, n_x), f_p: DMatrix::zeros(n_x, n_p) }
    }
}

/// Observation values `y = h(x)` and the Jacobian `h_x` (n_y × n_x).
#[derive(Debug, Clone)]
pub struct Observation {
    pub y: Vec<f64>,
    pub h_x: DMatrix<f64>,
}

/// Model-specific right-hand side pieces.
pub trait Dynamics: Send + Sync + Debug {
    fn n_x(&self) -> usize;
    fn n_u(&self) -> usize;
    fn n_p(&self) -> usize;
    fn n_y(&self) -> usize;

    fn mechanistic(&self, x: &[f64], u: &[f64], p: &[f64]) -> Result<MechEval>;

    /// States fed into the network, in order.
    fn ann_inputs(&self) -> Vec<usize> {
        Vec::new()
    }

    /// Coupling `c(x)` and `∂c/∂x`; `None` for purely mechanistic models.
    fn coupling(&self, _x: &[f64]) -> Result<Option<(Vec<f64>, DMatrix<f64>)>> {
        Ok(None)
    }

    fn observe(&self, x: &[f64]) -> Result<Observation>;
}

/// Everything the VDE needs at one point `(x, u)`.
#[derive(Debug, Clone)]
pub struct RhsEval {
    pub f: Vec<f64>,
    pub f_x: DMatrix<f64>,
    /// n_x × n_p̂ over all mechanistic parameters
    pub f_p: DMatrix<f64>,
    /// `∂f_S/∂U`, zero for mechanistic models
    pub coupling: Vec<f64>,
    /// network output `U(x, θ)`
    pub u_value: f64,
    /// `∂U/∂θ` (length n_θ), empty without a network
    pub u_theta: Vec<f64>,
}

impl RhsEval {
    /// Dense `∂f/∂θ = c·∂U/∂θ` (n_x × n_θ).
    pub fn f_theta(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.coupling.len(), self.u_theta.len(), |r, c| self.coupling[r] * self.u_theta[c])
    }
}

#[derive(Debug, Clone)]
pub struct UdeModel {
    pub name: String,
    dynamics: Arc<dyn Dynamics>,
    pub ann_arch: Option<AnnArchitecture>,
    pub state_names: Vec<String>,
    pub param_names: Vec<String>,
    pub observable_names: Vec<String>,
    pub nominal_p: Vec<f64>,
    /// Indices into p̂ of the parameters being designed for / estimated.
    pub free_params: Vec<usize>,
    pub x0: Vec<f64>,
    pub horizon: (f64, f64),
    pub control_names: Vec<String>,
    pub control_bounds: Vec<(f64, f64)>,
    /// Measurement budgets M_i in time units, one per observable.
    pub budgets: Vec<f64>,
}

/// Mechanistic parameters together with network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub p_hat: Vec<f64>,
    pub ann: Option<Ann>,
}

impl ParamVector {
    pub fn theta(&self) -> &[f64] {
        self.ann.as_ref().map(|a| a.theta()).unwrap_or(&[])
    }

    pub fn n_theta(&self) -> usize {
        self.theta().len()
    }
}

impl UdeModel {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        name: &str,
        dynamics: Arc<dyn Dynamics>,
        ann_arch: Option<AnnArchitecture>,
        state_names: &[&str],
        param_names: &[&str],
        observable_names: &[&str],
        nominal_p: Vec<f64>,
        free_params: Vec<usize>,
        x0: Vec<f64>,
        horizon: (f64, f64),
        control_names: &[&str],
        control_bounds: Vec<(f64, f64)>,
        budgets: Vec<f64>,
    ) -> Result<Self> {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let model = UdeModel {
            name: name.to_string(),
            dynamics,
            ann_arch,
            state_names: s(state_names),
            param_names: s(param_names),
            observable_names: s(observable_names),
            nominal_p,
            free_params,
            x0,
            horizon,
            control_names: s(control_names),
            control_bounds,
            budgets,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let d = &self.dynamics;
        if self.x0.len() != d.n_x() || self.state_names.len() != d.n_x() {
            return Err(Error::Config("initial state length does not match state count".into()));
        }
        if self.nominal_p.len() != d.n_p() || self.param_names.len() != d.n_p() {
            return Err(Error::Config("parameter vector length does not match model".into()));
        }
        if self.free_params.iter().any(|&i| i >= d.n_p()) {
            return Err(Error::Config("free parameter index out of range".into()));
        }
        if self.control_bounds.len() != d.n_u() {
            return Err(Error::Config("control bounds do not match control count".into()));
        }
        if self.control_bounds.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::Config("control lower bound exceeds upper bound".into()));
        }
        if self.budgets.len() != d.n_y() || self.budgets.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::Config("need one nonnegative budget per observable".into()));
        }
        if !(self.horizon.1 > self.horizon.0) {
            return Err(Error::Config("empty time horizon".into()));
        }
        if let Some(arch) = &self.ann_arch {
            if arch.input_dim() != d.ann_inputs().len() || arch.output_dim() != 1 {
                return Err(Error::Config(format!(
                    "network must map {} inputs to 1 output, got {:?}",
                    d.ann_inputs().len(),
                    arch.layer_dims()
                )));
            }
        }
        Ok(())
    }

    pub fn n_x(&self) -> usize {
        self.dynamics.n_x()
    }

    pub fn n_u(&self) -> usize {
        self.dynamics.n_u()
    }

    pub fn n_p(&self) -> usize {
        self.dynamics.n_p()
    }

    pub fn n_y(&self) -> usize {
        self.dynamics.n_y()
    }

    pub fn n_theta(&self) -> usize {
        self.ann_arch.as_ref().map(|a| a.param_count()).unwrap_or(0)
    }

    pub fn n_free(&self) -> usize {
        self.free_params.len()
    }

    pub fn is_hybrid(&self) -> bool {
        self.ann_arch.is_some()
    }

    pub fn dynamics(&self) -> &dyn Dynamics {
        self.dynamics.as_ref()
    }

    pub fn with_free_params(mut self, free: Vec<usize>) -> Result<Self> {
        self.free_params = free;
        self.validate()?;
        Ok(self)
    }

    pub fn with_budgets(mut self, budgets: Vec<f64>) -> Result<Self> {
        self.budgets = budgets;
        self.validate()?;
        Ok(self)
    }

    pub fn with_control_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        self.control_bounds = bounds;
        self.validate()?;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: (f64, f64)) -> Result<Self> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    pub fn free_param_names(&self) -> Vec<String> {
        self.free_params.iter().map(|&i| self.param_names[i].clone()).collect()
    }

    pub fn nominal_params(&self, ann: Option<Ann>) -> ParamVector {
        ParamVector { p_hat: self.nominal_p.clone(), ann }
    }

    pub fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.p_hat.len() != self.n_p() {
            return Err(Error::Input("mechanistic parameter length mismatch".into()));
        }
        match (&self.ann_arch, &params.ann) {
            (Some(arch), Some(ann)) if ann.arch() == arch => Ok(()),
            (None, None) => Ok(()),
            (None, Some(_)) => Ok(()),
            _ => Err(Error::Input("network weights do not match the model architecture".into())),
        }
    }

    fn ann_input(&self, x: &[f64]) -> Vec<f64> {
        self.dynamics.ann_inputs().iter().map(|&i| x[i]).collect()
    }

    /// Network output at state `x`, 0 for mechanistic models.
    pub fn ann_value(&self, x: &[f64], params: &ParamVector) -> Result<f64> {
        match (&self.ann_arch, &params.ann) {
            (Some(_), Some(ann)) => Ok(ann.forward(&self.ann_input(x))?[0]),
            _ => Ok(0.0),
        }
    }

    /// Right-hand side value only.
    pub fn rhs(&self, x: &[f64], u: &[f64], params: &ParamVector, out: &mut [f64]) -> Result<()> {
        let mech = self.dynamics.mechanistic(x, u, &params.p_hat)?;
        out.copy_from_slice(&mech.f);
        if let (Some(_), Some(ann)) = (&self.ann_arch, &params.ann) {
            if let Some((c, _)) = self.dynamics.coupling(x)? {
                let uval = ann.forward(&self.ann_input(x))?[0];
                for (o, ci) in out.iter_mut().zip(&c) {
                    *o += ci * uval;
                }
            }
        }
        Ok(())
    }

    /// Value and all partials needed by the variational equations.
    pub fn rhs_eval(&self, x: &[f64], u: &[f64], params: &ParamVector) -> Result<RhsEval> {
        let n_x = self.n_x();
        let mech = self.dynamics.mechanistic(x, u, &params.p_hat)?;
        let mut eval = RhsEval {
            f: mech.f,
            f_x: mech.f_x,
            f_p: mech.f_p,
            coupling: vec![0.0; n_x],
            u_value: 0.0,
            u_theta: Vec::new(),
        };
        if let (Some(_), Some(ann)) = (&self.ann_arch, &params.ann) {
            if let Some((c, dc_dx)) = self.dynamics.coupling(x)? {
                let inputs = self.dynamics.ann_inputs();
                let (out, jx, jt) = ann.forward_with_jacobians(&self.ann_input(x))?;
                let uval = out[0];
                for r in 0..n_x {
                    eval.f[r] += c[r] * uval;
                    for (k, &s) in inputs.iter().enumerate() {
                        eval.f_x[(r, s)] += c[r] * jx[(0, k)];
                    }
                    for s in 0..n_x {
                        eval.f_x[(r, s)] += dc_dx[(r, s)] * uval;
                    }
                }
                eval.coupling = c;
                eval.u_value = uval;
                eval.u_theta = jt.row(0).iter().copied().collect();
            }
        }
        Ok(eval)
    }

    pub fn observe(&self, x: &[f64]) -> Result<Observation> {
        self.dynamics.observe(x)
    }

    /// The control value 0, clipped into each channel's bounds.
    pub fn zero_control(&self) -> Vec<f64> {
        self.control_bounds.iter().map(|&(lo, hi)| 0.0f64.clamp(lo, hi)).collect()
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Central-difference check of `rhs_eval` partials.
    pub fn check_partials(model: &UdeModel, x: &[f64], u: &[f64], params: &ParamVector, tol: f64) {
        let e = model.rhs_eval(x, u, params).unwrap();
        let n_x = model.n_x();
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
        let mut fp = vec![0.0; n_x];
        let mut fm = vec![0.0; n_x];
        for s in 0..n_x {
            let h = 1e-6 * x[s].abs().max(1e-2);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[s] += h;
            xm[s] -= h;
            model.rhs(&xp, u, params, &mut fp).unwrap();
            model.rhs(&xm, u, params, &mut fm).unwrap();
            for r in 0..n_x {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                assert!(rel(e.f_x[(r, s)], fd) <= tol, "f_x[{r},{s}] = {} vs {fd}", e.f_x[(r, s)]);
            }
        }
        for k in 0..model.n_p() {
            let h = 1e-6 * params.p_hat[k].abs().max(1e-2);
            let mut pp = params.clone();
            let mut pm = params.clone();
            pp.p_hat[k] += h;
            pm.p_hat[k] -= h;
            model.rhs(x, u, &pp, &mut fp).unwrap();
            model.rhs(x, u, &pm, &mut fm).unwrap();
            for r in 0..n_x {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                assert!(rel(e.f_p[(r, k)], fd) <= tol, "f_p[{r},{k}] = {} vs {fd}", e.f_p[(r, k)]);
            }
        }
        if let Some(ann) = &params.ann {
            let ft = e.f_theta();
            for k in (0..ann.n_params()).step_by(7) {
                let h = 1e-6;
                let mut pp = params.clone();
                let mut pm = params.clone();
                pp.ann.as_mut().unwrap().theta_mut()[k] += h;
                pm.ann.as_mut().unwrap().theta_mut()[k] -= h;
                model.rhs(x, u, &pp, &mut fp).unwrap();
                model.rhs(x, u, &pm, &mut fm).unwrap();
                for r in 0..n_x {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    assert!(rel(ft[(r, k)], fd) <= tol, "f_θ[{r},{k}] = {} vs {fd}", ft[(r, k)]);
                }
            }
        }
    }

    pub fn check_observation(model: &UdeModel, x: &[f64], tol: f64) {
        let o = model.observe(x).unwrap();
        for s in 0..model.n_x() {
            let h = 1e-6 * x[s].abs().max(1e-3);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[s] += h;
            xm[s] -= h;
            let yp = model.observe(&xp).unwrap().y;
            let ym = model.observe(&xm).unwrap().y;
            for i in 0..model.n_y() {
                let fd = (yp[i] - ym[i]) / (2.0 * h);
                let scale = o.h_x[(i, s)].abs().max(fd.abs()).max(1e-6);
                assert!((o.h_x[(i, s)] - fd).abs() / scale <= tol, "h_x[{i},{s}] = {} vs {fd}", o.h_x[(i, s)]);
            }
        }
    }
}
