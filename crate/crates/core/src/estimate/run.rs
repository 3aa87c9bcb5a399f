//! The sequential evaluation procedure for one labeled scenario: prior guess,
//! design, measurement draw, synthetic data, alternating fit and evaluation.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::{draw_measurement_times, synthesize_dataset, Dataset};
use super::fit::{alternating_fit, EstimationResult, FitConfig, Problem};
use super::setup::{draw_prior, interaction_error, stream_seed, ModelKind, ModelSetup, PretrainOptions, Prior};
use crate::design::infogain::{info_gain, GammaCurves, InfoGainCurves, SvdLadder};
use crate::design::oed::{complete_fim_weighted, reference_phi, OedConfig};
use crate::design::{optimize_controls, parse_scenario, OedSolution, Scenario};
use crate::error::{Error, Result};
use crate::fim::Criterion;
use crate::models::ParamVector;
use crate::numerics::{IntegratorOptions, TimeGrid};
use crate::sensitivity::{propagate, simulate, ReductionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OedTuning {
    pub nm_max_evals: usize,
    pub restarts: usize,
    pub max_sweeps: usize,
    pub sweep_rel_tol: f64,
    pub integrator_tol: f64,
}

impl Default for OedTuning {
    fn default() -> Self {
        OedTuning { nm_max_evals: 400, restarts: 3, max_sweeps: 50, sweep_rel_tol: 1e-6, integrator_tol: 1e-8 }
    }
}

/// Everything shared by the scenarios of one run apart from the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub model: ModelKind,
    /// Hidden layer widths; `None` keeps the default network
    pub hidden: Option<Vec<usize>>,
    /// Estimate the hybrid model's mechanistic parameters together with `θ`
    pub concurrent: bool,
    pub criterion: Criterion,
    /// Dimension of the SVD basis in which hybrid designs are compared
    pub n_eval: usize,
    pub intervals: Option<usize>,
    pub control_pieces: Option<usize>,
    pub counts: Option<Vec<usize>>,
    pub sigma: f64,
    pub seed: u64,
    pub fit: FitConfig,
    pub pretrain: PretrainOptions,
    pub oed: OedTuning,
    pub mc_samples: usize,
    /// Truncation ladder length for the Γ diagnostics of SVD scenarios
    pub ladder: usize,
    pub delta_grid: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            model: ModelKind::LotkaMech,
            hidden: None,
            concurrent: false,
            criterion: Criterion::A,
            n_eval: 2,
            intervals: None,
            control_pieces: None,
            counts: None,
            sigma: 0.1,
            seed: 0,
            fit: FitConfig::default(),
            pretrain: PretrainOptions::default(),
            oed: OedTuning::default(),
            mc_samples: 100,
            ladder: 10,
            delta_grid: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub settings: RunSettings,
}

/// Models and prior shared across scenarios.
pub struct RunContext {
    pub settings: RunSettings,
    pub setup: ModelSetup,
    pub prior: Prior,
    pub grid: TimeGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub truth: Option<f64>,
    pub prior: f64,
    pub estimate: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub model: String,
    pub criterion: String,
    pub strategy_columns: usize,
    pub phi_star: Option<f64>,
    /// Criterion of the design in the common SVD basis (hybrid models)
    pub phi_eval: Option<f64>,
    pub mu: Vec<f64>,
    pub sweeps: usize,
    pub evaluations: usize,
    pub local_optimum: bool,
    pub binary_fraction: Option<f64>,
    pub measurements: Vec<usize>,
    pub estimates: Vec<ParamEstimate>,
    pub residual_norm: Option<f64>,
    pub theta_deviation: Option<f64>,
    pub delta_02: Option<f64>,
    pub delta_04: Option<f64>,
    pub fit_converged: Option<bool>,
    pub adam_diverged: Option<bool>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

/// Monte-Carlo state ensemble from the estimated covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub t: Vec<f64>,
    /// `[state][node]`
    pub mean: Vec<Vec<f64>>,
    pub q05: Vec<Vec<f64>>,
    pub q95: Vec<Vec<f64>>,
    pub samples: usize,
}

pub struct ScenarioOutcome {
    pub report: ScenarioReport,
    pub solution: Option<OedSolution>,
    pub dataset: Option<Dataset>,
    pub curves: Option<InfoGainCurves>,
    pub estimation: Option<EstimationResult>,
    pub ensemble: Option<Ensemble>,
}

impl RunContext {
    pub fn new(settings: RunSettings) -> Result<Self> {
        let setup = ModelSetup::new(settings.model, settings.hidden.as_deref(), settings.concurrent)?;
        if let Some(c) = &settings.counts {
            if c.len() != setup.model.n_y() {
                return Err(Error::Config(format!("counts needs {} entries", setup.model.n_y())));
            }
        }
        if settings.fit.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if !(settings.sigma >= 0.0) {
            return Err(Error::Config("sigma must be nonnegative".into()));
        }
        let clock = std::time::Instant::now();
        let prior = draw_prior(&setup, &settings.pretrain, settings.seed)?;
        log::info!("prior drawn in {:.1?}", clock.elapsed());
        let (t0, tf) = setup.model.horizon;
        let grid = TimeGrid::uniform(t0, tf, settings.intervals.unwrap_or(settings.model.default_intervals()))?;
        Ok(RunContext { settings, setup, prior, grid })
    }

    pub fn oed_config(&self, scenario: &str) -> OedConfig {
        let t = &self.settings.oed;
        let mut c = OedConfig::new(
            self.grid.clone(),
            self.settings.control_pieces.unwrap_or(self.settings.model.default_control_pieces()),
        );
        c.nm_max_evals = t.nm_max_evals;
        c.restarts = t.restarts;
        c.max_sweeps = t.max_sweeps;
        c.sweep_rel_tol = t.sweep_rel_tol;
        c.integrator_tol = t.integrator_tol;
        c.seed = stream_seed(self.settings.seed, &format!("controls:{scenario}"));
        c
    }

    pub fn counts(&self) -> Vec<usize> {
        self.settings.counts.clone().unwrap_or_else(|| vec![self.settings.model.default_count(); self.setup.model.n_y()])
    }

    fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions::with_tol(self.settings.oed.integrator_tol)
    }

    pub fn design(&self, scenario: &Scenario) -> Result<OedSolution> {
        let cfg = self.oed_config(&scenario.to_string());
        optimize_controls(&self.setup.model, &self.prior.params, *scenario, self.settings.criterion, None, &cfg)
    }

    /// Measurement times and noisy data for replicate `replicate` of a design.
    pub fn draw_data(&self, scenario: &str, solution: &OedSolution, replicate: u64) -> Result<Dataset> {
        let seed = stream_seed(self.settings.seed, &format!("data:{scenario}:{replicate}"));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let times = draw_measurement_times(&solution.w_star, &self.counts(), &mut rng)?;
        synthesize_dataset(
            &self.setup.truth,
            &self.setup.truth_params,
            &solution.u_star,
            &times,
            self.settings.sigma,
            seed,
            &mut rng,
            &IntegratorOptions::with_tol(1e-10),
        )
    }

    pub fn fit(&self, solution: &OedSolution, data: &Dataset, seed: u64) -> Result<EstimationResult> {
        let problem = Problem::new(&self.setup.model, &solution.u_star, data)?;
        let mut cfg = self.settings.fit;
        cfg.seed = seed;
        alternating_fit(&problem, &self.prior.params, &cfg)
    }

    /// Information gain along the design, with the Γ ladder for SVD strategies.
    pub fn curves(&self, solution: &OedSolution) -> Result<InfoGainCurves> {
        let model = &self.setup.model;
        let opts = self.integrator();
        let traj = propagate(model, &self.prior.params, &solution.u_star, &self.grid, &solution.reduction, &opts)?;
        let nodes = self.grid.nodes().to_vec();
        let mut curves = info_gain(&traj, model, &solution.fim, &nodes)?;
        if let crate::sensitivity::ReductionStrategy::Svd(_) = solution.scenario.strategy {
            if matches!(self.settings.criterion, Criterion::A | Criterion::D) {
                let complete = ReductionMatrix::complete(model);
                let full = propagate(model, &self.prior.params, &solution.u_star, &self.grid, &complete, &opts)?;
                let f = complete_fim_weighted(model, &self.prior.params, &solution.u_star, &self.grid, Some(&solution.w_star.w), &opts)?;
                let n_t = self.settings.ladder.min(crate::numerics::sym_eig(&f)?.positive_count());
                if n_t > 0 {
                    let ladder = SvdLadder::build(&full, model, &f, &nodes, n_t)?;
                    curves.gamma = (1..=n_t)
                        .map(|n_s| ladder.closed_form(n_s, self.settings.criterion))
                        .collect::<Result<Vec<GammaCurves>>>()?;
                }
            }
        }
        Ok(curves)
    }

    pub fn phi_eval(&self, solution: &OedSolution) -> Result<Option<f64>> {
        if !self.setup.model.is_hybrid() {
            return Ok(None);
        }
        reference_phi(
            &self.setup.model,
            &self.prior.params,
            &solution.u_star,
            &solution.w_star.w,
            &self.grid,
            self.settings.criterion,
            self.settings.n_eval,
            &self.integrator(),
        )
        .map(Some)
    }

    pub fn ensemble(&self, solution: &OedSolution, est: &EstimationResult, seed: u64) -> Result<Option<Ensemble>> {
        let Some(cov) = &est.covariance else { return Ok(None) };
        if self.settings.mc_samples == 0 {
            return Ok(None);
        }
        let model = &self.setup.model;
        let chol = cov
            .matrix()
            .clone()
            .cholesky()
            .ok_or(Error::Singular { lambda_min: 0.0, lambda_max: cov.max_abs() })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = self.grid.nodes().to_vec();
        let n_x = model.n_x();
        let mut runs: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); nodes.len()]; n_x];
        let opts = IntegratorOptions::default();
        for _ in 0..self.settings.mc_samples {
            let z = DVector::from_fn(cov.dim(), |_, _| StandardNormal.sample(&mut rng));
            let dp = chol.l() * z;
            let mut p = est.params.clone();
            for (c, &k) in model.free_params.iter().enumerate() {
                p.p_hat[k] += dp[c];
            }
            // samples whose trajectory fails are dropped
            if let Ok(sol) = simulate(model, &p, &solution.u_star, &self.grid, &opts) {
                for (k, _) in nodes.iter().enumerate() {
                    let x = sol.node_state(k);
                    for s in 0..n_x {
                        runs[s][k].push(x[s]);
                    }
                }
            }
        }
        let quantile = |v: &mut Vec<f64>, q: f64| -> f64 {
            v.sort_by(f64::total_cmp);
            let pos = q * (v.len().saturating_sub(1)) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        };
        let samples = runs[0][0].len();
        if samples == 0 {
            return Ok(None);
        }
        let mut mean = vec![Vec::new(); n_x];
        let mut q05 = vec![Vec::new(); n_x];
        let mut q95 = vec![Vec::new(); n_x];
        for s in 0..n_x {
            for v in runs[s].iter_mut() {
                mean[s].push(v.iter().sum::<f64>() / v.len() as f64);
                q05[s].push(quantile(v, 0.05));
                q95[s].push(quantile(v, 0.95));
            }
        }
        Ok(Some(Ensemble { t: nodes, mean, q05, q95, samples }))
    }
}

fn theta_deviation(a: &ParamVector, b: &ParamVector) -> Option<f64> {
    if a.n_theta() == 0 {
        return None;
    }
    Some(a.theta().iter().zip(b.theta()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
}

/// Runs every stage of one scenario, recording the first failure in the report.
pub fn run_scenario_in(ctx: &RunContext, label: &str) -> ScenarioOutcome {
    let mut report = ScenarioReport {
        scenario: label.to_string(),
        model: ctx.settings.model.to_string(),
        criterion: ctx.settings.criterion.to_string(),
        ..Default::default()
    };
    let mut out = ScenarioOutcome { report: ScenarioReport::default(), solution: None, dataset: None, curves: None, estimation: None, ensemble: None };
    let result = (|| -> Result<()> {
        let scenario = parse_scenario(label)?;
        let clock = std::time::Instant::now();
        let sol = ctx.design(&scenario)?;
        log::info!("{label}: design in {:.1?}", clock.elapsed());
        report.strategy_columns = sol.reduction.n_r();
        report.phi_star = Some(sol.phi_star);
        report.mu = sol.mu_star.clone();
        report.sweeps = sol.sweeps;
        report.evaluations = sol.evaluations;
        report.local_optimum = sol.local_optimum;
        report.binary_fraction = Some(sol.w_star.binary_fraction());
        if sol.w_star.binary_fraction() < 0.9 {
            report.warnings.push(format!("only {:.0}% of sampling weights are binary", 100.0 * sol.w_star.binary_fraction()));
        }
        if !sol.inner_converged {
            report.warnings.push("sampling optimizer stopped before reaching its tolerance".into());
        }
        report.phi_eval = ctx.phi_eval(&sol)?;
        match ctx.curves(&sol) {
            Ok(c) => out.curves = Some(c),
            Err(e) => report.warnings.push(format!("information gain unavailable: {e}")),
        }
        out.solution = Some(sol);
        let sol = out.solution.as_ref().unwrap();

        let data = ctx.draw_data(label, sol, 0)?;
        report.measurements = data.times.iter().map(Vec::len).collect();
        out.dataset = Some(data);
        let data = out.dataset.as_ref().unwrap();

        let clock = std::time::Instant::now();
        let est = ctx.fit(sol, data, stream_seed(ctx.settings.seed, &format!("fit:{label}")))?;
        log::info!("{label}: fit in {:.1?}", clock.elapsed());
        let model = &ctx.setup.model;
        for (c, &k) in model.free_params.iter().enumerate() {
            let truth = if ctx.setup.kind == ModelKind::LotkaMech { Some(ctx.setup.truth_params.p_hat[k]) } else { None };
            report.estimates.push(ParamEstimate {
                name: model.param_names[k].clone(),
                truth: truth.or_else(|| (ctx.setup.kind == ModelKind::LotkaHybrid).then(|| model.nominal_p[k])),
                prior: ctx.prior.params.p_hat[k],
                estimate: est.params.p_hat[k],
                std: est.p_std.get(c).copied().unwrap_or(f64::NAN),
            });
        }
        report.residual_norm = Some(est.residual_norm);
        report.theta_deviation = theta_deviation(&est.params, &ctx.prior.params);
        report.fit_converged = Some(est.converged);
        report.adam_diverged = Some(est.adam_diverged);
        report.delta_02 = interaction_error(&ctx.setup, &est.params, 2.0, ctx.settings.delta_grid)?;
        report.delta_04 = interaction_error(&ctx.setup, &est.params, 4.0, ctx.settings.delta_grid)?;
        out.ensemble = ctx.ensemble(sol, &est, stream_seed(ctx.settings.seed, &format!("mc:{label}")))?;
        out.estimation = Some(est);
        Ok(())
    })();
    if let Err(e) = result {
        report.error = Some(e.to_string());
    }
    out.report = report;
    out
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome> {
    parse_scenario(&config.scenario)?;
    let ctx = RunContext::new(config.settings.clone())?;
    Ok(run_scenario_in(&ctx, &config.scenario))
}
