//! Benchmark registry, prior guesses, network pretraining and the ANN error metric.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ann::{Ann, AnnArchitecture};
use crate::design::ControlDesign;
use crate::error::{Error, Result};
use crate::models::{
    default_lotka_arch, default_urethane_arch, isocyanurate_rate, lotka_hybrid, lotka_mechanistic, urethane_hybrid,
    urethane_mechanistic, ParamVector, UdeModel, UrethaneConstants,
};
use crate::numerics::{IntegratorOptions, TimeGrid};
use crate::sensitivity::simulate;

/// Deterministic 64-bit stream seed for a named stream under a global seed.
pub fn stream_seed(global: u64, stream: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    h.update(stream.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "lotka-mech")]
    LotkaMech,
    #[serde(rename = "lotka-hybrid")]
    LotkaHybrid,
    #[serde(rename = "urethane")]
    Urethane,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::LotkaMech => "lotka-mech",
            ModelKind::LotkaHybrid => "lotka-hybrid",
            ModelKind::Urethane => "urethane",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lotka-mech" => Ok(ModelKind::LotkaMech),
            "lotka-hybrid" => Ok(ModelKind::LotkaHybrid),
            "urethane" => Ok(ModelKind::Urethane),
            _ => Err(Error::Config(format!("unknown model '{s}' (expected lotka-mech, lotka-hybrid or urethane)"))),
        }
    }
}

impl ModelKind {
    pub fn default_intervals(self) -> usize {
        match self {
            ModelKind::Urethane => 80,
            _ => 48,
        }
    }

    pub fn default_control_pieces(self) -> usize {
        match self {
            ModelKind::Urethane => 8,
            _ => 12,
        }
    }

    pub fn default_count(self) -> usize {
        match self {
            ModelKind::LotkaMech => 3,
            _ => 10,
        }
    }
}

/// The model used for design and fitting, and the ground truth generating data.
#[derive(Debug, Clone)]
pub struct ModelSetup {
    pub kind: ModelKind,
    pub model: UdeModel,
    pub truth: UdeModel,
    pub truth_params: ParamVector,
    pub urethane: Option<UrethaneConstants>,
}

impl ModelSetup {
    /// `hidden` overrides the hidden layer widths; `concurrent` also frees the
    /// mechanistic parameters of the hybrid Lotka model (`p2`).
    pub fn new(kind: ModelKind, hidden: Option<&[usize]>, concurrent: bool) -> Result<Self> {
        let arch = |default: AnnArchitecture| -> Result<AnnArchitecture> {
            match hidden {
                None => Ok(default),
                Some(h) => {
                    let d = default.layer_dims();
                    let dims: Vec<usize> = std::iter::once(d[0]).chain(h.iter().copied()).chain(std::iter::once(1)).collect();
                    AnnArchitecture::with_hidden_tanh(dims, *default.activations().last().unwrap())
                }
            }
        };
        Ok(match kind {
            ModelKind::LotkaMech => {
                let truth = lotka_mechanistic();
                let truth_params = truth.nominal_params(None);
                ModelSetup { kind, model: truth.clone(), truth, truth_params, urethane: None }
            }
            ModelKind::LotkaHybrid => {
                let mut model = lotka_hybrid(arch(default_lotka_arch())?)?;
                if concurrent {
                    model = model.with_free_params(vec![0])?;
                }
                let truth = lotka_mechanistic();
                let truth_params = truth.nominal_params(None);
                ModelSetup { kind, model, truth, truth_params, urethane: None }
            }
            ModelKind::Urethane => {
                let k = UrethaneConstants::default();
                let model = urethane_hybrid(k.clone(), arch(default_urethane_arch())?)?;
                let truth = urethane_mechanistic(k.clone())?;
                let truth_params = truth.nominal_params(None);
                ModelSetup { kind, model, truth, truth_params, urethane: Some(k) }
            }
        })
    }

    /// The quantity the network replaces, at state `x` with interaction scale `s`.
    fn interaction(&self, x: &[f64], scale: f64) -> Result<f64> {
        match &self.urethane {
            Some(k) => Ok(scale * isocyanurate_rate(k, x)?),
            None => Ok(scale * x[0] * x[1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainOptions {
    /// Relative standard deviation of the prior guesses around the nominal values
    pub prior_rel_std: f64,
    pub trajectory_points: usize,
    /// Side of the regular regression grid over `[0, 2]²` (Lotka only)
    pub grid_side: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for PretrainOptions {
    fn default() -> Self {
        PretrainOptions { prior_rel_std: 0.25, trajectory_points: 200, grid_side: 21, epochs: 3000, lr: 5e-3 }
    }
}

/// The prior guess `(p̄, θ̄)` of step 1.
#[derive(Debug, Clone)]
pub struct Prior {
    pub params: ParamVector,
    /// Multiplier of the true interaction the network was pretrained on
    pub interaction_scale: f64,
    pub pretrain_loss: Option<f64>,
}

fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 { y } else { y.exp_m1().max(f64::MIN_POSITIVE).ln() }
}

/// Draws the prior guess and, for hybrid models, regresses the network onto
/// the correspondingly scaled true interaction term.
pub fn draw_prior(setup: &ModelSetup, opts: &PretrainOptions, seed: u64) -> Result<Prior> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &format!("prior:{}", setup.kind)));
    let factor = Normal::new(1.0, opts.prior_rel_std).map_err(|e| Error::Config(e.to_string()))?;
    let draw = |rng: &mut ChaCha8Rng| factor.sample(rng).max(0.1);
    let model = &setup.model;
    let mut p_hat = model.nominal_p.clone();
    for &k in &model.free_params {
        p_hat[k] *= draw(&mut rng);
    }
    let Some(arch) = model.ann_arch.clone() else {
        return Ok(Prior { params: ParamVector { p_hat, ann: None }, interaction_scale: 1.0, pretrain_loss: None });
    };
    let scale = draw(&mut rng);

    // regression inputs: states along the prior mechanistic trajectory plus a box grid
    let mut states: Vec<Vec<f64>> = Vec::new();
    let truth = &setup.truth;
    let mut truth_p = setup.truth_params.clone();
    if setup.urethane.is_none() {
        // p1 and p3 both scale the interaction
        truth_p.p_hat[0] *= scale;
        truth_p.p_hat[2] *= scale;
    }
    let (t0, tf) = truth.horizon;
    let grid = TimeGrid::uniform(t0, tf, opts.trajectory_points.max(1))?;
    let sol = simulate(truth, &truth_p, &ControlDesign::zero(truth, grid.clone()), &grid, &IntegratorOptions::default())?;
    for j in 0..opts.trajectory_points {
        states.push(sol.eval_vec(grid.midpoint(j)));
    }
    if setup.urethane.is_none() && opts.grid_side > 1 {
        let n = opts.grid_side;
        for a in 0..n {
            for b in 0..n {
                states.push(vec![2.0 * a as f64 / (n - 1) as f64, 2.0 * b as f64 / (n - 1) as f64]);
            }
        }
    }
    let inputs: Vec<Vec<f64>> = states.iter().map(|x| model.dynamics().ann_inputs().iter().map(|&i| x[i]).collect()).collect();
    let targets: Vec<f64> = states.iter().map(|x| setup.interaction(x, scale)).collect::<Result<_>>()?;

    let mut ann = Ann::glorot(arch, &mut rng);
    let mean_target = targets.iter().sum::<f64>() / targets.len() as f64;
    let n_theta = ann.n_params();
    ann.theta_mut()[n_theta - 1] = softplus_inverse(mean_target.max(1e-300));
    let loss = regress(&mut ann, &inputs, &targets, opts)?;
    Ok(Prior { params: ParamVector { p_hat, ann: Some(ann) }, interaction_scale: scale, pretrain_loss: Some(loss) })
}

/// Full-batch Adam on the relative mean squared error; keeps the best weights.
fn regress(ann: &mut Ann, inputs: &[Vec<f64>], targets: &[f64], opts: &PretrainOptions) -> Result<f64> {
    let n = ann.n_params();
    let scale = targets.iter().map(|t| t * t).sum::<f64>() / targets.len() as f64;
    let norm = if scale > 0.0 { 1.0 / (scale * targets.len() as f64) } else { 1.0 / targets.len() as f64 };
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut best = (ann.theta().to_vec(), f64::INFINITY);
    for epoch in 0..=opts.epochs {
        let mut loss = 0.0;
        let mut grad = vec![0.0; n];
        for (x, &y) in inputs.iter().zip(targets) {
            let (out, _, du_dtheta) = ann.forward_with_jacobians(x)?;
            let r = out[0] - y;
            loss += r * r * norm;
            for k in 0..n {
                grad[k] += 2.0 * r * norm * du_dtheta[(0, k)];
            }
        }
        if loss < best.1 {
            best = (ann.theta().to_vec(), loss);
        }
        if epoch == opts.epochs {
            break;
        }
        let t = (epoch + 1) as i32;
        let (c1, c2) = (1.0 - f64::powi(b1, t), 1.0 - f64::powi(b2, t));
        let theta = ann.theta_mut();
        for k in 0..n {
            m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
            v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
            theta[k] -= opts.lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
        }
    }
    ann.set_theta(&best.0)?;
    Ok(best.1)
}

/// Mean absolute error of the learned interaction against `x1·x2` on a
/// `side × side` grid over `[0, a]²`. For the mechanistic model the learned
/// term is `p̂_i·x1·x2`, averaged over `i ∈ {1, 3}`.
pub fn interaction_error(setup: &ModelSetup, params: &ParamVector, a: f64, side: usize) -> Result<Option<f64>> {
    if setup.kind == ModelKind::Urethane || side < 2 {
        return Ok(None);
    }
    let mut total = 0.0;
    for i in 0..side {
        for j in 0..side {
            let x = [a * i as f64 / (side - 1) as f64, a * j as f64 / (side - 1) as f64];
            let truth = x[0] * x[1];
            total += match setup.kind {
                ModelKind::LotkaMech => {
                    0.5 * ((params.p_hat[0] * truth - truth).abs() + (params.p_hat[2] * truth - truth).abs())
                }
                _ => (setup.model.ann_value(&x, params)? - truth).abs(),
            };
        }
    }
    Ok(Some(total / (side * side) as f64))
}

/// Uniform random controls in the model bounds, for tests and restarts.
pub fn random_controls<R: Rng + ?Sized>(model: &UdeModel, grid: TimeGrid, rng: &mut R) -> ControlDesign {
    let mut c = ControlDesign::zero(model, grid);
    for ch in 0..c.n_u() {
        let (lo, hi) = c.bounds[ch];
        for k in 0..c.n_pieces() {
            c.values[(ch, k)] = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        }
    }
    c
}
