//! Forward sensitivities `G = dx/dp·A` for a linear reduction `A` of the free
//! parameters `(p̂_free, θ)`.
//!
//! The augmented state is `x` followed by `G` in row-major order, and obeys
//! `Ġ = f_x G + f_p A` with `G(0) = 0` (initial states are parameter free).

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::ControlDesign;
use crate::error::{Error, Result};
use crate::models::{ParamVector, UdeModel};
use crate::numerics::{integrate, sym_eig, DenseSolution, IntegratorOptions, Spectrum, SymMatrix, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReductionStrategy {
    Complete,
    Outer,
    Lump,
    LumpLayerwise,
    Svd(usize),
    Psvd(usize),
    Tsvd(usize),
}

impl ReductionStrategy {
    pub fn n_s(&self) -> Option<usize> {
        match *self {
            ReductionStrategy::Svd(n) | ReductionStrategy::Psvd(n) | ReductionStrategy::Tsvd(n) => Some(n),
            _ => None,
        }
    }

    /// Whether the reduction is built from a spectral decomposition of the FIM.
    pub fn needs_fim(&self) -> bool {
        self.n_s().is_some()
    }
}

impl fmt::Display for ReductionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReductionStrategy::Complete => write!(f, "c"),
            ReductionStrategy::Outer => write!(f, "o"),
            ReductionStrategy::Lump => write!(f, "l"),
            ReductionStrategy::LumpLayerwise => write!(f, "ll"),
            ReductionStrategy::Svd(n) => write!(f, "svd{n}"),
            ReductionStrategy::Psvd(n) => write!(f, "psvd{n}"),
            ReductionStrategy::Tsvd(n) => write!(f, "tsvd{n}"),
        }
    }
}

impl FromStr for ReductionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let count = |digits: &str, offset: usize| -> Result<usize> {
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
                return Err(Error::Parse { position: offset, message: format!("expected a positive count, found '{digits}'") });
            }
            digits.parse().map_err(|_| Error::Parse { position: offset, message: "count too large".into() })
        };
        match s {
            "c" => Ok(ReductionStrategy::Complete),
            "o" => Ok(ReductionStrategy::Outer),
            "l" => Ok(ReductionStrategy::Lump),
            "ll" => Ok(ReductionStrategy::LumpLayerwise),
            _ if s.starts_with("psvd") => Ok(ReductionStrategy::Psvd(count(&s[4..], 4)?)),
            _ if s.starts_with("tsvd") => Ok(ReductionStrategy::Tsvd(count(&s[4..], 4)?)),
            _ if s.starts_with("svd") => Ok(ReductionStrategy::Svd(count(&s[3..], 3)?)),
            _ => Err(Error::Parse { position: 0, message: format!("unknown reduction '{s}'") }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Map {
    /// A subset of the full parameter columns
    Select(Vec<usize>),
    /// Free p̂ columns plus one column forced by `∂f_S/∂U·U`
    Outer,
    Dense(DMatrix<f64>),
}

/// The linear map from the reduced to the full free parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionMatrix {
    pub strategy: ReductionStrategy,
    map: Map,
    pub labels: Vec<String>,
    pub n_free_p: usize,
    pub n_theta: usize,
    /// Spectrum the basis was taken from (spectral strategies only).
    pub basis_spectrum: Option<Spectrum>,
}

impl ReductionMatrix {
    pub fn n_full(&self) -> usize {
        self.n_free_p + self.n_theta
    }

    pub fn n_r(&self) -> usize {
        self.labels.len()
    }

    /// Explicit matrix `A` (n_full × n_r); `None` for the outer strategy.
    pub fn matrix(&self) -> Option<DMatrix<f64>> {
        match &self.map {
            Map::Select(cols) => {
                let mut a = DMatrix::zeros(self.n_full(), cols.len());
                for (k, &c) in cols.iter().enumerate() {
                    a[(c, k)] = 1.0;
                }
                Some(a)
            }
            Map::Outer => None,
            Map::Dense(a) => Some(a.clone()),
        }
    }

    /// Identity over every free parameter.
    pub fn complete(model: &UdeModel) -> Self {
        let mut r = Self::select(model, (0..model.n_free() + model.n_theta()).collect());
        r.strategy = ReductionStrategy::Complete;
        r
    }

    /// Only the free mechanistic parameters.
    pub fn mechanistic_only(model: &UdeModel) -> Self {
        Self::select(model, (0..model.n_free()).collect())
    }

    /// Only the network weights.
    pub fn theta_only(model: &UdeModel) -> Self {
        Self::select(model, (model.n_free()..model.n_free() + model.n_theta()).collect())
    }

    fn select(model: &UdeModel, cols: Vec<usize>) -> Self {
        let labels = cols.iter().map(|&c| full_label(model, c)).collect();
        ReductionMatrix {
            strategy: ReductionStrategy::Complete,
            map: Map::Select(cols),
            labels,
            n_free_p: model.n_free(),
            n_theta: model.n_theta(),
            basis_spectrum: None,
        }
    }
}

fn full_label(model: &UdeModel, c: usize) -> String {
    if c < model.n_free() {
        model.param_names[model.free_params[c]].clone()
    } else {
        format!("theta{}", c - model.n_free())
    }
}

/// Top-`n_s` eigenvectors, sign-normalized so each has its largest-magnitude entry positive.
fn leading_eigenvectors(spec: &Spectrum, n_s: usize) -> Result<DMatrix<f64>> {
    let available = spec.positive_count();
    if n_s == 0 || n_s > available {
        return Err(Error::Rank { requested: n_s, available });
    }
    let mut v = spec.eigenvectors.columns(0, n_s).into_owned();
    for k in 0..n_s {
        let col = v.column(k);
        let imax = col.iamax();
        if col[imax] < 0.0 {
            v.column_mut(k).neg_mut();
        }
    }
    Ok(v)
}

fn block_with_identity(n_free_p: usize, theta_block: &DMatrix<f64>) -> DMatrix<f64> {
    let n_theta = theta_block.nrows();
    let k = theta_block.ncols();
    let mut a = DMatrix::zeros(n_free_p + n_theta, n_free_p + k);
    for i in 0..n_free_p {
        a[(i, i)] = 1.0;
    }
    a.view_mut((n_free_p, n_free_p), (n_theta, k)).copy_from(theta_block);
    a
}

/// Builds the reduction for `strategy` at the linearization weights in `params`.
///
/// Spectral strategies need `fim_full`, the FIM over all free parameters
/// `(p̂_free, θ)` from a complete sensitivity pass.
pub fn reduction_matrix(
    strategy: ReductionStrategy,
    model: &UdeModel,
    params: &ParamVector,
    fim_full: Option<&SymMatrix>,
) -> Result<ReductionMatrix> {
    let n_pf = model.n_free();
    let n_theta = model.n_theta();
    if n_theta == 0 && !matches!(strategy, ReductionStrategy::Complete | ReductionStrategy::Svd(_)) {
        return Err(Error::Input(format!("strategy {strategy} needs a model with a network")));
    }
    let theta = params.theta();
    if theta.len() != n_theta {
        return Err(Error::Input("linearization weights do not match the model".into()));
    }
    let p_labels: Vec<String> = (0..n_pf).map(|c| full_label(model, c)).collect();
    let with_p = |extra: Vec<String>| -> Vec<String> { p_labels.iter().cloned().chain(extra).collect() };
    let fim = || -> Result<&SymMatrix> {
        let f = fim_full.ok_or_else(|| Error::Input(format!("strategy {strategy} needs a complete FIM")))?;
        if f.dim() != n_pf + n_theta {
            return Err(Error::Input("FIM dimension does not match the free parameters".into()));
        }
        Ok(f)
    };
    let base = |map, labels, basis_spectrum| ReductionMatrix {
        strategy,
        map,
        labels,
        n_free_p: n_pf,
        n_theta,
        basis_spectrum,
    };

    Ok(match strategy {
        ReductionStrategy::Complete => ReductionMatrix::complete(model),
        ReductionStrategy::Outer => base(Map::Outer, with_p(vec!["outer".into()]), None),
        ReductionStrategy::Lump => {
            let col = DMatrix::from_column_slice(n_theta, 1, theta);
            base(Map::Dense(block_with_identity(n_pf, &col)), with_p(vec!["lump".into()]), None)
        }
        ReductionStrategy::LumpLayerwise => {
            let ranges = model.ann_arch.as_ref().unwrap().layer_ranges();
            let mut xi = DMatrix::zeros(n_theta, ranges.len());
            for (j, r) in ranges.iter().enumerate() {
                for i in r.clone() {
                    xi[(i, j)] = theta[i];
                }
            }
            let labels = (1..=ranges.len()).map(|j| format!("layer{j}")).collect();
            base(Map::Dense(block_with_identity(n_pf, &xi)), with_p(labels), None)
        }
        ReductionStrategy::Svd(n_s) => {
            let spec = sym_eig(fim()?)?;
            let v = leading_eigenvectors(&spec, n_s)?;
            let labels = (1..=n_s).map(|k| format!("sv{k}")).collect();
            base(Map::Dense(v), labels, Some(spec))
        }
        ReductionStrategy::Psvd(n_s) => {
            let f_cc = fim()?.submatrix(&(n_pf..n_pf + n_theta).collect::<Vec<_>>());
            let spec = sym_eig(&f_cc)?;
            let v = leading_eigenvectors(&spec, n_s)?;
            let labels = (1..=n_s).map(|k| format!("sv{k}")).collect();
            base(Map::Dense(block_with_identity(n_pf, &v)), with_p(labels), Some(spec))
        }
        ReductionStrategy::Tsvd(n_s) => {
            let f_cc = fim()?.submatrix(&(n_pf..n_pf + n_theta).collect::<Vec<_>>());
            let spec = sym_eig(&f_cc)?;
            let v = leading_eigenvectors(&spec, n_s)?;
            let xi = DMatrix::from_fn(n_theta, n_s, |i, k| if v[(i, k)] > 0.0 { theta[i] } else { 0.0 });
            let labels = (1..=n_s).map(|k| format!("tsv{k}")).collect();
            base(Map::Dense(block_with_identity(n_pf, &xi)), with_p(labels), Some(spec))
        }
    })
}

/// Sensitivities along one trajectory, with dense output between nodes.
#[derive(Debug, Clone)]
pub struct SensitivityTrajectory {
    pub n_x: usize,
    pub n_r: usize,
    pub labels: Vec<String>,
    solution: DenseSolution,
}

impl SensitivityTrajectory {
    pub fn grid(&self) -> &TimeGrid {
        self.solution.grid()
    }

    pub fn solution(&self) -> &DenseSolution {
        &self.solution
    }

    pub fn x_at_node(&self, k: usize) -> &[f64] {
        &self.solution.node_state(k)[..self.n_x]
    }

    /// `G` at node `k` (n_x × n_r).
    pub fn g_at_node(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_x, self.n_r, &self.solution.node_state(k)[self.n_x..])
    }

    pub fn split(&self, z: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        (z[..self.n_x].to_vec(), DMatrix::from_row_slice(self.n_x, self.n_r, &z[self.n_x..]))
    }

    pub fn eval(&self, t: f64) -> (Vec<f64>, DMatrix<f64>) {
        self.split(&self.solution.eval_vec(t))
    }

    /// CSV with columns `t, x_*, G_<state>_<label>` at the grid nodes.
    pub fn write_csv(&self, path: &Path, state_names: &[String]) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut header = vec!["t".to_string()];
        header.extend(state_names.iter().map(|s| format!("x_{s}")));
        for s in state_names {
            header.extend(self.labels.iter().map(|l| format!("G_{s}_{l}")));
        }
        writeln!(out, "{}", header.join(","))?;
        for (k, t) in self.grid().nodes().iter().enumerate() {
            let row: Vec<String> =
                std::iter::once(*t).chain(self.solution.node_state(k).iter().copied()).map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Variational right-hand side for a fixed reduction.
pub struct AugmentedSystem<'a> {
    model: &'a UdeModel,
    params: &'a ParamVector,
    reduction: &'a ReductionMatrix,
    /// θ-block of a dense `A` (n_θ × n_r), cached column-major
    a_theta: Option<DMatrix<f64>>,
    a_p: Option<DMatrix<f64>>,
}

impl<'a> AugmentedSystem<'a> {
    pub fn new(model: &'a UdeModel, params: &'a ParamVector, reduction: &'a ReductionMatrix) -> Result<Self> {
        model.check_params(params)?;
        if reduction.n_free_p != model.n_free() || reduction.n_theta != model.n_theta() {
            return Err(Error::Input("reduction does not match the model's free parameters".into()));
        }
        if reduction.n_theta > 0 && params.n_theta() != reduction.n_theta {
            return Err(Error::Input("network weights missing for a hybrid model".into()));
        }
        let (a_p, a_theta) = match &reduction.map {
            Map::Dense(a) => {
                let n_pf = reduction.n_free_p;
                (
                    Some(a.rows(0, n_pf).into_owned()),
                    Some(a.rows(n_pf, reduction.n_theta).into_owned()),
                )
            }
            _ => (None, None),
        };
        Ok(AugmentedSystem { model, params, reduction, a_theta, a_p })
    }

    pub fn dim(&self) -> usize {
        self.model.n_x() * (1 + self.reduction.n_r())
    }

    pub fn initial_state(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        z[..self.model.n_x()].copy_from_slice(&self.model.x0);
        z
    }

    /// `f_p·A` at one point (n_x × n_r).
    fn forcing(&self, eval: &crate::models::RhsEval) -> DMatrix<f64> {
        let n_x = self.model.n_x();
        let n_pf = self.reduction.n_free_p;
        let free = &self.model.free_params;
        let n_r = self.reduction.n_r();
        let mut force = DMatrix::zeros(n_x, n_r);
        match &self.reduction.map {
            Map::Select(cols) => {
                for (k, &c) in cols.iter().enumerate() {
                    if c < n_pf {
                        force.column_mut(k).copy_from(&eval.f_p.column(free[c]));
                    } else {
                        let d = eval.u_theta[c - n_pf];
                        for r in 0..n_x {
                            force[(r, k)] = eval.coupling[r] * d;
                        }
                    }
                }
            }
            Map::Outer => {
                for (k, &c) in free.iter().enumerate() {
                    force.column_mut(k).copy_from(&eval.f_p.column(c));
                }
                for r in 0..n_x {
                    force[(r, n_pf)] = eval.coupling[r] * eval.u_value;
                }
            }
            Map::Dense(_) => {
                let a_p = self.a_p.as_ref().unwrap();
                let a_theta = self.a_theta.as_ref().unwrap();
                for (k, &c) in free.iter().enumerate() {
                    for q in 0..n_r {
                        let w = a_p[(k, q)];
                        if w != 0.0 {
                            for r in 0..n_x {
                                force[(r, q)] += eval.f_p[(r, c)] * w;
                            }
                        }
                    }
                }
                if !eval.u_theta.is_empty() {
                    for q in 0..n_r {
                        let col = a_theta.column(q);
                        let s: f64 = eval.u_theta.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                        for r in 0..n_x {
                            force[(r, q)] += eval.coupling[r] * s;
                        }
                    }
                }
            }
        }
        force
    }

    /// Writes `ż` for the augmented state `z` under control `u`.
    pub fn eval(&self, z: &[f64], u: &[f64], dz: &mut [f64]) -> Result<()> {
        let n_x = self.model.n_x();
        let n_r = self.reduction.n_r();
        let x = &z[..n_x];
        let ev = self.model.rhs_eval(x, u, self.params)?;
        dz[..n_x].copy_from_slice(&ev.f);
        let force = self.forcing(&ev);
        let g = &z[n_x..];
        for r in 0..n_x {
            for q in 0..n_r {
                let mut acc = force[(r, q)];
                for s in 0..n_x {
                    acc += ev.f_x[(r, s)] * g[s * n_r + q];
                }
                dz[n_x + r * n_r + q] = acc;
            }
        }
        Ok(())
    }
}

/// Integrates states and reduced sensitivities over `grid`.
pub fn propagate(
    model: &UdeModel,
    params: &ParamVector,
    controls: &ControlDesign,
    grid: &TimeGrid,
    reduction: &ReductionMatrix,
    opts: &IntegratorOptions,
) -> Result<SensitivityTrajectory> {
    let sys = AugmentedSystem::new(model, params, reduction)?;
    let pieces = controls.per_interval(grid);
    let solution = integrate(|j, _t, z, dz| sys.eval(z, &pieces[j], dz), &sys.initial_state(), grid, opts)?;
    Ok(SensitivityTrajectory { n_x: model.n_x(), n_r: reduction.n_r(), labels: reduction.labels.clone(), solution })
}

/// States only.
pub fn simulate(
    model: &UdeModel,
    params: &ParamVector,
    controls: &ControlDesign,
    grid: &TimeGrid,
    opts: &IntegratorOptions,
) -> Result<DenseSolution> {
    model.check_params(params)?;
    let pieces = controls.per_interval(grid);
    integrate(|j, _t, x, dx| model.rhs(x, &pieces[j], params, dx), &model.x0, grid, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::{Activation, Ann, AnnArchitecture};
    use crate::models::{lotka, lotka_hybrid, lotka_mechanistic};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hybrid_setup() -> (UdeModel, ParamVector) {
        let model = lotka_hybrid(lotka::default_lotka_arch()).unwrap();
        let ann = Ann::glorot(lotka::default_lotka_arch(), &mut ChaCha8Rng::seed_from_u64(7));
        let params = ParamVector { p_hat: model.nominal_p.clone(), ann: Some(ann) };
        (model, params)
    }

    #[test]
    fn strategy_tokens_round_trip() {
        for s in ["c", "o", "l", "ll", "svd3", "psvd10", "tsvd2"] {
            assert_eq!(s.parse::<ReductionStrategy>().unwrap().to_string(), s);
        }
        assert!("svd".parse::<ReductionStrategy>().is_err());
        assert!("svd0".parse::<ReductionStrategy>().is_err());
        assert!("x".parse::<ReductionStrategy>().is_err());
    }

    #[test]
    fn augmented_dimensions() {
        let (model, params) = hybrid_setup();
        let c = ReductionMatrix::complete(&model);
        assert_eq!(AugmentedSystem::new(&model, &params, &c).unwrap().dim(), 304);
        let l = reduction_matrix(ReductionStrategy::Lump, &model, &params, None).unwrap();
        assert_eq!(AugmentedSystem::new(&model, &params, &l).unwrap().dim(), 4);
    }

    #[test]
    fn outer_forcing_is_signed_network_output() {
        let (model, params) = hybrid_setup();
        let o = reduction_matrix(ReductionStrategy::Outer, &model, &params, None).unwrap();
        let sys = AugmentedSystem::new(&model, &params, &o).unwrap();
        let x = [0.9, 1.4];
        let uval = model.ann_value(&x, &params).unwrap();
        let mut dz = [0.0; 4];
        sys.eval(&[x[0], x[1], 0.0, 0.0], &[0.0], &mut dz).unwrap();
        assert!((dz[2] + uval).abs() < 1e-15 && (dz[3] - uval).abs() < 1e-15);
    }

    #[test]
    fn lump_matrices() {
        let arch2 = AnnArchitecture::new(vec![2, 1, 1], vec![Activation::Tanh, Activation::Softplus]).unwrap();
        let model = lotka_hybrid(arch2.clone()).unwrap();
        let theta: Vec<f64> = (1..=arch2.param_count()).map(|v| v as f64).collect();
        let params = ParamVector { p_hat: model.nominal_p.clone(), ann: Some(Ann::new(arch2, theta.clone()).unwrap()) };
        let l = reduction_matrix(ReductionStrategy::Lump, &model, &params, None).unwrap().matrix().unwrap();
        let ll = reduction_matrix(ReductionStrategy::LumpLayerwise, &model, &params, None).unwrap().matrix().unwrap();
        assert_eq!(l.column(0).iter().copied().collect::<Vec<_>>(), theta);
        // layer 1 owns (w11, w12, b1), layer 2 owns (w, b)
        let expected = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 0.0, 4.0, 0.0, 5.0]);
        assert_eq!(ll, expected);
        let summed = &ll * DMatrix::from_element(2, 1, 1.0);
        assert_eq!(summed, l);
    }

    #[test]
    fn mechanistic_initial_sensitivities_are_zero_and_match_differences() {
        let model = lotka_mechanistic();
        let params = model.nominal_params(None);
        let grid = TimeGrid::uniform(0.0, 12.0, 48).unwrap();
        let controls = ControlDesign::constant(&model, TimeGrid::uniform(0.0, 12.0, 12).unwrap(), 0.3);
        let red = ReductionMatrix::complete(&model);
        let opts = IntegratorOptions::with_tol(1e-10);
        let traj = propagate(&model, &params, &controls, &grid, &red, &opts).unwrap();
        assert!(traj.g_at_node(0).iter().all(|&v| v == 0.0));
        let h = 1e-5;
        for (col, &pi) in model.free_params.iter().enumerate() {
            let mut pp = params.clone();
            let mut pm = params.clone();
            pp.p_hat[pi] += h;
            pm.p_hat[pi] -= h;
            let sp = simulate(&model, &pp, &controls, &grid, &opts).unwrap();
            let sm = simulate(&model, &pm, &controls, &grid, &opts).unwrap();
            for t in [3.0, 6.0, 9.0, 12.0] {
                let k = (t / 0.25) as usize;
                let g = traj.g_at_node(k);
                for s in 0..2 {
                    let fd = (sp.node_state(k)[s] - sm.node_state(k)[s]) / (2.0 * h);
                    let rel = (g[(s, col)] - fd).abs() / fd.abs().max(1e-8);
                    assert!(rel <= 1e-4, "t={t} state {s} col {col}: {} vs {fd}", g[(s, col)]);
                }
            }
        }
    }

    #[test]
    fn lumped_propagation_equals_complete_times_xi() {
        let (model, params) = hybrid_setup();
        let grid = TimeGrid::uniform(0.0, 12.0, 24).unwrap();
        let controls = ControlDesign::zero(&model, grid.clone());
        let opts = IntegratorOptions::with_tol(1e-10);
        let full = propagate(&model, &params, &controls, &grid, &ReductionMatrix::complete(&model), &opts).unwrap();
        let lump = reduction_matrix(ReductionStrategy::Lump, &model, &params, None).unwrap();
        let reduced = propagate(&model, &params, &controls, &grid, &lump, &opts).unwrap();
        let a = lump.matrix().unwrap();
        for k in 0..=24 {
            let diff = full.g_at_node(k) * &a - reduced.g_at_node(k);
            assert!(diff.amax() <= 1e-6, "node {k}: {}", diff.amax());
        }
    }
}
