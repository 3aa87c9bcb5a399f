//! Local and global information gain, the SVD-ladder scalings `γ` and the
//! rescaled curves `Γ`, and a first-order optimality report for sampling designs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::oed::OedSolution;
use super::sampling::BINARY_TOL;
use crate::error::{Error, Result};
use crate::fim::{criterion, observed_sensitivity_rows, Criterion};
use crate::models::UdeModel;
use crate::numerics::{spd_inverse, sym_eig, SymMatrix};
use crate::sensitivity::SensitivityTrajectory;

/// `P^i(t) = (h^i_x G)ᵀ (h^i_x G)` for every observable.
pub fn local_gain(traj: &SensitivityTrajectory, model: &UdeModel, t: f64) -> Result<Vec<SymMatrix>> {
    let z = traj.solution().eval_vec(t);
    let rows = observed_sensitivity_rows(traj, model, &z)?;
    Ok(gain_from_rows(&rows))
}

fn gain_from_rows(rows: &DMatrix<f64>) -> Vec<SymMatrix> {
    (0..rows.nrows())
        .map(|i| {
            let row: Vec<f64> = rows.row(i).iter().copied().collect();
            let mut p = SymMatrix::zeros(row.len());
            p.rank_one_update(&row, 1.0);
            p
        })
        .collect()
}

/// `Π = F⁻¹ P F⁻¹`
fn global_gain(f_inv: &SymMatrix, p: &SymMatrix) -> SymMatrix {
    let m = f_inv.matrix() * p.matrix() * f_inv.matrix();
    SymMatrix::from_symmetrized(&m).expect("square product")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoGainCurves {
    pub t: Vec<f64>,
    pub n_p: usize,
    /// `(1/n_p)·tr Π^i(t)`, indexed `[observable][node]`
    pub trace_pi: Vec<Vec<f64>>,
    /// `(φ_D/n_p)·Σ_kl F_kl Π^i_kl(t)`, the pointwise D-criterion gain
    pub d_gain: Vec<Vec<f64>>,
    pub gamma: Vec<GammaCurves>,
}

pub fn info_gain(traj: &SensitivityTrajectory, model: &UdeModel, fim: &SymMatrix, t_nodes: &[f64]) -> Result<InfoGainCurves> {
    let n_p = fim.dim();
    if traj.n_r != n_p {
        return Err(Error::Input("trajectory and FIM dimensions differ".into()));
    }
    let f_inv = spd_inverse(fim)?;
    let phi_d = criterion(fim, Criterion::D, n_p)?;
    let n_y = model.n_y();
    let mut trace_pi = vec![Vec::with_capacity(t_nodes.len()); n_y];
    let mut d_gain = vec![Vec::with_capacity(t_nodes.len()); n_y];
    for &t in t_nodes {
        for (i, p) in local_gain(traj, model, t)?.iter().enumerate() {
            let pi = global_gain(&f_inv, p);
            trace_pi[i].push(pi.trace() / n_p as f64);
            d_gain[i].push(phi_d * fim.frobenius_dot(&pi) / n_p as f64);
        }
    }
    Ok(InfoGainCurves { t: t_nodes.to_vec(), n_p, trace_pi, d_gain, gamma: Vec::new() })
}

fn check_ladder(lambda: &[f64], n_s: usize) -> Result<()> {
    let n_t = lambda.len();
    if n_s == 0 || n_s > n_t {
        return Err(Error::Input(format!("truncation {n_s} outside 1..={n_t}")));
    }
    let available = lambda.iter().take_while(|&&l| l > 0.0 && l.is_finite()).count();
    if available < n_t {
        return Err(Error::Rank { requested: n_t, available });
    }
    Ok(())
}

/// `γ_{n_s}` for eigenvalues `λ_1 ≥ … ≥ λ_{n_t}`.
pub fn gamma_scaling(lambda: &[f64], n_s: usize, crit: Criterion) -> Result<f64> {
    check_ladder(lambda, n_s)?;
    let n_t = lambda.len();
    match crit {
        Criterion::A => Ok(n_s as f64 / n_t as f64),
        Criterion::D => {
            let (a, b) = (1.0 / n_s as f64, 1.0 / n_t as f64);
            let log: f64 = lambda[..n_s].iter().map(|l| (a - b) * l.ln()).sum::<f64>()
                - lambda[n_s..].iter().map(|l| b * l.ln()).sum::<f64>();
            Ok(log.exp())
        }
        Criterion::E => Err(Error::Input("no SVD scaling is defined for the E-criterion".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCurves {
    pub n_s: usize,
    pub n_t: usize,
    pub crit: Criterion,
    pub gamma: f64,
    /// `[observable][node]`
    pub curves: Vec<Vec<f64>>,
}

/// Closed form `Γ_{n_s}` from the eigenvalues and `P` rotated into the eigenbasis
/// (`p_rot[node][observable]`, each `n_t × n_t`).
pub fn gamma_curves(lambda: &[f64], p_rot: &[Vec<SymMatrix>], n_s: usize, crit: Criterion) -> Result<GammaCurves> {
    let gamma = gamma_scaling(lambda, n_s, crit)?;
    let n_t = lambda.len();
    let n_y = p_rot.first().map_or(0, |p| p.len());
    let phi_nt = (-lambda.iter().map(|l| l.ln()).sum::<f64>() / n_t as f64).exp();
    let mut curves = vec![Vec::with_capacity(p_rot.len()); n_y];
    for node in p_rot {
        for (i, p) in node.iter().enumerate() {
            let v: f64 = match crit {
                Criterion::A => (0..n_s).map(|k| p.get(k, k) / (lambda[k] * lambda[k])).sum::<f64>() / n_t as f64,
                _ => phi_nt * (0..n_s).map(|k| p.get(k, k) / lambda[k]).sum::<f64>(),
            };
            curves[i].push(v);
        }
    }
    Ok(GammaCurves { n_s, n_t, crit, gamma, curves })
}

/// The predicted gap `Γ_{n_t} − Γ_{n_s}`.
pub fn gamma_gap(lambda: &[f64], p_rot: &[Vec<SymMatrix>], n_s: usize, crit: Criterion) -> Result<Vec<Vec<f64>>> {
    check_ladder(lambda, n_s)?;
    let n_t = lambda.len();
    let phi_nt = (-lambda.iter().map(|l| l.ln()).sum::<f64>() / n_t as f64).exp();
    let n_y = p_rot.first().map_or(0, |p| p.len());
    let mut out = vec![Vec::with_capacity(p_rot.len()); n_y];
    for node in p_rot {
        for (i, p) in node.iter().enumerate() {
            let v = match crit {
                Criterion::A => (n_s..n_t).map(|k| p.get(k, k) / (lambda[k] * lambda[k])).sum::<f64>() / n_t as f64,
                _ => phi_nt * (n_s..n_t).map(|k| p.get(k, k) / lambda[k]).sum::<f64>(),
            };
            out[i].push(v);
        }
    }
    Ok(out)
}

/// The eigenbasis of one FIM truncated at `n_t`, with `P` rotated at every node.
#[derive(Debug, Clone)]
pub struct SvdLadder {
    pub t: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `Vᵀ F V`, computed by congruence rather than assumed diagonal
    pub f_rot: SymMatrix,
    /// `[node][observable]`
    pub p_rot: Vec<Vec<SymMatrix>>,
}

impl SvdLadder {
    /// `traj` must carry complete sensitivities and `f_full` be the FIM over the same columns.
    pub fn build(traj: &SensitivityTrajectory, model: &UdeModel, f_full: &SymMatrix, t_nodes: &[f64], n_t: usize) -> Result<Self> {
        if traj.n_r != f_full.dim() {
            return Err(Error::Input("trajectory and FIM dimensions differ".into()));
        }
        let spec = sym_eig(f_full)?;
        let available = spec.positive_count();
        if n_t == 0 || n_t > available {
            return Err(Error::Rank { requested: n_t, available });
        }
        let v = spec.eigenvectors.columns(0, n_t).into_owned();
        let lambda: Vec<f64> = spec.eigenvalues.iter().take(n_t).copied().collect();
        let f_rot = f_full.congruence(&v);
        let mut p_rot = Vec::with_capacity(t_nodes.len());
        for &t in t_nodes {
            let z = traj.solution().eval_vec(t);
            let rows = observed_sensitivity_rows(traj, model, &z)? * &v;
            p_rot.push(gain_from_rows(&rows));
        }
        Ok(SvdLadder { t: t_nodes.to_vec(), lambda, f_rot, p_rot })
    }

    pub fn n_t(&self) -> usize {
        self.lambda.len()
    }

    pub fn gamma(&self, n_s: usize, crit: Criterion) -> Result<f64> {
        gamma_scaling(&self.lambda, n_s, crit)
    }

    pub fn closed_form(&self, n_s: usize, crit: Criterion) -> Result<GammaCurves> {
        gamma_curves(&self.lambda, &self.p_rot, n_s, crit)
    }

    pub fn predicted_gap(&self, n_s: usize, crit: Criterion) -> Result<Vec<Vec<f64>>> {
        gamma_gap(&self.lambda, &self.p_rot, n_s, crit)
    }

    /// `Γ_{n_s}` from its definition: the leading `n_s × n_s` block of the
    /// rotated FIM is inverted numerically and `Π` formed explicitly.
    pub fn by_definition(&self, n_s: usize, crit: Criterion) -> Result<GammaCurves> {
        let gamma = self.gamma(n_s, crit)?;
        let idx: Vec<usize> = (0..n_s).collect();
        let f_ns = self.f_rot.submatrix(&idx);
        let f_inv = spd_inverse(&f_ns)?;
        let phi_ns = criterion(&f_ns, Criterion::D, n_s)?;
        let n_y = self.p_rot.first().map_or(0, |p| p.len());
        let mut curves = vec![Vec::with_capacity(self.t.len()); n_y];
        for node in &self.p_rot {
            for (i, p) in node.iter().enumerate() {
                let pi = global_gain(&f_inv, &p.submatrix(&idx));
                let v = match crit {
                    Criterion::A => gamma / n_s as f64 * pi.trace(),
                    _ => gamma * phi_ns * f_ns.frobenius_dot(&pi),
                };
                curves[i].push(v);
            }
        }
        Ok(GammaCurves { n_s, n_t: self.n_t(), crit, gamma, curves })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KktRole {
    Active,
    Inactive,
    Fractional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktViolation {
    pub interval: usize,
    pub role: KktRole,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktObservable {
    pub mu: f64,
    pub tol: f64,
    pub active: usize,
    pub inactive: usize,
    pub fractional: usize,
    pub violations: Vec<KktViolation>,
    pub inconclusive: bool,
}

impl KktObservable {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub observables: Vec<KktObservable>,
}

impl KktReport {
    pub fn passed(&self) -> bool {
        self.observables.iter().all(|o| o.passed())
    }

    pub fn inconclusive(&self) -> bool {
        self.observables.iter().any(|o| o.inconclusive)
    }
}

/// Checks the sign conditions of stationarity on the interval-averaged gains:
/// sampled intervals gain at least `μ_i`, unsampled ones at most `μ_i`.
pub fn kkt_report(solution: &OedSolution) -> KktReport {
    let gains = solution.gains();
    let w = &solution.w_star.w;
    let observables = (0..w.nrows())
        .map(|i| {
            let mu = solution.mu_star[i];
            let tol = 1e-4 * mu.max(1.0);
            let mut o = KktObservable { mu, tol, active: 0, inactive: 0, fractional: 0, violations: Vec::new(), inconclusive: false };
            for j in 0..w.ncols() {
                let (wij, gain) = (w[(i, j)], gains[(i, j)]);
                let role = if wij >= 1.0 - BINARY_TOL {
                    o.active += 1;
                    KktRole::Active
                } else if wij <= BINARY_TOL {
                    o.inactive += 1;
                    KktRole::Inactive
                } else {
                    o.fractional += 1;
                    KktRole::Fractional
                };
                let ok = match role {
                    KktRole::Active => gain >= mu - tol,
                    KktRole::Inactive => gain <= mu + tol,
                    // no sign condition; equality holds only at exact convergence
                    KktRole::Fractional => true,
                };
                if !ok {
                    o.violations.push(KktViolation { interval: j, role, gain });
                }
            }
            o.inconclusive = o.fractional * 4 > w.ncols();
            o
        })
        .collect();
    KktReport { observables }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_p(n: usize) -> Vec<Vec<SymMatrix>> {
        vec![vec![SymMatrix::identity(n)]]
    }

    #[test]
    fn two_level_gaps() {
        let lambda = [2.0, 1.0];
        let p = unit_p(2);
        let gap_a = gamma_gap(&lambda, &p, 1, Criterion::A).unwrap()[0][0];
        assert!((gap_a - 0.5).abs() < 1e-15);
        let gap_d = gamma_gap(&lambda, &p, 1, Criterion::D).unwrap()[0][0];
        assert!((gap_d - 0.5f64.sqrt()).abs() < 1e-15);
        for crit in [Criterion::A, Criterion::D] {
            let g1 = gamma_curves(&lambda, &p, 1, crit).unwrap().curves[0][0];
            let g2 = gamma_curves(&lambda, &p, 2, crit).unwrap().curves[0][0];
            let predicted = if crit == Criterion::A { gap_a } else { gap_d };
            assert!((g2 - g1 - predicted).abs() < 1e-15);
        }
    }

    #[test]
    fn no_truncation_has_unit_scaling() {
        let lambda = [5.0, 2.0, 0.3];
        for crit in [Criterion::A, Criterion::D] {
            assert!((gamma_scaling(&lambda, 3, crit).unwrap() - 1.0).abs() < 1e-14);
        }
        // full ladder reproduces the unscaled gains of the diagonal FIM
        let f = SymMatrix::from_diagonal(&lambda);
        let p = SymMatrix::from_rows(&[&[1.0, 0.2, 0.0], &[0.2, 0.5, 0.1], &[0.0, 0.1, 2.0]]).unwrap();
        let ladder = SvdLadder { t: vec![0.0], lambda: lambda.to_vec(), f_rot: f.clone(), p_rot: vec![vec![p.clone()]] };
        let f_inv = spd_inverse(&f).unwrap();
        let pi = global_gain(&f_inv, &p);
        let a = ladder.by_definition(3, Criterion::A).unwrap().curves[0][0];
        assert!((a - pi.trace() / 3.0).abs() < 1e-14);
        let phi_d = criterion(&f, Criterion::D, 3).unwrap();
        let d = ladder.by_definition(3, Criterion::D).unwrap().curves[0][0];
        assert!((d - phi_d * f.frobenius_dot(&pi)).abs() < 1e-14);
    }

    #[test]
    fn definition_matches_closed_form() {
        let lambda = [9.0, 4.0, 1.5, 0.2];
        let f = SymMatrix::from_diagonal(&lambda);
        let p = SymMatrix::from_rows(&[
            &[1.0, 0.3, -0.2, 0.1],
            &[0.3, 2.0, 0.4, 0.0],
            &[-0.2, 0.4, 0.7, 0.2],
            &[0.1, 0.0, 0.2, 0.9],
        ])
        .unwrap();
        let ladder = SvdLadder { t: vec![0.0], lambda: lambda.to_vec(), f_rot: f, p_rot: vec![vec![p]] };
        for crit in [Criterion::A, Criterion::D] {
            let mut prev = f64::NEG_INFINITY;
            for n_s in 1..=4 {
                let a = ladder.by_definition(n_s, crit).unwrap().curves[0][0];
                let b = ladder.closed_form(n_s, crit).unwrap().curves[0][0];
                assert!((a - b).abs() <= 1e-13 * b.abs(), "{crit} {n_s}: {a} vs {b}");
                assert!(b >= prev);
                prev = b;
            }
        }
    }

    #[test]
    fn nonpositive_eigenvalue_is_rank_error() {
        assert!(matches!(gamma_scaling(&[1.0, 0.0], 1, Criterion::D), Err(Error::Rank { requested: 2, available: 1 })));
        assert!(gamma_scaling(&[1.0], 2, Criterion::A).is_err());
    }
}
