//! Fisher information as a linear function of the sampling weights, and the
//! A/D/E design criteria with their exact gradients.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::UdeModel;
use crate::numerics::quadrature::{GL4_NODES, GL4_WEIGHTS};
use crate::numerics::{spd_inverse, sym_eig, Spectrum, SymMatrix, TimeGrid};
use crate::sensitivity::SensitivityTrajectory;

/// `atoms[i][j] = ∫_{interval j} (h^i_x G)ᵀ (h^i_x G) dt`.
#[derive(Debug, Clone)]
pub struct GramianAtoms {
    pub grid: TimeGrid,
    pub n_y: usize,
    pub n_r: usize,
    atoms: Vec<SymMatrix>,
}

impl GramianAtoms {
    pub fn n_intervals(&self) -> usize {
        self.grid.n_intervals()
    }

    pub fn get(&self, i: usize, j: usize) -> &SymMatrix {
        &self.atoms[i * self.n_intervals() + j]
    }

    /// Atoms built directly from matrices, mostly for tests and synthetic problems.
    pub fn from_parts(grid: TimeGrid, n_y: usize, atoms: Vec<SymMatrix>) -> Result<Self> {
        if atoms.len() != n_y * grid.n_intervals() || atoms.is_empty() {
            return Err(Error::Input("atom count must be n_y × N".into()));
        }
        let n_r = atoms[0].dim();
        if atoms.iter().any(|a| a.dim() != n_r) {
            return Err(Error::Input("atoms must share one dimension".into()));
        }
        Ok(GramianAtoms { grid, n_y, n_r, atoms })
    }

    /// Congruence `Aᵀ atom A` of every atom.
    pub fn transformed(&self, a: &DMatrix<f64>) -> GramianAtoms {
        GramianAtoms {
            grid: self.grid.clone(),
            n_y: self.n_y,
            n_r: a.ncols(),
            atoms: self.atoms.iter().map(|m| m.congruence(a)).collect(),
        }
    }

    pub fn ones(&self) -> DMatrix<f64> {
        DMatrix::from_element(self.n_y, self.n_intervals(), 1.0)
    }
}

/// Rows `h^i_x G` for every observable at augmented state `z`.
pub fn observed_sensitivity_rows(traj: &SensitivityTrajectory, model: &UdeModel, z: &[f64]) -> Result<DMatrix<f64>> {
    let (x, g) = traj.split(z);
    let obs = model.observe(&x)?;
    Ok(obs.h_x * g)
}

pub fn gramian_atoms(traj: &SensitivityTrajectory, model: &UdeModel) -> Result<GramianAtoms> {
    let grid = traj.grid().clone();
    let n_y = model.n_y();
    let n_r = traj.n_r;
    let n = grid.n_intervals();
    let sol = traj.solution();
    let mut atoms = vec![SymMatrix::zeros(n_r); n_y * n];
    let mut z = vec![0.0; sol.dim()];
    for j in 0..n {
        for seg in sol.segment_range(j) {
            let (t0, t1) = sol.segment_times(seg);
            let h = t1 - t0;
            for (s, w) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
                sol.eval_in_segment(seg, *s, &mut z);
                let rows = observed_sensitivity_rows(traj, model, &z)?;
                for i in 0..n_y {
                    let row: Vec<f64> = rows.row(i).iter().copied().collect();
                    atoms[i * n + j].rank_one_update(&row, w * h);
                }
            }
        }
    }
    Ok(GramianAtoms { grid, n_y, n_r, atoms })
}

#[derive(Debug, Clone)]
pub struct Fim {
    pub f: SymMatrix,
    pub w_used: DMatrix<f64>,
}

#[derive(Serialize)]
struct FimExport<'a> {
    matrix: Vec<Vec<f64>>,
    eigenvalues: &'a [f64],
    condition_number: f64,
}

impl Fim {
    pub fn spectrum(&self) -> Result<Spectrum> {
        sym_eig(&self.f)
    }

    /// Matrix entries, eigenvalues and condition number as JSON.
    pub fn to_json(&self) -> Result<String> {
        let spec = self.spectrum()?;
        let n = self.f.dim();
        let matrix = (0..n).map(|i| (0..n).map(|j| self.f.get(i, j)).collect()).collect();
        let eig: Vec<f64> = spec.eigenvalues.iter().copied().collect();
        let export = FimExport { matrix, eigenvalues: &eig, condition_number: spec.condition_number() };
        Ok(serde_json::to_string_pretty(&export)?)
    }
}

fn check_weights(atoms: &GramianAtoms, w: &DMatrix<f64>) -> Result<()> {
    if w.nrows() != atoms.n_y || w.ncols() != atoms.n_intervals() {
        return Err(Error::Input(format!(
            "sampling weights are {}×{}, atoms need {}×{}",
            w.nrows(),
            w.ncols(),
            atoms.n_y,
            atoms.n_intervals()
        )));
    }
    if w.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
        return Err(Error::Input("sampling weights must lie in [0, 1]".into()));
    }
    Ok(())
}

pub fn assemble_fim(atoms: &GramianAtoms, w: &DMatrix<f64>) -> Result<Fim> {
    check_weights(atoms, w)?;
    let mut f = SymMatrix::zeros(atoms.n_r);
    for i in 0..atoms.n_y {
        for j in 0..atoms.n_intervals() {
            let wij = w[(i, j)];
            if wij != 0.0 {
                f.add_scaled(atoms.get(i, j), wij);
            }
        }
    }
    Ok(Fim { f, w_used: w.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    A,
    D,
    E,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Criterion::A => "A",
            Criterion::D => "D",
            Criterion::E => "E",
        };
        f.write_str(s)
    }
}

impl FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Criterion::A),
            "D" | "d" => Ok(Criterion::D),
            "E" | "e" => Ok(Criterion::E),
            _ => Err(Error::Config(format!("unknown criterion '{s}'"))),
        }
    }
}

/// Criterion value from an already computed, positive definite spectrum.
pub fn criterion_from_spectrum(spec: &Spectrum, crit: Criterion, n_p: usize) -> Result<f64> {
    spec.ensure_positive_definite()?;
    let n = n_p as f64;
    Ok(match crit {
        Criterion::A => spec.eigenvalues.iter().map(|l| 1.0 / l).sum::<f64>() / n,
        Criterion::D => (-spec.log_det() / n).exp(),
        Criterion::E => 1.0 / spec.lambda_min(),
    })
}

/// `φ(F)` normalized by the effective dimension `n_p`.
pub fn criterion(f: &SymMatrix, crit: Criterion, n_p: usize) -> Result<f64> {
    criterion_from_spectrum(&sym_eig(f)?, crit, n_p)
}

/// Value, `∂φ/∂F` and a nonsmoothness flag (repeated smallest eigenvalue for φ_E).
pub fn criterion_with_matrix_gradient(f: &SymMatrix, crit: Criterion, n_p: usize) -> Result<(f64, DMatrix<f64>, bool)> {
    let spec = sym_eig(f)?;
    let phi = criterion_from_spectrum(&spec, crit, n_p)?;
    let n = n_p as f64;
    Ok(match crit {
        Criterion::A => (phi, spec.reconstruct_with(|l| -1.0 / (n * l * l)).into_matrix(), false),
        Criterion::D => (phi, spec.reconstruct_with(|l| -phi / (n * l)).into_matrix(), false),
        Criterion::E => {
            let k = spec.dim() - 1;
            let lmin = spec.eigenvalues[k];
            let v = spec.eigenvectors.column(k);
            let grad = -(&v * v.transpose()) / (lmin * lmin);
            let nonsmooth = spec.dim() > 1 && (spec.eigenvalues[k - 1] - lmin) <= 1e-8 * spec.lambda_max();
            (phi, grad, nonsmooth)
        }
    })
}

#[derive(Debug, Clone)]
pub struct CriterionGradient {
    pub phi: f64,
    /// `∂φ/∂w_{i,j}`, n_y × N
    pub grad: DMatrix<f64>,
    pub nonsmooth: bool,
}

pub fn criterion_gradient_w(atoms: &GramianAtoms, w: &DMatrix<f64>, crit: Criterion) -> Result<CriterionGradient> {
    let fim = assemble_fim(atoms, w)?;
    let (phi, dphi_df, nonsmooth) = criterion_with_matrix_gradient(&fim.f, crit, atoms.n_r)?;
    let dg = SymMatrix::from_symmetrized(&dphi_df)?;
    let grad = DMatrix::from_fn(atoms.n_y, atoms.n_intervals(), |i, j| dg.frobenius_dot(atoms.get(i, j)));
    Ok(CriterionGradient { phi, grad, nonsmooth })
}

/// Covariance `F⁻¹`.
pub fn covariance(fim: &Fim) -> Result<SymMatrix> {
    spd_inverse(&fim.f)
}
