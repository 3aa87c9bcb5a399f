//! Semi-batch urethane reaction `A + B → C`, `A + C ⇌ D`, `3A → E` in solvent L.
//!
//! States are `(n_C, n_D, n_E, n_A, n_B, n_L, T)`; the feeds `u1` (A) and `u2`
//! (B) are controls and the temperature follows a fixed linear ramp. In the
//! hybrid model the isocyanurate rate `r4` is replaced by a network of the six
//! mole numbers. Mechanistic parameters are `p̂ = (k_ref1, E_a1)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Dynamics, MechEval, Observation, UdeModel};
use crate::ann::{Activation, AnnArchitecture};
use crate::error::{Error, Result};

pub const N_A0: f64 = 0.1;
pub const N_B0: f64 = 0.05;
pub const N_L0: f64 = 0.0;
pub const T0: f64 = 300.0;
/// Temperature ramp in K/h, reaching 400 K at 80 h.
pub const RAMP: f64 = 1.25;
pub const HORIZON: (f64, f64) = (0.0, 80.0);

const C: usize = 0;
const D: usize = 1;
const E: usize = 2;
const A: usize = 3;
const B: usize = 4;
const L: usize = 5;
const TEMP: usize = 6;

/// Physical constants. Molar masses in g/mol, densities in g/L, rate
/// constants per hour in concentration units of mol/L, energies in J/mol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UrethaneConstants {
    pub molar_mass_a: f64,
    pub molar_mass_b: f64,
    pub molar_mass_c: f64,
    pub molar_mass_d: f64,
    pub molar_mass_e: f64,
    pub molar_mass_l: f64,
    pub density_a: f64,
    pub density_b: f64,
    pub density_c: f64,
    pub density_d: f64,
    pub density_e: f64,
    pub density_l: f64,
    pub k_ref1: f64,
    pub k_ref2: f64,
    pub k_ref4: f64,
    pub e_a1: f64,
    pub e_a2: f64,
    pub e_a4: f64,
    pub k_c2: f64,
    pub delta_h2: f64,
    pub t_ref: f64,
    pub gas_constant: f64,
}

impl Default for UrethaneConstants {
    /// Placeholder values: plausible magnitudes with stoichiometrically
    /// consistent molar masses, not fitted to any experiment.
    fn default() -> Self {
        UrethaneConstants {
            molar_mass_a: 119.12,
            molar_mass_b: 74.12,
            molar_mass_c: 193.24,
            molar_mass_d: 312.36,
            molar_mass_e: 357.36,
            molar_mass_l: 78.13,
            density_a: 1096.0,
            density_b: 810.0,
            density_c: 1070.0,
            density_d: 1100.0,
            density_e: 1100.0,
            density_l: 1100.0,
            k_ref1: 0.01,
            k_ref2: 0.002,
            k_ref4: 0.0002,
            e_a1: 30_000.0,
            e_a2: 40_000.0,
            e_a4: 50_000.0,
            k_c2: 0.5,
            delta_h2: -20_000.0,
            t_ref: 350.0,
            gas_constant: 8.314,
        }
    }
}

impl UrethaneConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("molar_mass_a", self.molar_mass_a),
            ("molar_mass_b", self.molar_mass_b),
            ("molar_mass_c", self.molar_mass_c),
            ("molar_mass_d", self.molar_mass_d),
            ("molar_mass_e", self.molar_mass_e),
            ("molar_mass_l", self.molar_mass_l),
            ("density_a", self.density_a),
            ("density_b", self.density_b),
            ("density_c", self.density_c),
            ("density_d", self.density_d),
            ("density_e", self.density_e),
            ("density_l", self.density_l),
            ("k_ref1", self.k_ref1),
            ("k_ref2", self.k_ref2),
            ("k_ref4", self.k_ref4),
            ("e_a1", self.e_a1),
            ("e_a2", self.e_a2),
            ("e_a4", self.e_a4),
            ("k_c2", self.k_c2),
            ("t_ref", self.t_ref),
            ("gas_constant", self.gas_constant),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("urethane constant {name} must be positive, got {v}")));
            }
        }
        if !self.delta_h2.is_finite() {
            return Err(Error::Config("urethane constant delta_h2 must be finite".into()));
        }
        Ok(())
    }

    /// Molar masses in state order C, D, E, A, B, L.
    fn molar_masses(&self) -> [f64; 6] {
        [self.molar_mass_c, self.molar_mass_d, self.molar_mass_e, self.molar_mass_a, self.molar_mass_b, self.molar_mass_l]
    }

    /// Partial molar volumes `M_i/ρ_i` in state order.
    fn molar_volumes(&self) -> [f64; 6] {
        let m = self.molar_masses();
        let rho = [self.density_c, self.density_d, self.density_e, self.density_a, self.density_b, self.density_l];
        std::array::from_fn(|i| m[i] / rho[i])
    }
}

#[derive(Debug, Clone)]
pub struct Urethane {
    k: UrethaneConstants,
    /// Ground truth includes `r4 = k4 (n_A/V)²`; the hybrid leaves it to the network.
    with_r4: bool,
}

// reaction-to-state stoichiometry, columns r1..r4
const STOICH: [[f64; 4]; 6] = [
    [1.0, -1.0, 1.0, 0.0],
    [0.0, 1.0, -1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [-1.0, -1.0, 1.0, -3.0],
    [-1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0],
];

impl Urethane {
    fn volume(&self, x: &[f64]) -> Result<f64> {
        let v: f64 = self.k.molar_volumes().iter().zip(x).map(|(a, b)| a * b).sum();
        if !(v > 0.0) {
            return Err(Error::Domain(format!("reaction volume {v} is not positive")));
        }
        Ok(v)
    }

    fn arrhenius(&self, k_ref: f64, e_a: f64, t: f64) -> f64 {
        k_ref * (-e_a / self.k.gas_constant * (1.0 / t - 1.0 / self.k.t_ref)).exp()
    }
}

impl Dynamics for Urethane {
    fn n_x(&self) -> usize {
        7
    }
    fn n_u(&self) -> usize {
        2
    }
    fn n_p(&self) -> usize {
        2
    }
    fn n_y(&self) -> usize {
        3
    }

    fn mechanistic(&self, x: &[f64], u: &[f64], p: &[f64]) -> Result<MechEval> {
        let k = &self.k;
        let vol = self.volume(x)?;
        let vm = k.molar_volumes();
        let t = x[TEMP];
        if !(t > 0.0) {
            return Err(Error::Domain(format!("temperature {t} is not positive")));
        }
        let (k_ref1, e_a1) = (p[0], p[1]);
        let rt2 = k.gas_constant * t * t;
        let k1 = self.arrhenius(k_ref1, e_a1, t);
        let k2 = self.arrhenius(k.k_ref2, k.e_a2, t);
        let kc = self.arrhenius(k.k_c2, k.delta_h2, t);
        let k3 = k2 / kc;
        let k4 = self.arrhenius(k.k_ref4, k.e_a4, t);

        // q_j = V·r_j with gradients over the six mole numbers and T
        let mut q = [0.0; 4];
        let mut dq = [[0.0; 7]; 4];
        q[0] = k1 * x[A] * x[B] / vol;
        q[1] = k2 * x[A] * x[C] / vol;
        q[2] = k3 * x[D];
        q[3] = if self.with_r4 { k4 * x[A] * x[A] / vol } else { 0.0 };
        for s in 0..6 {
            dq[0][s] = -q[0] * vm[s] / vol;
            dq[1][s] = -q[1] * vm[s] / vol;
            dq[3][s] = -q[3] * vm[s] / vol;
        }
        dq[0][A] += k1 * x[B] / vol;
        dq[0][B] += k1 * x[A] / vol;
        dq[1][A] += k2 * x[C] / vol;
        dq[1][C] += k2 * x[A] / vol;
        dq[2][D] = k3;
        if self.with_r4 {
            dq[3][A] += 2.0 * k4 * x[A] / vol;
        }
        dq[0][TEMP] = q[0] * e_a1 / rt2;
        dq[1][TEMP] = q[1] * k.e_a2 / rt2;
        dq[2][TEMP] = q[2] * (k.e_a2 - k.delta_h2) / rt2;
        dq[3][TEMP] = q[3] * k.e_a4 / rt2;
        let dq1_dp = [q[0] / k_ref1, -q[0] * (1.0 / t - 1.0 / k.t_ref) / k.gas_constant];

        let mut e = MechEval::zeros(7, 2);
        for (r, row) in STOICH.iter().enumerate() {
            for j in 0..4 {
                if row[j] == 0.0 {
                    continue;
                }
                e.f[r] += row[j] * q[j];
                for s in 0..7 {
                    e.f_x[(r, s)] += row[j] * dq[j][s];
                }
            }
            for m in 0..2 {
                e.f_p[(r, m)] = row[0] * dq1_dp[m];
            }
        }
        e.f[A] += u[0];
        e.f[B] += u[1];
        e.f[L] = u[0] + u[1];
        e.f[TEMP] = RAMP;
        Ok(e)
    }

    fn ann_inputs(&self) -> Vec<usize> {
        if self.with_r4 {
            Vec::new()
        } else {
            (0..6).collect()
        }
    }

    fn coupling(&self, x: &[f64]) -> Result<Option<(Vec<f64>, DMatrix<f64>)>> {
        if self.with_r4 {
            return Ok(None);
        }
        let vol = self.volume(x)?;
        let vm = self.k.molar_volumes();
        let mut c = vec![0.0; 7];
        let mut dc = DMatrix::zeros(7, 7);
        for r in 0..6 {
            let b = STOICH[r][3];
            c[r] = b * vol;
            for s in 0..6 {
                dc[(r, s)] = b * vm[s];
            }
        }
        Ok(Some((c, dc)))
    }

    fn observe(&self, x: &[f64]) -> Result<Observation> {
        let mm = self.k.molar_masses();
        let total: f64 = mm.iter().zip(x).map(|(a, b)| a * b).sum();
        if !(total > 0.0) {
            return Err(Error::Domain(format!("total mass {total} is not positive")));
        }
        let species = [A, C, E];
        let mut y = vec![0.0; 3];
        let mut h_x = DMatrix::zeros(3, 7);
        for (i, &s) in species.iter().enumerate() {
            y[i] = 100.0 * x[s] * mm[s] / total;
            for k in 0..6 {
                h_x[(i, k)] = -y[i] * mm[k] / total;
            }
            h_x[(i, s)] += 100.0 * mm[s] / total;
        }
        Ok(Observation { y, h_x })
    }
}

fn build(name: &str, constants: UrethaneConstants, arch: Option<AnnArchitecture>) -> Result<UdeModel> {
    constants.validate()?;
    let nominal = vec![constants.k_ref1, constants.e_a1];
    let with_r4 = arch.is_none();
    UdeModel::assemble(
        name,
        Arc::new(Urethane { k: constants, with_r4 }),
        arch,
        &["nC", "nD", "nE", "nA", "nB", "nL", "T"],
        &["k_ref1", "E_a1"],
        &["wA", "wC", "wE"],
        nominal,
        vec![0, 1],
        vec![0.0, 0.0, 0.0, N_A0, N_B0, N_L0, T0],
        HORIZON,
        &["u1", "u2"],
        vec![(0.0, 0.01), (0.0, 0.01)],
        vec![4.0, 4.0, 4.0],
    )
}

/// The ground-truth isocyanurate rate `r4 = k4(T)·(n_A/V)²` the hybrid network stands in for.
pub fn isocyanurate_rate(constants: &UrethaneConstants, x: &[f64]) -> Result<f64> {
    let model = Urethane { k: constants.clone(), with_r4: true };
    let vol = model.volume(x)?;
    let k4 = model.arrhenius(constants.k_ref4, constants.e_a4, x[TEMP]);
    Ok(k4 * (x[A] / vol).powi(2))
}

/// Ground-truth model with the known isocyanurate rate.
pub fn urethane_mechanistic(constants: UrethaneConstants) -> Result<UdeModel> {
    build("urethane-mech", constants, None)
}

pub fn default_urethane_arch() -> AnnArchitecture {
    AnnArchitecture::with_hidden_tanh(vec![6, 10, 10, 1], Activation::Softplus).expect("valid default architecture")
}

pub fn urethane_hybrid(constants: UrethaneConstants, arch: AnnArchitecture) -> Result<UdeModel> {
    if arch.input_dim() != 6 || arch.output_dim() != 1 {
        return Err(Error::Config(format!(
            "urethane network must map 6 mole numbers to 1 rate, got {:?}",
            arch.layer_dims()
        )));
    }
    build("urethane", constants, Some(arch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::Ann;
    use crate::models::testutil::{check_observation, check_partials};
    use crate::models::ParamVector;
    use crate::numerics::{integrate, IntegratorOptions, TimeGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mid_state() -> Vec<f64> {
        vec![0.02, 0.01, 0.004, 0.05, 0.02, 0.03, 340.0]
    }

    #[test]
    fn initial_observations() {
        let m = urethane_mechanistic(UrethaneConstants::default()).unwrap();
        let o = m.observe(&m.x0).unwrap();
        assert!(o.y.iter().sum::<f64>() <= 100.0);
        assert_eq!((o.y[1], o.y[2]), (0.0, 0.0));
        let only_a = [0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 300.0];
        let o = m.observe(&only_a).unwrap();
        assert!((o.y[0] - 100.0).abs() < 1e-12);
        assert!(matches!(m.observe(&[0.0; 7]), Err(Error::Domain(_))));
    }

    #[test]
    fn observation_jacobian_matches_differences() {
        let m = urethane_mechanistic(UrethaneConstants::default()).unwrap();
        check_observation(&m, &mid_state(), 1e-6);
    }

    #[test]
    fn partials_match_differences() {
        let m = urethane_mechanistic(UrethaneConstants::default()).unwrap();
        check_partials(&m, &mid_state(), &[0.004, 0.007], &m.nominal_params(None), 1e-5);
        let arch = default_urethane_arch();
        let h = urethane_hybrid(UrethaneConstants::default(), arch.clone()).unwrap();
        let mut net = Ann::glorot(arch, &mut ChaCha8Rng::seed_from_u64(2));
        for t in net.theta_mut() {
            *t *= 3.0;
        }
        let p = ParamVector { p_hat: h.nominal_p.clone(), ann: Some(net) };
        check_partials(&h, &mid_state(), &[0.004, 0.007], &p, 1e-5);
    }

    #[test]
    fn nonpositive_volume_is_a_domain_error() {
        let m = urethane_mechanistic(UrethaneConstants::default()).unwrap();
        let mut out = [0.0; 7];
        let r = m.rhs(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 300.0], &[0.0, 0.0], &m.nominal_params(None), &mut out);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn zero_network_leaves_isocyanurate_constant() {
        let arch = AnnArchitecture::new(vec![6, 1], vec![Activation::Identity]).unwrap();
        let m = urethane_hybrid(UrethaneConstants::default(), arch.clone()).unwrap();
        let p = ParamVector { p_hat: m.nominal_p.clone(), ann: Some(Ann::zeros(arch)) };
        let grid = TimeGrid::uniform(0.0, 80.0, 8).unwrap();
        let sol = integrate(
            |_, _, x, dx| m.rhs(x, &[0.005, 0.002], &p, dx),
            &m.x0,
            &grid,
            &IntegratorOptions::default(),
        )
        .unwrap();
        for k in 0..=8 {
            assert_eq!(sol.node_state(k)[E], 0.0);
        }
    }

    #[test]
    fn temperature_ramp_and_mass_balance() {
        let m = urethane_mechanistic(UrethaneConstants::default()).unwrap();
        let p = m.nominal_params(None);
        let grid = TimeGrid::uniform(0.0, 80.0, 80).unwrap();
        let sol = integrate(|_, _, x, dx| m.rhs(x, &[0.0, 0.0], &p, dx), &m.x0, &grid, &IntegratorOptions::default())
            .unwrap();
        assert!((sol.node_state(0)[TEMP] - 300.0).abs() < 1e-12);
        assert!((sol.final_state()[TEMP] - 400.0).abs() < 1e-9);
        let mm = UrethaneConstants::default().molar_masses();
        let mass = |x: &[f64]| -> f64 { mm.iter().zip(x).map(|(a, b)| a * b).sum() };
        let m0 = mass(sol.node_state(0));
        for k in 0..=80 {
            assert!((mass(sol.node_state(k)) - m0).abs() <= 1e-8 * m0);
        }
        // the reaction actually proceeds
        assert!(sol.final_state()[C] > 1e-3 && sol.final_state()[E] > 0.0);
    }
}
