//! Lotka-Volterra with a fishing control, mechanistic and with the interaction
//! term `x1·x2` replaced by a network.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{Dynamics, MechEval, Observation, UdeModel};
use crate::ann::{Activation, AnnArchitecture};
use crate::error::{Error, Result};

const X0: [f64; 2] = [0.7, 0.5];
const HORIZON: (f64, f64) = (0.0, 12.0);
const BUDGET: f64 = 4.0;

fn identity_observation(x: &[f64]) -> Observation {
    Observation { y: x[..2].to_vec(), h_x: DMatrix::identity(2, 2) }
}

/// `p̂ = (p1, p2, p3, p4)`.
#[derive(Debug, Clone, Copy)]
pub struct LotkaMechanistic;

impl Dynamics for LotkaMechanistic {
    fn n_x(&self) -> usize {
        2
    }
    fn n_u(&self) -> usize {
        1
    }
    fn n_p(&self) -> usize {
        4
    }
    fn n_y(&self) -> usize {
        2
    }

    fn mechanistic(&self, x: &[f64], u: &[f64], p: &[f64]) -> Result<MechEval> {
        let (x1, x2, u) = (x[0], x[1], u[0]);
        let mut e = MechEval::zeros(2, 4);
        e.f[0] = x1 - p[0] * x1 * x2 - p[1] * u * x1;
        e.f[1] = -x2 + p[2] * x1 * x2 - p[3] * u * x2;
        e.f_x[(0, 0)] = 1.0 - p[0] * x2 - p[1] * u;
        e.f_x[(0, 1)] = -p[0] * x1;
        e.f_x[(1, 0)] = p[2] * x2;
        e.f_x[(1, 1)] = -1.0 + p[2] * x1 - p[3] * u;
        e.f_p[(0, 0)] = -x1 * x2;
        e.f_p[(0, 1)] = -u * x1;
        e.f_p[(1, 2)] = x1 * x2;
        e.f_p[(1, 3)] = -u * x2;
        Ok(e)
    }

    fn observe(&self, x: &[f64]) -> Result<Observation> {
        Ok(identity_observation(x))
    }
}

/// `p̂ = (p2, p4)`; the network replaces `x1·x2`.
#[derive(Debug, Clone, Copy)]
pub struct LotkaHybrid;

impl Dynamics for LotkaHybrid {
    fn n_x(&self) -> usize {
        2
    }
    fn n_u(&self) -> usize {
        1
    }
    fn n_p(&self) -> usize {
        2
    }
    fn n_y(&self) -> usize {
        2
    }

    fn mechanistic(&self, x: &[f64], u: &[f64], p: &[f64]) -> Result<MechEval> {
        let (x1, x2, u) = (x[0], x[1], u[0]);
        let mut e = MechEval::zeros(2, 2);
        e.f[0] = x1 - p[0] * u * x1;
        e.f[1] = -x2 - p[1] * u * x2;
        e.f_x[(0, 0)] = 1.0 - p[0] * u;
        e.f_x[(1, 1)] = -1.0 - p[1] * u;
        e.f_p[(0, 0)] = -u * x1;
        e.f_p[(1, 1)] = -u * x2;
        Ok(e)
    }

    fn ann_inputs(&self) -> Vec<usize> {
        vec![0, 1]
    }

    fn coupling(&self, _x: &[f64]) -> Result<Option<(Vec<f64>, DMatrix<f64>)>> {
        Ok(Some((vec![-1.0, 1.0], DMatrix::zeros(2, 2))))
    }

    fn observe(&self, x: &[f64]) -> Result<Observation> {
        Ok(identity_observation(x))
    }
}

/// Nominal `p̂ = (1, 0.4, 1, 0.2)`, designing for `(p1, p3)`.
pub fn lotka_mechanistic() -> UdeModel {
    UdeModel::assemble(
        "lotka-mech",
        Arc::new(LotkaMechanistic),
        None,
        &["x1", "x2"],
        &["p1", "p2", "p3", "p4"],
        &["x1", "x2"],
        vec![1.0, 0.4, 1.0, 0.2],
        vec![0, 2],
        X0.to_vec(),
        HORIZON,
        &["u"],
        vec![(0.0, 1.0)],
        vec![BUDGET, BUDGET],
    )
    .expect("built-in Lotka model is consistent")
}

/// Two hidden tanh layers of width 10 and a softplus output.
pub fn default_lotka_arch() -> AnnArchitecture {
    AnnArchitecture::with_hidden_tanh(vec![2, 10, 10, 1], Activation::Softplus).expect("valid default architecture")
}

/// Hybrid model with only the network weights free.
pub fn lotka_hybrid(arch: AnnArchitecture) -> Result<UdeModel> {
    if arch.input_dim() != 2 || arch.output_dim() != 1 {
        return Err(Error::Config(format!(
            "Lotka network must map 2 inputs to 1 output, got {:?}",
            arch.layer_dims()
        )));
    }
    UdeModel::assemble(
        "lotka-hybrid",
        Arc::new(LotkaHybrid),
        Some(arch),
        &["x1", "x2"],
        &["p2", "p4"],
        &["x1", "x2"],
        vec![0.4, 0.2],
        vec![],
        X0.to_vec(),
        HORIZON,
        &["u"],
        vec![(0.0, 1.0)],
        vec![BUDGET, BUDGET],
    )
}

/// Hybrid model estimating `p2` together with the weights.
pub fn lotka_hybrid_concurrent(arch: AnnArchitecture) -> Result<UdeModel> {
    lotka_hybrid(arch)?.with_free_params(vec![0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::Ann;
    use crate::models::testutil::{check_observation, check_partials};
    use crate::models::ParamVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14)
    }

    #[test]
    fn mechanistic_rhs_values() {
        let m = lotka_mechanistic();
        let p = m.nominal_params(None);
        let mut out = [0.0; 2];
        m.rhs(&[0.7, 0.5], &[0.0], &p, &mut out).unwrap();
        assert!(close(&out, &[0.35, -0.15]));
        m.rhs(&[0.0, 0.0], &[0.6], &p, &mut out).unwrap();
        assert!(close(&out, &[0.0, 0.0]));
        m.rhs(&[1.0, 1.0], &[1.0], &p, &mut out).unwrap();
        assert!(close(&out, &[-0.4, -0.2]));
    }

    #[test]
    fn mechanistic_parameter_partials() {
        let m = lotka_mechanistic();
        let e = m.rhs_eval(&[0.7, 0.5], &[0.0], &m.nominal_params(None)).unwrap();
        assert!((e.f_p[(0, 0)] + 0.35).abs() < 1e-15 && e.f_p[(1, 0)] == 0.0);
        assert!(e.f_p[(0, 2)] == 0.0 && (e.f_p[(1, 2)] - 0.35).abs() < 1e-15);
        check_partials(&m, &[0.9, 1.3], &[0.7], &m.nominal_params(None), 1e-6);
    }

    /// Output layer bias set so that U ≡ 0.35 everywhere.
    fn constant_net(value: f64) -> Ann {
        let arch = default_lotka_arch();
        let mut net = Ann::zeros(arch);
        let n = net.n_params();
        // softplus(b) = value
        net.theta_mut()[n - 1] = value.exp_m1().ln();
        net
    }

    #[test]
    fn hybrid_matches_mechanistic_when_network_equals_interaction() {
        let m = lotka_hybrid(default_lotka_arch()).unwrap();
        assert_eq!(m.n_theta(), 151);
        let p = ParamVector { p_hat: vec![0.4, 0.2], ann: Some(constant_net(0.35)) };
        let mut out = [0.0; 2];
        m.rhs(&[0.7, 0.5], &[0.0], &p, &mut out).unwrap();
        assert!((out[0] - 0.35).abs() < 1e-12 && (out[1] + 0.15).abs() < 1e-12);
        m.rhs(&[0.7, 0.5], &[1.0], &p, &mut out).unwrap();
        assert!((out[0] - 0.07).abs() < 1e-12 && (out[1] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn hybrid_theta_partials_have_opposite_signs() {
        let m = lotka_hybrid(default_lotka_arch()).unwrap();
        let net = Ann::glorot(default_lotka_arch(), &mut ChaCha8Rng::seed_from_u64(1));
        let p = ParamVector { p_hat: vec![0.4, 0.2], ann: Some(net) };
        let e = m.rhs_eval(&[0.7, 0.5], &[0.3], &p).unwrap();
        let ft = e.f_theta();
        for c in 0..ft.ncols() {
            assert_eq!(ft[(0, c)], -ft[(1, c)]);
        }
        check_partials(&m, &[0.7, 0.5], &[0.3], &p, 1e-5);
    }

    #[test]
    fn rejects_incompatible_architecture() {
        let arch = AnnArchitecture::with_hidden_tanh(vec![3, 4, 1], Activation::Softplus).unwrap();
        assert!(matches!(lotka_hybrid(arch), Err(Error::Config(_))));
    }

    #[test]
    fn identity_observations() {
        let m = lotka_mechanistic();
        let o = m.observe(&[0.7, 0.5]).unwrap();
        assert_eq!(o.y, vec![0.7, 0.5]);
        assert_eq!(o.h_x, DMatrix::identity(2, 2));
        check_observation(&m, &[0.7, 0.5], 1e-8);
    }
}
