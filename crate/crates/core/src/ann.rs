//! Feed-forward networks `x_j = s_j(W_j x_{j-1} + b_j)` with exact Jacobians.
//!
//! Parameters are stacked layer by layer; within a layer `W_j` comes first in
//! row-major order, followed by `b_j`.

use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Softplus,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            Activation::Identity => z,
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Softplus => {
                // logistic function, evaluated without overflow
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "softplus" => Ok(Activation::Softplus),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnArchitecture {
    layer_dims: Vec<usize>,
    activations: Vec<Activation>,
}

impl AnnArchitecture {
    pub fn new(layer_dims: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if layer_dims.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if activations.len() != layer_dims.len() - 1 {
            return Err(Error::Config(format!(
                "{} layers but {} activations",
                layer_dims.len() - 1,
                activations.len()
            )));
        }
        Ok(AnnArchitecture { layer_dims, activations })
    }

    /// `tanh` on every hidden layer and `output` on the last one.
    pub fn with_hidden_tanh(layer_dims: Vec<usize>, output: Activation) -> Result<Self> {
        let j = layer_dims.len().saturating_sub(1);
        let mut acts = vec![Activation::Tanh; j];
        if let Some(last) = acts.last_mut() {
            *last = output;
        }
        Self::new(layer_dims, acts)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn n_layers(&self) -> usize {
        self.activations.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    /// Slice of θ owned by each layer.
    pub fn layer_ranges(&self) -> Vec<Range<usize>> {
        let mut off = 0;
        self.layer_dims
            .windows(2)
            .map(|w| {
                let r = off..off + w[1] * (w[0] + 1);
                off = r.end;
                r
            })
            .collect()
    }
}

pub fn param_count(arch: &AnnArchitecture) -> usize {
    arch.param_count()
}

/// A network architecture together with its stacked parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Ann {
    arch: AnnArchitecture,
    theta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AnnFile {
    layer_dims: Vec<usize>,
    activations: Vec<Activation>,
    theta: Vec<f64>,
}

impl Ann {
    pub fn new(arch: AnnArchitecture, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != arch.param_count() {
            return Err(Error::Input(format!(
                "expected {} parameters, got {}",
                arch.param_count(),
                theta.len()
            )));
        }
        Ok(Ann { arch, theta })
    }

    pub fn zeros(arch: AnnArchitecture) -> Self {
        let n = arch.param_count();
        Ann { arch, theta: vec![0.0; n] }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(arch: AnnArchitecture, rng: &mut R) -> Self {
        let mut theta = Vec::with_capacity(arch.param_count());
        for w in arch.layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                theta.push(rng.random_range(-limit..limit));
            }
            theta.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ann { arch, theta }
    }

    pub fn arch(&self) -> &AnnArchitecture {
        &self.arch
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta.len() {
            return Err(Error::Input("parameter vector length mismatch".into()));
        }
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.input_dim() {
            return Err(Error::Input(format!(
                "network expects {} inputs, got {}",
                self.arch.input_dim(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Pre-activations and activations of every layer (index 0 of `acts` is the input).
    fn forward_cache(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut pre = Vec::with_capacity(self.arch.n_layers());
        let mut acts = Vec::with_capacity(self.arch.n_layers() + 1);
        acts.push(x.to_vec());
        let mut off = 0;
        for (l, w) in self.arch.layer_dims.windows(2).enumerate() {
            let (din, dout) = (w[0], w[1]);
            let weights = &self.theta[off..off + din * dout];
            let bias = &self.theta[off + din * dout..off + din * dout + dout];
            let prev = &acts[l];
            let z: Vec<f64> = (0..dout)
                .map(|r| bias[r] + weights[r * din..(r + 1) * din].iter().zip(prev).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let act = self.arch.activations[l];
            acts.push(z.iter().map(|&v| act.apply(v)).collect());
            pre.push(z);
            off += dout * (din + 1);
        }
        (pre, acts)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let (_, mut acts) = self.forward_cache(x);
        Ok(acts.pop().unwrap())
    }

    /// Output together with `dU/dx` (d_J × d_0) and `dU/dθ` (d_J × n_θ).
    pub fn forward_with_jacobians(&self, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
        self.check_input(x)?;
        let (pre, acts) = self.forward_cache(x);
        let dims = &self.arch.layer_dims;
        let n_layers = self.arch.n_layers();
        let ranges = self.arch.layer_ranges();
        let d_out = self.arch.output_dim();
        let slopes: Vec<Vec<f64>> = pre
            .iter()
            .zip(&self.arch.activations)
            .map(|(z, a)| z.iter().map(|&v| a.derivative(v)).collect())
            .collect();

        // forward accumulation for dU/dx
        let mut jx = DMatrix::<f64>::identity(dims[0], dims[0]);
        for l in 0..n_layers {
            let (din, dout) = (dims[l], dims[l + 1]);
            let off = ranges[l].start;
            let w = DMatrix::from_row_slice(dout, din, &self.theta[off..off + din * dout]);
            let mut next = w * jx;
            for r in 0..dout {
                let s = slopes[l][r];
                next.row_mut(r).scale_mut(s);
            }
            jx = next;
        }

        // reverse accumulation for dU/dθ, one sweep per output component
        let mut jt = DMatrix::<f64>::zeros(d_out, self.theta.len());
        for k in 0..d_out {
            let mut delta: Vec<f64> = (0..d_out).map(|r| if r == k { slopes[n_layers - 1][r] } else { 0.0 }).collect();
            for l in (0..n_layers).rev() {
                let (din, dout) = (dims[l], dims[l + 1]);
                let off = ranges[l].start;
                let prev = &acts[l];
                for r in 0..dout {
                    let dr = delta[r];
                    if dr != 0.0 {
                        for c in 0..din {
                            jt[(k, off + r * din + c)] = dr * prev[c];
                        }
                    }
                    jt[(k, off + din * dout + r)] = dr;
                }
                if l > 0 {
                    let w = &self.theta[off..off + din * dout];
                    delta = (0..din)
                        .map(|c| slopes[l - 1][c] * (0..dout).map(|r| w[r * din + c] * delta[r]).sum::<f64>())
                        .collect();
                }
            }
        }
        Ok((acts[n_layers].clone(), jx, jt))
    }

    pub fn jacobians(&self, x: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (_, jx, jt) = self.forward_with_jacobians(x)?;
        Ok((jx, jt))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = AnnFile {
            layer_dims: self.arch.layer_dims.clone(),
            activations: self.arch.activations.clone(),
            theta: self.theta.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: AnnFile = serde_json::from_str(s)?;
        let arch = AnnArchitecture::new(file.layer_dims, file.activations)?;
        Ann::new(arch, file.theta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(act: Activation, w: f64, b: f64) -> Ann {
        Ann::new(AnnArchitecture::new(vec![1, 1], vec![act]).unwrap(), vec![w, b]).unwrap()
    }

    #[test]
    fn parameter_counts() {
        let count = |dims: Vec<usize>| AnnArchitecture::with_hidden_tanh(dims, Activation::Identity).unwrap().param_count();
        assert_eq!(count(vec![1, 1]), 2);
        assert_eq!(count(vec![2, 10, 10, 1]), 151);
        assert_eq!(count(vec![2, 5, 5, 5, 1]), 81);
    }

    #[test]
    fn architecture_validation() {
        assert!(AnnArchitecture::new(vec![2], vec![]).is_err());
        assert!(AnnArchitecture::new(vec![2, 0, 1], vec![Activation::Tanh; 2]).is_err());
        assert!(AnnArchitecture::new(vec![2, 3, 1], vec![Activation::Tanh]).is_err());
    }

    #[test]
    fn single_layer_values() {
        assert_eq!(single(Activation::Identity, 2.0, 1.0).forward(&[3.0]).unwrap(), vec![7.0]);
        assert_eq!(single(Activation::Tanh, 0.0, 0.0).forward(&[5.0]).unwrap(), vec![0.0]);
        let sp = single(Activation::Softplus, 0.0, 0.0).forward(&[-2.0]).unwrap()[0];
        assert!((sp - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(single(Activation::Identity, 1.0, 0.0).forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn single_layer_jacobians() {
        let (jx, jt) = single(Activation::Identity, 2.0, 1.0).jacobians(&[3.0]).unwrap();
        assert_eq!(jx[(0, 0)], 2.0);
        assert_eq!((jt[(0, 0)], jt[(0, 1)]), (3.0, 1.0));
        let (jx, jt) = single(Activation::Tanh, 0.0, 0.0).jacobians(&[0.3]).unwrap();
        assert_eq!(jx[(0, 0)], 0.0);
        assert_eq!(jt[(0, 1)], 1.0);
    }

    #[test]
    fn softplus_is_overflow_safe_and_positive() {
        let a = Activation::Softplus;
        assert_eq!(a.apply(1000.0), 1000.0);
        assert!(a.apply(-800.0) >= 0.0);
        assert!(a.apply(-30.0) > 0.0);
        assert!((a.derivative(800.0) - 1.0).abs() < 1e-15);
        assert!(a.derivative(-800.0) >= 0.0);
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
    }

    #[test]
    fn jacobians_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dims in [vec![2, 10, 10, 1], vec![3, 4, 2], vec![2, 5, 5, 5, 1]] {
            let arch = AnnArchitecture::with_hidden_tanh(dims, Activation::Softplus).unwrap();
            let mut net = Ann::glorot(arch, &mut rng);
            for t in net.theta_mut() {
                *t += rng.random_range(-0.3..0.3);
            }
            let x: Vec<f64> = (0..net.arch().input_dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let (jx, jt) = net.jacobians(&x).unwrap();
            assert_eq!(jt.ncols(), net.n_params());
            let h = 1e-5;
            for c in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += h;
                xm[c] -= h;
                let fp = net.forward(&xp).unwrap();
                let fm = net.forward(&xm).unwrap();
                for r in 0..fp.len() {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    assert!(rel_err(jx[(r, c)], fd) <= 1e-5, "dU/dx[{r},{c}]");
                }
            }
            for c in 0..net.n_params() {
                let base = net.theta()[c];
                net.theta_mut()[c] = base + h;
                let fp = net.forward(&x).unwrap();
                net.theta_mut()[c] = base - h;
                let fm = net.forward(&x).unwrap();
                net.theta_mut()[c] = base;
                for r in 0..fp.len() {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    assert!(rel_err(jt[(r, c)], fd) <= 1e-5, "dU/dθ[{r},{c}]");
                }
            }
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let arch = AnnArchitecture::with_hidden_tanh(vec![2, 10, 10, 1], Activation::Softplus).unwrap();
        let net = Ann::glorot(arch, &mut rng);
        let back = Ann::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn glorot_is_seeded_and_bounded() {
        let arch = AnnArchitecture::with_hidden_tanh(vec![2, 10, 10, 1], Activation::Softplus).unwrap();
        let a = Ann::glorot(arch.clone(), &mut ChaCha8Rng::seed_from_u64(5));
        let b = Ann::glorot(arch.clone(), &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        let r = &arch.layer_ranges()[0];
        let limit = (6.0f64 / 12.0).sqrt();
        assert!(a.theta()[r.start..r.start + 20].iter().all(|v| v.abs() < limit));
        assert!(a.theta()[r.start + 20..r.end].iter().all(|&v| v == 0.0));
    }
}
