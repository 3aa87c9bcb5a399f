//! Adaptive Dormand-Prince 5(4) integration on a time grid.
//!
//! The integrator always lands exactly on every grid node and re-evaluates the
//! vector field at the start of each grid interval, so right-hand sides may be
//! discontinuous across nodes (piecewise constant controls). Between accepted
//! steps the solution is represented by cubic Hermite interpolation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing time nodes `t_0 < t_1 < ... < t_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Input("time grid needs at least two nodes".into()));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::Input("time grid nodes must be finite".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Input("time grid nodes must be strictly increasing".into()));
        }
        Ok(TimeGrid { nodes })
    }

    pub fn uniform(t_start: f64, t_end: f64, intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::Input("time grid needs at least one interval".into()));
        }
        let h = (t_end - t_start) / intervals as f64;
        let mut nodes: Vec<f64> = (0..=intervals).map(|k| t_start + h * k as f64).collect();
        nodes[intervals] = t_end;
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn dt(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    pub fn dts(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        0.5 * (self.nodes[j] + self.nodes[j + 1])
    }

    /// Index of the interval containing `t` (right-continuous, last interval closed).
    pub fn interval_of(&self, t: f64) -> usize {
        let n = self.n_intervals();
        match self.nodes.partition_point(|&x| x <= t) {
            0 => 0,
            k if k > n => n - 1,
            k => k - 1,
        }
    }

    /// Union of this grid's nodes with extra interior points (duplicates merged).
    pub fn refined_with(&self, extra: &[f64]) -> Result<TimeGrid> {
        let mut all: Vec<f64> = self.nodes.clone();
        all.extend(extra.iter().copied().filter(|&t| t > self.start() && t < self.end()));
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = (self.end() - self.start()).abs().max(1.0);
        all.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * scale);
        TimeGrid::new(all)
    }

    /// Uniform subdivision of every interval into `k` pieces.
    pub fn subdivided(&self, k: usize) -> Result<TimeGrid> {
        let mut nodes = Vec::with_capacity(self.n_intervals() * k + 1);
        for j in 0..self.n_intervals() {
            let h = self.dt(j) / k as f64;
            for s in 0..k {
                nodes.push(self.nodes[j] + h * s as f64);
            }
        }
        nodes.push(self.end());
        TimeGrid::new(nodes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        IntegratorOptions { rtol: tol, atol: tol, h_max: None, max_steps: 1_000_000 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol <= 1e-2) {
            return Err(Error::Input(format!("relative tolerance {} outside (0, 1e-2]", self.rtol)));
        }
        if !(self.atol > 0.0) {
            return Err(Error::Input("absolute tolerance must be positive".into()));
        }
        Ok(())
    }
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self::with_tol(1e-8)
    }
}

/// Piecewise cubic Hermite representation of an ODE solution.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    grid: TimeGrid,
    /// (t0, t1) per accepted step
    seg_times: Vec<(f64, f64)>,
    /// y0, y1, f0, f1 per step, each of length `dim`
    seg_data: Vec<f64>,
    /// `interval_segments[j]..interval_segments[j+1]` are the steps inside grid interval j
    interval_segments: Vec<usize>,
    node_states: Vec<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evals: usize,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_segments(&self) -> usize {
        self.seg_times.len()
    }

    pub fn segment_range(&self, interval: usize) -> std::ops::Range<usize> {
        self.interval_segments[interval]..self.interval_segments[interval + 1]
    }

    pub fn segment_times(&self, seg: usize) -> (f64, f64) {
        self.seg_times[seg]
    }

    /// State at grid node `k`.
    pub fn node_state(&self, k: usize) -> &[f64] {
        &self.node_states[k * self.dim..(k + 1) * self.dim]
    }

    /// States at all grid nodes, one row per node.
    pub fn node_matrix(&self) -> DMatrix<f64> {
        let n = self.grid.nodes().len();
        DMatrix::from_fn(n, self.dim, |r, c| self.node_states[r * self.dim + c])
    }

    pub fn final_state(&self) -> &[f64] {
        self.node_state(self.grid.n_intervals())
    }

    /// Hermite interpolation inside one accepted step, `s` in [0, 1].
    pub fn eval_in_segment(&self, seg: usize, s: f64, out: &mut [f64]) {
        let d = self.dim;
        let (t0, t1) = self.seg_times[seg];
        let h = t1 - t0;
        let base = seg * 4 * d;
        let y0 = &self.seg_data[base..base + d];
        let y1 = &self.seg_data[base + d..base + 2 * d];
        let f0 = &self.seg_data[base + 2 * d..base + 3 * d];
        let f1 = &self.seg_data[base + 3 * d..base + 4 * d];
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = (s3 - 2.0 * s2 + s) * h;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = (s3 - s2) * h;
        for i in 0..d {
            out[i] = h00 * y0[i] + h10 * f0[i] + h01 * y1[i] + h11 * f1[i];
        }
    }

    /// Dense evaluation at any `t` inside the grid span.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let j = self.grid.interval_of(t);
        let range = self.segment_range(j);
        let segs = &self.seg_times[range.clone()];
        let local = segs.partition_point(|&(_, t1)| t1 < t).min(segs.len() - 1);
        let seg = range.start + local;
        let (t0, t1) = self.seg_times[seg];
        let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        self.eval_in_segment(seg, s, out);
    }

    pub fn eval_vec(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval(t, &mut out);
        out
    }
}

// Dormand-Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl Stages {
    fn new(d: usize) -> Self {
        Stages {
            k: std::array::from_fn(|_| vec![0.0; d]),
            tmp: vec![0.0; d],
            y_new: vec![0.0; d],
        }
    }
}

/// One DP5 step from (t, y) with k[0] = f(t, y) already filled. Leaves the
/// 5th-order solution in `st.y_new` and f(t+h, y_new) in `st.k[6]`.
fn dp5_step<F>(rhs: &mut F, interval: usize, t: f64, h: f64, y: &[f64], st: &mut Stages) -> Result<()>
where
    F: FnMut(usize, f64, &[f64], &mut [f64]) -> Result<()>,
{
    let d = y.len();
    macro_rules! stage {
        ($idx:expr, $c:expr, [$($kk:expr => $a:expr),*]) => {{
            for i in 0..d {
                st.tmp[i] = y[i] + h * (0.0 $(+ $a * st.k[$kk][i])*);
            }
            let (head, tail) = st.k.split_at_mut($idx);
            let _ = head;
            rhs(interval, t + $c * h, &st.tmp, &mut tail[0])?;
        }};
    }
    stage!(1, C2, [0 => A21]);
    stage!(2, C3, [0 => A31, 1 => A32]);
    stage!(3, C4, [0 => A41, 1 => A42, 2 => A43]);
    stage!(4, C5, [0 => A51, 1 => A52, 2 => A53, 3 => A54]);
    stage!(5, 1.0, [0 => A61, 1 => A62, 2 => A63, 3 => A64, 4 => A65]);
    for i in 0..d {
        st.y_new[i] = y[i]
            + h * (B1 * st.k[0][i] + B3 * st.k[2][i] + B4 * st.k[3][i] + B5 * st.k[4][i] + B6 * st.k[5][i]);
    }
    let (head, tail) = st.k.split_at_mut(6);
    let _ = head;
    rhs(interval, t + h, &st.y_new, &mut tail[0])?;
    Ok(())
}

fn error_norm(y: &[f64], st: &Stages, h: f64, opts: &IntegratorOptions) -> f64 {
    let d = y.len();
    let mut acc = 0.0;
    for i in 0..d {
        let e = h
            * (E1 * st.k[0][i] + E3 * st.k[2][i] + E4 * st.k[3][i] + E5 * st.k[4][i] + E6 * st.k[5][i]
                + E7 * st.k[6][i]);
        let sc = opts.atol + opts.rtol * y[i].abs().max(st.y_new[i].abs());
        acc += (e / sc) * (e / sc);
    }
    (acc / d.max(1) as f64).sqrt()
}

struct Recorder {
    dim: usize,
    seg_times: Vec<(f64, f64)>,
    seg_data: Vec<f64>,
    interval_segments: Vec<usize>,
    node_states: Vec<f64>,
}

impl Recorder {
    fn push(&mut self, t0: f64, t1: f64, y0: &[f64], y1: &[f64], f0: &[f64], f1: &[f64]) {
        self.seg_times.push((t0, t1));
        self.seg_data.extend_from_slice(y0);
        self.seg_data.extend_from_slice(y1);
        self.seg_data.extend_from_slice(f0);
        self.seg_data.extend_from_slice(f1);
    }
}

fn initial_step<F>(rhs: &mut F, t: f64, y: &[f64], f0: &[f64], span: f64, opts: &IntegratorOptions) -> Result<f64>
where
    F: FnMut(usize, f64, &[f64], &mut [f64]) -> Result<()>,
{
    let d = y.len();
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let norm = |v: &[f64]| -> f64 {
        (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / d.max(1) as f64).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; d];
    rhs(0, t + h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| (a - b) / h0).collect();
    let d2 = norm(&diff);
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Integrates `y' = rhs(interval, t, y)` across every interval of `grid`.
///
/// `rhs` receives the index of the grid interval being integrated, which lets
/// callers select piecewise constant inputs without ambiguity at nodes.
pub fn integrate<F>(mut rhs: F, y0: &[f64], grid: &TimeGrid, opts: &IntegratorOptions) -> Result<DenseSolution>
where
    F: FnMut(usize, f64, &[f64], &mut [f64]) -> Result<()>,
{
    opts.validate()?;
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite initial state".into()));
    }
    let d = y0.len();
    let mut rec = Recorder {
        dim: d,
        seg_times: Vec::new(),
        seg_data: Vec::new(),
        interval_segments: vec![0],
        node_states: y0.to_vec(),
    };
    let mut st = Stages::new(d);
    let mut y = y0.to_vec();
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut evals = 0usize;
    let mut h = f64::NAN;

    for j in 0..grid.n_intervals() {
        let (ta, tb) = (grid.nodes()[j], grid.nodes()[j + 1]);
        let mut t = ta;
        rhs(j, t, &y, &mut st.k[0])?;
        evals += 1;
        if h.is_nan() {
            h = initial_step(&mut rhs, t, &y, &st.k[0].clone(), tb - ta, opts)?;
            evals += 1;
        }
        let mut last_rejected = false;
        while t < tb {
            if accepted + rejected >= opts.max_steps {
                return Err(Error::Integration { t, reason: "maximum number of steps exceeded".into() });
            }
            let remaining = tb - t;
            let mut step = h.min(remaining);
            if let Some(hm) = opts.h_max {
                step = step.min(hm);
            }
            // avoid a sliver step at the end of the interval
            let landing = step >= remaining * (1.0 - 1e-12) || remaining - step < 1e-3 * step;
            if landing {
                step = remaining;
            }
            if step < 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::Integration { t, reason: "step size underflow".into() });
            }
            dp5_step(&mut rhs, j, t, step, &y, &mut st)?;
            evals += 6;
            let finite = st.y_new.iter().all(|v| v.is_finite()) && st.k[6].iter().all(|v| v.is_finite());
            let err = if finite { error_norm(&y, &st, step, opts) } else { f64::INFINITY };
            if err <= 1.0 {
                let t_new = if landing { tb } else { t + step };
                rec.push(t, t_new, &y, &st.y_new, &st.k[0], &st.k[6]);
                y.copy_from_slice(&st.y_new);
                let (k0, rest) = st.k.split_at_mut(1);
                k0[0].copy_from_slice(&rest[5]);
                t = t_new;
                accepted += 1;
                let mut fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if last_rejected {
                    fac = fac.min(1.0);
                }
                let proposed = step * fac;
                // a clipped landing step says little about the next step size
                h = if landing && step < h { h.max(proposed) } else { proposed };
                last_rejected = false;
            } else {
                rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h = step * fac;
                last_rejected = true;
            }
        }
        rec.interval_segments.push(rec.seg_times.len());
        rec.node_states.extend_from_slice(&y);
    }

    Ok(DenseSolution {
        dim: rec.dim,
        grid: grid.clone(),
        seg_times: rec.seg_times,
        seg_data: rec.seg_data,
        interval_segments: rec.interval_segments,
        node_states: rec.node_states,
        steps_accepted: accepted,
        steps_rejected: rejected,
        rhs_evals: evals,
    })
}

/// Fixed-step DP5 (5th order solution, no error control) with `steps` equal
/// steps per grid interval. Used for convergence-order checks.
pub fn integrate_fixed<F>(mut rhs: F, y0: &[f64], grid: &TimeGrid, steps: usize) -> Result<DenseSolution>
where
    F: FnMut(usize, f64, &[f64], &mut [f64]) -> Result<()>,
{
    if steps == 0 {
        return Err(Error::Input("need at least one step per interval".into()));
    }
    let d = y0.len();
    let mut rec = Recorder {
        dim: d,
        seg_times: Vec::new(),
        seg_data: Vec::new(),
        interval_segments: vec![0],
        node_states: y0.to_vec(),
    };
    let mut st = Stages::new(d);
    let mut y = y0.to_vec();
    let mut evals = 0;
    for j in 0..grid.n_intervals() {
        let (ta, tb) = (grid.nodes()[j], grid.nodes()[j + 1]);
        let h = (tb - ta) / steps as f64;
        rhs(j, ta, &y, &mut st.k[0])?;
        evals += 1;
        for s in 0..steps {
            let t = ta + h * s as f64;
            let t_new = if s + 1 == steps { tb } else { ta + h * (s + 1) as f64 };
            dp5_step(&mut rhs, j, t, t_new - t, &y, &mut st)?;
            evals += 6;
            if st.y_new.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integration { t, reason: "non-finite state".into() });
            }
            rec.push(t, t_new, &y, &st.y_new, &st.k[0], &st.k[6]);
            y.copy_from_slice(&st.y_new);
            let (k0, rest) = st.k.split_at_mut(1);
            k0[0].copy_from_slice(&rest[5]);
        }
        rec.interval_segments.push(rec.seg_times.len());
        rec.node_states.extend_from_slice(&y);
    }
    Ok(DenseSolution {
        dim: d,
        grid: grid.clone(),
        seg_times: rec.seg_times,
        seg_data: rec.seg_data,
        interval_segments: rec.interval_segments,
        node_states: rec.node_states,
        steps_accepted: grid.n_intervals() * steps,
        steps_rejected: 0,
        rhs_evals: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lotka(_: usize, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        dx[0] = x[0] - x[0] * x[1];
        dx[1] = -x[1] + x[0] * x[1];
        Ok(())
    }

    #[test]
    fn exponential_decay() {
        let grid = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let sol = integrate(
            |_, _, x: &[f64], dx: &mut [f64]| {
                dx[0] = -x[0];
                Ok(())
            },
            &[1.0],
            &grid,
            &IntegratorOptions::with_tol(1e-8),
        )
        .unwrap();
        assert!((sol.final_state()[0] - (-1.0f64).exp()).abs() <= 1e-7);
    }

    #[test]
    fn constant_solution() {
        let grid = TimeGrid::uniform(0.0, 5.0, 7).unwrap();
        let sol = integrate(
            |_, _, _: &[f64], dx: &mut [f64]| {
                dx.fill(0.0);
                Ok(())
            },
            &[0.7, 0.5],
            &grid,
            &IntegratorOptions::default(),
        )
        .unwrap();
        let m = sol.node_matrix();
        for r in 0..m.nrows() {
            assert_eq!(m[(r, 0)], 0.7);
            assert_eq!(m[(r, 1)], 0.5);
        }
    }

    #[test]
    fn lands_on_nodes_and_dense_output_is_continuous() {
        let grid = TimeGrid::uniform(0.0, 12.0, 24).unwrap();
        let sol = integrate(lotka, &[0.7, 0.5], &grid, &IntegratorOptions::default()).unwrap();
        for j in 0..grid.n_intervals() {
            let r = sol.segment_range(j);
            assert_eq!(sol.segment_times(r.start).0, grid.nodes()[j]);
            assert_eq!(sol.segment_times(r.end - 1).1, grid.nodes()[j + 1]);
        }
        let a = sol.eval_vec(3.0);
        assert!((a[0] - sol.node_state(6)[0]).abs() < 1e-12);
    }

    #[test]
    fn lotka_adaptive_matches_refined_fixed_step_reference() {
        let grid = TimeGrid::uniform(0.0, 12.0, 1).unwrap();
        let adaptive = integrate(lotka, &[0.7, 0.5], &grid, &IntegratorOptions::with_tol(1e-8)).unwrap();
        let reference = integrate_fixed(lotka, &[0.7, 0.5], &grid, 24_000).unwrap();
        let half = integrate_fixed(lotka, &[0.7, 0.5], &grid, 12_000).unwrap();
        for i in 0..2 {
            assert!((reference.final_state()[i] - half.final_state()[i]).abs() < 1e-12);
            assert!((adaptive.final_state()[i] - reference.final_state()[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn fixed_step_order_is_at_least_four() {
        let grid = TimeGrid::uniform(0.0, 12.0, 1).unwrap();
        let reference = integrate_fixed(lotka, &[0.7, 0.5], &grid, 20_000).unwrap();
        let err = |steps| {
            let s = integrate_fixed(lotka, &[0.7, 0.5], &grid, steps).unwrap();
            (0..2).map(|i| (s.final_state()[i] - reference.final_state()[i]).abs()).fold(0.0, f64::max)
        };
        let coarse = err(100);
        let fine = err(200);
        assert!(coarse / fine >= 16.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn blow_up_reports_failure_time() {
        let grid = TimeGrid::uniform(0.0, 2.0, 1).unwrap();
        let res = integrate(
            |_, _, x: &[f64], dx: &mut [f64]| {
                dx[0] = x[0] * x[0];
                Ok(())
            },
            &[1.0],
            &grid,
            &IntegratorOptions::default(),
        );
        match res {
            Err(Error::Integration { t, .. }) => assert!(t > 0.9 && t <= 1.0 + 1e-6, "t = {t}"),
            other => panic!("expected integration failure, got {other:?}"),
        }
    }

    #[test]
    fn grid_validation_and_lookup() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        let g = TimeGrid::uniform(0.0, 12.0, 12).unwrap();
        assert_eq!(g.interval_of(0.0), 0);
        assert_eq!(g.interval_of(0.5), 0);
        assert_eq!(g.interval_of(1.0), 1);
        assert_eq!(g.interval_of(12.0), 11);
        let r = g.refined_with(&[0.5, 1.0, 11.25]).unwrap();
        assert_eq!(r.n_intervals(), 14);
    }
}
