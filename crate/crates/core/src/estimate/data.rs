//! Measurement drawing and synthetic data from the ground-truth model.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::design::{ControlDesign, SamplingDesign};
use crate::error::{Error, Result};
use crate::models::{ParamVector, UdeModel};
use crate::numerics::{IntegratorOptions, TimeGrid};
use crate::sensitivity::simulate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Sorted measurement times per observable
    pub times: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    pub sigma: f64,
    pub seed: u64,
}

impl Dataset {
    pub fn n_observables(&self) -> usize {
        self.times.len()
    }

    pub fn len(&self) -> usize {
        self.times.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_times(&self) -> Vec<f64> {
        self.times.iter().flatten().copied().collect()
    }

    /// Integration grid: `base` nodes plus every measurement time.
    pub fn grid(&self, base: &TimeGrid) -> Result<TimeGrid> {
        base.refined_with(&self.all_times())
    }

    pub fn write_csv(&self, path: &Path, observable_names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["observable", "t", "value"])?;
        for (i, (ts, vs)) in self.times.iter().zip(&self.values).enumerate() {
            let name = observable_names.get(i).cloned().unwrap_or_else(|| format!("y{i}"));
            for (t, v) in ts.iter().zip(vs) {
                w.write_record([name.clone(), format!("{t:?}"), format!("{v:?}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws `counts[i]` distinct intervals per observable with probabilities
/// proportional to the relaxed weights and returns their midpoints, sorted.
pub fn draw_measurement_times<R: Rng + ?Sized>(w: &SamplingDesign, counts: &[usize], rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if counts.len() != w.w.nrows() {
        return Err(Error::Input("one measurement count per observable required".into()));
    }
    let n = w.grid.n_intervals();
    let mut out = Vec::with_capacity(counts.len());
    for (i, &count) in counts.iter().enumerate() {
        // normalizing by M_i does not change the draw probabilities
        let weight = |j: usize| w.w[(i, j)].max(0.0);
        let positive = (0..n).filter(|&j| weight(j) > 0.0).count();
        if count > positive {
            return Err(Error::Sampling(format!(
                "observable {i}: {count} measurements requested but only {positive} intervals have positive weight"
            )));
        }
        let mut idx: Vec<usize> = if count == 0 {
            Vec::new()
        } else {
            rand::seq::index::sample_weighted(rng, n, weight, count)
                .map_err(|e| Error::Sampling(e.to_string()))?
                .into_vec()
        };
        idx.sort_unstable();
        out.push(idx.into_iter().map(|j| w.grid.midpoint(j)).collect());
    }
    Ok(out)
}

/// Exact observations of `truth` at `times` plus iid `N(0, σ²)` noise.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_dataset<R: Rng + ?Sized>(
    truth: &UdeModel,
    params_true: &ParamVector,
    controls: &ControlDesign,
    times: &[Vec<f64>],
    sigma: f64,
    seed: u64,
    rng: &mut R,
    opts: &IntegratorOptions,
) -> Result<Dataset> {
    if !(sigma >= 0.0) {
        return Err(Error::Input("noise standard deviation must be nonnegative".into()));
    }
    let (t0, tf) = truth.horizon;
    if times.iter().flatten().any(|&t| !(t >= t0 && t <= tf)) {
        return Err(Error::Input("measurement time outside the horizon".into()));
    }
    let all: Vec<f64> = times.iter().flatten().copied().collect();
    let grid = controls.grid.refined_with(&all)?;
    let sol = simulate(truth, params_true, controls, &grid, opts)?;
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Input(e.to_string()))?;
    let mut values = Vec::with_capacity(times.len());
    for (i, ts) in times.iter().enumerate() {
        let mut vs = Vec::with_capacity(ts.len());
        for &t in ts {
            let y = truth.observe(&sol.eval_vec(t))?.y[i];
            vs.push(if sigma > 0.0 { y + noise.sample(rng) } else { y });
        }
        values.push(vs);
    }
    Ok(Dataset { times: times.to_vec(), values, sigma, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn design(row: &[f64]) -> SamplingDesign {
        let grid = TimeGrid::uniform(0.0, 12.0, row.len()).unwrap();
        SamplingDesign { grid, w: DMatrix::from_row_slice(1, row.len(), row), budgets: vec![12.0] }
    }

    #[test]
    fn forced_draw() {
        let d = design(&[0.0, 0.0, 1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(draw_measurement_times(&d, &[1], &mut rng).unwrap(), vec![vec![7.5]]);
        assert!(matches!(draw_measurement_times(&d, &[2], &mut rng), Err(Error::Sampling(_))));
    }

    #[test]
    fn zero_weight_never_drawn() {
        let d = design(&[0.5, 0.0, 1.0, 0.0, 0.2, 0.0]);
        let zero: Vec<f64> = [1, 3, 5].iter().map(|&j| d.grid.midpoint(j)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let t = draw_measurement_times(&d, &[2], &mut rng).unwrap();
            assert!(t[0].iter().all(|x| !zero.contains(x)));
        }
    }

    #[test]
    fn uniform_marginals() {
        let d = design(&[1.0 / 3.0; 12]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits = [0usize; 12];
        let draws = 100_000;
        for _ in 0..draws {
            for t in &draw_measurement_times(&d, &[3], &mut rng).unwrap()[0] {
                hits[d.grid.interval_of(*t)] += 1;
            }
        }
        for h in hits {
            assert!((h as f64 / draws as f64 - 0.25).abs() <= 0.01, "{h}");
        }
    }
}
