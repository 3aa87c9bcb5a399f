use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::UdeModel;
use crate::numerics::TimeGrid;

/// Piecewise constant controls, one column per interval of `grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlDesign {
    pub grid: TimeGrid,
    /// n_u × n_pieces
    pub values: DMatrix<f64>,
    pub bounds: Vec<(f64, f64)>,
}

impl ControlDesign {
    pub fn new(grid: TimeGrid, values: DMatrix<f64>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if values.ncols() != grid.n_intervals() || values.nrows() != bounds.len() {
            return Err(Error::Input(format!(
                "control matrix is {}×{}, expected {}×{}",
                values.nrows(),
                values.ncols(),
                bounds.len(),
                grid.n_intervals()
            )));
        }
        for (c, &(lo, hi)) in bounds.iter().enumerate() {
            if values.row(c).iter().any(|&v| !(v >= lo - 1e-12 && v <= hi + 1e-12)) {
                return Err(Error::Input(format!("control channel {c} leaves [{lo}, {hi}]")));
            }
        }
        Ok(ControlDesign { grid, values, bounds })
    }

    /// Every channel held at `level` (clipped to its bounds).
    pub fn constant(model: &UdeModel, grid: TimeGrid, level: f64) -> Self {
        let bounds = model.control_bounds.clone();
        let values = DMatrix::from_fn(bounds.len(), grid.n_intervals(), |c, _| level.clamp(bounds[c].0, bounds[c].1));
        ControlDesign { grid, values, bounds }
    }

    pub fn zero(model: &UdeModel, grid: TimeGrid) -> Self {
        Self::constant(model, grid, 0.0)
    }

    pub fn n_u(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_pieces(&self) -> usize {
        self.values.ncols()
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        self.values.column(self.grid.interval_of(t)).iter().copied().collect()
    }

    /// Control vector for every interval of `grid`, looked up at interval midpoints.
    /// Exact when the control nodes are a subset of `grid`'s nodes.
    pub fn per_interval(&self, grid: &TimeGrid) -> Vec<Vec<f64>> {
        (0..grid.n_intervals()).map(|j| self.at(grid.midpoint(j))).collect()
    }

    /// Flattened piece values, channel-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.values.len());
        for c in 0..self.n_u() {
            v.extend(self.values.row(c).iter());
        }
        v
    }

    pub fn with_flat(&self, flat: &[f64]) -> Self {
        let n = self.n_pieces();
        let values = DMatrix::from_fn(self.n_u(), n, |c, k| flat[c * n + k].clamp(self.bounds[c].0, self.bounds[c].1));
        ControlDesign { grid: self.grid.clone(), values, bounds: self.bounds.clone() }
    }

    pub fn flat_bounds(&self) -> Vec<(f64, f64)> {
        self.bounds.iter().flat_map(|&b| std::iter::repeat_n(b, self.n_pieces())).collect()
    }

    pub fn is_fixed(&self) -> bool {
        self.bounds.iter().all(|(lo, hi)| hi - lo <= 0.0)
    }
}
