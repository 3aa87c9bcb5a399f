//! Symmetric matrices, cyclic Jacobi eigen-decomposition and SPD inversion.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which an eigenvalue counts as numerically zero.
pub const PSD_REL_TOL: f64 = 1e-12;

/// Dense symmetric matrix. Constructors take the lower triangle as authoritative
/// and mirror it, so `entries[(i, j)] == entries[(j, i)]` always holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    entries: DMatrix<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be at least 1");
        SymMatrix { entries: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be at least 1");
        SymMatrix { entries: DMatrix::identity(dim, dim) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut s = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            s.entries[(i, i)] = *d;
        }
        s
    }

    /// Wraps a square matrix, mirroring its lower triangle onto the upper one.
    pub fn from_lower(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Input(format!(
                "symmetric matrix must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut entries = m;
        let n = entries.nrows();
        for i in 0..n {
            for j in 0..i {
                entries[(j, i)] = entries[(i, j)];
            }
        }
        Ok(SymMatrix { entries })
    }

    /// Wraps a square matrix, averaging it with its transpose.
    pub fn from_symmetrized(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Input("symmetric matrix must be square and nonempty".into()));
        }
        Ok(SymMatrix { entries: (m + m.transpose()) * 0.5 })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Input("rows must form a square matrix".into()));
        }
        Self::from_lower(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &SymMatrix, scale: f64) {
        assert_eq!(self.dim(), other.dim());
        self.entries.zip_apply(&other.entries, |a, b| *a += scale * b);
    }

    /// `self += scale * v v^T`.
    pub fn rank_one_update(&mut self, v: &[f64], scale: f64) {
        let n = self.dim();
        assert_eq!(v.len(), n);
        for j in 0..n {
            let vj = scale * v[j];
            if vj == 0.0 {
                continue;
            }
            let col = self.entries.column_mut(j);
            for (e, vi) in col.into_iter().zip(v) {
                *e += vi * vj;
            }
        }
    }

    /// `A^T S A`.
    pub fn congruence(&self, a: &DMatrix<f64>) -> SymMatrix {
        assert_eq!(a.nrows(), self.dim());
        let m = a.transpose() * &self.entries * a;
        SymMatrix::from_symmetrized(&m).expect("congruence of nonempty matrix")
    }

    /// Principal submatrix on the given indices.
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        let n = idx.len();
        let m = DMatrix::from_fn(n, n, |i, j| self.entries[(idx[i], idx[j])]);
        SymMatrix { entries: m }
    }

    pub fn inf_norm(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Frobenius inner product `sum_kl S_kl O_kl`.
    pub fn frobenius_dot(&self, other: &SymMatrix) -> f64 {
        self.entries.dot(&other.entries)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|x| x.is_finite())
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    /// Column `k` is the unit eigenvector of `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// Number of eigenvalues above `PSD_REL_TOL * lambda_max`.
    pub fn positive_count(&self) -> usize {
        let lmax = self.lambda_max();
        if lmax <= 0.0 {
            return 0;
        }
        self.eigenvalues.iter().filter(|&&l| l > PSD_REL_TOL * lmax).count()
    }

    /// Fails with `Error::Singular` unless every eigenvalue exceeds the relative threshold.
    pub fn ensure_positive_definite(&self) -> Result<()> {
        let lmax = self.lambda_max();
        let lmin = self.lambda_min();
        if !(lmax > 0.0) || !(lmin > PSD_REL_TOL * lmax) {
            return Err(Error::Singular { lambda_min: lmin, lambda_max: lmax });
        }
        Ok(())
    }

    /// `Q f(Λ) Q^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[k]);
        }
        SymMatrix::from_symmetrized(&(scaled * q.transpose())).expect("nonempty spectrum")
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|l| l)
    }

    /// `log det` for a positive spectrum.
    pub fn log_det(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.ln()).sum()
    }

    /// Spectral condition number `lambda_max / lambda_min`.
    pub fn condition_number(&self) -> f64 {
        self.lambda_max() / self.lambda_min()
    }
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations.
///
/// Rotations are skipped when `|a_pq| <= eps * sqrt(|a_pp a_qq|)`, which keeps
/// small eigenvalues of graded positive definite matrices relatively accurate.
pub fn sym_eig(s: &SymMatrix) -> Result<Spectrum> {
    if !s.is_finite() {
        return Err(Error::Input("non-finite matrix entry".into()));
    }
    let n = s.dim();
    // row-major working copies
    let mut a: Vec<f64> = (0..n * n).map(|k| s.entries[(k / n, k % n)]).collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let eps = f64::EPSILON;

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq.abs() <= eps * (app.abs() * aqq.abs()).sqrt() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let nkp = c * akp - sn * akq;
                    let nkq = sn * akp + c * akq;
                    a[k * n + p] = nkp;
                    a[p * n + k] = nkp;
                    a[k * n + q] = nkq;
                    a[q * n + k] = nkq;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].partial_cmp(&a[i * n + i]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| a[i * n + i]));
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    Ok(Spectrum { eigenvalues, eigenvectors })
}

/// Inverse of a symmetric positive definite matrix via its spectrum.
pub fn spd_inverse(s: &SymMatrix) -> Result<SymMatrix> {
    let spec = sym_eig(s)?;
    spec.ensure_positive_definite()?;
    Ok(spec.reconstruct_with(|l| 1.0 / l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::from_symmetrized(&(b.transpose() * b)).unwrap()
    }

    #[test]
    fn identity_spectrum() {
        let spec = sym_eig(&SymMatrix::identity(2)).unwrap();
        assert_eq!(spec.eigenvalues.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn diagonal_spectrum() {
        let spec = sym_eig(&SymMatrix::from_diagonal(&[1.0, 4.0])).unwrap();
        assert_eq!(spec.eigenvalues.as_slice(), &[4.0, 1.0]);
        assert_eq!(spec.eigenvectors[(1, 0)].abs(), 1.0);
        assert_eq!(spec.eigenvectors[(0, 1)].abs(), 1.0);
    }

    #[test]
    fn random_psd_reconstructs() {
        let s = random_psd(5, 7);
        let spec = sym_eig(&s).unwrap();
        let r = spec.reconstruct();
        let err = (r.matrix() - s.matrix()).abs().max();
        assert!(err <= 1e-8 * s.inf_norm(), "err = {err}");
        let q = &spec.eigenvectors;
        let orth = (q.transpose() * q - DMatrix::identity(5, 5)).abs().max();
        assert!(orth <= 1e-10);
        for w in spec.eigenvalues.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(spec.lambda_min() >= -1e-10 * s.inf_norm());
    }

    #[test]
    fn rejects_non_finite() {
        let s = SymMatrix::from_diagonal(&[1.0, f64::NAN]);
        assert!(matches!(sym_eig(&s), Err(Error::Input(_))));
    }

    #[test]
    fn inverse_of_identity_and_diagonal() {
        let inv = spd_inverse(&SymMatrix::identity(3)).unwrap();
        assert!((inv.matrix() - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-15);
        let inv = spd_inverse(&SymMatrix::from_diagonal(&[4.0, 1.0])).unwrap();
        assert!((inv.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((inv.get(1, 1) - 1.0).abs() < 1e-15);
        assert!(inv.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_inverse_fails() {
        let s = SymMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        match spd_inverse(&s) {
            Err(Error::Singular { lambda_min, .. }) => assert!(lambda_min.abs() < 1e-14),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn graded_matrix_keeps_small_eigenvalues() {
        // diag(1, 1e-8, 1e-14) rotated keeps the tiny eigenvalue to high relative accuracy
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-8, 1e-14]));
        let spec = sym_eig(&SymMatrix::from_symmetrized(&d).unwrap()).unwrap();
        assert!((spec.lambda_min() - 1e-14).abs() < 1e-20);
    }

    #[test]
    fn large_psd_matrix() {
        let s = random_psd(40, 3);
        let spec = sym_eig(&s).unwrap();
        let err = (spec.reconstruct().matrix() - s.matrix()).abs().max();
        assert!(err <= 1e-8 * s.inf_norm());
        let inv = spd_inverse(&s).unwrap();
        let prod = s.matrix() * inv.matrix() - DMatrix::<f64>::identity(40, 40);
        assert!(prod.abs().max() <= 1e-8 * spec.condition_number());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reconstruction_and_inverse_spectrum(n in 1usize..8, seed in 0u64..10_000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
                let s = SymMatrix::from_symmetrized(&b).unwrap();
                let spec = sym_eig(&s).unwrap();
                let err = (spec.reconstruct().matrix() - s.matrix()).abs().max();
                prop_assert!(err <= 1e-8 * s.inf_norm().max(1e-300));

                let pd = SymMatrix::from_symmetrized(&(b.transpose() * &b + DMatrix::identity(n, n))).unwrap();
                let pspec = sym_eig(&pd).unwrap();
                let ispec = sym_eig(&spd_inverse(&pd).unwrap()).unwrap();
                for k in 0..n {
                    let expect = 1.0 / pspec.eigenvalues[n - 1 - k];
                    prop_assert!((ispec.eigenvalues[k] - expect).abs() <= 1e-8 * expect.max(1.0));
                }
            }
        }
    }
}
