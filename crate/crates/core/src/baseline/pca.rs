use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BaselineError;

/// Largest `min(N, D)` solved with a dense eigendecomposition.
pub const DENSE_LIMIT: usize = 3000;

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PcaSolver {
    /// Dense eigendecomposition when small enough, subspace iteration otherwise.
    Auto,
    Dense,
    /// Block subspace iteration on the covariance operator.
    Iterative { max_iters: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `k x D`, orthonormal rows.
    pub components: DMatrix<f64>,
    /// Sample variance along each component, nonincreasing.
    pub explained_variance: Vec<f64>,
    /// Number of components asked for; larger than `k` when the data rank
    /// was too small.
    pub requested: usize,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn rank_deficient(&self) -> bool {
        self.k() < self.requested
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `components * (x - mean)`.
    pub fn project(&self, x: &[f64]) -> Result<DVector<f64>, BaselineError> {
        if x.len() != self.dim() {
            return Err(BaselineError::ShapeMismatch { expected: self.dim(), got: x.len() });
        }
        let centered = DVector::from_iterator(x.len(), x.iter().zip(self.mean.iter()).map(|(a, m)| a - m));
        Ok(&self.components * centered)
    }

    /// Projects every row of `data` (`N x D`) to `N x k`.
    pub fn project_rows(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>, BaselineError> {
        if data.ncols() != self.dim() {
            return Err(BaselineError::ShapeMismatch { expected: self.dim(), got: data.ncols() });
        }
        let mut out = data * self.components.transpose();
        let shift = &self.components * &self.mean;
        for mut row in out.row_iter_mut() {
            row -= shift.transpose();
        }
        Ok(out)
    }

    /// `mean + components^T * z`.
    pub fn reconstruct(&self, z: &DVector<f64>) -> DVector<f64> {
        self.components.transpose() * z + &self.mean
    }
}

fn center(data: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = data.nrows() as f64;
    let mean = DVector::from_iterator(data.ncols(), data.column_iter().map(|c| c.sum() / n));
    let mut centered = data.clone();
    for (mut col, m) in centered.column_iter_mut().zip(mean.iter()) {
        col.add_scalar_mut(-m);
    }
    (centered, mean)
}

/// Eigenpairs sorted by decreasing eigenvalue.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    (values, vectors)
}

/// Number of leading eigenvalues that are numerically nonzero.
fn usable(values: &[f64], k: usize) -> usize {
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    values.iter().take(k).take_while(|&&v| top > 0.0 && v > RANK_TOL * top).count()
}

/// Makes each row's largest-magnitude entry positive, so results do not
/// depend on the eigensolver's sign choice.
fn fix_signs(components: &mut DMatrix<f64>) {
    for mut row in components.row_iter_mut() {
        let (mut idx, mut best) = (0, 0.0);
        for (j, v) in row.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                idx = j;
            }
        }
        if row[idx] < 0.0 {
            row.neg_mut();
        }
    }
}

fn dense(centered: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let (n, d) = centered.shape();
    let denom = (n - 1) as f64;
    if d <= n {
        let cov = centered.transpose() * centered / denom;
        let (values, vectors) = sorted_eigen(cov);
        let k = usable(&values, k);
        (vectors.columns(0, k).transpose(), values[..k].to_vec())
    } else {
        // eigenvectors of X X^T map to those of X^T X through X^T u / sqrt(lambda)
        let gram = centered * centered.transpose() / denom;
        let (values, vectors) = sorted_eigen(gram);
        let k = usable(&values, k);
        let mut comps = DMatrix::zeros(k, d);
        for i in 0..k {
            let v = centered.transpose() * vectors.column(i);
            let norm = v.norm();
            comps.row_mut(i).copy_from(&(v / norm).transpose());
        }
        (comps, values[..k].to_vec())
    }
}

/// Orthonormal basis of the columns of `m` (thin QR).
fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

fn iterative(centered: &DMatrix<f64>, k: usize, max_iters: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let (n, d) = centered.shape();
    let denom = (n - 1) as f64;
    let p = (k + 8).min(n.min(d));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = orthonormalize(DMatrix::from_fn(d, p, |_, _| rng.random_range(-1.0..1.0)));
    let mut prev: Vec<f64> = vec![0.0; p];
    let mut values = Vec::new();
    let mut ritz = DMatrix::zeros(p, p);
    for _ in 0..max_iters.max(1) {
        let z = centered.transpose() * (centered * &q) / denom;
        // Rayleigh-Ritz on the current subspace
        let small = q.transpose() * &z;
        let small = (&small + small.transpose()) * 0.5;
        let (vals, vecs) = sorted_eigen(small);
        values = vals;
        ritz = vecs;
        let converged = values
            .iter()
            .zip(&prev)
            .take(k)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * values[0].abs().max(f64::MIN_POSITIVE));
        prev.clone_from(&values);
        if converged {
            break;
        }
        q = orthonormalize(z);
    }
    let k = usable(&values, k);
    let basis = &q * ritz;
    (basis.columns(0, k).transpose(), values[..k].to_vec())
}

/// Principal components of the rows of `data` (`N x D`).
pub fn fit_pca(data: &DMatrix<f64>, k: usize, solver: PcaSolver) -> Result<PcaModel, BaselineError> {
    let (n, d) = data.shape();
    if n < 2 {
        return Err(BaselineError::TooFewSamples(n));
    }
    if k == 0 || d == 0 {
        return Err(BaselineError::ShapeMismatch { expected: 1, got: k.min(d) });
    }
    let (centered, mean) = center(data);
    let kk = k.min(n.min(d));
    let (mut components, explained_variance) = match solver {
        PcaSolver::Dense => dense(&centered, kk),
        PcaSolver::Auto if n.min(d) <= DENSE_LIMIT => dense(&centered, kk),
        PcaSolver::Auto => iterative(&centered, kk, 300, 0),
        PcaSolver::Iterative { max_iters, seed } => iterative(&centered, kk, max_iters, seed),
    };
    fix_signs(&mut components);
    Ok(PcaModel { mean, components, explained_variance, requested: k })
}
