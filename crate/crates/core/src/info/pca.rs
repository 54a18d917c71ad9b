//! Principal component projection.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::InfoError;
use crate::autograd::{gemm, Tensor};

/// Above this size (in the smaller dimension) a randomized subspace
/// iteration replaces the exact eigensolve.
const EXACT_LIMIT: usize = 1200;
const OVERSAMPLE: usize = 10;
const POWER_ITERS: usize = 6;

#[derive(Clone, Debug)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// d × k, columns are unit loadings in descending eigenvalue order.
    pub components: Tensor,
    /// Covariance eigenvalues (divided by N − 1).
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    pub fn k(&self) -> usize {
        self.components.cols()
    }

    pub fn transform(&self, x: &Tensor) -> Tensor {
        let centered = center(x, &self.mean);
        gemm(&centered, false, &self.components, false)
    }
}

fn center(x: &Tensor, mean: &[f64]) -> Tensor {
    let mut c = x.clone();
    for r in 0..c.rows() {
        for (v, m) in c.row_mut(r).iter_mut().zip(mean) {
            *v -= m;
        }
    }
    c
}

fn lex_order(x: &Tensor) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.rows()).collect();
    idx.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx
}

/// Fits the top-`k` principal directions.
///
/// Rows are put in lexicographic order before any accumulation, so the fit
/// does not depend on the order rows arrive in. Fails with `DegenerateRank`
/// when fewer than `k` directions carry variance.
pub fn pca_fit(x: &Tensor, k: usize) -> Result<Pca, InfoError> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(InfoError::TooFewSamples { needed: 2, got: n });
    }
    if k == 0 || k > d.min(n - 1) {
        return Err(InfoError::InvalidK { k, max: d.min(n - 1) });
    }
    let sorted = x.select_rows(&lex_order(x));
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(sorted.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let xc = center(&sorted, &mean);

    let (vals, vecs) = if n.min(d) <= EXACT_LIMIT { exact_eig(&xc) } else { randomized_eig(&xc, k) };
    let scale = vals.first().copied().unwrap_or(0.0).max(0.0);
    let tol = scale * 1e-10 * (n.max(d) as f64);
    let rank = vals.iter().take_while(|&&v| v > tol && v > 1e-300).count();
    if rank < k {
        return Err(InfoError::DegenerateRank { requested: k, available: rank });
    }
    let mut components = Tensor::zeros(d, k);
    for j in 0..k {
        let col = &vecs[j];
        let pivot = col.iter().enumerate().fold(0, |best, (i, v)| if v.abs() > col[best].abs() { i } else { best });
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (i, v) in col.iter().enumerate() {
            components.set(i, j, sign * v);
        }
    }
    let eigenvalues = vals[..k].iter().map(|v| v / (n - 1) as f64).collect();
    Ok(Pca { mean, components, eigenvalues })
}

/// Scatter-matrix eigenpairs in descending order; eigenvectors are d-dimensional loadings.
fn exact_eig(xc: &Tensor) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (n, d) = (xc.rows(), xc.cols());
    if d <= n {
        let s = gemm(xc, true, xc, false);
        sym_eig(&s)
    } else {
        // Gram trick: loadings are X^T u / sqrt(lambda)
        let g = gemm(xc, false, xc, true);
        let (vals, us) = sym_eig(&g);
        let loads = vals
            .iter()
            .zip(&us)
            .map(|(&l, u)| loading_from_left(xc, u, l))
            .collect();
        (vals, loads)
    }
}

fn loading_from_left(xc: &Tensor, u: &[f64], lambda: f64) -> Vec<f64> {
    let mut v = vec![0.0; xc.cols()];
    if lambda <= 0.0 {
        return v;
    }
    for (r, &ur) in u.iter().enumerate() {
        for (vj, x) in v.iter_mut().zip(xc.row(r)) {
            *vj += ur * x;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn sym_eig(s: &Tensor) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = DMatrix::from_row_slice(s.rows(), s.cols(), s.data());
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
    (vals, vecs)
}

fn orthonormalize(y: &Tensor) -> Tensor {
    let m = DMatrix::from_row_slice(y.rows(), y.cols(), y.data());
    let q = m.qr().q();
    let mut out = Tensor::zeros(q.nrows(), q.ncols());
    for r in 0..q.nrows() {
        for c in 0..q.ncols() {
            out.set(r, c, q[(r, c)]);
        }
    }
    out
}

fn randomized_eig(xc: &Tensor, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let l = (k + OVERSAMPLE).min(xc.cols()).min(xc.rows());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_9ca);
    let omega = Tensor::from_vec(
        xc.cols(),
        l,
        (0..xc.cols() * l).map(|_| StandardNormal.sample(&mut rng)).collect(),
    )
    .expect("shape by construction");
    let mut q = orthonormalize(&gemm(xc, false, &omega, false));
    for _ in 0..POWER_ITERS {
        let z = orthonormalize(&gemm(xc, true, &q, false));
        q = orthonormalize(&gemm(xc, false, &z, false));
    }
    // B = Q^T X (l × d); eigenpairs of B B^T give the leading spectrum
    let b = gemm(&q, true, xc, false);
    let bbt = gemm(&b, false, &b, true);
    let (vals, us) = sym_eig(&bbt);
    let loads = vals.iter().zip(&us).map(|(&lam, u)| loading_from_left(&b, u, lam)).collect();
    (vals, loads)
}

/// Fits and projects in one step.
pub fn pca_project(x: &Tensor, k: usize) -> Result<Tensor, InfoError> {
    Ok(pca_fit(x, k)?.transform(x))
}

/// Like [`pca_project`], but lowers `k` to the available rank instead of
/// failing. Returns an N × 0 matrix when the data are constant.
pub fn pca_project_reduced(x: &Tensor, k: usize) -> Result<Tensor, InfoError> {
    let k = k.min(x.cols()).min(x.rows().saturating_sub(1));
    if k == 0 {
        return Ok(Tensor::zeros(x.rows(), 0));
    }
    match pca_fit(x, k) {
        Ok(p) => Ok(p.transform(x)),
        Err(InfoError::DegenerateRank { available, .. }) => {
            log::warn!("PCA rank {available} below requested k = {k}; reducing");
            if available == 0 {
                Ok(Tensor::zeros(x.rows(), 0))
            } else {
                Ok(pca_fit(x, available)?.transform(x))
            }
        }
        Err(e) => Err(e),
    }
}
