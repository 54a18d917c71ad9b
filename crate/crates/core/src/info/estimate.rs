//! PCA + quantile-binning estimators over real-valued views.

use serde::{Deserialize, Serialize};

use super::discrete::{conditional_entropy, conditional_mi, mutual_information, DiscreteJoint};
use super::pca::pca_project_reduced;
use super::InfoError;
use crate::autograd::Tensor;

/// Relative resolution projections are snapped to before binning.
const SNAP: f64 = 1e-9;

/// Left-closed quantile bins. Edges sit at `sorted[floor(j n / bins)]`,
/// `j = 1..bins`; duplicate edges and edges at the minimum are dropped, and a
/// value's code is the number of edges not above it.
pub fn quantile_bin(x: &[f64], bins: usize) -> Vec<usize> {
    let n = x.len();
    if n == 0 || bins < 2 {
        return vec![0; n];
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let mut edges: Vec<f64> = (1..bins).map(|j| sorted[j * n / bins]).filter(|&e| e > min).collect();
    edges.dedup();
    x.iter().map(|&v| edges.partition_point(|&e| e <= v)).collect()
}

/// Maps arbitrary codes to `0..k` by rank of value.
fn compact(codes: &[usize]) -> (Vec<usize>, usize) {
    let mut uniq = codes.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    (codes.iter().map(|c| uniq.binary_search(c).unwrap()).collect(), uniq.len())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinnedView {
    /// One compact joint code per row.
    pub codes: Vec<usize>,
    /// Number of distinct codes that occur.
    pub cells: usize,
    /// PCA dimensions actually used (below the request for low-rank data).
    pub k_used: usize,
}

/// Projects onto the top `pca_k` components, bins each coordinate, and joins
/// the per-coordinate codes into a single tuple code.
pub fn bin_view(x: &Tensor, pca_k: usize, bins: usize) -> Result<BinnedView, InfoError> {
    if bins < 2 {
        return Err(InfoError::InvalidBins(bins));
    }
    let n = x.rows();
    if n < bins {
        return Err(InfoError::TooFewSamples { needed: bins, got: n });
    }
    let proj = pca_project_reduced(x, pca_k)?;
    let k = proj.cols();
    let mut joint = vec![0usize; n];
    for c in 0..k {
        let col: Vec<f64> = (0..n).map(|r| proj.get(r, c)).collect();
        let scale = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let snapped: Vec<f64> =
            if scale > 0.0 { col.iter().map(|v| (v / (scale * SNAP)).round()).collect() } else { col };
        for (j, b) in joint.iter_mut().zip(quantile_bin(&snapped, bins)) {
            *j = *j * bins + b;
        }
    }
    let (codes, cells) = compact(&joint);
    if n < 10 * cells {
        log::warn!("{n} samples for {cells} occupied cells; plug-in estimates are biased upward");
    }
    Ok(BinnedView { codes, cells, k_used: k })
}

fn check_labels(x: &Tensor, y: &[usize]) -> Result<(), InfoError> {
    if x.rows() != y.len() {
        return Err(InfoError::LengthMismatch { rows: x.rows(), labels: y.len() });
    }
    Ok(())
}

/// Plug-in I(code(X); Y) in nats.
pub fn view_mi(x: &Tensor, y: &[usize], pca_k: usize, bins: usize) -> Result<f64, InfoError> {
    check_labels(x, y)?;
    let b = bin_view(x, pca_k, bins)?;
    codes_mi(&b.codes, y)
}

pub(crate) fn codes_mi(a: &[usize], b: &[usize]) -> Result<f64, InfoError> {
    mutual_information(&DiscreteJoint::from_codes(&[a, b])?)
}

/// I(A;B|C) from aligned code columns.
pub(crate) fn codes_cmi(a: &[usize], b: &[usize], c: &[usize]) -> Result<f64, InfoError> {
    conditional_mi(&DiscreteJoint::from_codes(&[a, b, c])?)
}

/// I(code_i; code_j | Y) normalized by min(H(code_i|Y), H(code_j|Y)); 0/0 := 0.
pub fn normalized_codes_cmi(ci: &[usize], cj: &[usize], y: &[usize]) -> Result<f64, InfoError> {
    let raw = codes_cmi(ci, cj, y)?;
    let hi = conditional_entropy(&DiscreteJoint::from_codes(&[ci, y])?)?;
    let hj = conditional_entropy(&DiscreteJoint::from_codes(&[cj, y])?)?;
    let denom = hi.min(hj);
    if denom <= 1e-12 {
        return Ok(0.0);
    }
    Ok((raw / denom).clamp(0.0, 1.0))
}

pub fn view_pair_cmi(xi: &Tensor, xj: &Tensor, y: &[usize], pca_k: usize, bins: usize) -> Result<f64, InfoError> {
    check_labels(xi, y)?;
    check_labels(xj, y)?;
    let bi = bin_view(xi, pca_k, bins)?;
    let bj = bin_view(xj, pca_k, bins)?;
    normalized_codes_cmi(&bi.codes, &bj.codes, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonRedundancy {
    /// I(X_i; Y | X_j)
    pub i_given_j: f64,
    /// I(X_j; Y | X_i)
    pub j_given_i: f64,
    pub nonredundant: bool,
}

/// True when either view carries more than `epsilon` nats about Y beyond the other.
pub fn nonredundancy_check(
    xi: &Tensor,
    xj: &Tensor,
    y: &[usize],
    epsilon: f64,
    pca_k: usize,
    bins: usize,
) -> Result<NonRedundancy, InfoError> {
    check_labels(xi, y)?;
    check_labels(xj, y)?;
    let ci = bin_view(xi, pca_k, bins)?.codes;
    let cj = bin_view(xj, pca_k, bins)?.codes;
    let i_given_j = codes_cmi(&ci, y, &cj)?;
    let j_given_i = codes_cmi(&cj, y, &ci)?;
    Ok(NonRedundancy { i_given_j, j_given_i, nonredundant: i_given_j > epsilon || j_given_i > epsilon })
}
