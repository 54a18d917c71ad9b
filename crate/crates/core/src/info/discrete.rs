//! Plug-in estimators over count tables. All logarithms are natural.

use super::InfoError;

/// Entropy of a count vector.
pub fn discrete_entropy(counts: &[u64]) -> Result<f64, InfoError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(InfoError::EmptyDistribution);
    }
    Ok(entropy_of(counts, total))
}

fn entropy_of(counts: &[u64], total: u64) -> f64 {
    let t = total as f64;
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / t;
            h -= p * p.ln();
        }
    }
    h
}

/// Dense count table over two or more discrete variables (row-major, last axis fastest).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteJoint {
    dims: Vec<usize>,
    counts: Vec<u64>,
    total: u64,
}

impl DiscreteJoint {
    pub fn new(dims: Vec<usize>, counts: Vec<u64>) -> Result<Self, InfoError> {
        if dims.is_empty() || dims.iter().product::<usize>() != counts.len() {
            return Err(InfoError::InvalidJoint(format!("{} counts for dims {dims:?}", counts.len())));
        }
        let total = counts.iter().sum();
        if total == 0 {
            return Err(InfoError::EmptyDistribution);
        }
        Ok(Self { dims, counts, total })
    }

    /// Counts co-occurrences of aligned code columns. Axis sizes are one more
    /// than the largest code in each column.
    pub fn from_codes(columns: &[&[usize]]) -> Result<Self, InfoError> {
        let n = columns.first().map_or(0, |c| c.len());
        if columns.is_empty() || columns.iter().any(|c| c.len() != n) {
            return Err(InfoError::InvalidJoint("code columns must be non-empty and equally long".into()));
        }
        if n == 0 {
            return Err(InfoError::EmptyDistribution);
        }
        let dims: Vec<usize> = columns.iter().map(|c| c.iter().max().map_or(1, |m| m + 1)).collect();
        let mut counts = vec![0u64; dims.iter().product()];
        for r in 0..n {
            let mut idx = 0;
            for (c, &d) in columns.iter().zip(&dims) {
                idx = idx * d + c[r];
            }
            counts[idx] += 1;
        }
        Self::new(dims, counts)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
    }

    /// Merges axes into compound variables: `groups[g]` lists the original
    /// axes forming new axis `g`. Axes left out are summed over.
    pub fn regroup(&self, groups: &[&[usize]]) -> Result<DiscreteJoint, InfoError> {
        if groups.is_empty() {
            return Err(InfoError::InvalidJoint("no groups".into()));
        }
        let mut seen = vec![false; self.dims.len()];
        for &a in groups.iter().flat_map(|g| g.iter()) {
            if a >= self.dims.len() || seen[a] {
                return Err(InfoError::InvalidJoint(format!("axis {a} missing or repeated")));
            }
            seen[a] = true;
        }
        let new_dims: Vec<usize> = groups.iter().map(|g| g.iter().map(|&a| self.dims[a]).product()).collect();
        let mut counts = vec![0u64; new_dims.iter().product()];
        let mut idx = vec![0; self.dims.len()];
        for (flat, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            self.unravel(flat, &mut idx);
            let mut out = 0;
            for (g, &nd) in groups.iter().zip(&new_dims) {
                let mut sub = 0;
                for &a in g.iter() {
                    sub = sub * self.dims[a] + idx[a];
                }
                out = out * nd + sub;
            }
            counts[out] += c;
        }
        Ok(DiscreteJoint { dims: new_dims, counts, total: self.total })
    }

    pub fn marginal(&self, axes: &[usize]) -> Result<DiscreteJoint, InfoError> {
        let groups: Vec<&[usize]> = axes.iter().map(std::slice::from_ref).collect();
        self.regroup(&groups)
    }

    /// Joint entropy over all axes.
    pub fn entropy(&self) -> f64 {
        entropy_of(&self.counts, self.total)
    }
}

/// I(A;B) for a two-axis table.
pub fn mutual_information(joint: &DiscreteJoint) -> Result<f64, InfoError> {
    if joint.dims.len() != 2 {
        return Err(InfoError::InvalidJoint(format!("expected 2 axes, got {}", joint.dims.len())));
    }
    let (ka, kb) = (joint.dims[0], joint.dims[1]);
    let mut pa = vec![0u64; ka];
    let mut pb = vec![0u64; kb];
    for a in 0..ka {
        for b in 0..kb {
            let c = joint.counts[a * kb + b];
            pa[a] += c;
            pb[b] += c;
        }
    }
    Ok(slice_mi(&joint.counts, ka, kb, &pa, &pb, joint.total))
}

fn slice_mi(counts: &[u64], ka: usize, kb: usize, pa: &[u64], pb: &[u64], total: u64) -> f64 {
    let t = total as f64;
    let mut mi = 0.0;
    for a in 0..ka {
        for b in 0..kb {
            let c = counts[a * kb + b];
            if c > 0 {
                // p(a,b) / (p(a) p(b)) = c t / (n_a n_b)
                mi += (c as f64 / t) * ((c as f64 * t) / (pa[a] as f64 * pb[b] as f64)).ln();
            }
        }
    }
    mi
}

/// I(A;B|Y) for a three-axis table ordered (A, B, Y).
pub fn conditional_mi(joint3: &DiscreteJoint) -> Result<f64, InfoError> {
    if joint3.dims.len() != 3 {
        return Err(InfoError::InvalidJoint(format!("expected 3 axes, got {}", joint3.dims.len())));
    }
    let (ka, kb, ky) = (joint3.dims[0], joint3.dims[1], joint3.dims[2]);
    let mut out = 0.0;
    let mut slice = vec![0u64; ka * kb];
    for y in 0..ky {
        let mut pa = vec![0u64; ka];
        let mut pb = vec![0u64; kb];
        let mut ny = 0;
        for a in 0..ka {
            for b in 0..kb {
                let c = joint3.counts[(a * kb + b) * ky + y];
                slice[a * kb + b] = c;
                pa[a] += c;
                pb[b] += c;
                ny += c;
            }
        }
        if ny > 0 {
            out += (ny as f64 / joint3.total as f64) * slice_mi(&slice, ka, kb, &pa, &pb, ny);
        }
    }
    Ok(out)
}

/// H(A|Y) for a two-axis table ordered (A, Y).
pub fn conditional_entropy(joint: &DiscreteJoint) -> Result<f64, InfoError> {
    if joint.dims.len() != 2 {
        return Err(InfoError::InvalidJoint(format!("expected 2 axes, got {}", joint.dims.len())));
    }
    Ok(joint.entropy() - joint.marginal(&[1])?.entropy())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: I(A;B) = H(A) + H(B) - H(A,B) with entropies summed directly.
    fn h(p: &[f64]) -> f64 {
        p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
    }

    #[test]
    fn entropy_values() {
        assert!((discrete_entropy(&[5, 5, 5, 5]).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert_eq!(discrete_entropy(&[0, 7, 0]).unwrap(), 0.0);
        let e = -(0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert!((discrete_entropy(&[3, 1]).unwrap() - e).abs() < 1e-15);
        assert!((e - 0.5623351446188083).abs() < 1e-15);
        assert!(matches!(discrete_entropy(&[0, 0]), Err(InfoError::EmptyDistribution)));
    }

    #[test]
    fn independence_and_identity() {
        // outer product of [1,3] and [2,2,4]
        let j = DiscreteJoint::new(vec![2, 3], vec![2, 2, 4, 6, 6, 12]).unwrap();
        assert!(mutual_information(&j).unwrap().abs() < 1e-12);
        let id = DiscreteJoint::new(vec![3, 3], vec![4, 0, 0, 0, 4, 0, 0, 0, 4]).unwrap();
        assert!((mutual_information(&id).unwrap() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_against_entropy_oracle() {
        let j = DiscreteJoint::new(vec![2, 2], vec![2, 1, 1, 2]).unwrap();
        let oracle = h(&[0.5, 0.5]) + h(&[0.5, 0.5]) - h(&[2.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 2.0 / 6.0]);
        assert!((mutual_information(&j).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 0.0566330122651324).abs() < 1e-13);
    }

    #[test]
    fn cmi_cases() {
        // A ⊥ B in each slice: slice y=0 is outer([1,1],[1,3]), y=1 outer([2,1],[1,1])
        let mut c = vec![0u64; 8];
        let put = |c: &mut Vec<u64>, a: usize, b: usize, y: usize, v: u64| c[(a * 2 + b) * 2 + y] = v;
        put(&mut c, 0, 0, 0, 1);
        put(&mut c, 0, 1, 0, 3);
        put(&mut c, 1, 0, 0, 1);
        put(&mut c, 1, 1, 0, 3);
        put(&mut c, 0, 0, 1, 2);
        put(&mut c, 0, 1, 1, 2);
        put(&mut c, 1, 0, 1, 1);
        put(&mut c, 1, 1, 1, 1);
        let j = DiscreteJoint::new(vec![2, 2, 2], c).unwrap();
        assert!(conditional_mi(&j).unwrap().abs() < 1e-12);

        let ab = DiscreteJoint::new(vec![2, 2], vec![2, 1, 1, 2]).unwrap();
        let constant_y = DiscreteJoint::new(vec![2, 2, 1], vec![2, 1, 1, 2]).unwrap();
        assert!((conditional_mi(&constant_y).unwrap() - mutual_information(&ab).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn cmi_hand_table_against_triple_sum() {
        let counts = vec![3u64, 1, 0, 2, 1, 1, 4, 2];
        let j = DiscreteJoint::new(vec![2, 2, 2], counts.clone()).unwrap();
        let n: f64 = counts.iter().sum::<u64>() as f64;
        let p = |a: usize, b: usize, y: usize| counts[(a * 2 + b) * 2 + y] as f64 / n;
        let mut oracle = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for y in 0..2 {
                    let pabc = p(a, b, y);
                    if pabc == 0.0 {
                        continue;
                    }
                    let py: f64 = (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| p(a, b, y)).sum();
                    let pay: f64 = (0..2).map(|b| p(a, b, y)).sum();
                    let pby: f64 = (0..2).map(|a| p(a, b, y)).sum();
                    oracle += pabc * (pabc * py / (pay * pby)).ln();
                }
            }
        }
        assert!((conditional_mi(&j).unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn regroup_and_codes() {
        let a = [0usize, 1, 1, 2];
        let b = [1usize, 1, 0, 0];
        let j = DiscreteJoint::from_codes(&[&a, &b]).unwrap();
        assert_eq!(j.dims(), &[3, 2]);
        assert_eq!(j.marginal(&[0]).unwrap().counts(), &[1, 2, 1]);
        let swapped = j.regroup(&[&[1], &[0]]).unwrap();
        assert_eq!(swapped.dims(), &[2, 3]);
        assert!((mutual_information(&swapped).unwrap() - mutual_information(&j).unwrap()).abs() < 1e-15);
        assert!(j.regroup(&[&[0], &[0]]).is_err());
        let hc = conditional_entropy(&j).unwrap();
        assert!((hc - (j.entropy() - discrete_entropy(&[2, 2]).unwrap())).abs() < 1e-15);
    }
}
