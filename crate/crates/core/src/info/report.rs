use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compress::{compression_ratio, CODEC};
use super::estimate::{bin_view, codes_mi, normalized_codes_cmi, BinnedView};
use super::silhouette::silhouette;
use super::InfoError;
use crate::autograd::Tensor;

/// Rows used for the silhouette term; larger inputs are subsampled with a fixed stride.
pub const SILHOUETTE_MAX_ROWS: usize = 5000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportOptions {
    pub pca_k: usize,
    pub bins: usize,
    pub silhouette: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { pca_k: 3, bins: 8, silhouette: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub n: usize,
    pub pca_k: usize,
    pub bins: usize,
    pub log_base: String,
    pub normalizer: String,
    pub codec: String,
    pub pca_k_used: Vec<usize>,
    pub occupied_cells: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedundancyReport {
    pub layer_names: Vec<String>,
    pub pairwise_cmi: Vec<Vec<f64>>,
    pub task_relevance: Vec<f64>,
    pub compression_ratio: Vec<f64>,
    pub silhouette: Option<f64>,
    pub metadata: ReportMetadata,
}

/// Every per-layer and pairwise measure for a set of named matrices sharing rows.
pub fn redundancy_report(
    views: &[(String, Tensor)],
    y: &[usize],
    options: &ReportOptions,
) -> Result<RedundancyReport, InfoError> {
    if views.is_empty() {
        return Err(InfoError::NoViews);
    }
    let n = y.len();
    if let Some((_, v)) = views.iter().find(|(_, v)| v.rows() != n) {
        return Err(InfoError::LengthMismatch { rows: v.rows(), labels: n });
    }
    let binned: Vec<BinnedView> = views
        .par_iter()
        .map(|(_, x)| bin_view(x, options.pca_k, options.bins))
        .collect::<Result<_, _>>()?;
    let m = views.len();
    let task_relevance = binned.iter().map(|b| codes_mi(&b.codes, y)).collect::<Result<Vec<_>, _>>()?;
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| normalized_codes_cmi(&binned[i].codes, &binned[j].codes, y))
        .collect::<Result<_, _>>()?;
    let mut pairwise_cmi = vec![vec![0.0; m]; m];
    for (i, row) in pairwise_cmi.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        pairwise_cmi[i][j] = v;
        pairwise_cmi[j][i] = v;
    }
    let compression_ratio: Vec<f64> = views
        .par_iter()
        .map(|(_, x)| compression_ratio(&x.data().iter().map(|&v| v as f32).collect::<Vec<_>>()))
        .collect();

    let mut warnings = Vec::new();
    for ((name, _), b) in views.iter().zip(&binned) {
        if b.k_used < options.pca_k {
            warnings.push(format!("{name}: PCA rank {} below requested {}", b.k_used, options.pca_k));
        }
        if n < 10 * b.cells {
            warnings.push(format!("{name}: {n} rows for {} occupied cells", b.cells));
        }
    }
    let classes = {
        let mut c = y.to_vec();
        c.sort_unstable();
        c.dedup();
        c.len()
    };
    let silhouette = if options.silhouette && classes >= 2 {
        let refs: Vec<&Tensor> = views.iter().map(|(_, x)| x).collect();
        let all = Tensor::hcat(&refs).map_err(|e| InfoError::InvalidJoint(e.to_string()))?;
        let (pts, labels) = if n > SILHOUETTE_MAX_ROWS {
            let idx: Vec<usize> = (0..SILHOUETTE_MAX_ROWS).map(|i| i * n / SILHOUETTE_MAX_ROWS).collect();
            warnings.push(format!("silhouette on {} of {n} rows", idx.len()));
            (all.select_rows(&idx), idx.iter().map(|&i| y[i]).collect())
        } else {
            (all, y.to_vec())
        };
        Some(silhouette(&pts, &labels)?)
    } else {
        None
    };
    Ok(RedundancyReport {
        layer_names: views.iter().map(|(n, _)| n.clone()).collect(),
        pairwise_cmi,
        task_relevance,
        compression_ratio,
        silhouette,
        metadata: ReportMetadata {
            n,
            pca_k: options.pca_k,
            bins: options.bins,
            log_base: "e".into(),
            normalizer: "min(H(code_i|Y), H(code_j|Y))".into(),
            codec: CODEC.into(),
            pca_k_used: binned.iter().map(|b| b.k_used).collect(),
            occupied_cells: binned.iter().map(|b| b.cells).collect(),
            warnings,
        },
    })
}

impl RedundancyReport {
    pub fn write_json(&self, path: &Path) -> Result<(), InfoError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Heatmap matrix plus per-layer columns.
    pub fn write_csv(&self, path: &Path) -> Result<(), InfoError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| InfoError::Csv(e.to_string()))?;
        let mut header = vec!["layer".to_string()];
        header.extend(self.layer_names.iter().cloned());
        header.extend(["task_relevance".to_string(), "compression_ratio".to_string()]);
        w.write_record(&header).map_err(|e| InfoError::Csv(e.to_string()))?;
        for (i, name) in self.layer_names.iter().enumerate() {
            let mut rec = vec![name.clone()];
            rec.extend(self.pairwise_cmi[i].iter().map(|v| v.to_string()));
            rec.push(self.task_relevance[i].to_string());
            rec.push(self.compression_ratio[i].to_string());
            w.write_record(&rec).map_err(|e| InfoError::Csv(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy_copies(shared: &[u8], flip: f64, rng: &mut ChaCha8Rng) -> Tensor {
        // bit 0 of the shared value three times, bit 1 twice, one noise bit
        let n = shared.len();
        let mut data = Vec::with_capacity(n * 6);
        for &s in shared {
            let a = ((s & 1) ^ rng.gen_bool(flip) as u8) as f64;
            let b = ((s >> 1) ^ rng.gen_bool(flip) as u8) as f64;
            data.extend([a, a, a, b, b, rng.gen_range(0..2) as f64]);
        }
        Tensor::from_vec(n, 6, data).unwrap()
    }

    #[test]
    fn single_view_report_is_unit_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::from_vec(50, 2, (0..100).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let y: Vec<usize> = (0..50).map(|i| i % 2).collect();
        let r = redundancy_report(&[("L3".into(), x)], &y, &ReportOptions::default()).unwrap();
        assert_eq!(r.pairwise_cmi, vec![vec![1.0]]);
        assert!(r.silhouette.is_some());
    }

    #[test]
    fn shared_latent_raises_cross_view_cmi() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 3000;
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        // shared latent independent of y, so it shows up in I(Xi;Xj|Y)
        let s: Vec<u8> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let views: Vec<(String, Tensor)> =
            (0..3).map(|i| (format!("v{i}"), noisy_copies(&s, 0.05, &mut rng))).collect();
        let indep: Vec<(String, Tensor)> = (0..3)
            .map(|i| {
                let own: Vec<u8> = (0..n).map(|_| rng.gen_range(0..4)).collect();
                (format!("v{i}"), noisy_copies(&own, 0.05, &mut rng))
            })
            .collect();
        let opts = ReportOptions { pca_k: 2, bins: 4, silhouette: false };
        let a = redundancy_report(&views, &y, &opts).unwrap();
        let b = redundancy_report(&indep, &y, &opts).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(a.pairwise_cmi[i][j] > b.pairwise_cmi[i][j] + 0.2, "{:?} {:?}", a.pairwise_cmi, b.pairwise_cmi);
                    assert_eq!(a.pairwise_cmi[i][j], a.pairwise_cmi[j][i]);
                }
            }
        }
    }

    #[test]
    fn row_shuffle_leaves_information_terms_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 600;
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let yb: Vec<u8> = y.iter().map(|&v| v as u8).collect();
        let views: Vec<(String, Tensor)> =
            (0..2).map(|i| (format!("v{i}"), noisy_copies(&yb, 0.1, &mut rng))).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let shuffled: Vec<(String, Tensor)> = views.iter().map(|(k, v)| (k.clone(), v.select_rows(&perm))).collect();
        let y2: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        let opts = ReportOptions::default();
        let a = redundancy_report(&views, &y, &opts).unwrap();
        let b = redundancy_report(&shuffled, &y2, &opts).unwrap();
        assert_eq!(a.pairwise_cmi, b.pairwise_cmi);
        assert_eq!(a.task_relevance, b.task_relevance);
        assert!((a.silhouette.unwrap() - b.silhouette.unwrap()).abs() < 1e-12);
        for (x, z) in a.compression_ratio.iter().zip(&b.compression_ratio) {
            assert!((x - z).abs() / x < 0.05);
        }
    }

    #[test]
    fn report_files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let x = Tensor::from_vec(20, 1, (0..20).map(|i| (i % 3) as f64).collect()).unwrap();
        let y: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let r = redundancy_report(&[("a".into(), x.clone()), ("b".into(), x)], &y, &ReportOptions::default()).unwrap();
        r.write_json(&dir.path().join("r.json")).unwrap();
        r.write_csv(&dir.path().join("r.csv")).unwrap();
        let back: RedundancyReport =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
        assert_eq!(back, r);
        let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert!(csv.starts_with("layer,a,b,task_relevance,compression_ratio"));
    }
}
