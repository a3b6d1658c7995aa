use rayon::prelude::*;
use rstar::primitives::GeomWithData;
use rstar::RTree;

use super::PointCloud;

pub const DEFAULT_K: usize = 8;
pub const DEFAULT_STD_RATIO: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub cloud: PointCloud,
    pub mask: Vec<bool>,
    /// Set when the cloud had too few points (fewer than k + 1) to filter.
    pub skipped: bool,
}

impl FilterOutcome {
    pub fn kept_indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Statistical outlier removal: a point is dropped when the mean distance to
/// its `k` nearest neighbours exceeds `mean + std_ratio * std` of that
/// statistic over the whole cloud.
pub fn filter_outliers(cloud: &PointCloud, k: usize, std_ratio: f64) -> FilterOutcome {
    let k = k.max(1);
    let n = cloud.len();
    if n < k + 1 {
        return FilterOutcome {
            cloud: cloud.clone(),
            mask: vec![true; n],
            skipped: true,
        };
    }

    let pts = &cloud.points;
    let tree = RTree::bulk_load(
        pts.iter()
            .enumerate()
            .map(|(i, p)| GeomWithData::new([p.x, p.y, p.z], i))
            .collect(),
    );
    let mean_knn: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = pts[i];
            let mut d: Vec<f64> = tree
                .nearest_neighbor_iter(&[p.x, p.y, p.z])
                .filter(|g| g.data != i)
                .take(k)
                .map(|g| (p - pts[g.data]).norm())
                .collect();
            d.sort_by(f64::total_cmp);
            d.iter().sum::<f64>() / k as f64
        })
        .collect();

    let mean = mean_knn.iter().sum::<f64>() / n as f64;
    let var = mean_knn.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
    let threshold = mean + std_ratio * var.sqrt();

    let mask: Vec<bool> = mean_knn.iter().map(|&d| d <= threshold).collect();
    let keep: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    FilterOutcome {
        cloud: cloud.select(&keep),
        mask,
        skipped: false,
    }
}
