use super::{estimate_sigma, DistanceMode, KernelConfig};
use crate::error::Result;

/// Distance from one point to its nearest other point.
#[derive(Debug, Clone, PartialEq)]
pub enum NearestDistance {
    Global(f64),
    /// `|x_k - nn_k|` for the globally nearest neighbour `nn`.
    PerDimension(Vec<f64>),
}

impl NearestDistance {
    /// Sigma diagonal for a kernel of dimension `dim`.
    pub fn sigma_diag(&self, dim: usize, cfg: &KernelConfig) -> Result<Vec<f64>> {
        match self {
            NearestDistance::Global(d) => Ok(vec![estimate_sigma(*d, cfg)?; dim]),
            NearestDistance::PerDimension(ds) => ds.iter().map(|&d| estimate_sigma(d, cfg)).collect(),
        }
    }
}

/// Exact brute-force nearest neighbours (self excluded by index).
///
/// Ties go to the lowest index. A lone point gets distance 0.
pub fn nn_distances(points: &[Vec<f64>], mode: DistanceMode) -> Vec<NearestDistance> {
    let m = points.len();
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); m];
    for i in 0..m {
        let pi = &points[i];
        for j in i + 1..m {
            let d2: f64 = pi
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            // candidates reach every point in ascending index order, so a
            // strict comparison keeps the lowest index on ties
            if d2 < best[i].0 {
                best[i] = (d2, j);
            }
            if d2 < best[j].0 {
                best[j] = (d2, i);
            }
        }
    }
    best.iter()
        .enumerate()
        .map(|(i, &(d2, nn))| {
            let dim = points[i].len();
            match (mode, nn) {
                (DistanceMode::Global, usize::MAX) => NearestDistance::Global(0.0),
                (DistanceMode::Global, _) => NearestDistance::Global(d2.sqrt()),
                (DistanceMode::PerDimension, usize::MAX) => {
                    NearestDistance::PerDimension(vec![0.0; dim])
                }
                (DistanceMode::PerDimension, nn) => NearestDistance::PerDimension(
                    points[i]
                        .iter()
                        .zip(&points[nn])
                        .map(|(a, b)| (a - b).abs())
                        .collect(),
                ),
            }
        })
        .collect()
}
