use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

/// Per-dimension min-max scaling `x' = (x - offset) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    offsets: Vec<f64>,
    scales: Vec<f64>,
}

impl Normalizer {
    /// Fits offsets (minimum) and scales (range, 1 where the range is 0).
    pub fn fit(points: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::EmptyIdSet);
        };
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in points {
            check_dim(lo.len(), p)?;
            check_finite("normalizer input", p)?;
            for k in 0..p.len() {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let scales = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| {
                let r = h - l;
                if r > 0.0 && r.is_finite() {
                    r
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self {
            offsets: lo,
            scales,
        })
    }

    pub fn from_parts(offsets: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        let n = Self { offsets, scales };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.offsets.len(), &self.scales)?;
        check_finite("normalizer offsets", &self.offsets)?;
        check_finite("normalizer scales", &self.scales)?;
        if let Some(s) = self.scales.iter().find(|&&s| !(s > 0.0)) {
            return Err(Error::InvalidInput(format!("normalizer scale {s} is not positive")));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.offsets.iter().zip(&self.scales))
            .map(|(v, (o, s))| (v - o) / s)
            .collect()
    }

    pub fn invert(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.offsets.iter().zip(&self.scales))
            .map(|(v, (o, s))| v * s + o)
            .collect()
    }
}
