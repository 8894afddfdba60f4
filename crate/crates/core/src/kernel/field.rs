use rayon::prelude::*;

use super::kdtree::KdTree;
use super::{quad_form, rbf, AnchorKernel, Normalizer};
use crate::error::{check_dim, Error, Result};

/// Anchors farther than `sqrt(PRUNE_Q * sigma_max)` have `q >= PRUNE_Q`, so
/// their local affinity is below `exp(-40) < 2^-54` and `1 - a` rounds to
/// exactly 1.0. Skipping them leaves the product bit-identical.
const PRUNE_Q: f64 = 80.0;

/// Below this many anchors the index does not pay for itself.
const INDEX_MIN_ANCHORS: usize = 64;

/// Evaluation-ready affinity field: normalized centers, sigmas and an
/// optional spatial index. Evaluates exactly the same floating-point
/// expression as [`super::global_affinity`].
pub struct AffinityField {
    dim: usize,
    centers: Vec<f64>,
    sigmas: Vec<f64>,
    normalizer: Option<Normalizer>,
    index: Option<KdTree>,
    cutoff2: f64,
}

impl AffinityField {
    /// `kernels` must already be in canonical order.
    pub fn new(kernels: &[AnchorKernel], normalizer: Option<Normalizer>) -> Result<Self> {
        let Some(first) = kernels.first() else {
            return Err(Error::InvalidInput("affinity field needs at least one anchor".into()));
        };
        let dim = first.dimension();
        if let Some(n) = &normalizer {
            check_dim(dim, n.offsets())?;
        }
        let mut centers = Vec::with_capacity(dim * kernels.len());
        let mut sigmas = Vec::with_capacity(dim * kernels.len());
        for k in kernels {
            k.validate()?;
            check_dim(dim, &k.center)?;
            match &normalizer {
                Some(n) => centers.extend(n.apply(&k.center)),
                None => centers.extend_from_slice(&k.center),
            }
            sigmas.extend_from_slice(&k.sigma_diag);
        }
        let sigma_max = sigmas.iter().copied().fold(0.0, f64::max);
        let index = (kernels.len() >= INDEX_MIN_ANCHORS).then(|| KdTree::build(&centers, dim));
        Ok(Self {
            dim,
            centers,
            sigmas,
            normalizer,
            index,
            cutoff2: PRUNE_Q * sigma_max,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sigmas.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn normalizer(&self) -> Option<&Normalizer> {
        self.normalizer.as_ref()
    }

    fn to_eval(&self, x: &[f64]) -> Vec<f64> {
        match &self.normalizer {
            Some(n) => n.apply(x),
            None => x.to_vec(),
        }
    }

    fn local(&self, i: usize, xq: &[f64]) -> f64 {
        let r = i * self.dim..(i + 1) * self.dim;
        rbf(quad_form(xq, &self.centers[r.clone()], &self.sigmas[r]))
    }

    /// Global affinity at `x` (original units).
    pub fn affinity(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        let mut scratch = Vec::new();
        Ok(self.affinity_with(&self.to_eval(x), &mut scratch))
    }

    fn affinity_with(&self, xq: &[f64], scratch: &mut Vec<usize>) -> f64 {
        let mut complement = 1.0;
        match &self.index {
            Some(tree) => {
                scratch.clear();
                tree.ball_candidates(xq, self.cutoff2, scratch);
                scratch.sort_unstable();
                for &i in scratch.iter() {
                    complement *= 1.0 - self.local(i, xq);
                }
            }
            None => {
                for i in 0..self.len() {
                    complement *= 1.0 - self.local(i, xq);
                }
            }
        }
        1.0 - complement
    }

    /// Affinity over every anchor without the index.
    pub fn affinity_exhaustive(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        let xq = self.to_eval(x);
        let mut complement = 1.0;
        for i in 0..self.len() {
            complement *= 1.0 - self.local(i, &xq);
        }
        Ok(1.0 - complement)
    }

    /// Every anchor's local affinity at `x`, in canonical order.
    pub fn local_affinities(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x)?;
        let xq = self.to_eval(x);
        Ok((0..self.len()).map(|i| self.local(i, &xq)).collect())
    }

    /// Batch evaluation; parallel across points, each point evaluated serially.
    pub fn affinities(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if let Some((row, x)) = xs.iter().enumerate().find(|(_, x)| x.len() != self.dim) {
            return Err(Error::RowDimensionMismatch {
                row,
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(xs
            .par_iter()
            .map_init(Vec::new, |scratch, x| self.affinity_with(&self.to_eval(x), scratch))
            .collect())
    }
}
