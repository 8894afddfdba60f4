//! RBF affinity fields.
//!
//! Each anchor `x_i` carries a diagonal covariance `Sigma_i` and contributes
//! the local affinity `exp(-1/2 (x - x_i)^T Sigma_i^{-1} (x - x_i))`. Local
//! affinities are combined by the superposition `1 - prod_i (1 - a_i)`, which
//! stays in `[0, 1]` and treats coincident anchors multiplicatively.
//!
//! The product is always accumulated in canonical (lexicographic) anchor
//! order so that results are bit-for-bit reproducible.

mod dataset;
mod field;
mod kdtree;
mod neighbors;
mod normalizer;

pub use dataset::{canonicalize, lex_cmp, Dataset};
pub use field::AffinityField;
pub use neighbors::{nn_distances, NearestDistance};
pub use normalizer::Normalizer;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// One Euclidean nearest-neighbour distance, shared by every dimension.
    #[default]
    Global,
    /// Coordinate offsets to the (globally) nearest neighbour, one per dimension.
    PerDimension,
}

impl std::str::FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(DistanceMode::Global),
            "per_dimension" | "per-dimension" => Ok(DistanceMode::PerDimension),
            other => Err(Error::InvalidConfig(format!("unknown distance mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DistanceMode::Global => "global",
            DistanceMode::PerDimension => "per_dimension",
        })
    }
}

/// Hyperparameters of the sigma estimation rule
/// `sigma = (kappa - lambda) * exp(-eta * d) + lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Largest diagonal entry, reached at `d = 0`.
    pub kappa: f64,
    /// Decay rate in the nearest-neighbour distance.
    pub eta: f64,
    /// Lower bound approached as `d` grows.
    pub lambda: f64,
    pub distance_mode: DistanceMode,
    /// Min-max normalize dimensions (fitted on ID samples) before anything else.
    pub normalize: bool,
}

impl KernelConfig {
    pub fn new(kappa: f64, eta: f64, lambda: f64) -> Self {
        Self {
            kappa,
            eta,
            lambda,
            distance_mode: DistanceMode::Global,
            normalize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.kappa, self.eta, self.lambda].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("kappa, eta and lambda must be finite".into()));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidConfig(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::InvalidConfig(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.lambda > 0.0 && self.lambda <= self.kappa) {
            return Err(Error::InvalidConfig(format!(
                "lambda must satisfy 0 < lambda <= kappa, got lambda={} kappa={}",
                self.lambda, self.kappa
            )));
        }
        Ok(())
    }
}

/// Diagonal covariance entry for an anchor whose nearest neighbour is `d_star` away.
///
/// Result lies in `[lambda, kappa]` and is non-increasing in `d_star`.
pub fn estimate_sigma(d_star: f64, cfg: &KernelConfig) -> Result<f64> {
    cfg.validate()?;
    if !(d_star >= 0.0) || !d_star.is_finite() {
        return Err(Error::InvalidInput(format!(
            "nearest-neighbour distance must be finite and >= 0, got {d_star}"
        )));
    }
    let decay = (-cfg.eta * d_star).exp();
    if decay >= 1.0 {
        return Ok(cfg.kappa);
    }
    Ok(((cfg.kappa - cfg.lambda) * decay + cfg.lambda).clamp(cfg.lambda, cfg.kappa))
}

/// One anchor of the affinity field. `center` is in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorKernel {
    pub center: Vec<f64>,
    pub sigma_diag: Vec<f64>,
}

impl AnchorKernel {
    pub fn new(center: Vec<f64>, sigma_diag: Vec<f64>) -> Result<Self> {
        let k = Self { center, sigma_diag };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.center.is_empty() {
            return Err(Error::InvalidInput("anchor has zero dimensions".into()));
        }
        check_dim(self.center.len(), &self.sigma_diag)?;
        check_finite("anchor center", &self.center)?;
        check_finite("anchor sigma", &self.sigma_diag)?;
        if let Some(s) = self.sigma_diag.iter().find(|&&s| !(s > 0.0)) {
            return Err(Error::InvalidInput(format!("sigma entries must be > 0, got {s}")));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }
}

/// `sum_k (x_k - c_k)^2 / sigma_k`, accumulated in dimension order.
#[inline]
pub(crate) fn quad_form(x: &[f64], center: &[f64], sigma: &[f64]) -> f64 {
    let mut q = 0.0;
    for k in 0..x.len() {
        let d = x[k] - center[k];
        q += d * d / sigma[k];
    }
    q
}

#[inline]
pub(crate) fn rbf(q: f64) -> f64 {
    (-0.5 * q).exp()
}

pub fn local_affinity(k: &AnchorKernel, x: &[f64]) -> Result<f64> {
    check_dim(k.dimension(), x)?;
    Ok(rbf(quad_form(x, &k.center, &k.sigma_diag)))
}

/// `1 - prod (1 - a_i)` accumulated left to right.
pub fn superpose(locals: &[f64]) -> Result<f64> {
    if let Some(a) = locals.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::InvalidInput(format!(
            "local affinity {a} outside [0, 1]"
        )));
    }
    Ok(superpose_unchecked(locals.iter().copied()))
}

#[inline]
pub(crate) fn superpose_unchecked(locals: impl IntoIterator<Item = f64>) -> f64 {
    let mut complement = 1.0;
    for a in locals {
        complement *= 1.0 - a;
    }
    1.0 - complement
}

/// Reference evaluation of the global affinity: every anchor, in the given order.
pub fn global_affinity(
    kernels: &[AnchorKernel],
    norm: Option<&Normalizer>,
    x: &[f64],
) -> Result<f64> {
    let Some(first) = kernels.first() else {
        return Ok(0.0);
    };
    let dim = first.dimension();
    check_dim(dim, x)?;
    let (xq, centers) = to_eval_space(kernels, norm, x)?;
    Ok(superpose_unchecked(
        kernels
            .iter()
            .zip(&centers)
            .map(|(k, c)| rbf(quad_form(&xq, c, &k.sigma_diag))),
    ))
}

/// Analytic gradient of [`global_affinity`] with respect to `x` (original units).
pub fn affinity_gradient(
    kernels: &[AnchorKernel],
    norm: Option<&Normalizer>,
    x: &[f64],
) -> Result<Vec<f64>> {
    let Some(first) = kernels.first() else {
        return Ok(vec![0.0; x.len()]);
    };
    let dim = first.dimension();
    check_dim(dim, x)?;
    let (xq, centers) = to_eval_space(kernels, norm, x)?;
    let locals: Vec<f64> = kernels
        .iter()
        .zip(&centers)
        .map(|(k, c)| rbf(quad_form(&xq, c, &k.sigma_diag)))
        .collect();

    // prod_{j != i} (1 - a_j) without dividing by (1 - a_i), which may be 0
    let m = locals.len();
    let mut suffix = vec![1.0; m + 1];
    for i in (0..m).rev() {
        suffix[i] = suffix[i + 1] * (1.0 - locals[i]);
    }
    let mut grad = vec![0.0; dim];
    let mut prefix = 1.0;
    for i in 0..m {
        let weight = prefix * suffix[i + 1] * locals[i];
        if weight != 0.0 {
            let sigma = &kernels[i].sigma_diag;
            for k in 0..dim {
                grad[k] += weight * (centers[i][k] - xq[k]) / sigma[k];
            }
        }
        prefix *= 1.0 - locals[i];
    }
    if let Some(norm) = norm {
        for (g, s) in grad.iter_mut().zip(norm.scales()) {
            *g /= s;
        }
    }
    Ok(grad)
}

fn to_eval_space(
    kernels: &[AnchorKernel],
    norm: Option<&Normalizer>,
    x: &[f64],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let dim = x.len();
    for k in kernels {
        check_dim(dim, &k.center)?;
    }
    match norm {
        None => Ok((x.to_vec(), kernels.iter().map(|k| k.center.clone()).collect())),
        Some(n) => {
            check_dim(n.dimension(), x)?;
            Ok((
                n.apply(x),
                kernels.iter().map(|k| n.apply(&k.center)).collect(),
            ))
        }
    }
}
