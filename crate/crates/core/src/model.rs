//! The persisted kernel ODD: anchors, thresholds and provenance.
//!
//! Model files are pretty-printed JSON with a fixed key order. Reals are
//! written in shortest round-trip form and parsed back exactly, so
//! `load(save(m)) == m` bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::derivation::DerivationConfig;
use crate::error::{Error, Result};
use crate::kernel::{
    affinity_gradient, lex_cmp, AffinityField, AnchorKernel, Dataset, DistanceMode, KernelConfig,
    Normalizer,
};

pub const FORMAT_VERSION: &str = "1";
pub const KERNEL_TYPE: &str = "rbf";

/// Hyperparameters recorded alongside the anchors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kappa: f64,
    pub eta: f64,
    pub lambda: f64,
    pub distance_mode: DistanceMode,
    pub shrink_factor: f64,
    pub max_shrink_iters: usize,
    pub max_passes: usize,
    pub shrink_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMetadata {
    pub kernel_type: String,
    pub dimension: usize,
    pub config: ModelConfig,
    pub dimension_names: Option<Vec<String>>,
    /// SHA-256 over the canonical samples and the derivation config.
    pub dataset_digest: String,
    pub format_version: String,
}

/// Result of a membership query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub affinity: f64,
    pub inside: bool,
}

/// A derived kernel ODD `(alpha, zeta)`. Immutable once built.
pub struct KernelOdd {
    kernels: Vec<AnchorKernel>,
    zeta: f64,
    xi: f64,
    normalizer: Option<Normalizer>,
    metadata: ModelMetadata,
    field: AffinityField,
}

impl std::fmt::Debug for KernelOdd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelOdd")
            .field("anchors", &self.kernels.len())
            .field("zeta", &self.zeta)
            .field("xi", &self.xi)
            .field("metadata", &self.metadata)
            .finish()
    }
}

impl PartialEq for KernelOdd {
    fn eq(&self, other: &Self) -> bool {
        self.kernels == other.kernels
            && self.zeta.to_bits() == other.zeta.to_bits()
            && self.xi.to_bits() == other.xi.to_bits()
            && self.normalizer == other.normalizer
            && self.metadata == other.metadata
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: String,
    kernel_type: String,
    dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dimension_names: Option<Vec<String>>,
    zeta: f64,
    xi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalizer: Option<Normalizer>,
    config: ModelConfig,
    anchors: Vec<AnchorKernel>,
    dataset_digest: String,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<serde_json::Value>,
}

impl KernelOdd {
    pub(crate) fn from_derivation(
        kernels: Vec<AnchorKernel>,
        normalizer: Option<Normalizer>,
        canonical: &Dataset,
        cfg: &DerivationConfig,
    ) -> Result<Self> {
        let metadata = ModelMetadata {
            kernel_type: KERNEL_TYPE.into(),
            dimension: canonical.dimension,
            config: ModelConfig::from(cfg),
            dimension_names: canonical.dimension_names.clone(),
            dataset_digest: dataset_digest(canonical, cfg),
            format_version: FORMAT_VERSION.into(),
        };
        Self::assemble(kernels, cfg.zeta, cfg.xi, normalizer, metadata)
    }

    fn assemble(
        kernels: Vec<AnchorKernel>,
        zeta: f64,
        xi: f64,
        normalizer: Option<Normalizer>,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        let field = AffinityField::new(&kernels, normalizer.clone())
            .map_err(|e| Error::InvalidModel(e.to_string()))?;
        let model = Self {
            kernels,
            zeta,
            xi,
            normalizer,
            metadata,
            field,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        let md = &self.metadata;
        if md.kernel_type != KERNEL_TYPE {
            return bad(format!("unsupported kernel type {:?}", md.kernel_type));
        }
        if md.dimension == 0 {
            return bad("dimension must be >= 1".into());
        }
        if self.kernels.is_empty() {
            return bad("model has no anchors".into());
        }
        for (i, k) in self.kernels.iter().enumerate() {
            if k.center.len() != md.dimension || k.sigma_diag.len() != md.dimension {
                return bad(format!("anchor {i} does not have dimension {}", md.dimension));
            }
            k.validate()
                .map_err(|e| Error::InvalidModel(format!("anchor {i}: {e}")))?;
        }
        if let Some(i) = self
            .kernels
            .windows(2)
            .position(|w| lex_cmp(&w[0].center, &w[1].center).is_gt())
        {
            return bad(format!("anchors {i} and {} are not in canonical order", i + 1));
        }
        self.derivation_config()
            .validate()
            .map_err(|e| Error::InvalidModel(e.to_string()))?;
        if let Some(n) = &self.normalizer {
            n.validate().map_err(|e| Error::InvalidModel(format!("normalizer: {e}")))?;
            if n.dimension() != md.dimension {
                return bad("normalizer dimension does not match".into());
            }
        }
        if let Some(names) = &md.dimension_names {
            if names.len() != md.dimension {
                return bad("dimension_names length does not match".into());
            }
        }
        if md.dataset_digest.len() != 64 || !md.dataset_digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return bad("dataset_digest is not a SHA-256 hex digest".into());
        }
        Ok(())
    }

    pub fn kernels(&self) -> &[AnchorKernel] {
        &self.kernels
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn normalizer(&self) -> Option<&Normalizer> {
        self.normalizer.as_ref()
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    pub fn dimension(&self) -> usize {
        self.metadata.dimension
    }

    /// The configuration this model was derived with.
    pub fn derivation_config(&self) -> DerivationConfig {
        let c = &self.metadata.config;
        DerivationConfig {
            kernel: KernelConfig {
                kappa: c.kappa,
                eta: c.eta,
                lambda: c.lambda,
                distance_mode: c.distance_mode,
                normalize: self.normalizer.is_some(),
            },
            zeta: self.zeta,
            xi: self.xi,
            shrink_factor: c.shrink_factor,
            max_shrink_iters: c.max_shrink_iters,
            max_passes: c.max_passes,
            shrink_floor: c.shrink_floor,
        }
    }

    /// True if `ds` (with this model's config) hashes to the stored digest.
    pub fn verify_digest(&self, ds: &Dataset) -> bool {
        dataset_digest(&ds.canonicalize(), &self.derivation_config()) == self.metadata.dataset_digest
    }

    pub fn affinity(&self, x: &[f64]) -> Result<f64> {
        self.field.affinity(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        affinity_gradient(&self.kernels, self.normalizer.as_ref(), x)
    }

    /// Inside iff `affinity >= zeta`.
    pub fn is_inside(&self, x: &[f64]) -> Result<Membership> {
        let affinity = self.field.affinity(x)?;
        Ok(Membership {
            affinity,
            inside: affinity >= self.zeta,
        })
    }

    pub fn affinity_band(&self, x: &[f64], bands: &[f64]) -> Result<usize> {
        validate_bands(bands)?;
        Ok(band_index(self.affinity(x)?, bands))
    }

    /// Batch membership; order-preserving, parallel across points.
    pub fn score_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Membership>> {
        Ok(self
            .field
            .affinities(xs)?
            .into_iter()
            .map(|affinity| Membership {
                affinity,
                inside: affinity >= self.zeta,
            })
            .collect())
    }

    /// Affinities only; see [`KernelOdd::score_batch`].
    pub fn affinities(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.field.affinities(xs)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: self.metadata.format_version.clone(),
            kernel_type: self.metadata.kernel_type.clone(),
            dimension: self.metadata.dimension,
            dimension_names: self.metadata.dimension_names.clone(),
            zeta: self.zeta,
            xi: self.xi,
            normalizer: self.normalizer.clone(),
            config: self.metadata.config,
            anchors: self.kernels.clone(),
            dataset_digest: self.metadata.dataset_digest.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model values are finite");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let located = |e: serde_json::Error| {
            Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
        };
        let probe: VersionProbe = serde_json::from_str(text).map_err(located)?;
        match probe.format_version {
            Some(serde_json::Value::String(v)) if v == FORMAT_VERSION => {}
            Some(other) => {
                let found = match other {
                    serde_json::Value::String(s) => s,
                    v => v.to_string(),
                };
                return Err(Error::IncompatibleVersion {
                    found,
                    supported: FORMAT_VERSION.into(),
                });
            }
            None => return Err(Error::parse("top level", "missing format_version")),
        }
        let file: ModelFile = serde_json::from_str(text).map_err(located)?;
        let metadata = ModelMetadata {
            kernel_type: file.kernel_type,
            dimension: file.dimension,
            config: file.config,
            dimension_names: file.dimension_names,
            dataset_digest: file.dataset_digest,
            format_version: file.format_version,
        };
        Self::assemble(file.anchors, file.zeta, file.xi, file.normalizer, metadata)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { location, message } => Error::Parse {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })
    }
}

impl From<&DerivationConfig> for ModelConfig {
    fn from(cfg: &DerivationConfig) -> Self {
        Self {
            kappa: cfg.kernel.kappa,
            eta: cfg.kernel.eta,
            lambda: cfg.kernel.lambda,
            distance_mode: cfg.kernel.distance_mode,
            shrink_factor: cfg.shrink_factor,
            max_shrink_iters: cfg.max_shrink_iters,
            max_passes: cfg.max_passes,
            shrink_floor: cfg.shrink_floor,
        }
    }
}

pub fn validate_bands(bands: &[f64]) -> Result<()> {
    if let Some(b) = bands.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(Error::InvalidInput(format!("band boundary {b} outside [0, 1]")));
    }
    if bands.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("band boundaries must be strictly increasing".into()));
    }
    Ok(())
}

/// Number of band boundaries at or below `affinity`.
pub fn band_index(affinity: f64, bands: &[f64]) -> usize {
    bands.partition_point(|&b| b <= affinity)
}

/// SHA-256 over a canonical dataset and the config it was derived with.
pub fn dataset_digest(canonical: &Dataset, cfg: &DerivationConfig) -> String {
    let mut h = Sha256::new();
    h.update(b"oddforge-dataset-v1\0");
    h.update((canonical.dimension as u64).to_le_bytes());
    for set in [&canonical.id_samples, &canonical.ood_samples] {
        h.update((set.len() as u64).to_le_bytes());
        for p in set {
            for v in p {
                h.update(v.to_bits().to_le_bytes());
            }
        }
    }
    let k = &cfg.kernel;
    for v in [
        k.kappa,
        k.eta,
        k.lambda,
        cfg.zeta,
        cfg.xi,
        cfg.shrink_factor,
        cfg.shrink_floor,
    ] {
        h.update(v.to_bits().to_le_bytes());
    }
    h.update([
        matches!(k.distance_mode, DistanceMode::PerDimension) as u8,
        k.normalize as u8,
    ]);
    h.update((cfg.max_shrink_iters as u64).to_le_bytes());
    h.update((cfg.max_passes as u64).to_le_bytes());
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivation::derive;

    fn single_anchor(zeta: f64) -> KernelOdd {
        // kappa = 1 and a lone anchor gives sigma = kappa = 1
        let ds = Dataset::new(1, vec![vec![0.0]], vec![]).unwrap();
        let cfg = DerivationConfig::new(KernelConfig::new(1.0, 1.0, 0.1), zeta, 0.1);
        derive(&ds, &cfg).unwrap().0
    }

    #[test]
    fn membership_examples() {
        let m = single_anchor(0.5);
        assert_eq!(m.is_inside(&[0.0]).unwrap(), Membership { affinity: 1.0, inside: true });
        let q = m.is_inside(&[1.0]).unwrap();
        assert!(q.inside);
        assert!((q.affinity - 0.606_530_659_712_633_4).abs() <= 1e-12);
        let strict = single_anchor(0.7);
        let q = strict.is_inside(&[1.0]).unwrap();
        assert!(!q.inside);
        assert!(m.is_inside(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn band_examples() {
        let m = single_anchor(0.5);
        let bands = [0.2, 0.5, 0.8];
        assert_eq!(m.affinity_band(&[0.0], &bands).unwrap(), 3);
        assert_eq!(m.affinity_band(&[1.0], &bands).unwrap(), 2);
        assert_eq!(m.affinity_band(&[100.0], &bands).unwrap(), 0);
        assert!(m.affinity_band(&[0.0], &[0.5, 0.2]).is_err());
        assert!(m.affinity_band(&[0.0], &[0.5, 0.5]).is_err());
        assert!(m.affinity_band(&[0.0], &[1.5]).is_err());
        assert_eq!(band_index(0.5, &bands), 2);
    }

    #[test]
    fn batch_scoring() {
        let m = single_anchor(0.5);
        assert!(m.score_batch(&[]).unwrap().is_empty());
        let out = m.score_batch(&[vec![0.0], vec![1e3]]).unwrap();
        assert_eq!(out[0], Membership { affinity: 1.0, inside: true });
        assert_eq!(out[1].affinity, 0.0);
        assert!(!out[1].inside);
        let err = m.score_batch(&[vec![0.0], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::RowDimensionMismatch { row: 1, .. }));
    }

    #[test]
    fn json_round_trip() {
        let ds = Dataset::new(2, vec![vec![0.1, 0.7], vec![1.0 / 3.0, 2.0], vec![-4.0, 1e-7]], vec![])
            .unwrap()
            .with_names(vec!["h".into(), "tau".into()])
            .unwrap();
        let mut cfg = DerivationConfig::new(KernelConfig::new(1.0, 0.5, 0.05), 0.5, 0.1);
        cfg.kernel.normalize = true;
        let (m, _) = derive(&ds, &cfg).unwrap();
        let text = m.to_json();
        let back = KernelOdd::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
        assert!(m.verify_digest(&ds));
    }

    #[test]
    fn key_order_is_fixed() {
        let text = single_anchor(0.5).to_json();
        let keys = [
            "\"format_version\"",
            "\"kernel_type\"",
            "\"dimension\"",
            "\"zeta\"",
            "\"xi\"",
            "\"config\"",
            "\"anchors\"",
            "\"dataset_digest\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_other_versions() {
        let text = single_anchor(0.5).to_json().replace("\"format_version\": \"1\"", "\"format_version\": \"99\"");
        let err = KernelOdd::from_json(&text).unwrap_err();
        assert!(matches!(err, Error::IncompatibleVersion { ref found, .. } if found == "99"));
    }

    #[test]
    fn rejects_zero_sigma() {
        let m = single_anchor(0.5);
        let text = m.to_json();
        let tampered = text.replacen("\"sigma_diag\": [\n        1.0\n      ]", "\"sigma_diag\": [\n        0.0\n      ]", 1);
        assert_ne!(tampered, text);
        assert!(matches!(KernelOdd::from_json(&tampered), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn rejects_malformed_and_non_finite() {
        let err = KernelOdd::from_json("{\"format_version\": \"1\", \"zeta\": ").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let text = single_anchor(0.5).to_json().replacen("\"zeta\": 0.5", "\"zeta\": NaN", 1);
        assert!(matches!(KernelOdd::from_json(&text), Err(Error::Parse { .. })));
        let text = single_anchor(0.5).to_json().replacen("\"zeta\": 0.5", "\"zeta\": 1e999", 1);
        assert!(KernelOdd::from_json(&text).is_err());
    }

    #[test]
    fn rejects_non_canonical_anchor_order() {
        let ds = Dataset::new(1, vec![vec![0.0], vec![2.0]], vec![]).unwrap();
        let cfg = DerivationConfig::new(KernelConfig::new(1.0, 1.0, 0.1), 0.5, 0.1);
        let m = derive(&ds, &cfg).unwrap().0;
        let text = m.to_json();
        let swapped = text
            .replacen("\"center\": [\n        0.0", "\"center\": [\n        TMP", 1)
            .replacen("\"center\": [\n        2.0", "\"center\": [\n        0.0", 1)
            .replacen("TMP", "2.0", 1);
        assert_ne!(swapped, text);
        assert!(matches!(KernelOdd::from_json(&swapped), Err(Error::InvalidModel(_))));
    }
}
