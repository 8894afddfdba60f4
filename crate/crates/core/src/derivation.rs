//! Kernel-based ODD derivation from labeled samples.
//!
//! 1. Every ID sample becomes an anchor (after canonical sorting).
//! 2. Each anchor's sigma diagonal comes from its nearest-neighbour distance.
//! 3. OOD samples are visited in canonical order; while one has affinity
//!    above `xi`, the anchor with the largest local affinity there has its
//!    whole sigma diagonal multiplied by `shrink_factor`.
//!
//! Shrinking a kernel lowers its local affinity everywhere except at its own
//! center, so fixing one OOD sample never breaks an earlier one and anchors
//! keep affinity exactly 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    canonicalize, nn_distances, quad_form, rbf, superpose_unchecked, AnchorKernel, Dataset, KernelConfig, Normalizer,
};
use crate::model::KernelOdd;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivationConfig {
    pub kernel: KernelConfig,
    /// Membership threshold: inside iff affinity >= zeta.
    pub zeta: f64,
    /// Largest affinity tolerated at any OOD sample.
    pub xi: f64,
    pub shrink_factor: f64,
    /// Shrink steps allowed for one OOD sample within one pass.
    pub max_shrink_iters: usize,
    pub max_passes: usize,
    /// Sigma entries never shrink below this.
    pub shrink_floor: f64,
}

impl DerivationConfig {
    pub const DEFAULT_SHRINK_FACTOR: f64 = 0.5;
    pub const DEFAULT_MAX_SHRINK_ITERS: usize = 200;
    pub const DEFAULT_MAX_PASSES: usize = 50;
    pub const DEFAULT_SHRINK_FLOOR: f64 = 1e-9;

    /// Config with default enforcement parameters.
    ///
    /// There is deliberately no default `xi`. Typical choices are tiered by
    /// how severe a false "inside" would be, e.g. 0.1, 0.01 or 0.001.
    pub fn new(kernel: KernelConfig, zeta: f64, xi: f64) -> Self {
        Self {
            kernel,
            zeta,
            xi,
            shrink_factor: Self::DEFAULT_SHRINK_FACTOR,
            max_shrink_iters: Self::DEFAULT_MAX_SHRINK_ITERS,
            max_passes: Self::DEFAULT_MAX_PASSES,
            shrink_floor: Self::DEFAULT_SHRINK_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(Error::InvalidConfig(format!("zeta must be in [0, 1], got {}", self.zeta)));
        }
        if !(0.0..1.0).contains(&self.xi) {
            return Err(Error::InvalidConfig(format!("xi must be in [0, 1), got {}", self.xi)));
        }
        if !(self.xi < self.zeta) {
            return Err(Error::InvalidConfig(format!(
                "xi ({}) must be below zeta ({})",
                self.xi, self.zeta
            )));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "shrink factor must be in (0, 1), got {}",
                self.shrink_factor
            )));
        }
        if !(self.shrink_floor > 0.0 && self.shrink_floor.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "shrink floor must be > 0, got {}",
                self.shrink_floor
            )));
        }
        if self.max_shrink_iters == 0 || self.max_passes == 0 {
            return Err(Error::InvalidConfig("iteration caps must be >= 1".into()));
        }
        Ok(())
    }
}

/// One shrink step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    pub anchor: usize,
    pub old_sigma: Vec<f64>,
    pub new_sigma: Vec<f64>,
    /// Index into the canonically sorted OOD samples.
    pub ood_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivationReport {
    pub n_anchors: usize,
    pub n_ood: usize,
    pub adjustments: Vec<Adjustment>,
    pub passes_used: usize,
    /// Number of (sample, pass) loops that stopped at `max_shrink_iters`.
    pub shrink_cap_hits: usize,
    pub constraint_satisfied: bool,
}

/// Derives the kernel ODD. Output depends only on the sample multisets and `cfg`.
pub fn derive(ds: &Dataset, cfg: &DerivationConfig) -> Result<(KernelOdd, DerivationReport)> {
    cfg.validate()?;
    ds.validate()?;
    if ds.id_samples.is_empty() {
        return Err(Error::EmptyIdSet);
    }
    let canon = canonicalize(ds);
    let normalizer = if cfg.kernel.normalize {
        Some(Normalizer::fit(&canon.id_samples)?)
    } else {
        None
    };
    let eval_space: Vec<Vec<f64>> = match &normalizer {
        Some(n) => canon.id_samples.iter().map(|p| n.apply(p)).collect(),
        None => canon.id_samples.clone(),
    };

    let kernels = nn_distances(&eval_space, cfg.kernel.distance_mode)
        .into_iter()
        .zip(&canon.id_samples)
        .map(|(d, center)| {
            let sigma = d.sigma_diag(canon.dimension, &cfg.kernel)?;
            AnchorKernel::new(center.clone(), sigma)
        })
        .collect::<Result<Vec<_>>>()?;

    let (kernels, report) = enforce_ood(kernels, normalizer.as_ref(), &canon.ood_samples, cfg)?;
    let model = KernelOdd::from_derivation(kernels, normalizer, &canon, cfg)?;
    Ok((model, report))
}

/// Shrinks kernels until every OOD sample has global affinity <= `xi`.
///
/// `ood` is processed in the order given; [`derive`] passes it canonically
/// sorted. Centers never move and sigmas only shrink.
pub fn enforce_ood(
    mut kernels: Vec<AnchorKernel>,
    normalizer: Option<&Normalizer>,
    ood: &[Vec<f64>],
    cfg: &DerivationConfig,
) -> Result<(Vec<AnchorKernel>, DerivationReport)> {
    cfg.validate()?;
    let mut report = DerivationReport {
        n_anchors: kernels.len(),
        n_ood: ood.len(),
        adjustments: Vec::new(),
        passes_used: 0,
        shrink_cap_hits: 0,
        constraint_satisfied: false,
    };
    if ood.is_empty() {
        report.constraint_satisfied = true;
        return Ok((kernels, report));
    }
    if kernels.is_empty() {
        return Err(Error::EmptyIdSet);
    }

    let eval = |p: &[f64]| match normalizer {
        Some(n) => n.apply(p),
        None => p.to_vec(),
    };
    let centers: Vec<Vec<f64>> = kernels.iter().map(|k| eval(&k.center)).collect();
    for (j, o) in ood.iter().enumerate() {
        let oq = eval(o);
        if let Some(i) = centers.iter().position(|c| *c == oq) {
            return Err(Error::Unsatisfiable {
                ood_index: j,
                anchor_index: i,
            });
        }
    }
    let locals_at = |kernels: &[AnchorKernel], oq: &[f64]| -> Vec<f64> {
        kernels
            .iter()
            .zip(&centers)
            .map(|(k, c)| rbf(quad_form(oq, c, &k.sigma_diag)))
            .collect()
    };

    for pass in 1..=cfg.max_passes {
        report.passes_used = pass;
        let mut changed = false;
        for (j, o) in ood.iter().enumerate() {
            let oq = eval(o);
            let mut steps = 0;
            loop {
                let locals = locals_at(&kernels, &oq);
                let alpha = superpose_unchecked(locals.iter().copied());
                if alpha <= cfg.xi {
                    break;
                }
                if steps == cfg.max_shrink_iters {
                    report.shrink_cap_hits += 1;
                    break;
                }
                // most contributing kernel; ties to the lowest index
                let mut top = 0;
                for (i, &a) in locals.iter().enumerate() {
                    if a > locals[top] {
                        top = i;
                    }
                }
                let old = kernels[top].sigma_diag.clone();
                let new: Vec<f64> = old
                    .iter()
                    .map(|s| (s * cfg.shrink_factor).max(cfg.shrink_floor))
                    .collect();
                if new == old {
                    // pinned at the floor: no further progress possible
                    report.shrink_cap_hits += 1;
                    break;
                }
                kernels[top].sigma_diag = new.clone();
                report.adjustments.push(Adjustment {
                    anchor: top,
                    old_sigma: old,
                    new_sigma: new,
                    ood_index: j,
                });
                changed = true;
                steps += 1;
            }
        }
        if !changed {
            break;
        }
    }

    report.constraint_satisfied = ood.iter().all(|o| {
        let locals = locals_at(&kernels, &eval(o));
        superpose_unchecked(locals) <= cfg.xi
    });
    if !report.constraint_satisfied {
        return Err(Error::NonConvergence(Box::new(report)));
    }
    Ok((kernels, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::global_affinity;

    fn cfg(kappa: f64, eta: f64, lambda: f64, xi: f64) -> DerivationConfig {
        DerivationConfig::new(KernelConfig::new(kappa, eta, lambda), 0.5, xi)
    }

    #[test]
    fn two_anchor_sigma() {
        let ds = Dataset::new(1, vec![vec![1.0], vec![0.0]], vec![]).unwrap();
        let (model, report) = derive(&ds, &cfg(1.0, 1.0, 0.1, 0.1)).unwrap();
        let expected = 0.9 * (-1.0f64).exp() + 0.1;
        assert!((expected - 0.431_091_497_054_298_2).abs() < 1e-12);
        assert_eq!(model.kernels().len(), 2);
        assert_eq!(model.kernels()[0].center, vec![0.0]);
        for k in model.kernels() {
            assert!((k.sigma_diag[0] - expected).abs() <= 1e-12);
        }
        assert!(report.adjustments.is_empty());
        assert!(report.constraint_satisfied);
    }

    #[test]
    fn row_order_does_not_matter() {
        let a = Dataset::new(1, vec![vec![0.0], vec![1.0]], vec![vec![3.0]]).unwrap();
        let b = Dataset::new(1, vec![vec![1.0], vec![0.0]], vec![vec![3.0]]).unwrap();
        let c = cfg(1.0, 1.0, 0.1, 0.1);
        assert_eq!(derive(&a, &c).unwrap().0, derive(&b, &c).unwrap().0);
    }

    #[test]
    fn ood_on_anchor_is_unsatisfiable() {
        let ds = Dataset::new(2, vec![vec![0.0, 0.0]], vec![vec![0.0, 0.0]]).unwrap();
        let err = derive(&ds, &cfg(1.0, 1.0, 0.1, 0.1)).unwrap_err();
        assert!(matches!(err, Error::Unsatisfiable { ood_index: 0, anchor_index: 0 }));
        assert!(err.is_constraint_failure());
    }

    #[test]
    fn empty_id_set() {
        let ds = Dataset::new(1, vec![], vec![vec![1.0]]).unwrap();
        assert!(matches!(derive(&ds, &cfg(1.0, 1.0, 0.1, 0.1)), Err(Error::EmptyIdSet)));
    }

    #[test]
    fn shrink_sequence() {
        let kernels = vec![AnchorKernel::new(vec![0.0], vec![1.0]).unwrap()];
        let (out, report) = enforce_ood(kernels, None, &[vec![1.0]], &cfg(1.0, 1.0, 0.1, 0.3)).unwrap();
        assert!((out[0].sigma_diag[0] - 0.25).abs() <= 1e-9);
        assert_eq!(report.adjustments.len(), 2);
        assert_eq!(report.adjustments[0].old_sigma, vec![1.0]);
        assert_eq!(report.adjustments[0].new_sigma, vec![0.5]);
        assert_eq!(report.adjustments[1].new_sigma, vec![0.25]);
        let a = global_affinity(&out, None, &[1.0]).unwrap();
        assert!((a - (-2.0f64).exp()).abs() <= 1e-12);
        // a confirming pass follows the pass that made changes
        assert_eq!(report.passes_used, 2);
    }

    #[test]
    fn empty_or_satisfied_ood_changes_nothing() {
        let kernels = vec![AnchorKernel::new(vec![0.0], vec![1.0]).unwrap()];
        let c = cfg(1.0, 1.0, 0.1, 0.3);
        let (out, report) = enforce_ood(kernels.clone(), None, &[], &c).unwrap();
        assert_eq!(out, kernels);
        assert!(report.adjustments.is_empty());
        let (out, report) = enforce_ood(kernels.clone(), None, &[vec![10.0]], &c).unwrap();
        assert_eq!(out, kernels);
        assert!(report.adjustments.is_empty());
        assert_eq!(report.passes_used, 1);
    }

    #[test]
    fn dominant_kernel_is_shrunk_first() {
        let kernels = vec![
            AnchorKernel::new(vec![0.0], vec![1.0]).unwrap(),
            AnchorKernel::new(vec![3.0], vec![1.0]).unwrap(),
        ];
        let (_, report) = enforce_ood(kernels, None, &[vec![2.0]], &cfg(1.0, 1.0, 0.1, 0.2)).unwrap();
        assert_eq!(report.adjustments[0].anchor, 1);
    }

    #[test]
    fn floor_stops_progress() {
        let kernels = vec![AnchorKernel::new(vec![0.0], vec![1.0]).unwrap()];
        let mut c = cfg(1.0, 1.0, 0.1, 0.3);
        c.shrink_floor = 0.6;
        c.max_passes = 3;
        let err = enforce_ood(kernels, None, &[vec![1.0]], &c).unwrap_err();
        let Error::NonConvergence(report) = err else {
            panic!("expected non-convergence");
        };
        assert!(!report.constraint_satisfied);
        assert_eq!(report.adjustments.len(), 1);
        assert_eq!(report.adjustments[0].new_sigma, vec![0.6]);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let kernels = vec![AnchorKernel::new(vec![0.0], vec![1.0]).unwrap()];
        let mut c = cfg(1.0, 1.0, 0.1, 0.01);
        c.max_shrink_iters = 1;
        c.max_passes = 2;
        let err = enforce_ood(kernels, None, &[vec![1.0]], &c).unwrap_err();
        let Error::NonConvergence(report) = err else {
            panic!("expected non-convergence");
        };
        assert_eq!(report.passes_used, 2);
        assert_eq!(report.shrink_cap_hits, 2);
    }

    #[test]
    fn config_validation() {
        let k = KernelConfig::new(1.0, 1.0, 0.1);
        assert!(DerivationConfig::new(k, 0.5, 0.9).validate().is_err());
        assert!(DerivationConfig::new(k, 0.5, 0.5).validate().is_err());
        assert!(DerivationConfig::new(k, 1.5, 0.1).validate().is_err());
        assert!(DerivationConfig::new(k, 0.5, -0.1).validate().is_err());
        let mut c = DerivationConfig::new(k, 0.5, 0.1);
        c.shrink_factor = 1.0;
        assert!(c.validate().is_err());
        assert!(DerivationConfig::new(k, 0.5, 0.1).validate().is_ok());
    }
}
