//! Kernel-based operational design domains.
//!
//! `oddforge` turns labeled samples into a continuous affinity field over the
//! parameter space. In-distribution samples become RBF anchors whose widths
//! follow local sample density; out-of-distribution samples cap the field from
//! above. A point belongs to the derived ODD when its affinity reaches the
//! threshold `zeta`.
//!
//! The crate also carries the tooling to check such a model against a known
//! ground truth: polytope and polynomial membership oracles, convex hulls,
//! seeded Monte-Carlo sampling and precision-recall sweeps.
//!
//! ```
//! use oddforge::{derive, Dataset, DerivationConfig, KernelConfig};
//!
//! let ds = Dataset::new(1, vec![vec![0.0], vec![1.0]], vec![vec![4.0]]).unwrap();
//! let cfg = DerivationConfig::new(KernelConfig::new(1.0, 1.0, 0.1), 0.5, 0.1);
//! let (model, report) = derive(&ds, &cfg).unwrap();
//! assert!(report.constraint_satisfied);
//! assert_eq!(model.is_inside(&[0.0]).unwrap().affinity, 1.0);
//! assert!(model.affinity(&[4.0]).unwrap() <= 0.1);
//! ```

// NaN must fail validation, so negated comparisons are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod derivation;
pub mod error;
pub mod geometry;
pub mod ingestion;
pub mod kernel;
pub mod model;
pub mod rng;
pub mod validation;

pub use derivation::{derive, enforce_ood, Adjustment, DerivationConfig, DerivationReport};
pub use error::{Error, Result};
pub use geometry::{
    build_convex_hull, ConvexHull, ConvexPolytope, GroundTruthOdd, OddPolytope,
    PolynomialInequality,
};
pub use kernel::{
    AnchorKernel, Dataset, DistanceMode, KernelConfig, Normalizer,
};
pub use model::{KernelOdd, Membership};
