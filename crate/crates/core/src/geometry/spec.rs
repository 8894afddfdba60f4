//! JSON description of a ground-truth ODD.
//!
//! ```json
//! {
//!   "dimension": 2,
//!   "box": {"lower": [-5, -5], "upper": [5, 5]},
//!   "polytopes": [{"A": [[1, 0]], "b": [2]}],
//!   "relationships": [
//!     {"terms": [{"coeff": 3, "exponents": [0, 0]},
//!                {"coeff": -1, "exponents": [1, 0]},
//!                {"coeff": 1, "exponents": [0, 1]}],
//!      "sense": "ge"}
//!   ]
//! }
//! ```
//!
//! `box` is the sampling region and, when `polytopes` is absent, also the
//! taxonomy. When `polytopes` is present the taxonomy is their union and the
//! box only bounds sampling. The optional `integer_dimensions` list marks
//! dimensions whose anchors are drawn from the integers inside the box.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Bounds, ConvexPolytope, GroundTruthOdd, Monomial, OddPolytope, PolynomialInequality, Sense};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthSpec {
    pub dimension: usize,
    #[serde(rename = "box")]
    pub bounds: Bounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polytopes: Option<Vec<PolytopeSpec>>,
    #[serde(default)]
    pub relationships: Vec<RelationshipSpec>,
    /// Dimensions whose sampled anchors take integer values only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub integer_dimensions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeSpec {
    #[serde(rename = "A")]
    pub normals: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationshipSpec {
    pub terms: Vec<TermSpec>,
    pub sense: Sense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

impl GroundTruthSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
        })
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

    /// Validated sampling box.
    pub fn sampling_box(&self) -> Result<Bounds> {
        let b = Bounds::new(self.bounds.lower.clone(), self.bounds.upper.clone())?;
        if b.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: b.dimension(),
            });
        }
        Ok(b)
    }

    pub fn ground_truth(&self) -> Result<GroundTruthOdd> {
        let bounds = self.sampling_box()?;
        let parts = match &self.polytopes {
            None => vec![bounds.to_polytope()],
            Some(list) => list
                .iter()
                .map(|p| ConvexPolytope::new(p.normals.clone(), p.b.clone()))
                .collect::<Result<_>>()?,
        };
        let taxonomy = OddPolytope::new(parts)?;
        if taxonomy.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: taxonomy.dimension(),
            });
        }
        let ontology = self
            .relationships
            .iter()
            .map(|r| {
                let terms = r
                    .terms
                    .iter()
                    .map(|t| Monomial {
                        coefficient: t.coeff,
                        exponents: t.exponents.clone(),
                    })
                    .collect();
                PolynomialInequality::new(self.dimension, terms, r.sense)
            })
            .collect::<Result<_>>()?;
        GroundTruthOdd::new(taxonomy, ontology)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BAND_2D: &str = r#"{
        "dimension": 2,
        "box": {"lower": [-5, -5], "upper": [5, 5]},
        "relationships": [{"terms": [
            {"coeff": 3, "exponents": [0, 0]},
            {"coeff": -1, "exponents": [1, 0]},
            {"coeff": 1, "exponents": [0, 1]}], "sense": "ge"}]
    }"#;

    #[test]
    fn parses_box_and_relationship() {
        let spec = GroundTruthSpec::from_json(BAND_2D).unwrap();
        let gt = spec.ground_truth().unwrap();
        assert!(gt.contains(&[0.0, 0.0]).unwrap());
        assert!(!gt.contains(&[5.0, 0.0]).unwrap());
        assert!(!gt.contains(&[6.0, 0.0]).unwrap());
    }

    #[test]
    fn polytopes_replace_the_box_as_taxonomy() {
        let spec = GroundTruthSpec::from_json(
            r#"{"dimension": 1, "box": {"lower": [0], "upper": [3]},
                "polytopes": [{"A": [[1], [-1]], "b": [1, 0]}, {"A": [[1], [-1]], "b": [3, -2]}]}"#,
        )
        .unwrap();
        let gt = spec.ground_truth().unwrap();
        assert!(!gt.contains(&[1.5]).unwrap());
        assert!(gt.contains(&[2.0]).unwrap());
    }

    #[test]
    fn rejects_inconsistent_specs() {
        let bad_dim = r#"{"dimension": 3, "box": {"lower": [0, 0], "upper": [1, 1]}}"#;
        assert!(GroundTruthSpec::from_json(bad_dim).unwrap().ground_truth().is_err());
        let bad_exp = r#"{"dimension": 2, "box": {"lower": [0, 0], "upper": [1, 1]},
            "relationships": [{"terms": [{"coeff": 1, "exponents": [1]}], "sense": "le"}]}"#;
        assert!(GroundTruthSpec::from_json(bad_exp).unwrap().ground_truth().is_err());
        let err = GroundTruthSpec::from_json(r#"{"dimension": 2, "box": "#).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let unknown = r#"{"dimension": 1, "box": {"lower": [0], "upper": [1]}, "extra": 1}"#;
        assert!(GroundTruthSpec::from_json(unknown).is_err());
    }
}
