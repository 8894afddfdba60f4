use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

/// Labeled samples: in-distribution points become anchors, OOD points
/// constrain the field from above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dimension: usize,
    pub id_samples: Vec<Vec<f64>>,
    pub ood_samples: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(dimension: usize, id_samples: Vec<Vec<f64>>, ood_samples: Vec<Vec<f64>>) -> Result<Self> {
        let ds = Self {
            dimension,
            id_samples,
            ood_samples,
            dimension_names: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: names.len(),
            });
        }
        self.dimension_names = Some(names);
        Ok(self)
    }

    /// Checks dimensions and rejects NaN/Inf.
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidInput("dataset dimension must be >= 1".into()));
        }
        for (kind, set) in [("ID", &self.id_samples), ("OOD", &self.ood_samples)] {
            for (row, p) in set.iter().enumerate() {
                if p.len() != self.dimension {
                    return Err(Error::RowDimensionMismatch {
                        row,
                        expected: self.dimension,
                        actual: p.len(),
                    });
                }
                check_finite(&format!("{kind} sample {row}"), p)?;
            }
        }
        if let Some(names) = &self.dimension_names {
            if names.len() != self.dimension {
                return Err(Error::DimensionMismatch {
                    expected: self.dimension,
                    actual: names.len(),
                });
            }
        }
        Ok(())
    }

    pub fn canonicalize(&self) -> Dataset {
        canonicalize(self)
    }
}

/// Lexicographic order on coordinates (IEEE total order per coordinate).
pub fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Sorts both sample sets lexicographically. Duplicates are kept.
pub fn canonicalize(ds: &Dataset) -> Dataset {
    let sort = |v: &Vec<Vec<f64>>| {
        let mut v = v.clone();
        v.sort_by(|a, b| lex_cmp(a, b));
        v
    };
    Dataset {
        dimension: ds.dimension,
        id_samples: sort(&ds.id_samples),
        ood_samples: sort(&ds.ood_samples),
        dimension_names: ds.dimension_names.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sorts_lexicographically() {
        let ds = Dataset::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![]).unwrap();
        assert_eq!(canonicalize(&ds).id_samples, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn keeps_duplicates() {
        let ds = Dataset::new(2, vec![vec![0.0, 0.0], vec![3.0, 1.0], vec![0.0, 0.0]], vec![]).unwrap();
        let c = canonicalize(&ds);
        assert_eq!(c.id_samples.len(), 3);
        assert_eq!(c.id_samples[0], c.id_samples[1]);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(
            Dataset::new(2, vec![vec![0.0]], vec![]),
            Err(Error::RowDimensionMismatch { row: 0, .. })
        ));
        assert!(matches!(
            Dataset::new(1, vec![vec![0.0]], vec![vec![f64::NAN]]),
            Err(Error::NonFinite(_))
        ));
        assert!(Dataset::new(1, vec![vec![0.0]], vec![])
            .unwrap()
            .with_names(vec!["a".into(), "b".into()])
            .is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant(
            pts in prop::collection::vec(prop::collection::vec(-3i8..3, 2), 1..20),
            seed in any::<u64>(),
        ) {
            let pts: Vec<Vec<f64>> = pts.into_iter()
                .map(|p| p.into_iter().map(f64::from).collect())
                .collect();
            let mut shuffled = pts.clone();
            // deterministic Fisher-Yates driven by the seed
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (s >> 33) as usize % (i + 1);
                shuffled.swap(i, j);
            }
            let a = canonicalize(&Dataset::new(2, pts, vec![]).unwrap());
            let b = canonicalize(&Dataset::new(2, shuffled, vec![]).unwrap());
            prop_assert_eq!(a, b);
        }
    }
}
