//! Ground-truth ODD structures and exact membership oracles.
//!
//! A ground-truth ODD is the pair (taxonomy, ontology): a union of convex
//! polytopes `{x : A x <= b}` describing the admissible parameter ranges, and a
//! list of polynomial inequalities that constrain combinations of parameters.
//! Every membership test here is closed: points on a boundary are inside.

mod hull;
mod spec;

pub use hull::{build_convex_hull, hull_contains, ConvexHull};
pub use spec::GroundTruthSpec;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

/// An axis-aligned box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidInput("box has zero dimensions".into()));
        }
        check_dim(lower.len(), &upper)?;
        check_finite("box lower bound", &lower)?;
        check_finite("box upper bound", &upper)?;
        if let Some(k) = (0..lower.len()).find(|&k| lower[k] > upper[k]) {
            return Err(Error::InvalidInput(format!(
                "box dimension {k}: lower {} exceeds upper {}",
                lower[k], upper[k]
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// The box scaled by `factor` about its center.
    pub fn scaled(&self, factor: f64) -> Bounds {
        let (lower, upper) = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| {
                let c = 0.5 * (l + u);
                let h = 0.5 * (u - l) * factor;
                (c - h, c + h)
            })
            .unzip();
        Bounds { lower, upper }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dimension(), x)?;
        Ok(x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u))
    }

    /// Half-space form: `x_k <= u_k` and `-x_k <= -l_k` for every dimension.
    pub fn to_polytope(&self) -> ConvexPolytope {
        let n = self.dimension();
        let mut normals = Vec::with_capacity(2 * n);
        let mut offsets = Vec::with_capacity(2 * n);
        for k in 0..n {
            let mut up = vec![0.0; n];
            up[k] = 1.0;
            normals.push(up);
            offsets.push(self.upper[k]);
            let mut down = vec![0.0; n];
            down[k] = -1.0;
            normals.push(down);
            offsets.push(-self.lower[k]);
        }
        ConvexPolytope::new(normals, offsets).expect("box half-spaces are well formed")
    }
}

/// A convex polytope `C = {x : A x <= b}`, rows of `A` stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolytope {
    dim: usize,
    normals: Vec<f64>,
    offsets: Vec<f64>,
}

impl ConvexPolytope {
    pub fn new(normals: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        let Some(first) = normals.first() else {
            return Err(Error::InvalidPolytope("no half-spaces".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidPolytope("zero-dimensional normals".into()));
        }
        if normals.len() != offsets.len() {
            return Err(Error::InvalidPolytope(format!(
                "{} normals but {} offsets",
                normals.len(),
                offsets.len()
            )));
        }
        let mut flat = Vec::with_capacity(dim * normals.len());
        for (i, row) in normals.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidPolytope(format!(
                    "row {i} has dimension {}, expected {dim}",
                    row.len()
                )));
            }
            check_finite("polytope normal", row)?;
            if row.iter().all(|&a| a == 0.0) {
                return Err(Error::InvalidPolytope(format!("row {i} is the zero vector")));
            }
            flat.extend_from_slice(row);
        }
        check_finite("polytope offsets", &offsets)?;
        Ok(Self {
            dim,
            normals: flat,
            offsets,
        })
    }

    pub(crate) fn from_flat(dim: usize, normals: Vec<f64>, offsets: Vec<f64>) -> Self {
        debug_assert_eq!(normals.len(), dim * offsets.len());
        Self {
            dim,
            normals,
            offsets,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn num_halfspaces(&self) -> usize {
        self.offsets.len()
    }

    pub fn normal(&self, i: usize) -> &[f64] {
        &self.normals[i * self.dim..(i + 1) * self.dim]
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Largest value of `A_i x - b_i` over all rows.
    pub(crate) fn max_violation(&self, x: &[f64]) -> f64 {
        self.normals
            .chunks_exact(self.dim)
            .zip(&self.offsets)
            .map(|(a, b)| dot(a, x) - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn contains_within(&self, x: &[f64], tol: f64) -> bool {
        self.normals
            .chunks_exact(self.dim)
            .zip(&self.offsets)
            .all(|(a, b)| dot(a, x) <= b + tol)
    }

    /// Closed membership test `A x <= b`.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim, x)?;
        Ok(self.contains_within(x, 0.0))
    }
}

/// Convenience wrapper for [`ConvexPolytope::contains`].
pub fn polytope_contains(p: &ConvexPolytope, x: &[f64]) -> Result<bool> {
    p.contains(x)
}

/// A union of convex polytopes of equal dimension.
///
/// The parts are expected to be pairwise disjoint, but that is not checked:
/// membership is the same either way.
#[derive(Debug, Clone, PartialEq)]
pub struct OddPolytope {
    parts: Vec<ConvexPolytope>,
}

impl OddPolytope {
    pub fn new(parts: Vec<ConvexPolytope>) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidPolytope("union has no parts".into()));
        };
        let dim = first.dimension();
        if let Some(p) = parts.iter().find(|p| p.dimension() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.dimension(),
            });
        }
        Ok(Self { parts })
    }

    pub fn dimension(&self) -> usize {
        self.parts[0].dimension()
    }

    pub fn parts(&self) -> &[ConvexPolytope] {
        &self.parts
    }

    pub fn push(&mut self, part: ConvexPolytope) -> Result<()> {
        check_dim(self.dimension(), &vec![0.0; part.dimension()])?;
        self.parts.push(part);
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dimension(), x)?;
        Ok(self.parts.iter().any(|p| p.contains_within(x, 0.0)))
    }
}

pub fn odd_polytope_contains(p: &OddPolytope, x: &[f64]) -> Result<bool> {
    p.contains(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    /// polynomial(x) >= 0
    #[serde(rename = "ge")]
    GreaterEq,
    /// polynomial(x) <= 0
    #[serde(rename = "le")]
    LessEq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .fold(self.coefficient, |acc, (&e, &v)| match e {
                0 => acc,
                1 => acc * v,
                _ => acc * v.powi(e as i32),
            })
    }
}

/// One relationship `sum_t c_t prod_k x_k^{e_tk}  (>= | <=)  0`.
///
/// Terms are kept sorted by exponent vector so evaluation order is canonical.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialInequality {
    dim: usize,
    terms: Vec<Monomial>,
    sense: Sense,
}

impl PolynomialInequality {
    pub fn new(dim: usize, mut terms: Vec<Monomial>, sense: Sense) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("relationship of dimension 0".into()));
        }
        for t in &terms {
            check_dim(dim, &vec![0.0; t.exponents.len()])?;
            if !t.coefficient.is_finite() {
                return Err(Error::NonFinite(format!(
                    "relationship coefficient {}",
                    t.coefficient
                )));
            }
        }
        terms.sort_by(|a, b| {
            a.exponents
                .cmp(&b.exponents)
                .then(a.coefficient.total_cmp(&b.coefficient))
        });
        Ok(Self { dim, terms, sense })
    }

    /// A linear relationship `c . x + c0 (>= | <=) 0`.
    pub fn linear(coefficients: &[f64], constant: f64, sense: Sense) -> Result<Self> {
        let dim = coefficients.len();
        let mut terms = vec![Monomial {
            coefficient: constant,
            exponents: vec![0; dim],
        }];
        for (k, &c) in coefficients.iter().enumerate() {
            if c != 0.0 {
                let mut exponents = vec![0; dim];
                exponents[k] = 1;
                terms.push(Monomial {
                    coefficient: c,
                    exponents,
                });
            }
        }
        Self::new(dim, terms, sense)
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok(self.terms.iter().map(|t| t.evaluate(x)).sum())
    }

    pub fn holds(&self, x: &[f64]) -> Result<bool> {
        let v = self.evaluate(x)?;
        Ok(match self.sense {
            Sense::GreaterEq => v >= 0.0,
            Sense::LessEq => v <= 0.0,
        })
    }
}

pub fn relationship_holds(rel: &PolynomialInequality, x: &[f64]) -> Result<bool> {
    rel.holds(x)
}

/// The structure (taxonomy, ontology) of a known ODD.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthOdd {
    taxonomy: OddPolytope,
    ontology: Vec<PolynomialInequality>,
}

impl GroundTruthOdd {
    pub fn new(taxonomy: OddPolytope, ontology: Vec<PolynomialInequality>) -> Result<Self> {
        let dim = taxonomy.dimension();
        if let Some(r) = ontology.iter().find(|r| r.dimension() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.dimension(),
            });
        }
        Ok(Self { taxonomy, ontology })
    }

    pub fn dimension(&self) -> usize {
        self.taxonomy.dimension()
    }

    pub fn taxonomy(&self) -> &OddPolytope {
        &self.taxonomy
    }

    pub fn ontology(&self) -> &[PolynomialInequality] {
        &self.ontology
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if !self.taxonomy.contains(x)? {
            return Ok(false);
        }
        for r in &self.ontology {
            if !r.holds(x)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

pub fn ground_truth_contains(gt: &GroundTruthOdd, x: &[f64]) -> Result<bool> {
    gt.contains(x)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
