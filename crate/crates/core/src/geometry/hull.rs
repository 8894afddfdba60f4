//! Deterministic quickhull in n dimensions.
//!
//! Facets are simplices (n vertices each) with outward unit normals.
//! Orientation is fixed against a point strictly inside the initial simplex,
//! which stays interior as the hull grows. A point counts as outside a facet
//! only if it lies more than `tol` above it, so nearly coplanar points are
//! absorbed instead of producing slivers.

use std::collections::HashMap;

use super::{dot, ConvexPolytope};
use crate::error::{check_dim, check_finite, Error, Result};

/// Convex hull of a finite point set, in vertex and half-space form.
#[derive(Debug, Clone)]
pub struct ConvexHull {
    vertices: Vec<Vec<f64>>,
    facets: ConvexPolytope,
    tol: f64,
}

impl ConvexHull {
    pub fn dimension(&self) -> usize {
        self.facets.dimension()
    }

    /// Extreme points of the input, in input order.
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn facets(&self) -> &ConvexPolytope {
        &self.facets
    }

    /// Membership slack: `1e-9 * max(1, max |coordinate|)` over the generators.
    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dimension(), x)?;
        Ok(self.facets.contains_within(x, self.tol))
    }
}

pub fn hull_contains(h: &ConvexHull, x: &[f64]) -> Result<bool> {
    h.contains(x)
}

/// Builds the convex hull of `points`.
///
/// Needs at least `n + 1` affinely independent points in dimension `n`;
/// anything flatter is reported as [`Error::Degenerate`].
pub fn build_convex_hull(points: &[Vec<f64>]) -> Result<ConvexHull> {
    let Some(first) = points.first() else {
        return Err(Error::Degenerate("no points".into()));
    };
    let dim = first.len();
    if dim == 0 {
        return Err(Error::Degenerate("zero-dimensional points".into()));
    }
    for p in points {
        check_dim(dim, p)?;
        check_finite("hull generator", p)?;
    }
    if points.len() < dim + 1 {
        return Err(Error::Degenerate(format!(
            "{} points cannot span a {dim}-dimensional hull",
            points.len()
        )));
    }
    let scale = points
        .iter()
        .flat_map(|p| p.iter())
        .fold(1.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;

    if dim == 1 {
        return interval_hull(points, tol);
    }

    let mut qh = Quickhull::new(points, dim, tol)?;
    qh.run();
    Ok(qh.finish())
}

fn interval_hull(points: &[Vec<f64>], tol: f64) -> Result<ConvexHull> {
    let (mut lo, mut hi) = (0, 0);
    for (i, p) in points.iter().enumerate() {
        if p[0] < points[lo][0] {
            lo = i;
        }
        if p[0] > points[hi][0] {
            hi = i;
        }
    }
    let (min, max) = (points[lo][0], points[hi][0]);
    if max - min <= tol {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    Ok(ConvexHull {
        vertices: vec![points[lo.min(hi)].clone(), points[lo.max(hi)].clone()],
        facets: ConvexPolytope::from_flat(1, vec![1.0, -1.0], vec![max, -min]),
        tol,
    })
}

struct Facet {
    vertices: Vec<usize>,
    normal: Vec<f64>,
    offset: f64,
    /// `neighbors[i]` shares every vertex except `vertices[i]`.
    neighbors: Vec<usize>,
    outside: Vec<usize>,
    alive: bool,
}

struct Quickhull<'a> {
    pts: &'a [Vec<f64>],
    dim: usize,
    eps: f64,
    interior: Vec<f64>,
    facets: Vec<Facet>,
    pending: Vec<usize>,
}

impl<'a> Quickhull<'a> {
    fn new(pts: &'a [Vec<f64>], dim: usize, eps: f64) -> Result<Self> {
        let simplex = initial_simplex(pts, dim, eps)?;
        let mut interior = vec![0.0; dim];
        for &v in &simplex {
            for (c, x) in interior.iter_mut().zip(&pts[v]) {
                *c += x;
            }
        }
        for c in &mut interior {
            *c /= (dim + 1) as f64;
        }

        let mut qh = Quickhull {
            pts,
            dim,
            eps,
            interior,
            facets: Vec::new(),
            pending: Vec::new(),
        };
        for skip in 0..=dim {
            let vertices: Vec<usize> = (0..=dim).filter(|&k| k != skip).map(|k| simplex[k]).collect();
            let neighbors = (0..=dim).filter(|&k| k != skip).collect();
            qh.push_facet(vertices, neighbors);
        }

        let mut in_simplex = vec![false; pts.len()];
        for &v in &simplex {
            in_simplex[v] = true;
        }
        for (i, _) in pts.iter().enumerate().filter(|(i, _)| !in_simplex[*i]) {
            if let Some(f) = (0..qh.facets.len()).find(|&f| qh.distance(f, i) > eps) {
                qh.facets[f].outside.push(i);
            }
        }
        qh.pending = (0..qh.facets.len())
            .rev()
            .filter(|&f| !qh.facets[f].outside.is_empty())
            .collect();
        Ok(qh)
    }

    fn distance(&self, f: usize, p: usize) -> f64 {
        let facet = &self.facets[f];
        dot(&facet.normal, &self.pts[p]) - facet.offset
    }

    fn push_facet(&mut self, vertices: Vec<usize>, neighbors: Vec<usize>) -> usize {
        let (normal, offset) = self.plane(&vertices);
        self.facets.push(Facet {
            vertices,
            normal,
            offset,
            neighbors,
            outside: Vec::new(),
            alive: true,
        });
        self.facets.len() - 1
    }

    /// Outward unit normal: the component of `v0 - interior` orthogonal to
    /// the facet's affine span.
    fn plane(&self, vertices: &[usize]) -> (Vec<f64>, f64) {
        let origin = &self.pts[vertices[0]];
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(self.dim - 1);
        for &v in &vertices[1..] {
            let edge = sub(&self.pts[v], origin);
            let r = residual(&edge, &basis);
            let norm = norm(&r);
            if norm > 0.0 {
                basis.push(r.into_iter().map(|x| x / norm).collect());
            }
        }
        let r = residual(&sub(origin, &self.interior), &basis);
        let len = norm(&r);
        let normal: Vec<f64> = r.into_iter().map(|x| x / len).collect();
        let offset = vertices
            .iter()
            .map(|&v| dot(&normal, &self.pts[v]))
            .fold(f64::NEG_INFINITY, f64::max);
        (normal, offset)
    }

    fn run(&mut self) {
        while let Some(f) = self.pending.pop() {
            if !self.facets[f].alive || self.facets[f].outside.is_empty() {
                continue;
            }
            let apex = self.furthest(f);
            self.add_point(f, apex);
        }
    }

    fn furthest(&self, f: usize) -> usize {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for &p in &self.facets[f].outside {
            let d = self.distance(f, p);
            if d > best.0 || (d == best.0 && p < best.1) {
                best = (d, p);
            }
        }
        best.1
    }

    fn add_point(&mut self, start: usize, apex: usize) {
        let mut visible = vec![start];
        let mut is_visible: HashMap<usize, bool> = HashMap::new();
        is_visible.insert(start, true);
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        let mut head = 0;
        while head < visible.len() {
            let g = visible[head];
            head += 1;
            for slot in 0..self.dim {
                let nb = self.facets[g].neighbors[slot];
                let seen = match is_visible.get(&nb) {
                    Some(&v) => v,
                    None => {
                        let v = self.distance(nb, apex) > self.eps;
                        is_visible.insert(nb, v);
                        if v {
                            visible.push(nb);
                        }
                        v
                    }
                };
                if !seen {
                    horizon.push((g, slot));
                }
            }
        }

        let first_new = self.facets.len();
        let mut open_ridges: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for &(g, slot) in &horizon {
            let outer = self.facets[g].neighbors[slot];
            let mut vertices: Vec<usize> = self.facets[g]
                .vertices
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != slot)
                .map(|(_, &v)| v)
                .collect();
            vertices.push(apex);
            let mut neighbors = vec![usize::MAX; self.dim];
            neighbors[self.dim - 1] = outer;
            let id = self.push_facet(vertices, neighbors);

            let back = self.facets[outer]
                .neighbors
                .iter()
                .position(|&n| n == g)
                .expect("horizon neighbour links back");
            self.facets[outer].neighbors[back] = id;

            for j in 0..self.dim - 1 {
                let mut key: Vec<usize> = self.facets[id]
                    .vertices
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != j && i != self.dim - 1)
                    .map(|(_, &v)| v)
                    .collect();
                key.sort_unstable();
                if let Some((other, other_slot)) = open_ridges.remove(&key) {
                    self.facets[id].neighbors[j] = other;
                    self.facets[other].neighbors[other_slot] = id;
                } else {
                    open_ridges.insert(key, (id, j));
                }
            }
        }
        debug_assert!(open_ridges.is_empty(), "horizon is not a closed cycle");

        let mut orphans = Vec::new();
        for &g in &visible {
            let facet = &mut self.facets[g];
            facet.alive = false;
            orphans.append(&mut facet.outside);
        }
        for p in orphans {
            if p == apex {
                continue;
            }
            if let Some(f) = (first_new..self.facets.len()).find(|&f| self.distance(f, p) > self.eps) {
                self.facets[f].outside.push(p);
            }
        }
        for f in (first_new..self.facets.len()).rev() {
            if !self.facets[f].outside.is_empty() {
                self.pending.push(f);
            }
        }
    }

    fn finish(self) -> ConvexHull {
        let mut normals = Vec::new();
        let mut offsets = Vec::new();
        let mut is_vertex = vec![false; self.pts.len()];
        for f in self.facets.iter().filter(|f| f.alive) {
            normals.extend_from_slice(&f.normal);
            offsets.push(f.offset);
            for &v in &f.vertices {
                is_vertex[v] = true;
            }
        }
        let vertices = self
            .pts
            .iter()
            .zip(&is_vertex)
            .filter(|(_, &v)| v)
            .map(|(p, _)| p.clone())
            .collect();
        let facets = ConvexPolytope::from_flat(self.dim, normals, offsets);
        debug_assert!(
            self.pts
                .iter()
                .all(|p| facets.max_violation(p) <= self.eps),
            "generator outside its own hull"
        );
        ConvexHull {
            vertices,
            facets,
            tol: self.eps,
        }
    }
}

/// Picks `dim + 1` points greedily maximizing the distance to the affine span
/// of the points chosen so far, starting from the lexicographically smallest.
fn initial_simplex(pts: &[Vec<f64>], dim: usize, eps: f64) -> Result<Vec<usize>> {
    let mut start = 0;
    for (i, p) in pts.iter().enumerate().skip(1) {
        if lex_cmp(p, &pts[start]).is_lt() {
            start = i;
        }
    }
    let origin = &pts[start];
    let mut chosen = vec![start];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for step in 0..dim {
        let mut best = (0.0, usize::MAX, Vec::new());
        for (i, p) in pts.iter().enumerate() {
            let r = residual(&sub(p, origin), &basis);
            let d = norm(&r);
            if d > best.0 {
                best = (d, i, r);
            }
        }
        if best.0 <= eps {
            return Err(Error::Degenerate(format!(
                "points span only {step} of {dim} dimensions"
            )));
        }
        chosen.push(best.1);
        let d = best.0;
        basis.push(best.2.into_iter().map(|x| x / d).collect());
    }
    Ok(chosen)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Component of `v` orthogonal to the orthonormal `basis`, projected twice.
fn residual(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = dot(&r, b);
            for (x, y) in r.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(raw: &[&[f64]]) -> Vec<Vec<f64>> {
        raw.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn triangle_is_its_own_hull() {
        let h = build_convex_hull(&pts(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(h.facets().num_halfspaces(), 3);
        assert_eq!(h.vertices().len(), 3);
    }

    #[test]
    fn interior_point_is_not_a_vertex() {
        let input = pts(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[0.25, 0.25]]);
        let h = build_convex_hull(&input).unwrap();
        assert_eq!(h.facets().num_halfspaces(), 3);
        assert_eq!(h.vertices(), &input[..3]);
        assert!(hull_contains(&h, &[0.25, 0.25]).unwrap());
        assert!(!hull_contains(&h, &[1.0, 1.0]).unwrap());
        for v in &input {
            assert!(h.contains(v).unwrap());
        }
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let err = build_convex_hull(&pts(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]])).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        let err = build_convex_hull(&pts(&[&[0.0, 0.0], &[1.0, 1.0]])).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn one_dimensional_hull() {
        let h = build_convex_hull(&pts(&[&[3.0], &[-1.0], &[0.5]])).unwrap();
        assert!(h.contains(&[-1.0]).unwrap());
        assert!(h.contains(&[2.0]).unwrap());
        assert!(!h.contains(&[3.1]).unwrap());
        assert!(build_convex_hull(&pts(&[&[1.0], &[1.0]])).is_err());
    }

    #[test]
    fn cube_with_coplanar_points() {
        // grid points on a 3x3x3 lattice: lots of coplanar and collinear input
        let mut input = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    input.push(vec![a as f64, b as f64, c as f64]);
                }
            }
        }
        let h = build_convex_hull(&input).unwrap();
        for p in &input {
            assert!(h.contains(p).unwrap());
        }
        assert!(h.contains(&[1.0, 1.0, 1.0]).unwrap());
        assert!(!h.contains(&[2.1, 1.0, 1.0]).unwrap());
        assert!(!h.contains(&[-0.01, 0.0, 0.0]).unwrap());
        assert_eq!(h.vertices().len(), 8);
    }

    #[test]
    fn dimension_mismatch() {
        let h = build_convex_hull(&pts(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert!(h.contains(&[0.0]).is_err());
        assert!(build_convex_hull(&pts(&[&[0.0, 0.0], &[1.0], &[0.0, 1.0]])).is_err());
    }
}
