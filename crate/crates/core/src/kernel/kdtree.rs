//! Minimal exact kd-tree for ball queries over anchor centers.

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        left: usize,
        right: usize,
    },
}

pub(crate) struct KdTree {
    dim: usize,
    /// Point indices, permuted so every node owns a contiguous range.
    order: Vec<usize>,
    nodes: Vec<Node>,
    /// Per-node bounding boxes, `[lo_0..lo_n, hi_0..hi_n]`.
    bounds: Vec<f64>,
}

impl KdTree {
    /// `points` is row-major with `dim` coordinates per point.
    pub(crate) fn build(points: &[f64], dim: usize) -> Self {
        let count = points.len() / dim;
        let mut tree = KdTree {
            dim,
            order: (0..count).collect(),
            nodes: Vec::new(),
            bounds: Vec::new(),
        };
        if count > 0 {
            tree.build_node(points, 0, count);
        }
        tree
    }

    fn build_node(&mut self, points: &[f64], start: usize, end: usize) -> usize {
        let dim = self.dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in &self.order[start..end] {
            let p = &points[i * dim..(i + 1) * dim];
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        self.bounds.extend_from_slice(&lo);
        self.bounds.extend_from_slice(&hi);

        let (axis, spread) = (0..dim)
            .map(|k| (k, hi[k] - lo[k]))
            .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
        if end - start <= LEAF_SIZE || spread <= 0.0 {
            return id;
        }
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * dim + axis]
                .total_cmp(&points[b * dim + axis])
                .then(a.cmp(&b))
        });
        let left = self.build_node(points, start, mid);
        let right = self.build_node(points, mid, end);
        self.nodes[id] = Node::Split { left, right };
        id
    }

    /// Appends to `out` every point in a leaf whose box meets the ball
    /// `|p - q|^2 <= radius2`. The result is a superset of the ball.
    pub(crate) fn ball_candidates(&self, q: &[f64], radius2: f64, out: &mut Vec<usize>) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if self.box_dist2(id, q) > radius2 {
                continue;
            }
            match self.nodes[id] {
                Node::Leaf { start, end } => out.extend_from_slice(&self.order[start..end]),
                Node::Split { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
    }

    fn box_dist2(&self, id: usize, q: &[f64]) -> f64 {
        let b = &self.bounds[id * 2 * self.dim..(id + 1) * 2 * self.dim];
        let (lo, hi) = b.split_at(self.dim);
        let mut d2 = 0.0;
        for k in 0..self.dim {
            let d = if q[k] < lo[k] {
                lo[k] - q[k]
            } else if q[k] > hi[k] {
                q[k] - hi[k]
            } else {
                0.0
            };
            d2 += d * d;
        }
        d2
    }
}
