//! Ball tree for fixed-radius queries under a diagonal weighted Euclidean
//! metric, `d(x, y)^2 = sum_j w_j (x_j - y_j)^2`.
//!
//! Nodes bound their points in weight-scaled coordinates. Candidate points in
//! unpruned leaves are accepted with exactly the same distance computation a
//! linear scan uses, so results match a scan bit for bit.

const LEAF_SIZE: usize = 16;

#[derive(Clone, Debug)]
struct Node {
    start: usize,
    end: usize,
    center: Vec<f64>,
    radius: f64,
    children: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct BallTree {
    dim: usize,
    weights: Vec<f64>,
    /// Original coordinates, row-major.
    points: Vec<f64>,
    /// Point indices permuted so that each node owns a contiguous range.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Squared weighted distance between two points.
pub fn weighted_sq_dist(weights: &[f64], a: &[f64], b: &[f64]) -> f64 {
    weights.iter().zip(a).zip(b).map(|((w, x), y)| w * (x - y) * (x - y)).sum()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl BallTree {
    /// `points` is row-major with `dim` columns.
    pub fn new(points: Vec<f64>, dim: usize, weights: Vec<f64>) -> Self {
        assert!(dim > 0 && points.len().is_multiple_of(dim) && weights.len() == dim);
        let n = points.len() / dim;
        let scale: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let scaled: Vec<f64> = points.iter().enumerate().map(|(i, &x)| x * scale[i % dim]).collect();
        let mut tree = Self { dim, weights, points, order: (0..n).collect(), nodes: Vec::new() };
        if n > 0 {
            tree.build(&scaled, 0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.points[index * self.dim..(index + 1) * self.dim]
    }

    fn build(&mut self, scaled: &[f64], start: usize, end: usize) -> usize {
        let dim = self.dim;
        let row = |i: usize| &scaled[i * dim..(i + 1) * dim];
        let count = (end - start) as f64;
        let mut center = vec![0.0; dim];
        for &i in &self.order[start..end] {
            for (c, x) in center.iter_mut().zip(row(i)) {
                *c += x / count;
            }
        }
        let radius = self.order[start..end].iter().map(|&i| euclid(&center, row(i))).fold(0.0, f64::max);
        let id = self.nodes.len();
        self.nodes.push(Node { start, end, center, radius, children: None });
        if end - start <= LEAF_SIZE {
            return id;
        }
        // Median split along the widest scaled dimension.
        let widest = (0..dim)
            .map(|j| {
                let (lo, hi) =
                    self.order[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                        let x = scaled[i * dim + j];
                        (lo.min(x), hi.max(x))
                    });
                (j, hi - lo)
            })
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0;
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            scaled[a * dim + widest].total_cmp(&scaled[b * dim + widest]).then(a.cmp(&b))
        });
        let left = self.build(scaled, start, mid);
        let right = self.build(scaled, mid, end);
        self.nodes[id].children = Some((left, right));
        id
    }

    /// Indices of all points within `radius` of `query` (inclusive), ascending.
    pub fn within(&self, query: &[f64], radius: f64) -> Vec<usize> {
        assert_eq!(query.len(), self.dim);
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let scaled_query: Vec<f64> = query.iter().zip(&self.weights).map(|(x, w)| x * w.sqrt()).collect();
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let gap = euclid(&scaled_query, &node.center) - node.radius;
            // Loose slack keeps pruning conservative under rounding.
            if gap > radius * (1.0 + 1e-9) + 1e-12 {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => {
                    for &i in &self.order[node.start..node.end] {
                        if weighted_sq_dist(&self.weights, query, self.point(i)) <= r2 {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Reference implementation: scan every point.
pub fn linear_scan(points: &[f64], dim: usize, weights: &[f64], query: &[f64], radius: f64) -> Vec<usize> {
    let r2 = radius * radius;
    points.chunks(dim).enumerate().filter(|(_, p)| weighted_sq_dist(weights, query, p) <= r2).map(|(i, _)| i).collect()
}
