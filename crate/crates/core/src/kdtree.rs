//! Static 3-d tree for exact nearest-neighbor queries.
//!
//! Results are identical to a linear scan, including tie-breaking: among equally
//! distant points the lowest original index wins.

use alloc::vec::Vec;

use crate::geom::Point3;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    /// Original index of `points[i]`.
    index: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(points: &[Point3]) -> KdTree {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        if !points.is_empty() {
            build_node(points, &mut order, 0, points.len(), &mut nodes);
        }
        KdTree {
            points: order.iter().map(|&i| points[i]).collect(),
            index: order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the closest point.
    pub fn nearest(&self, query: &Point3) -> Option<(usize, f64)> {
        self.nearest_filtered(query, |_| true)
    }

    /// Closest point among those whose original index passes `keep`.
    pub fn nearest_filtered(
        &self,
        query: &Point3,
        keep: impl Fn(usize) -> bool,
    ) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_in(0, query, &keep, &mut best);
        (best.0 != usize::MAX).then_some(best)
    }

    fn nearest_in(
        &self,
        node: usize,
        q: &Point3,
        keep: &impl Fn(usize) -> bool,
        best: &mut (usize, f64),
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for k in start..end {
                    let idx = self.index[k];
                    if !keep(idx) {
                        continue;
                    }
                    let d2 = q.distance_squared(&self.points[k]);
                    if d2 < best.1 || (d2 == best.1 && idx < best.0) {
                        *best = (idx, d2);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q.axis(axis) - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_in(near, q, keep, best);
                // `<=` so equally distant points with a lower index are still found.
                if diff * diff <= best.1 {
                    self.nearest_in(far, q, keep, best);
                }
            }
        }
    }

    /// The `k` closest points, sorted by (squared distance, index).
    pub fn k_nearest(&self, query: &Point3, k: usize) -> Vec<(usize, f64)> {
        self.k_nearest_filtered(query, k, |_| true)
    }

    pub fn k_nearest_filtered(
        &self,
        query: &Point3,
        k: usize,
        keep: impl Fn(usize) -> bool,
    ) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.k_nearest_in(0, query, k, &keep, &mut out);
        }
        out
    }

    fn k_nearest_in(
        &self,
        node: usize,
        q: &Point3,
        k: usize,
        keep: &impl Fn(usize) -> bool,
        out: &mut Vec<(usize, f64)>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for s in start..end {
                    let idx = self.index[s];
                    if !keep(idx) {
                        continue;
                    }
                    let d2 = q.distance_squared(&self.points[s]);
                    if out.len() == k {
                        let worst = out[k - 1];
                        if d2 > worst.1 || (d2 == worst.1 && idx > worst.0) {
                            continue;
                        }
                    }
                    let pos = out.partition_point(|&(i, d)| d < d2 || (d == d2 && i < idx));
                    out.insert(pos, (idx, d2));
                    if out.len() > k {
                        out.pop();
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q.axis(axis) - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.k_nearest_in(near, q, k, keep, out);
                if out.len() < k || diff * diff <= out[k - 1].1 {
                    self.k_nearest_in(far, q, k, keep, out);
                }
            }
        }
    }
}

fn build_node(
    points: &[Point3],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let slice = &mut order[start..end];
    let axis = widest_axis(points, slice);
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points[a]
            .axis(axis)
            .total_cmp(&points[b].axis(axis))
            .then(a.cmp(&b))
    });
    let value = points[slice[mid]].axis(axis);
    nodes.push(Node::Leaf { start, end }); // placeholder
    let left = build_node(points, order, start, start + mid, nodes);
    let right = build_node(points, order, start + mid, end, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

fn widest_axis(points: &[Point3], idx: &[usize]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in idx {
        for a in 0..3 {
            let v = points[i].axis(a);
            lo[a] = lo[a].min(v);
            hi[a] = hi[a].max(v);
        }
    }
    let spread = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    if spread[0] >= spread[1] && spread[0] >= spread[2] {
        0
    } else if spread[1] >= spread[2] {
        1
    } else {
        2
    }
}
