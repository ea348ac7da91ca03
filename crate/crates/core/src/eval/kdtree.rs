//! Exact nearest-neighbor search over 3D points.

use std::cmp::Ordering;

use crate::Point3;

const LEAF: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyIndex;

impl std::fmt::Display for EmptyIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("nearest-neighbor query on an empty index")
    }
}

impl std::error::Error for EmptyIndex {}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Static kd-tree. Distance ties resolve to the lowest point index.
#[derive(Debug, Clone)]
pub struct NnIndex {
    points: Vec<Point3>,
    order: Vec<usize>,
    root: Option<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    pub fn dist(&self) -> f64 {
        self.dist_sq.sqrt()
    }

    fn better_than(&self, other: &Neighbor) -> bool {
        self.dist_sq < other.dist_sq || (self.dist_sq == other.dist_sq && self.index < other.index)
    }
}

impl NnIndex {
    pub fn build(points: &[Point3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = (!points.is_empty()).then(|| split(points, &mut order, 0));
        Self {
            points: points.to_vec(),
            order,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Point3 {
        &self.points[i]
    }

    pub fn nearest(&self, q: &Point3) -> Result<Neighbor, EmptyIndex> {
        let root = self.root.as_ref().ok_or(EmptyIndex)?;
        let mut best = Neighbor {
            index: usize::MAX,
            dist_sq: f64::INFINITY,
        };
        self.search(root, q, &mut best);
        Ok(best)
    }

    fn search(&self, node: &Node, q: &Point3, best: &mut Neighbor) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let cand = Neighbor {
                        index: i,
                        dist_sq: (self.points[i] - q).norm_squared(),
                    };
                    if cand.better_than(best) {
                        *best = cand;
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // equal distance may still hide a lower index on the far side
                if diff * diff <= best.dist_sq {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn split(points: &[Point3], order: &mut [usize], offset: usize) -> Node {
    if order.len() <= LEAF {
        return Node::Leaf {
            start: offset,
            end: offset + order.len(),
        };
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
        .unwrap();
    if hi[axis] == lo[axis] {
        // all coincident
        return Node::Leaf {
            start: offset,
            end: offset + order.len(),
        };
    }
    let mid = order.len() / 2;
    let key = |i: &usize| (points[*i][axis], *i);
    order.select_nth_unstable_by(mid, |a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.cmp(&kb.1))
    });
    let value = points[order[mid]][axis];
    // left holds coordinates <= value, right >= value
    let (l, r) = order.split_at_mut(mid);
    Node::Split {
        axis,
        value,
        left: Box::new(split(points, l, offset)),
        right: Box::new(split(points, r, offset + mid)),
    }
}

/// Reference linear scan with the same tie rule.
pub fn linear_nearest(points: &[Point3], q: &Point3) -> Option<Neighbor> {
    points
        .iter()
        .enumerate()
        .map(|(index, p)| Neighbor {
            index,
            dist_sq: (p - q).norm_squared(),
        })
        .min_by(|a, b| match a.dist_sq.total_cmp(&b.dist_sq) {
            Ordering::Equal => a.index.cmp(&b.index),
            o => o,
        })
}
