//! Balanced kd-tree with exact nearest and k-nearest queries.
//!
//! Distances are squared Euclidean, accumulated as `(dx² + dy²) + dz²` so
//! results agree bit for bit with [`nearest_brute`]. Ties go to the lowest
//! point index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[inline]
pub fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy) + dz * dz
}

#[derive(Clone, Copy, Debug)]
struct Node {
    point: usize,
    axis: u8,
    left: u32,
    right: u32,
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    nodes: Vec<Node>,
    root: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    d: f64,
    i: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.d.total_cmp(&o.d).then(self.i.cmp(&o.i))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl KdTree {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build(&points, &mut idx, &mut nodes);
        Self { points, nodes, root }
    }

    pub fn from_slice(points: &[[f64; 3]]) -> Self {
        Self::new(points.to_vec())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Index and squared distance of the nearest stored point.
    pub fn nearest(&self, x: [f64; 3]) -> Result<(usize, f64)> {
        if self.is_empty() {
            return Err(Error::domain("nearest-neighbor query on an empty point set"));
        }
        let mut best = Candidate {
            d: f64::INFINITY,
            i: usize::MAX,
        };
        let mut stack = vec![(self.root, 0.0)];
        while let Some((n, plane)) = stack.pop() {
            if n == NONE || plane > best.d {
                continue;
            }
            let node = self.nodes[n as usize];
            let p = self.points[node.point];
            let c = Candidate {
                d: dist2(x, p),
                i: node.point,
            };
            if c < best {
                best = c;
            }
            let a = node.axis as usize;
            let delta = x[a] - p[a];
            let (near, far) = if delta < 0.0 {
                (node.left, node.right)
            } else {
                (node.right, node.left)
            };
            stack.push((far, delta * delta));
            stack.push((near, plane));
        }
        Ok((best.i, best.d))
    }

    /// The `k` nearest points sorted by (distance, index); `k` is clamped to
    /// the set size.
    pub fn knn(&self, x: [f64; 3], k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(self.root, x, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.i, c.d)).collect()
    }

    fn knn_rec(&self, n: u32, x: [f64; 3], k: usize, heap: &mut BinaryHeap<Candidate>) {
        if n == NONE {
            return;
        }
        let node = self.nodes[n as usize];
        let p = self.points[node.point];
        let c = Candidate {
            d: dist2(x, p),
            i: node.point,
        };
        if heap.len() < k {
            heap.push(c);
        } else if c < *heap.peek().expect("nonempty heap") {
            heap.pop();
            heap.push(c);
        }
        let a = node.axis as usize;
        let delta = x[a] - p[a];
        let (near, far) = if delta < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.knn_rec(near, x, k, heap);
        if heap.len() < k || delta * delta <= heap.peek().expect("nonempty heap").d {
            self.knn_rec(far, x, k, heap);
        }
    }
}

fn build(points: &[[f64; 3]], idx: &mut [usize], nodes: &mut Vec<Node>) -> u32 {
    if idx.is_empty() {
        return NONE;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in idx.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    let mid = idx.len() / 2;
    idx.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
    let id = nodes.len() as u32;
    nodes.push(Node {
        point: idx[mid],
        axis: axis as u8,
        left: NONE,
        right: NONE,
    });
    let (l, r) = idx.split_at_mut(mid);
    let left = build(points, l, nodes);
    let right = build(points, &mut r[1..], nodes);
    nodes[id as usize].left = left;
    nodes[id as usize].right = right;
    id
}

/// Linear-scan nearest neighbor with the same metric and tie rule.
pub fn nearest_brute(points: &[[f64; 3]], x: [f64; 3]) -> Result<(usize, f64)> {
    if points.is_empty() {
        return Err(Error::domain("nearest-neighbor query on an empty point set"));
    }
    let mut best = (0, dist2(x, points[0]));
    for (i, &p) in points.iter().enumerate().skip(1) {
        let d = dist2(x, p);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [0; 3].map(|_| rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn singleton_and_stored_point() {
        let t = KdTree::new(vec![[0.3, 0.1, -0.2]]);
        assert_eq!(t.nearest([5.0, 5.0, 5.0]).unwrap().0, 0);
        let pts = cloud(50, 1);
        let t = KdTree::from_slice(&pts);
        assert_eq!(t.nearest(pts[17]).unwrap(), (17, 0.0));
    }

    #[test]
    fn empty_is_domain_error() {
        let t = KdTree::new(Vec::new());
        assert!(matches!(t.nearest([0.0; 3]), Err(Error::Domain(_))));
        assert!(t.knn([0.0; 3], 3).is_empty());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let pts = vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
        let t = KdTree::from_slice(&pts);
        assert_eq!(t.nearest([0.0; 3]).unwrap().0, 0);
        let k = t.knn([1.0, 0.0, 0.0], 2);
        assert_eq!(k, vec![(0, 0.0), (3, 0.0)]);
    }

    #[test]
    fn matches_linear_scan_on_ten_thousand_points() {
        let pts = cloud(10_000, 2);
        let t = KdTree::from_slice(&pts);
        for q in cloud(1000, 3) {
            assert_eq!(t.nearest(q).unwrap(), nearest_brute(&pts, q).unwrap());
        }
    }

    #[test]
    fn knn_clamps_and_sorts() {
        let pts = cloud(7, 4);
        let t = KdTree::from_slice(&pts);
        let q = [0.1, 0.2, 0.3];
        let k = t.knn(q, 50);
        assert_eq!(k.len(), 7);
        let mut brute: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, &p)| (i, dist2(q, p))).collect();
        brute.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        assert_eq!(k, brute);
    }

    proptest! {
        #[test]
        fn knn_equals_sorted_scan(seed in 0u64..1000, n in 1usize..200, k in 1usize..12) {
            // coarse grid coordinates force plenty of distance ties
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<[f64; 3]> = (0..n).map(|_| [0; 3].map(|_| rng.random_range(-3i32..=3) as f64 * 0.25)).collect();
            let t = KdTree::from_slice(&pts);
            let q = [0; 3].map(|_| rng.random_range(-3i32..=3) as f64 * 0.25);
            let mut brute: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, &p)| (i, dist2(q, p))).collect();
            brute.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            brute.truncate(k);
            prop_assert_eq!(t.knn(q, k), brute);
            prop_assert_eq!(t.nearest(q).unwrap(), nearest_brute(&pts, q).unwrap());
        }
    }
}
