//! Exact k-nearest-neighbor queries over a fixed point set.
//!
//! Neighbors are ordered by `(squared distance, index)`, so equidistant points
//! resolve to the smaller index. This makes the k-NN sets nested in `k`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Point3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

const LEAF_SIZE: usize = 8;

/// Squared Euclidean distance, evaluated in a fixed order so that every
/// caller sees bit-identical values for the same pair.
#[inline]
pub fn dist2(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

#[derive(Debug, Clone)]
struct Node {
    lo: [f64; 3],
    hi: [f64; 3],
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Split { left: usize, right: usize },
}

/// A kd-tree over a snapshot of the cloud's positions.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<Point3<f64>>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// The combinatorial neighborhood of a point: the point itself plus its `k`
/// nearest other points.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub center: usize,
    /// Nearest first, excluding the center; length `k`.
    pub neighbors: Vec<usize>,
    /// Squared distances matching `neighbors`.
    pub dist2: Vec<f64>,
}

impl NeighborList {
    pub fn k(&self) -> usize {
        self.neighbors.len()
    }

    /// All members of the neighborhood, center first.
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.center).chain(self.neighbors.iter().copied())
    }

    /// The neighborhood restricted to the `k` nearest neighbors.
    pub fn prefix(&self, k: usize) -> NeighborList {
        let k = k.min(self.neighbors.len());
        NeighborList {
            center: self.center,
            neighbors: self.neighbors[..k].to_vec(),
            dist2: self.dist2[..k].to_vec(),
        }
    }
}

impl NeighborIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        Self::from_points(cloud.points())
    }

    pub fn from_points(points: &[Point3<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut index = NeighborIndex {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        index.build_node(0, points.len());
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = &self.points[i];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            kind: NodeKind::Leaf { start, end },
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] - lo[axis] == 0.0 {
            // all points coincide
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis]
                .total_cmp(&points[b][axis])
                .then(a.cmp(&b))
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id].kind = NodeKind::Split { left, right };
        id
    }

    fn box_dist2(node: &Node, q: &Point3<f64>) -> f64 {
        let mut d = 0.0;
        for a in 0..3 {
            let excess = if q[a] < node.lo[a] {
                node.lo[a] - q[a]
            } else if q[a] > node.hi[a] {
                q[a] - node.hi[a]
            } else {
                0.0
            };
            d += excess * excess;
        }
        d
    }

    fn search(&self, node: usize, q: &Point3<f64>, skip: usize, k: usize, heap: &mut BinaryHeap<Candidate>) {
        let n = &self.nodes[node];
        if heap.len() == k && Self::box_dist2(n, q) > heap.peek().unwrap().d2 {
            return;
        }
        match n.kind {
            NodeKind::Leaf { start, end } => {
                for &index in &self.order[start..end] {
                    if index == skip {
                        continue;
                    }
                    let c = Candidate {
                        d2: dist2(&self.points[index], q),
                        index,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            NodeKind::Split { left, right } => {
                let (dl, dr) = (
                    Self::box_dist2(&self.nodes[left], q),
                    Self::box_dist2(&self.nodes[right], q),
                );
                let (first, second) = if dl <= dr { (left, right) } else { (right, left) };
                self.search(first, q, skip, k, heap);
                self.search(second, q, skip, k, heap);
            }
        }
    }

    /// The `k` nearest neighbors of point `i`, excluding `i` itself.
    pub fn knn(&self, i: usize, k: usize) -> Result<NeighborList> {
        if i >= self.len() {
            return Err(Error::PointOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        if k == 0 || k > self.len() - 1 {
            return Err(Error::TooFewPoints {
                requested: k,
                available: self.len() - 1,
            });
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, &self.points[i], i, k, &mut heap);
        let sorted = heap.into_sorted_vec();
        Ok(NeighborList {
            center: i,
            neighbors: sorted.iter().map(|c| c.index).collect(),
            dist2: sorted.iter().map(|c| c.d2).collect(),
        })
    }
}

/// Mean distance from each point to its `m` nearest neighbors, averaged over the cloud.
pub fn mean_knn_distance(cloud: &PointCloud, m: usize) -> Result<f64> {
    let n = cloud.len();
    if n <= m {
        return Err(Error::TooFewPoints {
            requested: m,
            available: n.saturating_sub(1),
        });
    }
    let index = NeighborIndex::build(cloud)?;
    let per_point = (0..n)
        .into_par_iter()
        .map(|i| {
            index
                .knn(i, m)
                .map(|nb| nb.dist2.iter().map(|d| d.sqrt()).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_point.iter().sum::<f64>() / (n * m) as f64)
}
