//! Exact k-nearest-neighbor search over a static reference set.
//!
//! Small sets are scanned exhaustively; larger ones go through a uniform
//! spatial hash. Both paths return identical neighbor lists: candidates are
//! ordered by squared distance, then by reference index.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::Point3;

/// Reference sets smaller than this are searched by brute force.
pub const BRUTE_FORCE_BELOW: usize = 10_000;

const MEDIAN_SAMPLE: usize = 2048;
/// Queries needing more rings than this fall back to a full scan.
const MAX_RING: i64 = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub dist2: f64,
    pub index: usize,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded max-heap keeping the `k` smallest neighbors seen so far.
struct Best {
    k: usize,
    heap: BinaryHeap<Neighbor>,
}

impl Best {
    fn new(k: usize) -> Self {
        Best {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    fn offer(&mut self, n: Neighbor) {
        if self.heap.len() < self.k {
            self.heap.push(n);
        } else if let Some(top) = self.heap.peek() {
            if n < *top {
                self.heap.pop();
                self.heap.push(n);
            }
        }
    }

    fn full(&self) -> bool {
        self.heap.len() == self.k
    }

    fn worst(&self) -> Option<f64> {
        self.heap.peek().map(|n| n.dist2)
    }

    fn into_sorted(self) -> Vec<Neighbor> {
        self.heap.into_sorted_vec()
    }
}

#[inline]
fn dist2(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// Exhaustive search; the reference for correctness of the hashed path.
pub fn brute_force_knn(points: &[Point3<f64>], query: &Point3<f64>, k: usize) -> Vec<Neighbor> {
    let mut best = Best::new(k);
    for (index, p) in points.iter().enumerate() {
        best.offer(Neighbor {
            dist2: dist2(p, query),
            index,
        });
    }
    best.into_sorted()
}

struct SpatialHash {
    cell: f64,
    origin: Point3<f64>,
    lo: [i64; 3],
    hi: [i64; 3],
    cells: HashMap<[i64; 3], Vec<u32>>,
}

impl SpatialHash {
    fn build(points: &[Point3<f64>], cell: f64) -> Self {
        let origin = points
            .iter()
            .fold(points[0], |acc, p| acc.inf(p));
        let mut h = SpatialHash {
            cell,
            origin,
            lo: [i64::MAX; 3],
            hi: [i64::MIN; 3],
            cells: HashMap::new(),
        };
        for (i, p) in points.iter().enumerate() {
            let c = h.key(p);
            for a in 0..3 {
                h.lo[a] = h.lo[a].min(c[a]);
                h.hi[a] = h.hi[a].max(c[a]);
            }
            h.cells.entry(c).or_default().push(i as u32);
        }
        h
    }

    #[inline]
    fn key(&self, p: &Point3<f64>) -> [i64; 3] {
        let f = |a: usize| ((p[a] - self.origin[a]) / self.cell).floor() as i64;
        [f(0), f(1), f(2)]
    }

    /// Returns `None` when the query would need too many rings.
    fn knn(&self, points: &[Point3<f64>], q: &Point3<f64>, k: usize) -> Option<Vec<Neighbor>> {
        let qc = self.key(q);
        let mut best = Best::new(k);
        // rings needed before every occupied cell has been visited
        let reach = (0..3)
            .map(|a| (qc[a] - self.lo[a]).abs().max((self.hi[a] - qc[a]).abs()))
            .max()
            .unwrap_or(0);
        for r in 0..=reach {
            if r > MAX_RING {
                return None;
            }
            self.visit_shell(qc, r, |idx| {
                best.offer(Neighbor {
                    dist2: dist2(&points[idx], q),
                    index: idx,
                });
            });
            if best.full() {
                // every unvisited point lies outside the (2r+1)^3 block
                let bound = (0..3)
                    .map(|a| {
                        let lo = self.origin[a] + (qc[a] - r) as f64 * self.cell;
                        let hi = self.origin[a] + (qc[a] + r + 1) as f64 * self.cell;
                        (q[a] - lo).min(hi - q[a])
                    })
                    .fold(f64::INFINITY, f64::min)
                    .max(0.0);
                if best.worst().unwrap() < bound * bound {
                    break;
                }
            }
        }
        Some(best.into_sorted())
    }

    fn visit_shell(&self, c: [i64; 3], r: i64, mut f: impl FnMut(usize)) {
        let clamp = |a: usize| ((c[a] - r).max(self.lo[a]), (c[a] + r).min(self.hi[a]));
        let (x0, x1) = clamp(0);
        let (y0, y1) = clamp(1);
        let (z0, z1) = clamp(2);
        for x in x0..=x1 {
            let on_x = (x - c[0]).abs() == r;
            for y in y0..=y1 {
                let on_xy = on_x || (y - c[1]).abs() == r;
                if on_xy {
                    for z in z0..=z1 {
                        self.visit_cell([x, y, z], &mut f);
                    }
                } else {
                    for z in [c[2] - r, c[2] + r] {
                        if z >= z0 && z <= z1 {
                            self.visit_cell([x, y, z], &mut f);
                        }
                        if r == 0 {
                            break;
                        }
                    }
                }
            }
        }
    }

    #[inline]
    fn visit_cell(&self, key: [i64; 3], f: &mut impl FnMut(usize)) {
        if let Some(ids) = self.cells.get(&key) {
            for &i in ids {
                f(i as usize);
            }
        }
    }
}

/// Exact KNN index over a borrowed point set.
pub struct KnnIndex<'a> {
    points: &'a [Point3<f64>],
    hash: Option<SpatialHash>,
}

impl<'a> KnnIndex<'a> {
    pub fn new(points: &'a [Point3<f64>]) -> Self {
        let hash = (points.len() >= BRUTE_FORCE_BELOW).then(|| Self::build_hash(points));
        KnnIndex { points, hash }
    }

    /// Hash with cell size twice the median nearest-neighbor distance,
    /// estimated on an evenly strided sample.
    fn build_hash(points: &[Point3<f64>]) -> SpatialHash {
        let (lo, hi) = points
            .iter()
            .fold((points[0], points[0]), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        let ext = hi - lo;
        let n = points.len() as f64;
        let volume = ext.x.max(1e-3) * ext.y.max(1e-3) * ext.z.max(1e-3);
        let provisional = (volume / n).cbrt().max(1e-6);
        let coarse = SpatialHash::build(points, provisional);

        let stride = (points.len() / MEDIAN_SAMPLE).max(1);
        let mut nn: Vec<f64> = (0..points.len())
            .step_by(stride)
            .filter_map(|i| {
                let found = coarse
                    .knn(points, &points[i], 2)
                    .unwrap_or_else(|| brute_force_knn(points, &points[i], 2));
                found.into_iter().find(|n| n.index != i).map(|n| n.dist2.sqrt())
            })
            .collect();
        nn.sort_by(f64::total_cmp);
        let median = nn.get(nn.len() / 2).copied().unwrap_or(0.0);
        if median > 0.0 {
            SpatialHash::build(points, 2.0 * median)
        } else {
            coarse
        }
    }

    pub fn is_hashed(&self) -> bool {
        self.hash.is_some()
    }

    /// The `k` nearest reference points, closest first.
    pub fn knn(&self, query: &Point3<f64>, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        match &self.hash {
            Some(h) => h
                .knn(self.points, query, k)
                .unwrap_or_else(|| brute_force_knn(self.points, query, k)),
            None => brute_force_knn(self.points, query, k),
        }
    }
}
