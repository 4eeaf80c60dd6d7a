//! Seeded workloads shared by the benchmarks.

use nalgebra::Point3;
use occ3d::{GridSpec, Ray};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point_in(spec: &GridSpec, rng: &mut ChaCha8Rng) -> Point3<f64> {
    Point3::new(
        rng.gen_range(spec.min[0]..spec.max[0]),
        rng.gen_range(spec.min[1]..spec.max[1]),
        rng.gen_range(spec.min[2]..spec.max[2]),
    )
}

/// LiDAR-like rays from near the grid center to random endpoints inside it.
pub fn lidar_rays(spec: &GridSpec, n: usize, seed: u64) -> Vec<Ray> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .filter_map(|_| {
            let origin = Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0));
            Ray::lidar(origin, point_in(spec, &mut rng)).ok()
        })
        .collect()
}

/// Uniform random points inside the grid, labeled with classes `0..classes`.
pub fn labeled_points(spec: &GridSpec, n: usize, classes: u8, seed: u64) -> (Vec<Point3<f64>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n).map(|_| point_in(spec, &mut rng)).collect();
    let labels = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    (points, labels)
}
