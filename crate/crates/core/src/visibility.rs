//! Ray casting through the voxel grid: LiDAR free-space carving and camera
//! occlusion reasoning.

use std::ops::ControlFlow;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Camera;
use crate::voxel::{GridSpec, OccGrid, VoxelIndex, VoxelState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RayKind {
    LidarReturn,
    CameraQuery,
}

/// Directed segment from a sensor origin to a return point (or query target).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point3<f64>,
    pub endpoint: Point3<f64>,
    pub kind: RayKind,
}

impl Ray {
    pub fn new(origin: Point3<f64>, endpoint: Point3<f64>, kind: RayKind) -> Result<Self> {
        if origin == endpoint {
            return Err(Error::DegenerateRay);
        }
        Ok(Ray {
            origin,
            endpoint,
            kind,
        })
    }

    pub fn lidar(origin: Point3<f64>, endpoint: Point3<f64>) -> Result<Self> {
        Self::new(origin, endpoint, RayKind::LidarReturn)
    }
}

/// Ordered cells crossed by the segment `ray.origin → ray.endpoint`, clipped
/// to the grid.
///
/// Cells the segment only grazes (zero-length intersection) are skipped. The
/// cell containing the endpoint is always the last entry when the endpoint is
/// inside the grid.
pub fn traverse_ray(spec: &GridSpec, ray: &Ray) -> Vec<VoxelIndex> {
    let mut out = Vec::new();
    walk(spec, &ray.origin, &ray.endpoint, |idx, _| {
        out.push(idx);
        ControlFlow::Continue(())
    });
    out
}

/// Integer-stepping voxel walk. `visit` receives each cell (and its linear
/// index) in order and may stop the walk early.
pub(crate) fn walk<F>(spec: &GridSpec, origin: &Point3<f64>, endpoint: &Point3<f64>, mut visit: F)
where
    F: FnMut(VoxelIndex, usize) -> ControlFlow<()>,
{
    let d = endpoint - origin;
    let s = spec.voxel_size;

    // Clip the parameter range [0, 1] against the grid box.
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for a in 0..3 {
        if d[a] == 0.0 {
            if origin[a] < spec.min[a] || origin[a] >= spec.max[a] {
                return;
            }
        } else {
            let ta = (spec.min[a] - origin[a]) / d[a];
            let tb = (spec.max[a] - origin[a]) / d[a];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    if !(t0 < t1) {
        return;
    }

    let mut idx = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    for a in 0..3 {
        let g = (origin[a] + t0 * d[a] - spec.min[a]) / s;
        let i = if d[a] < 0.0 { g.ceil() - 1.0 } else { g.floor() };
        idx[a] = (i as i64).clamp(0, spec.dims[a] as i64 - 1);
        step[a] = if d[a] > 0.0 {
            1
        } else if d[a] < 0.0 {
            -1
        } else {
            0
        };
    }
    let boundary = |a: usize, i: i64| -> f64 {
        let k = if step[a] > 0 { i + 1 } else { i };
        (spec.min[a] + k as f64 * s - origin[a]) / d[a]
    };
    for a in 0..3 {
        if step[a] != 0 {
            t_max[a] = boundary(a, idx[a]);
        }
    }

    let dims = [spec.dims[0] as i64, spec.dims[1] as i64, spec.dims[2] as i64];
    let mut t_enter = t0;
    let mut last: Option<VoxelIndex> = None;
    let mut prev: Option<VoxelIndex> = None;
    loop {
        // x -> y -> z on exact ties
        let mut a = 0;
        if t_max[1] < t_max[a] {
            a = 1;
        }
        if t_max[2] < t_max[a] {
            a = 2;
        }
        let t_exit = t_max[a].min(t1);
        if t_exit > t_enter {
            let cell = [idx[0] as usize, idx[1] as usize, idx[2] as usize];
            if visit(cell, spec.linear(cell)).is_break() {
                return;
            }
            prev = last;
            last = Some(cell);
        }
        if t_max[a] >= t1 {
            break;
        }
        idx[a] += step[a];
        if idx[a] < 0 || idx[a] >= dims[a] {
            break;
        }
        t_enter = t_max[a];
        t_max[a] = boundary(a, idx[a]);
    }

    if t1 == 1.0 {
        if let Some(end) = spec.world_to_voxel(endpoint) {
            if last != Some(end) && prev != Some(end) {
                let _ = visit(end, spec.linear(end));
            }
        }
    }
}

/// What a mask's bytes mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum MaskKind {
    /// [`LidarVisibility`] values.
    Lidar = 0,
    /// 0 = unobserved, 1 = observed.
    Camera = 1,
    /// 0 = excluded from evaluation, 1 = evaluated.
    Joint = 2,
}

impl MaskKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(MaskKind::Lidar),
            1 => Some(MaskKind::Camera),
            2 => Some(MaskKind::Joint),
            _ => None,
        }
    }

    pub fn max_value(self) -> u8 {
        match self {
            MaskKind::Lidar => LidarVisibility::Occupied as u8,
            MaskKind::Camera | MaskKind::Joint => 1,
        }
    }
}

/// LiDAR mask values, ordered by merge priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[repr(u8)]
pub enum LidarVisibility {
    Unobserved = 0,
    Free = 1,
    Occupied = 2,
}

pub const OBSERVED: u8 = 1;

/// Dense per-voxel visibility mask. Merging two masks of the same kind is an
/// elementwise `max`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMask {
    spec: GridSpec,
    kind: MaskKind,
    values: Vec<u8>,
}

impl VisibilityMask {
    pub fn new(spec: GridSpec, kind: MaskKind) -> Self {
        VisibilityMask {
            spec,
            kind,
            values: vec![0; spec.len()],
        }
    }

    pub fn from_values(spec: GridSpec, kind: MaskKind, values: Vec<u8>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Invariant(format!(
                "mask has {} voxels, spec needs {}",
                values.len(),
                spec.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| **v > kind.max_value()) {
            return Err(Error::Invariant(format!("value {v} invalid for {kind:?} mask")));
        }
        Ok(VisibilityMask { spec, kind, values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, idx: VoxelIndex) -> u8 {
        self.values[self.spec.linear(idx)]
    }

    pub fn lidar_state(&self, idx: VoxelIndex) -> LidarVisibility {
        match self.get(idx) {
            0 => LidarVisibility::Unobserved,
            1 => LidarVisibility::Free,
            _ => LidarVisibility::Occupied,
        }
    }

    pub fn is_observed(&self, idx: VoxelIndex) -> bool {
        self.get(idx) != 0
    }

    pub fn count(&self, value: u8) -> usize {
        self.values.iter().filter(|v| **v == value).count()
    }

    /// Evaluation flags of a joint mask.
    pub fn as_bools(&self) -> Vec<bool> {
        self.values.iter().map(|v| *v != 0).collect()
    }

    pub fn merge(&mut self, other: &VisibilityMask) -> Result<()> {
        if !self.spec.same_as(&other.spec) || self.kind != other.kind {
            return Err(Error::SpecMismatch);
        }
        join_into(&mut self.values, &other.values);
        Ok(())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [u8] {
        &mut self.values
    }
}

fn join_into(acc: &mut [u8], other: &[u8]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a = (*a).max(*b);
    }
}

/// Runs `cast` over `items` in parallel chunks, each chunk writing into its
/// own dense buffer, then joins the buffers with `max`.
fn cast_parallel<T, F>(len: usize, items: &[T], cast: F) -> Vec<u8>
where
    T: Sync,
    F: Fn(&T, &mut [u8]) + Sync,
{
    if items.is_empty() {
        return vec![0; len];
    }
    let threads = rayon::current_num_threads().max(1);
    let chunk = items.len().div_ceil(threads * 4).max(4096);
    items
        .par_chunks(chunk)
        .map(|part| {
            let mut buf = vec![0u8; len];
            for item in part {
                cast(item, &mut buf);
            }
            buf
        })
        .reduce_with(|mut a, b| {
            join_into(&mut a, &b);
            a
        })
        .unwrap_or_else(|| vec![0; len])
}

/// Casts one LiDAR ray into `buf`: cells before the first occupied voxel
/// become free, the endpoint cell becomes occupied.
fn cast_lidar_ray(spec: &GridSpec, occ: &OccGrid, ray: &Ray, buf: &mut [u8]) {
    let end = spec.world_to_voxel(&ray.endpoint).map(|i| spec.linear(i));
    walk(spec, &ray.origin, &ray.endpoint, |_, linear| {
        if occ.is_occupied_at(linear) || Some(linear) == end {
            return ControlFlow::Break(());
        }
        let v = &mut buf[linear];
        *v = (*v).max(LidarVisibility::Free as u8);
        ControlFlow::Continue(())
    });
    if let Some(e) = end {
        buf[e] = LidarVisibility::Occupied as u8;
    }
}

/// LiDAR visibility: a voxel is observed-occupied if a return lands in it and
/// observed-free if some ray passes through it before hitting occupied space.
pub fn lidar_visibility(spec: &GridSpec, occ: &OccGrid, rays: &[Ray]) -> Result<VisibilityMask> {
    if !spec.same_as(occ.spec()) {
        return Err(Error::SpecMismatch);
    }
    let values = cast_parallel(spec.len(), rays, |ray, buf| cast_lidar_ray(spec, occ, ray, buf));
    Ok(VisibilityMask {
        spec: *spec,
        kind: MaskKind::Lidar,
        values,
    })
}

/// Writes LiDAR free space into the occupancy grid. Occupied voxels are
/// never changed.
pub fn apply_lidar_mask(occ: &OccGrid, lidar: &VisibilityMask) -> Result<OccGrid> {
    if !occ.spec().same_as(lidar.spec()) || lidar.kind() != MaskKind::Lidar {
        return Err(Error::SpecMismatch);
    }
    let mut out = occ.clone();
    for (i, v) in lidar.values().iter().enumerate() {
        if *v == LidarVisibility::Free as u8 && !occ.is_occupied_at(i) {
            out.set_state_at(i, VoxelState::Free);
        }
    }
    Ok(out)
}

/// Cells marked observed by the camera ray from `center` to the center of
/// `target`: everything up to and including the first occupied voxel.
pub(crate) fn camera_ray<F>(spec: &GridSpec, occ: &OccGrid, center: &Point3<f64>, target: VoxelIndex, mut mark: F)
where
    F: FnMut(VoxelIndex, usize),
{
    let tc = spec.center_unchecked(target);
    if tc == *center {
        mark(target, spec.linear(target));
        return;
    }
    walk(spec, center, &tc, |idx, linear| {
        mark(idx, linear);
        if occ.is_occupied_at(linear) {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
}

/// Occupied voxels whose centers project into the camera image.
pub(crate) fn camera_targets(spec: &GridSpec, occ: &OccGrid, camera: &Camera) -> Vec<VoxelIndex> {
    occ.occupied_indices()
        .into_iter()
        .map(|i| spec.unlinear(i))
        .filter(|idx| camera.project(&spec.center_unchecked(*idx)).is_in_image())
        .collect()
}

/// Camera visibility for cameras whose extrinsics map into the grid frame.
///
/// For every occupied voxel seen in an image a ray is cast from the camera
/// center to the voxel center; voxels up to and including the first
/// occupied one are observed. Free voxels that lie on no such ray stay
/// unobserved.
pub fn camera_visibility(spec: &GridSpec, occ: &OccGrid, cameras: &[Camera]) -> Result<VisibilityMask> {
    if !spec.same_as(occ.spec()) {
        return Err(Error::SpecMismatch);
    }
    let mut mask = VisibilityMask::new(*spec, MaskKind::Camera);
    for camera in cameras {
        let center = camera.center();
        let targets = camera_targets(spec, occ, camera);
        let values = cast_parallel(spec.len(), &targets, |target, buf| {
            camera_ray(spec, occ, &center, *target, |_, linear| buf[linear] = OBSERVED);
        });
        join_into(mask.values_mut(), &values);
    }
    Ok(mask)
}

/// One cast camera ray and the cells it marked observed.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRayTrace {
    pub camera: usize,
    pub target: VoxelIndex,
    pub marked: Vec<VoxelIndex>,
}

/// Same rays as [`camera_visibility`], returned individually for auditing.
pub fn trace_camera_rays(spec: &GridSpec, occ: &OccGrid, cameras: &[Camera]) -> Vec<CameraRayTrace> {
    let mut out = Vec::new();
    for (ci, camera) in cameras.iter().enumerate() {
        let center = camera.center();
        for target in camera_targets(spec, occ, camera) {
            let mut marked = Vec::new();
            camera_ray(spec, occ, &center, target, |idx, _| marked.push(idx));
            out.push(CameraRayTrace {
                camera: ci,
                target,
                marked,
            });
        }
    }
    out
}

/// Evaluation mask: LiDAR-observed (free or occupied) and camera-observed.
pub fn finalize_masks(lidar: &VisibilityMask, camera: &VisibilityMask) -> Result<VisibilityMask> {
    if !lidar.spec.same_as(&camera.spec) || lidar.kind != MaskKind::Lidar || camera.kind != MaskKind::Camera {
        return Err(Error::SpecMismatch);
    }
    let values = lidar
        .values
        .iter()
        .zip(&camera.values)
        .map(|(l, c)| u8::from(*l != LidarVisibility::Unobserved as u8 && *c == OBSERVED))
        .collect();
    Ok(VisibilityMask {
        spec: lidar.spec,
        kind: MaskKind::Joint,
        values,
    })
}
