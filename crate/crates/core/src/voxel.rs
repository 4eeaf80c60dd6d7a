//! Grid geometry and semantic voxelization of labeled point clouds.

use std::collections::HashMap;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{ClassId, PointCloud};
use crate::ontology::NO_CLASS;

/// Integer voxel coordinate `(ix, iy, iz)`.
pub type VoxelIndex = [usize; 3];

const DIMS_TOL: f64 = 1e-6;

/// Axis-aligned regular grid with cubic voxels. Cells are half-open:
/// `[min + i·s, min + (i+1)·s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub voxel_size: f64,
    pub dims: [usize; 3],
}

/// Named grid ranges used by the public benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridPreset {
    Waymo,
    Nuscenes,
}

impl GridPreset {
    pub fn range(self) -> ([f64; 3], [f64; 3]) {
        match self {
            GridPreset::Waymo => ([-40.0, -40.0, -5.0], [40.0, 40.0, 7.8]),
            GridPreset::Nuscenes => ([-40.0, -40.0, -1.0], [40.0, 40.0, 5.4]),
        }
    }

    pub fn spec(self) -> GridSpec {
        self.with_voxel_size(0.4).expect("preset ranges divide evenly")
    }

    pub fn with_voxel_size(self, voxel_size: f64) -> Result<GridSpec> {
        let (min, max) = self.range();
        GridSpec::new(min, max, voxel_size)
    }
}

impl GridSpec {
    pub fn new(min: [f64; 3], max: [f64; 3], voxel_size: f64) -> Result<Self> {
        if !(voxel_size > 0.0) || !voxel_size.is_finite() {
            return Err(Error::InvalidGrid(format!("voxel size {voxel_size} must be positive")));
        }
        let mut dims = [0usize; 3];
        for i in 0..3 {
            let span = max[i] - min[i];
            if !(span > 0.0) || !span.is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "axis {i}: max {} must exceed min {}",
                    max[i], min[i]
                )));
            }
            let n = (span / voxel_size).round();
            if n < 1.0 || n > u32::MAX as f64 {
                return Err(Error::InvalidGrid(format!("axis {i}: {n} cells")));
            }
            if (n * voxel_size - span).abs() >= DIMS_TOL {
                return Err(Error::InvalidGrid(format!(
                    "axis {i}: voxel size {voxel_size} does not divide range {span}"
                )));
            }
            dims[i] = n as usize;
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidGrid(format!("dims {dims:?} overflow")))?;
        Ok(GridSpec {
            min,
            max,
            voxel_size,
            dims,
        })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major linear index: x slowest, z fastest.
    #[inline]
    pub fn linear(&self, idx: VoxelIndex) -> usize {
        (idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]
    }

    #[inline]
    pub fn unlinear(&self, i: usize) -> VoxelIndex {
        let z = i % self.dims[2];
        let rest = i / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], z]
    }

    #[inline]
    pub fn contains_index(&self, idx: VoxelIndex) -> bool {
        (0..3).all(|i| idx[i] < self.dims[i])
    }

    /// Voxel containing `p`, or `None` when `p` lies outside the half-open
    /// grid box (points on a max face are outside).
    #[inline]
    pub fn world_to_voxel(&self, p: &Point3<f64>) -> Option<VoxelIndex> {
        let mut idx = [0usize; 3];
        for i in 0..3 {
            let f = ((p[i] - self.min[i]) / self.voxel_size).floor();
            if !(f >= 0.0 && f < self.dims[i] as f64) {
                return None;
            }
            idx[i] = f as usize;
        }
        Some(idx)
    }

    pub fn voxel_center(&self, idx: VoxelIndex) -> Result<Point3<f64>> {
        if !self.contains_index(idx) {
            return Err(Error::IndexOutOfRange {
                index: idx,
                dims: self.dims,
            });
        }
        Ok(self.center_unchecked(idx))
    }

    #[inline]
    pub(crate) fn center_unchecked(&self, idx: VoxelIndex) -> Point3<f64> {
        let s = self.voxel_size;
        Point3::new(
            self.min[0] + (idx[0] as f64 + 0.5) * s,
            self.min[1] + (idx[1] as f64 + 0.5) * s,
            self.min[2] + (idx[2] as f64 + 0.5) * s,
        )
    }

    /// Lower corner of a cell.
    #[inline]
    pub fn voxel_min(&self, idx: VoxelIndex) -> Point3<f64> {
        let s = self.voxel_size;
        Point3::new(
            self.min[0] + idx[0] as f64 * s,
            self.min[1] + idx[1] as f64 * s,
            self.min[2] + idx[2] as f64 * s,
        )
    }

    /// Equality with a small tolerance on the float fields, for specs that
    /// went through `f32`/JSON round trips.
    pub fn same_as(&self, other: &GridSpec) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs());
        self.dims == other.dims
            && close(self.voxel_size, other.voxel_size)
            && (0..3).all(|i| close(self.min[i], other.min[i]) && close(self.max[i], other.max[i]))
    }
}

/// Per-voxel occupancy state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum VoxelState {
    Unobserved = 0,
    Free = 1,
    Occupied = 2,
}

impl VoxelState {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(VoxelState::Unobserved),
            1 => Some(VoxelState::Free),
            2 => Some(VoxelState::Occupied),
            _ => None,
        }
    }
}

/// Dense occupancy grid. `semantics[i]` holds a class id exactly where
/// `state[i]` is `Occupied`, and [`NO_CLASS`] elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct OccGrid {
    spec: GridSpec,
    state: Vec<VoxelState>,
    semantics: Vec<ClassId>,
}

impl OccGrid {
    pub fn new(spec: GridSpec, fill: VoxelState) -> Self {
        assert_ne!(fill, VoxelState::Occupied, "occupied voxels need a class");
        OccGrid {
            spec,
            state: vec![fill; spec.len()],
            semantics: vec![NO_CLASS; spec.len()],
        }
    }

    pub fn unobserved(spec: GridSpec) -> Self {
        Self::new(spec, VoxelState::Unobserved)
    }

    pub fn from_parts(spec: GridSpec, state: Vec<VoxelState>, semantics: Vec<ClassId>) -> Result<Self> {
        if state.len() != spec.len() || semantics.len() != spec.len() {
            return Err(Error::Invariant(format!(
                "grid body has {}/{} voxels, spec needs {}",
                state.len(),
                semantics.len(),
                spec.len()
            )));
        }
        for (i, (s, c)) in state.iter().zip(&semantics).enumerate() {
            let occupied = *s == VoxelState::Occupied;
            if occupied == (*c == NO_CLASS) {
                return Err(Error::Invariant(format!(
                    "voxel {:?}: state {s:?} with class {c}",
                    spec.unlinear(i)
                )));
            }
        }
        Ok(OccGrid {
            spec,
            state,
            semantics,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn states(&self) -> &[VoxelState] {
        &self.state
    }

    pub fn semantics(&self) -> &[ClassId] {
        &self.semantics
    }

    #[inline]
    pub fn state_at(&self, linear: usize) -> VoxelState {
        self.state[linear]
    }

    pub fn state(&self, idx: VoxelIndex) -> VoxelState {
        self.state[self.spec.linear(idx)]
    }

    /// Class of an occupied voxel.
    pub fn class(&self, idx: VoxelIndex) -> Option<ClassId> {
        let i = self.spec.linear(idx);
        (self.state[i] == VoxelState::Occupied).then_some(self.semantics[i])
    }

    #[inline]
    pub fn is_occupied_at(&self, linear: usize) -> bool {
        self.state[linear] == VoxelState::Occupied
    }

    pub fn set_occupied(&mut self, idx: VoxelIndex, class: ClassId) {
        assert_ne!(class, NO_CLASS);
        let i = self.spec.linear(idx);
        self.state[i] = VoxelState::Occupied;
        self.semantics[i] = class;
    }

    pub fn set_state(&mut self, idx: VoxelIndex, state: VoxelState) {
        assert_ne!(state, VoxelState::Occupied, "use set_occupied");
        let i = self.spec.linear(idx);
        self.state[i] = state;
        self.semantics[i] = NO_CLASS;
    }

    pub(crate) fn set_state_at(&mut self, linear: usize, state: VoxelState) {
        debug_assert_ne!(state, VoxelState::Occupied);
        self.state[linear] = state;
        self.semantics[linear] = NO_CLASS;
    }

    pub fn count(&self, state: VoxelState) -> usize {
        self.state.iter().filter(|s| **s == state).count()
    }

    /// Linear indices of occupied voxels, ascending.
    pub fn occupied_indices(&self) -> Vec<usize> {
        self.state
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == VoxelState::Occupied)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoxelizeConfig {
    /// Minimum number of in-voxel points for a voxel to become occupied.
    pub min_points: u32,
    /// Class given to unlabeled points.
    pub general_object: ClassId,
}

impl Default for VoxelizeConfig {
    fn default() -> Self {
        VoxelizeConfig {
            min_points: 1,
            general_object: 0,
        }
    }
}

const SHARD: usize = 1 << 16;

/// Marks voxels holding at least `min_points` points as occupied with the
/// majority class among them (ties go to the smaller class id). Every other
/// voxel stays unobserved; free space only comes from ray casting.
pub fn voxelize(cloud: &PointCloud, spec: &GridSpec, config: &VoxelizeConfig) -> OccGrid {
    // key = linear << 8 | class
    let counts: HashMap<u64, u32> = cloud
        .points
        .par_chunks(SHARD)
        .enumerate()
        .map(|(shard, pts)| {
            let mut local: HashMap<u64, u32> = HashMap::new();
            for (j, p) in pts.iter().enumerate() {
                let Some(idx) = spec.world_to_voxel(p) else {
                    continue;
                };
                let class = cloud
                    .label(shard * SHARD + j)
                    .unwrap_or(config.general_object);
                let key = (spec.linear(idx) as u64) << 8 | u64::from(class);
                *local.entry(key).or_insert(0) += 1;
            }
            local
        })
        .reduce(HashMap::new, |a, b| {
            let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
            for (k, v) in small {
                *big.entry(k).or_insert(0) += v;
            }
            big
        });

    // per voxel: (total, best count, best class)
    let mut best: HashMap<usize, (u32, u32, ClassId)> = HashMap::with_capacity(counts.len());
    for (key, n) in counts {
        let linear = (key >> 8) as usize;
        let class = (key & 0xff) as ClassId;
        let e = best.entry(linear).or_insert((0, 0, NO_CLASS));
        e.0 += n;
        if n > e.1 || (n == e.1 && class < e.2) {
            e.1 = n;
            e.2 = class;
        }
    }

    let mut grid = OccGrid::unobserved(*spec);
    for (linear, (total, _, class)) in best {
        if total >= config.min_points.max(1) {
            grid.state[linear] = VoxelState::Occupied;
            grid.semantics[linear] = class;
        }
    }
    grid
}
