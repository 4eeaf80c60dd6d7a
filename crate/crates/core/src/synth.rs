//! Analytic test scenes: primitives with exact ray intersection, a simulated
//! spinning LiDAR, pinhole camera rigs, and center-point ground truth.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::FrameBundle;
use crate::error::{Error, Result};
use crate::geom::{Box3D, Camera, ClassId, Frame, PointCloud, Pose, TrackId};
use crate::io::SceneBundle;
use crate::ontology::Ontology;
use crate::visibility::{MaskKind, VisibilityMask, OBSERVED};
use crate::voxel::{GridPreset, GridSpec, OccGrid, VoxelState};

/// Grid either by preset name or by explicit range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Preset { preset: GridPreset },
    Explicit { min: [f64; 3], max: [f64; 3], voxel_size: f64 },
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        match self {
            GridConfig::Preset { preset } => Ok(preset.spec()),
            GridConfig::Explicit { min, max, voxel_size } => GridSpec::new(*min, *max, *voxel_size),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// Yaw-oriented box; half-open extents like [`Box3D::contains`].
    Box { center: [f64; 3], size: [f64; 3], yaw: f64 },
    /// Horizontal layer `z_min <= z < z_max`, unbounded in x and y.
    Slab { z_min: f64, z_max: f64 },
}

/// Constant linear velocity (m/s) and yaw rate (rad/s) from t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    pub velocity: [f64; 3],
    #[serde(default)]
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    pub class_id: ClassId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<Motion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarPattern {
    pub azimuth_count: usize,
    pub elevations_deg: Vec<f64>,
    pub max_range: f64,
    /// Sensor position in the ego frame.
    #[serde(default)]
    pub mount: [f64; 3],
    /// Random azimuth offset per beam, as a fraction of the azimuth spacing.
    #[serde(default)]
    pub azimuth_jitter: f64,
}

impl LidarPattern {
    /// `count` elevations evenly spaced over `[lo, hi]` degrees.
    pub fn uniform_elevations(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        if count == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect()
    }

    pub fn beam_count(&self) -> usize {
        self.azimuth_count * self.elevations_deg.len()
    }
}

/// Horizontal pinhole camera mounted on the ego vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub id: String,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub mount: [f64; 3],
    /// Viewing direction in the ego frame, radians from +x.
    pub yaw: f64,
}

impl CameraRig {
    /// Camera-to-ego camera (x right, y down, z forward).
    pub fn camera(&self) -> Result<Camera> {
        let (s, c) = self.yaw.sin_cos();
        let forward = Vector3::new(c, s, 0.0);
        let right = Vector3::new(s, -c, 0.0);
        let down = Vector3::new(0.0, 0.0, -1.0);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        let pose = Pose::new(rotation, Vector3::from(self.mount), 0)?;
        Camera::new(
            self.id.clone(),
            Camera::pinhole(self.fx, self.fy, self.cx, self.cy),
            pose,
            self.width,
            self.height,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoTrajectory {
    pub start: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub yaw_rate: f64,
}

impl EgoTrajectory {
    pub fn pose_at(&self, timestamp: i64) -> Pose {
        let t = timestamp as f64 * 1e-6;
        let p = Vector3::from(self.start) + Vector3::from(self.velocity) * t;
        Pose::from_yaw(self.yaw + self.yaw_rate * t, p, timestamp)
    }
}

/// Which simulated frames carry per-point labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolicy {
    All,
    Keyframes,
    None,
}

fn default_keyframe_interval() -> usize {
    1
}

fn default_label_policy() -> LabelPolicy {
    LabelPolicy::All
}

/// Complete description of a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScript {
    pub scene_id: String,
    pub grid: GridConfig,
    #[serde(default = "Ontology::waymo")]
    pub ontology: Ontology,
    pub primitives: Vec<Primitive>,
    pub lidar: LidarPattern,
    #[serde(default)]
    pub cameras: Vec<CameraRig>,
    pub ego: EgoTrajectory,
    pub frames: usize,
    pub period_us: i64,
    #[serde(default = "default_keyframe_interval")]
    pub keyframe_interval: usize,
    #[serde(default = "default_label_policy")]
    pub point_labels: LabelPolicy,
    #[serde(default)]
    pub seed: u64,
}

impl Primitive {
    fn box_at(&self, t: f64) -> Option<(Point3<f64>, Vector3<f64>, f64)> {
        let Shape::Box { center, size, yaw } = &self.shape else {
            return None;
        };
        let (v, w) = self
            .motion
            .map(|m| (Vector3::from(m.velocity), m.yaw_rate))
            .unwrap_or((Vector3::zeros(), 0.0));
        Some((Point3::from(*center) + v * t, Vector3::from(*size), yaw + w * t))
    }

    /// World-frame box at `timestamp` (None for slabs).
    pub fn box3d_at(&self, timestamp: i64, track: TrackId) -> Option<Box3D> {
        let (c, s, yaw) = self.box_at(timestamp as f64 * 1e-6)?;
        Box3D::new(c, s, yaw, self.class_id, track, timestamp).ok()
    }

    pub fn contains(&self, p: &Point3<f64>, timestamp: i64) -> bool {
        match &self.shape {
            Shape::Slab { z_min, z_max } => p.z >= *z_min && p.z < *z_max,
            Shape::Box { .. } => self
                .box3d_at(timestamp, TrackId(0))
                .is_some_and(|b| b.contains(p)),
        }
    }

    /// Parameter interval `(t_in, t_out)` where `origin + t·dir` lies inside
    /// the primitive, if any.
    pub fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>, timestamp: i64) -> Option<(f64, f64)> {
        match &self.shape {
            Shape::Slab { z_min, z_max } => slab_interval(origin.z, dir.z, *z_min, *z_max),
            Shape::Box { .. } => {
                let (c, size, yaw) = self.box_at(timestamp as f64 * 1e-6)?;
                let (s, co) = yaw.sin_cos();
                let d = origin - c;
                let o = Vector3::new(co * d.x + s * d.y, -s * d.x + co * d.y, d.z);
                let v = Vector3::new(co * dir.x + s * dir.y, -s * dir.x + co * dir.y, dir.z);
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for a in 0..3 {
                    let h = 0.5 * size[a];
                    let (l, u) = slab_interval(o[a], v[a], -h, h)?;
                    lo = lo.max(l);
                    hi = hi.min(u);
                }
                (lo < hi).then_some((lo, hi))
            }
        }
    }

    /// Distance from `p` to the primitive's boundary surface.
    pub fn surface_distance(&self, p: &Point3<f64>, timestamp: i64) -> f64 {
        match &self.shape {
            Shape::Slab { z_min, z_max } => (p.z - z_min).abs().min((p.z - z_max).abs()),
            Shape::Box { .. } => {
                let b = self.box3d_at(timestamp, TrackId(0)).expect("box");
                let l = b.to_local(p);
                let mut outside = 0.0f64;
                let mut inside = f64::INFINITY;
                for a in 0..3 {
                    let h = 0.5 * b.size[a];
                    let e = l[a].abs() - h;
                    outside += e.max(0.0).powi(2);
                    inside = inside.min(-e);
                }
                if outside > 0.0 {
                    outside.sqrt()
                } else {
                    inside.max(0.0)
                }
            }
        }
    }
}

fn slab_interval(o: f64, d: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if d == 0.0 {
        return (o >= lo && o < hi).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let a = (lo - o) / d;
    let b = (hi - o) / d;
    Some((a.min(b), a.max(b)))
}

impl SceneScript {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: SceneScript =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("scene script: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        self.grid.spec()
    }

    pub fn timestamp(&self, frame: usize) -> i64 {
        frame as i64 * self.period_us
    }

    pub fn is_keyframe(&self, frame: usize) -> bool {
        frame.is_multiple_of(self.keyframe_interval.max(1))
    }

    pub fn ego_pose(&self, frame: usize) -> Pose {
        self.ego.pose_at(self.timestamp(frame))
    }

    pub fn lidar_extrinsic(&self) -> Pose {
        Pose::from_translation(Vector3::from(self.lidar.mount), 0)
    }

    /// Camera-to-ego cameras.
    pub fn cameras(&self) -> Result<Vec<Camera>> {
        self.cameras.iter().map(CameraRig::camera).collect()
    }

    /// Checks ranges, class ids, and that every box stays inside the grid
    /// (placed at the ego pose) for every frame.
    pub fn validate(&self) -> Result<()> {
        let spec = self.grid_spec()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.frames == 0 || self.period_us <= 0 {
            return bad("frames and period_us must be positive".into());
        }
        if self.lidar.azimuth_count == 0 || self.lidar.elevations_deg.is_empty() || !(self.lidar.max_range > 0.0) {
            return bad("lidar pattern is empty".into());
        }
        self.ontology.validate()?;
        for (i, p) in self.primitives.iter().enumerate() {
            if !self.ontology.contains(p.class_id) {
                return bad(format!("primitive {i}: class {} not in ontology", p.class_id));
            }
            match &p.shape {
                Shape::Slab { z_min, z_max } if !(z_min < z_max) => {
                    return bad(format!("primitive {i}: empty slab"));
                }
                Shape::Box { size, .. } if size.iter().any(|s| !(*s > 0.0)) => {
                    return bad(format!("primitive {i}: box size must be positive"));
                }
                _ => {}
            }
            for f in 0..self.frames {
                let ts = self.timestamp(f);
                let Some(b) = p.box3d_at(ts, TrackId(i as u64)) else {
                    continue;
                };
                let to_ego = self.ego_pose(f).inverse();
                for corner in box_corners(&b) {
                    let q = to_ego.apply_point(&corner);
                    if (0..3).any(|a| q[a] < spec.min[a] || q[a] > spec.max[a]) {
                        return bad(format!("primitive {i} leaves the grid at frame {f}"));
                    }
                }
            }
        }
        self.cameras()?;
        Ok(())
    }

    /// Nearest primitive hit along a ray, as `(t, primitive index)`.
    fn first_hit(&self, origin: &Point3<f64>, dir: &Vector3<f64>, timestamp: i64, max_t: f64) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (i, p) in self.primitives.iter().enumerate() {
            if let Some((t_in, _)) = p.intersect(origin, dir, timestamp) {
                if t_in > 0.0 && t_in <= max_t && best.is_none_or(|(bt, _)| t_in < bt) {
                    best = Some((t_in, i));
                }
            }
        }
        best
    }
}

fn box_corners(b: &Box3D) -> Vec<Point3<f64>> {
    let pose = b.pose();
    let h = b.size * 0.5;
    let mut out = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                out.push(pose.apply_point(&Point3::new(sx * h.x, sy * h.y, sz * h.z)));
            }
        }
    }
    out
}

/// One simulated LiDAR sweep. Returns are in the sensor frame; boxes are
/// emitted for every moving primitive with track id = primitive index.
pub fn simulate_lidar(script: &SceneScript, frame_index: usize) -> Result<FrameBundle> {
    if frame_index >= script.frames {
        return Err(Error::InvalidConfig(format!(
            "frame {frame_index} out of range ({} frames)",
            script.frames
        )));
    }
    let ts = script.timestamp(frame_index);
    let ego = script.ego_pose(frame_index);
    let extrinsic = script.lidar_extrinsic();
    let to_world = ego.compose(&extrinsic);
    let to_sensor = to_world.inverse();
    let origin = to_world.origin();
    let lidar = &script.lidar;
    let n_az = lidar.azimuth_count;
    let spacing = TAU / n_az as f64;

    let hits: Vec<Option<(Point3<f64>, ClassId)>> = (0..lidar.beam_count())
        .into_par_iter()
        .map(|beam| {
            let (ei, ai) = (beam / n_az, beam % n_az);
            let mut az = ai as f64 * spacing;
            if lidar.azimuth_jitter != 0.0 {
                // counter-based stream: (seed, frame) selects the stream, beam the offset
                let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
                rng.set_stream(frame_index as u64);
                rng.set_word_pos(beam as u128 * 4);
                az += (rng.gen::<f64>() - 0.5) * lidar.azimuth_jitter * spacing;
            }
            let el = lidar.elevations_deg[ei].to_radians();
            let local = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
            let dir = to_world.apply_vector(&local);
            script
                .first_hit(&origin, &dir, ts, lidar.max_range)
                .map(|(t, i)| (to_sensor.apply_point(&(origin + dir * t)), script.primitives[i].class_id))
        })
        .collect();

    let (points, classes): (Vec<_>, Vec<_>) = hits.into_iter().flatten().unzip();
    let labeled = match script.point_labels {
        LabelPolicy::All => true,
        LabelPolicy::Keyframes => script.is_keyframe(frame_index),
        LabelPolicy::None => false,
    };
    let boxes = script
        .primitives
        .iter()
        .enumerate()
        .filter(|(_, p)| p.motion.is_some())
        .filter_map(|(i, p)| p.box3d_at(ts, TrackId(i as u64)))
        .collect();
    Ok(FrameBundle {
        timestamp: ts,
        lidar_cloud: PointCloud::new(points, labeled.then_some(classes), Frame::Sensor)?,
        ego_pose: ego,
        lidar_extrinsic: extrinsic,
        boxes,
        is_keyframe: script.is_keyframe(frame_index),
    })
}

/// Simulates every frame of the script into a scene bundle.
pub fn generate_scene(script: &SceneScript) -> Result<SceneBundle> {
    script.validate()?;
    let frames = (0..script.frames)
        .map(|f| simulate_lidar(script, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(SceneBundle {
        scene_id: script.scene_id.clone(),
        ontology: script.ontology.clone(),
        lidar_extrinsic: script.lidar_extrinsic(),
        cameras: script.cameras()?,
        frames,
    })
}

/// Center-point ground truth in the ego frame of `frame_index`: a voxel is
/// occupied iff its center lies inside a primitive (first primitive wins),
/// free otherwise. The camera mask marks voxels whose center is in some
/// image and whose sight line from the camera center meets no primitive
/// before coming within one voxel diagonal of the center.
pub fn analytic_gt(script: &SceneScript, frame_index: usize) -> Result<(OccGrid, VisibilityMask)> {
    let spec = script.grid_spec()?;
    let ts = script.timestamp(frame_index);
    let ego = script.ego_pose(frame_index);

    let classes: Vec<Option<ClassId>> = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let w = ego.apply_point(&spec.center_unchecked(spec.unlinear(i)));
            script
                .primitives
                .iter()
                .find(|p| p.contains(&w, ts))
                .map(|p| p.class_id)
        })
        .collect();
    let mut grid = OccGrid::new(spec, VoxelState::Free);
    for (i, c) in classes.iter().enumerate() {
        if let Some(c) = c {
            grid.set_occupied(spec.unlinear(i), *c);
        }
    }

    let reach = spec.voxel_size * 3f64.sqrt();
    let mut mask = VisibilityMask::new(spec, MaskKind::Camera);
    for camera in script.cameras()? {
        let values: Vec<u8> = (0..spec.len())
            .into_par_iter()
            .map(|i| {
                let idx = spec.unlinear(i);
                let center = spec.center_unchecked(idx);
                if !camera.project(&center).is_in_image() {
                    return 0;
                }
                let eye = camera.center();
                let len = (center - eye).norm();
                // the sight line must stay clear until it is within one voxel
                // diagonal of the center
                let t_clear = 1.0 - reach / len;
                if t_clear <= 0.0 {
                    return OBSERVED;
                }
                // work in world coordinates for the primitive tests
                let eye_w = ego.apply_point(&eye);
                let dir_w = ego.apply_vector(&(center - eye));
                let blocked = script.primitives.iter().any(|p| {
                    p.intersect(&eye_w, &dir_w, ts)
                        .is_some_and(|(a, b)| a.max(0.0) < b.min(t_clear))
                });
                if blocked {
                    0
                } else {
                    OBSERVED
                }
            })
            .collect();
        let cam_mask = VisibilityMask::from_values(spec, MaskKind::Camera, values)?;
        mask.merge(&cam_mask)?;
    }
    Ok((grid, mask))
}

/// Ready-made scripts used by the test suites and the CLI demo.
pub mod scenes {
    use super::*;

    fn waymo_lidar(elevations: usize, azimuths: usize) -> LidarPattern {
        LidarPattern {
            azimuth_count: azimuths,
            elevations_deg: LidarPattern::uniform_elevations(-20.0, 20.0, elevations),
            max_range: 75.0,
            mount: [0.0, 0.0, 0.0],
            azimuth_jitter: 0.0,
        }
    }

    fn front_camera(id: &str, yaw: f64) -> CameraRig {
        CameraRig {
            id: id.into(),
            fx: 400.0,
            fy: 400.0,
            cx: 400.0,
            cy: 300.0,
            width: 800,
            height: 600,
            mount: [0.0, 0.0, 0.0],
            yaw,
        }
    }

    fn boxp(center: [f64; 3], size: [f64; 3], class_id: ClassId) -> Primitive {
        Primitive {
            shape: Shape::Box { center, size, yaw: 0.0 },
            class_id,
            motion: None,
        }
    }

    /// Closed room of one-voxel-thick walls around a slowly driving ego,
    /// plus thin pillars. Every wall face lies in the lower half of the
    /// voxel whose center is inside the wall, so surface returns voxelize
    /// exactly onto the center-point ground truth. The ego advances one
    /// voxel per frame, keeping every ego frame aligned with the lattice.
    pub fn walled_room(elevations: usize, azimuths: usize, frames: usize, seed: u64) -> SceneScript {
        let building = 10;
        let pole = 6;
        let z = [-2.1, 2.1];
        let zc = 0.5 * (z[0] + z[1]);
        let zs = z[1] - z[0];
        let mut primitives = vec![
            // x walls: faces at x = 10.1 and x = -10.1
            boxp([10.3, 0.0, zc], [0.4, 21.0, zs], building),
            boxp([-10.3, 0.0, zc], [0.4, 21.0, zs], building),
            // y walls
            boxp([0.0, 10.3, zc], [21.0, 0.4, zs], building),
            boxp([0.0, -10.3, zc], [21.0, 0.4, zs], building),
        ];
        for (x, y) in [(3.4, 5.0), (-5.0, -3.8), (6.2, -6.6)] {
            primitives.push(boxp([x, y, -0.4], [0.2, 0.2, 3.4], pole));
        }
        SceneScript {
            scene_id: format!("walled-room-{seed}"),
            grid: GridConfig::Preset {
                preset: GridPreset::Waymo,
            },
            ontology: Ontology::waymo(),
            primitives,
            lidar: waymo_lidar(elevations, azimuths),
            cameras: vec![front_camera("front", 0.0), front_camera("back", std::f64::consts::PI)],
            ego: EgoTrajectory {
                start: [-4.0, 0.0, 0.0],
                velocity: [4.0, 0.0, 0.0],
                yaw: 0.0,
                yaw_rate: 0.0,
            },
            frames,
            period_us: 100_000,
            keyframe_interval: 5,
            point_labels: LabelPolicy::Keyframes,
            seed,
        }
    }

    /// Far wall with a box occluder in front of a forward camera; the
    /// occluder's position and size vary with `seed`.
    pub fn occluder(seed: u64) -> SceneScript {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let road = 13;
        let vehicle = 1;
        let ox = rng.gen_range(5.0..12.0);
        let oy = rng.gen_range(-3.0..3.0);
        let size = [rng.gen_range(0.8..3.0), rng.gen_range(0.8..4.0), rng.gen_range(1.0..3.0)];
        let yaw = rng.gen_range(-1.0..1.0);
        SceneScript {
            scene_id: format!("occluder-{seed}"),
            grid: GridConfig::Explicit {
                min: [-4.0, -12.0, -2.0],
                max: [28.0, 12.0, 4.4],
                voxel_size: 0.4,
            },
            ontology: Ontology::waymo(),
            primitives: vec![
                Primitive {
                    shape: Shape::Box {
                        center: [ox, oy, 0.0],
                        size,
                        yaw,
                    },
                    class_id: vehicle,
                    motion: None,
                },
                boxp([22.0, 0.0, 0.5], [1.0, 20.0, 5.0], 10),
                Primitive {
                    shape: Shape::Slab { z_min: -1.9, z_max: -1.5 },
                    class_id: road,
                    motion: None,
                },
            ],
            lidar: LidarPattern {
                azimuth_count: 720,
                elevations_deg: LidarPattern::uniform_elevations(-25.0, 15.0, 32),
                max_range: 40.0,
                mount: [0.0, 0.0, 0.5],
                azimuth_jitter: 0.5,
            },
            cameras: vec![front_camera("front", 0.0)],
            ego: EgoTrajectory {
                start: [0.0, 0.0, 0.0],
                velocity: [0.0; 3],
                yaw: 0.0,
                yaw_rate: 0.0,
            },
            frames: 1,
            period_us: 100_000,
            keyframe_interval: 1,
            point_labels: LabelPolicy::All,
            seed,
        }
    }

    /// A car-sized box driving `distance` meters along +x over `frames`
    /// frames past a static sensor. At t = 0 every face lies inside a voxel
    /// whose center is inside the box.
    pub fn moving_object(frames: usize, distance: f64) -> SceneScript {
        let period_us = 100_000;
        let duration = (frames.max(2) - 1) as f64 * period_us as f64 * 1e-6;
        SceneScript {
            scene_id: "moving-object".into(),
            grid: GridConfig::Preset {
                preset: GridPreset::Waymo,
            },
            ontology: Ontology::waymo(),
            primitives: vec![Primitive {
                shape: Shape::Box {
                    center: [-5.0, 6.2, -0.6],
                    size: [4.2, 1.8, 1.4],
                    yaw: 0.0,
                },
                class_id: 1,
                motion: Some(Motion {
                    velocity: [distance / duration, 0.0, 0.0],
                    yaw_rate: 0.0,
                }),
            }],
            lidar: LidarPattern {
                azimuth_count: 1024,
                elevations_deg: LidarPattern::uniform_elevations(-20.0, 10.0, 32),
                max_range: 60.0,
                mount: [0.0, 0.0, 0.0],
                azimuth_jitter: 0.0,
            },
            cameras: vec![front_camera("front", std::f64::consts::FRAC_PI_2)],
            ego: EgoTrajectory {
                start: [0.0; 3],
                velocity: [0.0; 3],
                yaw: 0.0,
                yaw_rate: 0.0,
            },
            frames,
            period_us,
            keyframe_interval: 1,
            point_labels: LabelPolicy::All,
            seed: 0,
        }
    }
}
