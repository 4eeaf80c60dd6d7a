//! Rigid transforms, annotation boxes, pinhole cameras and point clouds.
//!
//! All world-frame arithmetic is done in `f64`; payload files store `f32`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use nalgebra::{Matrix3, Point2, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Semantic class index into an [`Ontology`](crate::ontology::Ontology).
pub type ClassId = u8;

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Opaque object track identifier. Ordering is used for deterministic
/// tie-breaks between overlapping boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrackId(pub u64);

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Coordinate frame a point cloud is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Sensor,
    Ego,
    World,
    ObjectCanonical,
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let mut a = yaw.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// Rotation about +z by `yaw` radians.
pub fn yaw_rotation(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rigid transform `p' = R·p + t` stamped with the time it is valid at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub timestamp: i64,
}

impl Pose {
    /// Builds a pose, rejecting rotations that are not proper orthonormal
    /// matrices.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, timestamp: i64) -> Result<Self> {
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.iter().any(|v| v.abs() > ORTHONORMAL_TOL || !v.is_finite()) {
            return Err(Error::InvalidPose("rotation is not orthonormal".into()));
        }
        if (rotation.determinant() - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidPose("rotation has determinant != +1".into()));
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose("translation is not finite".into()));
        }
        Ok(Pose {
            rotation,
            translation,
            timestamp,
        })
    }

    pub fn identity(timestamp: i64) -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            timestamp,
        }
    }

    pub fn from_translation(translation: Vector3<f64>, timestamp: i64) -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation,
            timestamp,
        }
    }

    /// Yaw rotation about +z followed by a translation.
    pub fn from_yaw(yaw: f64, translation: Vector3<f64>, timestamp: i64) -> Self {
        Pose {
            rotation: yaw_rotation(yaw),
            translation,
            timestamp,
        }
    }

    /// Roll/pitch/yaw (intrinsic z-y-x) rotation followed by a translation.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64, translation: Vector3<f64>, timestamp: i64) -> Self {
        Pose {
            rotation: *Rotation3::from_euler_angles(roll, pitch, yaw).matrix(),
            translation,
            timestamp,
        }
    }

    #[inline]
    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Transforms every point of `cloud`, relabelling it as `target` frame.
    pub fn apply(&self, cloud: &PointCloud, target: Frame) -> PointCloud {
        PointCloud {
            points: cloud.points.iter().map(|p| self.apply_point(p)).collect(),
            labels: cloud.labels.clone(),
            frame: target,
        }
    }

    /// `self ∘ other`: applying the result equals applying `other` then `self`.
    /// The timestamp is taken from `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            timestamp: self.timestamp,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
            timestamp: self.timestamp,
        }
    }

    /// Origin of the source frame expressed in the target frame.
    pub fn origin(&self) -> Point3<f64> {
        Point3::from(self.translation)
    }
}

/// Yaw-only oriented box annotation in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub center: Point3<f64>,
    /// Full extents along the box's local x, y, z axes.
    pub size: Vector3<f64>,
    /// Heading in `(-π, π]`.
    pub yaw: f64,
    pub class_id: ClassId,
    pub track_id: TrackId,
    pub timestamp: i64,
}

impl Box3D {
    pub fn new(
        center: Point3<f64>,
        size: Vector3<f64>,
        yaw: f64,
        class_id: ClassId,
        track_id: TrackId,
        timestamp: i64,
    ) -> Result<Self> {
        if size.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidBox(format!("size {size:?} must be positive")));
        }
        if !yaw.is_finite() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBox("non-finite pose".into()));
        }
        Ok(Box3D {
            center,
            size,
            yaw: normalize_yaw(yaw),
            class_id,
            track_id,
            timestamp,
        })
    }

    /// Box-to-world transform (canonical frame: center at origin, yaw zero).
    pub fn pose(&self) -> Pose {
        Pose::from_yaw(self.yaw, self.center.coords, self.timestamp)
    }

    /// Expresses a world point in the box's canonical frame.
    #[inline]
    pub fn to_local(&self, p: &Point3<f64>) -> Point3<f64> {
        let (s, c) = self.yaw.sin_cos();
        let d = p - self.center;
        Point3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z)
    }

    /// Half-open containment: the local point must lie in `[-size/2, size/2)`
    /// on every axis.
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let local = self.to_local(p);
        (0..3).all(|i| {
            let h = 0.5 * self.size[i];
            local[i] >= -h && local[i] < h
        })
    }

    /// Same as [`contains`](Self::contains) with the box grown by `margin` on
    /// every side.
    pub fn contains_with_margin(&self, p: &Point3<f64>, margin: f64) -> bool {
        let local = self.to_local(p);
        (0..3).all(|i| {
            let h = 0.5 * self.size[i] + margin;
            local[i] >= -h && local[i] < h
        })
    }

    /// Interpolates between two annotations of the same track.
    ///
    /// Center and size are blended linearly, yaw along the shorter arc.
    /// `alpha` of exactly 0 or 1 returns the corresponding endpoint unchanged.
    pub fn interpolate(a: &Box3D, b: &Box3D, alpha: f64) -> Result<Box3D> {
        if a.track_id != b.track_id {
            return Err(Error::TrackMismatch(a.track_id, b.track_id));
        }
        if a.timestamp >= b.timestamp {
            return Err(Error::NonIncreasingTimestamps(a.timestamp, b.timestamp));
        }
        if alpha == 0.0 {
            return Ok(*a);
        }
        if alpha == 1.0 {
            return Ok(*b);
        }
        let lerp = |x: f64, y: f64| (1.0 - alpha) * x + alpha * y;
        let delta = normalize_yaw(b.yaw - a.yaw);
        let span = (b.timestamp - a.timestamp) as f64;
        Ok(Box3D {
            center: Point3::new(
                lerp(a.center.x, b.center.x),
                lerp(a.center.y, b.center.y),
                lerp(a.center.z, b.center.z),
            ),
            size: Vector3::new(
                lerp(a.size.x, b.size.x),
                lerp(a.size.y, b.size.y),
                lerp(a.size.z, b.size.z),
            ),
            yaw: normalize_yaw(a.yaw + alpha * delta),
            class_id: a.class_id,
            track_id: a.track_id,
            timestamp: a.timestamp + (alpha * span).round() as i64,
        })
    }
}

/// Result of projecting a world point through a pinhole camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    InImage { pixel: Point2<f64>, depth: f64 },
    OutOfImage { pixel: Point2<f64>, depth: f64 },
    BehindCamera { depth: f64 },
}

impl Projection {
    pub fn is_in_image(&self) -> bool {
        matches!(self, Projection::InImage { .. })
    }
}

/// Distortion-free pinhole camera. Camera axes: x right, y down, z forward.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub id: String,
    pub intrinsics: Matrix3<f64>,
    /// Camera-to-world (or camera-to-ego, depending on context).
    pub extrinsics: Pose,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn new(
        id: impl Into<String>,
        intrinsics: Matrix3<f64>,
        extrinsics: Pose,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let k = &intrinsics;
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0) {
            return Err(Error::InvalidCamera("focal lengths must be positive".into()));
        }
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 || k[(2, 2)] != 1.0 {
            return Err(Error::InvalidCamera(
                "intrinsics must be upper triangular with k22 = 1".into(),
            ));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidCamera("image size must be non-zero".into()));
        }
        Ok(Camera {
            id: id.into(),
            intrinsics,
            extrinsics,
            width,
            height,
        })
    }

    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64) -> Matrix3<f64> {
        Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0)
    }

    /// Optical center in the extrinsics' target frame.
    pub fn center(&self) -> Point3<f64> {
        self.extrinsics.origin()
    }

    /// Re-expresses the camera after moving its reference frame by `pose`
    /// (e.g. camera-to-ego composed with ego-to-world).
    pub fn transformed(&self, pose: &Pose) -> Camera {
        Camera {
            extrinsics: pose.compose(&self.extrinsics),
            ..self.clone()
        }
    }

    pub fn project(&self, p: &Point3<f64>) -> Projection {
        let inv = self.extrinsics.inverse();
        let pc = inv.apply_point(p);
        let depth = pc.z;
        if !(depth > 0.0) {
            return Projection::BehindCamera { depth };
        }
        let h = self.intrinsics * pc.coords;
        let pixel = Point2::new(h.x / h.z, h.y / h.z);
        let inside = pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x < f64::from(self.width)
            && pixel.y < f64::from(self.height);
        if inside {
            Projection::InImage { pixel, depth }
        } else {
            Projection::OutOfImage { pixel, depth }
        }
    }
}

/// Columnar point set with optional per-point class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub labels: Option<Vec<ClassId>>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>, labels: Option<Vec<ClassId>>, frame: Frame) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(Error::InvalidCloud(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.len()
                )));
            }
        }
        Ok(PointCloud {
            points,
            labels,
            frame,
        })
    }

    pub fn empty(frame: Frame) -> Self {
        PointCloud {
            points: Vec::new(),
            labels: None,
            frame,
        }
    }

    pub fn empty_labeled(frame: Frame) -> Self {
        PointCloud {
            points: Vec::new(),
            labels: Some(Vec::new()),
            frame,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn label(&self, i: usize) -> Option<ClassId> {
        self.labels.as_ref().map(|l| l[i])
    }

    /// Axis-aligned bounds `(min, max)`, or `None` for an empty cloud.
    pub fn extent(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }
}
