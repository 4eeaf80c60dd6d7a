//! End-to-end label generation for every keyframe of a scene.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregation::{
    interpolate_tracks, knn_label_vote, objects_from_splits, place_objects_with_origins, split_frames,
    AggregationConfig, FrameBundle, FrameSplit, ObjectCanonicalCloud,
};
use crate::error::{Error, Result};
use crate::geom::{Camera, ClassId, Frame, PointCloud, TrackId};
use crate::io::{self, SceneBundle};
use crate::visibility::{apply_lidar_mask, camera_visibility, finalize_masks, lidar_visibility, Ray, VisibilityMask};
use crate::voxel::{voxelize, GridSpec, OccGrid, VoxelizeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub grid: GridSpec,
    pub knn_k: usize,
    pub min_points: u32,
    pub aggregation: AggregationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            grid: crate::voxel::GridPreset::Waymo.spec(),
            knn_k: 5,
            min_points: 1,
            aggregation: AggregationConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        GridSpec::new(self.grid.min, self.grid.max, self.grid.voxel_size)?;
        if self.knn_k == 0 {
            return Err(Error::InvalidConfig("knn_k must be at least 1".into()));
        }
        if self.min_points == 0 {
            return Err(Error::InvalidConfig("min_points must be at least 1".into()));
        }
        if !(self.aggregation.canonical_margin >= 0.0) {
            return Err(Error::InvalidConfig("canonical_margin must be non-negative".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Labels of one keyframe, expressed in that keyframe's ego frame.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeLabels {
    pub frame_index: usize,
    pub timestamp: i64,
    pub occupancy: OccGrid,
    pub lidar: VisibilityMask,
    pub camera: VisibilityMask,
    pub joint: VisibilityMask,
}

/// Static scene in the world frame with one LiDAR origin per point and
/// every point labeled.
#[derive(Debug, Clone)]
pub struct StaticScene {
    pub cloud: PointCloud,
    pub origins: Vec<Point3<f64>>,
}

/// Gives every frame its interpolated boxes. Without any keyframe the frames
/// are returned unchanged.
pub fn annotate_frames(frames: &[FrameBundle]) -> Result<Vec<FrameBundle>> {
    let keyframes: Vec<FrameBundle> = frames.iter().filter(|f| f.is_keyframe).cloned().collect();
    if keyframes.is_empty() {
        return Ok(frames.to_vec());
    }
    let timestamps: Vec<i64> = frames.iter().map(|f| f.timestamp).collect();
    let mut boxes = interpolate_tracks(&keyframes, &timestamps)?;
    Ok(frames
        .iter()
        .map(|f| FrameBundle {
            boxes: boxes.remove(&f.timestamp).unwrap_or_default(),
            ..f.clone()
        })
        .collect())
}

/// Concatenates the static parts of all frames and labels the points of
/// unlabeled frames by KNN vote against the labeled ones. With no labeled
/// reference at all, every point becomes the general-object class.
pub fn label_static(splits: &[FrameSplit], k: usize, general_object: ClassId) -> Result<StaticScene> {
    let mut labeled = PointCloud::empty_labeled(Frame::World);
    let mut unlabeled = PointCloud::empty(Frame::World);
    // (is_labeled, position within its cloud) for each output point
    let mut order = Vec::new();
    let mut origins = Vec::new();
    for s in splits {
        let n = s.static_cloud.len();
        origins.extend(std::iter::repeat_n(s.sensor_origin, n));
        match &s.static_cloud.labels {
            Some(l) => {
                order.extend((labeled.len()..labeled.len() + n).map(|i| (true, i)));
                labeled.points.extend_from_slice(&s.static_cloud.points);
                labeled.labels.as_mut().unwrap().extend_from_slice(l);
            }
            None => {
                order.extend((unlabeled.len()..unlabeled.len() + n).map(|i| (false, i)));
                unlabeled.points.extend_from_slice(&s.static_cloud.points);
            }
        }
    }
    let voted = if unlabeled.is_empty() {
        Vec::new()
    } else if labeled.is_empty() {
        vec![general_object; unlabeled.len()]
    } else {
        knn_label_vote(&unlabeled, &labeled, k)?
    };
    let ref_labels = labeled.labels.as_ref().unwrap();
    let mut points = Vec::with_capacity(order.len());
    let mut labels = Vec::with_capacity(order.len());
    for (is_labeled, i) in order {
        if is_labeled {
            points.push(labeled.points[i]);
            labels.push(ref_labels[i]);
        } else {
            points.push(unlabeled.points[i]);
            labels.push(voted[i]);
        }
    }
    Ok(StaticScene {
        cloud: PointCloud::new(points, Some(labels), Frame::World)?,
        origins,
    })
}

/// Scene-wide aggregation shared by all keyframes.
#[derive(Debug, Clone)]
pub struct Aggregated {
    /// Frames with their interpolated boxes.
    pub frames: Vec<FrameBundle>,
    pub statics: StaticScene,
    pub objects: BTreeMap<TrackId, ObjectCanonicalCloud>,
}

/// Keyframe-local labeled cloud with one LiDAR origin per point.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeCloud {
    pub frame_index: usize,
    pub timestamp: i64,
    /// Ego frame of the keyframe.
    pub cloud: PointCloud,
    pub origins: Vec<Point3<f64>>,
}

/// Box interpolation, static/dynamic split, static label voting and
/// canonical object aggregation.
pub fn aggregate_scene(scene: &SceneBundle, config: &PipelineConfig) -> Result<Aggregated> {
    let stage = Error::in_stage;
    let frames = annotate_frames(&scene.frames).map_err(stage("interpolate_tracks"))?;
    let splits = split_frames(&frames, &config.aggregation);
    let statics = label_static(&splits, config.knn_k, scene.ontology.general_object).map_err(stage("knn_label_vote"))?;
    let objects = objects_from_splits(&splits);
    Ok(Aggregated {
        frames,
        statics,
        objects,
    })
}

impl Aggregated {
    pub fn keyframes(&self) -> Vec<usize> {
        (0..self.frames.len()).filter(|i| self.frames[*i].is_keyframe).collect()
    }

    /// Static points plus objects placed at the boxes of frame `fi`, in
    /// that frame's ego coordinates.
    pub fn keyframe_cloud(&self, fi: usize, config: &PipelineConfig) -> Result<KeyframeCloud> {
        let kf = self
            .frames
            .get(fi)
            .ok_or_else(|| Error::InvalidConfig(format!("frame {fi} out of range ({} frames)", self.frames.len())))?;
        let boxes: Vec<_> = kf
            .boxes
            .iter()
            .filter(|b| !config.aggregation.static_classes.contains(&b.class_id))
            .copied()
            .collect();
        let (placed, placed_origins) =
            place_objects_with_origins(&self.objects, &boxes).map_err(Error::in_stage("place_objects"))?;

        let to_ego = kf.ego_pose.inverse();
        let n = self.statics.cloud.len() + placed.len();
        let mut points = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut origins = Vec::with_capacity(n);
        for (cloud, o) in [(&self.statics.cloud, &self.statics.origins), (&placed, &placed_origins)] {
            points.extend(cloud.points.iter().map(|p| to_ego.apply_point(p)));
            labels.extend_from_slice(cloud.labels.as_deref().unwrap_or_default());
            origins.extend(o.iter().map(|p| to_ego.apply_point(p)));
        }
        Ok(KeyframeCloud {
            frame_index: fi,
            timestamp: kf.timestamp,
            cloud: PointCloud::new(points, Some(labels), Frame::Ego)?,
            origins,
        })
    }
}

/// Voxelization, LiDAR and camera visibility and the joint mask for one
/// keyframe cloud. Cameras are camera-to-ego.
pub fn label_keyframe(
    kc: &KeyframeCloud,
    cameras: &[Camera],
    general_object: ClassId,
    config: &PipelineConfig,
) -> Result<KeyframeLabels> {
    let stage = Error::in_stage;
    let spec = config.grid;
    let vcfg = VoxelizeConfig {
        min_points: config.min_points,
        general_object,
    };
    let occ = voxelize(&kc.cloud, &spec, &vcfg);
    let rays: Vec<Ray> = kc
        .cloud
        .points
        .iter()
        .zip(&kc.origins)
        .filter_map(|(p, o)| Ray::lidar(*o, *p).ok())
        .collect();
    let lidar = lidar_visibility(&spec, &occ, &rays).map_err(stage("lidar_visibility"))?;
    let occupancy = apply_lidar_mask(&occ, &lidar).map_err(stage("lidar_visibility"))?;
    let camera = camera_visibility(&spec, &occupancy, cameras).map_err(stage("camera_visibility"))?;
    let joint = finalize_masks(&lidar, &camera).map_err(stage("finalize_masks"))?;
    Ok(KeyframeLabels {
        frame_index: kc.frame_index,
        timestamp: kc.timestamp,
        occupancy,
        lidar,
        camera,
        joint,
    })
}

/// Runs the full label generation for every keyframe of `scene`.
///
/// Stages: box interpolation, static/dynamic split, static aggregation with
/// label voting, canonical object aggregation, object placement at each
/// keyframe, voxelization, LiDAR visibility, camera visibility, joint mask.
pub fn run_pipeline(scene: &SceneBundle, config: &PipelineConfig) -> Result<Vec<KeyframeLabels>> {
    config.validate()?;
    let agg = aggregate_scene(scene, config)?;
    agg.keyframes()
        .par_iter()
        .map(|&fi| {
            let kc = agg.keyframe_cloud(fi, config)?;
            label_keyframe(&kc, &scene.cameras, scene.ontology.general_object, config)
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    scene_id: &'a str,
    config_sha256: String,
    config: &'a PipelineConfig,
    keyframes: Vec<BTreeMap<&'static str, serde_json::Value>>,
}

pub const KEYFRAME_FILES: [&str; 4] = ["occupancy.oc3g", "lidar_mask.oc3m", "camera_mask.oc3m", "joint_mask.oc3m"];

pub fn keyframe_dir(out: &Path, frame_index: usize) -> std::path::PathBuf {
    out.join(format!("keyframe_{frame_index:06}"))
}

/// Writes one directory per keyframe plus `provenance.json`.
pub fn write_outputs(out: &Path, scene_id: &str, config: &PipelineConfig, labels: &[KeyframeLabels]) -> Result<()> {
    let mut keyframes = Vec::new();
    for kl in labels {
        let dir = keyframe_dir(out, kl.frame_index);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        io::write_grid(&dir.join(KEYFRAME_FILES[0]), &kl.occupancy)?;
        io::write_mask(&dir.join(KEYFRAME_FILES[1]), &kl.lidar)?;
        io::write_mask(&dir.join(KEYFRAME_FILES[2]), &kl.camera)?;
        io::write_mask(&dir.join(KEYFRAME_FILES[3]), &kl.joint)?;
        let mut entry = BTreeMap::new();
        entry.insert("frame_index", kl.frame_index.into());
        entry.insert("timestamp", kl.timestamp.into());
        entry.insert("occupied_voxels", kl.occupancy.count(crate::voxel::VoxelState::Occupied).into());
        keyframes.push(entry);
    }
    let prov = Provenance {
        tool: "occ3d",
        version: env!("CARGO_PKG_VERSION"),
        scene_id,
        config_sha256: config.hash(),
        config,
        keyframes,
    };
    let mut text = serde_json::to_string_pretty(&prov).map_err(|e| Error::Invariant(e.to_string()))?;
    text.push('\n');
    let path = out.join("provenance.json");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
