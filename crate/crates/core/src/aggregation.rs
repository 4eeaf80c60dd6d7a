//! Multi-frame point aggregation with separate handling of boxed (dynamic)
//! objects.
//!
//! Static points are accumulated in the world frame using ego poses. Points
//! inside annotation boxes are moved into the box's canonical frame, where
//! observations from every frame line up regardless of object motion, and
//! are re-placed at the box pose of the frame being labeled.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Box3D, ClassId, Frame, PointCloud, Pose, TrackId};
use crate::knn::KnnIndex;

/// One LiDAR sweep with its calibration, pose and box annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    pub timestamp: i64,
    /// Points in the sensor frame.
    pub lidar_cloud: PointCloud,
    /// Ego-to-world.
    pub ego_pose: Pose,
    /// Sensor-to-ego.
    pub lidar_extrinsic: Pose,
    /// World-frame boxes stamped with this frame's timestamp.
    pub boxes: Vec<Box3D>,
    pub is_keyframe: bool,
}

impl FrameBundle {
    pub fn sensor_to_world(&self) -> Pose {
        self.ego_pose.compose(&self.lidar_extrinsic)
    }

    pub fn sensor_origin(&self) -> Point3<f64> {
        self.sensor_to_world().origin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationConfig {
    /// Boxes of these classes are ignored, so their points stay static.
    pub static_classes: Vec<ClassId>,
    /// Slack around box extents for canonical clouds.
    pub canonical_margin: f64,
    /// Boxes are grown by this much when deciding membership, so returns
    /// lying on a box face stay with the object.
    pub box_margin: f64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            static_classes: Vec::new(),
            canonical_margin: 0.25,
            box_margin: 0.05,
        }
    }
}

/// Points of one track from one frame, in the box's canonical frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalPoints {
    pub class_id: ClassId,
    pub size: nalgebra::Vector3<f64>,
    pub cloud: PointCloud,
    /// LiDAR origin of the source frame expressed in the canonical frame.
    pub sensor_origin: Point3<f64>,
}

/// Result of splitting one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSplit {
    /// World-frame points outside every box.
    pub static_cloud: PointCloud,
    pub sensor_origin: Point3<f64>,
    pub objects: BTreeMap<TrackId, CanonicalPoints>,
}

impl FrameSplit {
    pub fn total_points(&self) -> usize {
        self.static_cloud.len() + self.objects.values().map(|o| o.cloud.len()).sum::<usize>()
    }
}

/// Moves a frame into the world frame and separates boxed points. A point
/// inside several boxes (each grown by `box_margin`) goes to the one with the
/// smallest track id.
pub fn split_dynamic_static(frame: &FrameBundle, config: &AggregationConfig) -> FrameSplit {
    let to_world = frame.sensor_to_world();
    let sensor_origin = to_world.origin();
    let mut boxes: Vec<&Box3D> = frame
        .boxes
        .iter()
        .filter(|b| !config.static_classes.contains(&b.class_id))
        .collect();
    boxes.sort_by_key(|b| b.track_id);

    let labeled = frame.lidar_cloud.labels.is_some();
    let mut static_pts = Vec::new();
    let mut static_labels = Vec::new();
    let mut objects: BTreeMap<TrackId, CanonicalPoints> = boxes
        .iter()
        .map(|b| {
            (
                b.track_id,
                CanonicalPoints {
                    class_id: b.class_id,
                    size: b.size,
                    cloud: PointCloud::empty_labeled(Frame::ObjectCanonical),
                    sensor_origin: b.to_local(&sensor_origin),
                },
            )
        })
        .collect();

    for (i, p) in frame.lidar_cloud.points.iter().enumerate() {
        let w = to_world.apply_point(p);
        match boxes.iter().find(|b| b.contains_with_margin(&w, config.box_margin)) {
            Some(b) => {
                let o = objects.get_mut(&b.track_id).expect("entry per box");
                o.cloud.points.push(b.to_local(&w));
                o.cloud.labels.as_mut().unwrap().push(b.class_id);
            }
            None => {
                static_pts.push(w);
                if let Some(l) = frame.lidar_cloud.label(i) {
                    static_labels.push(l);
                }
            }
        }
    }
    FrameSplit {
        static_cloud: PointCloud {
            points: static_pts,
            labels: labeled.then_some(static_labels),
            frame: Frame::World,
        },
        sensor_origin,
        objects,
    }
}

/// Splits every frame in parallel; output order follows `frames`.
pub fn split_frames(frames: &[FrameBundle], config: &AggregationConfig) -> Vec<FrameSplit> {
    frames
        .par_iter()
        .map(|f| split_dynamic_static(f, config))
        .collect()
}

/// Boxes for every requested timestamp.
///
/// Keyframe timestamps keep their own annotations. Any other timestamp gets
/// each track interpolated between the two annotations that bracket it;
/// tracks are never extrapolated past their first or last annotation.
pub fn interpolate_tracks(keyframes: &[FrameBundle], all_timestamps: &[i64]) -> Result<BTreeMap<i64, Vec<Box3D>>> {
    if keyframes.is_empty() {
        return Err(Error::NoAnnotation);
    }
    let mut tracks: BTreeMap<TrackId, Vec<Box3D>> = BTreeMap::new();
    let mut annotated: BTreeMap<i64, Vec<Box3D>> = BTreeMap::new();
    for kf in keyframes {
        annotated.entry(kf.timestamp).or_default().extend(kf.boxes.iter().copied());
        for b in &kf.boxes {
            tracks.entry(b.track_id).or_default().push(*b);
        }
    }
    for seq in tracks.values_mut() {
        seq.sort_by_key(|b| b.timestamp);
    }

    let mut out = BTreeMap::new();
    for &t in all_timestamps {
        if let Some(boxes) = annotated.get(&t) {
            let mut boxes = boxes.clone();
            boxes.sort_by_key(|b| b.track_id);
            out.insert(t, boxes);
            continue;
        }
        let mut boxes = Vec::new();
        for seq in tracks.values() {
            let after = seq.partition_point(|b| b.timestamp < t);
            if after == 0 || after == seq.len() {
                continue;
            }
            let (a, b) = (&seq[after - 1], &seq[after]);
            let alpha = (t - a.timestamp) as f64 / (b.timestamp - a.timestamp) as f64;
            let mut bx = Box3D::interpolate(a, b, alpha)?;
            bx.timestamp = t;
            boxes.push(bx);
        }
        out.insert(t, boxes);
    }
    Ok(out)
}

/// Concatenation of per-frame static clouds in frame order. Labels are kept
/// only when every frame is labeled.
pub fn aggregate_static(frames: &[FrameBundle], config: &AggregationConfig) -> PointCloud {
    static_from_splits(&split_frames(frames, config))
}

pub fn static_from_splits(splits: &[FrameSplit]) -> PointCloud {
    let all_labeled = splits.iter().all(|s| s.static_cloud.labels.is_some());
    let mut out = if all_labeled {
        PointCloud::empty_labeled(Frame::World)
    } else {
        PointCloud::empty(Frame::World)
    };
    for s in splits {
        out.points.extend_from_slice(&s.static_cloud.points);
        if let (Some(dst), Some(src)) = (out.labels.as_mut(), s.static_cloud.labels.as_ref()) {
            dst.extend_from_slice(src);
        }
    }
    out
}

/// All observations of one track, stacked in its canonical frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectCanonicalCloud {
    pub track_id: TrackId,
    pub class_id: ClassId,
    pub points: PointCloud,
    /// Per-point LiDAR origin in the canonical frame.
    pub origins: Vec<Point3<f64>>,
    /// Largest box extent over the contributing frames.
    pub max_size: nalgebra::Vector3<f64>,
}

impl ObjectCanonicalCloud {
    /// True if every point lies within the largest box extent grown by
    /// `margin`.
    pub fn within_extent(&self, margin: f64) -> bool {
        self.points.points.iter().all(|p| {
            (0..3).all(|a| p[a].abs() <= 0.5 * self.max_size[a] + margin)
        })
    }
}

pub fn aggregate_object(frames: &[FrameBundle], track: TrackId, config: &AggregationConfig) -> Result<ObjectCanonicalCloud> {
    let splits = split_frames(frames, config);
    object_from_splits(&splits, track)
}

pub fn object_from_splits(splits: &[FrameSplit], track: TrackId) -> Result<ObjectCanonicalCloud> {
    let mut found: Option<ObjectCanonicalCloud> = None;
    for s in splits {
        let Some(part) = s.objects.get(&track) else {
            continue;
        };
        let acc = found.get_or_insert_with(|| ObjectCanonicalCloud {
            track_id: track,
            class_id: part.class_id,
            points: PointCloud::empty_labeled(Frame::ObjectCanonical),
            origins: Vec::new(),
            max_size: part.size,
        });
        acc.max_size = acc.max_size.sup(&part.size);
        acc.points.points.extend_from_slice(&part.cloud.points);
        acc.points
            .labels
            .as_mut()
            .unwrap()
            .extend(std::iter::repeat_n(acc.class_id, part.cloud.len()));
        acc.origins
            .extend(std::iter::repeat_n(part.sensor_origin, part.cloud.len()));
    }
    found.ok_or(Error::UnknownTrack(track))
}

/// Canonical clouds of every track seen in `splits`, aggregated in parallel.
pub fn objects_from_splits(splits: &[FrameSplit]) -> BTreeMap<TrackId, ObjectCanonicalCloud> {
    let tracks: BTreeSet<TrackId> = splits.iter().flat_map(|s| s.objects.keys().copied()).collect();
    let tracks: Vec<TrackId> = tracks.into_iter().collect();
    tracks
        .par_iter()
        .map(|t| (*t, object_from_splits(splits, *t).expect("track present")))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Places each canonical cloud at its box pose. Returns world points labeled
/// with the box class, plus the matching per-point LiDAR origins.
pub fn place_objects_with_origins(
    canon: &BTreeMap<TrackId, ObjectCanonicalCloud>,
    boxes_at_t: &[Box3D],
) -> Result<(PointCloud, Vec<Point3<f64>>)> {
    let mut cloud = PointCloud::empty_labeled(Frame::World);
    let mut origins = Vec::new();
    for b in boxes_at_t {
        let obj = canon.get(&b.track_id).ok_or(Error::MissingTrack(b.track_id))?;
        let pose = b.pose();
        cloud.points.extend(obj.points.points.iter().map(|p| pose.apply_point(p)));
        cloud
            .labels
            .as_mut()
            .unwrap()
            .extend(std::iter::repeat_n(b.class_id, obj.points.len()));
        origins.extend(obj.origins.iter().map(|o| pose.apply_point(o)));
    }
    Ok((cloud, origins))
}

pub fn place_objects(canon: &BTreeMap<TrackId, ObjectCanonicalCloud>, boxes_at_t: &[Box3D]) -> Result<PointCloud> {
    place_objects_with_origins(canon, boxes_at_t).map(|(c, _)| c)
}

/// Majority class among the nearest `k` labeled points, for every point of
/// `unlabeled`. Ties in the vote go to the smaller class id; ties in
/// distance go to the lower reference index.
pub fn knn_label_vote(unlabeled: &PointCloud, labeled: &PointCloud, k: usize) -> Result<Vec<ClassId>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let labels = match &labeled.labels {
        Some(l) if !labeled.is_empty() => l,
        _ => return Err(Error::InsufficientReference),
    };
    let index = KnnIndex::new(&labeled.points);
    Ok(unlabeled
        .points
        .par_iter()
        .map(|q| majority(index.knn(q, k).iter().map(|n| labels[n.index])))
        .collect())
}

pub(crate) fn majority(votes: impl Iterator<Item = ClassId>) -> ClassId {
    let mut counts = [0u32; 256];
    for v in votes {
        counts[v as usize] += 1;
    }
    let mut best = 0usize;
    for c in 1..256 {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best as ClassId
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use nalgebra::Vector3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::knn::brute_force_knn;

    fn bx(track: u64, center: [f64; 3], size: [f64; 3], yaw: f64, ts: i64) -> Box3D {
        Box3D::new(Point3::from(center), Vector3::from(size), yaw, 1, TrackId(track), ts).unwrap()
    }

    fn frame(points: Vec<Point3<f64>>, boxes: Vec<Box3D>, ts: i64) -> FrameBundle {
        FrameBundle {
            timestamp: ts,
            lidar_cloud: PointCloud::new(points, None, Frame::Sensor).unwrap(),
            ego_pose: Pose::identity(ts),
            lidar_extrinsic: Pose::identity(ts),
            boxes,
            is_keyframe: true,
        }
    }

    #[test]
    fn no_boxes_means_all_static() {
        let f = frame(vec![Point3::new(1.0, 2.0, 3.0), Point3::origin()], vec![], 0);
        let s = split_dynamic_static(&f, &AggregationConfig::default());
        assert_eq!(s.static_cloud.len(), 2);
        assert!(s.objects.is_empty());
    }

    #[test]
    fn boxed_point_goes_to_canonical_frame() {
        let f = frame(
            vec![Point3::new(10.5, 0.0, 0.0), Point3::new(0.0, 0.0, 0.0)],
            vec![bx(4, [10.0, 0.0, 0.0], [4.0, 2.0, 2.0], 0.0, 0)],
            0,
        );
        let s = split_dynamic_static(&f, &AggregationConfig::default());
        assert_eq!(s.static_cloud.points, vec![Point3::origin()]);
        let obj = &s.objects[&TrackId(4)];
        assert_eq!(obj.cloud.points, vec![Point3::new(0.5, 0.0, 0.0)]);
        assert_eq!(obj.sensor_origin, Point3::new(-10.0, 0.0, 0.0));
    }

    #[test]
    fn overlap_goes_to_smaller_track() {
        let f = frame(
            vec![Point3::new(1.0, 0.0, 0.0)],
            vec![
                bx(9, [2.0, 0.0, 0.0], [2.0, 2.0, 2.0], 0.0, 0),
                bx(3, [0.5, 0.0, 0.0], [2.0, 2.0, 2.0], 0.0, 0),
            ],
            0,
        );
        let s = split_dynamic_static(&f, &AggregationConfig::default());
        assert_eq!(s.objects[&TrackId(3)].cloud.len(), 1);
        assert_eq!(s.objects[&TrackId(9)].cloud.len(), 0);
    }

    #[test]
    fn static_class_override_keeps_points_static() {
        let f = frame(
            vec![Point3::new(10.5, 0.0, 0.0)],
            vec![bx(4, [10.0, 0.0, 0.0], [4.0, 2.0, 2.0], 0.0, 0)],
            0,
        );
        let cfg = AggregationConfig {
            static_classes: vec![1],
            ..Default::default()
        };
        let s = split_dynamic_static(&f, &cfg);
        assert_eq!(s.static_cloud.len(), 1);
        assert!(s.objects.is_empty());
    }

    #[test]
    fn split_uses_ego_and_extrinsic() {
        let mut f = frame(vec![Point3::new(1.0, 0.0, 0.0)], vec![], 0);
        f.ego_pose = Pose::from_yaw(FRAC_PI_2, Vector3::new(5.0, 0.0, 0.0), 0);
        f.lidar_extrinsic = Pose::from_translation(Vector3::new(0.0, 0.0, 2.0), 0);
        let s = split_dynamic_static(&f, &AggregationConfig::default());
        assert!((s.static_cloud.points[0] - Point3::new(5.0, 1.0, 2.0)).norm() < 1e-12);
        assert!((s.sensor_origin - Point3::new(5.0, 0.0, 2.0)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn split_partitions_and_place_round_trips(
            pts in prop::collection::vec((-6.0f64..6.0, -6.0f64..6.0, -2.0f64..2.0), 0..150),
            yaw in -3.0f64..3.0,
            cx in -2.0f64..2.0,
        ) {
            let boxes = vec![
                bx(1, [cx, 0.0, 0.0], [4.0, 2.0, 2.0], yaw, 0),
                bx(2, [cx + 1.0, 1.0, 0.0], [3.0, 3.0, 3.0], -yaw, 0),
            ];
            let points: Vec<_> = pts.iter().map(|t| Point3::new(t.0, t.1, t.2)).collect();
            let f = frame(points.clone(), boxes.clone(), 0);
            let cfg = AggregationConfig::default();
            let s = split_dynamic_static(&f, &cfg);
            prop_assert_eq!(s.total_points(), points.len());

            let canon = objects_from_splits(std::slice::from_ref(&s));
            let placed = place_objects(&canon, &boxes).unwrap();
            let boxed: Vec<_> = points.iter().filter(|p| boxes.iter().any(|b| b.contains_with_margin(p, cfg.box_margin))).collect();
            prop_assert_eq!(placed.len(), boxed.len());
            for p in &placed.points {
                prop_assert!(boxed.iter().any(|q| (p - *q).norm() < 1e-9));
            }
        }
    }

    #[test]
    fn interpolation_midpoint_and_no_extrapolation() {
        let mut k0 = frame(vec![], vec![bx(1, [0.0, 0.0, 0.0], [4.0, 2.0, 2.0], 0.0, 0)], 0);
        let mut k1 = frame(vec![], vec![bx(1, [10.0, 0.0, 0.0], [4.0, 2.0, 2.0], 0.0, 500_000)], 500_000);
        k1.boxes.push(bx(2, [5.0, 5.0, 0.0], [1.0, 1.0, 1.0], 0.0, 500_000));
        let k2 = frame(vec![], vec![bx(2, [5.0, 5.0, 0.0], [1.0, 1.0, 1.0], 0.0, 1_000_000)], 1_000_000);
        k0.is_keyframe = true;
        let out = interpolate_tracks(&[k0, k1, k2], &[0, 250_000, 500_000, 750_000, 1_000_000, 1_250_000]).unwrap();
        let mid = &out[&250_000];
        assert_eq!(mid.len(), 1);
        assert_eq!(mid[0].center, Point3::new(5.0, 0.0, 0.0));
        assert_eq!(mid[0].timestamp, 250_000);
        // stationary track stays put; track 1 is not extrapolated
        let later = &out[&750_000];
        assert_eq!(later.len(), 1);
        assert_eq!(later[0].track_id, TrackId(2));
        assert_eq!(later[0].center, Point3::new(5.0, 5.0, 0.0));
        assert!(out[&1_250_000].is_empty());
        assert_eq!(out[&500_000].len(), 2);
    }

    #[test]
    fn interpolation_needs_keyframes() {
        assert!(matches!(interpolate_tracks(&[], &[0]), Err(Error::NoAnnotation)));
    }

    #[test]
    fn static_aggregation_counts_and_labels() {
        let mut frames: Vec<_> = (0..4)
            .map(|i| frame(vec![Point3::new(i as f64, 0.0, 0.0); 3], vec![], i))
            .collect();
        assert_eq!(aggregate_static(&frames, &AggregationConfig::default()).len(), 12);
        assert!(aggregate_static(&frames, &AggregationConfig::default()).labels.is_none());
        for f in &mut frames {
            f.lidar_cloud.labels = Some(vec![7; 3]);
        }
        let s = aggregate_static(&frames, &AggregationConfig::default());
        assert_eq!(s.labels, Some(vec![7; 12]));
    }

    #[test]
    fn static_wall_overlays_across_poses() {
        // the same world wall seen from two ego poses
        let wall: Vec<Point3<f64>> = (0..10).map(|i| Point3::new(10.0, i as f64 * 0.3, 0.0)).collect();
        let frames: Vec<_> = [0.0, 3.0]
            .iter()
            .enumerate()
            .map(|(i, dx)| {
                let ego = Pose::from_yaw(0.3 * i as f64, Vector3::new(*dx, 1.0, 0.0), i as i64);
                let local = wall.iter().map(|p| ego.inverse().apply_point(p)).collect();
                FrameBundle {
                    ego_pose: ego,
                    ..frame(local, vec![], i as i64)
                }
            })
            .collect();
        let s = aggregate_static(&frames, &AggregationConfig::default());
        for i in 0..10 {
            assert!((s.points[i] - s.points[i + 10]).norm() < 1e-12);
        }
    }

    #[test]
    fn aggregate_object_errors_and_empty() {
        let f = frame(vec![Point3::new(50.0, 0.0, 0.0)], vec![bx(1, [0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0, 0)], 0);
        let o = aggregate_object(std::slice::from_ref(&f), TrackId(1), &AggregationConfig::default()).unwrap();
        assert!(o.points.is_empty());
        assert!(matches!(
            aggregate_object(&[f], TrackId(2), &AggregationConfig::default()),
            Err(Error::UnknownTrack(TrackId(2)))
        ));
    }

    #[test]
    fn place_examples() {
        let mut canon = BTreeMap::new();
        let mk = |p: Point3<f64>| ObjectCanonicalCloud {
            track_id: TrackId(1),
            class_id: 1,
            points: PointCloud::new(vec![p], Some(vec![1]), Frame::ObjectCanonical).unwrap(),
            origins: vec![Point3::origin()],
            max_size: Vector3::new(4.0, 2.0, 2.0),
        };
        canon.insert(TrackId(1), mk(Point3::new(0.5, 0.0, 0.0)));
        let placed = place_objects(&canon, &[bx(1, [10.0, 0.0, 0.0], [4.0, 2.0, 2.0], 0.0, 0)]).unwrap();
        assert_eq!(placed.points, vec![Point3::new(10.5, 0.0, 0.0)]);

        canon.insert(TrackId(1), mk(Point3::new(1.0, 0.0, 0.0)));
        let placed = place_objects(&canon, &[bx(1, [0.0, 0.0, 0.0], [4.0, 2.0, 2.0], FRAC_PI_2, 0)]).unwrap();
        assert!((placed.points[0] - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-12);

        assert!(place_objects(&canon, &[]).unwrap().is_empty());
        assert!(matches!(
            place_objects(&canon, &[bx(5, [0.0; 3], [1.0; 3], 0.0, 0)]),
            Err(Error::MissingTrack(TrackId(5)))
        ));
    }

    #[test]
    fn knn_vote_examples() {
        let labeled = PointCloud::new(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0), Point3::new(9.0, 0.0, 0.0)],
            Some(vec![13, 13, 1, 1]),
            Frame::World,
        )
        .unwrap();
        let q = PointCloud::new(vec![Point3::new(0.9, 0.0, 0.0), Point3::new(8.0, 0.0, 0.0)], None, Frame::World).unwrap();
        assert_eq!(knn_label_vote(&q, &labeled, 1).unwrap(), vec![13, 1]);
        assert_eq!(knn_label_vote(&q, &labeled, 3).unwrap(), vec![13, 1]);
        // 2-2 vote split resolves to the smaller class id
        assert_eq!(knn_label_vote(&q, &labeled, 4).unwrap(), vec![1, 1]);
        assert!(matches!(
            knn_label_vote(&q, &PointCloud::empty_labeled(Frame::World), 1),
            Err(Error::InsufficientReference)
        ));
        assert!(knn_label_vote(&q, &labeled, 0).is_err());
    }

    /// Exhaustive O(N·M) neighbor search with explicit sort.
    fn oracle_vote(q: &Point3<f64>, refs: &[Point3<f64>], labels: &[ClassId], k: usize) -> ClassId {
        let mut all: Vec<(f64, usize)> = refs.iter().enumerate().map(|(i, p)| ((p - q).norm_squared(), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut counts = BTreeMap::new();
        for (_, i) in all.iter().take(k) {
            *counts.entry(labels[*i]).or_insert(0) += 1;
        }
        let max = *counts.values().max().unwrap();
        *counts.iter().find(|(_, n)| **n == max).unwrap().0
    }

    #[test]
    fn knn_vote_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for m in [200usize, 12_000] {
            let refs: Vec<_> = (0..m)
                .map(|_| Point3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let labels: Vec<ClassId> = (0..m).map(|_| rng.gen_range(0..4)).collect();
            let labeled = PointCloud::new(refs.clone(), Some(labels.clone()), Frame::World).unwrap();
            let qs: Vec<_> = (0..200)
                .map(|_| Point3::new(rng.gen_range(-12.0..12.0), rng.gen_range(-12.0..12.0), rng.gen_range(-2.0..2.0)))
                .collect();
            let q = PointCloud::new(qs.clone(), None, Frame::World).unwrap();
            let got = knn_label_vote(&q, &labeled, 5).unwrap();
            for (i, p) in qs.iter().enumerate() {
                assert_eq!(got[i], oracle_vote(p, &refs, &labels, 5));
                assert_eq!(brute_force_knn(&refs, p, 5).len(), 5);
            }
        }
    }
}
