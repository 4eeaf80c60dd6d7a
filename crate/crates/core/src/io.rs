//! On-disk formats: scene bundles (JSON manifest + binary point payloads),
//! occupancy grids and visibility masks. All binary data is little-endian
//! and ends in a CRC-64/XZ of everything before it. See `docs/formats.md`.

use std::fs;
use std::path::Path;

use crc::{Crc, CRC_64_XZ};
use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::aggregation::FrameBundle;
use crate::error::{Error, Result};
use crate::geom::{Box3D, Camera, ClassId, Frame, PointCloud, Pose, TrackId};
use crate::ontology::Ontology;
use crate::visibility::{MaskKind, VisibilityMask};
use crate::voxel::{GridSpec, OccGrid, VoxelState};

const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

pub const SCENE_MAGIC: [u8; 4] = *b"OC3S";
pub const GRID_MAGIC: [u8; 4] = *b"OC3G";
pub const MASK_MAGIC: [u8; 4] = *b"OC3M";
pub const FORMAT_VERSION: u8 = 1;
pub const MANIFEST_FORMAT: &str = "occ3d-scene";

const PAYLOAD_HEADER: usize = 16;
pub const GRID_HEADER: usize = 76;
const TRAILER: usize = 8;
const FLAG_LABELS: u8 = 1;

pub fn checksum(bytes: &[u8]) -> u64 {
    CRC64.checksum(bytes)
}

/// A scene: calibration, ontology and every frame with its points.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub scene_id: String,
    pub ontology: Ontology,
    /// Sensor-to-ego, shared by all frames.
    pub lidar_extrinsic: Pose,
    /// Camera-to-ego.
    pub cameras: Vec<Camera>,
    pub frames: Vec<FrameBundle>,
}

impl SceneBundle {
    pub fn keyframe_indices(&self) -> Vec<usize> {
        (0..self.frames.len()).filter(|i| self.frames[*i].is_keyframe).collect()
    }

    /// The bundle as it reads back from disk: payload coordinates rounded to
    /// 32-bit floats.
    pub fn quantized(&self) -> SceneBundle {
        let mut out = self.clone();
        for f in &mut out.frames {
            for p in &mut f.lidar_cloud.points {
                *p = p.map(|v| v as f32 as f64);
            }
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRecord {
    /// Row-major 3×3.
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl PoseRecord {
    fn from_pose(p: &Pose) -> Self {
        let r = &p.rotation;
        PoseRecord {
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: p.translation.into(),
        }
    }

    fn to_pose(&self, timestamp: i64, what: &str) -> Result<Pose> {
        Pose::new(
            Matrix3::from_row_slice(&self.rotation),
            Vector3::from(self.translation),
            timestamp,
        )
        .map_err(|e| Error::ManifestSchema(format!("{what}: {e}")))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraRecord {
    id: String,
    /// Row-major 3×3.
    intrinsics: [f64; 9],
    /// Camera-to-ego.
    extrinsic: PoseRecord,
    width: u32,
    height: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Calibration {
    lidar_extrinsic: PoseRecord,
    cameras: Vec<CameraRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxRecord {
    center: [f64; 3],
    size: [f64; 3],
    yaw: f64,
    class_id: ClassId,
    track_id: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    index: usize,
    timestamp: i64,
    keyframe: bool,
    ego_pose: PoseRecord,
    boxes: Vec<BoxRecord>,
    payload: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u8,
    scene_id: String,
    ontology: Ontology,
    calibration: Calibration,
    frames: Vec<FrameRecord>,
}

fn payload_name(index: usize) -> String {
    format!("frames/{index:06}.oc3s")
}

/// Writes `manifest.json` and one payload per frame under `dir`.
pub fn write_scene(dir: &Path, scene: &SceneBundle) -> Result<()> {
    scene.ontology.validate()?;
    fs::create_dir_all(dir.join("frames")).map_err(|e| Error::io(dir, e))?;
    let cameras = scene
        .cameras
        .iter()
        .map(|c| CameraRecord {
            id: c.id.clone(),
            intrinsics: {
                let k = &c.intrinsics;
                [
                    k[(0, 0)],
                    k[(0, 1)],
                    k[(0, 2)],
                    k[(1, 0)],
                    k[(1, 1)],
                    k[(1, 2)],
                    k[(2, 0)],
                    k[(2, 1)],
                    k[(2, 2)],
                ]
            },
            extrinsic: PoseRecord::from_pose(&c.extrinsics),
            width: c.width,
            height: c.height,
        })
        .collect();
    let mut frames = Vec::with_capacity(scene.frames.len());
    for (index, f) in scene.frames.iter().enumerate() {
        let payload = payload_name(index);
        write_bytes(&dir.join(&payload), &encode_payload(&f.lidar_cloud))?;
        frames.push(FrameRecord {
            index,
            timestamp: f.timestamp,
            keyframe: f.is_keyframe,
            ego_pose: PoseRecord::from_pose(&f.ego_pose),
            boxes: f
                .boxes
                .iter()
                .map(|b| BoxRecord {
                    center: b.center.into(),
                    size: b.size.into(),
                    yaw: b.yaw,
                    class_id: b.class_id,
                    track_id: b.track_id.0,
                })
                .collect(),
            payload,
        });
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: FORMAT_VERSION,
        scene_id: scene.scene_id.clone(),
        ontology: scene.ontology.clone(),
        calibration: Calibration {
            lidar_extrinsic: PoseRecord::from_pose(&scene.lidar_extrinsic),
            cameras,
        },
        frames,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Invariant(e.to_string()))?;
    text.push('\n');
    write_bytes(&dir.join("manifest.json"), text.as_bytes())
}

/// Reads a scene directory written by [`write_scene`].
pub fn read_scene(dir: &Path) -> Result<SceneBundle> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::ManifestSchema(e.to_string()))?;
    if m.format != MANIFEST_FORMAT {
        return Err(Error::ManifestSchema(format!("format {:?}", m.format)));
    }
    if m.version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: manifest_path,
            version: m.version,
        });
    }
    m.ontology
        .validate()
        .map_err(|e| Error::ManifestSchema(format!("ontology: {e}")))?;

    let lidar_extrinsic = m.calibration.lidar_extrinsic.to_pose(0, "lidar extrinsic")?;
    let cameras = m
        .calibration
        .cameras
        .iter()
        .map(|c| {
            let pose = c.extrinsic.to_pose(0, &format!("camera {}", c.id))?;
            Camera::new(c.id.clone(), Matrix3::from_row_slice(&c.intrinsics), pose, c.width, c.height)
                .map_err(|e| Error::ManifestSchema(format!("camera {}: {e}", c.id)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut frames = Vec::with_capacity(m.frames.len());
    let mut last_ts = None;
    for (i, f) in m.frames.iter().enumerate() {
        if f.index != i {
            return Err(Error::ManifestSchema(format!("frame {i} has index {}", f.index)));
        }
        if last_ts.is_some_and(|t| f.timestamp <= t) {
            return Err(Error::ManifestSchema(format!("frame {i}: timestamps must increase")));
        }
        last_ts = Some(f.timestamp);
        let boxes = f
            .boxes
            .iter()
            .map(|b| {
                if !m.ontology.contains(b.class_id) {
                    return Err(Error::ManifestSchema(format!("frame {i}: box class {} unknown", b.class_id)));
                }
                Box3D::new(
                    Point3::from(b.center),
                    Vector3::from(b.size),
                    b.yaw,
                    b.class_id,
                    TrackId(b.track_id),
                    f.timestamp,
                )
                .map_err(|e| Error::ManifestSchema(format!("frame {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let path = dir.join(&f.payload);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingPayload { frame: i, path });
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        let cloud = decode_payload(&bytes, &path)?;
        if let Some(c) = cloud.labels.iter().flatten().find(|c| !m.ontology.contains(**c)) {
            return Err(Error::CorruptPayload {
                path,
                offset: 0,
                reason: format!("label {c} outside ontology"),
            });
        }
        frames.push(FrameBundle {
            timestamp: f.timestamp,
            lidar_cloud: cloud,
            ego_pose: f.ego_pose.to_pose(f.timestamp, &format!("frame {i} ego pose"))?,
            lidar_extrinsic,
            boxes,
            is_keyframe: f.keyframe,
        });
    }
    Ok(SceneBundle {
        scene_id: m.scene_id,
        ontology: m.ontology,
        lidar_extrinsic,
        cameras,
        frames,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn seal(mut bytes: Vec<u8>) -> Vec<u8> {
    let crc = checksum(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    bytes
}

fn verify_trailer(bytes: &[u8], path: &Path) -> Result<()> {
    let (body, tail) = bytes.split_at(bytes.len() - TRAILER);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    let computed = checksum(body);
    if stored != computed {
        return Err(Error::ChecksumMismatch {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    Ok(())
}

fn check_magic(bytes: &[u8], expected: [u8; 4], path: &Path) -> Result<()> {
    let mut found = [0u8; 4];
    let n = bytes.len().min(4);
    found[..n].copy_from_slice(&bytes[..n]);
    if n < 4 || found != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Point payload: header, `count` records of `f32 x, y, z [, u8 label]`,
/// CRC trailer.
pub fn encode_payload(cloud: &PointCloud) -> Vec<u8> {
    let labeled = cloud.labels.is_some();
    let rec = if labeled { 13 } else { 12 };
    let mut out = Vec::with_capacity(PAYLOAD_HEADER + cloud.len() * rec + TRAILER);
    out.extend_from_slice(&SCENE_MAGIC);
    out.push(FORMAT_VERSION);
    out.push(if labeled { FLAG_LABELS } else { 0 });
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&(cloud.len() as u64).to_le_bytes());
    for (i, p) in cloud.points.iter().enumerate() {
        for v in [p.x, p.y, p.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        if let Some(l) = cloud.label(i) {
            out.push(l);
        }
    }
    seal(out)
}

pub fn decode_payload(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let corrupt = |offset: usize, reason: String| Error::CorruptPayload {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason,
    };
    check_magic(bytes, SCENE_MAGIC, path)?;
    if bytes.len() < PAYLOAD_HEADER {
        return Err(corrupt(bytes.len(), "truncated header".into()));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            version: bytes[4],
        });
    }
    let flags = bytes[5];
    if flags & !FLAG_LABELS != 0 {
        return Err(corrupt(5, format!("unknown flags {flags:#04x}")));
    }
    let labeled = flags & FLAG_LABELS != 0;
    let rec = if labeled { 13 } else { 12 };
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let expected = count
        .checked_mul(rec as u64)
        .and_then(|b| b.checked_add((PAYLOAD_HEADER + TRAILER) as u64))
        .ok_or_else(|| corrupt(8, format!("record count {count} overflows")))?;
    let actual = bytes.len() as u64;
    if actual < expected {
        // offset of the first record that is not fully present
        let whole = ((bytes.len() - PAYLOAD_HEADER) / rec) as u64;
        let offset = PAYLOAD_HEADER + (whole.min(count) as usize) * rec;
        return Err(corrupt(offset, format!("truncated: {count} records need {expected} bytes, found {actual}")));
    }
    if actual > expected {
        return Err(corrupt(expected as usize, format!("{} trailing bytes", actual - expected)));
    }
    verify_trailer(bytes, path)?;
    let count = count as usize;
    let mut points = Vec::with_capacity(count);
    let mut labels = labeled.then(|| Vec::with_capacity(count));
    for r in bytes[PAYLOAD_HEADER..bytes.len() - TRAILER].chunks_exact(rec) {
        let f = |o: usize| f32::from_le_bytes(r[o..o + 4].try_into().unwrap()) as f64;
        points.push(Point3::new(f(0), f(4), f(8)));
        if let Some(l) = labels.as_mut() {
            l.push(r[12]);
        }
    }
    PointCloud::new(points, labels, Frame::Sensor)
}

fn encode_header(magic: [u8; 4], extra: u8, spec: &GridSpec) -> Vec<u8> {
    let mut out = Vec::with_capacity(GRID_HEADER);
    out.extend_from_slice(&magic);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&[extra, 0, 0]);
    for d in spec.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in spec.min.iter().chain(&spec.max).chain([&spec.voxel_size]) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    debug_assert_eq!(out.len(), GRID_HEADER);
    out
}

/// Parses and checks a grid or mask header, returning the spec, the extra
/// byte, and the body slice.
fn decode_header<'a>(bytes: &'a [u8], magic: [u8; 4], bytes_per_voxel: u64, path: &Path) -> Result<(GridSpec, u8, &'a [u8])> {
    check_magic(bytes, magic, path)?;
    let size_mismatch = |expected: u64| Error::SizeMismatch {
        path: path.to_path_buf(),
        expected,
        actual: bytes.len() as u64,
    };
    if bytes.len() < GRID_HEADER {
        return Err(size_mismatch((GRID_HEADER + TRAILER) as u64));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            version: bytes[4],
        });
    }
    let u = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as u64;
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let dims = [u(8), u(12), u(16)];
    let body_len = dims
        .iter()
        .try_fold(bytes_per_voxel, |acc, d| acc.checked_mul(*d))
        .filter(|n| *n <= isize::MAX as u64 - (GRID_HEADER + TRAILER) as u64)
        .ok_or_else(|| Error::DimensionOverflow {
            path: path.to_path_buf(),
            dims,
        })?;
    let expected = GRID_HEADER as u64 + body_len + TRAILER as u64;
    if bytes.len() as u64 != expected {
        return Err(size_mismatch(expected));
    }
    verify_trailer(bytes, path)?;
    let min = [f(20), f(28), f(36)];
    let max = [f(44), f(52), f(60)];
    let spec = GridSpec::new(min, max, f(68)).map_err(|e| Error::CorruptPayload {
        path: path.to_path_buf(),
        offset: 20,
        reason: e.to_string(),
    })?;
    if spec.dims.iter().zip(&dims).any(|(a, b)| *a as u64 != *b) {
        return Err(Error::CorruptPayload {
            path: path.to_path_buf(),
            offset: 8,
            reason: format!("dims {dims:?} disagree with range (expected {:?})", spec.dims),
        });
    }
    Ok((spec, bytes[5], &bytes[GRID_HEADER..bytes.len() - TRAILER]))
}

/// Grid file: header, `(state, class)` byte pairs in x-major order, CRC.
pub fn encode_grid(grid: &OccGrid) -> Vec<u8> {
    let spec = grid.spec();
    let mut out = encode_header(GRID_MAGIC, 0, spec);
    out.reserve(spec.len() * 2 + TRAILER);
    for (s, c) in grid.states().iter().zip(grid.semantics()) {
        out.push(*s as u8);
        out.push(*c);
    }
    seal(out)
}

pub fn decode_grid(bytes: &[u8], path: &Path) -> Result<OccGrid> {
    let (spec, _, body) = decode_header(bytes, GRID_MAGIC, 2, path)?;
    let mut state = Vec::with_capacity(spec.len());
    let mut semantics = Vec::with_capacity(spec.len());
    for (i, pair) in body.chunks_exact(2).enumerate() {
        let s = VoxelState::from_u8(pair[0]).ok_or_else(|| Error::CorruptPayload {
            path: path.to_path_buf(),
            offset: (GRID_HEADER + 2 * i) as u64,
            reason: format!("invalid voxel state {}", pair[0]),
        })?;
        state.push(s);
        semantics.push(pair[1]);
    }
    OccGrid::from_parts(spec, state, semantics).map_err(|e| Error::CorruptPayload {
        path: path.to_path_buf(),
        offset: GRID_HEADER as u64,
        reason: e.to_string(),
    })
}

/// Mask file: header with the kind in byte 5, one byte per voxel, CRC.
pub fn encode_mask(mask: &VisibilityMask) -> Vec<u8> {
    let mut out = encode_header(MASK_MAGIC, mask.kind() as u8, mask.spec());
    out.extend_from_slice(mask.values());
    seal(out)
}

pub fn decode_mask(bytes: &[u8], path: &Path) -> Result<VisibilityMask> {
    let (spec, kind, body) = decode_header(bytes, MASK_MAGIC, 1, path)?;
    let corrupt = |offset: usize, reason: String| Error::CorruptPayload {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason,
    };
    let kind = MaskKind::from_u8(kind).ok_or_else(|| corrupt(5, format!("unknown mask kind {kind}")))?;
    if let Some(i) = body.iter().position(|v| *v > kind.max_value()) {
        return Err(corrupt(GRID_HEADER + i, format!("value {} invalid for {kind:?} mask", body[i])));
    }
    VisibilityMask::from_values(spec, kind, body.to_vec())
}

pub fn write_points(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_bytes(path, &encode_payload(cloud))
}

pub fn read_points(path: &Path) -> Result<PointCloud> {
    decode_payload(&read_bytes(path)?, path)
}

pub fn write_grid(path: &Path, grid: &OccGrid) -> Result<()> {
    write_bytes(path, &encode_grid(grid))
}

pub fn read_grid(path: &Path) -> Result<OccGrid> {
    decode_grid(&read_bytes(path)?, path)
}

pub fn write_mask(path: &Path, mask: &VisibilityMask) -> Result<()> {
    write_bytes(path, &encode_mask(mask))
}

pub fn read_mask(path: &Path) -> Result<VisibilityMask> {
    decode_mask(&read_bytes(path)?, path)
}
