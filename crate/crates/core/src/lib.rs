//! Dense semantic occupancy labels from multi-frame LiDAR, with LiDAR and
//! camera visibility masks and masked mIoU scoring.

pub mod aggregation;
pub mod error;
pub mod eval;
pub mod geom;
pub mod io;
pub mod knn;
pub mod ontology;
pub mod pipeline;
pub mod synth;
pub mod visibility;
pub mod voxel;

pub use error::{Error, ErrorKind, Result};
pub use geom::{Box3D, Camera, ClassId, Frame, PointCloud, Pose, Projection, TrackId};
pub use ontology::Ontology;
pub use visibility::{MaskKind, Ray, VisibilityMask};
pub use voxel::{GridPreset, GridSpec, OccGrid, VoxelIndex, VoxelState};
pub use io::SceneBundle;
pub use pipeline::{run_pipeline, KeyframeLabels, PipelineConfig};
