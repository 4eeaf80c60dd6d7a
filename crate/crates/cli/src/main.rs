use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use occ3d::eval::{confusion, EvalReport};
use occ3d::io::{self, read_grid, read_mask, read_points, read_scene, write_grid, write_mask, write_points};
use occ3d::pipeline::{aggregate_scene, keyframe_dir, label_keyframe, write_outputs, KeyframeCloud, KEYFRAME_FILES};
use occ3d::synth::{analytic_gt, generate_scene, scenes, SceneScript};
use occ3d::visibility::LidarVisibility;
use occ3d::voxel::{voxelize, VoxelizeConfig};
use occ3d::{Error, ErrorKind, Frame, GridPreset, GridSpec, MaskKind, Ontology, PipelineConfig, PointCloud, VoxelState};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "occ3d", version, about = "Occupancy label generation and visibility-masked evaluation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Grid range preset.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Waymo)]
    grid_preset: Preset,
    /// Voxel edge length in meters.
    #[arg(long, global = true, default_value_t = 0.4)]
    voxel_size: f64,
    /// Neighbors consulted when voting labels for unlabeled points.
    #[arg(long, global = true, default_value_t = 5)]
    knn_k: usize,
    /// Points needed before a voxel counts as occupied.
    #[arg(long, global = true, default_value_t = 1)]
    min_points: u32,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for synthetic scene generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Waymo,
    Nuscenes,
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    Room,
    Occluder,
    Moving,
}

#[derive(Clone, Copy, ValueEnum)]
enum OntologyName {
    Waymo,
    Nuscenes,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic scene and write it as a scene bundle.
    GenSynth {
        /// JSON scene script.
        #[arg(long, conflicts_with = "builtin")]
        script: Option<PathBuf>,
        /// Built-in scene.
        #[arg(long, value_enum)]
        builtin: Option<Builtin>,
        /// Override the frame count.
        #[arg(long)]
        frames: Option<usize>,
        /// Also write the analytic ground truth for every keyframe.
        #[arg(long)]
        gt: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a scene into the labeled cloud of one keyframe.
    Aggregate {
        #[arg(long)]
        scene: PathBuf,
        /// Frame index of the keyframe (default: first keyframe).
        #[arg(long)]
        keyframe: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Voxelize an aggregated cloud.
    Voxelize {
        /// Directory written by `aggregate`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ray-cast LiDAR and camera visibility for an aggregated cloud.
    Visibility {
        /// Directory written by `aggregate`.
        #[arg(long)]
        input: PathBuf,
        /// Scene bundle providing cameras and ontology.
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predicted grid against ground truth under a joint mask.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        /// Take the ontology from this scene bundle.
        #[arg(long, conflicts_with = "ontology")]
        scene: Option<PathBuf>,
        #[arg(long, value_enum)]
        ontology: Option<OntologyName>,
        /// Score free space as an extra label.
        #[arg(long)]
        include_free: bool,
    },
    /// Run every stage for every keyframe of a scene.
    Pipeline {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print statistics of a grid, mask, point payload or scene, or the
    /// grid spec selected by the global flags when no path is given.
    Inspect { path: Option<PathBuf> },
}

/// Failure outside the library, e.g. inconsistent arguments.
struct Usage(String);

enum Failure {
    Lib(Error),
    Usage(Usage),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Self {
        Failure::Usage(u)
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }
    match run(&cli) {
        Ok(out) => {
            let text = serde_json::to_string_pretty(&out).expect("json");
            // a closed pipe on stdout is not an error worth reporting
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(Usage(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::Data => 3,
                ErrorKind::Internal => 4,
            })
        }
    }
}

fn grid_spec(g: &Global) -> occ3d::Result<GridSpec> {
    let preset = match g.grid_preset {
        Preset::Waymo => GridPreset::Waymo,
        Preset::Nuscenes => GridPreset::Nuscenes,
    };
    preset.with_voxel_size(g.voxel_size)
}

fn pipeline_config(g: &Global) -> occ3d::Result<PipelineConfig> {
    let cfg = PipelineConfig {
        grid: grid_spec(g)?,
        knn_k: g.knn_k,
        min_points: g.min_points,
        ..PipelineConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<Value> {
    let g = &cli.global;
    match &cli.command {
        Command::GenSynth {
            script,
            builtin,
            frames,
            gt,
            out,
        } => gen_synth(g, script.as_deref(), *builtin, *frames, *gt, out),
        Command::Aggregate { scene, keyframe, out } => aggregate(g, scene, *keyframe, out),
        Command::Voxelize { input, out } => {
            let (kc, meta) = read_aggregate(input)?;
            let spec = grid_spec(g)?;
            let grid = voxelize(
                &kc.cloud,
                &spec,
                &VoxelizeConfig {
                    min_points: g.min_points,
                    general_object: meta["general_object"].as_u64().unwrap_or(0) as u8,
                },
            );
            write_grid(out, &grid)?;
            Ok(json!({ "grid": out, "occupied_voxels": grid.count(VoxelState::Occupied) }))
        }
        Command::Visibility { input, scene, out } => {
            let (kc, _) = read_aggregate(input)?;
            let bundle = read_scene(scene)?;
            let cfg = pipeline_config(g)?;
            let labels = label_keyframe(&kc, &bundle.cameras, bundle.ontology.general_object, &cfg)?;
            create_dir(out)?;
            write_grid(&out.join(KEYFRAME_FILES[0]), &labels.occupancy)?;
            write_mask(&out.join(KEYFRAME_FILES[1]), &labels.lidar)?;
            write_mask(&out.join(KEYFRAME_FILES[2]), &labels.camera)?;
            write_mask(&out.join(KEYFRAME_FILES[3]), &labels.joint)?;
            Ok(json!({
                "out": out,
                "lidar_occupied": labels.lidar.count(LidarVisibility::Occupied as u8),
                "lidar_free": labels.lidar.count(LidarVisibility::Free as u8),
                "camera_observed": labels.camera.count(1),
                "joint_observed": labels.joint.count(1),
            }))
        }
        Command::Evaluate {
            pred,
            gt,
            mask,
            scene,
            ontology,
            include_free,
        } => {
            let ontology = match (scene, ontology) {
                (Some(s), _) => read_scene(s)?.ontology,
                (None, Some(OntologyName::Nuscenes)) => Ontology::nuscenes(),
                (None, _) => Ontology::waymo(),
            };
            let pred = read_grid(pred)?;
            let gt = read_grid(gt)?;
            let mask = read_mask(mask)?;
            if mask.kind() != MaskKind::Joint {
                return Err(Usage(format!("--mask must be a joint mask, got {:?}", mask.kind())).into());
            }
            let table = confusion(&pred, &gt, &mask, ontology.len())?;
            let report = EvalReport::new(&table, &ontology, *include_free);
            Ok(serde_json::to_value(report).expect("report serializes"))
        }
        Command::Pipeline { scene, out } => {
            let cfg = pipeline_config(g)?;
            let bundle = read_scene(scene)?;
            let labels = occ3d::run_pipeline(&bundle, &cfg)?;
            create_dir(out)?;
            write_outputs(out, &bundle.scene_id, &cfg, &labels)?;
            Ok(json!({
                "scene_id": bundle.scene_id,
                "keyframes": labels.iter().map(|l| json!({
                    "frame_index": l.frame_index,
                    "dir": keyframe_dir(out, l.frame_index),
                    "occupied_voxels": l.occupancy.count(VoxelState::Occupied),
                    "joint_observed": l.joint.count(1),
                })).collect::<Vec<_>>(),
                "config_sha256": cfg.hash(),
            }))
        }
        Command::Inspect { path } => inspect(g, path.as_deref()),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn gen_synth(
    g: &Global,
    script: Option<&Path>,
    builtin: Option<Builtin>,
    frames: Option<usize>,
    gt: bool,
    out: &Path,
) -> CliResult<Value> {
    let seed = g.seed.unwrap_or(0);
    let mut script = match (script, builtin) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            let mut s = SceneScript::from_json(&text)?;
            if let Some(seed) = g.seed {
                s.seed = seed;
            }
            s
        }
        (None, Some(Builtin::Room)) => scenes::walled_room(64, 1024, 20, seed),
        (None, Some(Builtin::Occluder)) => scenes::occluder(seed),
        (None, Some(Builtin::Moving)) => scenes::moving_object(10, 10.0),
        (None, None) => return Err(Usage("one of --script or --builtin is required".into()).into()),
    };
    if let Some(n) = frames {
        script.frames = n;
    }
    script.validate()?;
    let bundle = generate_scene(&script)?;
    io::write_scene(out, &bundle)?;
    let script_path = out.join("script.json");
    fs::write(&script_path, serde_json::to_string_pretty(&script).expect("script serializes") + "\n").map_err(|e| {
        Error::Io {
            path: script_path,
            source: e,
        }
    })?;
    let mut gt_dirs = Vec::new();
    if gt {
        for fi in bundle.keyframe_indices() {
            let (grid, camera) = analytic_gt(&script, fi)?;
            let dir = keyframe_dir(&out.join("gt"), fi);
            create_dir(&dir)?;
            write_grid(&dir.join(KEYFRAME_FILES[0]), &grid)?;
            write_mask(&dir.join(KEYFRAME_FILES[2]), &camera)?;
            gt_dirs.push(dir);
        }
    }
    Ok(json!({
        "scene_id": bundle.scene_id,
        "out": out,
        "frames": bundle.frames.len(),
        "keyframes": bundle.keyframe_indices(),
        "points": bundle.frames.iter().map(|f| f.lidar_cloud.len()).sum::<usize>(),
        "ground_truth": gt_dirs,
    }))
}

fn aggregate(g: &Global, scene: &Path, keyframe: Option<usize>, out: &Path) -> CliResult<Value> {
    let cfg = pipeline_config(g)?;
    let bundle = read_scene(scene)?;
    let agg = aggregate_scene(&bundle, &cfg)?;
    let fi = match keyframe {
        Some(k) => k,
        None => *agg
            .keyframes()
            .first()
            .ok_or_else(|| Usage("scene has no keyframe".into()))?,
    };
    let kc = agg.keyframe_cloud(fi, &cfg)?;
    create_dir(out)?;
    write_points(&out.join("points.oc3s"), &kc.cloud)?;
    let origins = PointCloud::new(kc.origins.clone(), None, Frame::Ego)?;
    write_points(&out.join("origins.oc3s"), &origins)?;
    let meta = json!({
        "scene_id": bundle.scene_id,
        "frame_index": fi,
        "timestamp": kc.timestamp,
        "general_object": bundle.ontology.general_object,
        "points": kc.cloud.len(),
        "static_points": agg.statics.cloud.len(),
        "tracks": agg.objects.iter().map(|(t, o)| json!({"track_id": t.0, "class_id": o.class_id, "points": o.points.len()})).collect::<Vec<_>>(),
    });
    let meta_path = out.join("aggregate.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&meta).expect("json") + "\n").map_err(|e| Error::Io {
        path: meta_path,
        source: e,
    })?;
    Ok(meta)
}

fn read_aggregate(dir: &Path) -> CliResult<(KeyframeCloud, Value)> {
    let meta_path = dir.join("aggregate.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::Io {
        path: meta_path.clone(),
        source: e,
    })?;
    let meta: Value = serde_json::from_str(&text).map_err(|e| Error::ManifestSchema(format!("{}: {e}", meta_path.display())))?;
    let mut cloud = read_points(&dir.join("points.oc3s"))?;
    let origins = read_points(&dir.join("origins.oc3s"))?;
    if origins.len() != cloud.len() || cloud.labels.is_none() {
        return Err(Error::ManifestSchema(format!("{}: points and origins disagree", dir.display())).into());
    }
    cloud.frame = Frame::Ego;
    let kc = KeyframeCloud {
        frame_index: meta["frame_index"].as_u64().unwrap_or(0) as usize,
        timestamp: meta["timestamp"].as_i64().unwrap_or(0),
        cloud,
        origins: origins.points,
    };
    Ok((kc, meta))
}

fn spec_json(spec: &GridSpec) -> Value {
    json!({
        "min": spec.min,
        "max": spec.max,
        "voxel_size": spec.voxel_size,
        "dims": spec.dims,
        "voxels": spec.len(),
    })
}

fn inspect(g: &Global, path: Option<&Path>) -> CliResult<Value> {
    let Some(path) = path else {
        return Ok(json!({ "grid": spec_json(&grid_spec(g)?) }));
    };
    if path.is_dir() {
        let scene = read_scene(path)?;
        return Ok(json!({
            "scene_id": scene.scene_id,
            "frames": scene.frames.len(),
            "keyframes": scene.keyframe_indices(),
            "points": scene.frames.iter().map(|f| f.lidar_cloud.len()).sum::<usize>(),
            "cameras": scene.cameras.iter().map(|c| c.id.clone()).collect::<Vec<_>>(),
            "classes": scene.ontology.classes,
            "general_object": scene.ontology.general_object,
        }));
    }
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    match bytes.get(..4) {
        Some(m) if m == io::GRID_MAGIC => {
            let grid = io::decode_grid(&bytes, path)?;
            let mut classes = BTreeMap::new();
            for i in grid.occupied_indices() {
                *classes.entry(grid.semantics()[i].to_string()).or_insert(0usize) += 1;
            }
            Ok(json!({
                "kind": "grid",
                "spec": spec_json(grid.spec()),
                "states": {
                    "unobserved": grid.count(VoxelState::Unobserved),
                    "free": grid.count(VoxelState::Free),
                    "occupied": grid.count(VoxelState::Occupied),
                },
                "class_histogram": classes,
            }))
        }
        Some(m) if m == io::MASK_MAGIC => {
            let mask = io::decode_mask(&bytes, path)?;
            let hist: BTreeMap<String, usize> = (0..=mask.kind().max_value())
                .map(|v| (v.to_string(), mask.count(v)))
                .collect();
            Ok(json!({
                "kind": format!("{:?}", mask.kind()).to_lowercase() + "_mask",
                "spec": spec_json(mask.spec()),
                "value_histogram": hist,
            }))
        }
        Some(m) if m == io::SCENE_MAGIC => {
            let cloud = io::decode_payload(&bytes, path)?;
            let mut labels = BTreeMap::new();
            for l in cloud.labels.iter().flatten() {
                *labels.entry(l.to_string()).or_insert(0usize) += 1;
            }
            let extent = cloud.extent().map(|(lo, hi)| json!({ "min": [lo.x, lo.y, lo.z], "max": [hi.x, hi.y, hi.z] }));
            Ok(json!({
                "kind": "points",
                "points": cloud.len(),
                "labeled": cloud.labels.is_some(),
                "label_histogram": labels,
                "extent": extent,
            }))
        }
        _ => Err(Usage(format!("{}: not a grid, mask, point payload or scene directory", path.display())).into()),
    }
}
