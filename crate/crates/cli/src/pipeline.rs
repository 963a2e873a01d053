//! Batch pipeline: selection, calibration, per-frame orientation, fusion,
//! kinematics, exports and the run summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use trajecto::camera::{diagonal_fov, focal_from_fov, CameraIntrinsics, FovMeasurement};
use trajecto::formats::{self, GcpMeasurement, ManifestEntry};
use trajecto::frames::select_frames_with;
use trajecto::fusion::{
    estimate_similarity, merge_blocks_weighted, OrientationBlock, SimilarityFit,
};
use trajecto::geometry::{NavConvention, Pose, RotationMatrix};
use trajecto::par::{self, Execution};
use trajecto::relative::{track_object_with, ObjectMeasurement, RelativeError};
use trajecto::resection::{
    resect_dlt11, resect_frame, Correspondence, GroundControlPoint, P3pOptions, ResectionError,
};
use trajecto::trajectory::{
    compare_to_reference, derive_kinematics, export_csv, export_kml, ComparisonBands,
    ComparisonStats, LocalTangentPlane, Trajectory4D,
};

use crate::config::{Calibration, Method, Mode, PipelineConfig};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum RunError {
    /// Bad configuration or unreadable inputs, detected before processing.
    Config(anyhow::Error),
    Processing(anyhow::Error),
    /// Processing finished but fewer than two frames produced a pose.
    Empty(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 1,
            RunError::Processing(_) => 2,
            RunError::Empty(_) => 3,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "configuration error: {e:#}"),
            RunError::Processing(e) => write!(f, "processing error: {e:#}"),
            RunError::Empty(why) => write!(f, "empty result: {why}"),
        }
    }
}

pub fn config_err(e: impl Into<anyhow::Error>) -> RunError {
    RunError::Config(e.into())
}

pub fn processing_err(e: impl Into<anyhow::Error>) -> RunError {
    RunError::Processing(e.into())
}

/// A frame that entered processing but produced no pose.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub frame: usize,
    pub kind: &'static str,
    pub reason: String,
}

/// Per-frame orientation results, in frame order.
#[derive(Debug, Default)]
pub struct FrameResults {
    pub poses: Vec<(usize, Pose)>,
    pub residuals_px: Vec<f64>,
    pub rejections: Vec<Rejection>,
}

impl FrameResults {
    fn push(&mut self, frame: usize, outcome: Result<(Pose, f64), Rejection>) {
        match outcome {
            Ok((pose, r)) => {
                self.poses.push((frame, pose));
                self.residuals_px.push(r);
            }
            Err(rej) => self.rejections.push(rej),
        }
    }

    pub fn block(&self, tag: &str) -> OrientationBlock {
        let mut b = OrientationBlock::new(tag);
        for (i, p) in &self.poses {
            b.insert(i.to_string(), *p);
        }
        b
    }

    pub fn residual_stats(&self) -> Value {
        let r = &self.residuals_px;
        if r.is_empty() {
            return json!({ "count": 0 });
        }
        let n = r.len() as f64;
        json!({
            "count": r.len(),
            "mean": r.iter().sum::<f64>() / n,
            "rms": (r.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
            "max": r.iter().cloned().fold(0.0, f64::max),
        })
    }
}

fn resection_kind(e: &ResectionError) -> &'static str {
    match e {
        ResectionError::TooFewPoints { .. } => "insufficient_points",
        ResectionError::Rejected { .. } => "residual_above_threshold",
        ResectionError::CollinearBasis(_) | ResectionError::Degenerate(_) => "degenerate_geometry",
        ResectionError::AllBehindCamera => "behind_camera",
        ResectionError::DuplicateName(_) | ResectionError::NonFinitePixel(_) => {
            "invalid_measurement"
        }
        ResectionError::Camera(_) | ResectionError::Geometry(_) => "resection_failed",
    }
}

fn relative_kind(e: &RelativeError) -> &'static str {
    match e {
        RelativeError::InsufficientPoints { .. } => "insufficient_points",
        RelativeError::TooSmall { .. } => "too_small",
        RelativeError::UnknownPoint(_) | RelativeError::DuplicatePoint(_) => "invalid_measurement",
        RelativeError::MissingCameraPose(_) => "missing_camera_pose",
        RelativeError::NonPositiveDistance(_) | RelativeError::Camera(_) => "resection_failed",
        RelativeError::Resection(r) => resection_kind(r),
    }
}

/// Intrinsics from a file, or initialized from a measured field of view.
pub fn camera_from(
    intrinsics: Option<&Path>,
    calibration: Option<&Calibration>,
) -> Result<CameraIntrinsics> {
    if let Some(p) = intrinsics {
        return Ok(formats::read_intrinsics(p)?);
    }
    let c = calibration.ok_or_else(|| anyhow!("no intrinsics file and no calibration section"))?;
    focal_init(c)
}

pub fn focal_init(c: &Calibration) -> Result<CameraIntrinsics> {
    let fov = FovMeasurement::new(c.fov_deg.to_radians(), c.fov_axis)?;
    let diag = diagonal_fov(fov, c.sensor_w_mm, c.sensor_h_mm, c.model)?;
    let diag_mm = c.sensor_w_mm.hypot(c.sensor_h_mm);
    let focal = focal_from_fov(diag_mm, diag, c.model)?;
    Ok(CameraIntrinsics::centered(
        c.model,
        focal,
        [c.sensor_w_mm, c.sensor_h_mm],
        [c.image_w, c.image_h],
    )?)
}

/// Joins GCP measurements with surveyed coordinates, grouped by frame.
pub fn group_correspondences(
    gcps: &[GroundControlPoint],
    measurements: &[GcpMeasurement],
) -> Result<BTreeMap<usize, Vec<Correspondence>>> {
    let by_name: BTreeMap<&str, &GroundControlPoint> =
        gcps.iter().map(|g| (g.name.as_str(), g)).collect();
    let mut out: BTreeMap<usize, Vec<Correspondence>> = BTreeMap::new();
    for m in measurements {
        let g = by_name.get(m.gcp_name.as_str()).ok_or_else(|| {
            anyhow!(
                "frame {}: unknown control point {:?}",
                m.frame_index,
                m.gcp_name
            )
        })?;
        out.entry(m.frame_index)
            .or_default()
            .push(Correspondence::new((*g).clone(), m.pixel));
    }
    Ok(out)
}

/// Resects every listed frame; frames without measurements are rejected.
pub fn resect_frames(
    exec: Execution,
    camera: Option<&CameraIntrinsics>,
    frames: &[(usize, f64)],
    correspondences: &BTreeMap<usize, Vec<Correspondence>>,
    method: Method,
    rejection_px: f64,
) -> FrameResults {
    let opts = P3pOptions { rejection_px };
    let outcomes = par::map(exec, frames, |&(index, time)| {
        let reject = |kind, reason: String| Rejection {
            frame: index,
            kind,
            reason,
        };
        let Some(corr) = correspondences.get(&index) else {
            return Err(reject(
                "no_measurements",
                "no control point measured in this frame".into(),
            ));
        };
        let fit = match method {
            Method::P3p => {
                let cam = camera.expect("P3P needs intrinsics");
                resect_frame(cam, corr, time, &opts).map(|r| (r.pose, r.residual_px))
            }
            Method::Dlt => resect_dlt11(corr, time).and_then(|s| {
                if s.rms_px > rejection_px {
                    Err(ResectionError::Rejected {
                        residual_px: s.rms_px,
                        threshold_px: rejection_px,
                    })
                } else {
                    Ok((s.pose, s.rms_px))
                }
            }),
        };
        fit.map_err(|e| {
            log::info!("frame {index}: {e}");
            reject(resection_kind(&e), e.to_string())
        })
    });
    let mut out = FrameResults::default();
    for (&(index, _), o) in frames.iter().zip(outcomes) {
        out.push(index, o);
    }
    out
}

/// Locates the object in every listed frame. `camera_poses` holds the
/// camera pose per frame, already timed.
pub fn fix_objects(
    exec: Execution,
    camera: &CameraIntrinsics,
    model: &trajecto::relative::ObjectModel,
    frames: &[(usize, f64)],
    camera_poses: &OrientationBlock,
    measurements: &[ObjectMeasurement],
    rejection_px: f64,
) -> FrameResults {
    let wanted: BTreeMap<usize, f64> = frames.iter().copied().collect();
    let kept: Vec<ObjectMeasurement> = measurements
        .iter()
        .filter(|m| wanted.contains_key(&m.frame_index))
        .cloned()
        .collect();
    let opts = P3pOptions { rejection_px };
    let outcomes: BTreeMap<usize, Result<(Pose, f64), Rejection>> =
        track_object_with(exec, camera_poses, camera, model, &kept, &opts)
            .into_iter()
            .map(|o| {
                let r = o
                    .result
                    .map_err(|e| Rejection {
                        frame: o.frame_index,
                        kind: relative_kind(&e),
                        reason: e.to_string(),
                    })
                    .and_then(|fix| {
                        let pose =
                            fix.as_pose(&NavConvention::default())
                                .ok_or_else(|| Rejection {
                                    frame: o.frame_index,
                                    kind: "resection_failed",
                                    reason: "no attitude".into(),
                                })?;
                        Ok((pose, fix.residual_px))
                    });
                (o.frame_index, r)
            })
            .collect();
    let mut out = FrameResults::default();
    let mut outcomes = outcomes;
    for &(index, _) in frames {
        let o = outcomes.remove(&index).unwrap_or_else(|| {
            Err(Rejection {
                frame: index,
                kind: "no_measurements",
                reason: "object not measured in this frame".into(),
            })
        });
        out.push(index, o);
    }
    out
}

pub fn fusion_json(fit: &SimilarityFit, a: &str, b: &str) -> Value {
    let s = &fit.similarity;
    let worst = fit.residuals.iter().map(|r| r.center_m).fold(0.0, f64::max);
    json!({
        "target_block": a,
        "source_block": b,
        "common_frames": fit.residuals.len(),
        "scale": s.scale,
        "rotation_deg": s.rotation.angle().to_degrees(),
        "translation_m": [s.translation.x, s.translation.y, s.translation.z],
        "max_center_residual_m": worst,
    })
}

pub fn comparison_json(stats: &ComparisonStats, bands: &ComparisonBands) -> Value {
    json!({
        "samples": stats.samples,
        "planimetric_mean_m": stats.planimetric_mean_m,
        "planimetric_max_m": stats.planimetric_max_m,
        "altimetric_bias_m": stats.altimetric_bias_m,
        "altimetric_std_m": stats.altimetric_std_m,
        "altimetric_max_abs_m": stats.altimetric_max_abs_m,
        "bands": { "planimetric_m": bands.planimetric_m, "altimetric_m": bands.altimetric_m },
        "planimetric_within": stats.planimetric_within(bands),
        "altimetric_within": stats.altimetric_within(bands),
    })
}

pub fn write_trajectory(
    traj: &Trajectory4D,
    csv: Option<&Path>,
    kml: Option<&Path>,
    name: &str,
) -> Result<()> {
    if let Some(p) = csv {
        let mut buf = Vec::new();
        export_csv(traj, &mut buf)?;
        fs::write(p, buf).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = kml {
        let mut buf = Vec::new();
        export_kml(traj, name, &mut buf)?;
        fs::write(p, buf).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

/// Time-ordered poses of a block.
pub fn ordered_poses(block: &OrientationBlock) -> Vec<Pose> {
    block.time_ordered().into_iter().map(|(_, p)| *p).collect()
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const PARTIAL_FILE: &str = "PARTIAL";

/// State of a run, written out as the summary whatever the outcome.
struct Run {
    dir: PathBuf,
    summary: BTreeMap<&'static str, Value>,
    outputs: Vec<&'static str>,
}

impl Run {
    fn set(&mut self, key: &'static str, v: Value) {
        self.summary.insert(key, v);
    }

    fn write(&mut self, name: &'static str, bytes: impl AsRef<[u8]>) -> Result<(), RunError> {
        let p = self.dir.join(name);
        fs::write(&p, bytes)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(processing_err)?;
        self.outputs.push(name);
        Ok(())
    }

    fn finish(mut self, status: &str, error: Option<&RunError>) -> Result<Value, RunError> {
        self.set("status", json!(status));
        if let Some(e) = error {
            self.set("error", json!(e.to_string()));
        }
        self.set("outputs", json!(self.outputs));
        let value = json!(self.summary);
        let text = serde_json::to_string_pretty(&value).expect("summary serializes") + "\n";
        let p = self.dir.join(SUMMARY_FILE);
        fs::write(&p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(processing_err)?;
        let marker = self.dir.join(PARTIAL_FILE);
        if status == "partial" {
            let msg = error.map(|e| e.to_string()).unwrap_or_default() + "\n";
            fs::write(&marker, msg)
                .with_context(|| format!("writing {}", marker.display()))
                .map_err(processing_err)?;
        }
        Ok(value)
    }
}

/// Everything read before processing starts.
struct Inputs {
    manifest: Vec<ManifestEntry>,
    camera: Option<CameraIntrinsics>,
    frame: LocalTangentPlane,
}

fn read_inputs(cfg: &PipelineConfig) -> Result<Inputs> {
    cfg.validate()?;
    let manifest_path = cfg.inputs.manifest.as_deref().expect("validated");
    let manifest = formats::read_manifest(manifest_path)?;
    if manifest.is_empty() {
        return Err(anyhow!("{}: no frames", manifest_path.display()));
    }
    let needs_camera = !(cfg.mode == Mode::CameraResect && cfg.resection.method == Method::Dlt);
    let camera = if needs_camera {
        Some(camera_from(
            cfg.inputs.intrinsics.as_deref(),
            cfg.calibration.as_ref(),
        )?)
    } else {
        None
    };
    Ok(Inputs {
        manifest,
        camera,
        frame: cfg.geo_origin.frame()?,
    })
}

/// Runs the full pipeline, writing outputs under `cfg.output_dir`, and
/// returns the summary.
pub fn run(cfg: &PipelineConfig, exec: Execution) -> Result<Value, RunError> {
    let inputs = read_inputs(cfg).map_err(config_err)?;
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating {}", cfg.output_dir.display()))
        .map_err(processing_err)?;
    let stale = cfg.output_dir.join(PARTIAL_FILE);
    if stale.exists() {
        fs::remove_file(&stale).map_err(processing_err)?;
    }
    let mut run = Run {
        dir: cfg.output_dir.clone(),
        summary: BTreeMap::new(),
        outputs: Vec::new(),
    };
    run.set("mode", json!(cfg.mode_name()));
    match stages(cfg, exec, &inputs, &mut run) {
        Ok(()) => run.finish("complete", None),
        Err(e @ RunError::Empty(_)) => {
            let _ = run.finish("empty", Some(&e))?;
            Err(e)
        }
        Err(e) => {
            let _ = run.finish("partial", Some(&e))?;
            Err(e)
        }
    }
}

fn stages(
    cfg: &PipelineConfig,
    exec: Execution,
    inputs: &Inputs,
    run: &mut Run,
) -> Result<(), RunError> {
    let manifest = &inputs.manifest;
    let base = cfg
        .inputs
        .manifest
        .as_deref()
        .and_then(Path::parent)
        .unwrap_or(Path::new("."));

    // Frame selection.
    let selected: Vec<&ManifestEntry> = if cfg.selection.enabled {
        let frames = formats::load_frames(exec, base, manifest).map_err(processing_err)?;
        let sel =
            select_frames_with(exec, &frames, &cfg.selection.config()).map_err(processing_err)?;
        run.set(
            "selection",
            json!({
                "dropped": sel.dropped,
                "boundary_picks": sel.boundary_picks.len(),
                "densified": sel.indices.len() - sel.boundary_picks.len(),
            }),
        );
        let keep: std::collections::BTreeSet<usize> = sel.indices.iter().copied().collect();
        manifest
            .iter()
            .filter(|e| keep.contains(&e.index))
            .collect()
    } else {
        manifest.iter().collect()
    };
    let owned: Vec<ManifestEntry> = selected.iter().map(|e| (*e).clone()).collect();
    let mut listing = String::from("index,time_s,image_path\n");
    for e in &owned {
        listing.push_str(&format!(
            "{},{},{}\n",
            e.index,
            e.time_s,
            e.image_path.display()
        ));
    }
    run.write("selected_frames.csv", listing)?;
    let frames: Vec<(usize, f64)> = owned.iter().map(|e| (e.index, e.time_s)).collect();

    // Per-frame orientation.
    let i = &cfg.inputs;
    let (results, poses, boresight) = match cfg.mode {
        Mode::CameraResect => {
            let gcps =
                formats::read_gcps(i.gcps.as_deref().expect("validated")).map_err(config_err)?;
            let meas = formats::read_measurements(i.measurements.as_deref().expect("validated"))
                .map_err(config_err)?;
            let corr = group_correspondences(&gcps, &meas).map_err(config_err)?;
            let results = resect_frames(
                exec,
                inputs.camera.as_ref(),
                &frames,
                &corr,
                cfg.resection.method,
                cfg.resection.rejection_px,
            );
            let mut block = results.block("camera");
            if let Some(other) = &i.fuse_block {
                let b = formats::read_block(other).map_err(config_err)?;
                let fit = estimate_similarity(&block, &b)
                    .with_context(|| format!("fusing {}", other.display()))
                    .map_err(processing_err)?;
                run.set("fusion", fusion_json(&fit, &block.frame, &b.frame));
                block = merge_blocks_weighted(&block, &b, &fit.similarity, cfg.fusion.weight)
                    .map_err(processing_err)?;
            }
            if !block.is_empty() {
                run.write("camera_block.csv", formats::format_block(&block))?;
            }
            (results, ordered_poses(&block), cfg.boresight.rotation())
        }
        Mode::FixedCameraObject | Mode::RelativeObject => {
            let model = formats::read_object_model(i.object_model.as_deref().expect("validated"))
                .map_err(config_err)?;
            let meas = formats::read_object_measurements(
                i.object_measurements.as_deref().expect("validated"),
            )
            .map_err(config_err)?;
            let cam_block = formats::read_block(i.camera_block.as_deref().expect("validated"))
                .map_err(config_err)?;
            let timed = timed_camera_poses(cfg.mode, &cam_block, &frames).map_err(config_err)?;
            let camera = inputs
                .camera
                .as_ref()
                .expect("object modes read intrinsics");
            let results = fix_objects(
                exec,
                camera,
                &model,
                &frames,
                &timed,
                &meas,
                cfg.resection.rejection_px,
            );
            let block = results.block("object");
            if !block.is_empty() {
                run.write("object_block.csv", formats::format_block(&block))?;
            }
            // Object axes are the body axes: no boresight.
            (results, ordered_poses(&block), RotationMatrix::identity())
        }
    };

    run.set(
        "frames",
        json!({
            "manifest": manifest.len(),
            "selected": frames.len(),
            "processed": results.poses.len(),
            "rejected": results.rejections.len(),
        }),
    );
    run.set("rejections", json!(results.rejections));
    run.set("residuals_px", results.residual_stats());

    if poses.len() < 2 {
        return Err(RunError::Empty(format!(
            "{} of {} selected frames produced a pose; a trajectory needs two",
            results.poses.len(),
            frames.len()
        )));
    }

    let traj = derive_kinematics(&poses, &boresight, inputs.frame).map_err(processing_err)?;
    let mut csv = Vec::new();
    export_csv(&traj, &mut csv).map_err(processing_err)?;
    run.write("trajectory.csv", csv)?;
    let mut kml = Vec::new();
    export_kml(&traj, cfg.mode_name(), &mut kml).map_err(processing_err)?;
    run.write("trajectory.kml", kml)?;
    run.set("trajectory_points", json!(traj.len()));

    if let Some(reference) = &i.reference {
        let geo = i.reference_geodetic.then_some(&inputs.frame);
        let track = formats::read_reference_track(reference, geo).map_err(config_err)?;
        let stats = compare_to_reference(&traj, &track).map_err(processing_err)?;
        let bands = ComparisonBands {
            planimetric_m: cfg.comparison.planimetric_m,
            altimetric_m: cfg.comparison.altimetric_m,
        };
        run.set("comparison", comparison_json(&stats, &bands));
    }
    Ok(())
}

/// Camera pose for every listed frame, timed by the manifest.
fn timed_camera_poses(
    mode: Mode,
    block: &OrientationBlock,
    frames: &[(usize, f64)],
) -> Result<OrientationBlock> {
    let mut out = OrientationBlock::new(block.frame.clone());
    match mode {
        Mode::FixedCameraObject => {
            let (_, fixed) = block
                .time_ordered()
                .into_iter()
                .next()
                .ok_or_else(|| anyhow!("camera block {:?} is empty", block.frame))?;
            for &(index, time) in frames {
                out.insert(index.to_string(), Pose { time, ..*fixed });
            }
        }
        _ => {
            for &(index, time) in frames {
                if let Some(p) = block.get(&index.to_string()) {
                    out.insert(index.to_string(), Pose { time, ..*p });
                }
            }
        }
    }
    Ok(out)
}
