//! One function per subcommand. Results go to files; a JSON report goes
//! to stdout.

use std::collections::BTreeSet;
use std::fs;

use anyhow::{anyhow, bail, Context};
use serde_json::{json, Value};
use trajecto::camera::{FovAxis, ProjectionModel};
use trajecto::formats::{self, ManifestEntry};
use trajecto::frames::{select_frames_with, SelectionConfig};
use trajecto::fusion::{estimate_similarity, merge_blocks_weighted};
use trajecto::geometry::{rot_from_nav, NavAngles, RotationMatrix, Vec3};
use trajecto::par::Execution;
use trajecto::trajectory::{
    compare_to_reference, derive_kinematics, parse_csv, ComparisonBands, GeoOrigin,
    LocalTangentPlane, ReferenceTrack, Trajectory4D, TrajectoryPoint,
};

use crate::config::{Calibration, Method, PipelineConfig};
use crate::pipeline::{self, config_err, processing_err, FrameResults, RunError};
use crate::{
    CompareArgs, ExportArgs, FixArgs, FocalArgs, FuseArgs, GeoArgs, ResectArgs, RunArgs, SelectArgs,
};

fn report(v: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("report serializes")
    );
}

fn ltp(g: &GeoArgs) -> Result<LocalTangentPlane, RunError> {
    LocalTangentPlane::with_radius(GeoOrigin::new(g.lat, g.lon, g.alt), g.earth_radius_m)
        .map_err(config_err)
}

fn frame_results_report(r: &FrameResults, selected: usize) -> Value {
    json!({
        "frames": { "selected": selected, "processed": r.poses.len(), "rejected": r.rejections.len() },
        "rejections": r.rejections,
        "residuals_px": r.residual_stats(),
    })
}

pub fn select(a: &SelectArgs, exec: Execution) -> Result<(), RunError> {
    let cfg = SelectionConfig {
        drop_fraction: a.drop_fraction,
        overlap_target: a.overlap_target,
        target_fps: a.target_fps,
        search_window: a.search_window,
    };
    cfg.validate().map_err(config_err)?;
    let entries = formats::read_manifest(&a.manifest).map_err(config_err)?;
    let base = a.manifest.parent().unwrap_or(std::path::Path::new("."));
    let frames = formats::load_frames(exec, base, &entries).map_err(processing_err)?;
    let sel = select_frames_with(exec, &frames, &cfg).map_err(processing_err)?;
    let keep: BTreeSet<usize> = sel.indices.iter().copied().collect();
    let kept: Vec<ManifestEntry> = entries
        .into_iter()
        .filter(|e| keep.contains(&e.index))
        .collect();
    formats::write_manifest(&a.output, &kept).map_err(processing_err)?;
    report(&json!({
        "selected": sel.indices,
        "boundary_picks": sel.boundary_picks,
        "dropped": sel.dropped,
    }));
    Ok(())
}

pub fn focal(a: &FocalArgs) -> Result<(), RunError> {
    let axis: FovAxis = a
        .fov_axis
        .parse()
        .map_err(|e: String| config_err(anyhow!(e)))?;
    let models: Vec<ProjectionModel> = match &a.model {
        Some(m) => vec![m.parse().map_err(|e: String| config_err(anyhow!(e)))?],
        None => ProjectionModel::ALL.to_vec(),
    };
    let mut out = serde_json::Map::new();
    for model in &models {
        let cal = Calibration {
            model: *model,
            fov_deg: a.fov_deg,
            fov_axis: axis,
            sensor_w_mm: a.sensor_w_mm,
            sensor_h_mm: a.sensor_h_mm,
            image_w: a.image_w.unwrap_or(1),
            image_h: a.image_h.unwrap_or(1),
        };
        let cam = pipeline::focal_init(&cal).map_err(config_err)?;
        out.insert(model.name().to_string(), json!(cam.focal_mm));
        if let Some(p) = &a.output {
            formats::write_intrinsics(p, &cam).map_err(processing_err)?;
        }
    }
    report(&json!({ "fov_axis": a.fov_axis, "focal_mm": out }));
    Ok(())
}

pub fn resect(a: &ResectArgs, exec: Execution) -> Result<(), RunError> {
    if a.method == Method::P3p && a.intrinsics.is_none() {
        return Err(config_err(anyhow!(
            "--intrinsics is required with the p3p method"
        )));
    }
    let camera = a
        .intrinsics
        .as_deref()
        .map(formats::read_intrinsics)
        .transpose()
        .map_err(config_err)?;
    let gcps = formats::read_gcps(&a.gcps).map_err(config_err)?;
    let meas = formats::read_measurements(&a.measurements).map_err(config_err)?;
    let manifest = formats::read_manifest(&a.manifest).map_err(config_err)?;
    let corr = pipeline::group_correspondences(&gcps, &meas).map_err(config_err)?;
    let frames: Vec<(usize, f64)> = manifest.iter().map(|e| (e.index, e.time_s)).collect();
    let results = pipeline::resect_frames(
        exec,
        camera.as_ref(),
        &frames,
        &corr,
        a.method,
        a.rejection_px,
    );
    report(&frame_results_report(&results, frames.len()));
    if results.poses.is_empty() {
        return Err(RunError::Empty("no frame could be resected".into()));
    }
    formats::write_block(&a.output, &results.block("camera")).map_err(processing_err)
}

pub fn fix_object(a: &FixArgs, exec: Execution) -> Result<(), RunError> {
    let camera = formats::read_intrinsics(&a.intrinsics).map_err(config_err)?;
    let model = formats::read_object_model(&a.object_model).map_err(config_err)?;
    let meas = formats::read_object_measurements(&a.measurements).map_err(config_err)?;
    let block = formats::read_block(&a.camera_block).map_err(config_err)?;
    let frames: Vec<(usize, f64)> = match &a.manifest {
        Some(m) => formats::read_manifest(m)
            .map_err(config_err)?
            .iter()
            .map(|e| (e.index, e.time_s))
            .collect(),
        None if a.fixed => {
            return Err(config_err(anyhow!(
                "--fixed needs --manifest for frame times"
            )))
        }
        None => {
            let mut f: Vec<(usize, f64)> = block
                .poses
                .iter()
                .map(|(id, p)| id.parse::<usize>().map(|i| (i, p.time)))
                .collect::<Result<_, _>>()
                .map_err(|_| config_err(anyhow!("camera block frame ids must be frame indices")))?;
            f.sort_by_key(|x| x.0);
            f
        }
    };
    let mut timed = trajecto::fusion::OrientationBlock::new(block.frame.clone());
    if a.fixed {
        let (_, p) = block
            .time_ordered()
            .into_iter()
            .next()
            .ok_or_else(|| config_err(anyhow!("camera block is empty")))?;
        for &(i, t) in &frames {
            timed.insert(i.to_string(), trajecto::Pose { time: t, ..*p });
        }
    } else {
        for &(i, t) in &frames {
            if let Some(p) = block.get(&i.to_string()) {
                timed.insert(i.to_string(), trajecto::Pose { time: t, ..*p });
            }
        }
    }
    let measured: BTreeSet<usize> = meas.iter().map(|m| m.frame_index).collect();
    let frames: Vec<(usize, f64)> = frames
        .into_iter()
        .filter(|(i, _)| measured.contains(i))
        .collect();
    let results = pipeline::fix_objects(
        exec,
        &camera,
        &model,
        &frames,
        &timed,
        &meas,
        a.rejection_px,
    );
    report(&frame_results_report(&results, frames.len()));
    if results.poses.is_empty() {
        return Err(RunError::Empty(
            "the object could not be located in any frame".into(),
        ));
    }
    formats::write_block(&a.output, &results.block("object")).map_err(processing_err)
}

pub fn fuse(a: &FuseArgs) -> Result<(), RunError> {
    let ba = formats::read_block(&a.a).map_err(config_err)?;
    let bb = formats::read_block(&a.b).map_err(config_err)?;
    let fit = estimate_similarity(&ba, &bb).map_err(processing_err)?;
    let merged = merge_blocks_weighted(&ba, &bb, &fit.similarity, a.weight).map_err(config_err)?;
    formats::write_block(&a.output, &merged).map_err(processing_err)?;
    let mut v = pipeline::fusion_json(&fit, &ba.frame, &bb.frame);
    v["merged_frames"] = json!(merged.len());
    report(&v);
    Ok(())
}

pub fn export(a: &ExportArgs) -> Result<(), RunError> {
    if a.csv.is_none() && a.kml.is_none() {
        return Err(config_err(anyhow!(
            "nothing to write: give --csv and/or --kml"
        )));
    }
    let frame = ltp(&a.geo)?;
    let boresight = match &a.boresight_deg {
        Some(v) => rot_from_nav(NavAngles::new(
            v[0].to_radians(),
            v[1].to_radians(),
            v[2].to_radians(),
        )),
        None => RotationMatrix::identity(),
    };
    let block = formats::read_block(&a.block).map_err(config_err)?;
    let traj = derive_kinematics(&pipeline::ordered_poses(&block), &boresight, frame)
        .map_err(processing_err)?;
    pipeline::write_trajectory(&traj, a.csv.as_deref(), a.kml.as_deref(), &a.name)
        .map_err(processing_err)?;
    report(&json!({ "points": traj.len() }));
    Ok(())
}

/// Rebuilds a trajectory from its CSV; only times and local positions
/// matter for the comparison.
fn read_trajectory(path: &std::path::Path) -> anyhow::Result<Trajectory4D> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = parse_csv(file).with_context(|| format!("reading {}", path.display()))?;
    if rows.is_empty() {
        bail!("{}: no rows", path.display());
    }
    let points = rows
        .iter()
        .map(|r| TrajectoryPoint {
            time_s: r.time_s,
            position: Vec3::new(r.x, r.y, r.z),
            nav: NavAngles::new(
                r.pitch_deg.to_radians(),
                r.roll_deg.to_radians(),
                r.yaw_deg.to_radians(),
            ),
            gimbal_lock: false,
            speed_mps: r.speed_mps,
            climb_mps: r.climb_mps,
        })
        .collect();
    // The geodetic frame is not needed to compare local positions.
    let frame = LocalTangentPlane::new(GeoOrigin::new(
        rows[0].lat,
        rows[0].lon,
        rows[0].alt - rows[0].z,
    ));
    Ok(Trajectory4D::new(points, frame)?)
}

pub fn compare(a: &CompareArgs) -> Result<(), RunError> {
    let traj = read_trajectory(&a.trajectory).map_err(config_err)?;
    let geo = a
        .origin
        .as_ref()
        .map(|o| {
            ltp(&GeoArgs {
                lat: o[0],
                lon: o[1],
                alt: o[2],
                earth_radius_m: a.earth_radius_m,
            })
        })
        .transpose()?;
    let track: ReferenceTrack =
        formats::read_reference_track(&a.reference, geo.as_ref()).map_err(config_err)?;
    let stats = compare_to_reference(&traj, &track).map_err(processing_err)?;
    let bands = ComparisonBands {
        planimetric_m: a.planimetric_m,
        altimetric_m: a.altimetric_m,
    };
    report(&pipeline::comparison_json(&stats, &bands));
    Ok(())
}

pub fn run(a: &RunArgs, exec: Execution) -> Result<(), RunError> {
    let mut cfg = PipelineConfig::load(&a.config).map_err(config_err)?;
    if let Some(d) = &a.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    if let Some(m) = a.method {
        cfg.resection.method = m;
    }
    if let Some(r) = a.rejection_px {
        cfg.resection.rejection_px = r;
    }
    if a.no_selection {
        cfg.selection.enabled = false;
    }
    let summary = pipeline::run(&cfg, exec)?;
    report(&summary);
    Ok(())
}
