//! Readers and writers for the pipeline's input and output files.
//!
//! Tabular files are comma-separated with a header row; surrounding
//! whitespace is ignored. Intrinsics use a `key = value` text file with `#`
//! comments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::camera::{CameraIntrinsics, ProjectionModel, RadialDistortion};
use crate::frames::FrameRecord;
use crate::fusion::OrientationBlock;
use crate::geometry::{Pose, RotationMatrix, Vec3};
use crate::par::{self, Execution};
use crate::relative::{ObjectMeasurement, ObjectModel};
use crate::resection::GroundControlPoint;
use crate::trajectory::{LocalTangentPlane, ReferenceTrack};

/// Orthonormality defect tolerated in rotation files before the matrix is
/// snapped to the nearest rotation.
pub const ROTATION_FILE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}{}: {message}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Invalid {
        path: PathBuf,
        line: Option<u64>,
        message: String,
    },
    #[error("{path}: cannot decode image: {message}")]
    Image { path: PathBuf, message: String },
}

fn invalid(path: &Path, line: Option<u64>, message: impl Into<String>) -> FormatError {
    FormatError::Invalid {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(u64, T)>, FormatError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut out = Vec::new();
    for rec in reader.deserialize::<T>() {
        let rec = rec.map_err(|source| FormatError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        out.push((out.len() as u64 + 2, rec));
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>, FormatError> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_err(path))
}

fn finite(path: &Path, line: u64, values: &[f64]) -> Result<(), FormatError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(path, Some(line), "non-finite number"))
    }
}

// ---------------------------------------------------------------- intrinsics

pub fn parse_intrinsics(path: &Path, text: &str) -> Result<CameraIntrinsics, FormatError> {
    let mut kv = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| invalid(path, Some(i as u64 + 1), "expected key = value"))?;
        kv.insert(k.trim().to_string(), (i as u64 + 1, v.trim().to_string()));
    }
    let num = |key: &str, default: Option<f64>| -> Result<f64, FormatError> {
        match kv.get(key) {
            Some((line, v)) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| invalid(path, Some(*line), format!("{key}: not a number"))),
            None => default.ok_or_else(|| invalid(path, None, format!("missing key {key}"))),
        }
    };
    let int = |key: &str| -> Result<u32, FormatError> {
        let (line, v) = kv
            .get(key)
            .ok_or_else(|| invalid(path, None, format!("missing key {key}")))?;
        v.parse::<u32>()
            .map_err(|_| invalid(path, Some(*line), format!("{key}: not a positive integer")))
    };
    let model = match kv.get("model") {
        Some((line, v)) => v
            .parse::<ProjectionModel>()
            .map_err(|e| invalid(path, Some(*line), e))?,
        None => ProjectionModel::Rectilinear,
    };
    let focal_mm = num("focal_mm", None)?;
    let sensor = [num("sensor_w_mm", None)?, num("sensor_h_mm", None)?];
    let (w, h) = (int("image_w")?, int("image_h")?);
    let c = CameraIntrinsics {
        model,
        focal_mm,
        sensor_width_mm: sensor[0],
        sensor_height_mm: sensor[1],
        image_width_px: w,
        image_height_px: h,
        principal_point_px: [
            num("ppx", Some(w as f64 / 2.0))?,
            num("ppy", Some(h as f64 / 2.0))?,
        ],
        distortion: RadialDistortion([
            num("k1", Some(0.0))?,
            num("k2", Some(0.0))?,
            num("k3", Some(0.0))?,
        ]),
    };
    c.validate(false)
        .map_err(|e| invalid(path, None, e.to_string()))?;
    Ok(c)
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics, FormatError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_intrinsics(path, &text)
}

pub fn format_intrinsics(c: &CameraIntrinsics) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model = {}", c.model);
    let _ = writeln!(s, "focal_mm = {}", c.focal_mm);
    let _ = writeln!(s, "sensor_w_mm = {}", c.sensor_width_mm);
    let _ = writeln!(s, "sensor_h_mm = {}", c.sensor_height_mm);
    let _ = writeln!(s, "image_w = {}", c.image_width_px);
    let _ = writeln!(s, "image_h = {}", c.image_height_px);
    let _ = writeln!(s, "ppx = {}", c.principal_point_px[0]);
    let _ = writeln!(s, "ppy = {}", c.principal_point_px[1]);
    for (k, v) in ["k1", "k2", "k3"].iter().zip(c.distortion.0) {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn write_intrinsics(path: &Path, c: &CameraIntrinsics) -> Result<(), FormatError> {
    write_text(path, &format_intrinsics(c))
}

// ---------------------------------------------------------------------- GCPs

#[derive(Deserialize)]
struct GcpRow {
    name: String,
    #[serde(rename = "X")]
    x: f64,
    #[serde(rename = "Y")]
    y: f64,
    #[serde(rename = "Z")]
    z: f64,
}

pub fn read_gcps(path: &Path) -> Result<Vec<GroundControlPoint>, FormatError> {
    let mut names = BTreeSet::new();
    let mut out = Vec::new();
    for (line, r) in read_rows::<GcpRow>(path)? {
        finite(path, line, &[r.x, r.y, r.z])?;
        if !names.insert(r.name.clone()) {
            return Err(invalid(
                path,
                Some(line),
                format!("duplicate point {:?}", r.name),
            ));
        }
        out.push(GroundControlPoint::new(r.name, Vec3::new(r.x, r.y, r.z)));
    }
    Ok(out)
}

pub fn write_gcps(path: &Path, gcps: &[GroundControlPoint]) -> Result<(), FormatError> {
    let mut s = String::from("name,X,Y,Z\n");
    for g in gcps {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            g.name, g.position.x, g.position.y, g.position.z
        );
    }
    write_text(path, &s)
}

// -------------------------------------------------------------- measurements

/// A control point measured in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GcpMeasurement {
    pub frame_index: usize,
    pub gcp_name: String,
    pub pixel: [f64; 2],
}

#[derive(Deserialize)]
struct GcpMeasurementRow {
    frame_index: usize,
    gcp_name: String,
    u: f64,
    v: f64,
}

pub fn read_measurements(path: &Path) -> Result<Vec<GcpMeasurement>, FormatError> {
    read_rows::<GcpMeasurementRow>(path)?
        .into_iter()
        .map(|(line, r)| {
            finite(path, line, &[r.u, r.v])?;
            Ok(GcpMeasurement {
                frame_index: r.frame_index,
                gcp_name: r.gcp_name,
                pixel: [r.u, r.v],
            })
        })
        .collect()
}

pub fn write_measurements(path: &Path, m: &[GcpMeasurement]) -> Result<(), FormatError> {
    let mut s = String::from("frame_index,gcp_name,u,v\n");
    for r in m {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.frame_index, r.gcp_name, r.pixel[0], r.pixel[1]
        );
    }
    write_text(path, &s)
}

// -------------------------------------------------------------------- object

#[derive(Deserialize)]
struct ObjectPointRow {
    name: String,
    x: f64,
    y: f64,
    z: f64,
}

pub fn read_object_model(path: &Path) -> Result<ObjectModel, FormatError> {
    let rows = read_rows::<ObjectPointRow>(path)?;
    for (line, r) in &rows {
        finite(path, *line, &[r.x, r.y, r.z])?;
    }
    ObjectModel::new(
        rows.into_iter()
            .map(|(_, r)| (r.name, Vec3::new(r.x, r.y, r.z))),
    )
    .map_err(|e| invalid(path, None, e.to_string()))
}

pub fn write_object_model(path: &Path, model: &ObjectModel) -> Result<(), FormatError> {
    let mut s = String::from("name,x,y,z\n");
    for (n, p) in model.iter() {
        let _ = writeln!(s, "{n},{},{},{}", p.x, p.y, p.z);
    }
    write_text(path, &s)
}

#[derive(Deserialize)]
struct ObjectMeasurementRow {
    frame_index: usize,
    point_name: String,
    u: f64,
    v: f64,
}

pub fn read_object_measurements(path: &Path) -> Result<Vec<ObjectMeasurement>, FormatError> {
    read_rows::<ObjectMeasurementRow>(path)?
        .into_iter()
        .map(|(line, r)| {
            finite(path, line, &[r.u, r.v])?;
            Ok(ObjectMeasurement::new(
                r.frame_index,
                r.point_name,
                [r.u, r.v],
            ))
        })
        .collect()
}

pub fn write_object_measurements(path: &Path, m: &[ObjectMeasurement]) -> Result<(), FormatError> {
    let mut s = String::from("frame_index,point_name,u,v\n");
    for r in m {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.frame_index, r.point_name, r.pixel[0], r.pixel[1]
        );
    }
    write_text(path, &s)
}

// -------------------------------------------------------- orientation blocks

#[derive(Deserialize)]
#[allow(non_snake_case)]
struct BlockRow {
    frame_id: String,
    time_s: f64,
    Cx: f64,
    Cy: f64,
    Cz: f64,
    r11: f64,
    r12: f64,
    r13: f64,
    r21: f64,
    r22: f64,
    r23: f64,
    r31: f64,
    r32: f64,
    r33: f64,
}

/// Reads an orientation block; the reference-frame tag is the file stem.
pub fn read_block(path: &Path) -> Result<OrientationBlock, FormatError> {
    let tag = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut block = OrientationBlock::new(tag);
    for (line, r) in read_rows::<BlockRow>(path)? {
        let rows = [
            [r.r11, r.r12, r.r13],
            [r.r21, r.r22, r.r23],
            [r.r31, r.r32, r.r33],
        ];
        finite(path, line, &[r.time_s, r.Cx, r.Cy, r.Cz])?;
        finite(path, line, rows.as_flattened())?;
        let rotation = match RotationMatrix::from_rows(rows) {
            Ok(rot) => rot,
            Err(_) => {
                let m = nalgebra::Matrix3::from_fn(|i, j| rows[i][j]);
                let snapped = RotationMatrix::nearest(&m);
                if (snapped.matrix() - m).abs().max() > ROTATION_FILE_TOLERANCE
                    || m.determinant() <= 0.0
                {
                    return Err(invalid(path, Some(line), "rotation is not orthonormal"));
                }
                snapped
            }
        };
        let pose = Pose::new(rotation, Vec3::new(r.Cx, r.Cy, r.Cz), r.time_s)
            .map_err(|e| invalid(path, Some(line), e.to_string()))?;
        if block.insert(r.frame_id.clone(), pose).is_some() {
            return Err(invalid(
                path,
                Some(line),
                format!("duplicate frame id {:?}", r.frame_id),
            ));
        }
    }
    Ok(block)
}

pub fn format_block(block: &OrientationBlock) -> String {
    let mut s = String::from("frame_id,time_s,Cx,Cy,Cz,r11,r12,r13,r21,r22,r23,r31,r32,r33\n");
    for (id, p) in &block.poses {
        let _ = write!(
            s,
            "{id},{},{},{},{}",
            p.time, p.center.x, p.center.y, p.center.z
        );
        for row in p.rotation.rows() {
            for v in row {
                let _ = write!(s, ",{v}");
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_block(path: &Path, block: &OrientationBlock) -> Result<(), FormatError> {
    write_text(path, &format_block(block))
}

// ------------------------------------------------------------ frame manifest

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub index: usize,
    pub time_s: f64,
    /// As written in the manifest.
    pub image_path: PathBuf,
}

#[derive(Deserialize)]
struct ManifestRow {
    index: usize,
    time_s: f64,
    image_path: PathBuf,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, FormatError> {
    let rows = read_rows::<ManifestRow>(path)?;
    let mut out: Vec<ManifestEntry> = Vec::with_capacity(rows.len());
    for (line, r) in rows {
        finite(path, line, &[r.time_s])?;
        if let Some(prev) = out.last() {
            if r.index <= prev.index || r.time_s <= prev.time_s {
                return Err(invalid(
                    path,
                    Some(line),
                    "indices and times must be strictly increasing",
                ));
            }
        }
        out.push(ManifestEntry {
            index: r.index,
            time_s: r.time_s,
            image_path: r.image_path,
        });
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), FormatError> {
    let mut s = String::from("index,time_s,image_path\n");
    for e in entries {
        let _ = writeln!(s, "{},{},{}", e.index, e.time_s, e.image_path.display());
    }
    write_text(path, &s)
}

/// Decodes every manifest image; relative paths are taken from `base`.
pub fn load_frames(
    exec: Execution,
    base: &Path,
    entries: &[ManifestEntry],
) -> Result<Vec<FrameRecord>, FormatError> {
    par::map(exec, entries, |e| {
        let p = base.join(&e.image_path);
        let img = image::open(&p).map_err(|err| FormatError::Image {
            path: p.clone(),
            message: err.to_string(),
        })?;
        Ok(FrameRecord::new(e.index, e.time_s, img.to_rgb8()))
    })
    .into_iter()
    .collect()
}

// ----------------------------------------------------------- reference track

#[derive(Deserialize)]
struct LocalRow {
    time_s: f64,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Deserialize)]
struct GeodeticRow {
    time_s: f64,
    lat: f64,
    lon: f64,
    alt: f64,
}

/// Reads a reference track in local coordinates (`time_s,x,y,z`), or, when
/// `geodetic` is given, in `time_s,lat,lon,alt` converted through it.
pub fn read_reference_track(
    path: &Path,
    geodetic: Option<&LocalTangentPlane>,
) -> Result<ReferenceTrack, FormatError> {
    let samples: Vec<(f64, Vec3)> = match geodetic {
        None => read_rows::<LocalRow>(path)?
            .into_iter()
            .map(|(line, r)| {
                finite(path, line, &[r.time_s, r.x, r.y, r.z])
                    .map(|_| (r.time_s, Vec3::new(r.x, r.y, r.z)))
            })
            .collect::<Result<_, _>>()?,
        Some(frame) => read_rows::<GeodeticRow>(path)?
            .into_iter()
            .map(|(line, r)| {
                finite(path, line, &[r.time_s, r.lat, r.lon, r.alt])
                    .map(|_| (r.time_s, frame.to_local(r.lat, r.lon, r.alt)))
            })
            .collect::<Result<_, _>>()?,
    };
    ReferenceTrack::new(samples).map_err(|e| invalid(path, None, e.to_string()))
}
