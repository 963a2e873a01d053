//! Pipeline configuration file (TOML).
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Deserializer};
use trajecto::camera::{FovAxis, ProjectionModel};
use trajecto::frames::SelectionConfig;
use trajecto::geometry::{rot_from_nav, NavAngles, RotationMatrix};
use trajecto::resection::DEFAULT_REJECTION_PX;
use trajecto::trajectory::{ComparisonBands, GeoOrigin, LocalTangentPlane, EARTH_RADIUS_M};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Poses of a moving camera from ground control.
    CameraResect,
    /// Object positions seen from a camera with a single known pose.
    FixedCameraObject,
    /// Object positions seen from a moving camera with known poses.
    RelativeObject,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, serde::Serialize, clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    P3p,
    Dlt,
}

fn parsed<'de, D, T>(d: D) -> Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr<Err = String>,
{
    String::deserialize(d)?
        .parse()
        .map_err(serde::de::Error::custom)
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub manifest: Option<PathBuf>,
    pub intrinsics: Option<PathBuf>,
    pub gcps: Option<PathBuf>,
    pub measurements: Option<PathBuf>,
    pub object_model: Option<PathBuf>,
    pub object_measurements: Option<PathBuf>,
    pub camera_block: Option<PathBuf>,
    /// Second orientation block fused into the first (camera-resect mode).
    pub fuse_block: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    /// Reference track columns are `time_s,lat,lon,alt`.
    #[serde(default)]
    pub reference_geodetic: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Selection {
    /// When false, every manifest frame is processed and no image is read.
    pub enabled: bool,
    pub drop_fraction: f64,
    pub overlap_target: f64,
    pub target_fps: f64,
    pub search_window: usize,
}

impl Default for Selection {
    fn default() -> Self {
        let d = SelectionConfig::default();
        Self {
            enabled: true,
            drop_fraction: d.drop_fraction,
            overlap_target: d.overlap_target,
            target_fps: d.target_fps,
            search_window: d.search_window,
        }
    }
}

impl Selection {
    pub fn config(&self) -> SelectionConfig {
        SelectionConfig {
            drop_fraction: self.drop_fraction,
            overlap_target: self.overlap_target,
            target_fps: self.target_fps,
            search_window: self.search_window,
        }
    }
}

/// Focal initialization from a measured field of view, used when no
/// intrinsics file is given.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    #[serde(deserialize_with = "parsed")]
    pub model: ProjectionModel,
    pub fov_deg: f64,
    #[serde(deserialize_with = "parsed", default = "diagonal")]
    pub fov_axis: FovAxis,
    pub sensor_w_mm: f64,
    pub sensor_h_mm: f64,
    pub image_w: u32,
    pub image_h: u32,
}

fn diagonal() -> FovAxis {
    FovAxis::Diagonal
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Resection {
    pub method: Method,
    pub rejection_px: f64,
}

impl Default for Resection {
    fn default() -> Self {
        Self {
            method: Method::P3p,
            rejection_px: DEFAULT_REJECTION_PX,
        }
    }
}

/// Degrees.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Boresight {
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub yaw_deg: f64,
}

impl Boresight {
    pub fn rotation(&self) -> RotationMatrix {
        rot_from_nav(NavAngles::new(
            self.pitch_deg.to_radians(),
            self.roll_deg.to_radians(),
            self.yaw_deg.to_radians(),
        ))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Origin {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
    #[serde(default = "earth_radius")]
    pub earth_radius_m: f64,
}

fn earth_radius() -> f64 {
    EARTH_RADIUS_M
}

impl Origin {
    pub fn frame(&self) -> Result<LocalTangentPlane> {
        Ok(LocalTangentPlane::with_radius(
            GeoOrigin::new(self.lat_deg, self.lon_deg, self.alt_m),
            self.earth_radius_m,
        )?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Comparison {
    pub planimetric_m: f64,
    pub altimetric_m: f64,
}

impl Default for Comparison {
    fn default() -> Self {
        let b = ComparisonBands::default();
        Self {
            planimetric_m: b.planimetric_m,
            altimetric_m: b.altimetric_m,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fusion {
    /// Pull toward the fused block on common frames.
    pub weight: f64,
}

impl Default for Fusion {
    fn default() -> Self {
        Self { weight: 0.5 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Mode,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub selection: Selection,
    pub calibration: Option<Calibration>,
    #[serde(default)]
    pub resection: Resection,
    #[serde(default)]
    pub boresight: Boresight,
    pub geo_origin: Origin,
    #[serde(default)]
    pub comparison: Comparison,
    #[serde(default)]
    pub fusion: Fusion,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text)?;
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).with_context(|| format!("parsing {}", path.display()))
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        let i = &mut self.inputs;
        for p in [
            &mut i.manifest,
            &mut i.intrinsics,
            &mut i.gcps,
            &mut i.measurements,
            &mut i.object_model,
            &mut i.object_measurements,
            &mut i.camera_block,
            &mut i.fuse_block,
            &mut i.reference,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Checks that every file the mode needs is configured and exists.
    pub fn validate(&self) -> Result<()> {
        let i = &self.inputs;
        let mut required: Vec<(&str, &Option<PathBuf>)> = vec![("manifest", &i.manifest)];
        match self.mode {
            Mode::CameraResect => {
                required.push(("gcps", &i.gcps));
                required.push(("measurements", &i.measurements));
            }
            Mode::FixedCameraObject | Mode::RelativeObject => {
                required.push(("object_model", &i.object_model));
                required.push(("object_measurements", &i.object_measurements));
                required.push(("camera_block", &i.camera_block));
            }
        }
        let needs_camera =
            !(self.mode == Mode::CameraResect && self.resection.method == Method::Dlt);
        if needs_camera && i.intrinsics.is_none() && self.calibration.is_none() {
            bail!("either inputs.intrinsics or a [calibration] section is required");
        }
        for (key, p) in required {
            match p {
                None => bail!("inputs.{key} is required in {} mode", self.mode_name()),
                Some(p) if !p.is_file() => bail!("inputs.{key}: {} does not exist", p.display()),
                Some(_) => {}
            }
        }
        for (key, p) in [
            ("intrinsics", &i.intrinsics),
            ("fuse_block", &i.fuse_block),
            ("reference", &i.reference),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    bail!("inputs.{key}: {} does not exist", p.display());
                }
            }
        }
        if i.fuse_block.is_some() && self.mode != Mode::CameraResect {
            bail!("inputs.fuse_block is only used in camera-resect mode");
        }
        if self.selection.enabled {
            self.selection.config().validate()?;
        }
        if !(self.resection.rejection_px > 0.0) {
            bail!("resection.rejection_px must be positive");
        }
        if !(0.0..=1.0).contains(&self.fusion.weight) {
            bail!("fusion.weight must lie in [0, 1]");
        }
        if !(self.comparison.planimetric_m > 0.0 && self.comparison.altimetric_m > 0.0) {
            bail!("comparison bands must be positive");
        }
        self.geo_origin.frame()?;
        Ok(())
    }

    pub fn mode_name(&self) -> &'static str {
        match self.mode {
            Mode::CameraResect => "camera-resect",
            Mode::FixedCameraObject => "fixed-camera-object",
            Mode::RelativeObject => "relative-object",
        }
    }
}
