//! Camera intrinsics, fisheye projection models and lens distortion.
//!
//! Image coordinates are pixels with the origin at the top-left corner, u to
//! the right and v downward, matching the camera frame (x right, y down, z
//! along the optical axis). A camera-frame direction with field angle θ lands
//! at normalized radius `ρ = g(θ)` (tan θ, θ, or 2·sin(θ/2)), the radial
//! distortion `ρ_d = ρ·(1 + k1ρ² + k2ρ⁴ + k3ρ⁶)` is applied, and `ρ_d·focal`
//! millimetres on the sensor are converted to pixels.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::Vec3;
use crate::poly;

/// Newton tolerance on the undistorted radius, millimetres on the sensor.
pub const UNDISTORT_TOLERANCE_MM: f64 = 1e-12;
pub const UNDISTORT_MAX_ITERATIONS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("field of view {fov} rad is outside the domain of the {model} model")]
    FovDomain { fov: f64, model: ProjectionModel },
    #[error("focal initialisation needs a diagonal field of view, got {0:?}")]
    NotDiagonal(FovAxis),
    #[error("point is behind the camera")]
    BehindCamera,
    #[error("field angle {0} rad is outside the {1} model domain")]
    OutsideModelDomain(f64, ProjectionModel),
    #[error("distortion polynomial is not invertible at distorted radius {radius_mm} mm")]
    InversionFailure { radius_mm: f64 },
    #[error("{0} must be strictly positive")]
    NonPositive(&'static str),
}

/// Radial mapping from field angle to image radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjectionModel {
    /// Distortion-free pinhole, `r = f·tan θ`.
    Rectilinear,
    /// `r = f·θ`.
    Equidistant,
    /// Equal-area, `r = 2f·sin(θ/2)`.
    Equisolid,
}

impl ProjectionModel {
    pub const ALL: [ProjectionModel; 3] = [Self::Rectilinear, Self::Equidistant, Self::Equisolid];

    /// Image radius for unit focal length.
    pub fn radius(self, theta: f64) -> f64 {
        match self {
            Self::Rectilinear => theta.tan(),
            Self::Equidistant => theta,
            Self::Equisolid => 2.0 * (theta / 2.0).sin(),
        }
    }

    /// Field angle for a unit-focal radius, `None` outside the model range.
    pub fn field_angle(self, rho: f64) -> Option<f64> {
        match self {
            Self::Rectilinear => Some(rho.atan()),
            Self::Equidistant => (rho <= PI).then_some(rho),
            Self::Equisolid => (rho <= 2.0).then(|| 2.0 * (rho / 2.0).asin()),
        }
    }

    fn accepts_field_angle(self, theta: f64) -> bool {
        match self {
            Self::Rectilinear => theta < PI / 2.0,
            Self::Equidistant | Self::Equisolid => theta <= PI,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Rectilinear => "rectilinear",
            Self::Equidistant => "equidistant",
            Self::Equisolid => "equisolid",
        }
    }
}

impl fmt::Display for ProjectionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProjectionModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectilinear" | "pinhole" => Ok(Self::Rectilinear),
            "equidistant" => Ok(Self::Equidistant),
            "equisolid" => Ok(Self::Equisolid),
            other => Err(format!("unknown projection model `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FovAxis {
    Diagonal,
    Horizontal,
    Vertical,
}

impl FromStr for FovAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "diagonal" | "d" => Ok(Self::Diagonal),
            "horizontal" | "h" => Ok(Self::Horizontal),
            "vertical" | "v" => Ok(Self::Vertical),
            other => Err(format!("unknown field-of-view axis `{other}`")),
        }
    }
}

/// A measured angle of view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovMeasurement {
    pub fov_rad: f64,
    pub axis: FovAxis,
}

impl FovMeasurement {
    pub fn new(fov_rad: f64, axis: FovAxis) -> Result<Self, CameraError> {
        if !(fov_rad > 0.0 && fov_rad <= PI) {
            return Err(CameraError::InvalidIntrinsics(format!(
                "field of view {fov_rad} rad not in (0, π]"
            )));
        }
        Ok(Self { fov_rad, axis })
    }

    pub fn diagonal(fov_rad: f64) -> Result<Self, CameraError> {
        Self::new(fov_rad, FovAxis::Diagonal)
    }
}

/// Focal length from a diagonal field of view under the chosen projection.
pub fn focal_from_fov(
    diag_mm: f64,
    fov: FovMeasurement,
    model: ProjectionModel,
) -> Result<f64, CameraError> {
    if !(diag_mm > 0.0) {
        return Err(CameraError::NonPositive("sensor diagonal"));
    }
    if fov.axis != FovAxis::Diagonal {
        return Err(CameraError::NotDiagonal(fov.axis));
    }
    let a = fov.fov_rad;
    let focal = match model {
        ProjectionModel::Rectilinear => {
            if a >= PI {
                return Err(CameraError::FovDomain { fov: a, model });
            }
            diag_mm / (2.0 * (a / 2.0).tan())
        }
        ProjectionModel::Equidistant => diag_mm / a,
        ProjectionModel::Equisolid => diag_mm / (4.0 * (a / 4.0).sin()),
    };
    Ok(focal)
}

/// Converts a horizontal or vertical field of view to the diagonal one,
/// through the model's own radial mapping.
pub fn diagonal_fov(
    fov: FovMeasurement,
    sensor_width_mm: f64,
    sensor_height_mm: f64,
    model: ProjectionModel,
) -> Result<FovMeasurement, CameraError> {
    let half_extent = match fov.axis {
        FovAxis::Diagonal => return Ok(fov),
        FovAxis::Horizontal => sensor_width_mm / 2.0,
        FovAxis::Vertical => sensor_height_mm / 2.0,
    };
    if !(sensor_width_mm > 0.0 && sensor_height_mm > 0.0) {
        return Err(CameraError::NonPositive("sensor size"));
    }
    let half = fov.fov_rad / 2.0;
    if !model.accepts_field_angle(half) {
        return Err(CameraError::FovDomain {
            fov: fov.fov_rad,
            model,
        });
    }
    let focal = half_extent / model.radius(half);
    let half_diag = sensor_width_mm.hypot(sensor_height_mm) / 2.0;
    let theta = model
        .field_angle(half_diag / focal)
        .filter(|t| model.accepts_field_angle(*t))
        .ok_or(CameraError::FovDomain {
            fov: fov.fov_rad,
            model,
        })?;
    FovMeasurement::new(2.0 * theta, FovAxis::Diagonal)
}

/// Apparent size in pixels of an object of `object_size_m` seen at
/// `distance_m`.
pub fn pixel_footprint(
    object_size_m: f64,
    focal_mm: f64,
    distance_m: f64,
    image_width_px: u32,
    sensor_width_mm: f64,
) -> Result<f64, CameraError> {
    for (v, name) in [
        (object_size_m, "object size"),
        (focal_mm, "focal length"),
        (distance_m, "distance"),
        (image_width_px as f64, "image width"),
        (sensor_width_mm, "sensor width"),
    ] {
        if !(v > 0.0) {
            return Err(CameraError::NonPositive(name));
        }
    }
    Ok(object_size_m
        * (focal_mm * 1e-3 / distance_m)
        * (image_width_px as f64 / (sensor_width_mm * 1e-3)))
}

/// Odd radial polynomial `ρ ↦ ρ·(1 + k1ρ² + k2ρ⁴ + k3ρ⁶)` on normalized radii.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RadialDistortion(pub [f64; 3]);

impl RadialDistortion {
    pub fn is_identity(&self) -> bool {
        self.0 == [0.0; 3]
    }

    pub fn apply(&self, rho: f64) -> f64 {
        let [k1, k2, k3] = self.0;
        let r2 = rho * rho;
        rho * (1.0 + r2 * (k1 + r2 * (k2 + r2 * k3)))
    }

    pub fn slope(&self, rho: f64) -> f64 {
        let [k1, k2, k3] = self.0;
        let r2 = rho * rho;
        1.0 + r2 * (3.0 * k1 + r2 * (5.0 * k2 + r2 * 7.0 * k3))
    }

    /// First radius where the polynomial stops increasing, if any.
    pub fn monotone_limit(&self) -> Option<f64> {
        let [k1, k2, k3] = self.0;
        // slope as a cubic in s = ρ²
        poly::real_roots(&[1.0, 3.0 * k1, 5.0 * k2, 7.0 * k3])
            .into_iter()
            .filter(|s| *s > 0.0)
            .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.min(s))))
            .map(f64::sqrt)
    }

    /// Undistorted radius for a distorted one. `tolerance` is in the same
    /// normalized units.
    pub fn invert(&self, distorted: f64, tolerance: f64) -> Option<f64> {
        if self.is_identity() || distorted == 0.0 {
            return Some(distorted);
        }
        let limit = self.monotone_limit();
        let mut hi = match limit {
            Some(l) => {
                if distorted >= self.apply(l) {
                    return None;
                }
                l
            }
            None => {
                let mut hi = distorted.max(1.0);
                while self.apply(hi) < distorted {
                    hi *= 2.0;
                }
                hi
            }
        };
        let mut lo = 0.0;
        let mut rho = distorted.min(hi);
        for _ in 0..UNDISTORT_MAX_ITERATIONS {
            let f = self.apply(rho) - distorted;
            if f > 0.0 {
                hi = rho;
            } else {
                lo = rho;
            }
            let slope = self.slope(rho);
            let mut next = rho - f / slope;
            if !(slope > 0.0 && next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - rho).abs() <= tolerance {
                return Some(next);
            }
            rho = next;
        }
        None
    }
}

/// Interior orientation of a camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub model: ProjectionModel,
    pub focal_mm: f64,
    pub sensor_width_mm: f64,
    pub sensor_height_mm: f64,
    pub image_width_px: u32,
    pub image_height_px: u32,
    /// (u0, v0), pixels.
    pub principal_point_px: [f64; 2],
    pub distortion: RadialDistortion,
}

impl CameraIntrinsics {
    /// Distortion-free camera with a centered principal point.
    pub fn centered(
        model: ProjectionModel,
        focal_mm: f64,
        sensor_mm: [f64; 2],
        image_px: [u32; 2],
    ) -> Result<Self, CameraError> {
        let c = Self {
            model,
            focal_mm,
            sensor_width_mm: sensor_mm[0],
            sensor_height_mm: sensor_mm[1],
            image_width_px: image_px[0],
            image_height_px: image_px[1],
            principal_point_px: [image_px[0] as f64 / 2.0, image_px[1] as f64 / 2.0],
            distortion: RadialDistortion::default(),
        };
        c.validate(false)?;
        Ok(c)
    }

    pub fn with_distortion(mut self, k: [f64; 3]) -> Self {
        self.distortion = RadialDistortion(k);
        self
    }

    /// Checks positivity and, unless `allow_outside_principal_point`, that the
    /// principal point lies within the image.
    pub fn validate(&self, allow_outside_principal_point: bool) -> Result<(), CameraError> {
        let bad = |m: &str| Err(CameraError::InvalidIntrinsics(m.to_string()));
        if !(self.focal_mm > 0.0 && self.focal_mm.is_finite()) {
            return bad("focal_mm must be positive");
        }
        if !(self.sensor_width_mm > 0.0 && self.sensor_height_mm > 0.0) {
            return bad("sensor dimensions must be positive");
        }
        if self.image_width_px == 0 || self.image_height_px == 0 {
            return bad("image dimensions must be positive");
        }
        let [u0, v0] = self.principal_point_px;
        if !(u0.is_finite() && v0.is_finite()) {
            return bad("principal point must be finite");
        }
        let inside = (0.0..=self.image_width_px as f64).contains(&u0)
            && (0.0..=self.image_height_px as f64).contains(&v0);
        if !allow_outside_principal_point && !inside {
            return bad("principal point outside the image");
        }
        if self.distortion.0.iter().any(|k| !k.is_finite()) {
            return bad("distortion coefficients must be finite");
        }
        Ok(())
    }

    pub fn sensor_diagonal_mm(&self) -> f64 {
        self.sensor_width_mm.hypot(self.sensor_height_mm)
    }

    /// Pixels per millimetre along u and v.
    pub fn pixel_scale(&self) -> [f64; 2] {
        [
            self.image_width_px as f64 / self.sensor_width_mm,
            self.image_height_px as f64 / self.sensor_height_mm,
        ]
    }

    /// Focal length in pixels along u and v.
    pub fn focal_px(&self) -> [f64; 2] {
        let [sx, sy] = self.pixel_scale();
        [self.focal_mm * sx, self.focal_mm * sy]
    }

    pub fn project(&self, p: &Vec3) -> Result<[f64; 2], CameraError> {
        project(self, p)
    }

    pub fn unproject(&self, pixel: [f64; 2]) -> Result<Vec3, CameraError> {
        unproject(self, pixel)
    }
}

/// Camera-frame point to pixel.
pub fn project(c: &CameraIntrinsics, p: &Vec3) -> Result<[f64; 2], CameraError> {
    let lateral = p.x.hypot(p.y);
    if c.model == ProjectionModel::Rectilinear && !(p.z > 0.0) {
        return Err(CameraError::BehindCamera);
    }
    if lateral == 0.0 {
        if p.z > 0.0 {
            return Ok(c.principal_point_px);
        }
        return Err(CameraError::BehindCamera);
    }
    let rho = match c.model {
        ProjectionModel::Rectilinear => lateral / p.z,
        model => {
            let theta = lateral.atan2(p.z);
            if !model.accepts_field_angle(theta) {
                return Err(CameraError::OutsideModelDomain(theta, model));
            }
            model.radius(theta)
        }
    };
    let r_mm = c.distortion.apply(rho) * c.focal_mm;
    let [sx, sy] = c.pixel_scale();
    let [u0, v0] = c.principal_point_px;
    Ok([
        u0 + r_mm * (p.x / lateral) * sx,
        v0 + r_mm * (p.y / lateral) * sy,
    ])
}

/// Pixel to unit viewing ray in the camera frame.
pub fn unproject(c: &CameraIntrinsics, pixel: [f64; 2]) -> Result<Vec3, CameraError> {
    let [sx, sy] = c.pixel_scale();
    let [u0, v0] = c.principal_point_px;
    let x_mm = (pixel[0] - u0) / sx;
    let y_mm = (pixel[1] - v0) / sy;
    let r_mm = x_mm.hypot(y_mm);
    if r_mm == 0.0 {
        return Ok(Vec3::z());
    }
    let rho = c
        .distortion
        .invert(r_mm / c.focal_mm, UNDISTORT_TOLERANCE_MM / c.focal_mm)
        .ok_or(CameraError::InversionFailure { radius_mm: r_mm })?;
    let (cx, cy) = (x_mm / r_mm, y_mm / r_mm);
    match c.model {
        ProjectionModel::Rectilinear => Ok(Vec3::new(rho * cx, rho * cy, 1.0).normalize()),
        model => {
            let theta = model
                .field_angle(rho)
                .ok_or(CameraError::OutsideModelDomain(rho, model))?;
            let s = theta.sin();
            Ok(Vec3::new(s * cx, s * cy, theta.cos()))
        }
    }
}
