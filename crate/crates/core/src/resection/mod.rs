//! Camera pose from ground control.
//!
//! [`resect_p3p`] needs calibrated intrinsics and at least four points: three
//! form the minimal basis, the rest act as controls that pick one of the
//! algebraic solutions and guard against blunders. [`resect_dlt11`] needs no
//! calibration but at least six non-coplanar points.

pub mod dlt;
pub mod p3p;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::camera::{CameraError, CameraIntrinsics};
use crate::geometry::{GeometryError, Pose, Vec3};

pub use dlt::{resect_dlt11, DltSolution};

/// Default control-point rejection threshold, pixels.
pub const DEFAULT_REJECTION_PX: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResectionError {
    #[error("need at least {needed} correspondences, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("duplicate control point name {0:?}")]
    DuplicateName(String),
    #[error("pixel of {0:?} is not finite")]
    NonFinitePixel(String),
    #[error("basis points {0:?} are collinear")]
    CollinearBasis([String; 3]),
    #[error("no P3P solution places the control points in front of the camera")]
    AllBehindCamera,
    #[error("control residual {residual_px:.3} px exceeds the {threshold_px} px threshold")]
    Rejected { residual_px: f64, threshold_px: f64 },
    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundControlPoint {
    pub name: String,
    /// World frame, meters.
    pub position: Vec3,
}

impl GroundControlPoint {
    pub fn new(name: impl Into<String>, position: Vec3) -> Self {
        Self {
            name: name.into(),
            position,
        }
    }
}

/// A control point observed at a pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub gcp: GroundControlPoint,
    pub pixel: [f64; 2],
}

impl Correspondence {
    pub fn new(gcp: GroundControlPoint, pixel: [f64; 2]) -> Self {
        Self { gcp, pixel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P3pOptions {
    /// Maximum accepted control residual, pixels.
    pub rejection_px: f64,
}

impl Default for P3pOptions {
    fn default() -> Self {
        Self {
            rejection_px: DEFAULT_REJECTION_PX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct P3pResult {
    pub pose: Pose,
    /// Largest control reprojection residual of the chosen solution, pixels.
    pub residual_px: f64,
    /// Residual of every algebraic candidate (infinite when a control point
    /// falls behind the camera or outside the model domain).
    pub candidate_residuals: Vec<f64>,
    pub chosen: usize,
}

fn check_inputs(points: &[Correspondence]) -> Result<(), ResectionError> {
    let mut names = BTreeSet::new();
    for c in points {
        if !names.insert(c.gcp.name.as_str()) {
            return Err(ResectionError::DuplicateName(c.gcp.name.clone()));
        }
        if !(c.pixel[0].is_finite() && c.pixel[1].is_finite()) {
            return Err(ResectionError::NonFinitePixel(c.gcp.name.clone()));
        }
    }
    Ok(())
}

fn collinear(a: &Vec3, b: &Vec3, c: &Vec3) -> bool {
    let (u, v) = (b - a, c - a);
    u.cross(&v).norm() <= 1e-9 * u.norm() * v.norm()
}

/// Reprojection error of a world point for a camera pose, pixels.
pub fn reprojection_error(
    camera: &CameraIntrinsics,
    pose: &Pose,
    world: &Vec3,
    pixel: [f64; 2],
) -> Result<f64, CameraError> {
    let [u, v] = camera.project(&pose.to_camera(world))?;
    Ok((u - pixel[0]).hypot(v - pixel[1]))
}

/// Three-point resection disambiguated by `controls`.
///
/// Every algebraic candidate is scored by its largest control residual and
/// the minimum wins; ties keep the earlier candidate.
pub fn resect_p3p(
    camera: &CameraIntrinsics,
    basis: &[Correspondence; 3],
    controls: &[Correspondence],
    time: f64,
    options: &P3pOptions,
) -> Result<P3pResult, ResectionError> {
    if controls.is_empty() {
        return Err(ResectionError::TooFewPoints { needed: 4, got: 3 });
    }
    let all: Vec<Correspondence> = basis.iter().chain(controls).cloned().collect();
    check_inputs(&all)?;
    let world = [
        basis[0].gcp.position,
        basis[1].gcp.position,
        basis[2].gcp.position,
    ];
    if collinear(&world[0], &world[1], &world[2]) {
        return Err(ResectionError::CollinearBasis([
            basis[0].gcp.name.clone(),
            basis[1].gcp.name.clone(),
            basis[2].gcp.name.clone(),
        ]));
    }
    let bearings = [
        camera.unproject(basis[0].pixel)?,
        camera.unproject(basis[1].pixel)?,
        camera.unproject(basis[2].pixel)?,
    ];

    let candidates = p3p::solve(world, bearings);
    let mut poses = Vec::with_capacity(candidates.len());
    let mut residuals = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let pose = Pose::new(cand.rotation, cand.center, time)?;
        let mut worst = 0.0f64;
        for c in controls {
            match reprojection_error(camera, &pose, &c.gcp.position, c.pixel) {
                Ok(e) => worst = worst.max(e),
                Err(_) => {
                    worst = f64::INFINITY;
                    break;
                }
            }
        }
        poses.push(pose);
        residuals.push(worst);
    }

    let chosen = residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_finite())
        .fold(None, |best: Option<(usize, f64)>, (i, &r)| match best {
            Some((_, b)) if b <= r => best,
            _ => Some((i, r)),
        });
    let Some((chosen, residual_px)) = chosen else {
        return Err(ResectionError::AllBehindCamera);
    };
    if residual_px > options.rejection_px {
        return Err(ResectionError::Rejected {
            residual_px,
            threshold_px: options.rejection_px,
        });
    }
    Ok(P3pResult {
        pose: poses[chosen],
        residual_px,
        candidate_residuals: residuals,
        chosen,
    })
}

/// P3P with a deterministic basis: the first three points by name order,
/// every other point a control.
pub fn resect_frame(
    camera: &CameraIntrinsics,
    points: &[Correspondence],
    time: f64,
    options: &P3pOptions,
) -> Result<P3pResult, ResectionError> {
    if points.len() < 4 {
        return Err(ResectionError::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.gcp.name.cmp(&b.gcp.name));
    let controls = sorted.split_off(3);
    let basis: [Correspondence; 3] = sorted.try_into().expect("three basis points");
    resect_p3p(camera, &basis, &controls, time, options)
}
