//! Positioning an object seen by a camera of known pose.
//!
//! The camera is first resected in the object's own frame from measured
//! object points. Its distance to the object origin (the center of gravity)
//! and the corrected sighting ray through the origin's pixel are then
//! carried into the world frame: `object = camera_center + d·v`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::camera::{CameraError, CameraIntrinsics};
use crate::fusion::OrientationBlock;
use crate::geometry::{NavConvention, Pose, RotationMatrix, Vec3};
use crate::par::{self, Execution};
use crate::resection::{
    resect_frame, Correspondence, GroundControlPoint, P3pOptions, ResectionError,
};

/// Smallest accepted bounding-box diagonal of the measured points, pixels.
pub const MIN_DIAGONAL_PX: f64 = 20.0;
/// Smallest accepted convex-hull area of the measured points, pixels².
pub const MIN_AREA_PX2: f64 = 200.0;
/// Points needed for a resection: three for the basis, one control.
pub const MIN_POINTS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelativeError {
    #[error("{got} measured points, at least {needed} required")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("object image too small (diagonal {diagonal_px:.1} px, area {area_px2:.1} px²)")]
    TooSmall { diagonal_px: f64, area_px2: f64 },
    #[error("point {0:?} is not in the object model")]
    UnknownPoint(String),
    #[error("duplicate object point {0:?}")]
    DuplicatePoint(String),
    #[error("distance to the object must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("no camera pose for frame {0}")]
    MissingCameraPose(usize),
    #[error(transparent)]
    Resection(#[from] ResectionError),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

/// Named object points in the center-of-gravity frame, meters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectModel {
    points: BTreeMap<String, Vec3>,
}

impl ObjectModel {
    pub fn new<S: Into<String>>(
        points: impl IntoIterator<Item = (S, Vec3)>,
    ) -> Result<Self, RelativeError> {
        let mut map = BTreeMap::new();
        for (name, p) in points {
            let name = name.into();
            if map.contains_key(&name) {
                return Err(RelativeError::DuplicatePoint(name));
            }
            map.insert(name, p);
        }
        Ok(Self { points: map })
    }

    pub fn get(&self, name: &str) -> Option<&Vec3> {
        self.points.get(name)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Vec3)> {
        self.points.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Uniformly scaled copy.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|(k, v)| (k.clone(), v * factor))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMeasurement {
    pub frame_index: usize,
    pub point_name: String,
    pub pixel: [f64; 2],
}

impl ObjectMeasurement {
    pub fn new(frame_index: usize, point_name: impl Into<String>, pixel: [f64; 2]) -> Self {
        Self {
            frame_index,
            point_name: point_name.into(),
            pixel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSize {
    pub diagonal_px: f64,
    pub area_px2: f64,
}

impl ObjectSize {
    pub fn is_too_small(&self) -> bool {
        self.diagonal_px < MIN_DIAGONAL_PX || self.area_px2 < MIN_AREA_PX2
    }
}

/// Bounding-box diagonal and convex-hull area of the measured pixels.
pub fn measure_object_size(pixels: &[[f64; 2]]) -> Result<ObjectSize, RelativeError> {
    if pixels.len() < 3 {
        return Err(RelativeError::InsufficientPoints {
            needed: 3,
            got: pixels.len(),
        });
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pixels {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Ok(ObjectSize {
        diagonal_px: (hi[0] - lo[0]).hypot(hi[1] - lo[1]),
        area_px2: hull_area(pixels),
    })
}

/// `Ok(size)` when the object is large enough, `Err(TooSmall)` otherwise.
pub fn check_object_size(pixels: &[[f64; 2]]) -> Result<ObjectSize, RelativeError> {
    let size = measure_object_size(pixels)?;
    if size.is_too_small() {
        return Err(RelativeError::TooSmall {
            diagonal_px: size.diagonal_px,
            area_px2: size.area_px2,
        });
    }
    Ok(size)
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Monotone-chain convex hull, then the shoelace formula.
fn hull_area(points: &[[f64; 2]]) -> f64 {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return 0.0;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &q in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0
            {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    let n = hull.len();
    (0..n)
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

/// Camera resected in the object frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectResection {
    /// Camera pose expressed in the object frame.
    pub camera_in_object: Pose,
    /// Euclidean distance from the projection center to the object origin.
    pub distance_m: f64,
    /// Pixel of the object origin, reprojected through the resected pose.
    pub cog_pixel: [f64; 2],
    pub residual_px: f64,
    pub size: ObjectSize,
}

/// Resects the camera against the object model from one frame's
/// measurements.
pub fn resect_on_object(
    camera: &CameraIntrinsics,
    model: &ObjectModel,
    measurements: &[ObjectMeasurement],
    time: f64,
    options: &P3pOptions,
) -> Result<ObjectResection, RelativeError> {
    let mut seen = BTreeSet::new();
    let mut corr = Vec::with_capacity(measurements.len());
    for m in measurements {
        if !seen.insert(m.point_name.as_str()) {
            return Err(RelativeError::DuplicatePoint(m.point_name.clone()));
        }
        let p = model
            .get(&m.point_name)
            .ok_or_else(|| RelativeError::UnknownPoint(m.point_name.clone()))?;
        corr.push(Correspondence::new(
            GroundControlPoint::new(&m.point_name, *p),
            m.pixel,
        ));
    }
    let pixels: Vec<[f64; 2]> = measurements.iter().map(|m| m.pixel).collect();
    if pixels.len() < MIN_POINTS {
        return Err(RelativeError::InsufficientPoints {
            needed: MIN_POINTS,
            got: pixels.len(),
        });
    }
    let size = check_object_size(&pixels)?;
    let fit = resect_frame(camera, &corr, time, options)?;
    let cog_pixel = camera.project(&fit.pose.to_camera(&Vec3::zeros()))?;
    Ok(ObjectResection {
        distance_m: fit.pose.center.norm(),
        camera_in_object: fit.pose,
        cog_pixel,
        residual_px: fit.residual_px,
        size,
    })
}

/// A located object in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectFix {
    pub frame_index: usize,
    pub time_s: f64,
    pub distance_m: f64,
    /// Unit sighting ray, world frame.
    pub direction: Vec3,
    pub camera_center: Vec3,
    /// `camera_center + distance_m·direction`.
    pub object_position: Vec3,
    /// Object-to-world rotation, when known.
    pub attitude: Option<RotationMatrix>,
    pub residual_px: f64,
}

impl ObjectFix {
    /// A pose whose navigation angles are those of the object, treating the
    /// object model axes as body axes.
    pub fn as_pose(&self, convention: &NavConvention) -> Option<Pose> {
        let attitude = self.attitude?;
        let rotation = attitude * RotationMatrix::from_matrix_unchecked(convention.camera_to_body);
        Some(Pose {
            rotation,
            center: self.object_position,
            time: self.time_s,
        })
    }
}

/// Transports distance and sighting ray into the world frame.
pub fn fix_object_position(
    frame_index: usize,
    camera_world: &Pose,
    camera: &CameraIntrinsics,
    cog_pixel: [f64; 2],
    distance_m: f64,
) -> Result<ObjectFix, RelativeError> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(RelativeError::NonPositiveDistance(distance_m));
    }
    let ray = camera.unproject(cog_pixel)?;
    let direction = (camera_world.rotation * ray).normalize();
    Ok(ObjectFix {
        frame_index,
        time_s: camera_world.time,
        distance_m,
        direction,
        camera_center: camera_world.center,
        object_position: camera_world.center + direction * distance_m,
        attitude: None,
        residual_px: 0.0,
    })
}

/// Outcome of one measured frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub frame_index: usize,
    pub result: Result<ObjectFix, RelativeError>,
}

/// One full fix: resection on the object, then transport to the world.
pub fn fix_frame(
    camera_world: &Pose,
    camera: &CameraIntrinsics,
    model: &ObjectModel,
    frame_index: usize,
    measurements: &[ObjectMeasurement],
    options: &P3pOptions,
) -> Result<ObjectFix, RelativeError> {
    let res = resect_on_object(camera, model, measurements, camera_world.time, options)?;
    let mut fix = fix_object_position(
        frame_index,
        camera_world,
        camera,
        res.cog_pixel,
        res.distance_m,
    )?;
    // object -> world = (camera -> world)·(object -> camera)
    fix.attitude = Some(camera_world.rotation * res.camera_in_object.rotation.transpose());
    fix.residual_px = res.residual_px;
    Ok(fix)
}

/// Fixes every measured frame. Camera poses are looked up by the decimal
/// frame index; failures are reported per frame, in frame order.
pub fn track_object(
    camera_track: &OrientationBlock,
    camera: &CameraIntrinsics,
    model: &ObjectModel,
    measurements: &[ObjectMeasurement],
    options: &P3pOptions,
) -> Vec<FrameOutcome> {
    track_object_with(
        Execution::default(),
        camera_track,
        camera,
        model,
        measurements,
        options,
    )
}

pub fn track_object_with(
    exec: Execution,
    camera_track: &OrientationBlock,
    camera: &CameraIntrinsics,
    model: &ObjectModel,
    measurements: &[ObjectMeasurement],
    options: &P3pOptions,
) -> Vec<FrameOutcome> {
    let mut by_frame: BTreeMap<usize, Vec<ObjectMeasurement>> = BTreeMap::new();
    for m in measurements {
        by_frame.entry(m.frame_index).or_default().push(m.clone());
    }
    let frames: Vec<(usize, Vec<ObjectMeasurement>)> = by_frame.into_iter().collect();
    par::map(exec, &frames, |(index, meas)| {
        let result = match camera_track.get(&index.to_string()) {
            None => Err(RelativeError::MissingCameraPose(*index)),
            Some(pose) => fix_frame(pose, camera, model, *index, meas, options),
        };
        if let Err(e) = &result {
            log::debug!("frame {index}: {e}");
        }
        FrameOutcome {
            frame_index: *index,
            result,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::ProjectionModel;
    use crate::geometry::{rot_from_nav, NavAngles};
    use proptest::prelude::*;

    fn square(side: f64) -> Vec<[f64; 2]> {
        vec![
            [100.0, 100.0],
            [100.0 + side, 100.0],
            [100.0 + side, 100.0 + side],
            [100.0, 100.0 + side],
        ]
    }

    #[test]
    fn size_thresholds() {
        let ok = check_object_size(&square(30.0)).unwrap();
        assert!((ok.diagonal_px - 42.426).abs() < 1e-3);
        assert!((ok.area_px2 - 900.0).abs() < 1e-9);
        assert!(matches!(
            check_object_size(&square(10.0)),
            Err(RelativeError::TooSmall { .. })
        ));
        let line = [[0.0, 0.0], [12.5, 0.0], [25.0, 0.0]];
        match check_object_size(&line) {
            Err(RelativeError::TooSmall {
                diagonal_px,
                area_px2,
            }) => {
                assert_eq!(diagonal_px, 25.0);
                assert_eq!(area_px2, 0.0);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            check_object_size(&square(30.0)[..2]),
            Err(RelativeError::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn hull_ignores_interior_points() {
        let mut pts = square(20.0);
        pts.push([110.0, 110.0]);
        pts.push([105.0, 112.0]);
        assert!((hull_area(&pts) - 400.0).abs() < 1e-9);
    }

    #[test]
    fn axial_ray_moves_along_view_direction() {
        let cam =
            CameraIntrinsics::centered(ProjectionModel::Rectilinear, 4.0, [6.0, 4.0], [600, 400])
                .unwrap();
        // Camera z toward world +x.
        let r = NavConvention::default().camera_rotation(
            &rot_from_nav(NavAngles::new(0.0, 0.0, 90f64.to_radians())),
            &RotationMatrix::identity(),
        );
        let pose = Pose::new(r, Vec3::new(1.0, 2.0, 3.0), 0.0).unwrap();
        let fix = fix_object_position(0, &pose, &cam, cam.principal_point_px, 100.0).unwrap();
        assert!((fix.object_position - Vec3::new(101.0, 2.0, 3.0)).norm() < 1e-12);
        assert!(matches!(
            fix_object_position(0, &pose, &cam, cam.principal_point_px, 0.0),
            Err(RelativeError::NonPositiveDistance(_))
        ));
    }

    proptest! {
        #[test]
        fn scaling_up_never_makes_an_object_too_small(
            pts in prop::collection::vec((0f64..200.0, 0f64..200.0), 3..10),
            s in 1f64..5.0,
        ) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(u, v)| [u, v]).collect();
            let n = pts.len() as f64;
            let c = [pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n];
            let scaled: Vec<[f64; 2]> = pts.iter().map(|p| [c[0] + s * (p[0] - c[0]), c[1] + s * (p[1] - c[1])]).collect();
            let before = measure_object_size(&pts).unwrap();
            let after = measure_object_size(&scaled).unwrap();
            prop_assert!(before.is_too_small() || !after.is_too_small());
        }

        #[test]
        fn fix_is_internally_consistent(
            u in 0f64..600.0, v in 0f64..400.0, d in 0.1f64..1e4,
            yaw in -3f64..3.0, pitch in -1.4f64..1.4,
        ) {
            let cam = CameraIntrinsics::centered(ProjectionModel::Rectilinear, 4.0, [6.0, 4.0], [600, 400]).unwrap();
            let r = NavConvention::default().camera_rotation(&rot_from_nav(NavAngles::new(pitch, 0.0, yaw)), &RotationMatrix::identity());
            let pose = Pose::new(r, Vec3::new(5.0, -7.0, 40.0), 2.0).unwrap();
            let fix = fix_object_position(3, &pose, &cam, [u, v], d).unwrap();
            prop_assert!((fix.direction.norm() - 1.0).abs() <= 1e-12);
            prop_assert_eq!(fix.object_position, fix.camera_center + fix.direction * fix.distance_m);
        }
    }
}
