//! Synthetic scenes shared by the integration tests.
#![allow(dead_code)]

use image::{imageops, RgbImage};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use trajecto::camera::{CameraIntrinsics, ProjectionModel};
use trajecto::frames::FrameRecord;
use trajecto::geometry::{rot_from_photo, PhotoAngles, Pose, Vec3};
use trajecto::relative::{ObjectMeasurement, ObjectModel};
use trajecto::resection::{Correspondence, GroundControlPoint};

/// Rectilinear action-camera-like sensor.
pub fn camera() -> CameraIntrinsics {
    CameraIntrinsics::centered(
        ProjectionModel::Rectilinear,
        4.3,
        [6.17, 4.55],
        [4000, 3000],
    )
    .unwrap()
}

/// Six surveyed targets spread over the flown area, not coplanar. The
/// first three by name span a triangle whose circumcircle stays well clear
/// of the flight line, away from the unstable three-point configurations.
pub fn gcps() -> Vec<GroundControlPoint> {
    [
        ("G1", [-42.0, -30.0, 0.0]),
        ("G2", [44.0, -27.0, 2.5]),
        ("G3", [2.0, 38.0, 6.0]),
        ("G4", [-25.0, 20.0, 1.0]),
        ("G5", [25.0, 22.0, 8.0]),
        ("G6", [0.0, -5.0, 3.5]),
    ]
    .iter()
    .map(|(n, p)| GroundControlPoint::new(*n, Vec3::from(*p)))
    .collect()
}

/// Nadir-looking camera on a straight, slightly climbing pass at ~100 m
/// above ground, with a small attitude wobble.
pub fn flight(frames: usize) -> Vec<Pose> {
    (0..frames)
        .map(|i| {
            let t = i as f64 * 0.5;
            let s = i as f64;
            let rot = rot_from_photo(PhotoAngles::new(
                std::f64::consts::PI + 0.03 * (0.7 * s).sin(),
                0.02 * (0.5 * s).cos(),
                0.1 + 0.01 * s,
            ));
            Pose::new(
                rot,
                Vec3::new(-12.0 + 1.2 * s, -3.0 + 0.3 * s, 100.0 + 0.2 * s),
                t,
            )
            .unwrap()
        })
        .collect()
}

pub fn observe(
    cam: &CameraIntrinsics,
    pose: &Pose,
    gcps: &[GroundControlPoint],
) -> Vec<Correspondence> {
    gcps.iter()
        .map(|g| {
            Correspondence::new(
                g.clone(),
                cam.project(&pose.to_camera(&g.position)).unwrap(),
            )
        })
        .collect()
}

/// Standard-normal sample (Box–Muller keeps the dependency set small).
pub fn gauss(rng: &mut StdRng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Seven points on a light helicopter, body axes (x forward, y right,
/// z down), origin at the center of gravity.
pub fn helicopter() -> ObjectModel {
    ObjectModel::new([
        ("rotor_hub", Vec3::new(0.0, 0.0, -1.6)),
        ("blade_left", Vec3::new(0.3, -4.8, -1.7)),
        ("blade_right", Vec3::new(-0.3, 4.8, -1.7)),
        ("nose", Vec3::new(3.1, 0.0, 0.4)),
        ("tail_rotor", Vec3::new(-6.9, 0.2, -0.9)),
        ("skid_left", Vec3::new(0.4, -1.1, 1.3)),
        ("skid_right", Vec3::new(-0.5, 1.1, 1.3)),
    ])
    .unwrap()
}

/// Object attitude (model axes to world) and position, observed from a
/// camera pose, rendered as object measurements.
pub fn render_object(
    cam: &CameraIntrinsics,
    camera_pose: &Pose,
    model: &ObjectModel,
    object_to_world: &trajecto::geometry::RotationMatrix,
    object_position: &Vec3,
    frame_index: usize,
) -> Vec<ObjectMeasurement> {
    model
        .iter()
        .map(|(name, p)| {
            let world = *object_to_world * *p + object_position;
            let px = cam.project(&camera_pose.to_camera(&world)).unwrap();
            ObjectMeasurement::new(frame_index, name, px)
        })
        .collect()
}

/// White-noise texture large enough to pan over.
pub fn texture(w: u32, h: u32, seed: u64) -> RgbImage {
    let mut rng = StdRng::seed_from_u64(seed);
    RgbImage::from_fn(w, h, |_, _| {
        let g: u8 = rng.random();
        image::Rgb([g, g.wrapping_add(rng.random_range(0..8)), g])
    })
}

/// `n` frames of `size`² cropped from a texture panning `speed_px` pixels
/// per frame to the right; frames whose index is a multiple of
/// `blur_every` (if any) are Gaussian-blurred.
pub fn panning_sequence(
    n: usize,
    size: u32,
    speed_px: u32,
    fps: f64,
    blur_every: Option<usize>,
    seed: u64,
) -> Vec<FrameRecord> {
    let tex = texture(size + speed_px * n as u32, size, seed);
    (0..n)
        .map(|i| {
            let crop = imageops::crop_imm(&tex, speed_px * i as u32, 0, size, size).to_image();
            let pixels = match blur_every {
                Some(k) if i % k == 0 => imageops::blur(&crop, 1.5),
                _ => crop,
            };
            FrameRecord::new(i, i as f64 / fps, pixels)
        })
        .collect()
}
