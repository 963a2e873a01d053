//! Timestamped trajectories: kinematics, comparison with a reference track,
//! and CSV/KML export.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::Deserialize;
use thiserror::Error;

use crate::geometry::{nav_from_pose_with, NavAngles, NavConvention, Pose, RotationMatrix, Vec3};

/// Mean Earth radius, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

pub const CSV_HEADER: [&str; 12] = [
    "time_s",
    "x",
    "y",
    "z",
    "lat",
    "lon",
    "alt",
    "pitch_deg",
    "roll_deg",
    "yaw_deg",
    "speed_mps",
    "climb_mps",
];

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("a trajectory needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("times must be strictly increasing ({previous} then {next})")]
    NonIncreasingTime { previous: f64, next: f64 },
    #[error("trajectory and reference track do not overlap in time")]
    NoOverlap,
    #[error("invalid earth radius {0}")]
    InvalidRadius(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Geodetic anchor of the local ENU frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoOrigin {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

impl GeoOrigin {
    pub fn new(lat_deg: f64, lon_deg: f64, alt_m: f64) -> Self {
        Self {
            lat_deg,
            lon_deg,
            alt_m,
        }
    }
}

/// ENU ↔ geodetic conversion on a sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTangentPlane {
    pub origin: GeoOrigin,
    pub radius_m: f64,
}

impl LocalTangentPlane {
    pub fn new(origin: GeoOrigin) -> Self {
        Self {
            origin,
            radius_m: EARTH_RADIUS_M,
        }
    }

    pub fn with_radius(origin: GeoOrigin, radius_m: f64) -> Result<Self, TrajectoryError> {
        if !(radius_m > 0.0 && radius_m.is_finite()) {
            return Err(TrajectoryError::InvalidRadius(radius_m));
        }
        Ok(Self { origin, radius_m })
    }

    /// Columns are the east, north and up unit vectors in Earth-centered
    /// coordinates.
    fn basis(&self) -> nalgebra::Matrix3<f64> {
        let (sp, cp) = self.origin.lat_deg.to_radians().sin_cos();
        let (sl, cl) = self.origin.lon_deg.to_radians().sin_cos();
        nalgebra::Matrix3::new(-sl, -sp * cl, cp * cl, cl, -sp * sl, cp * sl, 0.0, cp, sp)
    }

    fn ecef(&self, lat_deg: f64, lon_deg: f64, alt_m: f64) -> Vec3 {
        let (sp, cp) = lat_deg.to_radians().sin_cos();
        let (sl, cl) = lon_deg.to_radians().sin_cos();
        Vec3::new(cp * cl, cp * sl, sp) * (self.radius_m + alt_m)
    }

    /// `[lat_deg, lon_deg, alt_m]` of a local point.
    pub fn to_geodetic(&self, enu: &Vec3) -> [f64; 3] {
        let o = self.origin;
        let p = self.ecef(o.lat_deg, o.lon_deg, o.alt_m) + self.basis() * enu;
        if *enu == Vec3::zeros() {
            return [o.lat_deg, o.lon_deg, o.alt_m];
        }
        [
            p.z.atan2(p.x.hypot(p.y)).to_degrees(),
            p.y.atan2(p.x).to_degrees(),
            p.norm() - self.radius_m,
        ]
    }

    pub fn to_local(&self, lat_deg: f64, lon_deg: f64, alt_m: f64) -> Vec3 {
        let o = self.origin;
        let d = self.ecef(lat_deg, lon_deg, alt_m) - self.ecef(o.lat_deg, o.lon_deg, o.alt_m);
        self.basis().tr_mul(&d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub time_s: f64,
    /// Local ENU, meters.
    pub position: Vec3,
    pub nav: NavAngles,
    pub gimbal_lock: bool,
    /// Mean speed over the segment ending here (the first point repeats the
    /// first segment).
    pub speed_mps: f64,
    pub climb_mps: f64,
}

/// A non-empty, strictly time-ordered trajectory anchored on the Earth.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory4D {
    points: Vec<TrajectoryPoint>,
    pub frame: LocalTangentPlane,
}

impl Trajectory4D {
    pub fn new(
        points: Vec<TrajectoryPoint>,
        frame: LocalTangentPlane,
    ) -> Result<Self, TrajectoryError> {
        if points.is_empty() {
            return Err(TrajectoryError::TooFewPoints { needed: 1, got: 0 });
        }
        check_times(points.iter().map(|p| p.time_s))?;
        Ok(Self { points, frame })
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_times(times: impl Iterator<Item = f64>) -> Result<(), TrajectoryError> {
    let mut prev: Option<f64> = None;
    for t in times {
        if let Some(p) = prev {
            if !(t > p) {
                return Err(TrajectoryError::NonIncreasingTime {
                    previous: p,
                    next: t,
                });
            }
        }
        prev = Some(t);
    }
    Ok(())
}

/// Navigation angles and segment-mean speeds from time-ordered poses.
pub fn derive_kinematics(
    poses: &[Pose],
    boresight: &RotationMatrix,
    frame: LocalTangentPlane,
) -> Result<Trajectory4D, TrajectoryError> {
    derive_kinematics_with(poses, boresight, &NavConvention::default(), frame)
}

pub fn derive_kinematics_with(
    poses: &[Pose],
    boresight: &RotationMatrix,
    convention: &NavConvention,
    frame: LocalTangentPlane,
) -> Result<Trajectory4D, TrajectoryError> {
    if poses.len() < 2 {
        return Err(TrajectoryError::TooFewPoints {
            needed: 2,
            got: poses.len(),
        });
    }
    check_times(poses.iter().map(|p| p.time))?;
    let segment = |i: usize| {
        let (a, b) = (&poses[i - 1], &poses[i]);
        let dt = b.time - a.time;
        let d = b.center - a.center;
        let length = (d.x * d.x + d.y * d.y + d.z * d.z).sqrt();
        (length / dt, d.z / dt)
    };
    let points = poses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (speed_mps, climb_mps) = segment(i.max(1));
            let nav = nav_from_pose_with(p, boresight, convention);
            TrajectoryPoint {
                time_s: p.time,
                position: p.center,
                nav: nav.angles,
                gimbal_lock: nav.gimbal_lock,
                speed_mps,
                climb_mps,
            }
        })
        .collect();
    Trajectory4D::new(points, frame)
}

/// Strictly time-ordered reference positions in the local frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrack {
    samples: Vec<(f64, Vec3)>,
}

impl ReferenceTrack {
    pub fn new(samples: Vec<(f64, Vec3)>) -> Result<Self, TrajectoryError> {
        if samples.is_empty() {
            return Err(TrajectoryError::TooFewPoints { needed: 1, got: 0 });
        }
        check_times(samples.iter().map(|s| s.0))?;
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, Vec3)] {
        &self.samples
    }

    /// Linear interpolation; `None` outside the sampled time range.
    pub fn at(&self, t: f64) -> Option<Vec3> {
        let s = &self.samples;
        let i = s.partition_point(|(ts, _)| *ts < t);
        if i < s.len() && s[i].0 == t {
            return Some(s[i].1);
        }
        if i == 0 || i == s.len() {
            return None;
        }
        let ((t0, p0), (t1, p1)) = (s[i - 1], s[i]);
        let w = (t - t0) / (t1 - t0);
        Some(p0 + (p1 - p0) * w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonStats {
    /// Trajectory points inside the reference time range.
    pub samples: usize,
    pub planimetric_mean_m: f64,
    pub planimetric_max_m: f64,
    /// Mean of trajectory z minus reference z.
    pub altimetric_bias_m: f64,
    /// Population standard deviation of the altimetric differences.
    pub altimetric_std_m: f64,
    pub altimetric_max_abs_m: f64,
}

/// Acceptance bands of a comparison report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonBands {
    pub planimetric_m: f64,
    pub altimetric_m: f64,
}

impl Default for ComparisonBands {
    fn default() -> Self {
        Self {
            planimetric_m: 5.0,
            altimetric_m: 10.0,
        }
    }
}

impl ComparisonStats {
    pub fn planimetric_within(&self, bands: &ComparisonBands) -> bool {
        self.planimetric_max_m <= bands.planimetric_m
    }

    pub fn altimetric_within(&self, bands: &ComparisonBands) -> bool {
        self.altimetric_max_abs_m <= bands.altimetric_m
    }
}

pub fn compare_to_reference(
    traj: &Trajectory4D,
    reference: &ReferenceTrack,
) -> Result<ComparisonStats, TrajectoryError> {
    let mut plan = Vec::new();
    let mut alt = Vec::new();
    for p in traj.points() {
        if let Some(r) = reference.at(p.time_s) {
            let d = p.position - r;
            plan.push(d.x.hypot(d.y));
            alt.push(d.z);
        }
    }
    if plan.is_empty() {
        return Err(TrajectoryError::NoOverlap);
    }
    let n = plan.len() as f64;
    let bias = alt.iter().sum::<f64>() / n;
    Ok(ComparisonStats {
        samples: plan.len(),
        planimetric_mean_m: plan.iter().sum::<f64>() / n,
        planimetric_max_m: plan.iter().cloned().fold(0.0, f64::max),
        altimetric_bias_m: bias,
        altimetric_std_m: (alt.iter().map(|a| (a - bias).powi(2)).sum::<f64>() / n).sqrt(),
        altimetric_max_abs_m: alt.iter().fold(0.0f64, |m, a| m.max(a.abs())),
    })
}

/// Shortest representation that parses back to the same value.
fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x}")
}

fn angle(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

/// One CSV row, as written.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct CsvRow {
    pub time_s: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub yaw_deg: f64,
    pub speed_mps: f64,
    pub climb_mps: f64,
}

/// Writes the trajectory as CSV. Angles carry six decimals; every other
/// column is written with the shortest round-trip representation.
pub fn export_csv<W: Write>(traj: &Trajectory4D, out: W) -> Result<(), TrajectoryError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for p in traj.points() {
        let [lat, lon, alt] = traj.frame.to_geodetic(&p.position);
        let [pitch, roll, yaw] = p.nav.to_degrees();
        w.write_record([
            num(p.time_s),
            num(p.position.x),
            num(p.position.y),
            num(p.position.z),
            num(lat),
            num(lon),
            num(alt),
            angle(pitch),
            angle(roll),
            angle(yaw),
            num(p.speed_mps),
            num(p.climb_mps),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<CsvRow>, TrajectoryError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(TrajectoryError::Csv(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        ))));
    }
    Ok(r.deserialize().collect::<Result<Vec<CsvRow>, _>>()?)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// KML document with one placemark holding the trajectory as a line string,
/// altitudes absolute.
pub fn export_kml<W: Write>(
    traj: &Trajectory4D,
    name: &str,
    mut out: W,
) -> Result<(), TrajectoryError> {
    let mut s = String::new();
    let name = xml_escape(name);
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<kml xmlns=\"http://www.opengis.net/kml/2.2\">\n");
    s.push_str("  <Document>\n");
    let _ = writeln!(s, "    <name>{name}</name>");
    s.push_str("    <Placemark>\n");
    let _ = writeln!(s, "      <name>{name}</name>");
    s.push_str("      <LineString>\n");
    s.push_str("        <altitudeMode>absolute</altitudeMode>\n");
    s.push_str("        <coordinates>\n");
    for p in traj.points() {
        let [lat, lon, alt] = traj.frame.to_geodetic(&p.position);
        let _ = writeln!(s, "          {},{},{}", num(lon), num(lat), num(alt));
    }
    s.push_str("        </coordinates>\n");
    s.push_str("      </LineString>\n");
    s.push_str("    </Placemark>\n");
    s.push_str("  </Document>\n");
    s.push_str("</kml>\n");
    out.write_all(s.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame() -> LocalTangentPlane {
        LocalTangentPlane::new(GeoOrigin::new(48.6, 2.35, 90.0))
    }

    fn pose(t: f64, c: [f64; 3]) -> Pose {
        let level = NavConvention::default().level_camera_rotation();
        Pose::new(level, Vec3::from(c), t).unwrap()
    }

    #[test]
    fn horizontal_and_vertical_segments() {
        let t = derive_kinematics(
            &[pose(0.0, [0.0; 3]), pose(2.0, [6.0, 8.0, 0.0])],
            &RotationMatrix::identity(),
            frame(),
        )
        .unwrap();
        assert_eq!(t.points()[1].speed_mps, 5.0);
        assert_eq!(t.points()[1].climb_mps, 0.0);
        assert_eq!(t.points()[0].speed_mps, 5.0);
        let t = derive_kinematics(
            &[pose(0.0, [0.0; 3]), pose(1.0, [0.0, 0.0, 3.0])],
            &RotationMatrix::identity(),
            frame(),
        )
        .unwrap();
        assert_eq!(
            (t.points()[1].speed_mps, t.points()[1].climb_mps),
            (3.0, 3.0)
        );
    }

    #[test]
    fn duplicate_times_are_refused() {
        let r = derive_kinematics(
            &[pose(1.0, [0.0; 3]), pose(1.0, [1.0, 0.0, 0.0])],
            &RotationMatrix::identity(),
            frame(),
        );
        assert!(matches!(r, Err(TrajectoryError::NonIncreasingTime { .. })));
        assert!(matches!(
            derive_kinematics(&[pose(1.0, [0.0; 3])], &RotationMatrix::identity(), frame()),
            Err(TrajectoryError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn level_north_camera_has_zero_angles() {
        let t = derive_kinematics(
            &[pose(0.0, [0.0; 3]), pose(1.0, [0.0, 10.0, 0.0])],
            &RotationMatrix::identity(),
            frame(),
        )
        .unwrap();
        let a = t.points()[0].nav;
        assert!(a.pitch.abs() < 1e-15 && a.roll.abs() < 1e-15 && a.yaw.abs() < 1e-15);
    }

    #[test]
    fn origin_maps_to_anchor() {
        let f = frame();
        assert_eq!(f.to_geodetic(&Vec3::zeros()), [48.6, 2.35, 90.0]);
        let p = f.to_geodetic(&Vec3::new(0.0, 1000.0, 0.0));
        let expected_dlat = (1000.0 / (EARTH_RADIUS_M + 90.0)).to_degrees();
        assert!((p[0] - 48.6 - expected_dlat).abs() < 1e-9);
        assert!(p[2] > 90.0);
    }

    #[test]
    fn reference_comparison() {
        let reference = ReferenceTrack::new(
            (0..10)
                .map(|i| (i as f64, Vec3::new(i as f64 * 3.0, 1.0, 50.0)))
                .collect(),
        )
        .unwrap();
        let poses: Vec<Pose> = (0..19)
            .map(|i| pose(i as f64 * 0.5, [i as f64 * 1.5, 1.0, 54.2]))
            .collect();
        let traj = derive_kinematics(&poses, &RotationMatrix::identity(), frame()).unwrap();
        let s = compare_to_reference(&traj, &reference).unwrap();
        assert_eq!(s.samples, 19);
        assert!(s.planimetric_max_m < 1e-12);
        assert!((s.altimetric_bias_m - 4.2).abs() < 1e-12);
        assert!(s.altimetric_std_m < 1e-12);

        let late =
            ReferenceTrack::new(vec![(100.0, Vec3::zeros()), (101.0, Vec3::zeros())]).unwrap();
        assert!(matches!(
            compare_to_reference(&traj, &late),
            Err(TrajectoryError::NoOverlap)
        ));
    }

    #[test]
    fn single_point_csv_row() {
        let p = TrajectoryPoint {
            time_s: 0.0,
            position: Vec3::zeros(),
            nav: NavAngles::default(),
            gimbal_lock: false,
            speed_mps: 0.0,
            climb_mps: 0.0,
        };
        let t = Trajectory4D::new(vec![p], frame()).unwrap();
        let mut buf = Vec::new();
        export_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "time_s,x,y,z,lat,lon,alt,pitch_deg,roll_deg,yaw_deg,speed_mps,climb_mps\n\
             0,0,0,0,48.6,2.35,90,0.000000,0.000000,0.000000,0,0\n"
        );
        assert!(Trajectory4D::new(Vec::new(), frame()).is_err());
    }

    #[test]
    fn number_formatting_never_uses_exponents() {
        for x in [1e-9, 123456789.123, -4.5e-12, 1e21] {
            let s = num(x);
            assert!(!s.contains('e'), "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    proptest! {
        #[test]
        fn geodetic_round_trip(x in -1e4f64..1e4, y in -1e4f64..1e4, z in -500f64..3000.0,
                               lat in -80f64..80.0, lon in -180f64..180.0) {
            let f = LocalTangentPlane::new(GeoOrigin::new(lat, lon, 120.0));
            let p = Vec3::new(x, y, z);
            let g = f.to_geodetic(&p);
            prop_assert!((f.to_local(g[0], g[1], g[2]) - p).norm() < 1e-6);
        }

        #[test]
        fn speed_bounds_climb(steps in prop::collection::vec((0.01f64..10.0, -1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3), 1..30)) {
            let mut t = 0.0;
            let mut c = Vec3::zeros();
            let mut poses = vec![pose(0.0, [0.0; 3])];
            for (dt, dx, dy, dz) in steps {
                t += dt;
                c += Vec3::new(dx, dy, dz);
                poses.push(pose(t, [c.x, c.y, c.z]));
            }
            let traj = derive_kinematics(&poses, &RotationMatrix::identity(), frame()).unwrap();
            for p in traj.points() {
                prop_assert!(p.speed_mps >= p.climb_mps.abs());
            }
        }

        #[test]
        fn self_comparison_is_zero(zs in prop::collection::vec(-100f64..100.0, 2..20)) {
            let poses: Vec<Pose> = zs.iter().enumerate().map(|(i, z)| pose(i as f64, [i as f64, -z, *z])).collect();
            let traj = derive_kinematics(&poses, &RotationMatrix::identity(), frame()).unwrap();
            let reference = ReferenceTrack::new(poses.iter().map(|p| (p.time, p.center)).collect()).unwrap();
            let s = compare_to_reference(&traj, &reference).unwrap();
            prop_assert_eq!((s.planimetric_mean_m, s.planimetric_max_m, s.altimetric_bias_m, s.altimetric_std_m), (0.0, 0.0, 0.0, 0.0));
        }
    }
}
