//! Linear 11-parameter resection with self-calibration.
//!
//! The 3×4 projection matrix `P` (11 degrees of freedom up to scale) is the
//! smallest right singular vector of the stacked direct-linear equations,
//! solved on Hartley-normalized coordinates. `P = K·[R | −R·C]` is then split
//! by an RQ factorization with a positive-diagonal `K`.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, Vector3, Vector4};

use super::{check_inputs, Correspondence, ResectionError};
use crate::camera::{CameraIntrinsics, ProjectionModel, RadialDistortion};
use crate::geometry::{Pose, RotationMatrix, Vec3};

/// Relative size of the second-smallest singular value below which the
/// solution is not unique.
const RANK_TOLERANCE: f64 = 1e-10;
/// Relative thickness of the point cloud below which it counts as planar.
const PLANARITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DltSolution {
    /// Unit Frobenius norm, sign chosen so that observed points have
    /// positive depth.
    pub projection: Matrix3x4<f64>,
    /// (fx, fy), pixels.
    pub focal_px: [f64; 2],
    pub skew: f64,
    pub principal_point_px: [f64; 2],
    pub pose: Pose,
    /// RMS reprojection residual, pixels.
    pub rms_px: f64,
    /// RMS residual divided by the geometric-mean focal, i.e. in normalized
    /// image units.
    pub rms_normalized: f64,
}

impl DltSolution {
    /// Rectilinear intrinsics for a known sensor and image size. The focal
    /// is the mean of the two axis estimates; distortion is zero.
    pub fn to_intrinsics(&self, sensor_mm: [f64; 2], image_px: [u32; 2]) -> CameraIntrinsics {
        let fx_mm = self.focal_px[0] * sensor_mm[0] / image_px[0] as f64;
        let fy_mm = self.focal_px[1] * sensor_mm[1] / image_px[1] as f64;
        CameraIntrinsics {
            model: ProjectionModel::Rectilinear,
            focal_mm: 0.5 * (fx_mm + fy_mm),
            sensor_width_mm: sensor_mm[0],
            sensor_height_mm: sensor_mm[1],
            image_width_px: image_px[0],
            image_height_px: image_px[1],
            principal_point_px: self.principal_point_px,
            distortion: RadialDistortion::default(),
        }
    }

    pub fn project(&self, world: &Vec3) -> [f64; 2] {
        project_with(&self.projection, world)
    }
}

fn project_with(p: &Matrix3x4<f64>, world: &Vec3) -> [f64; 2] {
    let x = p * Vector4::new(world.x, world.y, world.z, 1.0);
    [x.x / x.z, x.y / x.z]
}

/// Similarity normalizing `points` to zero mean and RMS distance `target`.
fn normalizer<const D: usize>(points: &[[f64; D]], target: f64) -> ([f64; D], f64) {
    let n = points.len() as f64;
    let mut mean = [0.0; D];
    for p in points {
        for k in 0..D {
            mean[k] += p[k] / n;
        }
    }
    let ms = points
        .iter()
        .map(|p| (0..D).map(|k| (p[k] - mean[k]).powi(2)).sum::<f64>())
        .sum::<f64>()
        / n;
    (mean, target / ms.sqrt())
}

fn is_planar(points: &[Vec3]) -> bool {
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let ev = cov.symmetric_eigenvalues();
    let (lo, hi) = (ev.min().max(0.0), ev.max());
    hi == 0.0 || lo.sqrt() <= PLANARITY_TOLERANCE * hi.sqrt()
}

/// Linear self-calibrating resection from six or more correspondences.
///
/// The linear solution is returned as is; no iterative refinement follows.
pub fn resect_dlt11(points: &[Correspondence], time: f64) -> Result<DltSolution, ResectionError> {
    if points.len() < 6 {
        return Err(ResectionError::TooFewPoints {
            needed: 6,
            got: points.len(),
        });
    }
    check_inputs(points)?;
    let world: Vec<Vec3> = points.iter().map(|c| c.gcp.position).collect();
    if is_planar(&world) {
        return Err(ResectionError::Degenerate("control points are coplanar"));
    }

    let w_arr: Vec<[f64; 3]> = world.iter().map(|p| [p.x, p.y, p.z]).collect();
    let px_arr: Vec<[f64; 2]> = points.iter().map(|c| c.pixel).collect();
    let (wm, ws) = normalizer(&w_arr, 3f64.sqrt());
    let (pm, ps) = normalizer(&px_arr, 2f64.sqrt());

    let n = points.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 12);
    for (i, (w, p)) in w_arr.iter().zip(&px_arr).enumerate() {
        let x = [
            (w[0] - wm[0]) * ws,
            (w[1] - wm[1]) * ws,
            (w[2] - wm[2]) * ws,
            1.0,
        ];
        let u = (p[0] - pm[0]) * ps;
        let v = (p[1] - pm[1]) * ps;
        for k in 0..4 {
            a[(2 * i, k)] = x[k];
            a[(2 * i, 8 + k)] = -u * x[k];
            a[(2 * i + 1, 4 + k)] = x[k];
            a[(2 * i + 1, 8 + k)] = -v * x[k];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or(ResectionError::Degenerate("SVD did not converge"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let sigma = |k: usize| svd.singular_values[order[k]];
    let largest = sigma(order.len() - 1);
    if order.len() < 12 || sigma(1) <= RANK_TOLERANCE * largest {
        return Err(ResectionError::Degenerate(
            "design matrix is rank deficient",
        ));
    }
    let h = v_t.row(order[0]);
    let p_norm = Matrix3x4::from_fn(|r, c| h[4 * r + c]);

    // Undo the normalizations: P = Tp⁻¹ · P̃ · Tw.
    #[rustfmt::skip]
    let tw = Matrix4::new(
        ws, 0.0, 0.0, -ws * wm[0],
        0.0, ws, 0.0, -ws * wm[1],
        0.0, 0.0, ws, -ws * wm[2],
        0.0, 0.0, 0.0, 1.0,
    );
    #[rustfmt::skip]
    let tp_inv = Matrix3::new(
        1.0 / ps, 0.0, pm[0],
        0.0, 1.0 / ps, pm[1],
        0.0, 0.0, 1.0,
    );
    let mut p = tp_inv * p_norm * tw;
    p /= p.norm();
    let depth_sum: f64 = world
        .iter()
        .map(|w| (p.row(2) * Vector4::new(w.x, w.y, w.z, 1.0))[0])
        .sum();
    if depth_sum < 0.0 {
        p = -p;
    }

    let m: Matrix3<f64> = p.fixed_view::<3, 3>(0, 0).into_owned();
    if !(m.determinant() > 0.0) {
        return Err(ResectionError::Degenerate("decomposed focal is negative"));
    }
    let (k, r_cw) = rq(&m);
    let p4: Vector3<f64> = p.column(3).into_owned();
    let m_inv = m
        .try_inverse()
        .ok_or(ResectionError::Degenerate("singular projection"))?;
    let center = -(m_inv * p4);
    let pose = Pose::new(RotationMatrix::nearest(&r_cw.transpose()), center, time)?;

    let sq: f64 = points
        .iter()
        .map(|c| {
            let [u, v] = project_with(&p, &c.gcp.position);
            (u - c.pixel[0]).powi(2) + (v - c.pixel[1]).powi(2)
        })
        .sum();
    let rms_px = (sq / n as f64).sqrt();
    let focal_px = [k[(0, 0)], k[(1, 1)]];
    Ok(DltSolution {
        projection: p,
        focal_px,
        skew: k[(0, 1)],
        principal_point_px: [k[(0, 2)], k[(1, 2)]],
        pose,
        rms_px,
        rms_normalized: rms_px / (focal_px[0] * focal_px[1]).sqrt(),
    })
}

/// `M = K·R` with `K` upper triangular, positive diagonal, `K[2][2] = 1`.
/// Requires `det M > 0` for `R` to be proper.
fn rq(m: &Matrix3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    let (m1, m2, m3) = (
        m.row(0).transpose(),
        m.row(1).transpose(),
        m.row(2).transpose(),
    );
    let k33 = m3.norm();
    let r3 = m3 / k33;
    let k23 = m2.dot(&r3);
    let t2 = m2 - r3 * k23;
    let k22 = t2.norm();
    let r2 = t2 / k22;
    let k13 = m1.dot(&r3);
    let k12 = m1.dot(&r2);
    let t1 = m1 - r2 * k12 - r3 * k13;
    let k11 = t1.norm();
    let r1 = t1 / k11;
    let k = Matrix3::new(k11, k12, k13, 0.0, k22, k23, 0.0, 0.0, k33) / k33;
    let r = Matrix3::from_rows(&[r1.transpose(), r2.transpose(), r3.transpose()]);
    (k, r)
}
