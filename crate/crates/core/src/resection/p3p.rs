//! Three-point resection.
//!
//! With unit bearings `f1, f2, f3` toward world points `P1, P2, P3`, the
//! camera-to-point distances satisfy the law of cosines on each side of the
//! triangle. Writing `s2 = u·s1` and `s3 = v·s1` and eliminating `u` leaves a
//! quartic in `v`; each real root gives distances, the camera-frame points
//! `s_i·f_i`, and the pose follows by absolute orientation.

use nalgebra::Matrix3;

use crate::geometry::{RotationMatrix, Vec3};
use crate::poly;

/// A camera pose candidate: camera-to-world rotation and center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P3pSolution {
    pub rotation: RotationMatrix,
    pub center: Vec3,
}

/// All geometrically valid solutions (positive distances), at most four.
pub fn solve(world: [Vec3; 3], bearings: [Vec3; 3]) -> Vec<P3pSolution> {
    let [p1, p2, p3] = world;
    let [f1, f2, f3] = bearings;
    let a2 = (p2 - p3).norm_squared();
    let b2 = (p1 - p3).norm_squared();
    let c2 = (p1 - p2).norm_squared();
    let cos_a = f2.dot(&f3);
    let cos_b = f1.dot(&f3);
    let cos_g = f1.dot(&f2);

    // Law of cosines, divided by s1²:
    //   b² = s1²(1 + v² − 2v·cosβ)
    //   c² = s1²(1 + u² − 2u·cosγ)
    //   a² = s1²(u² + v² − 2uv·cosα)
    // Eliminating s1 gives two conics in (u, v):
    //   u² − 2cosγ·u + K(v) = 0,   K = 1 − (c²/b²)·q(v)
    //   u² − 2cosα·v·u + L(v) = 0, L = v² − (a²/b²)·q(v)
    // with q(v) = 1 + v² − 2v·cosβ.
    let q = [1.0, -2.0 * cos_b, 1.0];
    let k = poly::add(&[1.0], &poly::scale(&q, -c2 / b2));
    let l = poly::add(&[0.0, 0.0, 1.0], &poly::scale(&q, -a2 / b2));
    // Subtracting the conics: u = (K − L) / (2(cosγ − cosα·v)) = N / D.
    let n = poly::add(&k, &poly::scale(&l, -1.0));
    let d = [2.0 * cos_g, -2.0 * cos_a];
    // Substituting into the first conic: N² − 2cosγ·N·D + K·D² = 0.
    let quartic = poly::add(
        &poly::add(
            &poly::mul(&n, &n),
            &poly::scale(&poly::mul(&n, &d), -2.0 * cos_g),
        ),
        &poly::mul(&k, &poly::mul(&d, &d)),
    );

    let mut out = Vec::new();
    for v in poly::real_roots(&quartic) {
        if !(v > 0.0) {
            continue;
        }
        let denom = poly::eval(&d, v);
        let us: Vec<f64> = if denom.abs() > 1e-10 {
            vec![poly::eval(&n, v) / denom]
        } else {
            // Both conics share the root pair; take them from the first one.
            let kv = poly::eval(&k, v);
            let disc = cos_g * cos_g - kv;
            if disc < 0.0 {
                continue;
            }
            vec![cos_g - disc.sqrt(), cos_g + disc.sqrt()]
        };
        for u in us {
            if !(u > 0.0) {
                continue;
            }
            let qv = poly::eval(&q, v);
            if !(qv > 0.0) {
                continue;
            }
            let s1 = (b2 / qv).sqrt();
            let dist = polish([s1, u * s1, v * s1], [a2, b2, c2], [cos_a, cos_b, cos_g]);
            if dist.iter().any(|s| !(*s > 0.0)) {
                continue;
            }
            let cam = [f1 * dist[0], f2 * dist[1], f3 * dist[2]];
            if let Some(sol) = absolute_orientation(&cam, &world) {
                if !out.iter().any(|o: &P3pSolution| {
                    (o.center - sol.center).norm() < 1e-9 * (1.0 + sol.center.norm())
                }) {
                    out.push(sol);
                }
            }
        }
    }
    out
}

/// Gauss–Newton on the three law-of-cosines equations.
fn polish(mut s: [f64; 3], sides2: [f64; 3], cosines: [f64; 3]) -> [f64; 3] {
    let [a2, b2, c2] = sides2;
    let [ca, cb, cg] = cosines;
    let residual = |s: &[f64; 3]| {
        Vec3::new(
            s[1] * s[1] + s[2] * s[2] - 2.0 * s[1] * s[2] * ca - a2,
            s[0] * s[0] + s[2] * s[2] - 2.0 * s[0] * s[2] * cb - b2,
            s[0] * s[0] + s[1] * s[1] - 2.0 * s[0] * s[1] * cg - c2,
        )
    };
    let mut r = residual(&s);
    for _ in 0..5 {
        let j = Matrix3::new(
            0.0,
            2.0 * (s[1] - s[2] * ca),
            2.0 * (s[2] - s[1] * ca),
            2.0 * (s[0] - s[2] * cb),
            0.0,
            2.0 * (s[2] - s[0] * cb),
            2.0 * (s[0] - s[1] * cg),
            2.0 * (s[1] - s[0] * cg),
            0.0,
        );
        let Some(step) = j.lu().solve(&r) else { break };
        let next = [s[0] - step.x, s[1] - step.y, s[2] - step.z];
        let r_next = residual(&next);
        if !(r_next.norm() < r.norm()) {
            break;
        }
        s = next;
        r = r_next;
    }
    s
}

/// Rigid transform `world = R·cam + C` from three or more exact
/// correspondences (Kabsch with determinant correction).
pub fn absolute_orientation(cam: &[Vec3], world: &[Vec3]) -> Option<P3pSolution> {
    let n = cam.len() as f64;
    let mc = cam.iter().sum::<Vec3>() / n;
    let mw = world.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (c, w) in cam.iter().zip(world) {
        h += (w - mw) * (c - mc).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let mut s = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * v_t;
    if !r.iter().all(|x| x.is_finite()) {
        return None;
    }
    let rotation = RotationMatrix::from_matrix_unchecked(r);
    Some(P3pSolution {
        rotation,
        center: mw - r * mc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rot_from_photo, PhotoAngles};

    #[test]
    fn recovers_a_known_pose() {
        let rotation = rot_from_photo(PhotoAngles::new(0.2, -0.1, 0.7));
        let center = Vec3::new(3.0, -2.0, 40.0);
        let world = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(10.0, 2.0, 1.0),
            Vec3::new(-4.0, 9.0, -2.0),
        ];
        let bearings = world.map(|p| (rotation.transpose() * (p - center)).normalize());
        let sols = solve(world, bearings);
        assert!(!sols.is_empty() && sols.len() <= 4);
        let best = sols
            .iter()
            .min_by(|a, b| {
                (a.center - center)
                    .norm()
                    .total_cmp(&(b.center - center).norm())
            })
            .unwrap();
        assert!((best.center - center).norm() < 1e-9);
        assert!(best.rotation.angle_to(&rotation) < 1e-10);
    }

    #[test]
    fn every_solution_reproduces_the_bearings() {
        let rotation = rot_from_photo(PhotoAngles::new(-0.3, 0.25, 2.0));
        let center = Vec3::new(-5.0, 1.0, 12.0);
        let world = [
            Vec3::new(1.0, 0.5, 0.0),
            Vec3::new(-2.0, 1.5, 0.3),
            Vec3::new(0.5, -2.5, -0.2),
        ];
        let bearings = world.map(|p| (rotation.transpose() * (p - center)).normalize());
        for s in solve(world, bearings) {
            for (p, f) in world.iter().zip(&bearings) {
                let b = (s.rotation.transpose() * (p - s.center)).normalize();
                assert!((b - f).norm() < 1e-8);
            }
        }
    }
}
