//! Orientation-block fusion.
//!
//! Two blocks observed in different frames of reference are tied through
//! their common frame ids: a 7-parameter similarity is fitted on the shared
//! projection centers, then the poses seen by both blocks are compensated
//! locally toward each other.

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use thiserror::Error;

use crate::geometry::{apply_similarity, GeometryError, Pose, RotationMatrix, Similarity7, Vec3};

/// Second singular value of the centered common centers, relative to the
/// first, below which the set is considered collinear.
const COLLINEARITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("need at least 3 common frames, got {0}")]
    TooFewCommon(usize),
    #[error("common projection centers are collinear in block {0:?}")]
    Collinear(String),
    #[error("compensation weight must lie in [0, 1], got {0}")]
    InvalidWeight(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Poses sharing one frame of reference, keyed by frame id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrientationBlock {
    /// Free-form tag naming the reference frame.
    pub frame: String,
    pub poses: BTreeMap<String, Pose>,
}

impl OrientationBlock {
    pub fn new(frame: impl Into<String>) -> Self {
        Self {
            frame: frame.into(),
            poses: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, pose: Pose) -> Option<Pose> {
        self.poses.insert(id.into(), pose)
    }

    pub fn get(&self, id: &str) -> Option<&Pose> {
        self.poses.get(id)
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Frame ids present in both blocks, sorted.
    pub fn common_ids(&self, other: &OrientationBlock) -> Vec<String> {
        self.poses
            .keys()
            .filter(|k| other.poses.contains_key(*k))
            .cloned()
            .collect()
    }

    /// Poses sorted by time (ties by frame id).
    pub fn time_ordered(&self) -> Vec<(&str, &Pose)> {
        let mut v: Vec<(&str, &Pose)> = self.poses.iter().map(|(k, p)| (k.as_str(), p)).collect();
        v.sort_by(|a, b| a.1.time.total_cmp(&b.1.time).then_with(|| a.0.cmp(b.0)));
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResidual {
    pub frame_id: String,
    /// Distance between a's center and the mapped b center, meters.
    pub center_m: f64,
    /// Angle between a's rotation and the mapped b rotation, radians.
    pub rotation_rad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityFit {
    /// Maps b coordinates into a's frame.
    pub similarity: Similarity7,
    pub residuals: Vec<FrameResidual>,
}

fn centered(points: &[Vec3]) -> (Vec3, Vec<Vec3>) {
    let mean = points.iter().sum::<Vec3>() / points.len() as f64;
    (mean, points.iter().map(|p| p - mean).collect())
}

fn is_collinear(centered: &[Vec3]) -> bool {
    let mut cov = Matrix3::zeros();
    for d in centered {
        cov += d * d.transpose();
    }
    let mut ev: Vec<f64> = cov
        .symmetric_eigenvalues()
        .iter()
        .map(|x| x.max(0.0).sqrt())
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev[0] == 0.0 || ev[1] <= COLLINEARITY_TOLERANCE * ev[0]
}

/// Least-squares similarity mapping b's common centers onto a's.
///
/// Scale is the ratio of RMS radii about the centroids; the rotation is the
/// orthogonal Procrustes solution with a proper-rotation constraint.
pub fn estimate_similarity(
    a: &OrientationBlock,
    b: &OrientationBlock,
) -> Result<SimilarityFit, FusionError> {
    let ids = a.common_ids(b);
    if ids.len() < 3 {
        return Err(FusionError::TooFewCommon(ids.len()));
    }
    let pa: Vec<Vec3> = ids.iter().map(|id| a.poses[id].center).collect();
    let pb: Vec<Vec3> = ids.iter().map(|id| b.poses[id].center).collect();
    let (ma, da) = centered(&pa);
    let (mb, db) = centered(&pb);
    if is_collinear(&da) {
        return Err(FusionError::Collinear(a.frame.clone()));
    }
    if is_collinear(&db) {
        return Err(FusionError::Collinear(b.frame.clone()));
    }

    let ra: f64 = da.iter().map(|d| d.norm_squared()).sum();
    let rb: f64 = db.iter().map(|d| d.norm_squared()).sum();
    let scale = (ra / rb).sqrt();

    let mut h = Matrix3::zeros();
    for (x, y) in da.iter().zip(&db) {
        h += x * y.transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut fix = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    let rotation = RotationMatrix::nearest(&(u * fix * v_t));
    let translation = ma - rotation * mb * scale;
    let similarity = Similarity7::new(scale, rotation, translation)?;

    let residuals = ids
        .iter()
        .map(|id| {
            let mapped = apply_similarity(&similarity, &b.poses[id]);
            let pa = &a.poses[id];
            FrameResidual {
                frame_id: id.clone(),
                center_m: (pa.center - mapped.center).norm(),
                rotation_rad: pa.rotation.angle_to(&mapped.rotation),
            }
        })
        .collect();
    Ok(SimilarityFit {
        similarity,
        residuals,
    })
}

/// Union of both blocks in a's frame, with equal-weight compensation on
/// common frames.
pub fn merge_blocks(
    a: &OrientationBlock,
    b: &OrientationBlock,
    s: &Similarity7,
) -> OrientationBlock {
    merge_blocks_weighted(a, b, s, 0.5).expect("0.5 is a valid weight")
}

/// Like [`merge_blocks`], with `weight_b` the pull toward the mapped b pose
/// on common frames (0 keeps a, 1 takes b). Common frames keep a's time.
pub fn merge_blocks_weighted(
    a: &OrientationBlock,
    b: &OrientationBlock,
    s: &Similarity7,
    weight_b: f64,
) -> Result<OrientationBlock, FusionError> {
    if !(0.0..=1.0).contains(&weight_b) {
        return Err(FusionError::InvalidWeight(weight_b));
    }
    let mut out = a.clone();
    for (id, pb) in &b.poses {
        let mapped = apply_similarity(s, pb);
        let merged = match a.poses.get(id) {
            Some(pa) => Pose {
                rotation: pa.rotation.slerp(&mapped.rotation, weight_b),
                center: pa.center + (mapped.center - pa.center) * weight_b,
                time: pa.time,
            },
            None => mapped,
        };
        out.poses.insert(id.clone(), merged);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rot_from_photo, PhotoAngles};
    use proptest::prelude::*;

    fn block(frame: &str, poses: &[(&str, [f64; 3], [f64; 3], f64)]) -> OrientationBlock {
        let mut b = OrientationBlock::new(frame);
        for (id, c, a, t) in poses {
            let r = rot_from_photo(PhotoAngles::new(a[0], a[1], a[2]));
            b.insert(*id, Pose::new(r, Vec3::from(*c), *t).unwrap());
        }
        b
    }

    fn sample_a() -> OrientationBlock {
        block(
            "a",
            &[
                ("f1", [0.0, 0.0, 100.0], [0.1, 0.0, 0.2], 0.0),
                ("f2", [10.0, 3.0, 101.0], [0.2, -0.1, 0.3], 0.5),
                ("f3", [18.0, 12.0, 99.0], [0.0, 0.1, -0.2], 1.0),
                ("f4", [25.0, 15.0, 110.0], [-0.1, 0.05, 0.1], 1.5),
            ],
        )
    }

    fn transformed(a: &OrientationBlock, s: &Similarity7) -> OrientationBlock {
        let mut b = OrientationBlock::new("b");
        for (id, p) in &a.poses {
            b.insert(id.clone(), apply_similarity(s, p));
        }
        b
    }

    #[test]
    fn identical_blocks_give_identity() {
        let a = sample_a();
        let fit = estimate_similarity(&a, &a).unwrap();
        assert!((fit.similarity.scale - 1.0).abs() < 1e-12);
        assert!(fit.similarity.rotation.angle() < 1e-12);
        assert!(fit.similarity.translation.norm() < 1e-10);
        assert!(fit
            .residuals
            .iter()
            .all(|r| r.center_m < 1e-10 && r.rotation_rad < 1e-10));
    }

    #[test]
    fn known_similarity_is_recovered() {
        let a = sample_a();
        let s = Similarity7::new(
            1.3,
            RotationMatrix::about_z(20f64.to_radians()),
            Vec3::new(5.0, -2.0, 1.0),
        )
        .unwrap();
        // b = s⁻¹(a), so the fit b -> a must return s.
        let b = transformed(&a, &s.inverse());
        let fit = estimate_similarity(&a, &b).unwrap();
        assert!((fit.similarity.scale - 1.3).abs() < 1e-10);
        assert!(fit.similarity.rotation.angle_to(&s.rotation) < 1e-10);
        assert!((fit.similarity.translation - s.translation).norm() < 1e-10);
        assert!(fit.residuals.iter().all(|r| r.center_m <= 1e-10));
    }

    #[test]
    fn collinear_and_sparse_common_sets() {
        let line = block(
            "l",
            &[
                ("f1", [0.0, 0.0, 0.0], [0.0; 3], 0.0),
                ("f2", [1.0, 1.0, 1.0], [0.0; 3], 1.0),
                ("f3", [2.0, 2.0, 2.0], [0.0; 3], 2.0),
            ],
        );
        assert!(matches!(
            estimate_similarity(&line, &line),
            Err(FusionError::Collinear(_))
        ));
        let mut two = sample_a();
        two.poses.retain(|k, _| k != "f3" && k != "f4");
        assert_eq!(
            estimate_similarity(&sample_a(), &two),
            Err(FusionError::TooFewCommon(2))
        );
    }

    #[test]
    fn disjoint_blocks_concatenate() {
        let a = sample_a();
        let b = block("b", &[("g1", [1.0, 2.0, 3.0], [0.0; 3], 3.0)]);
        let s =
            Similarity7::new(2.0, RotationMatrix::identity(), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let m = merge_blocks(&a, &b, &s);
        assert_eq!(m.len(), 5);
        assert_eq!(m.get("g1").unwrap().center, Vec3::new(3.0, 4.0, 6.0));
        assert_eq!(m.get("f1"), a.get("f1"));
    }

    #[test]
    fn common_frame_gap_is_split() {
        let a = block("a", &[("f", [0.0, 0.0, 0.0], [0.0; 3], 1.0)]);
        let b = block("b", &[("f", [2.0, 0.0, 0.0], [0.0, 0.0, 0.4], 9.0)]);
        let m = merge_blocks(&a, &b, &Similarity7::identity());
        let p = m.get("f").unwrap();
        assert!(((p.center - a.get("f").unwrap().center).norm() - 1.0).abs() < 1e-15);
        assert!(((p.center - b.get("f").unwrap().center).norm() - 1.0).abs() < 1e-15);
        assert!((p.rotation.angle() - 0.2).abs() < 1e-12);
        assert_eq!(p.time, 1.0);
        assert!(merge_blocks_weighted(&a, &b, &Similarity7::identity(), 1.5).is_err());
    }

    proptest! {
        #[test]
        fn self_fusion_is_identity(
            cs in prop::collection::vec((-100f64..100.0, -100f64..100.0, 0f64..200.0), 1..8),
            angles in prop::collection::vec((-3f64..3.0, -1.5f64..1.5, -3f64..3.0), 8),
        ) {
            let mut a = OrientationBlock::new("a");
            for (i, (c, w)) in cs.iter().zip(&angles).enumerate() {
                let r = rot_from_photo(PhotoAngles::new(w.0, w.1, w.2));
                a.insert(format!("{i:03}"), Pose::new(r, Vec3::new(c.0, c.1, c.2), i as f64).unwrap());
            }
            let m = merge_blocks(&a, &a, &Similarity7::identity());
            prop_assert_eq!(m.len(), a.len());
            for (id, p) in &a.poses {
                let q = m.get(id).unwrap();
                prop_assert!((p.center - q.center).norm() <= 1e-12);
                prop_assert!((p.rotation.matrix() - q.rotation.matrix()).abs().max() <= 1e-12);
            }
        }

        #[test]
        fn estimate_is_exact_for_true_similarities(
            scale in 0.1f64..10.0,
            axis in (-1f64..1.0, -1f64..1.0, -1f64..1.0),
            t in (-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3),
        ) {
            let a = sample_a();
            let s = Similarity7::new(scale, RotationMatrix::from_scaled_axis(Vec3::new(axis.0, axis.1, axis.2)), Vec3::new(t.0, t.1, t.2)).unwrap();
            let b = transformed(&a, &s);
            let fit = estimate_similarity(&b, &a).unwrap();
            prop_assert!(fit.similarity.scale > 0.0);
            for r in &fit.residuals {
                prop_assert!(r.center_m <= 1e-10, "{}", r.center_m);
            }
        }
    }
}
