use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use image::RgbImage;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use trajecto::camera::{CameraIntrinsics, ProjectionModel};
use trajecto::frames::{score_frames, FrameRecord};
use trajecto::geometry::{rot_from_photo, PhotoAngles, Pose, Vec3};
use trajecto::par::{self, Execution};
use trajecto::resection::{resect_frame, Correspondence, GroundControlPoint, P3pOptions};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn frames(n: usize, size: u32) -> Vec<FrameRecord> {
    let mut rng = StdRng::seed_from_u64(1);
    let wide = RgbImage::from_fn(size + 4 * n as u32, size, |_, _| {
        let g: u8 = rng.random();
        image::Rgb([g, g, g])
    });
    (0..n)
        .map(|i| {
            let crop = image::imageops::crop_imm(&wide, 4 * i as u32, 0, size, size).to_image();
            FrameRecord::new(i, i as f64 / 25.0, crop)
        })
        .collect()
}

fn bench_scoring(c: &mut Criterion) {
    let seq = frames(32, 256);
    let mut g = c.benchmark_group("score_frames");
    g.sample_size(10);
    for exec in MODES {
        g.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &seq,
            |b, seq| b.iter(|| score_frames(exec, black_box(seq)).unwrap()),
        );
    }
    g.finish();
}

fn bench_resection(c: &mut Criterion) {
    let cam = CameraIntrinsics::centered(
        ProjectionModel::Rectilinear,
        4.3,
        [6.17, 4.55],
        [4000, 3000],
    )
    .unwrap();
    let gcps: Vec<GroundControlPoint> = [
        [-42.0, -30.0, 0.0],
        [44.0, -27.0, 2.5],
        [2.0, 38.0, 6.0],
        [-25.0, 20.0, 1.0],
        [25.0, 22.0, 8.0],
        [0.0, -5.0, 3.5],
    ]
    .iter()
    .enumerate()
    .map(|(i, p)| GroundControlPoint::new(format!("G{}", i + 1), Vec3::from(*p)))
    .collect();
    let observations: Vec<(f64, Vec<Correspondence>)> = (0..2000)
        .map(|i| {
            let s = (i % 20) as f64;
            let rot = rot_from_photo(PhotoAngles::new(
                std::f64::consts::PI + 0.02 * s.sin(),
                0.01,
                0.1,
            ));
            let pose = Pose::new(rot, Vec3::new(-12.0 + 1.2 * s, -3.0, 100.0), i as f64).unwrap();
            let obs = gcps
                .iter()
                .map(|g| {
                    Correspondence::new(
                        g.clone(),
                        cam.project(&pose.to_camera(&g.position)).unwrap(),
                    )
                })
                .collect();
            (pose.time, obs)
        })
        .collect();
    let opts = P3pOptions::default();
    let mut g = c.benchmark_group("resect_frames");
    for exec in MODES {
        g.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &observations,
            |b, obs| {
                b.iter(|| {
                    par::map(exec, obs, |(t, o)| {
                        resect_frame(&cam, o, *t, &opts).map(|r| r.residual_px)
                    })
                })
            },
        );
    }
    g.finish();
}

criterion_group!(benches, bench_scoring, bench_resection);
criterion_main!(benches);
