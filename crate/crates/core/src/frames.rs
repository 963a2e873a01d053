//! Frame selection from a decoded video.
//!
//! Frames are scored for sharpness (how badly they correlate with their
//! temporal neighbours: fine detail decorrelates, blur correlates) and for
//! contrast (spread of the RGB histograms). The sequence is then cut at a
//! regular rate, the sharpest surviving frame is kept around each cut, and
//! extra frames are inserted wherever consecutive picks overlap less than the
//! target.

use std::collections::{BTreeSet, HashMap};

use image::RgbImage;
use thiserror::Error;

use crate::par::{self, Execution};

/// Minimum normalized cross-correlation peak for a translation estimate.
pub const OVERLAP_CONFIDENCE: f64 = 0.3;
/// Downsampling factor of the coarse translation search.
pub const COARSE_FACTOR: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("frame sequence is empty")]
    Empty,
    #[error("every frame was dropped")]
    AllDropped,
    #[error("frame {index} is {found:?}, expected {expected:?}")]
    DimensionMismatch {
        index: usize,
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("sharpness needs at least one neighbour")]
    NoNeighbors,
    #[error("frames are not strictly ordered by index and time at frame {0}")]
    NotTimeOrdered(usize),
    #[error("invalid selection config: {0}")]
    InvalidConfig(String),
}

/// One decoded video frame.
#[derive(Debug, Clone)]
pub struct FrameRecord {
    pub index: usize,
    pub time_s: f64,
    pub pixels: RgbImage,
}

impl FrameRecord {
    pub fn new(index: usize, time_s: f64, pixels: RgbImage) -> Self {
        Self {
            index,
            time_s,
            pixels,
        }
    }

    fn dims(&self) -> (u32, u32) {
        self.pixels.dimensions()
    }
}

/// Tuning of [`select_frames`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    /// Fraction of the worst frames discarded up front, in `[0, 1)`.
    pub drop_fraction: f64,
    /// Minimum overlap between consecutive selected frames, in `(0, 1)`.
    pub overlap_target: f64,
    /// Rate of the regular cuts, frames per second.
    pub target_fps: f64,
    /// Frames examined on each side of a cut.
    pub search_window: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            drop_fraction: 0.0,
            overlap_target: 0.8,
            target_fps: 2.0,
            search_window: 2,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        let bad = |m: String| Err(SelectionError::InvalidConfig(m));
        if !(0.0..1.0).contains(&self.drop_fraction) {
            return bad(format!(
                "drop_fraction {} not in [0, 1)",
                self.drop_fraction
            ));
        }
        if !(self.overlap_target > 0.0 && self.overlap_target < 1.0) {
            return bad(format!(
                "overlap_target {} not in (0, 1)",
                self.overlap_target
            ));
        }
        if !(self.target_fps > 0.0 && self.target_fps.is_finite()) {
            return bad(format!("target_fps {} must be positive", self.target_fps));
        }
        Ok(())
    }
}

/// Luminance `(R + G + B) / 3` as a dense plane.
#[derive(Debug, Clone)]
pub struct LumaPlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl LumaPlane {
    pub fn from_rgb(img: &RgbImage) -> Self {
        let data = img
            .pixels()
            .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0)
            .collect();
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            data,
        }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    fn downsample(&self, factor: usize) -> Self {
        let (w, h) = (self.width / factor, self.height / factor);
        let norm = (factor * factor) as f64;
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let mut s = 0.0;
                for yy in 0..factor {
                    for xx in 0..factor {
                        s += self.at(x * factor + xx, y * factor + yy);
                    }
                }
                data.push(s / norm);
            }
        }
        Self {
            width: w,
            height: h,
            data,
        }
    }

    /// NCC between `self(x + dx, y + dy)` and `other(x, y)` over their
    /// overlap.
    fn ncc_shifted(&self, other: &Self, dx: i64, dy: i64) -> f64 {
        let (w, h) = (self.width as i64, self.height as i64);
        let (x0, x1) = ((-dx).max(0), (w - dx).min(w));
        let (y0, y1) = ((-dy).max(0), (h - dy).min(h));
        if x1 <= x0 || y1 <= y0 {
            return 0.0;
        }
        let n = ((x1 - x0) * (y1 - y0)) as f64;
        let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for y in y0..y1 {
            let start_a = ((y + dy) * w + x0 + dx) as usize;
            let start_b = (y * w + x0) as usize;
            let len = (x1 - x0) as usize;
            let row_a = &self.data[start_a..start_a + len];
            let row_b = &other.data[start_b..start_b + len];
            for (&a, &b) in row_a.iter().zip(row_b) {
                sa += a;
                sb += b;
                saa += a * a;
                sbb += b * b;
                sab += a * b;
            }
        }
        let cov = sab - sa * sb / n;
        let va = saa - sa * sa / n;
        let vb = sbb - sb * sb / n;
        normalized(cov, va, vb, n)
    }
}

fn normalized(cov: f64, va: f64, vb: f64, n: f64) -> f64 {
    // Variances this small are rounding noise on flat frames.
    let flat = 1e-9 * n;
    match (va <= flat, vb <= flat) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => (cov / (va * vb).sqrt()).clamp(-1.0, 1.0),
    }
}

/// Zero-shift normalized cross-correlation of two planes of equal size.
fn ncc(a: &LumaPlane, b: &LumaPlane) -> f64 {
    a.ncc_shifted(b, 0, 0)
}

fn check_dims(expected: (u32, u32), f: &FrameRecord) -> Result<(), SelectionError> {
    if f.dims() != expected {
        return Err(SelectionError::DimensionMismatch {
            index: f.index,
            expected,
            found: f.dims(),
        });
    }
    Ok(())
}

/// `1 − mean NCC` against the neighbours, in `[0, 2]`; higher is sharper.
pub fn sharpness_score(
    frame: &FrameRecord,
    neighbors: &[&FrameRecord],
) -> Result<f64, SelectionError> {
    if neighbors.is_empty() {
        return Err(SelectionError::NoNeighbors);
    }
    for n in neighbors {
        check_dims(frame.dims(), n)?;
    }
    let own = LumaPlane::from_rgb(&frame.pixels);
    let planes: Vec<LumaPlane> = neighbors
        .iter()
        .map(|n| LumaPlane::from_rgb(&n.pixels))
        .collect();
    Ok(sharpness_from_planes(&own, planes.iter()))
}

fn sharpness_from_planes<'a>(
    own: &LumaPlane,
    neighbors: impl Iterator<Item = &'a LumaPlane>,
) -> f64 {
    let (sum, count) = neighbors.fold((0.0, 0usize), |(s, c), n| (s + ncc(own, n), c + 1));
    1.0 - sum / count as f64
}

/// Mean over R, G and B of the histogram standard deviation divided by
/// 127.5, in `[0, 1]`.
pub fn contrast_score(frame: &FrameRecord) -> f64 {
    let n = frame.pixels.width() as usize * frame.pixels.height() as usize;
    if n == 0 {
        return 0.0;
    }
    let mut hist = [[0u64; 256]; 3];
    for p in frame.pixels.pixels() {
        for (c, h) in hist.iter_mut().enumerate() {
            h[p[c] as usize] += 1;
        }
    }
    let spread: f64 = hist
        .iter()
        .map(|h| {
            let mean = h
                .iter()
                .enumerate()
                .map(|(v, &k)| v as f64 * k as f64)
                .sum::<f64>()
                / n as f64;
            let var = h
                .iter()
                .enumerate()
                .map(|(v, &k)| (v as f64 - mean).powi(2) * k as f64)
                .sum::<f64>()
                / n as f64;
            var.sqrt() / 127.5
        })
        .sum();
    spread / 3.0
}

/// Outcome of [`estimate_overlap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Overlap {
    Determined {
        /// Shared footprint as a fraction of the frame area.
        fraction: f64,
        /// `b(x, y) ≈ a(x + dx, y + dy)`, pixels.
        shift: (i64, i64),
        peak: f64,
    },
    /// No correlation peak reached [`OVERLAP_CONFIDENCE`].
    Indeterminate { peak: f64 },
}

impl Overlap {
    /// Indeterminate overlaps count as zero so that they force densification.
    pub fn fraction_or_zero(&self) -> f64 {
        match self {
            Overlap::Determined { fraction, .. } => *fraction,
            Overlap::Indeterminate { .. } => 0.0,
        }
    }
}

pub fn estimate_overlap(a: &FrameRecord, b: &FrameRecord) -> Result<Overlap, SelectionError> {
    estimate_overlap_with(Execution::default(), a, b)
}

pub fn estimate_overlap_with(
    exec: Execution,
    a: &FrameRecord,
    b: &FrameRecord,
) -> Result<Overlap, SelectionError> {
    check_dims(a.dims(), b)?;
    Ok(overlap_from_planes(
        exec,
        &LumaPlane::from_rgb(&a.pixels),
        &LumaPlane::from_rgb(&b.pixels),
    ))
}

#[derive(Clone, Copy)]
struct Peak {
    score: f64,
    dx: i64,
    dy: i64,
}

impl Peak {
    // Highest score, then smallest shift, then lexicographic: deterministic
    // whatever the evaluation order.
    fn better(self, other: Peak) -> Peak {
        let key = |p: &Peak| (p.dx.abs() + p.dy.abs(), p.dy, p.dx);
        if self.score > other.score || (self.score == other.score && key(&self) <= key(&other)) {
            self
        } else {
            other
        }
    }
}

fn search(exec: Execution, a: &LumaPlane, b: &LumaPlane, xs: (i64, i64), ys: (i64, i64)) -> Peak {
    let rows = (ys.1 - ys.0 + 1).max(0) as usize;
    par::map_range(exec, rows, |r| {
        let dy = ys.0 + r as i64;
        (xs.0..=xs.1)
            .map(|dx| Peak {
                score: a.ncc_shifted(b, dx, dy),
                dx,
                dy,
            })
            .reduce(Peak::better)
    })
    .into_iter()
    .flatten()
    .reduce(Peak::better)
    .unwrap_or(Peak {
        score: 0.0,
        dx: 0,
        dy: 0,
    })
}

fn overlap_from_planes(exec: Execution, a: &LumaPlane, b: &LumaPlane) -> Overlap {
    let (w, h) = (a.width as i64, a.height as i64);
    if w == 0 || h == 0 {
        return Overlap::Indeterminate { peak: 0.0 };
    }
    let (max_dx, max_dy) = (w / 2, h / 2);
    let factor = if a.width / COARSE_FACTOR >= 8 && a.height / COARSE_FACTOR >= 8 {
        COARSE_FACTOR
    } else {
        1
    };
    let peak = if factor == 1 {
        search(exec, a, b, (-max_dx, max_dx), (-max_dy, max_dy))
    } else {
        let (ca, cb) = (a.downsample(factor), b.downsample(factor));
        let (cw, ch) = (ca.width as i64 / 2, ca.height as i64 / 2);
        let coarse = search(exec, &ca, &cb, (-cw, cw), (-ch, ch));
        let f = factor as i64;
        let (cx, cy) = (coarse.dx * f, coarse.dy * f);
        search(
            exec,
            a,
            b,
            ((cx - f).max(-max_dx), (cx + f).min(max_dx)),
            ((cy - f).max(-max_dy), (cy + f).min(max_dy)),
        )
    };
    if peak.score < OVERLAP_CONFIDENCE {
        return Overlap::Indeterminate { peak: peak.score };
    }
    let fraction = ((w - peak.dx.abs()) * (h - peak.dy.abs())) as f64 / (w * h) as f64;
    Overlap::Determined {
        fraction,
        shift: (peak.dx, peak.dy),
        peak: peak.score,
    }
}

/// Per-frame scores used by [`select_frames`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameScores {
    pub sharpness: f64,
    pub contrast: f64,
}

/// Sharpness against the previous and next frames, and contrast, for every
/// frame of a sequence.
pub fn score_frames(
    exec: Execution,
    seq: &[FrameRecord],
) -> Result<Vec<FrameScores>, SelectionError> {
    let Some(first) = seq.first() else {
        return Err(SelectionError::Empty);
    };
    for f in seq {
        check_dims(first.dims(), f)?;
    }
    let planes = par::map(exec, seq, |f| LumaPlane::from_rgb(&f.pixels));
    Ok(par::map_range(exec, seq.len(), |i| {
        let neighbors = [i.checked_sub(1), (i + 1 < seq.len()).then_some(i + 1)];
        let mut planes_iter = neighbors.iter().flatten().map(|&j| &planes[j]).peekable();
        let sharpness = if planes_iter.peek().is_some() {
            sharpness_from_planes(&planes[i], planes_iter)
        } else {
            0.0
        };
        FrameScores {
            sharpness,
            contrast: contrast_score(&seq[i]),
        }
    }))
}

/// Result of [`select_frames`]. All lists hold `FrameRecord::index` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Strictly increasing.
    pub indices: Vec<usize>,
    pub dropped: Vec<usize>,
    /// Frames picked at the regular cuts, before densification.
    pub boundary_picks: Vec<usize>,
    pub scores: Vec<FrameScores>,
}

pub fn select_frames(
    seq: &[FrameRecord],
    cfg: &SelectionConfig,
) -> Result<Selection, SelectionError> {
    select_frames_with(Execution::default(), seq, cfg)
}

pub fn select_frames_with(
    exec: Execution,
    seq: &[FrameRecord],
    cfg: &SelectionConfig,
) -> Result<Selection, SelectionError> {
    cfg.validate()?;
    if seq.is_empty() {
        return Err(SelectionError::Empty);
    }
    for (i, w) in seq.windows(2).enumerate() {
        if !(w[1].index > w[0].index && w[1].time_s > w[0].time_s) {
            return Err(SelectionError::NotTimeOrdered(i + 1));
        }
    }
    let n = seq.len();
    let scores = score_frames(exec, seq)?;

    // Drop the worst frames by sharpness rank + contrast rank.
    let rank_by = |key: &dyn Fn(usize) -> f64| -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        let mut rank = vec![0; n];
        for (r, &pos) in order.iter().enumerate() {
            rank[pos] = r;
        }
        rank
    };
    let sharp_rank = rank_by(&|i| scores[i].sharpness);
    let contrast_rank = rank_by(&|i| scores[i].contrast);
    let n_drop = (cfg.drop_fraction * n as f64).floor() as usize;
    let mut worst: Vec<usize> = (0..n).collect();
    worst.sort_by(|&a, &b| {
        (sharp_rank[a] + contrast_rank[a])
            .cmp(&(sharp_rank[b] + contrast_rank[b]))
            .then(scores[a].sharpness.total_cmp(&scores[b].sharpness))
            .then(a.cmp(&b))
    });
    let dropped: BTreeSet<usize> = worst[..n_drop].iter().copied().collect();
    if dropped.len() == n {
        return Err(SelectionError::AllDropped);
    }
    let alive = |i: usize| !dropped.contains(&i);

    let sharpest = |range: std::ops::Range<usize>| -> Option<usize> {
        range
            .filter(|&i| alive(i))
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if scores[b].sharpness >= scores[i].sharpness => Some(b),
                _ => Some(i),
            })
    };

    // Regular cuts.
    let t0 = seq[0].time_s;
    let t_end = seq[n - 1].time_s;
    let step = 1.0 / cfg.target_fps;
    let mut picks = BTreeSet::new();
    let mut k = 0u64;
    loop {
        let t = t0 + k as f64 * step;
        if t > t_end + 1e-9 * step {
            break;
        }
        let nearest = nearest_time(seq, t);
        let lo = nearest.saturating_sub(cfg.search_window);
        let hi = (nearest + cfg.search_window + 1).min(n);
        if let Some(p) = sharpest(lo..hi) {
            picks.insert(p);
        }
        k += 1;
    }
    let boundary_picks: Vec<usize> = picks.iter().copied().collect();
    log::debug!(
        "{} frames dropped, {} boundary picks",
        dropped.len(),
        boundary_picks.len()
    );

    // Densify pairs overlapping less than the target.
    let planes = par::map(exec, seq, |f| LumaPlane::from_rgb(&f.pixels));
    let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut overlap = |a: usize, b: usize| -> f64 {
        *cache
            .entry((a, b))
            .or_insert_with(|| overlap_from_planes(exec, &planes[a], &planes[b]).fraction_or_zero())
    };
    let mut selected = picks.clone();
    let mut pending: Vec<(usize, usize)> =
        boundary_picks.windows(2).map(|w| (w[0], w[1])).collect();
    while let Some((a, b)) = pending.pop() {
        if overlap(a, b) >= cfg.overlap_target {
            continue;
        }
        if let Some(m) = sharpest(a + 1..b) {
            log::debug!(
                "densify: frame {} between {} and {}",
                seq[m].index,
                seq[a].index,
                seq[b].index
            );
            selected.insert(m);
            pending.push((m, b));
            pending.push((a, m));
        }
    }

    Ok(Selection {
        indices: selected.iter().map(|&i| seq[i].index).collect(),
        dropped: dropped.iter().map(|&i| seq[i].index).collect(),
        boundary_picks: boundary_picks.iter().map(|&i| seq[i].index).collect(),
        scores,
    })
}

/// Position of the frame closest in time to `t`; ties go to the earlier one.
fn nearest_time(seq: &[FrameRecord], t: f64) -> usize {
    let after = seq.partition_point(|f| f.time_s < t);
    if after == 0 {
        return 0;
    }
    if after == seq.len() {
        return seq.len() - 1;
    }
    if t - seq[after - 1].time_s <= seq[after].time_s - t {
        after - 1
    } else {
        after
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn noise(w: u32, h: u32, seed: u64) -> RgbImage {
        let mut rng = StdRng::seed_from_u64(seed);
        RgbImage::from_fn(w, h, |_, _| {
            let v: u8 = rng.random();
            Rgb([v, v, v])
        })
    }

    fn frame(index: usize, img: RgbImage) -> FrameRecord {
        FrameRecord::new(index, index as f64 * 0.1, img)
    }

    #[test]
    fn identical_neighbour_is_zero() {
        let a = frame(0, noise(32, 32, 1));
        let b = frame(1, a.pixels.clone());
        assert_eq!(sharpness_score(&a, &[&b]).unwrap(), 0.0);
    }

    #[test]
    fn independent_noise_is_near_one() {
        // E[NCC] = 0 for independent noise, sd ≈ 1/64 at 64×64.
        let mut total = 0.0;
        for seed in 0..20 {
            let a = frame(0, noise(64, 64, 2 * seed));
            let b = frame(1, noise(64, 64, 2 * seed + 1));
            let s = sharpness_score(&a, &[&b]).unwrap();
            assert!((s - 1.0).abs() < 0.05, "{s}");
            total += s;
        }
        assert!((total / 20.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn sharpness_errors() {
        let a = frame(0, noise(8, 8, 1));
        let b = frame(1, noise(9, 8, 2));
        assert_eq!(sharpness_score(&a, &[]), Err(SelectionError::NoNeighbors));
        assert!(matches!(
            sharpness_score(&a, &[&b]),
            Err(SelectionError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn contrast_examples() {
        let gray = frame(0, RgbImage::from_pixel(16, 16, Rgb([90, 90, 90])));
        assert_eq!(contrast_score(&gray), 0.0);
        let halves = frame(
            0,
            RgbImage::from_fn(
                16,
                16,
                |x, _| if x < 8 { Rgb([0; 3]) } else { Rgb([255; 3]) },
            ),
        );
        assert!((contrast_score(&halves) - 1.0).abs() < 1e-12);
        let ramp = frame(0, RgbImage::from_fn(256, 4, |x, _| Rgb([x as u8; 3])));
        // Discrete uniform on 0..=255: sd = sqrt((256² − 1) / 12).
        let expected = ((256.0f64 * 256.0 - 1.0) / 12.0).sqrt() / 127.5;
        assert!((contrast_score(&ramp) - expected).abs() < 1e-12);
        assert!((contrast_score(&ramp) - 0.58).abs() < 0.01);
    }

    #[test]
    fn overlap_of_identical_frames_is_one() {
        let a = frame(0, noise(64, 48, 3));
        match estimate_overlap(&a, &a).unwrap() {
            Overlap::Determined {
                fraction, shift, ..
            } => {
                assert_eq!(fraction, 1.0);
                assert_eq!(shift, (0, 0));
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn overlap_of_half_width_shift() {
        let canvas = noise(96, 64, 4);
        let a = frame(
            0,
            image::imageops::crop_imm(&canvas, 0, 0, 64, 64).to_image(),
        );
        let b = frame(
            1,
            image::imageops::crop_imm(&canvas, 32, 0, 64, 64).to_image(),
        );
        let o = estimate_overlap(&a, &b).unwrap();
        assert!((o.fraction_or_zero() - 0.5).abs() <= 0.02, "{o:?}");
        if let Overlap::Determined { shift, .. } = o {
            assert_eq!(shift, (32, 0));
        }
    }

    #[test]
    fn overlap_recovers_odd_shift() {
        let canvas = noise(120, 100, 5);
        let a = frame(
            0,
            image::imageops::crop_imm(&canvas, 0, 10, 80, 80).to_image(),
        );
        let b = frame(
            1,
            image::imageops::crop_imm(&canvas, 13, 3, 80, 80).to_image(),
        );
        match estimate_overlap(&a, &b).unwrap() {
            Overlap::Determined { shift, .. } => assert_eq!(shift, (13, -7)),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn unrelated_frames_are_indeterminate() {
        let a = frame(0, noise(64, 64, 6));
        let b = frame(1, noise(64, 64, 7));
        assert!(matches!(
            estimate_overlap(&a, &b).unwrap(),
            Overlap::Indeterminate { .. }
        ));
        assert_eq!(estimate_overlap(&a, &b).unwrap().fraction_or_zero(), 0.0);
    }

    #[test]
    fn uniform_sequence_picks_boundaries_only() {
        let img = noise(32, 32, 8);
        let seq: Vec<FrameRecord> = (0..10).map(|i| frame(i, img.clone())).collect();
        let cfg = SelectionConfig {
            drop_fraction: 0.0,
            overlap_target: 0.8,
            target_fps: 2.0,
            search_window: 0,
        };
        let s = select_frames(&seq, &cfg).unwrap();
        assert_eq!(s.indices, vec![0, 5]);
    }

    #[test]
    fn dropped_frames_are_never_selected() {
        let canvas = noise(200, 40, 9);
        let seq: Vec<FrameRecord> = (0..20)
            .map(|i| {
                frame(
                    i,
                    image::imageops::crop_imm(&canvas, i as u32 * 3, 0, 40, 40).to_image(),
                )
            })
            .collect();
        let cfg = SelectionConfig {
            drop_fraction: 0.5,
            overlap_target: 0.5,
            target_fps: 5.0,
            search_window: 2,
        };
        let s = select_frames(&seq, &cfg).unwrap();
        assert_eq!(s.dropped.len(), 10);
        assert!(s.indices.iter().all(|i| !s.dropped.contains(i)));
        assert!(s.indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn selection_errors() {
        let cfg = SelectionConfig::default();
        assert_eq!(select_frames(&[], &cfg), Err(SelectionError::Empty));
        let img = noise(8, 8, 1);
        let seq = vec![frame(1, img.clone()), frame(0, img)];
        assert!(matches!(
            select_frames(&seq, &cfg),
            Err(SelectionError::NotTimeOrdered(1))
        ));
        let bad = SelectionConfig {
            overlap_target: 1.0,
            ..cfg
        };
        assert!(matches!(
            select_frames(&seq, &bad),
            Err(SelectionError::InvalidConfig(_))
        ));
    }

    #[test]
    fn nearest_time_prefers_earlier_on_ties() {
        let img = noise(4, 4, 1);
        let seq: Vec<FrameRecord> = (0..4).map(|i| frame(i, img.clone())).collect();
        assert_eq!(nearest_time(&seq, 0.15), 1);
        assert_eq!(nearest_time(&seq, 0.16), 2);
        assert_eq!(nearest_time(&seq, 9.0), 3);
    }
}
