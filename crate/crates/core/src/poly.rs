//! Real roots of low-degree real polynomials.
//!
//! Coefficients are in ascending order: `c[0] + c[1]·x + c[2]·x² + …`.
//! Roots are isolated between consecutive critical points (the real roots of
//! the derivative, found recursively), then refined by safeguarded Newton.

pub fn eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

pub fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &k)| k * i as f64)
        .collect()
}

/// Product of two polynomials.
pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, &y) in b.iter().enumerate() {
        out[i] += y;
    }
    out
}

pub fn scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|x| x * k).collect()
}

fn trim(c: &[f64]) -> &[f64] {
    let max = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return &c[..0];
    }
    let mut n = c.len();
    while n > 0 && c[n - 1].abs() <= 1e-14 * max {
        n -= 1;
    }
    &c[..n]
}

/// Sorted real roots. Double roots are reported once.
pub fn real_roots(c: &[f64]) -> Vec<f64> {
    let c = trim(c);
    match c.len() {
        0 | 1 => Vec::new(),
        2 => vec![-c[0] / c[1]],
        3 => quadratic(c[0], c[1], c[2]),
        _ => isolate(c),
    }
}

fn quadratic(c0: f64, c1: f64, c2: f64) -> Vec<f64> {
    let disc = c1 * c1 - 4.0 * c2 * c0;
    let tol = 1e-14 * (c1 * c1 + (4.0 * c2 * c0).abs());
    if disc < -tol {
        return Vec::new();
    }
    if disc <= tol {
        return vec![-c1 / (2.0 * c2)];
    }
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    let (a, b) = if q == 0.0 {
        let r = (-c0 / c2).sqrt();
        (-r, r)
    } else {
        (q / c2, c0 / q)
    };
    if a < b {
        vec![a, b]
    } else {
        vec![b, a]
    }
}

fn isolate(c: &[f64]) -> Vec<f64> {
    let lead = c[c.len() - 1];
    let bound = 1.0
        + c[..c.len() - 1]
            .iter()
            .fold(0.0f64, |m, k| m.max((k / lead).abs()));
    let mut breaks = vec![-bound];
    breaks.extend(
        real_roots(&derivative(c))
            .into_iter()
            .filter(|x| x.abs() < bound),
    );
    breaks.push(bound);

    let magnitude = |x: f64| {
        c.iter()
            .enumerate()
            .map(|(i, k)| k.abs() * x.abs().powi(i as i32))
            .sum::<f64>()
    };

    let mut roots: Vec<f64> = Vec::new();
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (flo, fhi) = (eval(c, lo), eval(c, hi));
        if flo == 0.0 {
            push_unique(&mut roots, lo);
        }
        if flo * fhi < 0.0 {
            push_unique(&mut roots, refine(c, lo, hi, flo));
        }
    }
    // Critical points touching zero are double roots.
    for &x in &breaks[1..breaks.len() - 1] {
        if eval(c, x).abs() <= 1e-12 * magnitude(x) {
            push_unique(&mut roots, x);
        }
    }
    if eval(c, bound) == 0.0 {
        push_unique(&mut roots, bound);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

fn push_unique(roots: &mut Vec<f64>, x: f64) {
    if !roots
        .iter()
        .any(|r| (r - x).abs() <= 1e-12 * (1.0 + x.abs()))
    {
        roots.push(x);
    }
}

/// Newton with bisection fallback on a sign-changing bracket.
fn refine(c: &[f64], mut lo: f64, mut hi: f64, flo: f64) -> f64 {
    let d = derivative(c);
    let lo_negative = flo < 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = eval(c, x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        let dx = eval(&d, x);
        let newton = x - fx / dx;
        let next = if dx != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_roots(roots: &[f64]) -> Vec<f64> {
        roots.iter().fold(vec![1.0], |acc, r| mul(&acc, &[-r, 1.0]))
    }

    #[test]
    fn quartic_with_four_roots() {
        let c = from_roots(&[-3.0, -0.5, 1.25, 7.0]);
        let r = real_roots(&c);
        assert_eq!(r.len(), 4);
        for (a, b) in r.iter().zip([-3.0, -0.5, 1.25, 7.0]) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn complex_pair_is_skipped() {
        // (x² + 1)(x − 2)(x + 1)
        let c = mul(&[1.0, 0.0, 1.0], &from_roots(&[2.0, -1.0]));
        let r = real_roots(&c);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 1.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn double_root_is_found() {
        let c = from_roots(&[1.0, 1.0, -2.0]);
        let r = real_roots(&c);
        assert_eq!(r.len(), 2);
        assert!((r[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn degenerate_leading_coefficient() {
        let mut c = from_roots(&[0.5, 2.0, 3.0]);
        c.push(0.0);
        assert_eq!(real_roots(&c).len(), 3);
        assert!(real_roots(&[0.0, 0.0]).is_empty());
        assert_eq!(real_roots(&[2.0, -4.0]), vec![0.5]);
    }

    proptest! {
        #[test]
        fn recovers_separated_roots(mut roots in prop::collection::vec(-50f64..50.0, 1..5)) {
            roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assume!(roots.windows(2).all(|w| w[1] - w[0] > 1e-2));
            let found = real_roots(&from_roots(&roots));
            prop_assert_eq!(found.len(), roots.len());
            for (a, b) in found.iter().zip(&roots) {
                prop_assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()));
            }
        }
    }
}
