//! Deterministic quadrature rules.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Collapsed Gauss rule on the triangle `s, t >= 0, s + t <= 1`.
///
/// Returns `(s, t, w)` triples with weights summing to 1, so an integral over
/// any triangle is `area * sum w f`.
pub fn triangle_rule(n: usize) -> Vec<(f64, f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for (xi, wi) in x.iter().zip(&w) {
        let s = 0.5 * (1.0 + xi);
        for (eta, wj) in x.iter().zip(&w) {
            let t = (1.0 - s) * 0.5 * (1.0 + eta);
            out.push((s, t, wi * wj * (1.0 - s) * 0.5));
        }
    }
    out
}

/// Midpoint rule with `n` points per axis on the unit torus `[0,1)^dim`.
pub fn midpoint_torus(dim: usize, n: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let total = n.pow(dim as u32);
    let h = 1.0 / n as f64;
    let mut point = vec![0.0; dim];
    let mut acc = 0.0;
    for index in 0..total {
        let mut rest = index;
        for p in point.iter_mut() {
            *p = ((rest % n) as f64 + 0.5) * h;
            rest /= n;
        }
        acc += f(&point);
    }
    acc / total as f64
}

/// Midpoint rule refined by doubling until successive values differ by less
/// than `tol`; returns the Richardson-extrapolated last pair.
pub fn refined_midpoint_torus(
    dim: usize,
    tol: f64,
    max_points: usize,
    mut f: impl FnMut(&[f64]) -> f64,
) -> Option<f64> {
    let mut n = 2;
    let mut prev = midpoint_torus(dim, n, &mut f);
    loop {
        n *= 2;
        if n.checked_pow(dim as u32)? > max_points {
            return None;
        }
        let next = midpoint_torus(dim, n, &mut f);
        if (next - prev).abs() < tol {
            return Some((4.0 * next - prev) / 3.0);
        }
        prev = next;
    }
}
