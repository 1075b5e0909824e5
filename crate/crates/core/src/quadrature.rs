//! Gauss-Legendre rules on `[-1, 1]`.

use std::sync::OnceLock;

const MAX_POINTS: usize = 64;

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Exact for polynomials of degree `2 * points - 1`.
    pub fn points(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped to `[lo, lo + h]`.
    pub fn on_interval(&self, lo: f64, h: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().zip(&self.weights).map(move |(&t, &w)| (lo + 0.5 * h * (t + 1.0), 0.5 * h * w))
    }
}

/// Cached `n`-point rule, `1 <= n <= 64`.
pub fn gauss_legendre(n: usize) -> &'static GaussRule {
    static CACHE: [OnceLock<GaussRule>; MAX_POINTS] = [const { OnceLock::new() }; MAX_POINTS];
    assert!((1..=MAX_POINTS).contains(&n), "unsupported Gauss rule size {n}");
    CACHE[n - 1].get_or_init(|| compute(n))
}

/// Smallest rule integrating degree `deg` exactly.
pub fn rule_for_degree(deg: usize) -> &'static GaussRule {
    gauss_legendre(deg / 2 + 1)
}

fn compute(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Newton from the Tricomi-style initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = if n == 0 { 0.0 } else { n as f64 * (x * p - p0) / (x * x - 1.0) };
    (p, dp)
}
