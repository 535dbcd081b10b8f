//! Gauss–Legendre rules and the singular-corner transform used by the
//! near-field kernel integrals.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Newton from the Chebyshev-like initial guess.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Nodes and weights mapped to `[0, 1]`.
    pub fn unit(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| (0.5 * (x + 1.0), 0.5 * w))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integral over the unit parameter square of a function with an `r^(-exponent)`
/// type singularity at `u = 0`, after the substitution `u = w^q`,
/// `q = 1 / (1 - exponent)`. `f(u, v)` must already include the Duffy Jacobian.
pub(crate) fn duffy_integrate(rule: &GaussLegendre, exponent: f64, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
    let q = 1.0 / (1.0 - exponent);
    let mut acc = 0.0;
    for (w, ww) in rule.unit() {
        let u = w.powf(q);
        let du = q * w.powf(q - 1.0);
        for (v, wv) in rule.unit() {
            acc += ww * wv * du * f(u, v);
        }
    }
    acc
}
