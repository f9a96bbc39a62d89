//! Gauss-Legendre rules: fixed, adaptive (1D) and tensor-product (2D).

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// An `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_n` from the Chebyshev-like guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const MAX_DEPTH: u32 = 40;

/// Adaptive bisection with a 15-point rule: a panel is accepted when the
/// rule and the sum over its two halves agree within the panel's share of
/// `tol`.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = GaussLegendre::new(15);
    let whole = rule.integrate(&mut f, a, b);
    let value = refine(&rule, &mut f, a, b, whole, tol, 0)?;
    if !value.is_finite() {
        return Err(Error::EvaluationFailure(format!("non-finite integral on [{a}, {b}]")));
    }
    Ok(value)
}

fn refine<F: FnMut(f64) -> f64>(rule: &GaussLegendre, f: &mut F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
    let m = 0.5 * (a + b);
    let left = rule.integrate(&mut *f, a, m);
    let right = rule.integrate(&mut *f, m, b);
    let fine = left + right;
    if (fine - whole).abs() <= tol {
        return Ok(fine);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::EvaluationFailure(format!(
            "adaptive quadrature did not reach {tol:e} on [{a}, {b}]"
        )));
    }
    Ok(refine(rule, f, a, m, left, 0.5 * tol, depth + 1)? + refine(rule, f, m, b, right, 0.5 * tol, depth + 1)?)
}

/// Adaptive integral split at the given interior points.
pub fn adaptive_split<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    cuts.sort_by(f64::total_cmp);
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);
    let share = tol / (edges.len() - 1) as f64;
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += adaptive(&mut f, w[0], w[1], share)?;
    }
    Ok(total)
}

/// Tensor-product rule over `[x0, x1] x [y0, y1]` split into
/// `panels x panels` cells.
pub fn tensor_2d<F: FnMut(f64, f64) -> Result<f64>>(
    rule: &GaussLegendre,
    mut f: F,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    panels: usize,
) -> Result<f64> {
    let hx = (x1 - x0) / panels as f64;
    let hy = (y1 - y0) / panels as f64;
    let mut total = 0.0;
    for px in 0..panels {
        let (ax, bx) = (x0 + px as f64 * hx, x0 + (px + 1) as f64 * hx);
        for py in 0..panels {
            let (ay, by) = (y0 + py as f64 * hy, y0 + (py + 1) as f64 * hy);
            for (x, wx) in rule.mapped(ax, bx) {
                for (y, wy) in rule.mapped(ay, by) {
                    total += wx * wy * f(x, y)?;
                }
            }
        }
    }
    Ok(total)
}
