//! Reference computations for the test suites, written independently of
//! the production code paths.

use num::traits::{Num, Signed};

/// `R^d` at offsets `(a, b)` as the residue at `z0 = -1 / (b2 (1 - b1))`.
///
/// With `t = z - z0` the integrand is
/// `(b2 - b1) / (c t)^{a+1} * P(t)`, `c = b2 (1 - b1)`, where `P` collects
/// the factors regular at `z0`. The residue is the coefficient of `t^a` in
/// the Taylor expansion of `P`, built here by truncated power series.
pub fn discrete_riemann_residue<T: Clone + Num>(b1: &T, b2: &T, a: usize, b: usize) -> T {
    let one = T::one();
    let c = b2.clone() * (one.clone() - b1.clone());
    let z0 = T::zero() - one.clone() / c.clone();
    // 1 + k z = (1 + k z0) + k t
    let linear = |k: T| -> (T, T) { (one.clone() + k.clone() * z0.clone(), k) };
    let k_a = b1.clone() * (one.clone() - b1.clone());
    let k_b = b2.clone() * (one.clone() - b2.clone());
    let k_d = b1.clone() * (one.clone() - b2.clone());

    let n = a + 1;
    let mut series = vec![T::zero(); n];
    series[0] = one.clone();
    let (u, k) = linear(k_a);
    for _ in 0..a {
        series = mul_linear(&series, &u, &k);
    }
    let (u, k) = linear(k_b);
    for _ in 0..b {
        series = mul_linear(&series, &u, &k);
    }
    let (u, k) = linear(k_d);
    let inv = inverse_linear(&u, &k, n);
    for _ in 0..=b {
        series = mul_series(&series, &inv);
    }
    let mut scale = one;
    for _ in 0..=a {
        scale = scale * c.clone();
    }
    (b2.clone() - b1.clone()) * series[a].clone() / scale
}

fn mul_linear<T: Clone + Num>(s: &[T], u: &T, k: &T) -> Vec<T> {
    let mut out = vec![T::zero(); s.len()];
    for i in 0..s.len() {
        out[i] = out[i].clone() + s[i].clone() * u.clone();
        if i + 1 < s.len() {
            out[i + 1] = out[i + 1].clone() + s[i].clone() * k.clone();
        }
    }
    out
}

/// Power series of `1 / (u + k t)` to `n` terms.
fn inverse_linear<T: Clone + Num>(u: &T, k: &T, n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n);
    let ratio = T::zero() - k.clone() / u.clone();
    let mut term = T::one() / u.clone();
    for _ in 0..n {
        out.push(term.clone());
        term = term * ratio.clone();
    }
    out
}

fn mul_series<T: Clone + Num>(x: &[T], y: &[T]) -> Vec<T> {
    let n = x.len();
    let mut out = vec![T::zero(); n];
    for i in 0..n {
        for j in 0..n - i {
            out[i + j] = out[i + j].clone() + x[i].clone() * y[j].clone();
        }
    }
    out
}

/// Continuum Riemann function at offsets `(a, b)` via the Laguerre form
/// `exp(-a b1 + b (b1 - b2)) sum_m L_m(a b2) (-b b1)^m / m!`.
///
/// The series alternates; reliable for `a b2`, `b b1` up to a few units.
pub fn continuum_riemann_laguerre(beta1: f64, beta2: f64, a: f64, b: f64) -> f64 {
    let x = a * beta2;
    let s = -b * beta1;
    let (mut l_prev, mut l_cur) = (1.0, 1.0 - x);
    let mut pow = 1.0;
    let mut total = 1.0;
    for m in 1..200 {
        pow *= s / m as f64;
        let term = l_cur * pow;
        total += term;
        if m > 10 && term.abs() < 1e-18 * total.abs().max(1e-300) {
            break;
        }
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0 - x) * l_cur - mf * l_prev) / (mf + 1.0);
        l_prev = l_cur;
        l_cur = next;
    }
    (-a * beta1 + b * (beta1 - beta2)).exp() * total
}

/// `u_xy + beta1 u_y + beta2 u_x` at `(x, y)` by Richardson-extrapolated
/// central differences with steps `h` and `h / 2`.
pub fn telegraph_residual(u: impl Fn(f64, f64) -> f64, beta1: f64, beta2: f64, x: f64, y: f64, h: f64) -> f64 {
    let res = |h: f64| {
        let uxy = (u(x + h, y + h) - u(x + h, y - h) - u(x - h, y + h) + u(x - h, y - h)) / (4.0 * h * h);
        let ux = (u(x + h, y) - u(x - h, y)) / (2.0 * h);
        let uy = (u(x, y + h) - u(x, y - h)) / (2.0 * h);
        uxy + beta1 * uy + beta2 * ux
    };
    (4.0 * res(0.5 * h) - res(h)) / 3.0
}

/// Left side minus right side of the discrete equation at `(x + 1, y + 1)`.
pub fn discrete_residual<T: Clone + Num>(phi: impl Fn(usize, usize) -> T, g: impl Fn(usize, usize) -> T, b1: &T, b2: &T, x: usize, y: usize) -> T {
    let corner = b1.clone() + b2.clone() - T::one();
    phi(x + 1, y + 1) - b1.clone() * phi(x, y + 1) - b2.clone() * phi(x + 1, y) + corner * phi(x, y) - g(x + 1, y + 1)
}

/// Largest absolute entry of a slice.
pub fn max_abs<T: Clone + Signed + PartialOrd>(v: &[T]) -> T {
    v.iter().map(|x| x.abs()).fold(T::zero(), |m, x| if x > m { x } else { m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;

    #[test]
    fn residue_base_cases() {
        let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        let (b1, b2) = (r(1, 3), r(3, 4));
        assert_eq!(discrete_riemann_residue(&b1, &b2, 0, 0), r(1, 1));
        assert_eq!(discrete_riemann_residue(&b1, &b2, 3, 0), r(1, 27));
        assert_eq!(discrete_riemann_residue(&b1, &b2, 0, 2), r(9, 16));
    }

    #[test]
    fn laguerre_edges() {
        assert!((continuum_riemann_laguerre(2.0, 1.0, 0.7, 0.0) - (-1.4f64).exp()).abs() < 1e-15);
        assert!((continuum_riemann_laguerre(2.0, 1.0, 0.0, 0.7) - (-0.7f64).exp()).abs() < 1e-15);
    }
}
