//! Continuum and discrete telegraph equations: Riemann functions, boundary
//! value solvers and the covariance of the stochastic limit.
//!
//! Continuum equation: `u_XY + beta1 u_Y + beta2 u_X = f` with
//! `u(X, 0) = chi(X)`, `u(0, Y) = psi(Y)`.
//!
//! Discrete equation:
//! `Phi(X+1, Y+1) - b1 Phi(X, Y+1) - b2 Phi(X+1, Y) + (b1 + b2 - 1) Phi(X, Y) = g(X+1, Y+1)`.

use std::f64::consts::PI;
use std::io::{self, Write};

use num::complex::Complex64;

use crate::error::{Error, Result};
use crate::profile::PiecewiseLinear;
use crate::qnum::Scalar;
use crate::quadrature::{adaptive_split, tensor_2d, GaussLegendre};

/// Absolute tolerance of the boundary integrals in [`solve_telegraph`].
pub const SOLVE_TOL: f64 = 1e-10;

/// Convergence threshold between successive panel counts in [`clt_covariance`].
pub const COVARIANCE_TOL: f64 = 1e-6;

/// Node count of the contour rule used as fallback and as test oracle.
pub const CONTOUR_NODES: usize = 4096;

const SERIES_REL_CUTOFF: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 100_000;

/// Coefficients of the continuum equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelegraphCoeffs {
    beta1: f64,
    beta2: f64,
}

impl TelegraphCoeffs {
    /// `beta1` multiplies `u_Y`, `beta2` multiplies `u_X`.
    pub fn new(beta1: f64, beta2: f64) -> Result<Self> {
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {b} must be positive and finite")));
            }
        }
        if beta1 == beta2 {
            return Err(Error::InvalidParameter(format!("beta1 = beta2 = {beta1}: coefficients must differ")));
        }
        Ok(Self { beta1, beta2 })
    }

    /// Coefficients `(I beta1, J beta2)` of the hydrodynamic limit.
    pub fn for_spins(spin_i: usize, beta1: f64, spin_j: usize, beta2: f64) -> Result<Self> {
        Self::new(spin_i as f64 * beta1, spin_j as f64 * beta2)
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }
}

fn check_offsets(x_big: f64, y_big: f64, x: f64, y: f64) -> Result<(f64, f64)> {
    let (a, b) = (x_big - x, y_big - y);
    if !(x >= 0.0 && y >= 0.0 && a >= 0.0 && b >= 0.0) || !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= x <= X and 0 <= y <= Y, got X={x_big}, Y={y_big}, x={x}, y={y}"
        )));
    }
    Ok((a, b))
}

/// Continuum Riemann function `R(X, Y; x, y)`.
///
/// Expanding the contour integrand in `w = z + beta1` leaves the residue
/// `exp(-beta1 a - beta2 b) sum_n (beta1 beta2 a b)^n / (n!)^2` with
/// `a = X - x`, `b = Y - y`. All terms are positive, so the sum is summed
/// directly. If it cannot be summed in binary64 the contour rule is used.
pub fn riemann_continuum(c: TelegraphCoeffs, x_big: f64, y_big: f64, x: f64, y: f64) -> Result<f64> {
    let (a, b) = check_offsets(x_big, y_big, x, y)?;
    riemann_at_offsets(c, a, b)
}

fn riemann_at_offsets(c: TelegraphCoeffs, a: f64, b: f64) -> Result<f64> {
    match riemann_series(c, a, b) {
        Some(v) => Ok(v),
        None => {
            let v = riemann_contour_quadrature(c, a, b, CONTOUR_NODES);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::EvaluationFailure(format!(
                    "Riemann function at offsets ({a}, {b}) with coefficients ({}, {})",
                    c.beta1, c.beta2
                )))
            }
        }
    }
}

fn riemann_series(c: TelegraphCoeffs, a: f64, b: f64) -> Option<f64> {
    let z = c.beta1 * c.beta2 * a * b;
    let prefactor = (-c.beta1 * a - c.beta2 * b).exp();
    let mut term = 1.0;
    let mut sum = 1.0;
    let peak = z.sqrt();
    for n in 1..SERIES_MAX_TERMS {
        let nf = n as f64;
        term *= z / (nf * nf);
        sum += term;
        if !sum.is_finite() {
            return None;
        }
        if nf > peak && term <= SERIES_REL_CUTOFF * sum {
            let v = prefactor * sum;
            return (v.is_finite() && (v > 0.0 || prefactor == 0.0)).then_some(v);
        }
    }
    None
}

/// The defining contour integral evaluated by the trapezoid rule on the
/// circle of radius `|beta2 - beta1| / 2` around `-beta1`. Takes offsets
/// `a = X - x`, `b = Y - y`.
pub fn riemann_contour_quadrature(c: TelegraphCoeffs, a: f64, b: f64, nodes: usize) -> f64 {
    let (b1, b2) = (c.beta1, c.beta2);
    let r = 0.5 * (b2 - b1).abs();
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..nodes {
        let theta = 2.0 * PI * k as f64 / nodes as f64;
        let w = Complex64::from_polar(r, theta);
        let z = w - b1;
        let exponent = (b1 - b2) * (-a * z / (z + b2) + b * z / w);
        let integrand = (b2 - b1) / (w * (z + b2)) * exponent.exp();
        acc += integrand * w;
    }
    acc.re / nodes as f64
}

/// Point evaluator of `R` for fixed coefficients.
#[derive(Debug, Clone, Copy)]
pub struct RiemannEvaluator {
    coeffs: TelegraphCoeffs,
}

impl RiemannEvaluator {
    pub fn new(coeffs: TelegraphCoeffs) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> TelegraphCoeffs {
        self.coeffs
    }

    pub fn eval(&self, x_big: f64, y_big: f64, x: f64, y: f64) -> Result<f64> {
        riemann_continuum(self.coeffs, x_big, y_big, x, y)
    }

    /// `R` as a function of the offsets `(X - x, Y - y)`.
    pub fn eval_offsets(&self, a: f64, b: f64) -> Result<f64> {
        check_offsets(a, b, 0.0, 0.0)?;
        riemann_at_offsets(self.coeffs, a, b)
    }
}

/// Boundary data for the continuum solver.
pub trait BoundaryFn: Sync {
    fn value(&self, t: f64) -> f64;

    fn derivative(&self, t: f64) -> f64;

    /// Points where the derivative may jump.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Constant boundary data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl BoundaryFn for Constant {
    fn value(&self, _t: f64) -> f64 {
        self.0
    }

    fn derivative(&self, _t: f64) -> f64 {
        0.0
    }
}

/// `t -> base^{p(t)}` for a piecewise-linear height profile `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpProfile {
    pub base: f64,
    pub profile: PiecewiseLinear,
}

impl BoundaryFn for ExpProfile {
    fn value(&self, t: f64) -> f64 {
        self.base.powf(self.profile.value(t))
    }

    fn derivative(&self, t: f64) -> f64 {
        self.base.ln() * self.profile.derivative(t) * self.value(t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.profile.breakpoints()
    }
}

/// Boundary data given by a value closure and a derivative closure.
pub struct FnBoundary<V, D> {
    pub value: V,
    pub derivative: D,
}

impl<V, D> BoundaryFn for FnBoundary<V, D>
where
    V: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64 + Sync,
{
    fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    fn derivative(&self, t: f64) -> f64 {
        (self.derivative)(t)
    }
}

/// Solution of the homogeneous continuum equation at `(X, Y)`.
pub fn solve_telegraph(c: TelegraphCoeffs, chi: &dyn BoundaryFn, psi: &dyn BoundaryFn, x_big: f64, y_big: f64) -> Result<f64> {
    solve_telegraph_with_tol(c, chi, psi, x_big, y_big, SOLVE_TOL)
}

/// [`solve_telegraph`] with an explicit absolute quadrature tolerance.
pub fn solve_telegraph_with_tol(
    c: TelegraphCoeffs,
    chi: &dyn BoundaryFn,
    psi: &dyn BoundaryFn,
    x_big: f64,
    y_big: f64,
    tol: f64,
) -> Result<f64> {
    check_offsets(x_big, y_big, 0.0, 0.0)?;
    let (c0, p0) = (chi.value(0.0), psi.value(0.0));
    if (c0 - p0).abs() > 1e-12 * c0.abs().max(p0.abs()).max(1.0) {
        return Err(Error::BoundaryMismatch(format!("chi(0) = {c0} but psi(0) = {p0}")));
    }
    let eval = RiemannEvaluator::new(c);
    let corner = p0 * eval.eval_offsets(x_big, y_big)?;

    let mut failure = None;
    let mut guard = |r: Result<f64>| {
        r.unwrap_or_else(|e| {
            failure.get_or_insert(e);
            0.0
        })
    };
    let left = adaptive_split(
        |y| guard(eval.eval_offsets(x_big, y_big - y)) * (psi.derivative(y) + c.beta2 * psi.value(y)),
        0.0,
        y_big,
        &psi.breakpoints(),
        0.5 * tol,
    )?;
    let mut failure2 = None;
    let mut guard2 = |r: Result<f64>| {
        r.unwrap_or_else(|e| {
            failure2.get_or_insert(e);
            0.0
        })
    };
    let bottom = adaptive_split(
        |x| guard2(eval.eval_offsets(x_big - x, y_big)) * (chi.derivative(x) + c.beta1 * chi.value(x)),
        0.0,
        x_big,
        &chi.breakpoints(),
        0.5 * tol,
    )?;
    if let Some(e) = failure.or(failure2) {
        return Err(e);
    }
    Ok(corner + left + bottom)
}

/// Coefficients of the discrete equation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCoeffs<S> {
    b1: S,
    b2: S,
}

impl<S: Scalar> DiscreteCoeffs<S> {
    pub fn new(b1: S, b2: S) -> Result<Self> {
        let (zero, one) = (S::from_i64(0), S::from_i64(1));
        for (name, b) in [("b1", &b1), ("b2", &b2)] {
            if !(*b > zero && *b < one) {
                return Err(Error::InvalidParameter(format!("{name} = {} must lie in (0, 1)", b.to_f64())));
            }
        }
        if b1 == b2 {
            return Err(Error::InvalidParameter(format!("b1 = b2 = {}: coefficients must differ", b1.to_f64())));
        }
        Ok(Self { b1, b2 })
    }

    pub fn b1(&self) -> &S {
        &self.b1
    }

    pub fn b2(&self) -> &S {
        &self.b2
    }
}

/// `R^d` on all offsets `0 <= X - x <= max_a`, `0 <= Y - y <= max_b`.
#[derive(Debug, Clone)]
pub struct DiscreteRiemannTable<S> {
    max_a: usize,
    max_b: usize,
    data: Vec<S>,
}

impl<S: Scalar> DiscreteRiemannTable<S> {
    /// Fills the table with the Green's function recurrence.
    pub fn new(d: &DiscreteCoeffs<S>, max_a: usize, max_b: usize) -> Self {
        let w = max_a + 1;
        let one = S::from_i64(1);
        let corner = d.b1.clone() + d.b2.clone() - one.clone();
        let mut data = vec![S::from_i64(0); w * (max_b + 1)];
        data[0] = one;
        for a in 1..=max_a {
            data[a] = data[a - 1].clone() * d.b1.clone();
        }
        for b in 1..=max_b {
            data[b * w] = data[(b - 1) * w].clone() * d.b2.clone();
            for a in 1..=max_a {
                let v = d.b1.clone() * data[b * w + a - 1].clone() + d.b2.clone() * data[(b - 1) * w + a].clone()
                    - corner.clone() * data[(b - 1) * w + a - 1].clone();
                data[b * w + a] = v;
            }
        }
        Self { max_a, max_b, data }
    }

    pub fn max_a(&self) -> usize {
        self.max_a
    }

    pub fn max_b(&self) -> usize {
        self.max_b
    }

    /// `R^d` at offsets `(X - x, Y - y)`; panics outside the table.
    pub fn get(&self, a: usize, b: usize) -> &S {
        assert!(a <= self.max_a && b <= self.max_b, "offset ({a}, {b}) outside the table");
        &self.data[b * (self.max_a + 1) + a]
    }

    /// `R^d(X, Y; x, y)`.
    pub fn at(&self, x_big: usize, y_big: usize, x: usize, y: usize) -> &S {
        self.get(x_big - x, y_big - y)
    }
}

/// Discrete Riemann function `R^d(X, Y; x, y)`.
pub fn riemann_discrete<S: Scalar>(d: &DiscreteCoeffs<S>, x_big: usize, y_big: usize, x: usize, y: usize) -> Result<S> {
    if x > x_big || y > y_big {
        return Err(Error::InvalidParameter(format!(
            "need x <= X and y <= Y, got X={x_big}, Y={y_big}, x={x}, y={y}"
        )));
    }
    let t = DiscreteRiemannTable::new(d, x_big - x, y_big - y);
    Ok(t.get(x_big - x, y_big - y).clone())
}

/// Values on the lattice `{0..=x_len} x {0..=y_len}`, row-major in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<S> {
    pub x_len: usize,
    pub y_len: usize,
    pub data: Vec<S>,
}

impl<S> Grid<S> {
    pub fn get(&self, x: usize, y: usize) -> &S {
        &self.data[y * (self.x_len + 1) + x]
    }
}

/// Solution of the discrete equation on `{0..=x_len} x {0..=y_len}` by
/// the `R^d` representation. `chi` and `psi` hold `x_len + 1` and
/// `y_len + 1` boundary values; `g` is read at `x, y >= 1`.
pub fn solve_discrete_telegraph<S: Scalar>(
    d: &DiscreteCoeffs<S>,
    chi: &[S],
    psi: &[S],
    g: &dyn Fn(usize, usize) -> S,
    x_len: usize,
    y_len: usize,
) -> Result<Grid<S>> {
    if chi.len() != x_len + 1 || psi.len() != y_len + 1 {
        return Err(Error::InvalidParameter(format!(
            "boundary lengths {} and {} do not match a {x_len} x {y_len} grid",
            chi.len(),
            psi.len()
        )));
    }
    if chi[0] != psi[0] {
        return Err(Error::BoundaryMismatch(format!(
            "chi(0) = {} but psi(0) = {}",
            chi[0].to_f64(),
            psi[0].to_f64()
        )));
    }
    let table = DiscreteRiemannTable::new(d, x_len, y_len);
    let dpsi: Vec<S> = (1..=y_len).map(|y| psi[y].clone() - d.b2.clone() * psi[y - 1].clone()).collect();
    let dchi: Vec<S> = (1..=x_len).map(|x| chi[x].clone() - d.b1.clone() * chi[x - 1].clone()).collect();
    let gv: Vec<S> = (1..=y_len).flat_map(|y| (1..=x_len).map(move |x| (x, y))).map(|(x, y)| g(x, y)).collect();

    let mut data = Vec::with_capacity((x_len + 1) * (y_len + 1));
    for yb in 0..=y_len {
        for xb in 0..=x_len {
            let mut v = psi[0].clone() * table.get(xb, yb).clone();
            for y in 1..=yb {
                v = v + table.get(xb, yb - y).clone() * dpsi[y - 1].clone();
            }
            for x in 1..=xb {
                v = v + table.get(xb - x, yb).clone() * dchi[x - 1].clone();
            }
            for y in 1..=yb {
                for x in 1..=xb {
                    v = v + table.get(xb - x, yb - y).clone() * gv[(y - 1) * x_len + x - 1].clone();
                }
            }
            data.push(v);
        }
    }
    Ok(Grid { x_len, y_len, data })
}

/// A mean field `Q(x, y)` with partial derivatives.
pub trait MeanField: Sync {
    fn value(&self, x: f64, y: f64) -> Result<f64>;

    /// `(Q_x, Q_y)` by Richardson-extrapolated differences with steps
    /// `1e-3` and `5e-4`; one-sided near the coordinate axes.
    fn gradient(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let dx = richardson(|t| self.value(t, y), x)?;
        let dy = richardson(|t| self.value(x, t), y)?;
        Ok((dx, dy))
    }
}

const DIFF_STEP: f64 = 1e-3;

fn richardson(f: impl Fn(f64) -> Result<f64>, t: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> {
        if t >= h {
            Ok((f(t + h)? - f(t - h)?) / (2.0 * h))
        } else {
            Ok((-3.0 * f(t)? + 4.0 * f(t + h)? - f(t + 2.0 * h)?) / (2.0 * h))
        }
    };
    let coarse = d(DIFF_STEP)?;
    let fine = d(0.5 * DIFF_STEP)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// `Q = frak_q^h` where `Q` solves the continuum equation with boundary data
/// `frak_q^chi`, `frak_q^psi`.
pub struct TelegraphMeanField<C, P> {
    pub coeffs: TelegraphCoeffs,
    pub chi: C,
    pub psi: P,
}

impl<C: BoundaryFn, P: BoundaryFn> MeanField for TelegraphMeanField<C, P> {
    fn value(&self, x: f64, y: f64) -> Result<f64> {
        solve_telegraph(self.coeffs, &self.chi, &self.psi, x, y)
    }
}

/// `Q` identically constant.
#[derive(Debug, Clone, Copy)]
pub struct ConstantField(pub f64);

impl MeanField for ConstantField {
    fn value(&self, _x: f64, _y: f64) -> Result<f64> {
        Ok(self.0)
    }

    fn gradient(&self, _x: f64, _y: f64) -> Result<(f64, f64)> {
        Ok((0.0, 0.0))
    }
}

/// Parameters of the limiting noise: spins and raw scaling constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub spin_i: usize,
    pub beta1: f64,
    pub spin_j: usize,
    pub beta2: f64,
}

impl NoiseParams {
    pub fn coeffs(&self) -> Result<TelegraphCoeffs> {
        TelegraphCoeffs::for_spins(self.spin_i, self.beta1, self.spin_j, self.beta2)
    }

    /// Noise intensity
    /// `(b1 + b2) Q_x Q_y + J (b2 - b1) b2 Q Q_x + I (b1 - b2) b1 Q Q_y`.
    pub fn theta(&self, q: f64, qx: f64, qy: f64) -> f64 {
        let (b1, b2) = (self.beta1, self.beta2);
        (b1 + b2) * qx * qy + self.spin_j as f64 * (b2 - b1) * b2 * q * qx + self.spin_i as f64 * (b1 - b2) * b1 * q * qy
    }
}

/// Result of [`clt_covariance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEstimate {
    pub value: f64,
    /// Value at half the final panel count.
    pub previous: f64,
    pub panels: usize,
}

const COVARIANCE_RULE: usize = 8;
const COVARIANCE_MAX_PANELS: usize = 64;
const THETA_NEGATIVE_SLACK: f64 = 1e-8;

/// Covariance of the limiting Gaussian field at `(X1, Y1)` and `(X2, Y2)`:
/// the integral of `R(X1, Y1; x, y) R(X2, Y2; x, y) theta(x, y)` over
/// `[0, X1 min X2] x [0, Y1 min Y2]`, with `R` at coefficients
/// `(I beta1, J beta2)`. Panels double until two successive values agree
/// within [`COVARIANCE_TOL`].
pub fn clt_covariance(noise: NoiseParams, qh: &dyn MeanField, p1: (f64, f64), p2: (f64, f64)) -> Result<CovarianceEstimate> {
    let coeffs = noise.coeffs()?;
    check_offsets(p1.0, p1.1, 0.0, 0.0)?;
    check_offsets(p2.0, p2.1, 0.0, 0.0)?;
    let xm = p1.0.min(p2.0);
    let ym = p1.1.min(p2.1);
    if xm == 0.0 || ym == 0.0 {
        return Ok(CovarianceEstimate {
            value: 0.0,
            previous: 0.0,
            panels: 0,
        });
    }
    let eval = RiemannEvaluator::new(coeffs);
    let rule = GaussLegendre::new(COVARIANCE_RULE);
    let integrand = |x: f64, y: f64| -> Result<f64> {
        let q = qh.value(x, y)?;
        let (qx, qy) = qh.gradient(x, y)?;
        let theta = noise.theta(q, qx, qy);
        if theta < -THETA_NEGATIVE_SLACK {
            return Err(Error::EvaluationFailure(format!(
                "negative noise intensity {theta:e} at ({x}, {y}): Q = {q}, Q_x = {qx}, Q_y = {qy}"
            )));
        }
        let r1 = eval.eval(p1.0, p1.1, x, y)?;
        let r2 = eval.eval(p2.0, p2.1, x, y)?;
        Ok(r1 * r2 * theta)
    };
    let mut panels = 1;
    let mut previous = tensor_2d(&rule, integrand, (0.0, xm), (0.0, ym), panels)?;
    loop {
        panels *= 2;
        let value = tensor_2d(&rule, integrand, (0.0, xm), (0.0, ym), panels)?;
        if (value - previous).abs() <= COVARIANCE_TOL {
            return Ok(CovarianceEstimate { value, previous, panels });
        }
        if panels >= COVARIANCE_MAX_PANELS {
            return Err(Error::EvaluationFailure(format!(
                "covariance quadrature did not settle: {previous} vs {value} at {panels} panels"
            )));
        }
        previous = value;
    }
}

/// Writes `x,y,value` rows with round-trip float formatting.
pub fn write_xyz_csv<W: Write>(mut w: W, rows: impl IntoIterator<Item = (f64, f64, f64)>) -> io::Result<()> {
    writeln!(w, "x,y,value")?;
    for (x, y, v) in rows {
        writeln!(w, "{x:?},{y:?},{v:?}")?;
    }
    Ok(())
}

/// Writes a discrete grid as `x,y,value` rows.
pub fn write_grid_csv<W: Write, S: Scalar>(mut w: W, grid: &Grid<S>) -> io::Result<()> {
    writeln!(w, "x,y,value")?;
    for y in 0..=grid.y_len {
        for x in 0..=grid.x_len {
            writeln!(w, "{x},{y},{:?}", grid.get(x, y).to_f64())?;
        }
    }
    Ok(())
}
