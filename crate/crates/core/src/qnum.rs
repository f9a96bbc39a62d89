//! Field arithmetic shared by the exact and floating-point code paths, plus
//! the q-series building blocks of the vertex weights.
//!
//! Every weight formula in this crate is written once against [`Scalar`].
//! Identity checks instantiate it with [`Rational`] and hold exactly;
//! simulations instantiate it with `f64`.

use std::fmt::Debug;

use num::bigint::BigInt;
use num::traits::{Pow, Signed, ToPrimitive};
use num::BigRational;

use crate::error::{Error, Result};

/// Arbitrary precision rational number.
pub type Rational = BigRational;

/// A field element usable by every weight and four-point formula.
pub trait Scalar: Clone + Debug + PartialOrd + Signed + Send + Sync + 'static {
    fn from_i64(n: i64) -> Self;

    /// `num / den`; panics if `den == 0`.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Exact conversion of a finite binary64 value.
    fn from_f64(x: f64) -> Option<Self>;

    fn to_f64(&self) -> f64;

    /// Integer power. Negative exponents require a nonzero base.
    fn powi(&self, exp: i64) -> Self;
}

impl Scalar for f64 {
    fn from_i64(n: i64) -> Self {
        n as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        num as f64 / den as f64
    }

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn powi(&self, exp: i64) -> Self {
        match i32::try_from(exp) {
            Ok(e) => f64::powi(*self, e),
            Err(_) => f64::powf(*self, exp as f64),
        }
    }
}

impl Scalar for Rational {
    fn from_i64(n: i64) -> Self {
        Rational::from_integer(BigInt::from(n))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64(x: f64) -> Option<Self> {
        Rational::from_float(x)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn powi(&self, exp: i64) -> Self {
        let e = i32::try_from(exp).expect("exponent out of i32 range");
        Pow::pow(self, e)
    }
}

/// `(a; q)_n = prod_{k=0}^{n-1} (1 - a q^k)`.
pub fn q_pochhammer<S: Scalar>(a: &S, q: &S, n: usize) -> S {
    let mut acc = S::one();
    let mut a_qk = a.clone();
    for _ in 0..n {
        acc = acc * (S::one() - a_qk.clone());
        a_qk = a_qk * q.clone();
    }
    acc
}

/// `(a; q)_n` for any integer `n`, with `(a; q)_{-m} = 1 / (a q^{-m}; q)_m`.
pub fn q_pochhammer_signed<S: Scalar>(a: &S, q: &S, n: i64) -> Result<S> {
    if n >= 0 {
        return Ok(q_pochhammer(a, q, n as usize));
    }
    let m = n.unsigned_abs() as usize;
    let shifted = a.clone() * q.powi(n);
    let denom = q_pochhammer(&shifted, q, m);
    if denom.is_zero() {
        return Err(Error::SingularParameter(format!(
            "(a;q)_{n} has a vanishing denominator"
        )));
    }
    Ok(S::one() / denom)
}

/// Rejects `q` with `q^k = 1` for some `1 <= k <= n`.
pub fn check_not_root_of_unity<S: Scalar>(q: &S, n: usize) -> Result<()> {
    let mut qk = q.clone();
    for k in 1..=n {
        if qk.is_one() {
            return Err(Error::RootOfUnity { q: q.to_f64(), k });
        }
        qk = qk * q.clone();
    }
    Ok(())
}

/// Regularized terminating basic hypergeometric series with three upper and
/// three lower parameters:
///
/// `sum_{k=0}^{n} z^k (q^{-n};q)_k / (q;q)_k * prod_i (a_i;q)_k (b_i q^k;q)_{n-k}`.
pub fn reg_phi_4_3<S: Scalar>(n: usize, a: &[S; 3], b: &[S; 3], q: &S, z: &S) -> Result<S> {
    check_not_root_of_unity(q, n)?;
    let q_neg_n = q.powi(-(n as i64));
    let mut sum = S::zero();
    let mut z_k = S::one();
    for k in 0..=n {
        let mut term = z_k.clone() * q_pochhammer(&q_neg_n, q, k) / q_pochhammer(q, q, k);
        let q_k = q.powi(k as i64);
        for (ai, bi) in a.iter().zip(b) {
            term = term * q_pochhammer(ai, q, k) * q_pochhammer(&(bi.clone() * q_k.clone()), q, n - k);
        }
        sum = sum + term;
        z_k = z_k * z.clone();
    }
    Ok(sum)
}

/// Normalizing constant `Z_J(h) = q^{h(h-1)/2} (q;q)_J / ((q;q)_h (q;q)_{J-h})`
/// of the fusion weights on `{0,1}^J`.
pub fn z_norm<S: Scalar>(j: usize, h: usize, q: &S) -> Result<S> {
    if h > j {
        return Err(Error::OutOfRange {
            what: "h",
            value: h as f64,
            min: 0.0,
            max: j as f64,
        });
    }
    check_not_root_of_unity(q, j)?;
    let e = (h * h.saturating_sub(1) / 2) as i64;
    Ok(q.powi(e) * q_pochhammer(q, q, j) / (q_pochhammer(q, q, h) * q_pochhammer(q, q, j - h)))
}
