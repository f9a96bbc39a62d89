//! The scaling regime `q = e^{(beta1 - beta2)/L}`,
//! `(1 + alpha q^J)/(1 + alpha) = e^{-J beta2 / L}`, under which
//! direction-changing vertices become `O(1/L)`-rare.

use crate::error::{Error, Result};
use crate::weights::{fused_row, ModelParams, SpectralOrder};

/// Scan limit for the smallest admissible `L`.
const L_SCAN_LIMIT: u32 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingContext {
    pub l: u32,
    pub beta1: f64,
    pub beta2: f64,
    pub spin_i: usize,
    pub spin_j: usize,
    pub q: f64,
    pub alpha: f64,
    pub nu: f64,
    pub b1: f64,
    pub b2: f64,
    /// `e^{beta1 - beta2}`, the macroscopic base with `q = frak_q^{1/L}`.
    pub frak_q: f64,
    /// Smallest `L` at which the weights are stochastic for these
    /// `(beta1, beta2, I, J)`.
    pub l_min: u32,
    params: ModelParams<f64>,
}

struct Raw {
    q: f64,
    alpha: f64,
    nu: f64,
    b1: f64,
    b2: f64,
}

fn raw_parameters(l: u32, beta1: f64, beta2: f64, spin_i: usize, spin_j: usize) -> Raw {
    let l = l as f64;
    let jj = spin_j as f64;
    let q = ((beta1 - beta2) / l).exp();
    // alpha = (c - 1) / (q^J - c), c = e^{-J beta2 / L}, rewritten with expm1
    // so both numerator and denominator keep full relative precision.
    let c = (-jj * beta2 / l).exp();
    let alpha = (-jj * beta2 / l).exp_m1() / (c * (jj * beta1 / l).exp_m1());
    let nu = (-(spin_i as f64) * (beta1 - beta2) / l).exp();
    let b1 = (alpha + nu) / (1.0 + alpha);
    Raw { q, alpha, nu, b1, b2: c }
}

fn stochastic_at(raw: &Raw, spin_i: usize, spin_j: usize) -> std::result::Result<(), String> {
    let threshold = raw.q.powi(1 - (spin_i + spin_j) as i32);
    if raw.q < 1.0 {
        if raw.alpha < -threshold {
            Ok(())
        } else {
            Err(format!(
                "branch q < 1 needs alpha < -q^(-I-J+1) = {}, got alpha = {}",
                -threshold, raw.alpha
            ))
        }
    } else if -threshold < raw.alpha && raw.alpha < 0.0 {
        Ok(())
    } else {
        Err(format!(
            "branch q > 1 needs -q^(-I-J+1) = {} < alpha < 0, got alpha = {}",
            -threshold, raw.alpha
        ))
    }
}

/// Smallest `L >= 1` at which the scaled weights are stochastic.
pub fn stochastic_threshold(beta1: f64, beta2: f64, spin_i: usize, spin_j: usize) -> Option<u32> {
    (1..=L_SCAN_LIMIT).find(|&l| stochastic_at(&raw_parameters(l, beta1, beta2, spin_i, spin_j), spin_i, spin_j).is_ok())
}

/// Maps `(L, beta1, beta2, I, J)` to model parameters.
pub fn make_scaling(l: u32, beta1: f64, beta2: f64, spin_i: usize, spin_j: usize) -> Result<ScalingContext> {
    if !(beta1 > 0.0 && beta2 > 0.0 && beta1.is_finite() && beta2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "beta1 and beta2 must be positive, got {beta1}, {beta2}"
        )));
    }
    if beta1 == beta2 {
        return Err(Error::InvalidParameter("beta1 = beta2 gives the degenerate q = 1".into()));
    }
    if l == 0 || spin_i == 0 || spin_j == 0 {
        return Err(Error::InvalidParameter(format!(
            "L, I, J must be positive, got L={l}, I={spin_i}, J={spin_j}"
        )));
    }
    let raw = raw_parameters(l, beta1, beta2, spin_i, spin_j);
    let l_min = stochastic_threshold(beta1, beta2, spin_i, spin_j).unwrap_or(u32::MAX);
    if let Err(why) = stochastic_at(&raw, spin_i, spin_j) {
        return Err(Error::NotStochastic(format!("L = {l} is below L_min = {l_min}: {why}")));
    }
    let params = ModelParams::new(raw.q, raw.alpha, spin_i, spin_j)?;
    Ok(ScalingContext {
        l,
        beta1,
        beta2,
        spin_i,
        spin_j,
        q: raw.q,
        alpha: raw.alpha,
        nu: raw.nu,
        b1: raw.b1,
        b2: raw.b2,
        frak_q: (beta1 - beta2).exp(),
        l_min,
        params,
    })
}

impl ScalingContext {
    pub fn params(&self) -> &ModelParams<f64> {
        &self.params
    }

    pub fn l_f64(&self) -> f64 {
        self.l as f64
    }

    /// `(|b1 - (1 - I beta1/L)| L^2, |b2 - (1 - J beta2/L)| L^2)`.
    pub fn expansion_check(&self) -> (f64, f64) {
        let l = self.l_f64();
        let dev_b1 = (self.b1 - (1.0 - self.spin_i as f64 * self.beta1 / l)).abs() * l * l;
        let dev_b2 = (self.b2 - (1.0 - self.spin_j as f64 * self.beta2 / l)).abs() * l * l;
        (dev_b1, dev_b2)
    }

    /// `max |L^{(J)}(c) - 1{i1 = i2, j1 = j2}| * L` over all configurations.
    pub fn diagonal_dominance(&self) -> Result<f64> {
        let width = self.spin_j + 1;
        let mut worst: f64 = 0.0;
        for i1 in 0..=self.spin_i {
            for j1 in 0..=self.spin_j {
                let row = fused_row(&self.params, i1, j1, SpectralOrder::BottomUp)?;
                for (idx, w) in row.iter().enumerate() {
                    let (i2, j2) = (idx / width, idx % width);
                    let target = if (i2, j2) == (i1, j1) { 1.0 } else { 0.0 };
                    worst = worst.max((w - target).abs());
                }
            }
        }
        Ok(worst * self.l_f64())
    }
}
