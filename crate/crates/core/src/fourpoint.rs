//! The local residual `xi` of the discrete telegraph equation and its exact
//! conditional moments at one vertex.
//!
//! Given `H = H(x,y)`, `h = H(x,y+1) - H(x,y)` and `v = H(x,y) - H(x+1,y)`,
//! the output of the vertex with inputs `(v, h)` determines
//! `v' = H(x,y+1) - H(x+1,y+1)` and hence
//!
//! `xi = q^H (q^{h-v'} - b1 q^h - b2 q^{-v} + b1 + b2 - 1)`.
//!
//! Moments are computed by enumerating the admissible outputs, never by
//! sampling.

use crate::error::{Error, Result};
use crate::qnum::Scalar;
use crate::scaling::ScalingContext;
use crate::weights::{row_distribution, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalStencil {
    /// `H(x, y)`.
    pub h00: i64,
    /// Horizontal lines entering the vertex.
    pub h: usize,
    /// Vertical lines entering the vertex.
    pub v: usize,
}

impl LocalStencil {
    pub fn new(h00: i64, h: usize, v: usize) -> Self {
        Self { h00, h, v }
    }

    fn check<S: Scalar>(&self, p: &ModelParams<S>) -> Result<()> {
        if self.h > p.spin_j() || self.v > p.spin_i() {
            return Err(Error::OutOfRange {
                what: if self.h > p.spin_j() { "h" } else { "v" },
                value: self.h.max(self.v) as f64,
                min: 0.0,
                max: if self.h > p.spin_j() { p.spin_j() } else { p.spin_i() } as f64,
            });
        }
        Ok(())
    }
}

/// `xi` when the vertex emits `vprime` lines upward.
pub fn xi_value<S: Scalar>(p: &ModelParams<S>, s: &LocalStencil, vprime: usize) -> Result<S> {
    s.check(p)?;
    if vprime > p.spin_i() {
        return Err(Error::OutOfRange {
            what: "v'",
            value: vprime as f64,
            min: 0.0,
            max: p.spin_i() as f64,
        });
    }
    let q = p.q();
    let (b1, b2) = (p.b1(), p.b2());
    let h = s.h as i64;
    let inner = q.powi(h - vprime as i64) - b1.clone() * q.powi(h) - b2.clone() * q.powi(-(s.v as i64)) + b1 + b2 - S::one();
    Ok(q.powi(s.h00) * inner)
}

/// Pairs `(probability, xi)` over the admissible outputs.
pub fn xi_outcomes<S: Scalar>(p: &ModelParams<S>, s: &LocalStencil) -> Result<Vec<(S, S)>> {
    s.check(p)?;
    row_distribution(p, s.v, s.h)?
        .into_iter()
        .map(|((i2, _), prob)| Ok((prob, xi_value(p, s, i2)?)))
        .collect()
}

/// `E[xi | F]`; identically zero.
pub fn conditional_mean_xi<S: Scalar>(p: &ModelParams<S>, s: &LocalStencil) -> Result<S> {
    Ok(xi_outcomes(p, s)?.into_iter().fold(S::zero(), |acc, (w, xi)| acc + w * xi))
}

/// `E[xi^2 | F]`.
pub fn conditional_m2_xi<S: Scalar>(p: &ModelParams<S>, s: &LocalStencil) -> Result<S> {
    Ok(xi_outcomes(p, s)?
        .into_iter()
        .fold(S::zero(), |acc, (w, xi)| acc + w * xi.clone() * xi))
}

/// `E[|xi|^ell | F]`.
pub fn conditional_abs_moment<S: Scalar>(p: &ModelParams<S>, s: &LocalStencil, ell: u32) -> Result<S> {
    Ok(xi_outcomes(p, s)?
        .into_iter()
        .fold(S::zero(), |acc, (w, xi)| acc + w * xi.abs().powi(ell as i64)))
}

/// The telegraph-structured part of `E[xi^2 | F]`:
/// `L^{-1}(b1+b2) Dx Dy + J L^{-2}(b2-b1) b2 q^H Dx + I L^{-2}(b1-b2) b1 q^H Dy`
/// with `Dx = q^H (q^{-v} - 1)`, `Dy = q^H (q^h - 1)` and `b1`, `b2` here the
/// macroscopic rates `beta1`, `beta2`.
pub fn quadratic_main_term(sc: &ScalingContext, s: &LocalStencil) -> f64 {
    let l = sc.l_f64();
    let (beta1, beta2) = (sc.beta1, sc.beta2);
    let qh = sc.q.powi(s.h00 as i32);
    let dx = qh * (sc.q.powi(-(s.v as i32)) - 1.0);
    let dy = qh * (sc.q.powi(s.h as i32) - 1.0);
    (beta1 + beta2) * dx * dy / l
        + sc.spin_j as f64 * (beta2 - beta1) * beta2 * qh * dx / (l * l)
        + sc.spin_i as f64 * (beta1 - beta2) * beta1 * qh * dy / (l * l)
}

/// Remainder `R = E[xi^2 | F] - quadratic_main_term`, of order `L^{-4}`.
pub fn remainder_r(sc: &ScalingContext, s: &LocalStencil) -> Result<f64> {
    Ok(conditional_m2_xi(sc.params(), s)? - quadratic_main_term(sc, s))
}

/// For `J = 1`, `h = 0`, the only candidate `gamma2` in
/// `E[xi^2 | F] = gamma2 q^H Dx` at a given `v >= 1`:
/// `E[xi^2 | F] / ((q^{-v} - 1) q^{2H})` at `H = 0`.
pub fn implied_gamma2<S: Scalar>(p: &ModelParams<S>, v: usize) -> Result<S> {
    if p.spin_j() != 1 || v == 0 {
        return Err(Error::InvalidParameter("implied gamma2 needs J = 1 and v >= 1".into()));
    }
    let m2 = conditional_m2_xi(p, &LocalStencil::new(0, 0, v))?;
    Ok(m2 / (p.q().powi(-(v as i64)) - S::one()))
}

/// Closed forms of `E[xi^2 | F]` for `J = 1` and `h` in `{0, 1}`:
///
/// `h = 0`: `alpha (q-1)^2 q^{-2v} (1 - q^v)(1 + alpha q^v) q^{2H} / (1+alpha)^2`,
///
/// `h = 1`: `(q-1)^2 q^{-2(I+v)} (q^I - q^v)(alpha q^I + q^v) q^{2H} / (1+alpha)^2`.
pub fn m2_closed_form_j1<S: Scalar>(p: &ModelParams<S>, s: &LocalStencil) -> Result<S> {
    if p.spin_j() != 1 || s.h > 1 || s.v > p.spin_i() {
        return Err(Error::InvalidParameter(format!("closed form needs J = 1, h <= 1, v <= I; got {s:?}")));
    }
    let (q, alpha) = (p.q(), p.alpha());
    let one = S::one();
    let qm1 = (q.clone() - one.clone()).powi(2);
    let qv = q.powi(s.v as i64);
    let scale = q.powi(2 * s.h00) / (one.clone() + alpha.clone()).powi(2);
    let body = if s.h == 0 {
        alpha.clone() * qm1 * q.powi(-2 * s.v as i64) * (one.clone() - qv.clone()) * (one + alpha.clone() * qv)
    } else {
        let qi = q.powi(p.spin_i() as i64);
        qm1 * q.powi(-2 * (p.spin_i() + s.v) as i64) * (qi.clone() - qv.clone()) * (alpha.clone() * qi + qv)
    };
    Ok(body * scale)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Summary of the four-point scan at one `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub l: u32,
    /// `max |R|` over `h, v` and `|H| <= L`.
    pub max_remainder: f64,
    /// `max E[xi^2 | F] * L^3`.
    pub scaled_m2: f64,
    /// `max E[|xi|^ell | F] * L^{ell+1}` for `ell = 1..=6`.
    pub scaled_moments: [f64; 6],
    /// `max |xi| * L^2` over outcomes that repeat the input.
    pub scaled_xi_stay: f64,
    /// `max |xi| * L` over outcomes that change direction.
    pub scaled_xi_turn: f64,
}

/// Scans all stencils with `|H| <= L` at one scale.
pub fn scan_scale(sc: &ScalingContext) -> Result<ScanRow> {
    let p = sc.params();
    let l = sc.l_f64();
    let mut row = ScanRow {
        l: sc.l,
        max_remainder: 0.0,
        scaled_m2: 0.0,
        scaled_moments: [0.0; 6],
        scaled_xi_stay: 0.0,
        scaled_xi_turn: 0.0,
    };
    let bound = sc.l as i64;
    for h in 0..=p.spin_j() {
        for v in 0..=p.spin_i() {
            // xi scales with q^H and the second moment and remainder with
            // q^{2H}, so the maxima over |H| <= L sit at H = -L or H = L.
            let base = LocalStencil::new(0, h, v);
            let outcomes = row_distribution(p, v, h)?;
            let mut xis = Vec::with_capacity(outcomes.len());
            for ((i2, j2), prob) in &outcomes {
                xis.push((*prob, xi_value(p, &base, *i2)?, (*i2, *j2) == (v, h)));
            }
            let m2: f64 = xis.iter().map(|(w, xi, _)| w * xi * xi).sum();
            for h00 in [-bound, 0, bound] {
                let s = LocalStencil::new(h00, h, v);
                let scale = sc.q.powi(h00 as i32);
                let rem = (conditional_m2_xi(p, &s)? - quadratic_main_term(sc, &s)).abs();
                row.max_remainder = row.max_remainder.max(rem);
                row.scaled_m2 = row.scaled_m2.max(m2 * scale * scale * l.powi(3));
                for ell in 1..=6u32 {
                    let mom: f64 = xis.iter().map(|(w, xi, _)| w * (xi.abs() * scale).powi(ell as i32)).sum();
                    let slot = &mut row.scaled_moments[ell as usize - 1];
                    *slot = slot.max(mom * l.powi(ell as i32 + 1));
                }
                for (_, xi, stay) in &xis {
                    let mag = xi.abs() * scale;
                    if *stay {
                        row.scaled_xi_stay = row.scaled_xi_stay.max(mag * l * l);
                    } else {
                        row.scaled_xi_turn = row.scaled_xi_turn.max(mag * l);
                    }
                }
            }
        }
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qnum::Rational;
    use crate::scaling::make_scaling;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn xi_examples() {
        let p = ModelParams::new(r(2, 1), r(-1, 4), 1, 1).unwrap();
        assert_eq!(xi_value(&p, &LocalStencil::new(0, 0, 0), 0).unwrap(), r(0, 1));
        assert_eq!(p.b1(), r(1, 3));
        assert_eq!(p.b2(), r(2, 3));
        assert_eq!(xi_value(&p, &LocalStencil::new(0, 0, 1), 1).unwrap(), r(-1, 6));
        assert!(xi_value(&p, &LocalStencil::new(0, 0, 1), 2).is_err());
        assert!(xi_value(&p, &LocalStencil::new(0, 2, 0), 0).is_err());
    }

    #[test]
    fn mean_vanishes_exactly() {
        for (q, alpha) in [(r(2, 1), r(-1, 64)), (r(1, 2), r(-64, 1)), (r(7, 5), r(-1, 9))] {
            for i in 1..=3 {
                for j in 1..=3 {
                    let Ok(p) = ModelParams::new(q.clone(), alpha.clone(), i, j) else {
                        continue;
                    };
                    for h in 0..=j {
                        for v in 0..=i {
                            for h00 in [-2, 0, 3] {
                                let s = LocalStencil::new(h00, h, v);
                                assert_eq!(conditional_mean_xi(&p, &s).unwrap(), r(0, 1), "{i} {j} {s:?}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn six_vertex_two_outcome_mean() {
        let p = ModelParams::new(r(3, 1), r(-1, 10), 2, 1).unwrap();
        let (q, alpha, nu) = (p.q().clone(), p.alpha().clone(), p.nu().clone());
        for v in 0..=2usize {
            let s = LocalStencil::new(1, 1, v);
            let qv = q.powi(v as i64);
            let one = r(1, 1);
            let stay_right = (one.clone() - nu.clone() * qv.clone()) / (one.clone() + alpha.clone());
            let turn_up = (alpha.clone() + nu.clone() * qv) / (one + alpha.clone());
            let mean = if v < 2 {
                stay_right * xi_value(&p, &s, v + 1).unwrap() + turn_up * xi_value(&p, &s, v).unwrap()
            } else {
                turn_up * xi_value(&p, &s, v).unwrap()
            };
            assert_eq!(mean, r(0, 1));
            assert_eq!(conditional_mean_xi(&p, &s).unwrap(), r(0, 1));
        }
    }

    #[test]
    fn second_moment_closed_forms_j1() {
        for (q, alpha) in [(r(2, 1), r(-1, 16)), (r(2, 3), r(-5, 1))] {
            for i in 1..=3usize {
                let p = ModelParams::new(q.clone(), alpha.clone(), i, 1).unwrap();
                let one = r(1, 1);
                let denom = (one.clone() + alpha.clone()).powi(2);
                for v in 0..=i {
                    let qv = q.powi(v as i64);
                    for h00 in -3..=3i64 {
                        let q2h = q.powi(2 * h00);
                        let h0 = alpha.clone() * (q.clone() - one.clone()).powi(2) * q.powi(-2 * v as i64) * (one.clone() - qv.clone())
                            * (one.clone() + alpha.clone() * qv.clone())
                            / denom.clone()
                            * q2h.clone();
                        let qi = q.powi(i as i64);
                        let h1 = (q.clone() - one.clone()).powi(2) * q.powi(-2 * (i + v) as i64) * (qi.clone() - qv.clone())
                            * (alpha.clone() * qi + qv.clone())
                            / denom.clone()
                            * q2h;
                        assert_eq!(conditional_m2_xi(&p, &LocalStencil::new(h00, 0, v)).unwrap(), h0);
                        assert_eq!(conditional_m2_xi(&p, &LocalStencil::new(h00, 1, v)).unwrap(), h1);
                        assert_eq!(m2_closed_form_j1(&p, &LocalStencil::new(h00, 1, v)).unwrap(), h1);
                        assert_eq!(m2_closed_form_j1(&p, &LocalStencil::new(h00, 0, v)).unwrap(), h0);
                    }
                }
                assert_eq!(conditional_m2_xi(&p, &LocalStencil::new(0, 0, 0)).unwrap(), r(0, 1));
            }
        }
    }

    #[test]
    fn quadratic_identity_has_no_exact_gamma() {
        for (q, alpha) in [(r(2, 1), r(-1, 16)), (r(1, 3), r(-30, 1))] {
            let p = ModelParams::new(q, alpha, 2, 1).unwrap();
            assert_ne!(implied_gamma2(&p, 1).unwrap(), implied_gamma2(&p, 2).unwrap());
        }
        let p = ModelParams::new(r(2, 1), r(-1, 16), 2, 2).unwrap();
        assert!(implied_gamma2(&p, 1).is_err());
    }

    #[test]
    fn remainder_vanishes_without_lines() {
        let sc = make_scaling(200, 2.0, 1.0, 2, 2).unwrap();
        assert_eq!(remainder_r(&sc, &LocalStencil::new(5, 0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn remainder_slope() {
        for &(b1, b2) in &[(2.0, 1.0), (1.0, 2.0)] {
            for (i, j) in [(1, 1), (2, 1), (1, 3), (3, 3)] {
                let pts: Vec<(f64, f64)> = [100u32, 200, 400, 800, 1600]
                    .iter()
                    .map(|&l| {
                        let sc = make_scaling(l, b1, b2, i, j).unwrap();
                        (l as f64, scan_scale(&sc).unwrap().max_remainder)
                    })
                    .collect();
                let slope = loglog_slope(&pts);
                assert!((slope + 4.0).abs() <= 0.3, "I={i} J={j} slope {slope} {pts:?}");
            }
        }
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..6).map(|k| (k as f64, 3.0 * (k as f64).powf(-2.5))).collect();
        assert!((loglog_slope(&pts) + 2.5).abs() < 1e-12);
    }
}
