//! Piecewise-linear macroscopic height profiles used for boundary data.

use crate::error::{Error, Result};

/// Continuous piecewise-linear function through sorted knots, extended
/// linearly past the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidParameter("a profile needs at least two knots".into()));
        }
        if knots.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidParameter("profile knots must be finite".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter("profile knots must be strictly increasing".into()));
        }
        Ok(Self { knots })
    }

    /// `t -> slope * t` on `[0, 1]`.
    pub fn linear(slope: f64) -> Self {
        Self {
            knots: vec![(0.0, 0.0), (1.0, slope)],
        }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.knots.len();
        match self.knots.iter().position(|&(k, _)| k > t) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => n - 2,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let (t0, v0) = self.knots[i];
        v0 + self.slope_of(i) * (t - t0)
    }

    /// Right derivative.
    pub fn derivative(&self, t: f64) -> f64 {
        self.slope_of(self.segment(t))
    }

    fn slope_of(&self, i: usize) -> f64 {
        let (t0, v0) = self.knots[i];
        let (t1, v1) = self.knots[i + 1];
        (v1 - v0) / (t1 - t0)
    }

    /// Interior knot locations.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.knots[1..self.knots.len() - 1].iter().map(|k| k.0).collect()
    }

    /// Range of slopes over all segments.
    pub fn slope_range(&self) -> (f64, f64) {
        (0..self.knots.len() - 1)
            .map(|i| self.slope_of(i))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_and_extends() {
        let p = PiecewiseLinear::new(vec![(0.0, 0.0), (1.0, -1.0), (2.0, -1.5)]).unwrap();
        assert_eq!(p.value(0.5), -0.5);
        assert_eq!(p.value(1.5), -1.25);
        assert_eq!(p.value(3.0), -2.0);
        assert_eq!(p.derivative(1.0), -0.5);
        assert_eq!(p.breakpoints(), vec![1.0]);
        assert_eq!(p.slope_range(), (-1.0, -0.5));
        assert!(PiecewiseLinear::new(vec![(0.0, 0.0), (0.0, 1.0)]).is_err());
    }
}
