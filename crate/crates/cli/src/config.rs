//! Experiment configuration: a single JSON document per run.

use serde::{Deserialize, Serialize};
use shs6v_core::profile::PiecewiseLinear;
use shs6v_core::sampler::BoundaryKind;
use shs6v_core::telegraph::ExpProfile;
use shs6v_core::Rational;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    IdentityCheck,
    WeightsDump,
    FourPointScan,
    Riemann,
    Sample,
    Lln,
    Clt,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::IdentityCheck => "identity-check",
            Kind::WeightsDump => "weights-dump",
            Kind::FourPointScan => "four-point-scan",
            Kind::Riemann => "riemann",
            Kind::Sample => "sample",
            Kind::Lln => "lln",
            Kind::Clt => "clt",
        }
    }
}

/// Boundary data entering the quadrant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundarySpec {
    /// `J` lines enter every row from the left, none from below.
    #[default]
    Packed,
    Empty,
    Bernoulli { rho_v: f64, rho_h: f64 },
    /// Macroscopic heights `H(x, 0) / L = chi(x)` and `H(0, y) / L = psi(y)`
    /// as piecewise-linear knots.
    Profile { chi: Vec<(f64, f64)>, psi: Vec<(f64, f64)> },
}

/// Macroscopic boundary heights of a spec.
pub struct MacroBoundary {
    pub chi: PiecewiseLinear,
    pub psi: PiecewiseLinear,
}

impl MacroBoundary {
    /// `frak_q^chi`, `frak_q^psi` as boundary data of the mean field.
    pub fn exp(&self, frak_q: f64) -> (ExpProfile, ExpProfile) {
        (
            ExpProfile {
                base: frak_q,
                profile: self.chi.clone(),
            },
            ExpProfile {
                base: frak_q,
                profile: self.psi.clone(),
            },
        )
    }

    pub fn is_zero(&self) -> bool {
        self.chi.knots().iter().chain(self.psi.knots()).all(|&(_, v)| v == 0.0)
    }
}

impl BoundarySpec {
    pub fn macroscopic(&self, spin_i: usize, spin_j: usize) -> Result<MacroBoundary, CliError> {
        let (chi, psi) = match self {
            BoundarySpec::Packed => (PiecewiseLinear::linear(0.0), PiecewiseLinear::linear(spin_j as f64)),
            BoundarySpec::Empty => (PiecewiseLinear::linear(0.0), PiecewiseLinear::linear(0.0)),
            BoundarySpec::Bernoulli { rho_v, rho_h } => (
                PiecewiseLinear::linear(-(spin_i as f64) * rho_v),
                PiecewiseLinear::linear(spin_j as f64 * rho_h),
            ),
            BoundarySpec::Profile { chi, psi } => (PiecewiseLinear::new(chi.clone())?, PiecewiseLinear::new(psi.clone())?),
        };
        Ok(MacroBoundary { chi, psi })
    }

    /// Boundary family for the sampler; `chi` and `psi` are only used by profiles.
    pub fn kind<'a>(&self, chi: &'a dyn Fn(f64) -> f64, psi: &'a dyn Fn(f64) -> f64) -> BoundaryKind<'a> {
        match *self {
            BoundarySpec::Packed => BoundaryKind::Packed,
            BoundarySpec::Empty => BoundaryKind::Empty,
            BoundarySpec::Bernoulli { rho_v, rho_h } => BoundaryKind::Bernoulli { rho_v, rho_h },
            BoundarySpec::Profile { .. } => BoundaryKind::FromProfile { chi, psi },
        }
    }
}

/// Pass/fail thresholds. These are artifact choices: the limit theorems
/// state convergence without rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Required ratio of LLN sup-errors between the L = 128 and L = 512 runs.
    pub lln_drop: f64,
    /// Allowed distance of empirical from theoretical covariance, in standard errors.
    pub clt_se: f64,
    /// Allowed stability ratio band of the empirical variance across L.
    pub clt_ratio: (f64, f64),
    /// Relative tolerance of series against contour quadrature.
    pub riemann: f64,
    /// Allowed deviation of the remainder slope from -4.
    pub slope: f64,
    /// Growth factor above which a scaled moment counts as unbounded.
    pub moment_growth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lln_drop: 1.5,
            clt_se: 3.0,
            clt_ratio: (0.7, 1.3),
            riemann: 1e-10,
            slope: 0.3,
            moment_growth: 4.0,
        }
    }
}

/// Options of the exact identity suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentityOptions {
    pub max_spin: usize,
    pub points_per_branch: usize,
    pub h00_range: i64,
    /// Perturbs one fusion input weight to check that the suite notices.
    pub corrupt: bool,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        Self {
            max_spin: 3,
            points_per_branch: 5,
            h00_range: 3,
            corrupt: false,
        }
    }
}

/// Exact parameter point, written as rationals such as `"2"` or `"-1/64"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactPoint {
    pub q: String,
    pub alpha: String,
}

impl ExactPoint {
    pub fn parse(&self) -> Result<(Rational, Rational), CliError> {
        Ok((parse_rational(&self.q)?, parse_rational(&self.alpha)?))
    }
}

pub fn parse_rational(s: &str) -> Result<Rational, CliError> {
    s.trim()
        .parse::<Rational>()
        .map_err(|e| CliError::Config(format!("cannot parse rational {s:?}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    #[serde(rename = "L")]
    pub l: Vec<u32>,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(rename = "I")]
    pub spin_i: usize,
    #[serde(rename = "J")]
    pub spin_j: usize,
    pub boundary: BoundarySpec,
    pub replicas: usize,
    pub base_seed: u64,
    /// Macroscopic points `(x, y)`.
    pub eval_points: Vec<(f64, f64)>,
    /// LLN grid: `grid x grid` points on `(0, X] x (0, Y]`.
    pub grid: usize,
    /// Macroscopic rectangle `(X, Y)`.
    pub domain: (f64, f64),
    /// Output file stem; defaults to the subcommand name.
    pub output: Option<String>,
    pub tolerances: Tolerances,
    pub identity: IdentityOptions,
    /// Exact point for `weights-dump`; without it the scaled point at the first `L` is used.
    pub weights: Option<ExactPoint>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            l: vec![64, 128, 256, 512],
            beta1: 2.0,
            beta2: 1.0,
            spin_i: 1,
            spin_j: 1,
            boundary: BoundarySpec::Packed,
            replicas: 100,
            base_seed: 1,
            eval_points: vec![(1.0, 1.0), (1.0, 0.5)],
            grid: 8,
            domain: (1.0, 1.0),
            output: None,
            tolerances: Tolerances::default(),
            identity: IdentityOptions::default(),
            weights: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.l.is_empty() {
            return bad("L list is empty".into());
        }
        if self.l.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("L list must be strictly increasing, got {:?}", self.l));
        }
        if self.l[0] == 0 {
            return bad("L must be positive".into());
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.spin_i == 0 || self.spin_j == 0 {
            return bad(format!("spins must be positive, got I={}, J={}", self.spin_i, self.spin_j));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b.is_finite() && b > 0.0) {
                return bad(format!("{name} = {b} must be positive and finite"));
            }
        }
        if self.grid == 0 {
            return bad("grid must be at least 1".into());
        }
        let (dx, dy) = self.domain;
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return bad(format!("domain {:?} must be positive", self.domain));
        }
        for &(x, y) in &self.eval_points {
            if !(x >= 0.0 && y >= 0.0 && x.is_finite() && y.is_finite()) {
                return bad(format!("evaluation point ({x}, {y}) must be nonnegative"));
            }
        }
        if let Some(stem) = &self.output {
            if stem.is_empty() || stem.contains(['/', '\\']) {
                return bad(format!("output stem {stem:?} must be a plain file name"));
            }
        }
        self.boundary.macroscopic(self.spin_i, self.spin_j)?;
        Ok(())
    }

    pub fn stem(&self, kind: Kind) -> String {
        self.output.clone().unwrap_or_else(|| kind.name().to_string())
    }
}
