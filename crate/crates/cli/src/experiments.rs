//! The subcommand drivers. Each returns a [`Report`] holding CSV text and
//! pass/fail checks; nothing here touches the file system.

use num::Signed;
use rayon::prelude::*;
use shs6v_core::fourpoint::{
    conditional_mean_xi, conditional_m2_xi, implied_gamma2, loglog_slope, m2_closed_form_j1, scan_scale, LocalStencil,
};
use shs6v_core::sampler::{make_boundary, BoundaryDims, HeightField, RngStream, Sampler};
use shs6v_core::telegraph::{
    clt_covariance, riemann_continuum, riemann_contour_quadrature, solve_telegraph, write_xyz_csv, ConstantField,
    DiscreteCoeffs, DiscreteRiemannTable, MeanField, NoiseParams, TelegraphCoeffs, TelegraphMeanField, CONTOUR_NODES,
};
use shs6v_core::weights::{
    fused_row_with, fusion_input_weight, l1_weight, lj_weight_hypergeom, SpectralOrder, StochasticBranch,
};
use shs6v_core::{make_scaling, ModelParams, Rational, Scalar, ScalingContext, VertexConfig};

use crate::config::{ExperimentConfig, MacroBoundary};
use crate::{csv, fmt_f64, CliError, Check, Kind, OutputFile, PlotSpec, Report};

fn file(name: String, contents: String, plot: Option<PlotSpec>) -> OutputFile {
    OutputFile { name, contents, plot }
}

fn loglog(x: usize, ys: Vec<usize>) -> Option<PlotSpec> {
    Some(PlotSpec {
        x,
        ys,
        log_x: true,
        log_y: true,
    })
}

// ---------------------------------------------------------------------------
// identity-check

/// Rational parameter points of one branch for spins `(I, J)`. Large-`q`
/// points take `alpha = -f q^{1-I-J}` with `0 < f < 1`, small-`q` points
/// `alpha = -k q^{1-I-J}` with `k > 1`.
pub fn branch_points(branch: StochasticBranch, spin_i: usize, spin_j: usize, count: usize) -> Vec<(Rational, Rational)> {
    let r = Rational::from_ratio;
    let (qs, fs) = match branch {
        StochasticBranch::LargeQ => (
            [r(2, 1), r(3, 1), r(3, 2), r(5, 4), r(4, 1)],
            [r(1, 2), r(1, 3), r(2, 3), r(1, 5), r(3, 4)],
        ),
        StochasticBranch::SmallQ => (
            [r(1, 2), r(1, 3), r(2, 3), r(3, 4), r(1, 5)],
            [r(2, 1), r(3, 1), r(3, 2), r(5, 1), r(4, 3)],
        ),
    };
    let e = 1 - (spin_i + spin_j) as i64;
    (0..count)
        .map(|k| {
            let q = qs[k % qs.len()].clone();
            let f = fs[(k + k / qs.len()) % fs.len()].clone();
            let alpha = -(f * q.powi(e));
            (q, alpha)
        })
        .collect()
}

struct Suite {
    name: &'static str,
    rows: Vec<Vec<String>>,
    failures: usize,
    cases: usize,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            rows: Vec::new(),
            failures: 0,
            cases: 0,
        }
    }

    fn record(&mut self, p: &ModelParams<Rational>, pass: bool, detail: String) {
        self.cases += 1;
        if !pass {
            self.failures += 1;
        }
        self.rows.push(vec![
            self.name.to_string(),
            p.spin_i().to_string(),
            p.spin_j().to_string(),
            p.q().to_string(),
            p.alpha().to_string(),
            if pass { "PASS" } else { "FAIL" }.to_string(),
            detail,
        ]);
    }

    fn check(&self) -> Check {
        Check::new(
            self.name,
            self.failures == 0 && self.cases > 0,
            format!("{} of {} parameter points failed", self.failures, self.cases),
        )
    }
}

/// Fused row with the fusion input weights of bit strings `10...` and
/// `01...` swapped when `corrupt` is set.
fn fused_row_for_check(p: &ModelParams<Rational>, i1: usize, j1: usize, order: SpectralOrder, corrupt: bool) -> Result<Vec<Rational>, CliError> {
    let lambda = fusion_input_weight(p, j1, order)?;
    let swap = corrupt && j1 == 1 && p.spin_j() >= 2;
    Ok(fused_row_with(p, i1, j1, order, |bits: &[bool]| {
        if swap && (bits[0] || bits[1]) {
            let mut b = bits.to_vec();
            b.swap(0, 1);
            lambda(&b)
        } else {
            lambda(bits)
        }
    })?)
}

fn three_routes(p: &ModelParams<Rational>, corrupt: bool) -> Result<(bool, String), CliError> {
    let (ni, nj) = (p.spin_i(), p.spin_j());
    for i1 in 0..=ni {
        for j1 in 0..=nj {
            let up = fused_row_for_check(p, i1, j1, SpectralOrder::BottomUp, corrupt)?;
            let down = fused_row_for_check(p, i1, j1, SpectralOrder::TopDown, false)?;
            for i2 in 0..=ni {
                for j2 in 0..=nj {
                    let c = VertexConfig::new(i1, j1, i2, j2);
                    let h = lj_weight_hypergeom(p, &c)?;
                    let k = i2 * (nj + 1) + j2;
                    if h != up[k] || h != down[k] {
                        return Ok((false, format!("{c:?}: {h} / {} / {}", up[k], down[k])));
                    }
                }
            }
        }
    }
    Ok((true, String::new()))
}

fn stochastic_rows(p: &ModelParams<Rational>) -> Result<(bool, String), CliError> {
    let (ni, nj) = (p.spin_i(), p.spin_j());
    for i1 in 0..=ni {
        for j1 in 0..=nj {
            let mut sum = Rational::from_i64(0);
            for i2 in 0..=ni {
                for j2 in 0..=nj {
                    let w = lj_weight_hypergeom(p, &VertexConfig::new(i1, j1, i2, j2))?;
                    if w.is_negative() {
                        return Ok((false, format!("negative weight {w} at ({i1},{j1},{i2},{j2})")));
                    }
                    sum += w;
                }
            }
            if sum != Rational::from_i64(1) {
                return Ok((false, format!("row ({i1},{j1}) sums to {sum}")));
            }
        }
    }
    Ok((true, String::new()))
}

fn mean_xi_zero(p: &ModelParams<Rational>, range: i64) -> Result<(bool, String), CliError> {
    for h in 0..=p.spin_j() {
        for v in 0..=p.spin_i() {
            for h00 in -range..=range {
                let s = LocalStencil::new(h00, h, v);
                let m = conditional_mean_xi(p, &s)?;
                if m != Rational::from_i64(0) {
                    return Ok((false, format!("{s:?}: {m}")));
                }
            }
        }
    }
    Ok((true, String::new()))
}

fn j1_reduction(p: &ModelParams<Rational>) -> Result<(bool, String), CliError> {
    for c in VertexConfig::all(p.spin_i(), 1) {
        let h = lj_weight_hypergeom(p, &c)?;
        let d = l1_weight(p, p.alpha(), c.i1, c.j1, c.i2, c.j2)?;
        if h != d {
            return Ok((false, format!("{c:?}: {h} vs {d}")));
        }
    }
    Ok((true, String::new()))
}

fn m2_closed_forms(p: &ModelParams<Rational>, range: i64) -> Result<(bool, String), CliError> {
    for h in 0..=1 {
        for v in 0..=p.spin_i() {
            for h00 in -range..=range {
                let s = LocalStencil::new(h00, h, v);
                let (got, want) = (conditional_m2_xi(p, &s)?, m2_closed_form_j1(p, &s)?);
                if got != want {
                    return Ok((false, format!("{s:?}: {got} vs {want}")));
                }
            }
        }
    }
    Ok((true, String::new()))
}

/// For `J = 1`, `h = 0` the quadratic form reduces to `gamma2 q^H Dx`; an
/// exact identity needs the same `gamma2` at `v = 1` and `v = 2`.
fn no_exact_gamma(p: &ModelParams<Rational>) -> Result<(bool, String), CliError> {
    let g1 = implied_gamma2(p, 1)?;
    let g2 = implied_gamma2(p, 2)?;
    let gap = (g1.clone() - g2.clone()).abs();
    Ok((gap != Rational::from_i64(0), format!("gamma2(v=1) = {g1}, gamma2(v=2) = {g2}, gap {}", gap.to_f64())))
}

pub fn run_identity_check(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let opts = &cfg.identity;
    let mut suites = [
        Suite::new("martingale_mean_zero"),
        Suite::new("three_route_agreement"),
        Suite::new("stochastic_rows"),
        Suite::new("j1_reduction"),
        Suite::new("m2_closed_form_j1"),
        Suite::new("no_exact_gamma_i2_j1"),
    ];
    for spin_i in 1..=opts.max_spin {
        for spin_j in 1..=opts.max_spin {
            for branch in [StochasticBranch::LargeQ, StochasticBranch::SmallQ] {
                for (q, alpha) in branch_points(branch, spin_i, spin_j, opts.points_per_branch) {
                    let p = ModelParams::new(q, alpha, spin_i, spin_j)?;
                    let (ok, d) = mean_xi_zero(&p, opts.h00_range)?;
                    suites[0].record(&p, ok, d);
                    let (ok, d) = three_routes(&p, opts.corrupt)?;
                    suites[1].record(&p, ok, d);
                    let (ok, d) = stochastic_rows(&p)?;
                    suites[2].record(&p, ok, d);
                    if spin_j == 1 {
                        let (ok, d) = j1_reduction(&p)?;
                        suites[3].record(&p, ok, d);
                        let (ok, d) = m2_closed_forms(&p, opts.h00_range)?;
                        suites[4].record(&p, ok, d);
                        if spin_i == 2 {
                            let (ok, d) = no_exact_gamma(&p)?;
                            suites[5].record(&p, ok, d);
                        }
                    }
                }
            }
        }
    }
    let mut report = Report::new(Kind::IdentityCheck);
    let rows = suites.iter().flat_map(|s| s.rows.iter().cloned());
    report.files.push(file(
        format!("{}.csv", cfg.stem(Kind::IdentityCheck)),
        csv(&["identity", "I", "J", "q", "alpha", "status", "detail"], rows),
        None,
    ));
    report.checks = suites.iter().map(Suite::check).collect();
    Ok(report)
}

// ---------------------------------------------------------------------------
// weights-dump

pub fn run_weights_dump(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let (ni, nj) = (cfg.spin_i, cfg.spin_j);
    let mut report = Report::new(Kind::WeightsDump);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    let mut exact_ok = true;
    let mut nonneg = true;
    let header: &[&str];
    match &cfg.weights {
        Some(point) => {
            let (q, alpha) = point.parse()?;
            let p = ModelParams::new(q, alpha, ni, nj)?;
            header = &["i1", "j1", "i2", "j2", "weight", "weight_exact"];
            for i1 in 0..=ni {
                for j1 in 0..=nj {
                    let mut sum = Rational::from_i64(0);
                    for i2 in 0..=ni {
                        for j2 in 0..=nj {
                            let w = lj_weight_hypergeom(&p, &VertexConfig::new(i1, j1, i2, j2))?;
                            nonneg &= !w.is_negative();
                            sum += w.clone();
                            rows.push(vec![
                                i1.to_string(),
                                j1.to_string(),
                                i2.to_string(),
                                j2.to_string(),
                                fmt_f64(w.to_f64()),
                                w.to_string(),
                            ]);
                        }
                    }
                    exact_ok &= sum == Rational::from_i64(1);
                }
            }
        }
        None => {
            let sc = make_scaling(cfg.l[0], cfg.beta1, cfg.beta2, ni, nj)?;
            let p = sc.params();
            header = &["i1", "j1", "i2", "j2", "weight"];
            for i1 in 0..=ni {
                for j1 in 0..=nj {
                    let row = fused_row_with(p, i1, j1, SpectralOrder::BottomUp, fusion_input_weight(p, j1, SpectralOrder::BottomUp)?)?;
                    let mut sum = 0.0;
                    for i2 in 0..=ni {
                        for j2 in 0..=nj {
                            let w = row[i2 * (nj + 1) + j2];
                            nonneg &= w >= 0.0;
                            sum += w;
                            rows.push(vec![i1.to_string(), j1.to_string(), i2.to_string(), j2.to_string(), fmt_f64(w)]);
                        }
                    }
                    worst = worst.max((sum - 1.0).abs());
                }
            }
            exact_ok = worst <= 1e-12;
        }
    }
    report.files.push(file(format!("{}.csv", cfg.stem(Kind::WeightsDump)), csv(header, rows), None));
    report.checks.push(Check::new("rows_sum_to_one", exact_ok, format!("max |row sum - 1| = {worst:e}")));
    report.checks.push(Check::new("weights_nonnegative", nonneg, String::new()));
    Ok(report)
}

// ---------------------------------------------------------------------------
// four-point-scan

pub fn run_four_point_scan(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let tol = &cfg.tolerances;
    let scans = cfg
        .l
        .par_iter()
        .map(|&l| -> Result<_, CliError> { Ok(scan_scale(&make_scaling(l, cfg.beta1, cfg.beta2, cfg.spin_i, cfg.spin_j)?)?) })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = scans.iter().map(|s| {
        let mut r = vec![s.l.to_string(), fmt_f64(s.max_remainder), fmt_f64(s.scaled_m2)];
        r.extend(s.scaled_moments.iter().map(|&m| fmt_f64(m)));
        r.push(fmt_f64(s.scaled_xi_stay));
        r.push(fmt_f64(s.scaled_xi_turn));
        r
    });
    let header = [
        "L",
        "max_remainder",
        "scaled_m2",
        "scaled_m1",
        "scaled_m2_abs",
        "scaled_m3",
        "scaled_m4",
        "scaled_m5",
        "scaled_m6",
        "scaled_xi_stay",
        "scaled_xi_turn",
    ];
    let stem = cfg.stem(Kind::FourPointScan);
    let mut report = Report::new(Kind::FourPointScan);
    report.files.push(file(format!("{stem}.csv"), csv(&header, rows), loglog(0, vec![1])));

    let pts: Vec<(f64, f64)> = scans.iter().map(|s| (s.l as f64, s.max_remainder)).collect();
    let slope = if pts.len() >= 2 { loglog_slope(&pts) } else { f64::NAN };
    report.files.push(file(
        format!("{stem}_fit.csv"),
        csv(&["slope", "target", "tolerance"], [vec![fmt_f64(slope), "-4".into(), fmt_f64(tol.slope)]]),
        None,
    ));
    report.checks.push(Check::new(
        "remainder_slope",
        (slope + 4.0).abs() <= tol.slope,
        format!("fitted slope {slope}"),
    ));
    let bounded = |name: &str, vals: Vec<f64>| {
        let first = vals[0];
        let max = vals.iter().copied().fold(0.0, f64::max);
        Check::new(
            name,
            vals.iter().all(|v| v.is_finite()) && max <= tol.moment_growth * first.max(f64::MIN_POSITIVE),
            format!("values {vals:?}"),
        )
    };
    report.checks.push(bounded("m2_times_L3_bounded", scans.iter().map(|s| s.scaled_m2).collect()));
    for ell in 1..=6 {
        report.checks.push(bounded(
            &format!("moment{ell}_times_L{}_bounded", ell + 1),
            scans.iter().map(|s| s.scaled_moments[ell - 1]).collect(),
        ));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// riemann

pub fn run_riemann(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let coeffs = TelegraphCoeffs::for_spins(cfg.spin_i, cfg.beta1, cfg.spin_j, cfg.beta2)?;
    let stem = cfg.stem(Kind::Riemann);
    let mut report = Report::new(Kind::Riemann);

    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    let mut grid = Vec::new();
    for i in 1..=5 {
        for j in 1..=5 {
            let (a, b) = (0.4 * i as f64, 0.4 * j as f64);
            let s = riemann_continuum(coeffs, a, b, 0.0, 0.0)?;
            let q = riemann_contour_quadrature(coeffs, a, b, CONTOUR_NODES);
            let rel = ((s - q) / s).abs();
            worst = worst.max(rel);
            rows.push(vec![fmt_f64(a), fmt_f64(b), fmt_f64(s), fmt_f64(q), fmt_f64(rel)]);
            grid.push((a, b, s));
        }
    }
    report.files.push(file(
        format!("{stem}_oracle.csv"),
        csv(&["a", "b", "series", "contour", "rel_delta"], rows),
        None,
    ));
    let mut buf = Vec::new();
    write_xyz_csv(&mut buf, grid).expect("writing to memory");
    report.files.push(file(format!("{stem}_grid.csv"), String::from_utf8(buf).expect("ascii"), None));
    report.checks.push(Check::new(
        "series_vs_contour",
        worst <= cfg.tolerances.riemann,
        format!("max relative delta {worst:e}"),
    ));

    // Discrete Riemann function at the scaled point against the continuum one.
    let n = cfg.grid;
    let errors = cfg
        .l
        .par_iter()
        .map(|&l| -> Result<f64, CliError> {
            let sc = make_scaling(l, cfg.beta1, cfg.beta2, cfg.spin_i, cfg.spin_j)?;
            let d = DiscreteCoeffs::new(sc.b1, sc.b2)?;
            let lf = l as f64;
            let (ma, mb) = ((cfg.domain.0 * lf).round() as usize, (cfg.domain.1 * lf).round() as usize);
            let table = DiscreteRiemannTable::new(&d, ma, mb);
            let mut worst = 0.0f64;
            for i in 0..=n {
                for j in 0..=n {
                    let ia = (cfg.domain.0 * lf * i as f64 / n as f64).round() as usize;
                    let ib = (cfg.domain.1 * lf * j as f64 / n as f64).round() as usize;
                    let cont = riemann_continuum(coeffs, ia as f64 / lf, ib as f64 / lf, 0.0, 0.0)?;
                    worst = worst.max((table.get(ia, ib) - cont).abs());
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>, _>>()?;
    report.files.push(file(
        format!("{stem}_discrete.csv"),
        csv(&["L", "max_error"], cfg.l.iter().zip(&errors).map(|(l, e)| vec![l.to_string(), fmt_f64(*e)])),
        loglog(0, vec![1]),
    ));
    report.checks.push(Check::new(
        "discrete_to_continuum_monotone",
        errors.windows(2).all(|w| w[1] < w[0]),
        format!("max errors {errors:?}"),
    ));
    Ok(report)
}

// ---------------------------------------------------------------------------
// Monte Carlo helpers

/// Samples `H` on `[0, x_len] x [0, y_len]` for replica `r`.
pub fn sample_replica(
    sampler: &Sampler,
    cfg: &ExperimentConfig,
    m: &MacroBoundary,
    l: u32,
    x_len: usize,
    y_len: usize,
    seed: u64,
) -> Result<HeightField, CliError> {
    let mut rng = RngStream::new(seed);
    let chi = |t: f64| m.chi.value(t);
    let psi = |t: f64| m.psi.value(t);
    let dims = BoundaryDims {
        spin_i: cfg.spin_i,
        spin_j: cfg.spin_j,
        x_len,
        y_len,
        scale: l as f64,
    };
    let b = make_boundary(cfg.boundary.kind(&chi, &psi), dims, Some(&mut rng))?;
    Ok(sampler.sample(&b, x_len, y_len, &mut rng)?)
}

/// Seed of replica `r` in the `k`-th block of a run.
pub fn replica_seed(base: u64, block: usize, replicas: usize, r: usize) -> u64 {
    RngStream::for_replica(base, (block * replicas + r) as u64).seed()
}

/// `frak_q^h` for the configured boundary; exactly 1 for zero data.
fn mean_field(cfg: &ExperimentConfig, m: &MacroBoundary) -> Result<Box<dyn MeanField>, CliError> {
    if m.is_zero() {
        return Ok(Box::new(ConstantField(1.0)));
    }
    let frak_q = (cfg.beta1 - cfg.beta2).exp();
    let (chi, psi) = m.exp(frak_q);
    Ok(Box::new(TelegraphMeanField {
        coeffs: TelegraphCoeffs::for_spins(cfg.spin_i, cfg.beta1, cfg.spin_j, cfg.beta2)?,
        chi,
        psi,
    }))
}

/// Hydrodynamic height `h(x, y) = log_{frak_q} Q(x, y)`.
fn limit_height(cfg: &ExperimentConfig, field: &dyn MeanField, x: f64, y: f64) -> Result<f64, CliError> {
    let q = field.value(x, y)?;
    Ok(if q == 1.0 { 0.0 } else { q.ln() / (cfg.beta1 - cfg.beta2) })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// sample

pub fn run_sample(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let m = cfg.boundary.macroscopic(cfg.spin_i, cfg.spin_j)?;
    let l = cfg.l[0];
    let sc = make_scaling(l, cfg.beta1, cfg.beta2, cfg.spin_i, cfg.spin_j)?;
    let sampler = Sampler::new(sc.params())?;
    let (x_len, y_len) = lattice_extent(cfg, l);
    let seed = replica_seed(cfg.base_seed, 0, 1, 0);
    let field = sample_replica(&sampler, cfg, &m, l, x_len, y_len, seed)?;
    let mut buf = Vec::new();
    field.write_csv(&mut buf).map_err(|e| CliError::Config(e.to_string()))?;
    let mut report = Report::new(Kind::Sample);
    report.seeds.push(seed);
    report.files.push(file(
        format!("{}_L{l}.csv", cfg.stem(Kind::Sample)),
        String::from_utf8(buf).expect("ascii"),
        None,
    ));
    let inv = field.check_invariants(cfg.spin_i, cfg.spin_j);
    report.checks.push(Check::new("height_invariants", inv.is_ok(), inv.err().map(|e| e.to_string()).unwrap_or_default()));
    Ok(report)
}

fn lattice_extent(cfg: &ExperimentConfig, l: u32) -> (usize, usize) {
    let lf = l as f64;
    ((cfg.domain.0 * lf).round() as usize, (cfg.domain.1 * lf).round() as usize)
}

// ---------------------------------------------------------------------------
// lln

/// Per-`L` summary of the law of large numbers run.
#[derive(Debug, Clone, PartialEq)]
pub struct LlnRow {
    pub l: u32,
    pub mean_sup_error: f64,
    pub std_sup_error: f64,
}

pub fn run_lln(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let m = cfg.boundary.macroscopic(cfg.spin_i, cfg.spin_j)?;
    let field = mean_field(cfg, &m)?;
    let stem = cfg.stem(Kind::Lln);
    let mut report = Report::new(Kind::Lln);
    let mut out = Vec::new();
    let n = cfg.grid;

    for (block, &l) in cfg.l.iter().enumerate() {
        let sc: ScalingContext = make_scaling(l, cfg.beta1, cfg.beta2, cfg.spin_i, cfg.spin_j)?;
        let sampler = Sampler::new(sc.params())?;
        let (x_len, y_len) = lattice_extent(cfg, l);
        let lf = l as f64;
        let nodes: Vec<(usize, usize)> = (1..=n)
            .flat_map(|j| (1..=n).map(move |i| (i, j)))
            .map(|(i, j)| ((x_len * i + n / 2) / n, (y_len * j + n / 2) / n))
            .collect();
        let h: Vec<f64> = nodes
            .par_iter()
            .map(|&(x, y)| limit_height(cfg, field.as_ref(), x as f64 / lf, y as f64 / lf))
            .collect::<Result<_, _>>()?;
        let seeds: Vec<u64> = (0..cfg.replicas).map(|r| replica_seed(cfg.base_seed, block, cfg.replicas, r)).collect();
        let errors: Vec<f64> = seeds
            .par_iter()
            .map(|&seed| -> Result<f64, CliError> {
                let f = sample_replica(&sampler, cfg, &m, l, x_len, y_len, seed)?;
                Ok(nodes
                    .iter()
                    .zip(&h)
                    .map(|(&(x, y), &hv)| (f.get(x, y) as f64 / lf - hv).abs())
                    .fold(0.0, f64::max))
            })
            .collect::<Result<_, _>>()?;
        report.seeds.extend(&seeds);
        let (mean, std) = mean_std(&errors);
        out.push(LlnRow {
            l,
            mean_sup_error: mean,
            std_sup_error: std,
        });
        if block == 0 {
            let mut buf = Vec::new();
            let rows = nodes.iter().zip(&h).map(|(&(x, y), &hv)| (x as f64 / lf, y as f64 / lf, hv));
            write_xyz_csv(&mut buf, rows).expect("writing to memory");
            report.files.push(file(format!("{stem}_field.csv"), String::from_utf8(buf).expect("ascii"), None));
        }
    }

    report.files.push(file(
        format!("{stem}.csv"),
        csv(
            &["L", "mean_sup_error", "std_sup_error", "replicas"],
            out.iter().map(|r| {
                vec![r.l.to_string(), fmt_f64(r.mean_sup_error), fmt_f64(r.std_sup_error), cfg.replicas.to_string()]
            }),
        ),
        loglog(0, vec![1]),
    ));
    let means: Vec<f64> = out.iter().map(|r| r.mean_sup_error).collect();
    if m.is_zero() {
        report.checks.push(Check::new(
            "zero_boundary_exact",
            means.iter().all(|&e| e == 0.0),
            format!("mean sup-errors {means:?}"),
        ));
    } else {
        report.checks.push(Check::new(
            "monotone_decrease",
            means.windows(2).all(|w| w[1] < w[0]),
            format!("mean sup-errors {means:?}"),
        ));
        let at = |l: u32| out.iter().find(|r| r.l == l).map(|r| r.mean_sup_error);
        if let (Some(a), Some(b)) = (at(128), at(512)) {
            report.checks.push(Check::new(
                "drop_128_to_512",
                a >= cfg.tolerances.lln_drop * b,
                format!("ratio {}", a / b),
            ));
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// clt

/// Minimum replica count for a covariance estimate.
pub const MIN_CLT_REPLICAS: usize = 100;

/// Per-(L, pair) comparison of empirical and limiting covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CltRow {
    pub l: u32,
    pub p1: (f64, f64),
    pub p2: (f64, f64),
    pub empirical: f64,
    pub theoretical: f64,
    pub standard_error: f64,
    pub empirical_height: f64,
    pub theoretical_height: f64,
}

/// Sample covariance with the mean estimated from the data, and the
/// standard error `sd((a - mean a)(b - mean b)) / sqrt(n)`.
pub fn covariance_with_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let cov = prods.iter().sum::<f64>() / (n - 1.0);
    let (_, sd) = mean_std(&prods);
    (cov, sd / n.sqrt())
}

pub fn run_clt(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    if cfg.eval_points.len() < 2 {
        return Err(CliError::Config("clt needs at least two evaluation points".into()));
    }
    if cfg.replicas < MIN_CLT_REPLICAS {
        return Err(CliError::Config(format!(
            "clt needs at least {MIN_CLT_REPLICAS} replicas for a covariance estimate, got {}",
            cfg.replicas
        )));
    }
    let m = cfg.boundary.macroscopic(cfg.spin_i, cfg.spin_j)?;
    let field = mean_field(cfg, &m)?;
    let noise = NoiseParams {
        spin_i: cfg.spin_i,
        beta1: cfg.beta1,
        spin_j: cfg.spin_j,
        beta2: cfg.beta2,
    };
    let pts = &cfg.eval_points;
    let pairs: Vec<(usize, usize)> = (0..pts.len()).flat_map(|a| (a..pts.len()).map(move |b| (a, b))).collect();
    let theory: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| Ok(clt_covariance(noise, field.as_ref(), pts[a], pts[b])?.value))
        .collect::<Result<_, CliError>>()?;
    let ln_fq = cfg.beta1 - cfg.beta2;
    let height_scale: Vec<f64> = pts
        .iter()
        .map(|&(x, y)| Ok(field.value(x, y)? * ln_fq))
        .collect::<Result<_, CliError>>()?;

    let mut report = Report::new(Kind::Clt);
    let mut rows = Vec::new();
    for (block, &l) in cfg.l.iter().enumerate() {
        let sc = make_scaling(l, cfg.beta1, cfg.beta2, cfg.spin_i, cfg.spin_j)?;
        let sampler = Sampler::new(sc.params())?;
        let lf = l as f64;
        let lattice: Vec<(usize, usize)> = pts.iter().map(|&(x, y)| ((x * lf).round() as usize, (y * lf).round() as usize)).collect();
        let x_len = lattice.iter().map(|p| p.0).max().unwrap_or(0);
        let y_len = lattice.iter().map(|p| p.1).max().unwrap_or(0);
        let seeds: Vec<u64> = (0..cfg.replicas).map(|r| replica_seed(cfg.base_seed, block, cfg.replicas, r)).collect();
        let samples: Vec<Vec<f64>> = seeds
            .par_iter()
            .map(|&seed| -> Result<Vec<f64>, CliError> {
                let f = sample_replica(&sampler, cfg, &m, l, x_len, y_len, seed)?;
                Ok(lattice.iter().map(|&(x, y)| lf.sqrt() * sc.q.powi(f.get(x, y))).collect())
            })
            .collect::<Result<_, _>>()?;
        report.seeds.extend(&seeds);
        for (&(a, b), &theo) in pairs.iter().zip(&theory) {
            let xa: Vec<f64> = samples.iter().map(|s| s[a]).collect();
            let xb: Vec<f64> = samples.iter().map(|s| s[b]).collect();
            let (emp, se) = covariance_with_se(&xa, &xb);
            let scale = height_scale[a] * height_scale[b];
            rows.push(CltRow {
                l,
                p1: pts[a],
                p2: pts[b],
                empirical: emp,
                theoretical: theo,
                standard_error: se,
                empirical_height: emp / scale,
                theoretical_height: theo / scale,
            });
        }
    }
    let k = cfg.tolerances.clt_se;
    for r in &rows {
        report.checks.push(Check::new(
            format!("cov_L{}_({},{})_({},{})", r.l, r.p1.0, r.p1.1, r.p2.0, r.p2.1),
            (r.empirical - r.theoretical).abs() <= k * r.standard_error,
            format!(
                "empirical {} theoretical {} se {}",
                r.empirical, r.theoretical, r.standard_error
            ),
        ));
    }
    let var_at = |l: u32| rows.iter().find(|r| r.l == l && r.p1 == r.p2).map(|r| r.empirical);
    if let (Some(a), Some(b)) = (var_at(128), var_at(512)) {
        let (lo, hi) = cfg.tolerances.clt_ratio;
        let ratio = a / b;
        report.checks.push(Check::new(
            "variance_stable_128_512",
            ratio >= lo && ratio <= hi,
            format!("ratio {ratio}"),
        ));
    }
    report.files.push(file(
        format!("{}.csv", cfg.stem(Kind::Clt)),
        csv(
            &[
                "L",
                "x1",
                "y1",
                "x2",
                "y2",
                "empirical",
                "theoretical",
                "standard_error",
                "empirical_height",
                "theoretical_height",
            ],
            rows.iter().map(|r| {
                vec![
                    r.l.to_string(),
                    fmt_f64(r.p1.0),
                    fmt_f64(r.p1.1),
                    fmt_f64(r.p2.0),
                    fmt_f64(r.p2.1),
                    fmt_f64(r.empirical),
                    fmt_f64(r.theoretical),
                    fmt_f64(r.standard_error),
                    fmt_f64(r.empirical_height),
                    fmt_f64(r.theoretical_height),
                ]
            }),
        ),
        None,
    ));
    Ok(report)
}

/// Solves for `Q` at one point; exposed for callers that need the mean
/// field outside a full run.
pub fn mean_field_value(cfg: &ExperimentConfig, x: f64, y: f64) -> Result<f64, CliError> {
    let m = cfg.boundary.macroscopic(cfg.spin_i, cfg.spin_j)?;
    if m.is_zero() {
        return Ok(1.0);
    }
    let frak_q = (cfg.beta1 - cfg.beta2).exp();
    let (chi, psi) = m.exp(frak_q);
    let c = TelegraphCoeffs::for_spins(cfg.spin_i, cfg.beta1, cfg.spin_j, cfg.beta2)?;
    Ok(solve_telegraph(c, &chi, &psi, x, y)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_points_are_stochastic() {
        for i in 1..=3 {
            for j in 1..=3 {
                for b in [StochasticBranch::LargeQ, StochasticBranch::SmallQ] {
                    let pts = branch_points(b, i, j, 5);
                    let mut distinct = pts.clone();
                    distinct.dedup();
                    assert_eq!(distinct.len(), 5);
                    for (q, a) in pts {
                        let p = ModelParams::new(q, a, i, j).unwrap();
                        assert_eq!(p.stochastic_branch().unwrap(), b);
                    }
                }
            }
        }
    }

    #[test]
    fn covariance_estimate() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let (c, se) = covariance_with_se(&a, &a);
        assert!((c - 5.0 / 3.0).abs() < 1e-15);
        assert!(se > 0.0);
        let (c, se) = covariance_with_se(&[1.0; 4], &a);
        assert_eq!((c, se), (0.0, 0.0));
    }
}
