use proptest::prelude::*;
use shs6v_core::profile::PiecewiseLinear;
use shs6v_core::telegraph::{
    clt_covariance, riemann_continuum, riemann_contour_quadrature, solve_discrete_telegraph, solve_telegraph_with_tol,
    DiscreteCoeffs, DiscreteRiemannTable, ExpProfile, NoiseParams, TelegraphCoeffs, TelegraphMeanField,
};
use shs6v_core::{make_scaling, Rational, Scalar};
use shs6v_oracle::{continuum_riemann_laguerre, discrete_residual, discrete_riemann_residue, telegraph_residual};

fn rat() -> impl Strategy<Value = Rational> {
    (1i64..40, 41i64..60).prop_map(|(n, d)| Rational::from_ratio(n, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn discrete_table_equals_residue_exactly(b1 in rat(), b2 in rat()) {
        prop_assume!(b1 != b2);
        let d = DiscreteCoeffs::new(b1.clone(), b2.clone()).unwrap();
        let table = DiscreteRiemannTable::new(&d, 8, 8);
        for a in 0..=8 {
            for b in 0..=8 {
                prop_assert_eq!(table.get(a, b).clone(), discrete_riemann_residue(&b1, &b2, a, b));
            }
        }
    }

    #[test]
    fn discrete_table_matches_residue_in_binary64(b1 in 0.05f64..0.95, b2 in 0.05f64..0.95) {
        prop_assume!((b1 - b2).abs() > 0.05);
        let d = DiscreteCoeffs::new(b1, b2).unwrap();
        let table = DiscreteRiemannTable::new(&d, 8, 8);
        let exact = (Rational::from_f64(b1).unwrap(), Rational::from_f64(b2).unwrap());
        for a in 0..=8 {
            for b in 0..=8 {
                let want = discrete_riemann_residue(&exact.0, &exact.1, a, b).to_f64();
                let got = *table.get(a, b);
                prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{} {}: {} vs {}", a, b, got, want);
            }
        }
    }

    #[test]
    fn discrete_solution_satisfies_equation(
        b1 in rat(),
        b2 in rat(),
        seed in proptest::collection::vec(-9i64..10, 13 + 36),
    ) {
        prop_assume!(b1 != b2);
        let d = DiscreteCoeffs::new(b1.clone(), b2.clone()).unwrap();
        let chi: Vec<Rational> = seed[..7].iter().map(|&v| Rational::from_i64(v)).collect();
        let mut psi: Vec<Rational> = seed[6..13].iter().map(|&v| Rational::from_ratio(v, 3)).collect();
        psi[0] = chi[0].clone();
        let gv: Vec<Rational> = seed[13..].iter().map(|&v| Rational::from_ratio(v, 7)).collect();
        let g = |x: usize, y: usize| gv[(y - 1) * 6 + x - 1].clone();
        let grid = solve_discrete_telegraph(&d, &chi, &psi, &g, 6, 6).unwrap();
        for x in 0..=6 {
            prop_assert_eq!(grid.get(x, 0), &chi[x]);
            prop_assert_eq!(grid.get(0, x), &psi[x]);
        }
        for y in 0..6 {
            for x in 0..6 {
                let r = discrete_residual(|a, b| grid.get(a, b).clone(), g, &b1, &b2, x, y);
                prop_assert_eq!(r, Rational::from_i64(0));
            }
        }
    }
}

#[test]
fn continuum_series_matches_both_oracles() {
    for (b1, b2) in [(2.0, 1.0), (1.0, 3.0), (0.5, 0.6)] {
        let c = TelegraphCoeffs::new(b1, b2).unwrap();
        for i in 1..=5 {
            for j in 1..=5 {
                let (a, b) = (0.4 * i as f64, 0.4 * j as f64);
                let s = riemann_continuum(c, a, b, 0.0, 0.0).unwrap();
                let q = riemann_contour_quadrature(c, a, b, 4096);
                let l = continuum_riemann_laguerre(b1, b2, a, b);
                assert!(((s - q) / s).abs() <= 1e-10, "contour {a} {b}: {s} {q}");
                assert!(((s - l) / s).abs() <= 1e-10, "laguerre {a} {b}: {s} {l}");
            }
        }
    }
}

#[test]
fn riemann_solves_adjoint_equation() {
    // As a function of (X, Y), R satisfies the homogeneous equation.
    let (b1, b2) = (2.0, 1.0);
    let c = TelegraphCoeffs::new(b1, b2).unwrap();
    let r = |x: f64, y: f64| riemann_continuum(c, x, y, 0.0, 0.0).unwrap();
    for (x, y) in [(0.5, 0.5), (1.0, 0.3), (0.2, 1.7)] {
        let res = telegraph_residual(r, b1, b2, x, y, 1e-2);
        assert!(res.abs() < 1e-7, "({x}, {y}): {res}");
    }
}

#[test]
fn telegraph_solution_has_small_residual() {
    let (b1, b2) = (2.0, 1.0);
    let c = TelegraphCoeffs::new(b1, b2).unwrap();
    let fq = (b1 - b2).exp();
    let chi = ExpProfile {
        base: fq,
        profile: PiecewiseLinear::linear(-0.5),
    };
    let psi = ExpProfile {
        base: fq,
        profile: PiecewiseLinear::linear(0.8),
    };
    let u = |x: f64, y: f64| solve_telegraph_with_tol(c, &chi, &psi, x, y, 1e-13).unwrap();
    for x in [0.25, 0.5, 0.75] {
        for y in [0.25, 0.5, 0.75] {
            let res = telegraph_residual(u, b1, b2, x, y, 2e-2);
            assert!(res.abs() <= 1e-6, "({x}, {y}): {res}");
        }
    }
}

#[test]
fn discrete_riemann_converges_to_continuum() {
    let (beta1, beta2, spin_i, spin_j) = (2.0, 1.0, 2, 1);
    let coeffs = TelegraphCoeffs::for_spins(spin_i, beta1, spin_j, beta2).unwrap();
    let offsets = [0.1, 0.3, 0.5, 0.7, 1.0];
    let mut errors = Vec::new();
    for l in [50u32, 100, 200, 400] {
        let sc = make_scaling(l, beta1, beta2, spin_i, spin_j).unwrap();
        let d = DiscreteCoeffs::new(sc.b1, sc.b2).unwrap();
        let table = DiscreteRiemannTable::new(&d, l as usize, l as usize);
        let mut worst = 0.0f64;
        for &a in &offsets {
            for &b in &offsets {
                let (ia, ib) = ((a * l as f64).round() as usize, (b * l as f64).round() as usize);
                let cont = riemann_continuum(coeffs, a, b, 0.0, 0.0).unwrap();
                worst = worst.max((table.get(ia, ib) - cont).abs());
            }
        }
        errors.push(worst);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn packed_covariance_is_positive_and_resolved() {
    let noise = NoiseParams {
        spin_i: 1,
        beta1: 2.0,
        spin_j: 1,
        beta2: 1.0,
    };
    let fq = (noise.beta1 - noise.beta2).exp();
    let field = TelegraphMeanField {
        coeffs: noise.coeffs().unwrap(),
        chi: ExpProfile {
            base: fq,
            profile: PiecewiseLinear::linear(0.0),
        },
        psi: ExpProfile {
            base: fq,
            profile: PiecewiseLinear::linear(1.0),
        },
    };
    let var = clt_covariance(noise, &field, (1.0, 1.0), (1.0, 1.0)).unwrap();
    assert!(var.value > 0.0);
    assert!((var.value - var.previous).abs() <= 1e-6);
    let cross = clt_covariance(noise, &field, (1.0, 1.0), (1.0, 0.5)).unwrap();
    let sym = clt_covariance(noise, &field, (1.0, 0.5), (1.0, 1.0)).unwrap();
    assert_eq!(cross.value, sym.value);
}
