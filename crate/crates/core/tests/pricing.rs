use gbmsum::density::{solve_geometric, Grid, GridDensity, SolveOptions};
use gbmsum::distributions::{multiplier_pdf, ReducedParams};
use gbmsum::mc::{simulate_sum, Horizon, McConfig};
use gbmsum::pricing::*;
use gbmsum::Error;

fn vecer(n: u32, s0: f64) -> AsianSpec {
    AsianSpec {
        s0,
        strike: 100.0,
        rate: 0.1,
        dividend: 0.0,
        sigma: 0.4,
        maturity: 1.0,
        n_fixings: n,
    }
}

#[test]
fn single_fixing_is_the_multiplier() {
    let rp = ReducedParams::new(0.2, 0.05, 0.0).unwrap();
    let grid = finite_sum_grid(1, &rp).unwrap();
    let (f, rep) = finite_sum_density(1, &rp, &grid).unwrap();
    let exact = GridDensity::from_fn(grid, |x| multiplier_pdf(x, &rp));
    assert_eq!(f.values, exact.values);
    assert!(rep.normalization_drift < 1e-10);
    let d = finite_sum_density_derivative_form(1, &rp, &grid).unwrap();
    assert_eq!(d.density.values, exact.values);
}

#[test]
fn derivative_form_agrees_with_operator_powers() {
    for &(beta, rho) in &[(0.1, 0.0), (0.3, -0.1), (0.05, 0.1)] {
        let rp = ReducedParams::new(beta, rho, 0.0).unwrap();
        let grid = finite_sum_grid(5, &rp).unwrap();
        for n in 1..=5 {
            let (a, _) = finite_sum_density(n, &rp, &grid).unwrap();
            let b = finite_sum_density_derivative_form(n, &rp, &grid).unwrap();
            assert!(a.sup_distance(&b.density).unwrap() <= 1e-6, "beta={beta} n={n}");
            assert!(!b.cancellation_warning);
        }
    }
}

#[test]
fn finite_sum_mean_is_exact() {
    let spec = vecer(10, 100.0);
    let rp = spec.reduced().unwrap();
    let (f, rep) = finite_sum_density(10, &rp, &spec.grid().unwrap()).unwrap();
    let exact = gbmsum::moments::mean_finite_sum(10, 0.1, 0.1, 1.0);
    assert!((f.mean().unwrap() / exact - 1.0).abs() < 1e-8);
    assert!(rep.normalization_drift <= 10.0 * rep.quadrature_bound);
}

#[test]
fn reference_price_samples() {
    for &(n, s0, c) in &[(10, 100.0, 12.0424), (250, 95.0, 8.4006), (50, 105.0, 14.4611)] {
        let p = asian_call(&vecer(n, s0)).unwrap();
        assert!((p.price - c).abs() < 5e-3, "n={n} s0={s0}: {}", p.price);
        assert!(!p.truncation_warning);
    }
}

#[test]
fn parity_holds_with_discrete_mean() {
    let g = put_call_parity_gap(&vecer(50, 105.0)).unwrap();
    assert!(g.gap.abs() <= 1e-4, "{g:?}");
    // the continuous-average mean is off at O(tau)
    assert!(g.gap_continuous_mean.abs() > 1e-2);
}

#[test]
fn zero_strike() {
    let spec = AsianSpec {
        strike: 0.0,
        ..vecer(25, 100.0)
    };
    let pricer = AsianPricer::new(&spec).unwrap();
    assert_eq!(pricer.put(0.0).unwrap().price, 0.0);
    let c = pricer.call(0.0).unwrap().price;
    let expected = (-0.1f64).exp() * spec.mean_average();
    assert!((c - expected).abs() < 1e-8 * expected);
    assert!(put_call_parity_gap(&spec).unwrap().gap.abs() < 1e-8);
}

#[test]
fn vanishing_volatility_limit() {
    let spec = AsianSpec {
        sigma: 1e-3,
        ..vecer(10, 100.0)
    };
    let c = asian_call(&spec).unwrap().price;
    let det = (-0.1f64).exp() * (spec.mean_average() - spec.strike).max(0.0);
    assert!((c - det).abs() < 1e-3 * det, "{c} vs {det}");
}

#[test]
fn no_arbitrage_shape() {
    let pricer = AsianPricer::new(&vecer(25, 100.0)).unwrap();
    let ks: Vec<f64> = (0..9).map(|i| 80.0 + 5.0 * i as f64).collect();
    let c: Vec<f64> = ks.iter().map(|&k| pricer.call(k).unwrap().price).collect();
    for i in 1..c.len() {
        assert!(c[i] < c[i - 1]);
    }
    for i in 1..c.len() - 1 {
        assert!(c[i - 1] - 2.0 * c[i] + c[i + 1] > 0.0);
    }
    let low = asian_call(&AsianSpec { sigma: 0.3, ..vecer(25, 100.0) }).unwrap().price;
    assert!(low < c[4]);
}

#[test]
fn spec_validation() {
    assert!(AsianSpec { n_fixings: 0, ..vecer(10, 100.0) }.validate().is_err());
    assert!(AsianSpec { s0: -1.0, ..vecer(10, 100.0) }.validate().is_err());
    let spec = AsianSpec { dividend: 0.03, ..vecer(10, 100.0) };
    assert!((spec.drift() - 0.07).abs() < 1e-15);
    assert!((spec.kappa() - 10.0).abs() < 1e-15);
}

#[test]
fn mixture_point_mass_and_linearity() {
    let rp = ReducedParams::new(0.2, 0.0, 0.0).unwrap();
    let grid = finite_sum_grid(6, &rp).unwrap();
    let mut w = vec![0.0; 6];
    w[3] = 1.0;
    let mix = mixture_density(&w, &rp, &grid).unwrap();
    let (f4, _) = finite_sum_density(4, &rp, &grid).unwrap();
    assert!(mix.sup_distance(&f4).unwrap() < 1e-15);

    let w = [0.0, 0.3, 0.0, 0.0, 0.0, 0.7];
    let mix = mixture_density(&w, &rp, &grid).unwrap();
    let (f2, _) = finite_sum_density(2, &rp, &grid).unwrap();
    let (f6, _) = finite_sum_density(6, &rp, &grid).unwrap();
    let want = 0.3 * f2.mean().unwrap() + 0.7 * f6.mean().unwrap();
    assert!((mix.mean().unwrap() - want).abs() < 1e-10);
    assert!(mixture_density(&[0.5, 0.6], &rp, &grid).is_err());
}

#[test]
fn geometric_mixture_matches_stopped_solution() {
    let rp = ReducedParams::new(1.0, 0.0, 0.1).unwrap();
    let (g, rep) = solve_geometric(&rp, &SolveOptions::default()).unwrap();
    let grid = Grid::covering(rep.h, rep.u_max).unwrap();
    let w = MortalityModel::Geometric { p: 0.1 }.horizon_weights(2000).unwrap();
    let mix = mixture_density(&w, &rp, &grid).unwrap();
    let k = 10.0;
    assert!((mix.survival(k) - g.survival(k)).abs() < 5e-4, "{} vs {}", mix.survival(k), g.survival(k));
}

#[test]
fn horizon_weights() {
    let w = MortalityModel::Geometric { p: 0.5 }.horizon_weights(3).unwrap();
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert!((w[0] / w[1] - 2.0).abs() < 1e-14);
    let g = MortalityModel::General {
        weights: vec![1.0, 3.0, 4.0],
        cap: 2,
    };
    assert_eq!(g.horizon_weights(10).unwrap(), vec![0.25, 0.75]);
    let mk = MortalityModel::Makeham {
        law: Makeham::default(),
        age: 65.0,
    };
    let w = mk.horizon_weights(80).unwrap();
    let q65 = makeham_match_p(65.0, MatchMethod::HazardRate, &Makeham::default()).unwrap();
    assert!((w[0] - q65).abs() < 1e-6);
}

#[test]
fn stopped_sum_option() {
    let rp = ReducedParams::new(1.0, 0.0, 0.1).unwrap();
    let opts = SolveOptions::default();
    let v0 = geometric_maturity_option(&rp, 0.0, &opts).unwrap();
    assert!((v0 - 10.0).abs() < 1e-4);
    let far = geometric_maturity_option(&rp, 1e30, &opts).unwrap();
    assert!(far < 1e-3);
    let v = geometric_maturity_option(&rp, 10.0, &opts).unwrap();
    let cfg = McConfig {
        n_paths: 1_000_000,
        seed: 11,
        antithetic: true,
        horizon: Horizon::Geometric(0.1),
    };
    let mc = simulate_sum(&rp, &cfg, |x| (x - 10.0).max(0.0)).unwrap();
    assert!((mc.value - v).abs() < 3.0 * mc.std_error, "{v} vs {mc:?}");

    // mean-infinite tail
    let heavy = ReducedParams::new(1.0, 0.3, 0.05).unwrap();
    assert!(matches!(
        geometric_maturity_option(&heavy, 1.0, &opts),
        Err(Error::DivergentExpectation { .. })
    ));
}

#[test]
fn makeham_calibration() {
    let law = Makeham::default();
    let p1 = makeham_match_p(65.0, MatchMethod::LifeExpectancy, &law).unwrap();
    assert!((p1 - 0.06443).abs() < 5e-5, "{p1}");
    let p2 = makeham_match_p(65.0, MatchMethod::HazardRate, &law).unwrap();
    assert!((p2 - 0.02132).abs() < 5e-5, "{p2}");
    assert!(matches!(
        makeham_match_p(65.0, MatchMethod::HazardLiteral, &law),
        Err(Error::NoRoot(_))
    ));
    // a hazard small enough for the literal equation to have a root
    let mild = Makeham { a: 1e-4, b: 1e-7, beta: 0.05 };
    let p = makeham_match_p(10.0, MatchMethod::HazardLiteral, &mild).unwrap();
    assert!((p * (1.0 - p).powf(10.0) - mild.hazard(10.0)).abs() < 1e-14);

    let none = Makeham { a: 0.0, b: 0.0, beta: 0.0921 };
    assert!(makeham_match_p(65.0, MatchMethod::LifeExpectancy, &none).is_err());
    assert!(makeham_match_p(150.0, MatchMethod::LifeExpectancy, &law).is_err());
}

#[test]
fn prices_agree_with_monte_carlo() {
    for &n in &[10u32, 25, 50, 125] {
        for &s0 in &[95.0, 100.0, 105.0] {
            let spec = vecer(n, s0);
            let price = asian_call(&spec).unwrap().price;
            let rp = spec.reduced().unwrap();
            let kappa = spec.kappa();
            let scale = (-0.1f64).exp() * s0 / n as f64;
            let cfg = McConfig {
                n_paths: 1_000_000,
                seed: 2024 + n as u64,
                antithetic: true,
                horizon: Horizon::Fixed(n),
            };
            let mc = simulate_sum(&rp, &cfg, |x| scale * (x - kappa).max(0.0)).unwrap();
            assert!(
                (mc.value - price).abs() < 3.0 * mc.std_error,
                "n={n} s0={s0}: {price} vs {mc:?}"
            );
        }
    }
}
