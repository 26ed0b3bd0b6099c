use gbmsum::distributions::ReducedParams;
use gbmsum::moments::*;
use gbmsum::Error;
use proptest::prelude::*;

fn gbm(beta: f64, rho: f64) -> MultiplierMoments {
    MultiplierMoments::gbm(&ReducedParams::new(beta, rho, 0.0).unwrap())
}

#[test]
fn existence_follows_the_inequality() {
    let mm = gbm(1.0, -0.1);
    assert!(moment_exists(1, &mm, 0.0));
    assert!(!moment_exists(2, &mm, 0.0));
    assert!(moment_exists(7, &gbm(2.0, 0.5), 1.0));
    // p = 0: k < 1 - 2 rho / beta
    let mm = gbm(0.1, -0.2);
    for k in 1..8 {
        assert_eq!(moment_exists(k, &mm, 0.0), (k as f64) < 5.0);
    }
}

#[test]
fn first_moments() {
    let m = moments_geometric(1, &gbm(0.3, -0.1), 0.0).unwrap();
    let rho = -0.1f64;
    assert!((m[1] - rho.exp() / (1.0 - rho.exp())).abs() < 1e-12);
    let m = moments_geometric(1, &gbm(1.0, 0.0), 0.1).unwrap();
    assert!((m[1] - 10.0).abs() < 1e-12);
    assert_eq!(m[0], 1.0);
}

#[test]
fn second_moment_by_hand() {
    let m = moments_geometric(2, &gbm(0.1, -0.1), 0.0).unwrap();
    let a2 = (-0.1f64).exp();
    let mean = (-0.1f64).exp() / (1.0 - (-0.1f64).exp());
    let expected = a2 / (1.0 - a2) * (1.0 + 2.0 * mean);
    assert!((m[2] - expected).abs() < 1e-10);
    assert!((m[2] - 190.325).abs() < 1e-3);
}

#[test]
fn missing_moment_is_named() {
    assert_eq!(
        moments_geometric(3, &gbm(1.0, -0.1), 0.0),
        Err(Error::MomentDoesNotExist(2))
    );
    assert_eq!(
        moments_infinite_product_form(3, &gbm(1.0, -0.1)).unwrap_err(),
        Error::MomentDoesNotExist(2)
    );
}

#[test]
fn certain_stop_gives_lognormal_moments() {
    let mm = gbm(0.4, 0.1);
    let m = moments_geometric(5, &mm, 1.0).unwrap();
    for k in 1..=5 {
        assert!((m[k] / mm.moment(k as f64) - 1.0).abs() < 1e-14);
    }
}

#[test]
fn product_form_small_cases() {
    let mm = gbm(0.05, -0.2);
    let pf = moments_infinite_product_form(3, &mm).unwrap();
    let a1 = mm.moment(1.0);
    assert!((pf[1] - a1 / (1.0 - a1)).abs() < 1e-14);
    let rec = moments_geometric(3, &mm, 0.0).unwrap();
    for k in 1..=3 {
        assert!((pf[k] / rec[k] - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn product_form_equals_recursion(beta in 0.01f64..0.5, frac in 0.0f64..1.0) {
        // keep the fourth moment finite: rho < -3 beta / 2
        let rho = -1.5 * beta - 0.01 - frac;
        let mm = gbm(beta, rho);
        let a = moments_geometric(4, &mm, 0.0).unwrap();
        let b = moments_infinite_product_form(4, &mm).unwrap();
        for k in 1..=4 {
            prop_assert!((a[k] / b[k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn jensen(beta in 0.01f64..0.5, rho in -1.0f64..0.2, p in 0.05f64..1.0) {
        let mm = gbm(beta, rho);
        if moment_exists(2, &mm, p) {
            let m = moments_geometric(2, &mm, p).unwrap();
            prop_assert!(m[2] >= m[1] * m[1]);
        }
    }
}

#[test]
fn brownian_cumulant_reproduces_gbm() {
    let (sigma, m, tau) = (0.3f64, -0.05, 0.5);
    let levy = MultiplierMoments::levy(move |t| 0.5 * sigma * sigma * t * (t - 1.0), m, tau).unwrap();
    let g = gbm(sigma * sigma * tau, m * tau);
    for k in [0.0, 1.0, 2.5, 4.0] {
        assert!((levy.moment(k) / g.moment(k) - 1.0).abs() < 1e-14);
    }
    assert_eq!(levy.moment(0.0), 1.0);
}

#[test]
fn jump_cumulant_moments() {
    // compound Poisson jumps of size J = -0.1 at rate 2, compensated
    let (rate, j) = (2.0f64, -0.1f64);
    let kappa = move |t: f64| rate * ((t * j).exp() - 1.0 - t * j.exp_m1());
    let mm = MultiplierMoments::levy(kappa, -0.1, 1.0).unwrap();
    assert!((mm.moment(1.0) - (-0.1f64).exp()).abs() < 1e-14);
    let m = moments_geometric(2, &mm, 0.0).unwrap();
    let a = |k: f64| mm.moment(k);
    let expected = a(2.0) / (1.0 - a(2.0)) * (1.0 + 2.0 * a(1.0) / (1.0 - a(1.0)));
    assert!((m[2] / expected - 1.0).abs() < 1e-12);
    assert!(MultiplierMoments::levy(|t| t + 1.0, 0.0, 1.0).is_err());
}

#[test]
fn inverse_moment_bounds() {
    let rp = ReducedParams::infinite(1.0, 0.0).unwrap();
    assert!((inverse_moment_bound(1, &rp).unwrap() - std::f64::consts::E).abs() < 1e-14);
    let rp = ReducedParams::infinite(1.0, -0.1).unwrap();
    assert!((inverse_moment_bound(1, &rp).unwrap() - 3.004166).abs() < 1e-6);
    let l: Vec<f64> = (1..6).map(|n| inverse_moment_bound(n, &rp).unwrap().ln()).collect();
    for n in 1..5 {
        // second differences of n (n+1) / 2 are 1
        if n >= 2 {
            assert!((l[n] - 2.0 * l[n - 1] + l[n - 2] - 1.0).abs() < 1e-12);
        }
    }
    assert!(inverse_moment_bound(0, &rp).is_err());
}

#[test]
fn finite_sum_means() {
    let v = mean_finite_sum(10, 0.1, 0.1, 100.0);
    // mpmath: 100 (e^0.1 - 1) / (1 - e^-0.01)
    assert!((v - 1056.976490888824563).abs() < 1e-9, "{v}");
    assert!((mean_finite_sum(1, 0.1, 0.5, 100.0) - 100.0 * 0.05f64.exp()).abs() < 1e-12);
    assert!((mean_finite_sum(7, 0.0, 0.5, 3.0) - 21.0).abs() < 1e-12);
    let near = mean_finite_sum(7, 1e-14, 0.5, 3.0);
    assert!((near - 21.0).abs() < 1e-9);
}
