//! Model parameters and the closed-form reference laws: the log-normal
//! multiplier, the inverse-Gamma law of the infinite time integral and Yor's
//! Beta/Gamma ratio law of the integral up to an exponential time.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad;
use crate::specfun::{gamma, gamma_p, gamma_q, hyp1f1, ln_gamma};

/// Physical parameters: volatility, drift, time step and mortality intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sigma: f64,
    pub m: f64,
    pub tau: f64,
    #[serde(default)]
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(sigma: f64, m: f64, tau: f64, lambda: f64) -> Result<Self> {
        let params = Self { sigma, m, tau, lambda };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return domain(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return domain(format!("tau must be positive, got {}", self.tau));
        }
        if !self.m.is_finite() {
            return domain("drift must be finite");
        }
        if !(self.lambda >= 0.0) {
            return domain(format!("lambda must be non-negative, got {}", self.lambda));
        }
        Ok(())
    }

    pub fn reduce(&self) -> Result<ReducedParams> {
        reduce(self)
    }
}

/// Dimensionless parameters `beta = sigma^2 tau`, `rho = m tau`, `p = lambda tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    pub beta: f64,
    pub rho: f64,
    #[serde(default)]
    pub p: f64,
}

impl ReducedParams {
    pub fn new(beta: f64, rho: f64, p: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return domain(format!("beta must be positive, got {beta}"));
        }
        if !rho.is_finite() {
            return domain("rho must be finite");
        }
        if !(0.0..=1.0).contains(&p) {
            return domain(format!("p must lie in [0, 1], got {p}"));
        }
        Ok(Self { beta, rho, p })
    }

    /// Perpetuity parameters (no stopping).
    pub fn infinite(beta: f64, rho: f64) -> Result<Self> {
        Self::new(beta, rho, 0.0)
    }

    /// Whether the infinite sum converges, i.e. `rho < beta / 2`.
    pub fn perpetuity_feasible(&self) -> bool {
        self.rho < 0.5 * self.beta
    }

    pub fn with_p(self, p: f64) -> Result<Self> {
        Self::new(self.beta, self.rho, p)
    }
}

/// Maps physical parameters to `(sigma^2 tau, m tau, lambda tau)`.
pub fn reduce(params: &ModelParams) -> Result<ReducedParams> {
    params.validate()?;
    let p = params.lambda * params.tau;
    if p > 1.0 {
        return domain(format!("lambda * tau = {p} exceeds 1"));
    }
    ReducedParams::new(params.sigma * params.sigma * params.tau, params.m * params.tau, p)
}

/// Log-normal density of the one-period multiplier.
pub fn multiplier_pdf(x: f64, rp: &ReducedParams) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    let z = x.ln() - (rp.rho - 0.5 * rp.beta);
    (-z * z / (2.0 * rp.beta)).exp() / (x * (2.0 * std::f64::consts::PI * rp.beta).sqrt())
}

/// Log of the multiplier density, finite where the density itself underflows.
pub fn multiplier_ln_pdf(x: f64, rp: &ReducedParams) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    let z = x.ln() - (rp.rho - 0.5 * rp.beta);
    -z * z / (2.0 * rp.beta) - x.ln() - 0.5 * (2.0 * std::f64::consts::PI * rp.beta).ln()
}

fn inv_gamma_shape(sigma: f64, m: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    let s2 = sigma * sigma;
    if m >= 0.5 * s2 {
        return Err(Error::Infeasible(format!(
            "infinite integral diverges for m = {m} >= sigma^2/2 = {}",
            0.5 * s2
        )));
    }
    Ok(1.0 - 2.0 * m / s2)
}

/// Inverse-Gamma density of the infinite time integral, shape `1 - 2m/sigma^2`,
/// scale `2/sigma^2`.
pub fn inv_gamma_pdf(z: f64, sigma: f64, m: f64) -> Result<f64> {
    let a = inv_gamma_shape(sigma, m)?;
    if !(z > 0.0) {
        return Ok(0.0);
    }
    let s = 2.0 / (sigma * sigma);
    let ln = a * s.ln() - (a + 1.0) * z.ln() - ln_gamma(a) - s / z;
    Ok(ln.exp())
}

/// `P(Y < x)` for the inverse-Gamma law.
pub fn inv_gamma_cdf(x: f64, sigma: f64, m: f64) -> Result<f64> {
    let a = inv_gamma_shape(sigma, m)?;
    if !(x > 0.0) {
        return Ok(0.0);
    }
    gamma_q(a, 2.0 / (sigma * sigma * x))
}

/// `P(Y > x)` for the inverse-Gamma law, without cancellation in the tail.
pub fn inv_gamma_survival(x: f64, sigma: f64, m: f64) -> Result<f64> {
    let a = inv_gamma_shape(sigma, m)?;
    if !(x > 0.0) {
        return Ok(1.0);
    }
    gamma_p(a, 2.0 / (sigma * sigma * x))
}

/// Shapes of the Beta(1, alpha) numerator and Gamma(beta_g) denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YorParams {
    pub alpha: f64,
    pub beta_g: f64,
}

pub fn yor_params(sigma: f64, m: f64, lambda: f64) -> Result<YorParams> {
    if !(sigma > 0.0) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    if !(lambda >= 0.0) {
        return domain(format!("lambda must be non-negative, got {lambda}"));
    }
    let s2 = sigma * sigma;
    let d = 2.0 * m - s2;
    let root = (d * d + 8.0 * lambda * s2).sqrt();
    Ok(YorParams {
        alpha: (d + root) / (2.0 * s2),
        beta_g: (-d + root) / (2.0 * s2),
    })
}

/// Density of `B(1, alpha) / G(beta)` in its standard scaling.
pub fn yor_std_pdf(y: f64, yp: &YorParams) -> Result<f64> {
    let YorParams { alpha, beta_g: b } = *yp;
    if !(alpha > 0.0 && b > 0.0) {
        return domain(format!("Yor law needs alpha, beta > 0, got ({alpha}, {b})"));
    }
    if !(y > 0.0) {
        return Ok(0.0);
    }
    let c = alpha + b + 1.0;
    let pref = (alpha.ln() + b.ln() + ln_gamma(alpha) - ln_gamma(c) - (b + 1.0) * y.ln()).exp();
    Ok(pref * hyp1f1(b + 1.0, c, -1.0 / y)?)
}

/// Upper tail of the standard Yor law by term-wise integration of the
/// convergent expansion of the density in powers of `1/y`.
fn yor_std_tail_series(y: f64, yp: &YorParams) -> f64 {
    let YorParams { alpha, beta_g: b } = *yp;
    let c = alpha + b + 1.0;
    let k0 = (alpha.ln() + b.ln() + ln_gamma(alpha) - ln_gamma(c) - b * y.ln()).exp();
    // term_k = (b+1)_k / ((c)_k k!) (-1/y)^k / (b + k)
    let mut coef = 1.0;
    let mut sum = 1.0 / b;
    for k in 0..400 {
        let kf = k as f64;
        coef *= -(b + 1.0 + kf) / ((c + kf) * (kf + 1.0) * y);
        let term = coef / (b + kf + 1.0);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    k0 * sum
}

const YOR_SWITCH: f64 = 12.0;

/// `P(Y > y)` for the standard Yor law.
pub fn yor_std_survival(y: f64, yp: &YorParams) -> Result<f64> {
    if !(yp.alpha > 0.0 && yp.beta_g > 0.0) {
        return domain(format!(
            "Yor law needs alpha, beta > 0, got ({}, {})",
            yp.alpha, yp.beta_g
        ));
    }
    if !(y > 0.0) {
        return Ok(1.0);
    }
    if y >= YOR_SWITCH {
        return Ok(yor_std_tail_series(y, yp));
    }
    // integrate in log y so the flat region near the origin and the slow
    // power-law decay are both resolved
    let body = quad::integrate(
        |t| {
            let v = t.exp();
            yor_std_pdf(v, yp).unwrap_or(0.0) * v
        },
        y.ln(),
        YOR_SWITCH.ln(),
        1e-13,
    );
    Ok((body + yor_std_tail_series(YOR_SWITCH, yp)).min(1.0))
}

/// Density of the GBM time integral up to an independent `Exp(lambda)` time.
/// At `lambda = 0` this is the inverse-Gamma law.
pub fn yor_pdf(z: f64, sigma: f64, m: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return inv_gamma_pdf(z, sigma, m);
    }
    let yp = yor_params(sigma, m, lambda)?;
    let s = 0.5 * sigma * sigma;
    Ok(s * yor_std_pdf(s * z, &yp)?)
}

/// `P(Y_T > z)` for the time integral up to an `Exp(lambda)` time.
pub fn yor_survival(z: f64, sigma: f64, m: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return inv_gamma_survival(z, sigma, m);
    }
    let yp = yor_params(sigma, m, lambda)?;
    yor_std_survival(0.5 * sigma * sigma * z, &yp)
}

/// Leading right-tail asymptote `alpha Gamma(alpha) / Gamma(alpha+beta+1) y^-beta`
/// of the standard Yor survival function.
pub fn yor_std_tail_asymptote(y: f64, yp: &YorParams) -> f64 {
    let c = yp.alpha + yp.beta_g + 1.0;
    yp.alpha * gamma(yp.alpha) / gamma(c) * y.powf(-yp.beta_g)
}

/// Residual of the fractional-moment identity
/// `(2 theta^2 + 2 theta mu - lambda) E[Y^theta] + theta E[Y^(theta-1)]`
/// for `Y = B(1, alpha) / (2 G(beta))`, the law obtained with `sigma = 2`,
/// `m = 2 mu + 2`.
pub fn yor_moment_residual(theta: f64, mu: f64, lambda: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return domain(format!("theta must lie in (0, 1), got {theta}"));
    }
    if !(lambda > 0.0) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    let yp = yor_params(2.0, 2.0 * mu + 2.0, lambda)?;
    let (a, b) = (yp.alpha, yp.beta_g);
    if b - theta <= 0.0 {
        return Err(Error::MomentDoesNotExist(0));
    }
    let lb = |x: f64, y: f64| ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y);
    let e_theta_m1 = a / 2f64.powf(theta - 1.0)
        * (lb(theta, a) + ln_gamma(b - theta + 1.0) - ln_gamma(b)).exp();
    let e_theta =
        a / 2f64.powf(theta) * (lb(theta + 1.0, a) + ln_gamma(b - theta) - ln_gamma(b)).exp();
    Ok((2.0 * theta * theta + 2.0 * theta * mu - lambda) * e_theta + theta * e_theta_m1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, integrate_to_inf};

    #[test]
    fn reduce_examples() {
        let rp = reduce(&ModelParams::new(0.2, -0.1, 1.0, 0.1).unwrap()).unwrap();
        assert!((rp.beta - 0.04).abs() < 1e-15 && rp.rho == -0.1 && rp.p == 0.1);
        let rp = ModelParams::new(0.4, 0.1, 0.1, 0.0).unwrap().reduce().unwrap();
        assert!((rp.beta - 0.016).abs() < 1e-15 && (rp.rho - 0.01).abs() < 1e-15);
        assert!(reduce(&ModelParams { sigma: 1.0, m: 0.0, tau: 2.0, lambda: 0.6 }).is_err());
        assert!(ModelParams::new(0.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn multiplier_density() {
        let rp = ReducedParams::infinite(1.0, 0.0).unwrap();
        assert!((multiplier_pdf(1.0, &rp) - 0.352_065_326_764_299).abs() < 1e-12);
        assert_eq!(multiplier_pdf(-1.0, &rp), 0.0);
        let rp = ReducedParams::infinite(0.3, -0.2).unwrap();
        let mass = integrate_to_inf(|x| multiplier_pdf(x, &rp), 0.0, 1e-13);
        let mean = integrate_to_inf(|x| x * multiplier_pdf(x, &rp), 0.0, 1e-13);
        assert!((mass - 1.0).abs() < 1e-10);
        assert!((mean - (-0.2f64).exp()).abs() < 1e-10);
        let mode = (rp.rho - 1.5 * rp.beta).exp();
        assert!(multiplier_pdf(mode, &rp) > multiplier_pdf(mode * 1.01, &rp));
        assert!(multiplier_pdf(mode, &rp) > multiplier_pdf(mode * 0.99, &rp));
    }

    #[test]
    fn inverse_gamma_law() {
        for z in [0.1, 0.7, 3.0] {
            let v = inv_gamma_pdf(z, 2f64.sqrt(), 0.0).unwrap();
            assert!((v - z.powi(-2) * (-1.0 / z).exp()).abs() < 1e-14);
        }
        let mass = integrate_to_inf(|z| inv_gamma_pdf(z, 1.0, -0.1).unwrap(), 0.0, 1e-13);
        assert!((mass - 1.0).abs() < 1e-8);
        assert!((inv_gamma_cdf(1.0, 1.0, -0.1).unwrap() - 0.182_301_232_908_966).abs() < 1e-12);
        let part = integrate(|z| inv_gamma_pdf(z, 1.0, -0.1).unwrap(), 0.0, 1.0, 1e-14);
        assert!((inv_gamma_cdf(1.0, 1.0, -0.1).unwrap() - part).abs() < 1e-11);
        assert!(inv_gamma_cdf(1e12, 0.5, -0.3).unwrap() > 1.0 - 1e-9);
        assert!(matches!(inv_gamma_pdf(1.0, 1.0, 0.5), Err(Error::Infeasible(_))));
    }

    #[test]
    fn yor_parameters() {
        let yp = yor_params(1.0, 0.0, 0.1).unwrap();
        assert!((yp.alpha - 0.170_820_393_249_937).abs() < 1e-12);
        assert!((yp.beta_g - 1.170_820_393_249_937).abs() < 1e-12);
        let yp = yor_params(0.5, 0.125, 0.2).unwrap();
        assert!((yp.alpha - yp.beta_g).abs() < 1e-14);
        assert!((yp.alpha - 0.4f64.sqrt() / 0.5).abs() < 1e-12);
        let yp = yor_params(1.0, -0.3, 1e-12).unwrap();
        assert!(yp.alpha < 1e-10 && (yp.beta_g - 1.6).abs() < 1e-10);
    }

    #[test]
    fn yor_density_is_normalized_with_correct_origin_value() {
        for &(s, m, l) in &[(1.0, 0.0, 0.1), (0.3, -0.1, 0.05), (1.0, -0.5, 0.5)] {
            let mass = integrate(|t| t.exp() * yor_pdf(t.exp(), s, m, l).unwrap(), -30.0, 60.0, 1e-12);
            let yp = yor_params(s, m, l).unwrap();
            let beyond = yor_std_tail_asymptote(0.5 * s * s * 60f64.exp(), &yp);
            assert!((mass + beyond - 1.0).abs() < 1e-6, "({s},{m},{l}): {mass}");
            assert!((yor_pdf(1e-6, s, m, l).unwrap() - l).abs() < 1e-4);
        }
    }

    // Conditioning on the Beta factor: P(B/G > y) = E[P(G < B/y)], and
    // B = 1 - s^(1/alpha) for s uniform.
    fn yor_survival_oracle(y: f64, yp: &YorParams) -> f64 {
        integrate(
            |s: f64| gamma_p(yp.beta_g, (1.0 - s.powf(1.0 / yp.alpha)) / y).unwrap(),
            0.0,
            1.0,
            1e-14,
        )
    }

    #[test]
    fn yor_survival_matches_conditioning_oracle() {
        let yp = yor_params(1.0, 0.0, 0.1).unwrap();
        for y in [1e-3, 0.5, 5.0, 11.9, 12.1, 40.0, 300.0] {
            let v = yor_std_survival(y, &yp).unwrap();
            let o = yor_survival_oracle(y, &yp);
            assert!((v - o).abs() < 1e-9 * o.max(1e-3), "y = {y}: {v} vs {o}");
        }
        let yp = yor_params(0.3, -0.1, 0.01).unwrap();
        for y in [0.2, 3.0, 20.0] {
            let v = yor_std_survival(y, &yp).unwrap();
            assert!((v - yor_survival_oracle(y, &yp)).abs() < 1e-9);
        }
    }

    #[test]
    fn yor_survival_tail_and_limits() {
        let yp = yor_params(1.0, -0.2, 0.3).unwrap();
        let r1 = yor_std_survival(1e3, &yp).unwrap() / yor_std_tail_asymptote(1e3, &yp);
        let r2 = yor_std_survival(1e5, &yp).unwrap() / yor_std_tail_asymptote(1e5, &yp);
        assert!((r2 - 1.0).abs() < (r1 - 1.0).abs() && (r2 - 1.0).abs() < 1e-4);
        assert!((yor_survival(1e-9, 1.0, -0.2, 0.3).unwrap() - 1.0).abs() < 1e-6);
        // decreasing in z
        let mut last = 1.0;
        for i in 1..60 {
            let s = yor_survival(0.05 * i as f64 * i as f64, 1.0, -0.2, 0.3).unwrap();
            assert!(s < last);
            last = s;
        }
    }

    #[test]
    fn yor_law_degenerates_to_inverse_gamma() {
        let (s, m) = (1.0, -0.1);
        let mut last = f64::INFINITY;
        for l in [1e-2, 1e-3, 1e-4] {
            let sup = (1..200)
                .map(|i| {
                    let z = 0.05 * i as f64;
                    (yor_pdf(z, s, m, l).unwrap() - inv_gamma_pdf(z, s, m).unwrap()).abs()
                })
                .fold(0.0, f64::max);
            assert!(sup < last);
            last = sup;
        }
        assert!(last < 1e-3);
        let tail = yor_survival(2.0, s, m, 1e-6).unwrap();
        assert!((tail - inv_gamma_survival(2.0, s, m).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn moment_identity_holds() {
        for &(mu, lambda) in &[(-1.0, 0.5), (0.1, 3.0), (-0.4, 1.5)] {
            for i in 1..10 {
                let r = yor_moment_residual(0.1 * i as f64, mu, lambda).unwrap();
                assert!(r.abs() < 1e-12, "{r}");
            }
        }
        assert!(yor_moment_residual(0.5, 5.0, 0.01).is_err());
    }
}
