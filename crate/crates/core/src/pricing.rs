//! Finite-sum densities, discretely monitored Asian options, annuity laws
//! under general mortality, and Makeham calibration of the geometric model.

use serde::{Deserialize, Serialize};

use crate::density::{quadrature_error_bound, solve_geometric, Grid, GridDensity, KernelOperator, SolveOptions};
use crate::distributions::{multiplier_pdf, ModelParams, ReducedParams};
use crate::error::{domain, Error, Result};
use crate::moments::mean_finite_sum;
use crate::quad;

/// A discretely monitored arithmetic-average option.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsianSpec {
    pub s0: f64,
    pub strike: f64,
    pub rate: f64,
    pub dividend: f64,
    pub sigma: f64,
    pub maturity: f64,
    pub n_fixings: u32,
}

impl AsianSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0) {
            return domain(format!("spot must be positive, got {}", self.s0));
        }
        if !(self.strike >= 0.0) {
            return domain(format!("strike must be non-negative, got {}", self.strike));
        }
        if !(self.sigma > 0.0) {
            return domain(format!("volatility must be positive, got {}", self.sigma));
        }
        if !(self.maturity > 0.0) {
            return domain(format!("maturity must be positive, got {}", self.maturity));
        }
        if self.n_fixings == 0 {
            return domain("at least one fixing is required");
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        self.maturity / self.n_fixings as f64
    }

    /// Drift `m = r - q` of the underlying.
    pub fn drift(&self) -> f64 {
        self.rate - self.dividend
    }

    pub fn reduced(&self) -> Result<ReducedParams> {
        self.validate()?;
        ModelParams::new(self.sigma, self.drift(), self.tau(), 0.0)?.reduce()
    }

    /// Strike in units of the spot, summed over fixings: `n K / S_0`.
    pub fn kappa(&self) -> f64 {
        self.n_fixings as f64 * self.strike / self.s0
    }

    /// `E[A_n]`, the exact mean of the discrete average.
    pub fn mean_average(&self) -> f64 {
        mean_finite_sum(self.n_fixings, self.drift(), self.tau(), self.s0) / self.n_fixings as f64
    }

    /// Grid resolving the kernel and covering the law of `X_n` to about eight
    /// standard deviations of its log.
    pub fn grid(&self) -> Result<Grid> {
        let rp = self.reduced()?;
        finite_sum_grid(self.n_fixings, &rp)
    }
}

/// Default grid for `X_n`: step `min(0.01, sqrt(beta)/3)` and right end at
/// `n exp(|rho - beta/2| n + 8 sqrt(beta n))`.
pub fn finite_sum_grid(n: u32, rp: &ReducedParams) -> Result<Grid> {
    let h = 0.01f64.min(rp.beta.sqrt() / 3.0);
    let nf = n as f64;
    let ln_x = nf.ln() + (rp.rho - 0.5 * rp.beta).abs() * nf + 8.0 * (rp.beta * nf).sqrt();
    let u_max = ln_x.exp().ln_1p().max(1.0);
    Grid::covering(h, u_max)
}

fn check_count(n: u32) -> Result<()> {
    if n == 0 {
        return domain("finite sums need n >= 1");
    }
    Ok(())
}

/// Iterates `f_1, f_2, ...` by repeated application of the kernel operator
/// without tail closure, calling `visit(n, values)` for each; stops early when
/// `visit` returns false.
pub fn for_each_finite_sum(
    n_max: u32,
    rp: &ReducedParams,
    grid: &Grid,
    mut visit: impl FnMut(u32, &[f64]) -> bool,
) -> Result<()> {
    check_count(n_max)?;
    let op = KernelOperator::new(grid, rp, None)?;
    let mut cur = GridDensity::from_fn(*grid, |x| multiplier_pdf(x, rp)).values;
    let mut next = vec![0.0; cur.len()];
    for n in 1..=n_max {
        if n > 1 {
            op.apply_into(&cur, &mut next);
            for v in next.iter_mut() {
                *v = v.max(0.0);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        if !visit(n, &cur) {
            break;
        }
    }
    Ok(())
}

/// Diagnostics of a finite-sum density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteSumReport {
    /// `|mass - 1|` of the unnormalised grid density.
    pub normalization_drift: f64,
    /// Trapezoid bound of one operator application.
    pub quadrature_bound: f64,
}

/// Density of `X_n = sum_{i<=n} A_1 ... A_i` as `T^(n-1) f_1`.
pub fn finite_sum_density(n: u32, rp: &ReducedParams, grid: &Grid) -> Result<(GridDensity, FiniteSumReport)> {
    let mut out = Vec::new();
    for_each_finite_sum(n, rp, grid, |k, v| {
        if k == n {
            out = v.to_vec();
        }
        true
    })?;
    let density = GridDensity::new(*grid, out, None)?;
    let report = FiniteSumReport {
        normalization_drift: (density.mass() - 1.0).abs(),
        quadrature_bound: quadrature_error_bound(&density, 1)?.bound,
    };
    Ok((density, report))
}

/// Result of the alternating derivative expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeForm {
    pub density: GridDensity,
    /// `sum_k sup|term_k| / sup|f_n|`; large values signal cancellation.
    pub cancellation_ratio: f64,
    pub cancellation_warning: bool,
}

/// `f_n = sum_{k<n} (-1)^k / k! d^k f / dp^k` at `p = 1`, with
/// `d_0 = f_1`, `d_1 = f_1 - T f_1`, `d_k = -k T d_{k-1}`.
pub fn finite_sum_density_derivative_form(n: u32, rp: &ReducedParams, grid: &Grid) -> Result<DerivativeForm> {
    check_count(n)?;
    if n > 170 {
        return domain(format!("derivative expansion overflows beyond n = 170, got {n}"));
    }
    let op = KernelOperator::new(grid, rp, None)?;
    let f1 = GridDensity::from_fn(*grid, |x| multiplier_pdf(x, rp)).values;
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut sum = f1.clone();
    let mut term_sup = sup(&f1);
    let mut d = f1.clone();
    let mut fact = 1.0;
    for k in 1..n {
        let td = op.apply(&d);
        d = if k == 1 {
            f1.iter().zip(&td).map(|(a, b)| a - b).collect()
        } else {
            td.iter().map(|v| -(k as f64) * v).collect()
        };
        fact *= k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (s, v) in sum.iter_mut().zip(&d) {
            *s += sign * v / fact;
        }
        term_sup += sup(&d) / fact;
    }
    let ratio = term_sup / sup(&sum);
    Ok(DerivativeForm {
        density: GridDensity::new(*grid, sum, None)?,
        cancellation_ratio: ratio,
        cancellation_warning: ratio > 1e6,
    })
}

/// Price of an Asian option with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsianPrice {
    pub price: f64,
    /// Mean of `X_n` on the grid, in units of `S_0`.
    pub grid_mean: f64,
    /// Exact mean of `X_n`, in units of `S_0`.
    pub exact_mean: f64,
    /// Density mass at the grid end scaled by `x_max`; a proxy for the
    /// payoff mass truncated by the grid.
    pub truncation: f64,
    pub truncation_warning: bool,
    pub normalization_drift: f64,
}

/// Asian prices sharing one density of `X_n`.
pub struct AsianPricer {
    spec: AsianSpec,
    density: GridDensity,
    report: FiniteSumReport,
}

impl AsianPricer {
    pub fn new(spec: &AsianSpec) -> Result<Self> {
        let rp = spec.reduced()?;
        let grid = finite_sum_grid(spec.n_fixings, &rp)?;
        let (density, report) = finite_sum_density(spec.n_fixings, &rp, &grid)?;
        Ok(Self {
            spec: *spec,
            density,
            report,
        })
    }

    pub fn density(&self) -> &GridDensity {
        &self.density
    }

    fn scale(&self) -> f64 {
        (-self.spec.rate * self.spec.maturity).exp() * self.spec.s0 / self.spec.n_fixings as f64
    }

    fn price_with(&self, strike: f64, call: bool) -> Result<AsianPrice> {
        let spec = AsianSpec { strike, ..self.spec };
        spec.validate()?;
        let kappa = spec.kappa();
        let e = if call {
            self.density.expectation(|x| (x - kappa).max(0.0), 1.0)?
        } else {
            self.density.expectation(|x| (kappa - x).max(0.0), 0.0)?
        };
        let price = self.scale() * e;
        let g = &self.density.grid;
        let truncation = self.scale() * self.density.values[g.n_points - 1] * g.x_max() * g.x_max();
        Ok(AsianPrice {
            price,
            grid_mean: self.density.mean()?,
            exact_mean: spec.mean_average() * spec.n_fixings as f64 / spec.s0,
            truncation,
            truncation_warning: call && truncation > 1e-5 * price.max(1e-300),
            normalization_drift: self.report.normalization_drift,
        })
    }

    pub fn call(&self, strike: f64) -> Result<AsianPrice> {
        self.price_with(strike, true)
    }

    pub fn put(&self, strike: f64) -> Result<AsianPrice> {
        self.price_with(strike, false)
    }
}

/// `e^{-rT} E[(A_n - K)+]` for the discrete average `A_n`.
pub fn asian_call(spec: &AsianSpec) -> Result<AsianPrice> {
    AsianPricer::new(spec)?.call(spec.strike)
}

/// `e^{-rT} E[(K - A_n)+]`.
pub fn asian_put(spec: &AsianSpec) -> Result<AsianPrice> {
    AsianPricer::new(spec)?.put(spec.strike)
}

/// Put-call parity residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityGap {
    pub call: f64,
    pub put: f64,
    /// `(C - P) - e^{-rT} (E[A_n] - K)` with the exact discrete mean.
    pub gap: f64,
    /// The same residual against the continuous-average mean
    /// `S_0 (e^{(r-q)T} - 1) / ((r-q) T)`.
    pub gap_continuous_mean: f64,
}

pub fn put_call_parity_gap(spec: &AsianSpec) -> Result<ParityGap> {
    let pricer = AsianPricer::new(spec)?;
    let call = pricer.call(spec.strike)?.price;
    let put = pricer.put(spec.strike)?.price;
    let disc = (-spec.rate * spec.maturity).exp();
    let mt = spec.drift() * spec.maturity;
    let cont_mean = if mt.abs() < 1e-12 {
        spec.s0
    } else {
        spec.s0 * mt.exp_m1() / mt
    };
    Ok(ParityGap {
        call,
        put,
        gap: (call - put) - disc * (spec.mean_average() - spec.strike),
        gap_continuous_mean: (call - put) - disc * (cont_mean - spec.strike),
    })
}

/// `E[(X_N - kappa)+]` for the geometrically stopped sum.
pub fn geometric_maturity_option(rp: &ReducedParams, kappa: f64, opts: &SolveOptions) -> Result<f64> {
    if !(rp.p > 0.0 && rp.p < 1.0) {
        return domain(format!("geometric maturity needs 0 < p < 1, got {}", rp.p));
    }
    if !(kappa >= 0.0) {
        return domain(format!("kappa must be non-negative, got {kappa}"));
    }
    let (f, _) = solve_geometric(rp, opts)?;
    f.expectation(|x| (x - kappa).max(0.0), 1.0)
}

/// Makeham force of mortality `A + B e^{beta a}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Makeham {
    pub a: f64,
    pub b: f64,
    pub beta: f64,
}

impl Default for Makeham {
    fn default() -> Self {
        Self {
            a: 0.0007,
            b: 5e-5,
            beta: 0.0921,
        }
    }
}

impl Makeham {
    pub fn hazard(&self, age: f64) -> f64 {
        self.a + self.b * (self.beta * age).exp()
    }

    /// `int_{a0}^{a0+t} mu(s) ds`.
    pub fn cumulative_hazard(&self, a0: f64, t: f64) -> f64 {
        let gompertz = if self.beta == 0.0 {
            self.b * t
        } else {
            self.b / self.beta * (self.beta * a0).exp() * (self.beta * t).exp_m1()
        };
        self.a * t + gompertz
    }

    /// Survival to age `a0 + t` given survival to `a0`.
    pub fn survival(&self, a0: f64, t: f64) -> f64 {
        (-self.cumulative_hazard(a0, t)).exp()
    }
}

/// Law of the payment horizon `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MortalityModel {
    /// `P(N = n) = p (1 - p)^(n-1)`.
    Geometric { p: f64 },
    /// `P(N = n) = weights[n-1]`, truncated at `cap`.
    General { weights: Vec<f64>, cap: usize },
    /// Curtate lifetime from age `age` under a Makeham hazard.
    Makeham { law: Makeham, age: f64 },
}

impl MortalityModel {
    /// `P(N = n)` for `n = 1..=cap`, renormalised to sum to one.
    pub fn horizon_weights(&self, cap: usize) -> Result<Vec<f64>> {
        if cap == 0 {
            return domain("horizon cap must be at least 1");
        }
        let mut w: Vec<f64> = match self {
            Self::Geometric { p } => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return domain(format!("p must lie in (0, 1], got {p}"));
                }
                (0..cap).map(|k| p * (1.0 - p).powi(k as i32)).collect()
            }
            Self::General { weights, cap: own } => {
                if weights.iter().any(|v| !(*v >= 0.0)) {
                    return domain("horizon weights must be non-negative");
                }
                weights.iter().take(cap.min(*own)).copied().collect()
            }
            Self::Makeham { law, age } => {
                if !(law.a >= 0.0 && law.b >= 0.0 && law.a + law.b > 0.0) {
                    return domain("Makeham hazard must be positive");
                }
                (0..cap)
                    .map(|k| law.survival(*age, k as f64) - law.survival(*age, k as f64 + 1.0))
                    .collect()
            }
        };
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return domain("horizon weights have zero mass");
        }
        for v in w.iter_mut() {
            *v /= total;
        }
        Ok(w)
    }
}

/// `f_R = sum_n p_n f_n` in a single pass over `f_n = T f_{n-1}`, stopping
/// once the remaining weight is below 1e-14.
pub fn mixture_density(weights: &[f64], rp: &ReducedParams, grid: &Grid) -> Result<GridDensity> {
    if weights.is_empty() {
        return domain("mixture needs at least one weight");
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-10 || weights.iter().any(|w| !(*w >= 0.0)) {
        return domain(format!("mixture weights must be a probability vector (sum {total})"));
    }
    let mut acc = vec![0.0; grid.n_points];
    let mut remaining = 1.0;
    for_each_finite_sum(weights.len() as u32, rp, grid, |n, v| {
        let w = weights[n as usize - 1];
        if w > 0.0 {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += w * x;
            }
        }
        remaining -= w;
        remaining > 1e-14
    })?;
    GridDensity::new(*grid, acc, None)
}

/// How the geometric parameter is matched to a Makeham table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMethod {
    /// `a0 + 1/p` equals the conditional life expectancy at `a0`.
    LifeExpectancy,
    /// `p` equals the one-year death probability `1 - exp(-int_{a0}^{a0+1} mu)`.
    HazardRate,
    /// Root of `mu(a0) = p (1 - p)^{a0}` in `(0, 1)`.
    HazardLiteral,
}

pub fn makeham_match_p(a0: f64, method: MatchMethod, law: &Makeham) -> Result<f64> {
    if !(0.0..=120.0).contains(&a0) {
        return domain(format!("age must lie in [0, 120], got {a0}"));
    }
    if !(law.a >= 0.0 && law.b >= 0.0 && law.beta >= 0.0) {
        return domain("Makeham parameters must be non-negative");
    }
    if law.a == 0.0 && law.b == 0.0 {
        return Err(Error::NoRoot("zero hazard: life expectancy is infinite".into()));
    }
    match method {
        MatchMethod::LifeExpectancy => {
            // survival is negligible beyond age 130 for realistic tables;
            // fall back to the full half-line otherwise
            let horizon = 130.0 - a0;
            let body = quad::integrate(|t| law.survival(a0, t), 0.0, horizon, 1e-13);
            let rest = if law.survival(a0, horizon) < 1e-12 {
                0.0
            } else {
                quad::integrate_to_inf(|t| law.survival(a0, horizon + t), 0.0, 1e-13)
            };
            let e = body + rest;
            if !e.is_finite() || e <= 0.0 {
                return Err(Error::NoRoot(format!("life expectancy {e} is not finite")));
            }
            Ok(1.0 / e)
        }
        MatchMethod::HazardRate => Ok(-(-law.cumulative_hazard(a0, 1.0)).exp_m1()),
        MatchMethod::HazardLiteral => {
            let target = law.hazard(a0);
            let g = |p: f64| p * (1.0 - p).powf(a0) - target;
            // p (1-p)^a0 peaks at p = 1 / (1 + a0)
            let peak = 1.0 / (1.0 + a0);
            if g(peak) < 0.0 {
                return Err(Error::NoRoot(format!(
                    "p (1-p)^{a0} never reaches mu({a0}) = {target:.6}"
                )));
            }
            let (mut lo, mut hi) = (0.0, peak);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
    }
}
