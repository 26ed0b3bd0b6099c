//! Power-law right tails, left-tail coefficients, shortfall probabilities and
//! Value-at-Risk.

use serde::{Deserialize, Serialize};

use crate::density::GridDensity;
use crate::distributions::{yor_survival, ReducedParams};
use crate::error::{domain, Error, Result};
use crate::specfun::ln_norm_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRegime {
    InfiniteSum,
    GeometricSum,
    ContinuousLimit,
}

/// Survival function asymptote `P(X > x) ~ constant * x^-exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailAsymptote {
    pub exponent: f64,
    pub constant: f64,
    pub regime: TailRegime,
}

impl TailAsymptote {
    pub fn survival(&self, x: f64) -> f64 {
        self.constant * x.powf(-self.exponent)
    }
}

/// `alpha = 1 - 2 rho / beta`, the right-tail exponent of the perpetuity.
pub fn exponent_infinite(rp: &ReducedParams) -> Result<f64> {
    if !rp.perpetuity_feasible() {
        return Err(Error::Infeasible(format!(
            "perpetuity requires rho < beta/2 (rho = {}, beta = {})",
            rp.rho, rp.beta
        )));
    }
    Ok(1.0 - 2.0 * rp.rho / rp.beta)
}

fn geometric_radical(rp: &ReducedParams) -> f64 {
    let d = rp.rho - 0.5 * rp.beta;
    (d * d - 2.0 * rp.beta * (-rp.p).ln_1p()).sqrt()
}

/// Right-tail exponent of the geometrically stopped sum, the positive root of
/// `(1 - p) E[A^mu] = 1`.
pub fn exponent_geometric(rp: &ReducedParams) -> Result<f64> {
    if !(rp.p > 0.0 && rp.p < 1.0) {
        return domain(format!("geometric tail exponent needs 0 < p < 1, got {}", rp.p));
    }
    Ok((0.5 * rp.beta - rp.rho + geometric_radical(rp)) / rp.beta)
}

/// `(1 + x)^a - x^a` without cancellation for large `x`.
fn power_gap(x: f64, a: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    x.powf(a) * (a * (1.0 / x).ln_1p()).exp_m1()
}

fn check_tail(f: &GridDensity, exponent: f64) -> Result<()> {
    match f.tail {
        Some(t) if (t.exponent - exponent).abs() <= 1e-9 * exponent => Ok(()),
        Some(t) => domain(format!(
            "density tail exponent {} does not match {exponent}",
            t.exponent
        )),
        None => domain("density carries no power-law tail closure"),
    }
}

/// Goldie constant `c` of `P(X > x) ~ c x^-alpha` for the perpetuity, from the
/// solved density.
pub fn tail_constant_infinite(f: &GridDensity, rp: &ReducedParams) -> Result<f64> {
    let alpha = exponent_infinite(rp)?;
    check_tail(f, alpha)?;
    let num = f.expectation(|x| power_gap(x, alpha), alpha - 1.0)?;
    Ok(num / (alpha * (0.5 * rp.beta - rp.rho)))
}

/// Constant `c+` of `P(X_N > x) ~ c+ x^-mu` for the geometrically stopped sum.
pub fn tail_constant_geometric(f: &GridDensity, rp: &ReducedParams) -> Result<f64> {
    let mu = exponent_geometric(rp)?;
    check_tail(f, mu)?;
    // (1+x)^mu - x^mu grows like x^(mu-1); the closure keeps it convergent
    let gap = f.expectation(|x| power_gap(x, mu), mu - 1.0)?;
    let p = rp.p;
    Ok((p + (1.0 - p) * gap) / (mu * (1.0 - p) * geometric_radical(rp)))
}

/// Which sum a left-tail statement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumKind {
    Infinite,
    Geometric,
    Finite(u32),
}

/// `lim log P(X <= eps) / (log eps)^2 = -1 / (2 beta)`; the same for all sums.
pub fn left_tail_coefficient(_kind: SumKind, rp: &ReducedParams) -> f64 {
    -0.5 / rp.beta
}

/// `lim log P(X_n > x) / (log x)^2 = -1 / (2 beta n)` for a finite sum.
pub fn right_tail_coefficient_finite(n: u32, rp: &ReducedParams) -> Result<f64> {
    if n == 0 {
        return domain("finite sums need n >= 1");
    }
    Ok(-0.5 / (rp.beta * n as f64))
}

/// `ln P(X <= eps)` from the functional relation `X = A (1 + Y)` (with
/// probability `1 - stop`) or `X = A` (with probability `stop`), where `Y` has
/// the density `prev`. The multiplier law is integrated exactly, so the result
/// keeps its relative accuracy far below the resolution of the grid.
pub fn ln_left_cdf(prev: Option<&GridDensity>, rp: &ReducedParams, stop: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return domain(format!("eps must be positive, got {eps}"));
    }
    if !(0.0..=1.0).contains(&stop) {
        return domain(format!("stopping weight must lie in [0, 1], got {stop}"));
    }
    let sb = rp.beta.sqrt();
    let shift = eps.ln() - rp.rho + 0.5 * rp.beta;
    let mut terms = Vec::new();
    if stop > 0.0 {
        terms.push(stop.ln() + ln_norm_cdf(shift / sb));
    }
    if stop < 1.0 {
        let f = prev.ok_or_else(|| Error::Domain("density of the inner sum is required".into()))?;
        let g = &f.grid;
        let n = g.n_points;
        let mut inner = Vec::with_capacity(n);
        for (j, &v) in f.values.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            let u = g.u(j);
            let w = if j == 0 || j + 1 == n { 0.5 * g.h } else { g.h };
            inner.push(w.ln() + v.ln() + u + ln_norm_cdf((shift - u) / sb));
        }
        let mass = f.mass();
        terms.push((1.0 - stop).ln() + log_sum_exp(&inner) - mass.ln());
    }
    Ok(log_sum_exp(&terms))
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Quadratic fit of `ln P(X <= eps)` against `L = ln eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeftTailFit {
    /// Coefficient of `L^2`; estimates [`left_tail_coefficient`].
    pub coefficient: f64,
    /// Plain ratio `ln P / L^2` at the smallest `eps`.
    pub ratio_at_min: f64,
    pub eps_min: f64,
    pub eps_max: f64,
}

/// Fits `ln P(X <= eps) = a L^2 + b L + c` on 41 log-spaced points of
/// `[eps_min, eps_max]`. The linear and constant terms absorb the
/// lower-order corrections that bias the raw ratio at moderate `eps`.
pub fn fit_left_tail(
    prev: Option<&GridDensity>,
    rp: &ReducedParams,
    stop: f64,
    eps_min: f64,
    eps_max: f64,
) -> Result<LeftTailFit> {
    if !(eps_min > 0.0 && eps_max > eps_min) {
        return domain(format!("bad eps range [{eps_min}, {eps_max}]"));
    }
    let k = 41;
    let (l0, l1) = (eps_min.ln(), eps_max.ln());
    let mut pts = Vec::with_capacity(k);
    for i in 0..k {
        let l = l0 + (l1 - l0) * i as f64 / (k - 1) as f64;
        pts.push((l, ln_left_cdf(prev, rp, stop, l.exp())?));
    }
    let coef = quadratic_fit(&pts)?;
    Ok(LeftTailFit {
        coefficient: coef[2],
        ratio_at_min: pts[0].1 / (l0 * l0),
        eps_min,
        eps_max,
    })
}

// least squares c0 + c1 x + c2 x^2 via the normal equations on centred x
fn quadratic_fit(pts: &[(f64, f64)]) -> Result<[f64; 3]> {
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for &(x, y) in pts {
        let t = x - xm;
        let phi = [1.0, t, t * t];
        for i in 0..3 {
            b[i] += phi[i] * y;
            for j in 0..3 {
                a[i][j] += phi[i] * phi[j];
            }
        }
    }
    let c = solve3(a, b).ok_or_else(|| Error::Domain("degenerate fit".into()))?;
    // back to powers of x
    Ok([
        c[0] - c[1] * xm + c[2] * xm * xm,
        c[1] - 2.0 * c[2] * xm,
        c[2],
    ])
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Power law fitted to the survival function over a window of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTailFit {
    pub exponent: f64,
    pub constant: f64,
    /// `(max - min) / mean` of `survival(x) x^exponent` over the window, using
    /// the fitted exponent.
    pub variation: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub points: usize,
}

/// Least-squares fit of `ln P(X > x)` on `ln x` over the last decade of the
/// grid (at least 20 grid points).
pub fn fit_power_tail(f: &GridDensity) -> Result<PowerTailFit> {
    let g = &f.grid;
    let x_hi = g.x_max();
    let x_lo = x_hi / 10.0;
    let mut j0 = ((x_lo.ln_1p()) / g.h).ceil() as usize;
    let last = g.n_points - 1;
    if last < 20 {
        return domain("grid too short for a tail fit");
    }
    j0 = j0.min(last - 19);
    let pts: Vec<(f64, f64)> = (j0..=last)
        .filter_map(|j| {
            let x = g.u(j).exp_m1();
            let s = f.survival(x);
            (s > 0.0).then(|| (x.ln(), s.ln()))
        })
        .collect();
    if pts.len() < 20 {
        return domain("survival vanishes over the tail window");
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let exponent = -slope;
    let constant = (my - slope * mx).exp();
    let scaled: Vec<f64> = pts.iter().map(|p| (p.1 + exponent * p.0).exp()).collect();
    let hi = scaled.iter().copied().fold(f64::MIN, f64::max);
    let lo = scaled.iter().copied().fold(f64::MAX, f64::min);
    let mean = scaled.iter().sum::<f64>() / n;
    Ok(PowerTailFit {
        exponent,
        constant,
        variation: (hi - lo) / mean,
        x_lo: pts[0].0.exp(),
        x_hi,
        points: pts.len(),
    })
}

/// `P(X > (1 + q) K)` on a solved density.
pub fn shortfall_probability(f: &GridDensity, k: f64, q: f64) -> Result<f64> {
    if !(k > 0.0) {
        return domain(format!("capital K must be positive, got {k}"));
    }
    if !(q >= 0.0) {
        return domain(format!("loading q must be non-negative, got {q}"));
    }
    Ok(f.survival((1.0 + q) * k))
}

/// Shortfall probability in the continuous-time limit, the Yor survival
/// function at `sigma^2 K (1 + q) / 2` (inverse Gamma when `lambda = 0`).
pub fn shortfall_continuous(sigma: f64, m: f64, lambda: f64, k: f64, q: f64) -> Result<f64> {
    if !(k > 0.0) {
        return domain(format!("capital K must be positive, got {k}"));
    }
    if !(q >= 0.0) {
        return domain(format!("loading q must be non-negative, got {q}"));
    }
    yor_survival((1.0 + q) * k, sigma, m, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarMethod {
    PowerLaw,
    GridInversion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueAtRisk {
    pub threshold: f64,
    pub method: VarMethod,
    /// The power-law threshold fell inside the body of the law (below its
    /// 99th percentile), so the grid was inverted instead.
    pub regime_violation: bool,
}

/// Threshold `K` with `P(X > K) = p_level`: the power-law inversion
/// `(c / p_level)^(1/exponent)`, replaced by inversion of the grid survival
/// when a density is supplied and `K` lies below its 99th percentile.
pub fn value_at_risk(ta: &TailAsymptote, p_level: f64, density: Option<&GridDensity>) -> Result<ValueAtRisk> {
    if !(p_level > 0.0 && p_level < 1.0) {
        return domain(format!("VaR level must lie in (0, 1), got {p_level}"));
    }
    let k = (ta.constant / p_level).powf(1.0 / ta.exponent);
    if let Some(f) = density {
        if f.survival(k) > 0.01 {
            return Ok(ValueAtRisk {
                threshold: invert_survival(f, p_level)?,
                method: VarMethod::GridInversion,
                regime_violation: true,
            });
        }
    }
    Ok(ValueAtRisk {
        threshold: k,
        method: VarMethod::PowerLaw,
        regime_violation: false,
    })
}

/// Smallest `x` with `P(X > x) <= level`, by bisection in `u`.
pub fn invert_survival(f: &GridDensity, level: f64) -> Result<f64> {
    let total = f.mass();
    if !(level > 0.0 && level < total) {
        return domain(format!("survival level {level} outside (0, {total})"));
    }
    let mut lo = 0.0;
    let mut hi = f.grid.u_max();
    if f.survival(hi.exp_m1()) > level {
        // beyond the grid the continuation is an exact power law
        return match f.tail {
            Some(t) => Ok(f.grid.x_max() * (f.tail_mass() / level).powf(1.0 / t.exponent)),
            None => Err(Error::NoRoot(format!("survival above {level} at the end of the grid"))),
        };
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f.survival(mid.exp_m1()) > level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(hi.exp_m1())
}

/// Tail and risk summary for a solved annuity law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRecord {
    pub exponent: f64,
    pub constant: f64,
    pub shortfall: Vec<ShortfallPoint>,
    pub var_threshold: Option<f64>,
    pub method_flags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortfallPoint {
    pub q: f64,
    pub threshold: f64,
    pub probability: f64,
    pub continuous: Option<f64>,
}
