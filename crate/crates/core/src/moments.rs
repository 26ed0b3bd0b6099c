//! Positive-moment recursions, inverse-moment bounds and finite-sum means.

use std::fmt;
use std::sync::Arc;

use crate::distributions::ReducedParams;
use crate::error::{domain, Error, Result};

/// The map `k -> E[A^k]` of the one-period multiplier.
#[derive(Clone)]
pub enum MultiplierMoments {
    /// Log-normal multiplier, `E[A^k] = exp(beta k (k-1) / 2 + k rho)`.
    Gbm { beta: f64, rho: f64 },
    /// Exponential Levy multiplier, `E[A^k] = exp(kappa(k) tau + m k tau)`.
    Levy {
        cumulant: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        m: f64,
        tau: f64,
    },
}

impl fmt::Debug for MultiplierMoments {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gbm { beta, rho } => write!(f, "Gbm {{ beta: {beta}, rho: {rho} }}"),
            Self::Levy { m, tau, .. } => write!(f, "Levy {{ m: {m}, tau: {tau}, .. }}"),
        }
    }
}

impl MultiplierMoments {
    pub fn gbm(rp: &ReducedParams) -> Self {
        Self::Gbm {
            beta: rp.beta,
            rho: rp.rho,
        }
    }

    /// Levy multiplier from a cumulant `kappa` with `kappa(0) = 0`.
    pub fn levy(cumulant: impl Fn(f64) -> f64 + Send + Sync + 'static, m: f64, tau: f64) -> Result<Self> {
        let k0 = cumulant(0.0);
        if k0.abs() > 1e-12 {
            return domain(format!("cumulant must vanish at 0, got {k0}"));
        }
        if !(tau > 0.0) {
            return domain(format!("tau must be positive, got {tau}"));
        }
        Ok(Self::Levy {
            cumulant: Arc::new(cumulant),
            m,
            tau,
        })
    }

    /// `E[A^k]`.
    pub fn moment(&self, k: f64) -> f64 {
        match self {
            Self::Gbm { beta, rho } => (0.5 * beta * k * (k - 1.0) + k * rho).exp(),
            Self::Levy { cumulant, m, tau } => (cumulant(k) * tau + m * k * tau).exp(),
        }
    }
}

/// True iff `(1 - p) E[A^k] < 1`, i.e. `E[X_N^k]` is finite.
pub fn moment_exists(k: u32, mm: &MultiplierMoments, p: f64) -> bool {
    (1.0 - p) * mm.moment(k as f64) < 1.0
}

fn binomial_row(k: usize) -> Vec<f64> {
    let mut row = vec![1.0; k + 1];
    for j in 1..k {
        row[j] = row[j - 1] * (k - j + 1) as f64 / j as f64;
    }
    row
}

/// `E[X_N^k]` for `k = 0..=kmax` by the moment recursion of
/// `X_N = A (Q + (1 - Q)(1 + X_N))`; `p = 0` gives the perpetuity.
pub fn moments_geometric(kmax: u32, mm: &MultiplierMoments, p: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("p must lie in [0, 1], got {p}"));
    }
    let mut out = vec![1.0];
    for k in 1..=kmax {
        if !moment_exists(k, mm, p) {
            return Err(Error::MomentDoesNotExist(k));
        }
        let a = mm.moment(k as f64);
        let c = binomial_row(k as usize);
        let lower: f64 = (0..k as usize).map(|j| c[j] * out[j]).sum();
        out.push(a / (1.0 - (1.0 - p) * a) * ((1.0 - p) * lower + p));
    }
    Ok(out)
}

/// Perpetuity moments from the explicit sum over increasing index chains
/// `0 = i_0 < i_1 < ... < i_r = k` of
/// `prod_j C(i_j, i_{j-1}) a_{i_j} / (1 - a_{i_j})` with `a_i = E[A^i]`.
pub fn moments_infinite_product_form(kmax: u32, mm: &MultiplierMoments) -> Result<Vec<f64>> {
    if kmax > 40 {
        return domain(format!("chain enumeration limited to kmax <= 40, got {kmax}"));
    }
    let mut ratio = vec![0.0];
    for i in 1..=kmax {
        if !moment_exists(i, mm, 0.0) {
            return Err(Error::MomentDoesNotExist(i));
        }
        let a = mm.moment(i as f64);
        ratio.push(a / (1.0 - a));
    }
    let binom: Vec<Vec<f64>> = (0..=kmax as usize).map(binomial_row).collect();
    let mut out = vec![1.0];
    for k in 1..=kmax as usize {
        let mut total = 0.0;
        // bit i-1 of the mask selects i as an interior chain index
        for mask in 0u64..(1u64 << (k - 1)) {
            let mut prev = 0;
            let mut prod = 1.0;
            for i in (1..k).chain(std::iter::once(k)) {
                if i < k && mask & (1 << (i - 1)) == 0 {
                    continue;
                }
                prod *= binom[i][prev] * ratio[i];
                prev = i;
            }
            total += prod;
        }
        out.push(total);
    }
    Ok(out)
}

/// Upper bound `exp(beta n (n + 1) / 2 - n rho)` on `E[X^-n]` for the perpetuity.
pub fn inverse_moment_bound(n: u32, rp: &ReducedParams) -> Result<f64> {
    if n == 0 {
        return domain("inverse moment order must be at least 1");
    }
    let n = n as f64;
    Ok((0.5 * rp.beta * n * (n + 1.0) - n * rp.rho).exp())
}

/// `E[sum_{i=1}^n S_0 e^{r tau i}] = S_0 (e^{n r tau} - 1) / (1 - e^{-r tau})`.
pub fn mean_finite_sum(n: u32, r: f64, tau: f64, s0: f64) -> f64 {
    let n = n as f64;
    let rt = r * tau;
    if rt.abs() < 1e-12 {
        return n * s0 * (1.0 + 0.5 * (n + 1.0) * rt);
    }
    s0 * (n * rt).exp_m1() / -(-rt).exp_m1()
}
