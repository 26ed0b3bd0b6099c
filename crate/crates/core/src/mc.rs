//! Monte Carlo oracle for discrete GBM sums and GBM time integrals.
//!
//! Each path (or antithetic pair) draws from its own ChaCha8 stream selected
//! by the path index, and estimates are reduced in path order, so results
//! depend only on the seed and the configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distributions::ReducedParams;
use crate::error::{domain, Result};

/// Number of terms of the sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Fixed(u32),
    /// `P(N = k) = (1 - p)^(k-1) p`.
    Geometric(f64),
    /// `P(N = k) = weights[k-1]`.
    General(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Pair each path with the one driven by the negated Gaussians.
    pub antithetic: bool,
    pub horizon: Horizon,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1000 {
            return domain(format!("at least 1000 paths are required, got {}", self.n_paths));
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return domain("antithetic sampling needs an even path count");
        }
        match &self.horizon {
            Horizon::Fixed(0) => domain("fixed horizon must be at least 1"),
            Horizon::Geometric(p) if !(*p > 0.0 && *p <= 1.0) => {
                domain(format!("geometric horizon needs 0 < p <= 1, got {p}"))
            }
            Horizon::General(w) => {
                let total: f64 = w.iter().sum();
                if w.is_empty() || w.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-10 {
                    domain(format!("horizon weights must be a probability vector (sum {total})"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    /// Sample standard deviation over `sqrt(samples)`, where an antithetic
    /// pair counts as one sample (the pair average).
    pub std_error: f64,
    pub n_paths: usize,
}

#[derive(Default)]
struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn finish(&self, n_paths: usize) -> McEstimate {
        let var = if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        };
        McEstimate {
            value: self.mean,
            std_error: (var / self.n as f64).sqrt(),
            n_paths,
        }
    }
}

fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn draw_horizon(h: &Horizon, rng: &mut ChaCha8Rng) -> usize {
    match h {
        Horizon::Fixed(n) => *n as usize,
        Horizon::Geometric(p) => {
            if *p >= 1.0 {
                return 1;
            }
            let u: f64 = rng.random();
            // inverse CDF of the geometric law on {1, 2, ...}
            1 + ((1.0 - u).ln() / (-p).ln_1p()).floor() as usize
        }
        Horizon::General(w) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, v) in w.iter().enumerate() {
                acc += v;
                if u < acc {
                    return k + 1;
                }
            }
            w.len()
        }
    }
}

/// Fixed horizon standing in for the perpetuity: the smallest `n` with
/// `e^{n rho} < 1e-6 (1 - e^rho)`, so the neglected terms carry less than
/// 1e-6 of the mean.
pub fn perpetuity_horizon(rho: f64) -> Result<u32> {
    if !(rho < 0.0) {
        return domain(format!("perpetuity proxy needs rho < 0, got {rho}"));
    }
    let n = ((1e-6 * -rho.exp_m1()).ln() / rho).floor() + 1.0;
    Ok(n.max(1.0) as u32)
}

/// Estimates `E[statistic(X)]` for `X = sum_{i<=N} A_1 ... A_i` with
/// log-normal multipliers of log-mean `rho - beta/2` and log-variance `beta`.
pub fn simulate_sum(rp: &ReducedParams, cfg: &McConfig, statistic: impl Fn(f64) -> f64) -> Result<McEstimate> {
    cfg.validate()?;
    let sd = rp.beta.sqrt();
    let drift = rp.rho - 0.5 * rp.beta;
    let mut acc = Accumulator::default();
    if cfg.antithetic {
        for i in 0..cfg.n_paths / 2 {
            let mut rng = path_rng(cfg.seed, i);
            let n = draw_horizon(&cfg.horizon, &mut rng);
            let (mut pa, mut pb, mut xa, mut xb) = (1.0, 1.0, 0.0, 0.0);
            for _ in 0..n {
                let z: f64 = StandardNormal.sample(&mut rng);
                pa *= (drift + sd * z).exp();
                pb *= (drift - sd * z).exp();
                xa += pa;
                xb += pb;
            }
            acc.push(0.5 * (statistic(xa) + statistic(xb)));
        }
    } else {
        for i in 0..cfg.n_paths {
            let mut rng = path_rng(cfg.seed, i);
            let n = draw_horizon(&cfg.horizon, &mut rng);
            let (mut prod, mut x) = (1.0, 0.0);
            for _ in 0..n {
                let z: f64 = StandardNormal.sample(&mut rng);
                prod *= (drift + sd * z).exp();
                x += prod;
            }
            acc.push(statistic(x));
        }
    }
    Ok(acc.finish(cfg.n_paths))
}

/// End of the integration interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeHorizon {
    Fixed(f64),
    /// Independent exponential time with this rate.
    Exponential(f64),
}

/// Estimates `E[statistic(Y)]` for `Y = int_0^T exp(sigma W_t + (m - sigma^2/2) t) dt`
/// by the trapezoid rule on `substeps` equal steps of each path's `T`.
/// The horizon of the configuration is ignored.
pub fn simulate_time_integral(
    sigma: f64,
    m: f64,
    horizon: TimeHorizon,
    substeps: usize,
    cfg: &McConfig,
    statistic: impl Fn(f64) -> f64,
) -> Result<McEstimate> {
    cfg.validate()?;
    if substeps < 100 {
        return domain(format!("at least 100 substeps are required, got {substeps}"));
    }
    if !(sigma >= 0.0) {
        return domain(format!("sigma must be non-negative, got {sigma}"));
    }
    match horizon {
        TimeHorizon::Fixed(t) if !(t > 0.0) => return domain(format!("T must be positive, got {t}")),
        TimeHorizon::Exponential(l) if !(l > 0.0) => return domain(format!("lambda must be positive, got {l}")),
        _ => {}
    }
    let drift = m - 0.5 * sigma * sigma;
    let path = |rng: &mut ChaCha8Rng, sign: f64, t: f64, zs: &mut Vec<f64>, fresh: bool| -> f64 {
        let dt = t / substeps as f64;
        let sdt = dt.sqrt();
        let (mut log_s, mut prev, mut sum) = (0.0, 1.0, 0.0);
        for k in 0..substeps {
            if fresh {
                let z: f64 = StandardNormal.sample(rng);
                zs.push(z);
            }
            log_s += drift * dt + sign * sigma * sdt * zs[k];
            let cur = f64::exp(log_s);
            sum += 0.5 * (prev + cur);
            prev = cur;
        }
        sum * dt
    };
    let draw_t = |rng: &mut ChaCha8Rng| match horizon {
        TimeHorizon::Fixed(t) => t,
        TimeHorizon::Exponential(l) => {
            let e: f64 = Exp1.sample(rng);
            e / l
        }
    };
    let mut acc = Accumulator::default();
    let mut zs = Vec::with_capacity(substeps);
    let pairs = if cfg.antithetic { cfg.n_paths / 2 } else { cfg.n_paths };
    for i in 0..pairs {
        let mut rng = path_rng(cfg.seed, i);
        let t = draw_t(&mut rng);
        zs.clear();
        let a = path(&mut rng, 1.0, t, &mut zs, true);
        if cfg.antithetic {
            let b = path(&mut rng, -1.0, t, &mut zs, false);
            acc.push(0.5 * (statistic(a) + statistic(b)));
        } else {
            acc.push(statistic(a));
        }
    }
    Ok(acc.finish(cfg.n_paths))
}
