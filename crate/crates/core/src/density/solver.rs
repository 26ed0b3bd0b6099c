use serde::{Deserialize, Serialize};

use crate::distributions::{inv_gamma_pdf, multiplier_pdf, ReducedParams};
use crate::error::{domain, Error, Result};
use crate::specfun::zeta_int;
use crate::tails::{exponent_geometric, exponent_infinite, TailAsymptote, TailRegime};

use super::{Grid, GridDensity, KernelOperator};

/// Starting density for the perpetuity iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialDensity {
    /// The continuous-time (inverse-Gamma) limit law.
    #[default]
    InverseGamma,
    /// The one-period multiplier law.
    LogNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Requested grid step; refined automatically when the kernel is under-resolved.
    pub h: f64,
    /// Right end of the grid in `u`; chosen from the tail exponent when absent.
    pub u_max: Option<f64>,
    pub tol: f64,
    /// Iteration cap; a `p`-dependent default is used when absent.
    pub max_iter: Option<usize>,
    pub init: InitialDensity,
    /// Close the kernel integral beyond the grid with the power-law tail.
    pub tail_closure: bool,
    /// With tail closure, iteration also continues until the last grid value
    /// changes by less than this relative amount; the far tail converges much
    /// more slowly than the body and carries much of the mean.
    pub tail_rtol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            h: 0.01,
            u_max: None,
            tol: 1e-8,
            max_iter: None,
            init: InitialDensity::InverseGamma,
            tail_closure: true,
            tail_rtol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_delta: f64,
    /// `|mass - 1|` before the final renormalisation (for the perpetuity, the
    /// mass change of the last operator application).
    pub normalization_drift: f64,
    pub quadrature_bound: f64,
    /// `Delta_n` for every iteration.
    pub trace: Vec<f64>,
    pub h: f64,
    pub u_max: f64,
    /// Set when `h` was reduced to resolve the kernel.
    pub grid_refined: bool,
    pub tail_mass: f64,
}

/// `u_max` such that the power-law mass beyond the grid is below 1e-7 and,
/// when the mean exists, the mean carried by the tail is small as well.
pub fn default_u_max(exponent: f64) -> f64 {
    let mut u = (1e7f64).ln() / exponent;
    if exponent > 1.0 {
        u = u.max((1e6 * exponent / (exponent - 1.0)).ln() / (exponent - 1.0));
    }
    u.clamp(20.0, 60.0)
}

fn resolve_step(h: f64, beta: f64) -> (f64, bool) {
    let limit = beta.sqrt() / 3.0;
    if h > limit {
        (limit, true)
    } else {
        (h, false)
    }
}

fn validate(opts: &SolveOptions) -> Result<()> {
    if !(opts.tol > 0.0) {
        return domain(format!("tolerance must be positive, got {}", opts.tol));
    }
    if !(opts.h > 0.0) {
        return domain(format!("grid step must be positive, got {}", opts.h));
    }
    Ok(())
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct Iteration {
    values: Vec<f64>,
    trace: Vec<f64>,
    mass_change: f64,
}

// Mass functional matching `GridDensity::mass` for raw grid values.
fn raw_mass(grid: &Grid, values: &[f64], tail_exponent: Option<f64>) -> f64 {
    let n = grid.n_points;
    let body: f64 = values
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let w = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
            w * v * grid.u(j).exp()
        })
        .sum::<f64>()
        * grid.h;
    body + tail_exponent.map_or(0.0, |mu| values[n - 1] * grid.x_max() / mu)
}

fn iterate(
    op: &KernelOperator,
    mut values: Vec<f64>,
    source: Option<(&[f64], f64)>,
    renormalize: Option<Option<f64>>,
    opts: &SolveOptions,
    max_iter: usize,
) -> Result<Iteration> {
    let n = values.len();
    let mut next = vec![0.0; n];
    let mut trace = Vec::new();
    let mut mass_change = 0.0;
    for _ in 0..max_iter {
        op.apply_into(&values, &mut next);
        if let Some((src, p)) = source {
            for (v, s) in next.iter_mut().zip(src) {
                *v = s + (1.0 - p) * *v;
            }
        }
        for v in next.iter_mut() {
            *v = v.max(0.0);
        }
        if let Some(tail) = renormalize {
            let m = raw_mass(op.grid(), &next, tail);
            mass_change = m - 1.0;
            for v in next.iter_mut() {
                *v /= m;
            }
        }
        let delta = sup_diff(&next, &values);
        let tail_settled = !op.has_tail_closure()
            || next[n - 1] == 0.0
            || (next[n - 1] - values[n - 1]).abs() <= opts.tail_rtol * next[n - 1];
        std::mem::swap(&mut values, &mut next);
        trace.push(delta);
        if delta <= opts.tol && tail_settled {
            return Ok(Iteration {
                values,
                trace,
                mass_change,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        last_delta: trace.last().copied().unwrap_or(f64::NAN),
        trace,
    })
}

fn finish(
    grid: Grid,
    values: Vec<f64>,
    tail: Option<TailAsymptote>,
    trace: Vec<f64>,
    grid_refined: bool,
    mass_change: Option<f64>,
    normalize: bool,
) -> Result<(GridDensity, SolveReport)> {
    let mut density = GridDensity { grid, values, tail };
    density.refresh_tail_constant();
    let mass = if normalize { density.normalize() } else { density.mass() };
    let drift = mass_change.unwrap_or(mass - 1.0).abs();
    let quadrature_bound = quadrature_error_bound(&density, 1)?.bound;
    let report = SolveReport {
        iterations: trace.len(),
        final_delta: trace.last().copied().unwrap_or(0.0),
        normalization_drift: drift,
        quadrature_bound,
        trace,
        h: grid.h,
        u_max: grid.u_max(),
        grid_refined,
        tail_mass: density.tail_mass(),
    };
    Ok((density, report))
}

/// Solves for the law of the perpetuity `X = A (1 + X)` by fixed-point iteration.
pub fn solve_infinite(rp: &ReducedParams, opts: &SolveOptions) -> Result<(GridDensity, SolveReport)> {
    validate(opts)?;
    let alpha = exponent_infinite(rp)?;
    let (h, refined) = resolve_step(opts.h, rp.beta);
    let grid = Grid::covering(h, opts.u_max.unwrap_or_else(|| default_u_max(alpha)))?;
    let closure = opts.tail_closure.then_some(alpha);
    let op = KernelOperator::new(&grid, rp, closure)?;

    let init = match opts.init {
        InitialDensity::InverseGamma => {
            let sigma = rp.beta.sqrt();
            GridDensity::from_fn(grid, |x| inv_gamma_pdf(x, sigma, rp.rho).unwrap_or(0.0))
        }
        InitialDensity::LogNormal => GridDensity::from_fn(grid, |x| multiplier_pdf(x, rp)),
    };
    let it = iterate(&op, init.values, None, Some(closure), opts, opts.max_iter.unwrap_or(500))?;
    let tail = closure.map(|exponent| TailAsymptote {
        exponent,
        constant: 0.0,
        regime: TailRegime::InfiniteSum,
    });
    finish(grid, it.values, tail, it.trace, refined, Some(it.mass_change), true)
}

/// Default iteration cap for the stopped sum; the contraction factor is at
/// best `1 - p`.
fn geometric_max_iter(p: f64) -> usize {
    500usize.max((25.0 / p).ceil() as usize)
}

/// Solves for the law of the geometrically stopped sum
/// `F = p f_A + (1 - p) T F`, starting from the multiplier law.
pub fn solve_geometric(rp: &ReducedParams, opts: &SolveOptions) -> Result<(GridDensity, SolveReport)> {
    validate(opts)?;
    if !(rp.p > 0.0 && rp.p <= 1.0) {
        return domain(format!("geometric stopping needs 0 < p <= 1, got {}", rp.p));
    }
    let (h, refined) = resolve_step(opts.h, rp.beta);
    if rp.p == 1.0 {
        let u_max = opts.u_max.unwrap_or_else(|| lognormal_u_max(rp));
        let grid = Grid::covering(h, u_max)?;
        let f1 = GridDensity::from_fn(grid, |x| multiplier_pdf(x, rp));
        return finish(grid, f1.values, None, Vec::new(), refined, None, false);
    }
    let mu = exponent_geometric(rp)?;
    let grid = Grid::covering(h, opts.u_max.unwrap_or_else(|| default_u_max(mu)))?;
    let closure = opts.tail_closure.then_some(mu);
    let op = KernelOperator::new(&grid, rp, closure)?;
    let f1 = GridDensity::from_fn(grid, |x| multiplier_pdf(x, rp));
    let source: Vec<f64> = f1.values.iter().map(|v| rp.p * v).collect();
    let max_iter = opts.max_iter.unwrap_or_else(|| geometric_max_iter(rp.p));
    let it = iterate(&op, f1.values, Some((&source, rp.p)), None, opts, max_iter)?;
    let tail = closure.map(|exponent| TailAsymptote {
        exponent,
        constant: 0.0,
        regime: TailRegime::GeometricSum,
    });
    finish(grid, it.values, tail, it.trace, refined, None, true)
}

/// Grid end covering the multiplier law out to 12 standard deviations.
pub(crate) fn lognormal_u_max(rp: &ReducedParams) -> f64 {
    let x = (rp.rho - 0.5 * rp.beta + 12.0 * rp.beta.sqrt()).exp();
    x.ln_1p().max(1.0)
}

/// Trapezoid error bound `h^{2k+1} M zeta(2k+1) / (2^{2k} pi^{2k+1})` with
/// `M = int |d^{2k+1}/du^{2k+1} (F e^u)| du` from finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureBound {
    pub bound: f64,
    pub derivative_integral: f64,
    /// The estimate of `M` moved by more than 25% when recomputed on every
    /// second grid point.
    pub noise_dominated: bool,
}

fn derivative_integral(values: &[f64], h: f64, order: usize) -> f64 {
    let mut d = values.to_vec();
    for _ in 0..order {
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
    }
    d.iter().map(|v| v.abs()).sum::<f64>() * h / h.powi(order as i32)
}

pub fn quadrature_error_bound(density: &GridDensity, k: u32) -> Result<QuadratureBound> {
    if k == 0 {
        return domain("quadrature bound needs k >= 1");
    }
    let order = 2 * k as usize + 1;
    let g = &density.grid;
    let integrand: Vec<f64> = (0..g.n_points).map(|j| density.values[j] * g.u(j).exp()).collect();
    let m = derivative_integral(&integrand, g.h, order);
    let coarse: Vec<f64> = integrand.iter().step_by(2).copied().collect();
    let m2 = derivative_integral(&coarse, 2.0 * g.h, order);
    let p = (2 * k + 1) as i32;
    let bound = g.h.powi(p) * m * zeta_int(2 * k + 1)?
        / (4f64.powi(k as i32) * std::f64::consts::PI.powi(p));
    Ok(QuadratureBound {
        bound,
        derivative_integral: m,
        noise_dominated: (m2 - m).abs() > 0.25 * m,
    })
}
