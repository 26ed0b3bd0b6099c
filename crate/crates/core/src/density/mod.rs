//! Densities sampled on a uniform grid in `u = log(1 + x)`, the Gaussian-kernel
//! operator mapping the law of `X` to the law of `A (1 + X)`, and fixed-point
//! solvers for the perpetuity and the geometrically stopped sum.

mod operator;
mod solver;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad;
use crate::tails::TailAsymptote;

pub use operator::{apply_operator, KernelOperator, KERNEL_HALF_WIDTH};
pub use solver::{
    default_u_max, quadrature_error_bound, solve_geometric, solve_infinite, InitialDensity,
    QuadratureBound, SolveOptions, SolveReport,
};

/// Uniform grid `u_j = j h`, `j = 0 .. n_points - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub h: f64,
    pub n_points: usize,
}

impl Grid {
    pub fn new(h: f64, n_points: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return domain(format!("grid step must be positive, got {h}"));
        }
        if n_points < 16 {
            return domain(format!("grid needs at least 16 points, got {n_points}"));
        }
        Ok(Self { h, n_points })
    }

    /// Smallest grid with step `h` reaching at least `u_max`.
    pub fn covering(h: f64, u_max: f64) -> Result<Self> {
        if !(u_max > 0.0) {
            return domain(format!("u_max must be positive, got {u_max}"));
        }
        Self::new(h, ((u_max / h).ceil() as usize + 1).max(16))
    }

    #[inline]
    pub fn u(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn u_max(&self) -> f64 {
        self.u(self.n_points - 1)
    }

    pub fn x_max(&self) -> f64 {
        self.u_max().exp_m1()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|j| self.u(j).exp_m1())
    }
}

/// A density `F(u) = f(e^u - 1)` on a [`Grid`], optionally continued beyond the
/// grid by a power-law tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub tail: Option<TailAsymptote>,
}

impl GridDensity {
    pub fn new(grid: Grid, values: Vec<f64>, tail: Option<TailAsymptote>) -> Result<Self> {
        if values.len() != grid.n_points {
            return domain(format!(
                "expected {} grid values, got {}",
                grid.n_points,
                values.len()
            ));
        }
        Ok(Self { grid, values, tail })
    }

    /// Samples an x-space density on the grid; `F(0)` is pinned to zero.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let mut values: Vec<f64> = grid.xs().map(|x| f(x).max(0.0)).collect();
        values[0] = 0.0;
        Self { grid, values, tail: None }
    }

    #[inline]
    fn jacobian_value(&self, j: usize) -> f64 {
        self.values[j] * self.grid.u(j).exp()
    }

    /// Trapezoid weight of node `j` on `[0, u_max]`.
    #[inline]
    fn weight(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.grid.n_points {
            0.5 * self.grid.h
        } else {
            self.grid.h
        }
    }

    /// Exponent of the continuation `f(x) = F_last (x / x_max)^-(exponent + 1)`.
    pub fn tail_exponent(&self) -> Option<f64> {
        self.tail.map(|t| t.exponent)
    }

    /// Probability mass beyond `x_max` under the tail continuation.
    pub fn tail_mass(&self) -> f64 {
        match self.tail {
            Some(t) => self.values[self.grid.n_points - 1] * self.grid.x_max() / t.exponent,
            None => 0.0,
        }
    }

    /// `int F(u) e^u du` over the grid plus the tail mass.
    pub fn mass(&self) -> f64 {
        let body: f64 = (0..self.grid.n_points)
            .map(|j| self.weight(j) * self.jacobian_value(j))
            .sum();
        body + self.tail_mass()
    }

    /// Rescales to unit mass and returns the mass before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let m = self.mass();
        if m > 0.0 {
            for v in &mut self.values {
                *v /= m;
            }
        }
        self.refresh_tail_constant();
        m
    }

    /// Re-derives the tail constant from the last grid value so that the
    /// continuation is `P(X > x) = constant x^-exponent` beyond the grid.
    pub(crate) fn refresh_tail_constant(&mut self) {
        if let Some(t) = self.tail.as_mut() {
            let x_max = self.grid.x_max();
            t.constant =
                self.values[self.grid.n_points - 1] * x_max.powf(t.exponent + 1.0) / t.exponent;
        }
    }

    /// Density of `X` at `x`, linearly interpolated in `u`.
    pub fn pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        let u = x.ln_1p();
        let g = &self.grid;
        if u >= g.u_max() {
            return match self.tail {
                Some(t) => self.values[g.n_points - 1] * (x / g.x_max()).powf(-t.exponent - 1.0),
                None => 0.0,
            };
        }
        let k = (u / g.h).floor() as usize;
        let s = u / g.h - k as f64;
        self.values[k] * (1.0 - s) + self.values[k + 1] * s
    }

    // integral of F e^u over [u_k, u] with linear interpolation inside the cell
    fn partial_cell(&self, k: usize, u: f64) -> f64 {
        let g0 = self.jacobian_value(k);
        let g1 = self.jacobian_value(k + 1);
        let d = u - self.grid.u(k);
        let gu = g0 + (g1 - g0) * d / self.grid.h;
        0.5 * d * (g0 + gu)
    }

    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let u = x.ln_1p();
        if u >= self.grid.u_max() {
            return None;
        }
        Some(((u / self.grid.h).floor() as usize, u))
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        match self.locate(x) {
            None => self.mass() - self.tail_survival(x),
            Some((k, u)) => {
                let full: f64 = (0..k)
                    .map(|j| 0.5 * self.grid.h * (self.jacobian_value(j) + self.jacobian_value(j + 1)))
                    .sum();
                full + self.partial_cell(k, u)
            }
        }
    }

    /// `P(X > x)`, accumulated from the right so small tail probabilities
    /// keep their relative accuracy.
    pub fn survival(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return self.mass();
        }
        match self.locate(x) {
            None => self.tail_survival(x),
            Some((k, u)) => {
                let n = self.grid.n_points;
                let full: f64 = (k..n - 1)
                    .map(|j| 0.5 * self.grid.h * (self.jacobian_value(j) + self.jacobian_value(j + 1)))
                    .sum();
                full - self.partial_cell(k, u) + self.tail_mass()
            }
        }
    }

    fn tail_survival(&self, x: f64) -> f64 {
        match self.tail {
            Some(t) => self.tail_mass() * (x / self.grid.x_max()).powf(-t.exponent),
            None => 0.0,
        }
    }

    /// `E[g(X)]` by trapezoid quadrature in `u` plus the analytic tail
    /// continuation. `growth` is the power-law growth rate of `g`; the
    /// expectation is rejected as divergent when it reaches the tail exponent.
    pub fn expectation(&self, payoff: impl Fn(f64) -> f64, growth: f64) -> Result<f64> {
        let body: f64 = (0..self.grid.n_points)
            .map(|j| {
                let v = self.jacobian_value(j);
                if v == 0.0 {
                    0.0
                } else {
                    self.weight(j) * v * payoff(self.grid.u(j).exp_m1())
                }
            })
            .sum();
        let tail = match self.tail {
            None => 0.0,
            Some(t) => {
                if growth >= t.exponent {
                    return Err(Error::DivergentExpectation {
                        growth,
                        exponent: t.exponent,
                    });
                }
                let last = self.values[self.grid.n_points - 1];
                if last == 0.0 {
                    0.0
                } else {
                    let x_max = self.grid.x_max();
                    // x = x_max e^s turns the power-law tail into last * x_max * e^{-exponent s} ds
                    let scale = last * x_max;
                    scale
                        * quad::integrate_to_inf(
                            |s| payoff(x_max * s.exp()) * (-t.exponent * s).exp(),
                            0.0,
                            1e-12,
                        )
                }
            }
        };
        Ok(body + tail)
    }

    pub fn mean(&self) -> Result<f64> {
        self.expectation(|x| x, 1.0)
    }

    /// `P(X <= x_j)` at every grid node.
    pub fn cdf_at_nodes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.n_points);
        let mut acc = 0.0;
        out.push(0.0);
        for j in 1..self.grid.n_points {
            acc += 0.5 * self.grid.h * (self.jacobian_value(j - 1) + self.jacobian_value(j));
            out.push(acc);
        }
        out
    }

    /// `sup_j |P(scale X <= scale x_j) - cdf(scale x_j)|` over the grid nodes,
    /// comparing the law of `scale X` with a reference distribution.
    pub fn sup_cdf_distance(&self, scale: f64, cdf: impl Fn(f64) -> f64) -> f64 {
        self.cdf_at_nodes()
            .iter()
            .enumerate()
            .map(|(j, c)| (c - cdf(scale * self.grid.u(j).exp_m1())).abs())
            .fold(0.0, f64::max)
    }

    /// Largest absolute difference of grid values; grids must match.
    pub fn sup_distance(&self, other: &GridDensity) -> Result<f64> {
        if self.grid != other.grid {
            return domain("densities live on different grids");
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Writes `u,x,F,f` rows; `f` is the density in `x`, numerically equal to `F`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "u,x,F,f")?;
        for (j, v) in self.values.iter().enumerate() {
            let u = self.grid.u(j);
            writeln!(w, "{u:.6},{:.10e},{v:.10e},{v:.10e}", u.exp_m1())?;
        }
        Ok(())
    }
}
