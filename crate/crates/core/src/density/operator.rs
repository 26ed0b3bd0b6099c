use std::f64::consts::PI;

use crate::distributions::ReducedParams;
use crate::error::{Error, Result};
use crate::specfun::ln_norm_cdf;

use super::{Grid, GridDensity};

/// Kernel rows are truncated at this many standard deviations.
pub const KERNEL_HALF_WIDTH: f64 = 8.0;

/// Precomputed trapezoid discretisation of
/// `F'(u) = e^{beta - rho} int N(w; w0(u), beta) F(w) dw`,
/// `w0(u) = log(e^u - 1) + 3 beta / 2 - rho`, stored row-compressed.
///
/// With a tail exponent the integral over `w > u_max` is closed analytically
/// against the power-law continuation of the last grid value.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    grid: Grid,
    first_col: Vec<usize>,
    offsets: Vec<usize>,
    weights: Vec<f64>,
    tail_weights: Option<Vec<f64>>,
}

impl KernelOperator {
    pub fn new(grid: &Grid, rp: &ReducedParams, tail_exponent: Option<f64>) -> Result<Self> {
        let sd = rp.beta.sqrt();
        if sd < 3.0 * grid.h {
            return Err(Error::GridTooCoarse {
                kernel_width: sd,
                step: grid.h,
            });
        }
        let n = grid.n_points;
        let h = grid.h;
        let u_max = grid.u_max();
        let half = KERNEL_HALF_WIDTH * sd;
        let scale = (rp.beta - rp.rho).exp();
        let norm = scale * h / (2.0 * PI * rp.beta).sqrt();
        let shift = 1.5 * rp.beta - rp.rho;

        let band = (2.0 * half / h) as usize + 2;
        let mut first_col = vec![0; n];
        let mut offsets = Vec::with_capacity(n + 1);
        let mut weights = Vec::with_capacity(n * band);
        let mut tail_weights = tail_exponent.map(|_| vec![0.0; n]);
        offsets.push(0);
        offsets.push(0);
        for i in 1..n {
            let w0 = grid.u(i).exp_m1().ln() + shift;
            let lo = ((w0 - half) / h).ceil().max(0.0);
            let hi = ((w0 + half) / h).floor().min((n - 1) as f64);
            if lo <= hi {
                let (lo, hi) = (lo as usize, hi as usize);
                first_col[i] = lo;
                for j in lo..=hi {
                    let d = grid.u(j) - w0;
                    let mut wt = norm * (-d * d / (2.0 * rp.beta)).exp();
                    if j == 0 || j == n - 1 {
                        wt *= 0.5;
                    }
                    weights.push(wt);
                }
            }
            offsets.push(weights.len());
            if let (Some(mu), Some(tw)) = (tail_exponent, tail_weights.as_mut()) {
                // int_{u_max}^inf N(w; w0, beta) e^{-k (w - u_max)} dw with k = mu + 1
                if w0 + half > u_max {
                    let k = mu + 1.0;
                    let ln = -k * (w0 - u_max)
                        + 0.5 * k * k * rp.beta
                        + ln_norm_cdf((w0 - u_max - k * rp.beta) / sd);
                    tw[i] = scale * ln.exp();
                }
            }
        }
        Ok(Self {
            grid: *grid,
            first_col,
            offsets,
            weights,
            tail_weights,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn has_tail_closure(&self) -> bool {
        self.tail_weights.is_some()
    }

    /// Applies the discretised operator to arbitrary (possibly signed) values.
    pub fn apply_into(&self, values: &[f64], out: &mut [f64]) {
        let n = self.grid.n_points;
        debug_assert!(values.len() == n && out.len() == n);
        let last = values[n - 1];
        out[0] = 0.0;
        for i in 1..n {
            let row = &self.weights[self.offsets[i]..self.offsets[i + 1]];
            let start = self.first_col[i];
            let src = &values[start..start + row.len()];
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(src) {
                acc += w * v;
            }
            if let Some(tw) = &self.tail_weights {
                acc += tw[i] * last;
            }
            out[i] = acc;
        }
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        self.apply_into(values, &mut out);
        out
    }
}

/// One application of the operator: the law of `A (1 + X)` from the law of `X`.
/// The tail continuation of `density`, if any, closes the integral beyond the grid.
pub fn apply_operator(density: &GridDensity, rp: &ReducedParams) -> Result<GridDensity> {
    let op = KernelOperator::new(&density.grid, rp, density.tail_exponent())?;
    let mut values = op.apply(&density.values);
    for v in &mut values {
        *v = v.max(0.0);
    }
    let mut out = GridDensity {
        grid: density.grid,
        values,
        tail: density.tail,
    };
    out.refresh_tail_constant();
    Ok(out)
}
