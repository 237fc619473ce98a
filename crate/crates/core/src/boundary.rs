//! Free boundary `i -> b(i)` separating waiting from paying.
//!
//! `b` solves the Cauchy problem `b'(i) = flow(b(i), i)`, `b(0) = b_circ`,
//! which is integrated with classical RK4 on a fixed step. The solution is
//! strictly decreasing, crosses the diagonal once at the critical level `i*`
//! and has slope tending to `-q/beta` far out.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{char_roots, CharRoots, ModelParams};

/// Right-hand side of the boundary ODE.
///
/// With `s = i - b` this is
/// `(q/(αβ)) (α² e^{βs} - β² e^{αs}) / (β e^{αs} - α e^{βs})`. Numerator and
/// denominator are rescaled by the dominant exponential so that no
/// intermediate can overflow; the asymptotes `-q/β` (s → +∞) and `-q/α`
/// (s → -∞) come out exactly.
pub fn flow(b: f64, i: f64, params: &ModelParams) -> Result<f64> {
    if !(params.mu > 0.0 && params.q > 0.0) {
        return Err(Error::Configuration("the boundary ODE needs mu > 0 and q > 0"));
    }
    let roots = char_roots(params)?;
    Ok(flow_with_roots(b, i, params.q, roots.alpha, roots.beta))
}

#[inline]
pub(crate) fn flow_with_roots(b: f64, i: f64, q: f64, alpha: f64, beta: f64) -> f64 {
    let s = i - b;
    let (num, den) = if s >= 0.0 {
        // divide through by e^{βs}
        let e = libm::exp((alpha - beta) * s);
        (alpha * alpha - beta * beta * e, beta * e - alpha)
    } else {
        // divide through by e^{αs}
        let e = libm::exp((beta - alpha) * s);
        (alpha * alpha * e - beta * beta, beta - alpha * e)
    };
    q / (alpha * beta) * num / den
}

/// Discretised free boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTable {
    grid: Vec<f64>,
    values: Vec<f64>,
    i_star: f64,
    step: f64,
    params: ModelParams,
    roots: CharRoots,
    b_circ: f64,
}

impl BoundaryTable {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn i_star(&self) -> f64 {
        self.i_star
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn i_max(&self) -> f64 {
        *self.grid.last().expect("table has at least two nodes")
    }

    pub fn b_circ(&self) -> f64 {
        self.b_circ
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn roots(&self) -> &CharRoots {
        &self.roots
    }

    pub fn params_hash(&self) -> u64 {
        self.params.fingerprint()
    }

    /// Rebuilds a table from stored nodes, checking every invariant and
    /// recomputing `i*`.
    pub fn from_parts(
        params: ModelParams,
        grid: Vec<f64>,
        values: Vec<f64>,
        step: f64,
    ) -> Result<Self> {
        let (roots, b_circ) = ode_roots(&params)?;
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::Configuration("table needs at least two matching nodes"));
        }
        if grid[0] != 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Configuration("grid must start at 0 and increase strictly"));
        }
        if !(step > 0.0) {
            return Err(Error::Configuration("step must be positive"));
        }
        let mut table = BoundaryTable {
            grid,
            values,
            i_star: f64::NAN,
            step,
            params,
            roots,
            b_circ,
        };
        table.check_invariants()?;
        table.i_star = critical_infimum(&table)?;
        Ok(table)
    }

    fn check_invariants(&self) -> Result<()> {
        if self.values[0] != self.b_circ {
            return Err(Error::NumericalFailure("b(0) must equal the classical barrier"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite boundary value; reduce the step"));
        }
        if self.values.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::NumericalFailure(
                "boundary is not strictly decreasing; reduce the step",
            ));
        }
        let b0 = self.b_circ;
        if self
            .grid
            .iter()
            .zip(&self.values)
            .skip(1)
            .any(|(&i, &b)| !(b < i + b0))
        {
            return Err(Error::NumericalFailure(
                "boundary violates b(i) < i + b_circ; reduce the step",
            ));
        }
        Ok(())
    }

    /// Index `k` of the interval `[grid[k], grid[k+1]]` containing `i`.
    fn interval(&self, i: f64) -> usize {
        let last = self.grid.len() - 2;
        let mut k = ((i / self.step) as usize).min(last);
        while k > 0 && self.grid[k] > i {
            k -= 1;
        }
        while k < last && self.grid[k + 1] <= i {
            k += 1;
        }
        k
    }
}

fn ode_roots(params: &ModelParams) -> Result<(CharRoots, f64)> {
    params.validate()?;
    if !(params.mu > 0.0 && params.q > 0.0) {
        return Err(Error::Configuration("the boundary ODE needs mu > 0 and q > 0"));
    }
    let roots = char_roots(params)?;
    let b_circ = roots.b_circ.expect("mu > 0 defines the barrier");
    Ok((roots, b_circ))
}

/// Integrates the boundary ODE from `i = 0` to `i_max` with RK4.
///
/// Nodes sit at `k * step`; the last step is shortened to land on `i_max`
/// when `i_max` is not a multiple of `step`.
pub fn solve_boundary(params: &ModelParams, i_max: f64, step: f64) -> Result<BoundaryTable> {
    let (roots, b_circ) = ode_roots(params)?;
    if !(i_max > 0.0 && i_max.is_finite()) {
        return Err(Error::Configuration("i_max must be positive"));
    }
    if !(step > 0.0 && step <= i_max / 10.0) {
        return Err(Error::Configuration("step must lie in (0, i_max/10]"));
    }
    let (alpha, beta, q) = (roots.alpha, roots.beta, params.q);
    let rhs = |b: f64, i: f64| flow_with_roots(b, i, q, alpha, beta);

    let full = libm::floor(i_max / step) as usize;
    let mut grid = Vec::with_capacity(full + 2);
    let mut values = Vec::with_capacity(full + 2);
    grid.push(0.0);
    values.push(b_circ);
    let mut b = b_circ;
    let mut k = 0usize;
    loop {
        let i = grid[k];
        let next = ((k + 1) as f64 * step).min(i_max);
        let h = next - i;
        if h <= step * 1e-9 {
            // Fold a sliver of a last step into the previous node.
            let last = grid.len() - 1;
            grid[last] = i_max;
            break;
        }
        let k1 = rhs(b, i);
        let k2 = rhs(b + 0.5 * h * k1, i + 0.5 * h);
        let k3 = rhs(b + 0.5 * h * k2, i + 0.5 * h);
        let k4 = rhs(b + h * k3, next);
        b += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        grid.push(next);
        values.push(b);
        k += 1;
        if next >= i_max {
            break;
        }
    }

    let mut table = BoundaryTable {
        grid,
        values,
        i_star: f64::NAN,
        step,
        params: *params,
        roots,
        b_circ,
    };
    table.check_invariants()?;
    table.i_star = critical_infimum(&table)?;
    Ok(table)
}

/// Root of `g(i) = b(i) - i` by bisection on the interpolated table.
///
/// The bracket is `[0, min(b_circ, i_max)]`; `g(0) = b_circ > 0` and the
/// boundary is known to cross the diagonal before `b_circ`.
pub fn critical_infimum(table: &BoundaryTable) -> Result<f64> {
    let g = |i: f64| interpolate(table, i) - i;
    let mut lo = 0.0;
    let mut hi = table.b_circ.min(table.i_max());
    if !(g(hi) < 0.0) {
        return Err(Error::Configuration(
            "boundary does not cross the diagonal on the solved range; increase i_max",
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn interpolate(table: &BoundaryTable, i: f64) -> f64 {
    let k = table.interval(i);
    let (g0, g1) = (table.grid[k], table.grid[k + 1]);
    let (v0, v1) = (table.values[k], table.values[k + 1]);
    if i == g0 {
        return v0;
    }
    v0 + (v1 - v0) * ((i - g0) / (g1 - g0))
}

/// Piecewise-linear `b(i)`, exact at nodes, for `0 <= i <= i_max`.
pub fn boundary_at(table: &BoundaryTable, i: f64) -> Result<f64> {
    if !(i >= 0.0 && i <= table.i_max()) {
        return Err(Error::Domain("boundary query outside [0, i_max]"));
    }
    Ok(interpolate(table, i))
}
