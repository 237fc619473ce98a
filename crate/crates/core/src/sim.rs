//! Euler simulation of the controlled surplus and its running infimum.
//!
//! Each step diffuses, projects any overshoot of the barrier back onto it
//! (paying the overshoot as continuous control), updates the infimum and
//! finally checks absorption at zero. Barrier policies act once at time 0
//! with a lump that brings the state back to the barrier.

use alloc::vec::Vec;

use crate::boundary::{boundary_at, BoundaryTable};
use crate::error::{Error, Result};
use crate::integrals::{JumpEvent, SamplePath};
use crate::model::{check_state, ModelParams};
use crate::rng::PathStream;

#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Never pay.
    Null,
    /// Pay everything at time 0.
    ImmediatePayout,
    /// Reflect at a fixed level.
    ConstantBarrier(f64),
    /// Reflect at the infimum-dependent free boundary `b(I)`.
    OptimalReflection(&'a BoundaryTable),
    /// Reflect at `factor * b(I)`; a deliberately mis-specified barrier.
    ScaledReflection { boundary: &'a BoundaryTable, factor: f64 },
}

impl Policy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Null => "null",
            Policy::ImmediatePayout => "immediate_payout",
            Policy::ConstantBarrier(_) => "constant_barrier",
            Policy::OptimalReflection(_) => "optimal_reflection",
            Policy::ScaledReflection { .. } => "scaled_reflection",
        }
    }

    fn check(&self, params: &ModelParams) -> Result<()> {
        match *self {
            Policy::ConstantBarrier(c) if !(c > 0.0 && c.is_finite()) => {
                Err(Error::Policy("constant barrier must be positive and finite"))
            }
            Policy::ScaledReflection { factor, .. } if !(factor > 0.0 && factor.is_finite()) => {
                Err(Error::Policy("barrier scale factor must be positive and finite"))
            }
            Policy::OptimalReflection(b) | Policy::ScaledReflection { boundary: b, .. }
                if b.params_hash() != params.fingerprint() =>
            {
                Err(Error::Configuration("boundary was solved for different parameters"))
            }
            _ => Ok(()),
        }
    }

    /// Reflection level while the infimum sits at `i`.
    fn barrier(&self, i: f64) -> Result<f64> {
        match *self {
            Policy::Null | Policy::ImmediatePayout => Ok(f64::INFINITY),
            Policy::ConstantBarrier(c) => Ok(c),
            Policy::OptimalReflection(b) => boundary_at(b, i),
            Policy::ScaledReflection { boundary, factor } => Ok(factor * boundary_at(boundary, i)?),
        }
    }

    /// Size of the time-0 jump from `(x, i)`.
    fn lump(&self, x: f64, i: f64) -> Result<f64> {
        Ok(match *self {
            Policy::Null => 0.0,
            Policy::ImmediatePayout => x,
            Policy::ConstantBarrier(c) => (x - c).max(0.0),
            Policy::OptimalReflection(b) => initial_lump(x, i, b)?,
            Policy::ScaledReflection { boundary, factor } => {
                let level = if i < boundary.i_star() {
                    boundary_at(boundary, i)?
                } else {
                    boundary.i_star()
                };
                (x - factor * level).max(0.0)
            }
        })
    }
}

/// How absorption at zero is detected between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Absorption {
    /// Only when a grid value is at or below zero. Misses excursions below
    /// zero inside a step, which biases payoffs upward by `O(sqrt(dt))`.
    Grid,
    /// Additionally kills the step with the probability that the Brownian
    /// bridge between the two grid values touched zero.
    Bridge,
}

/// Time grid, horizon and the random stream of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub path_index: u64,
    pub absorption: Absorption,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.horizon.is_finite() && self.dt <= self.horizon / 100.0) {
            return Err(Error::Configuration("need 0 < dt <= horizon/100"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        libm::round(self.horizon / self.dt) as usize
    }
}

/// Draws whether a Brownian bridge from `x0 > 0` to `x1 > 0` over one step
/// touched zero; `scale = 2 / (eta^2 dt)`. The uniform is only drawn when
/// the crossing probability is above `e^-40`.
fn bridge_hits_zero(x0: f64, x1: f64, scale: f64, rng: &mut PathStream) -> bool {
    let a = scale * x0 * x1;
    if a >= 40.0 {
        return false;
    }
    rng.uniform() < libm::exp(-a)
}

/// Time-0 dividend of the optimal policy: nothing in the waiting region,
/// down to the boundary in the first action region, and down the hockey
/// stick to `(i*, i*)` in the second.
pub fn initial_lump(x: f64, i: f64, boundary: &BoundaryTable) -> Result<f64> {
    check_state(x, i)?;
    if x <= 0.0 {
        return Err(Error::Domain("start is already absorbed"));
    }
    let i_star = boundary.i_star();
    if i >= i_star {
        return Ok(x - i_star);
    }
    let b = boundary_at(boundary, i)?;
    Ok((x - b).max(0.0))
}

/// Simulates one path; see [`simulate_path_into`].
pub fn simulate_path(params: &ModelParams, policy: &Policy, x0: f64, i0: f64, cfg: &SimConfig) -> Result<SamplePath> {
    let mut path = SamplePath {
        dt: cfg.dt,
        start: (x0, i0),
        x: Vec::new(),
        inf: Vec::new(),
        dc: Vec::new(),
        jumps: Vec::new(),
        absorbed_at: None,
        absorb_level: 0.0,
        discount_origin: 0.0,
    };
    simulate_path_into(&mut path, params, policy, x0, i0, cfg)?;
    Ok(path)
}

/// Simulates one path into `path`, reusing its buffers.
pub fn simulate_path_into(
    path: &mut SamplePath,
    params: &ModelParams,
    policy: &Policy,
    x0: f64,
    i0: f64,
    cfg: &SimConfig,
) -> Result<()> {
    params.validate()?;
    cfg.validate()?;
    policy.check(params)?;
    check_state(x0, i0)?;
    if x0 <= 0.0 {
        return Err(Error::Domain("start is already absorbed"));
    }

    path.dt = cfg.dt;
    path.start = (x0, i0);
    path.x.clear();
    path.inf.clear();
    path.dc.clear();
    path.jumps.clear();
    path.absorbed_at = None;
    path.absorb_level = 0.0;
    path.discount_origin = 0.0;

    let (mut x, mut i) = (x0, i0);
    let lump = policy.lump(x0, i0)?;
    if lump > 0.0 {
        let jump = JumpEvent {
            time_index: 0,
            x_pre: x0,
            i_pre: i0,
            delta_d: lump,
        };
        (x, i) = jump.post();
        if !(x >= 0.0) {
            return Err(Error::Policy("initial lump overshoots zero"));
        }
        path.jumps.push(jump);
    }
    path.x.push(x);
    path.inf.push(i);
    path.dc.push(0.0);
    if x <= 0.0 {
        path.absorbed_at = Some(0);
        return Ok(());
    }

    let drift = params.mu * cfg.dt;
    let vol = params.eta * libm::sqrt(cfg.dt);
    let bridge_scale = 2.0 / (params.eta * params.eta * cfg.dt);
    let mut barrier = policy.barrier(i)?;
    let mut rng = PathStream::new(cfg.seed, cfg.path_index);
    for k in 1..=cfg.n_steps() {
        let mut xn = x + drift + vol * rng.normal();
        if !xn.is_finite() {
            return Err(Error::Numerical("non-finite state in the Euler step"));
        }
        let mut dc = 0.0;
        if xn > barrier {
            dc = xn - barrier;
            xn = barrier;
        }
        if xn < i {
            i = xn;
            if xn > 0.0 {
                barrier = policy.barrier(i)?;
            }
        }
        if cfg.absorption == Absorption::Bridge && xn > 0.0 && bridge_hits_zero(x, xn, bridge_scale, &mut rng) {
            xn = 0.0;
            i = 0.0;
        }
        x = xn;
        path.x.push(x);
        path.inf.push(i);
        path.dc.push(dc);
        if x <= 0.0 {
            path.absorbed_at = Some(k);
            break;
        }
    }
    Ok(())
}

/// Outcome of [`path_support_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportReport {
    /// Largest `|x - b(I)|` over steps with continuous control.
    pub max_violation: f64,
    /// Tolerance the violations were judged against.
    pub tolerance: f64,
    pub control_steps: usize,
    pub violating_steps: usize,
    /// The jump structure is a single correct lump at time 0 (or nothing
    /// when no lump is due).
    pub jumps_ok: bool,
}

impl SupportReport {
    pub fn compliant(&self) -> bool {
        self.violating_steps == 0 && self.jumps_ok
    }
}

/// Checks that continuous dividends are only paid on the free boundary and
/// that the only jump is the initial lump.
pub fn path_support_check(path: &SamplePath, params: &ModelParams, boundary: &BoundaryTable) -> SupportReport {
    let tolerance = params.mu.abs() * path.dt + 4.0 * params.eta * libm::sqrt(path.dt);
    let mut report = SupportReport {
        max_violation: 0.0,
        tolerance,
        control_steps: 0,
        violating_steps: 0,
        jumps_ok: false,
    };
    let (x0, i0) = path.start;
    report.jumps_ok = match (initial_lump(x0, i0, boundary), path.jumps.as_slice()) {
        (Ok(l), []) => l == 0.0,
        (Ok(l), [j]) => j.time_index == 0 && (j.delta_d - l).abs() <= 1e-12 * l.max(1.0),
        _ => false,
    };
    if path.is_empty() {
        return report;
    }
    for k in 0..=path.end() {
        if path.dc[k] <= 0.0 {
            continue;
        }
        report.control_steps += 1;
        let gap = match boundary_at(boundary, path.inf[k]) {
            Ok(b) => (path.x[k] - b).abs(),
            Err(_) => f64::INFINITY,
        };
        report.max_violation = report.max_violation.max(gap);
        if gap > tolerance {
            report.violating_steps += 1;
        }
    }
    report
}
