//! Path integrals against the control `D` and the controlled infimum `I`.
//!
//! A control jump of size `ΔD` from `(x, i)` first moves `x` down towards
//! `i` (only `x` changes) and, if `ΔD > x - i`, continues along the diagonal
//! dragging `i` with it. The diamond integral charges `g` along exactly that
//! "hockey-stick" route; the box integral charges the diagonal leg with a
//! minus sign, since `I` decreases by the same amount.
//!
//! Paths live on a uniform grid. Node `k` holds the state at `t_k = k dt`
//! after everything that happened during step `k`: diffusion, continuous
//! control `dc[k]`, the infimum update and, last, a jump recorded with
//! `time_index == k`. The state at `0-` is `start`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::quad::integrate;

/// Relative tolerance of the inner jump integrals.
pub const JUMP_QUAD_TOL: f64 = 1e-10;

/// A function on the state space.
pub trait ScalarField {
    fn eval(&self, x: f64, i: f64) -> f64;

    /// Closed-form description, when the field is exponential-affine.
    fn as_exp_affine(&self) -> Option<ExpAffine> {
        None
    }
}

impl<F: Fn(f64, f64) -> f64> ScalarField for F {
    fn eval(&self, x: f64, i: f64) -> f64 {
        self(x, i)
    }
}

/// `g(x, i) = scale * exp(kx x + ki i) + shift`.
///
/// Jump integrals of such fields have exact antiderivatives, so they skip
/// quadrature entirely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpAffine {
    pub scale: f64,
    pub kx: f64,
    pub ki: f64,
    pub shift: f64,
}

impl ExpAffine {
    pub fn constant(c: f64) -> Self {
        ExpAffine {
            scale: 0.0,
            kx: 0.0,
            ki: 0.0,
            shift: c,
        }
    }

    /// Marginal dividend reward `e^{-q i}`.
    pub fn infimum_discount(q: f64) -> Self {
        ExpAffine {
            scale: 1.0,
            kx: 0.0,
            ki: -q,
            shift: 0.0,
        }
    }

    fn mirrored(self) -> Self {
        ExpAffine {
            kx: -self.kx,
            ki: -self.ki,
            ..self
        }
    }

    /// `∫_{u0}^{u1} g(x - u, i) du`.
    fn off_diagonal(&self, x: f64, i: f64, u0: f64, u1: f64) -> f64 {
        self.scale * libm::exp(self.ki * i) * exp_segment(self.kx, x, u0, u1) + self.shift * (u1 - u0)
    }

    /// `∫_{u0}^{u1} g(x - u, x - u) du`.
    fn diagonal(&self, x: f64, u0: f64, u1: f64) -> f64 {
        self.scale * exp_segment(self.kx + self.ki, x, u0, u1) + self.shift * (u1 - u0)
    }
}

/// `∫_{u0}^{u1} e^{k (x - u)} du` for `u0 <= u1`.
fn exp_segment(k: f64, x: f64, u0: f64, u1: f64) -> f64 {
    if k == 0.0 {
        return u1 - u0;
    }
    -libm::exp(k * (x - u0)) * libm::expm1(-k * (u1 - u0)) / k
}

impl ScalarField for ExpAffine {
    fn eval(&self, x: f64, i: f64) -> f64 {
        if self.scale == 0.0 {
            return self.shift;
        }
        self.scale * libm::exp(self.kx * x + self.ki * i) + self.shift
    }

    fn as_exp_affine(&self) -> Option<ExpAffine> {
        Some(*self)
    }
}

/// `g(-x, -i)`: carries a running-supremum field over to the infimum side.
pub struct Mirrored<'a, G: ?Sized>(pub &'a G);

impl<G: ScalarField + ?Sized> ScalarField for Mirrored<'_, G> {
    fn eval(&self, x: f64, i: f64) -> f64 {
        self.0.eval(-x, -i)
    }

    fn as_exp_affine(&self) -> Option<ExpAffine> {
        self.0.as_exp_affine().map(ExpAffine::mirrored)
    }
}

/// A control jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time_index: usize,
    pub x_pre: f64,
    pub i_pre: f64,
    pub delta_d: f64,
}

impl JumpEvent {
    /// Post-jump `(x, i)`.
    pub fn post(&self) -> (f64, f64) {
        let x = self.x_pre - self.delta_d;
        (x, self.i_pre.min(x))
    }

    /// Length of the leg along which only `x` moves.
    pub fn off_diagonal_len(&self) -> f64 {
        (self.x_pre - self.i_pre).min(self.delta_d)
    }

    /// Length of the leg along the diagonal (zero unless the jump
    /// overshoots the infimum).
    pub fn diagonal_len(&self) -> f64 {
        (self.delta_d - (self.x_pre - self.i_pre)).max(0.0)
    }
}

/// Discretised trajectory of `(X, I, D)`.
///
/// The same type carries a running-supremum path `(Y, S)`, with `x` holding
/// `Y` and `inf` holding `S`; see [`SamplePath::mirror`].
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub dt: f64,
    /// `(X, I)` at time `0-`.
    pub start: (f64, f64),
    pub x: Vec<f64>,
    pub inf: Vec<f64>,
    /// Continuous control paid during each step; `dc[0]` is always zero.
    pub dc: Vec<f64>,
    pub jumps: Vec<JumpEvent>,
    pub absorbed_at: Option<usize>,
    /// Jumps may not push `X` below this level. `0` for the dividend problem.
    pub absorb_level: f64,
    /// Discount accumulated before node 0; nonzero only for tails of a
    /// split path.
    pub discount_origin: f64,
}

impl SamplePath {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Last node that counts: the absorption index or the final node.
    pub fn end(&self) -> usize {
        self.absorbed_at.unwrap_or(self.x.len().saturating_sub(1))
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| self.time(k))
    }

    /// Total control: continuous part plus all jumps up to the end.
    pub fn total_control(&self) -> f64 {
        let end = self.end();
        let cont: f64 = self.dc[..=end].iter().sum();
        cont + self
            .jumps
            .iter()
            .filter(|j| j.time_index <= end)
            .map(|j| j.delta_d)
            .sum::<f64>()
    }

    fn jump_at(&self, k: usize) -> Option<&JumpEvent> {
        self.jumps.iter().find(|j| j.time_index == k)
    }

    /// Checks the running-infimum invariants and jump admissibility.
    pub fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if n == 0 || self.inf.len() != n || self.dc.len() != n {
            return Err(Error::PathInvalid("path arrays must be nonempty and of equal length"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::PathInvalid("dt must be positive"));
        }
        if let Some(a) = self.absorbed_at {
            if a >= n {
                return Err(Error::PathInvalid("absorption index beyond the path"));
            }
        }
        if !(self.start.0 >= self.start.1) {
            return Err(Error::PathInvalid("start state must satisfy x >= i"));
        }
        if self.jumps.windows(2).any(|w| w[1].time_index <= w[0].time_index) {
            return Err(Error::PathInvalid("jumps must have strictly increasing indices"));
        }
        let end = self.end();
        for j in &self.jumps {
            if j.time_index > end {
                return Err(Error::PathInvalid("jump after the end of the path"));
            }
            if !(j.delta_d > 0.0) || !(j.x_pre >= j.i_pre) {
                return Err(Error::PathInvalid("jump must be positive and start in the state space"));
            }
            let (xp, ip) = j.post();
            if xp < self.absorb_level {
                return Err(Error::PathInvalid("control jump crosses the absorption level"));
            }
            if self.x[j.time_index] != xp || self.inf[j.time_index] != ip {
                return Err(Error::PathInvalid("node does not hold the post-jump state"));
            }
        }
        let mut prev_inf = self.start.1;
        for k in 0..=end {
            let (x, i, dc) = (self.x[k], self.inf[k], self.dc[k]);
            if !(x.is_finite() && i.is_finite() && dc >= 0.0) {
                return Err(Error::PathInvalid("non-finite state or negative control"));
            }
            if i > prev_inf || i > x {
                return Err(Error::PathInvalid("infimum must be nonincreasing and below x"));
            }
            let level = match self.jump_at(k) {
                Some(j) => j.i_pre,
                None => i,
            };
            if level < prev_inf && self.jump_at(k).is_none() && x != i {
                return Err(Error::PathInvalid("infimum decreased away from the diagonal"));
            }
            prev_inf = i;
        }
        Ok(())
    }

    /// The coordinate reflection `(X, I) -> (-X, -I)`; maps a supremum path
    /// to an infimum path and back.
    pub fn mirror(&self) -> SamplePath {
        SamplePath {
            dt: self.dt,
            start: (-self.start.0, -self.start.1),
            x: self.x.iter().map(|v| -v).collect(),
            inf: self.inf.iter().map(|v| -v).collect(),
            dc: self.dc.clone(),
            jumps: self
                .jumps
                .iter()
                .map(|j| JumpEvent {
                    x_pre: -j.x_pre,
                    i_pre: -j.i_pre,
                    ..*j
                })
                .collect(),
            absorbed_at: self.absorbed_at,
            absorb_level: -self.absorb_level,
            discount_origin: self.discount_origin,
        }
    }

    /// Splits at a node without a jump: the head keeps nodes `0..=m`, the
    /// tail restarts from node `m` with the discount carried over.
    pub fn split_at<R: ScalarField + ?Sized>(&self, m: usize, r: &R) -> Result<(SamplePath, SamplePath)> {
        if m >= self.end() || self.jump_at(m).is_some() {
            return Err(Error::PathInvalid("split node must be interior and jump-free"));
        }
        let disc = discount_log(self, r);
        let head = SamplePath {
            x: self.x[..=m].to_vec(),
            inf: self.inf[..=m].to_vec(),
            dc: self.dc[..=m].to_vec(),
            jumps: self.jumps.iter().filter(|j| j.time_index <= m).copied().collect(),
            absorbed_at: None,
            ..self.clone()
        };
        let mut dc = self.dc[m..].to_vec();
        dc[0] = 0.0;
        let tail = SamplePath {
            dt: self.dt,
            start: (self.x[m], self.inf[m]),
            x: self.x[m..].to_vec(),
            inf: self.inf[m..].to_vec(),
            dc,
            jumps: self
                .jumps
                .iter()
                .filter(|j| j.time_index > m)
                .map(|j| JumpEvent {
                    time_index: j.time_index - m,
                    ..*j
                })
                .collect(),
            absorbed_at: self.absorbed_at.map(|a| a - m),
            absorb_level: self.absorb_level,
            discount_origin: disc[m],
        };
        Ok((head, tail))
    }
}

/// Incremental construction of valid paths, mostly for tests and tools.
#[derive(Debug, Clone)]
pub struct PathBuilder {
    path: SamplePath,
}

impl PathBuilder {
    /// Path starting at `(x0, i0)` with an optional jump at time 0.
    pub fn new(x0: f64, i0: f64, dt: f64, initial_jump: Option<f64>) -> Self {
        let mut path = SamplePath {
            dt,
            start: (x0, i0),
            x: Vec::new(),
            inf: Vec::new(),
            dc: Vec::new(),
            jumps: Vec::new(),
            absorbed_at: None,
            absorb_level: f64::NEG_INFINITY,
            discount_origin: 0.0,
        };
        match initial_jump {
            Some(d) if d > 0.0 => {
                let j = JumpEvent {
                    time_index: 0,
                    x_pre: x0,
                    i_pre: i0,
                    delta_d: d,
                };
                let (x, i) = j.post();
                path.jumps.push(j);
                path.x.push(x);
                path.inf.push(i);
            }
            _ => {
                path.x.push(x0);
                path.inf.push(i0.min(x0));
            }
        }
        path.dc.push(0.0);
        PathBuilder { path }
    }

    pub fn absorb_level(mut self, level: f64) -> Self {
        self.path.absorb_level = level;
        self
    }

    /// One step: move `x` by `dx`, pay `dc` continuously, update the
    /// infimum, then apply an optional jump.
    pub fn step(&mut self, dx: f64, dc: f64, jump: Option<f64>) -> &mut Self {
        let k = self.path.x.len();
        let mut x = self.path.x[k - 1] + dx - dc;
        let mut i = self.path.inf[k - 1].min(x);
        if let Some(d) = jump.filter(|d| *d > 0.0) {
            let j = JumpEvent {
                time_index: k,
                x_pre: x,
                i_pre: i,
                delta_d: d,
            };
            (x, i) = j.post();
            self.path.jumps.push(j);
        }
        self.path.x.push(x);
        self.path.inf.push(i);
        self.path.dc.push(dc);
        self
    }

    pub fn current(&self) -> (f64, f64) {
        let k = self.path.x.len() - 1;
        (self.path.x[k], self.path.inf[k])
    }

    pub fn absorbed(&mut self) -> &mut Self {
        self.path.absorbed_at = Some(self.path.x.len() - 1);
        self
    }

    pub fn build(self) -> SamplePath {
        self.path
    }
}

/// `∫_0^{t_k} r ds` at every node up to the end, trapezoidal in time.
pub fn discount_log<R: ScalarField + ?Sized>(path: &SamplePath, r: &R) -> Vec<f64> {
    let end = path.end();
    let mut out = Vec::with_capacity(end + 1);
    let mut acc = path.discount_origin;
    let mut prev = r.eval(path.x[0], path.inf[0]);
    out.push(acc);
    for k in 1..=end {
        let cur = r.eval(path.x[k], path.inf[k]);
        acc += 0.5 * path.dt * (prev + cur);
        out.push(acc);
        prev = cur;
    }
    out
}

/// `(∫ along the x-leg, ∫ along the diagonal leg)` of one jump.
fn jump_legs<G: ScalarField + ?Sized>(j: &JumpEvent, g: &G) -> (f64, f64) {
    let gap = j.x_pre - j.i_pre;
    let off_len = j.off_diagonal_len();
    let overshoots = j.delta_d > gap;
    if let Some(e) = g.as_exp_affine() {
        let off = e.off_diagonal(j.x_pre, j.i_pre, 0.0, off_len);
        let diag = if overshoots {
            e.diagonal(j.x_pre, gap, j.delta_d)
        } else {
            0.0
        };
        return (off, diag);
    }
    let (x, i) = (j.x_pre, j.i_pre);
    let off = integrate(|u| g.eval(x - u, i), 0.0, off_len, JUMP_QUAD_TOL);
    let diag = if overshoots {
        integrate(|u| g.eval(x - u, x - u), gap, j.delta_d, JUMP_QUAD_TOL)
    } else {
        0.0
    };
    (off, diag)
}

fn diamond_with(path: &SamplePath, disc: &[f64], g: &(impl ScalarField + ?Sized)) -> f64 {
    let end = path.end();
    let mut total = 0.0;
    for k in 0..=end {
        let dc = path.dc[k];
        if dc > 0.0 {
            total += libm::exp(-disc[k]) * g.eval(path.x[k], path.inf[k]) * dc;
        }
    }
    for j in path.jumps.iter().filter(|j| j.time_index <= end) {
        let (off, diag) = jump_legs(j, g);
        total += libm::exp(-disc[j.time_index]) * (off + diag);
    }
    total
}

fn box_with(path: &SamplePath, disc: &[f64], g: &(impl ScalarField + ?Sized)) -> f64 {
    let end = path.end();
    let mut total = 0.0;
    let mut prev_inf = path.start.1;
    let mut jumps = path.jumps.iter().filter(|j| j.time_index <= end).peekable();
    for k in 0..=end {
        let jump = jumps.next_if(|j| j.time_index == k);
        let w = || libm::exp(-disc[k]);
        // Continuous decrease of I during the step, before any jump.
        let (level, x_at) = match jump {
            Some(j) => (j.i_pre, j.i_pre),
            None => (path.inf[k], path.x[k]),
        };
        if level < prev_inf {
            total += w() * g.eval(x_at, level) * (level - prev_inf);
        }
        if let Some(j) = jump {
            if j.delta_d > j.x_pre - j.i_pre {
                total -= w() * jump_legs(j, g).1;
            }
        }
        prev_inf = path.inf[k];
    }
    total
}

/// Integral of `e^{-∫r} g` against the control `D`.
pub fn diamond_integral<R, G>(path: &SamplePath, r: &R, g: &G) -> Result<f64>
where
    R: ScalarField + ?Sized,
    G: ScalarField + ?Sized,
{
    path.validate()?;
    let disc = discount_log(path, r);
    Ok(diamond_with(path, &disc, g))
}

/// Integral of `e^{-∫r} g` against the infimum `I`: the continuous decrease
/// of `I` (supported on the diagonal) minus the diagonal legs of jumps.
/// Nonpositive whenever `g >= 0`.
pub fn box_integral<R, G>(path: &SamplePath, r: &R, g: &G) -> Result<f64>
where
    R: ScalarField + ?Sized,
    G: ScalarField + ?Sized,
{
    path.validate()?;
    let disc = discount_log(path, r);
    Ok(box_with(path, &disc, g))
}

fn validate_sup(path_sup: &SamplePath) -> Result<SamplePath> {
    if !(path_sup.start.0 <= path_sup.start.1) {
        return Err(Error::PathInvalid("supremum path must start with y <= s"));
    }
    let mirrored = path_sup.mirror();
    mirrored.validate()?;
    Ok(mirrored)
}

/// Diamond integral for a running-supremum path `(Y, S)`, where control
/// pushes `Y` up. Computed on the mirrored path `(-Y, -S)` with mirrored
/// fields.
pub fn diamond_integral_sup<R, G>(path_sup: &SamplePath, r: &R, g: &G) -> Result<f64>
where
    R: ScalarField + ?Sized,
    G: ScalarField + ?Sized,
{
    let m = validate_sup(path_sup)?;
    let disc = discount_log(&m, &Mirrored(r));
    Ok(diamond_with(&m, &disc, &Mirrored(g)))
}

/// Box integral against a running supremum `S`. `dS = -dI` under the
/// mirror, so both the continuous part and the jump legs change sign;
/// nonnegative whenever `g >= 0`.
pub fn box_integral_sup<R, G>(path_sup: &SamplePath, r: &R, g: &G) -> Result<f64>
where
    R: ScalarField + ?Sized,
    G: ScalarField + ?Sized,
{
    let m = validate_sup(path_sup)?;
    let disc = discount_log(&m, &Mirrored(r));
    Ok(-box_with(&m, &disc, &Mirrored(g)))
}

/// Running reward plus the diamond and box terms, all under one discount
/// stream. The running term is trapezoidal on the grid up to the end of
/// the path.
pub fn payoff_functional<R, P, F, H>(path: &SamplePath, r: &R, pi: &P, f: &F, h: H) -> Result<f64>
where
    R: ScalarField + ?Sized,
    P: ScalarField + ?Sized,
    F: ScalarField + ?Sized,
    H: Fn(f64) -> f64,
{
    path.validate()?;
    let disc = discount_log(path, r);
    let end = path.end();
    let mut running = 0.0;
    let no_running = pi.as_exp_affine() == Some(ExpAffine::constant(0.0));
    let mut prev = libm::exp(-disc[0]) * pi.eval(path.x[0], path.inf[0]);
    for k in (1..=end).filter(|_| !no_running) {
        let cur = libm::exp(-disc[k]) * pi.eval(path.x[k], path.inf[k]);
        running += 0.5 * path.dt * (prev + cur);
        prev = cur;
    }
    let control = diamond_with(path, &disc, f);
    let infimum = box_with(path, &disc, &|_x: f64, i: f64| h(i));
    Ok(running + control + infimum)
}
