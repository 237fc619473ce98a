//! Monte Carlo estimation and the quantitative checks built on it.

use infctl_core::model::value_point;
use infctl_core::{
    boundary_at, char_roots, classical_value, payoff_functional, simulate_path_into, solve_boundary,
    value, BoundaryTable, CharRoots, ExpAffine, ModelParams, Policy, Region, SamplePath, SimConfig,
};
use rayon::prelude::*;
use serde::Serialize;

/// Paths per parallel work unit. Results are gathered per chunk and reduced
/// in path order, so the worker count never changes the output.
const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PayoffEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

impl PayoffEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let stderr = (var / n).sqrt();
        PayoffEstimate {
            mean,
            stderr,
            n_paths: samples.len(),
            ci95_low: mean - 1.96 * stderr,
            ci95_high: mean + 1.96 * stderr,
        }
    }
}

/// Discounted dividends of one simulated path.
pub fn dividend_payoff(path: &SamplePath, params: &ModelParams) -> infctl_core::Result<f64> {
    let zero = ExpAffine::constant(0.0);
    payoff_functional(
        path,
        &ExpAffine::constant(params.rho),
        &zero,
        &ExpAffine::infimum_discount(params.q),
        |_| 0.0,
    )
}

/// Per-path payoffs for path indices `0..n_paths`, in index order.
pub fn mc_samples(
    params: &ModelParams,
    policy: &Policy,
    x0: f64,
    i0: f64,
    n_paths: usize,
    cfg: &SimConfig,
) -> infctl_core::Result<Vec<f64>> {
    let starts: Vec<usize> = (0..n_paths).step_by(CHUNK).collect();
    let chunks: Vec<infctl_core::Result<Vec<f64>>> = starts
        .par_iter()
        .map(|&start| {
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
            let end = (start + CHUNK).min(n_paths);
            let mut out = Vec::with_capacity(end - start);
            for n in start..end {
                let c = SimConfig {
                    path_index: cfg.path_index + n as u64,
                    ..*cfg
                };
                simulate_path_into(&mut path, params, policy, x0, i0, &c)?;
                out.push(dividend_payoff(&path, params)?);
            }
            Ok(out)
        })
        .collect();
    let mut samples = Vec::with_capacity(n_paths);
    for c in chunks {
        samples.extend(c?);
    }
    Ok(samples)
}

/// Monte Carlo estimate of the discounted dividends under `policy`.
pub fn mc_payoff(
    params: &ModelParams,
    policy: &Policy,
    x0: f64,
    i0: f64,
    n_paths: usize,
    cfg: &SimConfig,
) -> infctl_core::Result<PayoffEstimate> {
    if n_paths < 100 {
        return Err(infctl_core::Error::Configuration("need at least 100 paths"));
    }
    Ok(PayoffEstimate::from_samples(&mc_samples(params, policy, x0, i0, n_paths, cfg)?))
}

/// Variational-inequality residuals of the closed-form value on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Largest `|(L - rho) v|` in the waiting region.
    pub max_pde_residual_c: f64,
    /// Largest `(L - rho) v` on the action regions; should be `<= 0`.
    pub min_vi_slack_d: f64,
    /// Most negative `v_x - e^{-qi}`; should be `>= 0`.
    pub min_gradient_gap: f64,
    /// Largest `|v_i(i, i)|` along the waiting part of the diagonal.
    pub max_neumann: f64,
    /// `v(0, 0)`.
    pub dirichlet: f64,
    /// The waiting-region formula continued to `(0, 0)`.
    pub dirichlet_branch: f64,
    pub points_c: usize,
    pub points_d: usize,
    pub grid_spec: String,
}

/// Evaluates the residual report on `nx` x `ni` points of
/// `0 < x <= 2 b_circ`, `0 <= i <= min(x, 2 i*)`.
pub fn hjb_residual_grid(params: &ModelParams, boundary: &BoundaryTable, nx: usize, ni: usize) -> infctl_core::Result<ResidualReport> {
    if nx < 50 || ni < 50 {
        return Err(infctl_core::Error::Configuration("residual grid needs at least 50 points per axis"));
    }
    let (x_max, i_max) = (2.0 * boundary.b_circ(), 2.0 * boundary.i_star());
    let ModelParams { mu, eta, rho, q } = *params;
    let mut r = ResidualReport {
        max_pde_residual_c: 0.0,
        min_vi_slack_d: f64::NEG_INFINITY,
        min_gradient_gap: f64::INFINITY,
        max_neumann: 0.0,
        dirichlet: value(0.0, 0.0, params, Some(boundary))?,
        dirichlet_branch: boundary.roots().waiting_profile(-boundary.b_circ()),
        points_c: 0,
        points_d: 0,
        grid_spec: format!("x in (0, {x_max:.6}] x {nx}, i in [0, {i_max:.6}] x {ni}, i <= x"),
    };
    for jx in 1..=nx {
        let x = x_max * jx as f64 / nx as f64;
        for ki in 0..ni {
            let i = i_max * ki as f64 / (ni - 1) as f64;
            if i > x {
                break;
            }
            let p = value_point(x, i, params, Some(boundary))?;
            let lv = 0.5 * eta * eta * p.v_xx + mu * p.v_x - rho * p.v;
            match p.region {
                Region::WaitC => {
                    r.points_c += 1;
                    r.max_pde_residual_c = r.max_pde_residual_c.max(lv.abs());
                }
                Region::ActD1 | Region::ActD2 => {
                    r.points_d += 1;
                    r.min_vi_slack_d = r.min_vi_slack_d.max(lv);
                }
                Region::Absorbed => continue,
            }
            r.min_gradient_gap = r.min_gradient_gap.min(p.v_x - (-q * i).exp());
        }
    }
    for k in 0..ni {
        let i = boundary.i_star() * k as f64 / ni as f64;
        if i <= 0.0 {
            continue;
        }
        let p = value_point(i, i, params, Some(boundary))?;
        if p.region == Region::WaitC {
            r.max_neumann = r.max_neumann.max(p.v_i.abs());
        }
    }
    Ok(r)
}

/// `sinh(y) - y` without cancellation.
fn sinh_excess(y: f64) -> f64 {
    if y.abs() < 0.1 {
        let y2 = y * y;
        let mut term = y * y2 / 6.0;
        let mut sum = 0.0;
        for n in 1..8 {
            sum += term;
            term *= y2 / ((2 * n + 2) * (2 * n + 3)) as f64;
        }
        sum
    } else {
        y.sinh() - y
    }
}

/// `2 (cosh(y) - 1) - y^2` without cancellation.
fn cosh_excess(y: f64) -> f64 {
    if y.abs() < 0.1 {
        let y2 = y * y;
        let mut term = y2 * y2 / 12.0;
        let mut sum = 0.0;
        for n in 2..9 {
            sum += term;
            term *= y2 / ((2 * n + 1) * (2 * n + 2)) as f64;
        }
        sum
    } else {
        2.0 * (y.cosh() - 1.0) - y * y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothFitRow {
    pub i: f64,
    /// `|D_h v - e^{-qi}|` at each step in [`SMOOTH_FIT_STEPS`].
    pub dev_x: [f64; 2],
    /// `|D_h^2 v|` at each step.
    pub dev_xx: [f64; 2],
    pub order_x: f64,
    pub order_xx: f64,
}

pub const SMOOTH_FIT_STEPS: [f64; 2] = [1e-4, 1e-5];

/// Central differences of the waiting-region formula across `x = b(i)`
/// for `n_i` equally spaced `i` in `(0, i*)`.
///
/// The difference quotients are evaluated exactly in closed form (the
/// cancelling leading terms are removed analytically), so what remains is
/// truncation error and the observed order is not polluted by rounding.
pub fn smooth_fit_check(params: &ModelParams, boundary: &BoundaryTable, n_i: usize) -> Vec<SmoothFitRow> {
    let CharRoots { alpha: a, beta: b, .. } = *boundary.roots();
    let q = params.q;
    (1..=n_i)
        .map(|k| {
            let i = boundary.i_star() * k as f64 / (n_i + 1) as f64;
            let disc = (-q * i).exp();
            let dev = |h: f64| {
                let d1 = (a / b * sinh_excess(b * h) - b / a * sinh_excess(a * h)) / ((a - b) * h);
                let d2 = (a / b * cosh_excess(b * h) - b / a * cosh_excess(a * h)) / ((a - b) * h * h);
                (disc * d1.abs(), disc * d2.abs())
            };
            let (x0, xx0) = dev(SMOOTH_FIT_STEPS[0]);
            let (x1, xx1) = dev(SMOOTH_FIT_STEPS[1]);
            let span = (SMOOTH_FIT_STEPS[0] / SMOOTH_FIT_STEPS[1]).ln();
            SmoothFitRow {
                i,
                dev_x: [x0, x1],
                dev_xx: [xx0, xx1],
                order_x: (x0 / x1).ln() / span,
                order_xx: (xx0 / xx1).ln() / span,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyRun {
    pub label: String,
    pub estimate: PayoffEstimate,
    pub value: f64,
}

impl PolicyRun {
    /// Mean exceeds the value by no more than three standard errors.
    pub fn dominated(&self) -> bool {
        self.estimate.mean <= self.value + 3.0 * self.estimate.stderr
    }

    /// Mean is below the value by more than three standard errors.
    pub fn strictly_below(&self) -> bool {
        self.estimate.mean < self.value - 3.0 * self.estimate.stderr
    }
}

/// Runs constant barriers at `c * b_circ` and the free boundary scaled by
/// `c` for each `c` in `perturbations`, from one starting point.
#[allow(clippy::too_many_arguments)]
pub fn dominance_test(
    params: &ModelParams,
    boundary: &BoundaryTable,
    x0: f64,
    i0: f64,
    perturbations: &[f64],
    n_paths: usize,
    cfg: &SimConfig,
) -> infctl_core::Result<Vec<PolicyRun>> {
    let v = value(x0, i0, params, Some(boundary))?;
    let mut runs = Vec::new();
    for &c in perturbations {
        for (label, policy) in [
            (format!("constant_barrier({c})"), Policy::ConstantBarrier(c * boundary.b_circ())),
            (format!("scaled_reflection({c})"), Policy::ScaledReflection { boundary, factor: c }),
        ] {
            let estimate = mc_payoff(params, &policy, x0, i0, n_paths, cfg)?;
            runs.push(PolicyRun { label, estimate, value: v });
        }
    }
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub q: f64,
    pub i_star: f64,
    /// `b(i; q)` at each probe infimum.
    pub b: Vec<f64>,
    /// `value(x_probe, i; q)` at each probe infimum.
    pub value: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub b_circ: f64,
    pub classical: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    fn strictly_decreasing(mut it: impl Iterator<Item = f64>) -> bool {
        let Some(mut prev) = it.next() else { return true };
        it.all(|v| {
            let ok = v < prev;
            prev = v;
            ok
        })
    }

    fn solved(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.error.is_none())
    }

    pub fn all_solved(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_none())
    }

    /// `|b(i; q) - b_circ|` strictly decreases along the ladder at every probe.
    pub fn boundary_converges(&self) -> bool {
        let n = self.rows.first().map_or(0, |r| r.b.len());
        (0..n).all(|k| Self::strictly_decreasing(self.solved().map(|r| (r.b[k] - self.b_circ).abs())))
    }

    /// `|value - V_0|` strictly decreases along the ladder at every probe.
    pub fn value_converges(&self) -> bool {
        let n = self.rows.first().map_or(0, |r| r.value.len());
        (0..n).all(|k| Self::strictly_decreasing(self.solved().map(|r| (r.value[k] - self.classical).abs())))
    }

    /// `i*` increases along the ladder and stays below `b_circ`.
    pub fn critical_level_rises(&self) -> bool {
        Self::strictly_decreasing(self.solved().map(|r| self.b_circ - r.i_star))
            && self.solved().all(|r| r.i_star < self.b_circ)
    }
}

/// Boundary and value along a decreasing ladder of `q`.
pub fn q_sweep(
    base: &ModelParams,
    q_list: &[f64],
    i_probes: &[f64],
    x_probe: f64,
    i_max: f64,
    step: f64,
) -> infctl_core::Result<SweepTable> {
    if !(base.mu > 0.0) {
        return Err(infctl_core::Error::Configuration("the q sweep needs mu > 0"));
    }
    if q_list.windows(2).any(|w| !(w[1] < w[0])) || q_list.iter().any(|&q| !(q >= 1e-4)) {
        return Err(infctl_core::Error::Configuration(
            "q ladder must be strictly decreasing with minimum >= 1e-4",
        ));
    }
    let base0 = base.with_q(0.0);
    let b_circ = char_roots(&base0)?.b_circ.expect("mu > 0");
    let classical = classical_value(x_probe, &base0)?;
    let rows = q_list
        .iter()
        .map(|&q| {
            let p = base.with_q(q);
            let solved = solve_boundary(&p, i_max, step).and_then(|t| {
                let b = i_probes.iter().map(|&i| boundary_at(&t, i)).collect::<Result<Vec<_>, _>>()?;
                let v = i_probes
                    .iter()
                    .map(|&i| value(x_probe, i, &p, Some(&t)))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((t.i_star(), b, v))
            });
            match solved {
                Ok((i_star, b, value)) => SweepRow { q, i_star, b, value, error: None },
                Err(e) => SweepRow {
                    q,
                    i_star: f64::NAN,
                    b: Vec::new(),
                    value: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SweepTable { b_circ, classical, rows })
}
