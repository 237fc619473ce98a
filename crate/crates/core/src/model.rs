//! Dividend model with multiplicative time-preference impact.
//!
//! The surplus follows `X = x + mu t + eta W - D`, its running infimum is
//! `I = i ∧ inf X`, and dividends are discounted by `exp(-rho t - q I)`.
//! Everything in this module is closed form; the only numerical input is the
//! free boundary `b(i)` for `mu > 0, q > 0`, which comes from
//! [`crate::boundary`].
//!
//! Root convention: `alpha < 0 < beta` throughout.

use crate::boundary::{boundary_at, flow, BoundaryTable};
use crate::error::{Error, Result};

/// Coefficients of the dividend model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Drift per unit time, any sign.
    pub mu: f64,
    /// Volatility, strictly positive.
    pub eta: f64,
    /// Discount rate, strictly positive.
    pub rho: f64,
    /// Time-preference sensitivity per unit decrease of the infimum.
    pub q: f64,
}

impl ModelParams {
    pub fn new(mu: f64, eta: f64, rho: f64, q: f64) -> Result<Self> {
        let p = ModelParams { mu, eta, rho, q };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.eta.is_finite() && self.rho.is_finite() && self.q.is_finite())
        {
            return Err(Error::ParameterDomain("model parameters must be finite"));
        }
        if self.eta <= 0.0 {
            return Err(Error::ParameterDomain("eta must be strictly positive"));
        }
        if self.rho <= 0.0 {
            return Err(Error::ParameterDomain("rho must be strictly positive"));
        }
        if self.q < 0.0 {
            return Err(Error::ParameterDomain("q must be nonnegative"));
        }
        Ok(())
    }

    /// Same coefficients with a different sensitivity `q`.
    pub fn with_q(&self, q: f64) -> Self {
        ModelParams { q, ..*self }
    }

    /// FNV-1a over the bit patterns of `(mu, eta, rho, q)`.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in [self.mu, self.eta, self.rho, self.q] {
            for byte in v.to_bits().to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Roots of `eta²θ²/2 + mu θ - rho = 0` and the classical barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharRoots {
    pub alpha: f64,
    pub beta: f64,
    /// `ln(beta²/alpha²)/(alpha - beta)`; `None` when `mu <= 0`, where no
    /// barrier exists and paying everything out at once is optimal.
    pub b_circ: Option<f64>,
}

pub fn char_roots(params: &ModelParams) -> Result<CharRoots> {
    params.validate()?;
    let ModelParams { mu, eta, rho, .. } = *params;
    let eta2 = eta * eta;
    let disc = libm::sqrt(mu * mu + 2.0 * rho * eta2);
    let product = -2.0 * rho / eta2;
    // Take the root without cancellation directly and the other from the
    // product of the roots.
    let (alpha, beta) = if mu >= 0.0 {
        let alpha = (-mu - disc) / eta2;
        (alpha, product / alpha)
    } else {
        let beta = (-mu + disc) / eta2;
        (product / beta, beta)
    };
    let b_circ = if mu > 0.0 {
        Some(barrier_from_roots(alpha, beta))
    } else {
        None
    };
    Ok(CharRoots {
        alpha,
        beta,
        b_circ,
    })
}

/// `(1/(a - b)) ln(b²/a²)`, symmetric in its arguments.
pub fn barrier_from_roots(a: f64, b: f64) -> f64 {
    2.0 * libm::log(libm::fabs(b) / libm::fabs(a)) / (a - b)
}

impl CharRoots {
    /// Waiting-region profile `w(z)` with `v = e^{-qi} w(x - b(i))`.
    pub fn waiting_profile(&self, z: f64) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        (a / b * libm::exp(b * z) - b / a * libm::exp(a * z)) / (a - b)
    }

    pub fn waiting_profile_dx(&self, z: f64) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        (a * libm::exp(b * z) - b * libm::exp(a * z)) / (a - b)
    }

    pub fn waiting_profile_dxx(&self, z: f64) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        a * b * (libm::exp(b * z) - libm::exp(a * z)) / (a - b)
    }

    /// `w(z) - w(0)` evaluated without cancellation.
    pub fn waiting_profile_increment(&self, z: f64) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        (a / b * libm::expm1(b * z) - b / a * libm::expm1(a * z)) / (a - b)
    }

    /// `w'(z) - 1`, nonnegative for `z <= 0`.
    pub fn waiting_profile_gap(&self, z: f64) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        (a * libm::expm1(b * z) - b * libm::expm1(a * z)) / (a - b)
    }
}

/// Value of the classical (`q = 0`) problem.
pub fn classical_value(x: f64, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain("surplus must be finite and nonnegative"));
    }
    if params.mu <= 0.0 {
        return Ok(x);
    }
    let roots = char_roots(params)?;
    let b0 = roots.b_circ.expect("mu > 0 defines the barrier");
    if x < b0 {
        Ok(roots.waiting_profile(x - b0))
    } else {
        Ok(x - b0 + params.mu / params.rho)
    }
}

/// Part of the state space a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// `i <= x < b(i)`, `i < i*`: no dividends.
    WaitC,
    /// `x >= b(i) > i`, `i < i*`: pay down to `b(i)`.
    ActD1,
    /// `i >= i*`: pay along the diagonal down to `(i*, i*)`.
    ActD2,
    /// `x <= 0`.
    Absorbed,
}

impl Region {
    pub fn tag(&self) -> &'static str {
        match self {
            Region::WaitC => "WAIT_C",
            Region::ActD1 => "ACT_D1",
            Region::ActD2 => "ACT_D2",
            Region::Absorbed => "ABSORBED",
        }
    }
}

pub(crate) fn check_state(x: f64, i: f64) -> Result<()> {
    if !(x.is_finite() && i.is_finite()) {
        return Err(Error::Domain("state must be finite"));
    }
    if !(x >= i && i >= 0.0) {
        return Err(Error::Domain("state must satisfy x >= i >= 0"));
    }
    Ok(())
}

pub fn classify_region(x: f64, i: f64, boundary: &BoundaryTable) -> Result<Region> {
    check_state(x, i)?;
    if x <= 0.0 {
        return Ok(Region::Absorbed);
    }
    if i >= boundary.i_star() {
        return Ok(Region::ActD2);
    }
    if x >= boundary_at(boundary, i)? {
        Ok(Region::ActD1)
    } else {
        Ok(Region::WaitC)
    }
}

/// Value and its analytic partial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValuePoint {
    pub region: Region,
    pub v: f64,
    pub v_x: f64,
    pub v_xx: f64,
    pub v_i: f64,
    /// `v_x - e^{-qi}`.
    pub gradient_gap: f64,
}

fn pick_boundary<'a>(
    params: &ModelParams,
    boundary: Option<&'a BoundaryTable>,
) -> Result<&'a BoundaryTable> {
    let table = boundary.ok_or(Error::Configuration(
        "a solved boundary is required when mu > 0 and q > 0",
    ))?;
    if table.params_hash() != params.fingerprint() {
        return Err(Error::Configuration("boundary was solved for different parameters"));
    }
    Ok(table)
}

/// Value function together with `v_x`, `v_xx`, `v_i` on the branch that
/// contains `(x, i)`.
///
/// For `mu <= 0` the whole space is an action region and `region` is
/// reported as [`Region::ActD2`] (lump along the diagonal to the origin).
pub fn value_point(
    x: f64,
    i: f64,
    params: &ModelParams,
    boundary: Option<&BoundaryTable>,
) -> Result<ValuePoint> {
    params.validate()?;
    check_state(x, i)?;
    let ModelParams { mu, rho, q, .. } = *params;

    if q == 0.0 {
        return classical_point(x, params);
    }

    let disc = libm::exp(-q * i);
    if mu <= 0.0 {
        // e^{-qi}(x - i) + (1 - e^{-qi})/q
        let v = disc * (x - i) - libm::expm1(-q * i) / q;
        return Ok(ValuePoint {
            region: if x <= 0.0 { Region::Absorbed } else { Region::ActD2 },
            v,
            v_x: disc,
            v_xx: 0.0,
            v_i: -q * disc * (x - i),
            gradient_gap: 0.0,
        });
    }

    let table = pick_boundary(params, boundary)?;
    let region = classify_region(x, i, table)?;
    let point = match region {
        Region::Absorbed => ValuePoint {
            region,
            v: 0.0,
            v_x: disc,
            v_xx: 0.0,
            v_i: 0.0,
            gradient_gap: 0.0,
        },
        Region::WaitC => {
            let roots = table.roots();
            let b = boundary_at(table, i)?;
            let slope = flow(b, i, params)?;
            let z = x - b;
            let v = disc * roots.waiting_profile(z);
            let v_x = disc * roots.waiting_profile_dx(z);
            ValuePoint {
                region,
                v,
                v_x,
                v_xx: disc * roots.waiting_profile_dxx(z),
                v_i: -q * v - v_x * slope,
                gradient_gap: disc * roots.waiting_profile_gap(z),
            }
        }
        Region::ActD1 => {
            let b = boundary_at(table, i)?;
            let slope = flow(b, i, params)?;
            let v = disc * (x - b + mu / rho);
            ValuePoint {
                region,
                v,
                v_x: disc,
                v_xx: 0.0,
                v_i: -q * v - disc * slope,
                gradient_gap: 0.0,
            }
        }
        Region::ActD2 => {
            let i_star = table.i_star();
            let v = disc * (x - i - 1.0 / q) + (1.0 / q + mu / rho) * libm::exp(-q * i_star);
            ValuePoint {
                region,
                v,
                v_x: disc,
                v_xx: 0.0,
                v_i: -q * disc * (x - i),
                gradient_gap: 0.0,
            }
        }
    };
    Ok(point)
}

fn classical_point(x: f64, params: &ModelParams) -> Result<ValuePoint> {
    let v = classical_value(x, params)?;
    if params.mu <= 0.0 {
        return Ok(ValuePoint {
            region: if x <= 0.0 { Region::Absorbed } else { Region::ActD2 },
            v,
            v_x: 1.0,
            v_xx: 0.0,
            v_i: 0.0,
            gradient_gap: 0.0,
        });
    }
    let roots = char_roots(params)?;
    let b0 = roots.b_circ.expect("mu > 0 defines the barrier");
    let point = if x <= 0.0 {
        ValuePoint {
            region: Region::Absorbed,
            v,
            v_x: 1.0,
            v_xx: 0.0,
            v_i: 0.0,
            gradient_gap: 0.0,
        }
    } else if x < b0 {
        let z = x - b0;
        ValuePoint {
            region: Region::WaitC,
            v,
            v_x: roots.waiting_profile_dx(z),
            v_xx: roots.waiting_profile_dxx(z),
            v_i: 0.0,
            gradient_gap: roots.waiting_profile_gap(z),
        }
    } else {
        ValuePoint {
            region: Region::ActD1,
            v,
            v_x: 1.0,
            v_xx: 0.0,
            v_i: 0.0,
            gradient_gap: 0.0,
        }
    };
    Ok(point)
}

/// Value function `V(x, i)`.
///
/// `boundary` must be supplied exactly when `mu > 0` and `q > 0`; for
/// `q = 0` the classical value is returned for every `i`.
pub fn value(
    x: f64,
    i: f64,
    params: &ModelParams,
    boundary: Option<&BoundaryTable>,
) -> Result<f64> {
    value_point(x, i, params, boundary).map(|p| p.v)
}

/// `v_x(x, i) - e^{-qi}`: zero on the action regions, positive while waiting.
pub fn gradient_constraint_gap(
    x: f64,
    i: f64,
    params: &ModelParams,
    boundary: Option<&BoundaryTable>,
) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain("gradient gap needs x > 0"));
    }
    value_point(x, i, params, boundary).map(|p| p.gradient_gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::solve_boundary;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit() -> ModelParams {
        ModelParams::new(1.0, 1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn roots_match_quadratic_formula() {
        let r = char_roots(&unit()).unwrap();
        let s3 = 3f64.sqrt();
        assert_relative_eq!(r.alpha, -1.0 - s3, max_relative = 1e-15);
        assert_relative_eq!(r.beta, s3 - 1.0, max_relative = 1e-15);
        // mpmath, 40 digits: 0.76034599630094634753...
        assert_relative_eq!(r.b_circ.unwrap(), 0.760_345_996_300_946_3, max_relative = 1e-14);
    }

    #[test]
    fn barrier_undefined_for_nonpositive_drift() {
        let p = ModelParams::new(-0.3, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(char_roots(&p).unwrap().b_circ, None);
        let p = ModelParams::new(0.0, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(char_roots(&p).unwrap().b_circ, None);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(matches!(
            ModelParams::new(1.0, 0.0, 1.0, 0.5),
            Err(Error::ParameterDomain(_))
        ));
        assert!(ModelParams::new(1.0, 1.0, -1.0, 0.5).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, -0.1).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn roots_stable_for_large_drift() {
        for &mu in &[1e3, -1e3, 1e-9, -1e-9] {
            let p = ModelParams::new(mu, 1.0, 1.0, 0.0).unwrap();
            let r = char_roots(&p).unwrap();
            for th in [r.alpha, r.beta] {
                let resid = 0.5 * th * th + mu * th - 1.0;
                let scale = 0.5 * th * th + libm::fabs(mu * th) + 1.0;
                assert!(libm::fabs(resid) / scale < 1e-14, "mu={mu} th={th}");
            }
        }
    }

    #[test]
    fn classical_value_branches() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 0.0).unwrap();
        let b0 = char_roots(&p).unwrap().b_circ.unwrap();
        assert_relative_eq!(classical_value(0.0, &p).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(classical_value(b0, &p).unwrap(), 1.0, max_relative = 1e-15);
        // mpmath: 0.49706970919987917145...
        assert_relative_eq!(classical_value(0.3, &p).unwrap(), 0.497_069_709_199_879_2, max_relative = 1e-14);
        let neg = ModelParams::new(-1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(classical_value(2.5, &neg).unwrap(), 2.5);
        assert!(classical_value(-1.0, &p).is_err());
    }

    #[test]
    fn value_nonpositive_drift() {
        let p = ModelParams::new(-1.0, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(value(0.0, 0.0, &p, None).unwrap(), 0.0);
        // Diagonal: 1/q - e^{-qi}/q.
        let v = value(1.3, 1.3, &p, None).unwrap();
        assert_relative_eq!(v, 2.0 - 2.0 * (-0.65f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn value_requires_matching_boundary() {
        let p = unit();
        assert!(matches!(value(0.5, 0.2, &p, None), Err(Error::Configuration(_))));
        let other = solve_boundary(&p.with_q(0.3), 4.0, 1e-3).unwrap();
        assert!(matches!(value(0.5, 0.2, &p, Some(&other)), Err(Error::Configuration(_))));
        assert!(matches!(value(0.1, 0.2, &p, None), Err(Error::Domain(_))));
    }

    #[test]
    fn value_branches_meet() {
        let p = unit();
        let t = solve_boundary(&p, 4.0, 1e-3).unwrap();
        let i = 0.2;
        let b = boundary_at(&t, i).unwrap();
        assert_eq!(classify_region(b, i, &t).unwrap(), Region::ActD1);
        let at_b = value(b, i, &p, Some(&t)).unwrap();
        assert_relative_eq!(at_b, (-0.1f64).exp(), max_relative = 1e-14);
        let below = value(b - 1e-9, i, &p, Some(&t)).unwrap();
        assert!(libm::fabs(at_b - below) < 2e-9);
        // D1 | D2 seam at i*.
        let s = t.i_star();
        let d2 = value(1.5, s, &p, Some(&t)).unwrap();
        let d1 = value(1.5, s - 1e-9, &p, Some(&t)).unwrap();
        assert!(libm::fabs(d2 - d1) < 1e-8);
    }

    #[test]
    fn gradient_gap_signs() {
        let p = unit();
        let t = solve_boundary(&p, 4.0, 1e-3).unwrap();
        assert!(gradient_constraint_gap(0.3, 0.1, &p, Some(&t)).unwrap() > 0.0);
        assert_eq!(gradient_constraint_gap(1.2, 0.1, &p, Some(&t)).unwrap(), 0.0);
        assert_eq!(gradient_constraint_gap(1.2, 0.9, &p, Some(&t)).unwrap(), 0.0);
        let b = boundary_at(&t, 0.1).unwrap();
        assert_eq!(gradient_constraint_gap(b, 0.1, &p, Some(&t)).unwrap(), 0.0);
        assert!(gradient_constraint_gap(0.0, 0.0, &p, Some(&t)).is_err());
    }

    #[test]
    fn classify_examples() {
        let p = unit();
        let t = solve_boundary(&p, 4.0, 1e-3).unwrap();
        assert_eq!(classify_region(0.0, 0.0, &t).unwrap(), Region::Absorbed);
        assert_eq!(classify_region(0.9, 0.8, &t).unwrap(), Region::ActD2);
        assert_eq!(classify_region(t.i_star(), t.i_star(), &t).unwrap(), Region::ActD2);
        let b = boundary_at(&t, 0.01).unwrap();
        assert_eq!(classify_region(0.9 * b, 0.01, &t).unwrap(), Region::WaitC);
        assert!(classify_region(0.1, 0.2, &t).is_err());
    }

    proptest! {
        #[test]
        fn vieta_identities(mu in -50.0f64..50.0, eta in 0.05f64..5.0, rho in 0.01f64..5.0) {
            let p = ModelParams::new(mu, eta, rho, 0.0).unwrap();
            let r = char_roots(&p).unwrap();
            prop_assert!(r.alpha < 0.0 && r.beta > 0.0);
            let prod = -2.0 * rho / (eta * eta);
            prop_assert!(libm::fabs(r.alpha * r.beta - prod) <= 1e-12 * libm::fabs(prod));
            let sum = -2.0 * mu / (eta * eta);
            let scale = libm::fabs(r.alpha) + libm::fabs(r.beta);
            prop_assert!(libm::fabs(r.alpha + r.beta - sum) <= 1e-12 * scale);
            if mu > 0.0 {
                prop_assert!(libm::fabs(r.alpha) > r.beta);
                let b0 = r.b_circ.unwrap();
                prop_assert!(b0 > 0.0);
                prop_assert!(libm::fabs(barrier_from_roots(r.beta, r.alpha) - b0) <= 1e-14 * b0.max(1.0));
            }
        }

        #[test]
        fn q_zero_matches_classical(x in 0.0f64..3.0, frac in 0.0f64..1.0, mu in -2.0f64..2.0) {
            let p = ModelParams::new(mu, 1.0, 1.0, 0.0).unwrap();
            let i = x * frac;
            prop_assert_eq!(value(x, i, &p, None).unwrap(), classical_value(x, &p).unwrap());
        }

        #[test]
        fn nonpositive_drift_monotone(x in 0.0f64..3.0, frac in 0.0f64..1.0, q in 0.01f64..3.0) {
            let p = ModelParams::new(-0.5, 1.0, 1.0, q).unwrap();
            let i = x * frac;
            let v = value(x, i, &p, None).unwrap();
            prop_assert!(value(x + 0.1, i, &p, None).unwrap() > v);
            if i + 0.01 <= x {
                prop_assert!(value(x, i + 0.01, &p, None).unwrap() < v);
            }
        }
    }
}
