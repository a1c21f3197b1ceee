//! ADRC law: disturbance compensation plus pole-placing feedback, switched on
//! at the peaking time `t_u`; and the disturbance-free ideal trajectory.

use crate::error::{Error, Result};
use crate::matpoly::{
    rational_from_f64, routh_hurwitz, solve_lyapunov, spectral_norm, HurwitzVerdict, Polynomial, Rational,
};
use crate::stability::{build_a1, PhiVector};

/// Slack added to the measured initial estimation error when `ρ̃₀` is not given.
pub const RHO0_SLACK: f64 = 1e-6;

/// Hurwitz verdict on `s^n + k_n s^{n-1} + ... + k_1`, the characteristic
/// polynomial of `A - B Kᵀ` for the integrator chain.
pub fn validate_feedback(k: &[f64]) -> Result<HurwitzVerdict> {
    if k.is_empty() {
        return Err(Error::invalid("feedback gain K must have at least one entry"));
    }
    let mut coeffs: Vec<Rational> = vec![rational_from_f64(1.0)?];
    for &ki in k.iter().rev() {
        coeffs.push(rational_from_f64(ki)?);
    }
    routh_hurwitz(&Polynomial::new(coeffs))
}

/// `max_{2≤i≤n} |x_i(t₀) - x̂_i(t₀)| + RHO0_SLACK`.
pub fn default_rho0(x0: &[f64], xhat0: &[f64]) -> f64 {
    x0.iter()
        .zip(xhat0)
        .skip(1)
        .map(|(x, xh)| (x - xh).abs())
        .fold(0.0, f64::max)
        + RHO0_SLACK
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    k: Vec<f64>,
    b_bar: f64,
    omega_o: f64,
    phi: PhiVector,
    rho0: f64,
    t0: f64,
}

impl ControllerConfig {
    pub fn new(k: Vec<f64>, b_bar: f64, omega_o: f64, phi: PhiVector, rho0: f64, t0: f64) -> Result<Self> {
        if phi.order() != k.len() {
            return Err(Error::invalid(format!(
                "K has {} entries but phi describes order {}",
                k.len(),
                phi.order()
            )));
        }
        if let Some(reason) = validate_feedback(&k)?.failure_reason() {
            return Err(Error::invalid(format!(
                "A - B K^T is not Hurwitz for K = {k:?}: {reason}"
            )));
        }
        if b_bar == 0.0 || !b_bar.is_finite() {
            return Err(Error::invalid(format!("b_bar must be finite and nonzero, got {b_bar}")));
        }
        if !(omega_o > 0.0) || !omega_o.is_finite() {
            return Err(Error::invalid(format!(
                "omega_o must be positive and finite, got {omega_o}"
            )));
        }
        if !(rho0 > 0.0) || !rho0.is_finite() {
            return Err(Error::invalid(format!("rho0 must be positive and finite, got {rho0}")));
        }
        if !t0.is_finite() {
            return Err(Error::invalid("t0 must be finite"));
        }
        Ok(Self {
            k,
            b_bar,
            omega_o,
            phi,
            rho0,
            t0,
        })
    }

    pub fn order(&self) -> usize {
        self.k.len()
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn b_bar(&self) -> f64 {
        self.b_bar
    }

    pub fn omega_o(&self) -> f64 {
        self.omega_o
    }

    pub fn phi(&self) -> &PhiVector {
        &self.phi
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn with_omega(&self, omega_o: f64) -> Result<Self> {
        Self::new(
            self.k.clone(),
            self.b_bar,
            omega_o,
            self.phi.clone(),
            self.rho0,
            self.t0,
        )
    }
}

/// Peaking time `t_u = t₀ + 2(n-1)‖P₁‖ max{ln(ω_o ρ̃₀)/ω_o, 0}`, where `P₁`
/// solves `A₁ᵀP₁ + P₁A₁ = -I` and `‖·‖` is the spectral norm.
pub fn compute_tu(cfg: &ControllerConfig) -> Result<f64> {
    let n = cfg.order();
    let log_term = (cfg.omega_o * cfg.rho0).ln() / cfg.omega_o;
    if n == 1 || !(log_term > 0.0) {
        return Ok(cfg.t0);
    }
    let p1 = solve_lyapunov(&build_a1(&cfg.phi))?;
    let norm = spectral_norm(&p1)?;
    Ok(cfg.t0 + 2.0 * (n as f64 - 1.0) * norm * log_term)
}

/// `u = 0` before `t_u`, otherwise `(-f̂ - Kᵀ(X̂ - R) + r^{(n)}) / b̄`.
#[inline]
pub fn control_law(cfg: &ControllerConfig, t: f64, t_u: f64, xhat: &[f64], fhat: f64, r: &[f64], r_n: f64) -> f64 {
    if t < t_u {
        return 0.0;
    }
    feedback(&cfg.k, cfg.b_bar, xhat, fhat, r, r_n)
}

#[inline]
pub(crate) fn feedback(k: &[f64], b_bar: f64, xhat: &[f64], fhat: f64, r: &[f64], r_n: f64) -> f64 {
    let mut acc = r_n - fhat;
    for i in 0..k.len() {
        acc -= k[i] * (xhat[i] - r[i]);
    }
    acc / b_bar
}

/// Ideal closed loop `Ẋ* = AX* - BKᵀ(X* - R) + B r^{(n)}` written into `out`.
#[inline]
pub fn ideal_derivative_into(k: &[f64], xstar: &[f64], r: &[f64], r_n: f64, out: &mut [f64]) {
    let n = k.len();
    out[..n - 1].copy_from_slice(&xstar[1..n]);
    let mut last = r_n;
    for i in 0..n {
        last -= k[i] * (xstar[i] - r[i]);
    }
    out[n - 1] = last;
}

pub fn ideal_derivative(k: &[f64], xstar: &[f64], r: &[f64], r_n: f64) -> Result<Vec<f64>> {
    if xstar.len() != k.len() || r.len() != k.len() {
        return Err(Error::invalid("K, X* and R must have the same length"));
    }
    let mut out = vec![0.0; k.len()];
    ideal_derivative_into(k, xstar, r, r_n, &mut out);
    Ok(out)
}
