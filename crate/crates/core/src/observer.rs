//! Linear extended state observer driven by the measured output `y = x₁`.

use crate::error::{Error, Result};
use crate::stability::PhiVector;

/// Largest observer gain accepted at configuration time.
pub const MAX_OBSERVER_GAIN: f64 = 1e20;

/// Observer state: estimates of the plant state and of the total disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct EsoState {
    pub xhat: Vec<f64>,
    pub fhat: f64,
}

impl EsoState {
    pub fn zeros(n: usize) -> Self {
        Self {
            xhat: vec![0.0; n],
            fhat: 0.0,
        }
    }

    pub fn order(&self) -> usize {
        self.xhat.len()
    }

    /// Flattened `(x̂₁, ..., x̂_n, f̂)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.xhat.clone();
        v.push(self.fhat);
        v
    }
}

/// `l_i = φ_i ω_o^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EsoGains {
    l: Vec<f64>,
    omega_o: f64,
}

impl EsoGains {
    pub fn gains(&self) -> &[f64] {
        &self.l
    }

    pub fn omega_o(&self) -> f64 {
        self.omega_o
    }

    pub fn order(&self) -> usize {
        self.l.len() - 1
    }

    /// Fails when a gain overflows the floating range we simulate with.
    pub fn check_headroom(&self) -> Result<()> {
        match self.l.iter().position(|l| !l.is_finite() || *l > MAX_OBSERVER_GAIN) {
            Some(i) => Err(Error::invalid(format!(
                "observer gain l_{} = {:e} exceeds {MAX_OBSERVER_GAIN:e}; lower omega_o or the order",
                i + 1,
                self.l[i]
            ))),
            None => Ok(()),
        }
    }
}

pub fn eso_gains(phi: &PhiVector, omega_o: f64) -> Result<EsoGains> {
    if !(omega_o > 0.0) || !omega_o.is_finite() {
        return Err(Error::invalid(format!(
            "omega_o must be positive and finite, got {omega_o}"
        )));
    }
    let l = phi
        .to_f64()
        .into_iter()
        .zip(1..)
        .map(|(p, i)| p * omega_o.powi(i))
        .collect();
    Ok(EsoGains { l, omega_o })
}

/// Observer vector field on the flattened state `(x̂, f̂)`:
/// `x̂_i' = x̂_{i+1} - l_i e`, `x̂_n' = f̂ + b̄u - l_n e`, `f̂' = -l_{n+1} e` with `e = x̂₁ - y`.
#[inline]
pub fn eso_derivative_into(state: &[f64], u: f64, y: f64, gains: &EsoGains, b_bar: f64, out: &mut [f64]) {
    let n = gains.l.len() - 1;
    let innovation = state[0] - y;
    for i in 0..n - 1 {
        out[i] = state[i + 1] - gains.l[i] * innovation;
    }
    out[n - 1] = state[n] + b_bar * u - gains.l[n - 1] * innovation;
    out[n] = -gains.l[n] * innovation;
}

pub fn eso_derivative(s: &EsoState, u: f64, y: f64, gains: &EsoGains, b_bar: f64) -> Result<EsoState> {
    if s.order() != gains.order() {
        return Err(Error::invalid(format!(
            "observer state has order {}, gains have order {}",
            s.order(),
            gains.order()
        )));
    }
    let state = s.to_vec();
    let mut out = vec![0.0; state.len()];
    eso_derivative_into(&state, u, y, gains, b_bar, &mut out);
    if let Some(component) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::Divergence { t: f64::NAN, component });
    }
    let fhat = out.pop().unwrap_or_default();
    Ok(EsoState { xhat: out, fhat })
}
