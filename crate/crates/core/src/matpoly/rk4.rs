use crate::error::{Error, Result};

/// Classic fourth-order Runge–Kutta stepper with reusable stage buffers.
///
/// The derivative callback writes `dx/dt` at `(t, x)` into its output slice.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    probe: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            probe: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.k1.len()
    }

    /// Advances `x` from `t` to `t + h` in place. On error `x` is left unchanged.
    #[allow(clippy::needless_range_loop)]
    pub fn step<F>(&mut self, mut deriv: F, t: f64, x: &mut [f64], h: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        if !(h > 0.0) {
            return Err(Error::invalid(format!("RK4 step must be positive, got {h}")));
        }
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "state has {} components, stepper expects {}",
                x.len(),
                self.dim()
            )));
        }
        let half = 0.5 * h;

        deriv(t, x, &mut self.k1);
        check_finite(&self.k1, t)?;

        for i in 0..x.len() {
            self.probe[i] = x[i] + half * self.k1[i];
        }
        deriv(t + half, &self.probe, &mut self.k2);
        check_finite(&self.k2, t + half)?;

        for i in 0..x.len() {
            self.probe[i] = x[i] + half * self.k2[i];
        }
        deriv(t + half, &self.probe, &mut self.k3);
        check_finite(&self.k3, t + half)?;

        for i in 0..x.len() {
            self.probe[i] = x[i] + h * self.k3[i];
        }
        deriv(t + h, &self.probe, &mut self.k4);
        check_finite(&self.k4, t + h)?;

        let sixth = h / 6.0;
        for i in 0..x.len() {
            x[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

fn check_finite(values: &[f64], t: f64) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(component) => Err(Error::Divergence { t, component }),
        None => Ok(()),
    }
}

/// One RK4 step of `dx/dt = deriv(t, x)`, returning the new state.
pub fn rk4_step<F>(deriv: F, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let mut next = x.to_vec();
    Rk4::new(x.len()).step(|t, x, out| out.copy_from_slice(&deriv(t, x)), t, &mut next, h)?;
    Ok(next)
}
