//! The uncertain integrator chain `x_i' = x_{i+1}`, `x_n' = (b̄ + b_δ) u + g(X, t)`,
//! its library of uncertainty functions `g`, and analytic reference signals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uncertainty `g(X, t)`. Cases 1–4 are the second-order benchmark set;
/// `sinusoid` is the state-independent `M_g sin(w_g t + φ_g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "UncertaintyRepr", into = "UncertaintyRepr")]
pub enum UncertaintySpec {
    None,
    /// `3x₁ + 3x₂`
    Case1,
    /// `3x₁ + x₁² + 3x₂ + x₂²`
    Case2,
    /// `0.4 sin(x₁) + 10 sin(πt/8)`
    Case3,
    /// `0.1x₁` plus a ramp from 0 (t = 5) to 10 (t = 8)
    Case4,
    Sinusoid {
        amplitude: f64,
        angular_velocity: f64,
        phase: f64,
    },
    Constant {
        c: f64,
    },
}

// Wire form. Unit variants of an internally tagged enum silently accept extra
// keys, so every variant is a (possibly empty) struct here.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum UncertaintyRepr {
    None {},
    Case1 {},
    Case2 {},
    Case3 {},
    Case4 {},
    Sinusoid {
        #[serde(rename = "Mg")]
        amplitude: f64,
        #[serde(rename = "wg")]
        angular_velocity: f64,
        #[serde(rename = "phig")]
        phase: f64,
    },
    Constant {
        c: f64,
    },
}

impl From<UncertaintyRepr> for UncertaintySpec {
    fn from(r: UncertaintyRepr) -> Self {
        match r {
            UncertaintyRepr::None {} => UncertaintySpec::None,
            UncertaintyRepr::Case1 {} => UncertaintySpec::Case1,
            UncertaintyRepr::Case2 {} => UncertaintySpec::Case2,
            UncertaintyRepr::Case3 {} => UncertaintySpec::Case3,
            UncertaintyRepr::Case4 {} => UncertaintySpec::Case4,
            UncertaintyRepr::Sinusoid {
                amplitude,
                angular_velocity,
                phase,
            } => UncertaintySpec::Sinusoid {
                amplitude,
                angular_velocity,
                phase,
            },
            UncertaintyRepr::Constant { c } => UncertaintySpec::Constant { c },
        }
    }
}

impl From<UncertaintySpec> for UncertaintyRepr {
    fn from(s: UncertaintySpec) -> Self {
        match s {
            UncertaintySpec::None => UncertaintyRepr::None {},
            UncertaintySpec::Case1 => UncertaintyRepr::Case1 {},
            UncertaintySpec::Case2 => UncertaintyRepr::Case2 {},
            UncertaintySpec::Case3 => UncertaintyRepr::Case3 {},
            UncertaintySpec::Case4 => UncertaintyRepr::Case4 {},
            UncertaintySpec::Sinusoid {
                amplitude,
                angular_velocity,
                phase,
            } => UncertaintyRepr::Sinusoid {
                amplitude,
                angular_velocity,
                phase,
            },
            UncertaintySpec::Constant { c } => UncertaintyRepr::Constant { c },
        }
    }
}

const CASE4_KINKS: [f64; 2] = [5.0, 8.0];

impl UncertaintySpec {
    fn is_benchmark_case(&self) -> bool {
        matches!(
            self,
            UncertaintySpec::Case1 | UncertaintySpec::Case2 | UncertaintySpec::Case3 | UncertaintySpec::Case4
        )
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.is_benchmark_case() && n != 2 {
            return Err(Error::invalid(format!(
                "uncertainty {self:?} is defined for second-order plants only (n = {n})"
            )));
        }
        let finite = match *self {
            UncertaintySpec::Sinusoid {
                amplitude,
                angular_velocity,
                phase,
            } => amplitude.is_finite() && angular_velocity.is_finite() && phase.is_finite(),
            UncertaintySpec::Constant { c } => c.is_finite(),
            _ => true,
        };
        if !finite {
            return Err(Error::invalid("uncertainty parameters must be finite"));
        }
        Ok(())
    }

    /// `g(X, t)`; the state length must already have been validated.
    #[inline]
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match *self {
            UncertaintySpec::None => 0.0,
            UncertaintySpec::Case1 => 3.0 * x[0] + 3.0 * x[1],
            UncertaintySpec::Case2 => 3.0 * x[0] + x[0] * x[0] + 3.0 * x[1] + x[1] * x[1],
            UncertaintySpec::Case3 => 0.4 * x[0].sin() + 10.0 * (PI * t / 8.0).sin(),
            UncertaintySpec::Case4 => 0.1 * x[0] + case4_ramp(t),
            UncertaintySpec::Sinusoid {
                amplitude,
                angular_velocity,
                phase,
            } => amplitude * (angular_velocity * t + phase).sin(),
            UncertaintySpec::Constant { c } => c,
        }
    }

    /// Analytic `(∂g/∂X, ∂g/∂t)`. At the case-4 kinks the right derivative is returned.
    pub fn partials(&self, x: &[f64], t: f64) -> (Vec<f64>, f64) {
        let mut grad = vec![0.0; x.len()];
        let dt = match *self {
            UncertaintySpec::None | UncertaintySpec::Constant { .. } => 0.0,
            UncertaintySpec::Case1 => {
                grad[0] = 3.0;
                grad[1] = 3.0;
                0.0
            }
            UncertaintySpec::Case2 => {
                grad[0] = 3.0 + 2.0 * x[0];
                grad[1] = 3.0 + 2.0 * x[1];
                0.0
            }
            UncertaintySpec::Case3 => {
                grad[0] = 0.4 * x[0].cos();
                10.0 * PI / 8.0 * (PI * t / 8.0).cos()
            }
            UncertaintySpec::Case4 => {
                grad[0] = 0.1;
                if (5.0..8.0).contains(&t) {
                    10.0 / 3.0
                } else {
                    0.0
                }
            }
            UncertaintySpec::Sinusoid {
                amplitude,
                angular_velocity,
                phase,
            } => amplitude * angular_velocity * (angular_velocity * t + phase).cos(),
        };
        (grad, dt)
    }

    /// Continuous envelope `ψ(X)` bounding `|g|`, `‖∂g/∂X‖` and `|∂g/∂t|` for all `t`.
    ///
    /// * case 1: `3s + 5` with `s = |x₁| + |x₂|` (`‖∇g‖ = 3√2`)
    /// * case 2: `s² + 7s + 9` (`‖∇g‖ ≤ 6 + 2s`)
    /// * case 3: `10.4` (`|∂g/∂t| ≤ 10π/8`)
    /// * case 4: `0.1|x₁| + 10` (`|∂g/∂t| ≤ 10/3`)
    /// * sinusoid: `|M_g| max(1, |w_g|)`
    pub fn envelope(&self, x: &[f64]) -> f64 {
        let s = x.iter().take(2).map(|v| v.abs()).sum::<f64>();
        match *self {
            UncertaintySpec::None => 0.0,
            UncertaintySpec::Case1 => 3.0 * s + 5.0,
            UncertaintySpec::Case2 => s * s + 7.0 * s + 9.0,
            UncertaintySpec::Case3 => 10.4,
            UncertaintySpec::Case4 => 0.1 * x[0].abs() + 10.0,
            UncertaintySpec::Sinusoid {
                amplitude,
                angular_velocity,
                ..
            } => amplitude.abs() * angular_velocity.abs().max(1.0),
            UncertaintySpec::Constant { c } => c.abs(),
        }
    }

    /// Times where `g` is not differentiable in `t`.
    pub fn breakpoints(&self) -> &'static [f64] {
        match self {
            UncertaintySpec::Case4 => &CASE4_KINKS,
            _ => &[],
        }
    }
}

#[inline]
fn case4_ramp(t: f64) -> f64 {
    if t < 5.0 {
        0.0
    } else if t < 8.0 {
        10.0 * (t - 5.0) / 3.0
    } else {
        10.0
    }
}

/// Checked evaluation of `g(X, t)`.
pub fn eval_g(spec: &UncertaintySpec, x: &[f64], t: f64) -> Result<f64> {
    spec.validate(x.len())?;
    Ok(spec.eval(x, t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    n: usize,
    b_bar: f64,
    b_delta: f64,
    uncertainty: UncertaintySpec,
    x0: Vec<f64>,
}

impl PlantConfig {
    pub fn new(b_bar: f64, b_delta: f64, uncertainty: UncertaintySpec, x0: Vec<f64>) -> Result<Self> {
        let n = x0.len();
        if n == 0 {
            return Err(Error::invalid("plant order must be at least 1 (x0 is empty)"));
        }
        if b_bar == 0.0 || !b_bar.is_finite() {
            return Err(Error::invalid(format!(
                "nominal gain b_bar must be finite and nonzero, got {b_bar}"
            )));
        }
        if !b_delta.is_finite() {
            return Err(Error::invalid("b_delta must be finite"));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("x0 must be finite"));
        }
        uncertainty.validate(n)?;
        Ok(Self {
            n,
            b_bar,
            b_delta,
            uncertainty,
            x0,
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn b_bar(&self) -> f64 {
        self.b_bar
    }

    pub fn b_delta(&self) -> f64 {
        self.b_delta
    }

    pub fn uncertainty(&self) -> &UncertaintySpec {
        &self.uncertainty
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn with_b_delta(&self, b_delta: f64) -> Result<Self> {
        Self::new(self.b_bar, b_delta, self.uncertainty, self.x0.clone())
    }

    /// Total disturbance `f = g(X, t) + b_δ u`.
    #[inline]
    pub fn total_disturbance(&self, x: &[f64], u: f64, t: f64) -> f64 {
        self.uncertainty.eval(x, t) + self.b_delta * u
    }

    /// Unchecked chain derivative into `out`.
    #[inline]
    pub fn derivative_into(&self, x: &[f64], u: f64, t: f64, out: &mut [f64]) {
        let n = self.n;
        out[..n - 1].copy_from_slice(&x[1..n]);
        out[n - 1] = self.b_bar * u + self.total_disturbance(x, u, t);
    }
}

/// `Ẋ` of the uncertain chain at `(X, u, t)`.
pub fn plant_derivative(cfg: &PlantConfig, x: &[f64], u: f64, t: f64) -> Result<Vec<f64>> {
    if x.len() != cfg.n {
        return Err(Error::invalid(format!(
            "state has {} components, plant order is {}",
            x.len(),
            cfg.n
        )));
    }
    let mut out = vec![0.0; cfg.n];
    cfg.derivative_into(x, u, t, &mut out);
    match out.iter().position(|v| !v.is_finite()) {
        Some(component) => Err(Error::Divergence { t, component }),
        None => Ok(out),
    }
}

/// One polynomial piece of a spline reference, in local time `t - start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplinePiece {
    pub start: f64,
    /// Ascending powers of `t - start`.
    pub coeffs: Vec<f64>,
}

/// Reference `r(t)` with analytic derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReferenceSpec {
    #[serde(with = "empty_struct")]
    Zero,
    /// `amp · sin(freq · t)`
    Sinusoid { amp: f64, freq: f64 },
    /// `Σ coeffs[j] t^j`
    Polynomial { coeffs: Vec<f64> },
    /// Piecewise polynomial; each piece applies from its `start` until the next.
    Spline { pieces: Vec<SplinePiece> },
}

impl ReferenceSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ReferenceSpec::Zero => true,
            ReferenceSpec::Sinusoid { amp, freq } => amp.is_finite() && freq.is_finite(),
            ReferenceSpec::Polynomial { coeffs } => coeffs.iter().all(|c| c.is_finite()),
            ReferenceSpec::Spline { pieces } => {
                if pieces.is_empty() {
                    return Err(Error::invalid("spline reference needs at least one piece"));
                }
                if pieces.windows(2).any(|w| !(w[0].start < w[1].start)) {
                    return Err(Error::invalid("spline pieces must have strictly increasing starts"));
                }
                pieces
                    .iter()
                    .all(|p| p.start.is_finite() && p.coeffs.iter().all(|c| c.is_finite()))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("reference parameters must be finite"))
        }
    }

    /// Writes `r, ṙ, ..., r^{(k)}` into `out` (`k = out.len() - 1`).
    pub fn derivatives_into(&self, t: f64, out: &mut [f64]) {
        match self {
            ReferenceSpec::Zero => out.fill(0.0),
            ReferenceSpec::Sinusoid { amp, freq } => {
                let (s, c) = (freq * t).sin_cos();
                let mut scale = *amp;
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = scale
                        * match k % 4 {
                            0 => s,
                            1 => c,
                            2 => -s,
                            _ => -c,
                        };
                    scale *= freq;
                }
            }
            ReferenceSpec::Polynomial { coeffs } => poly_derivatives(coeffs, t, out),
            ReferenceSpec::Spline { pieces } => {
                let idx = pieces.iter().rposition(|p| p.start <= t).unwrap_or(0);
                let piece = &pieces[idx];
                poly_derivatives(&piece.coeffs, t - piece.start, out);
            }
        }
    }

    /// Times where some derivative of `r` may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ReferenceSpec::Spline { pieces } => pieces.iter().skip(1).map(|p| p.start).collect(),
            _ => Vec::new(),
        }
    }
}

// `{"kind":"zero"}` with no other keys.
mod empty_struct {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Empty {}

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        Empty {}.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        Empty::deserialize(d).map(|_| ())
    }
}

fn poly_derivatives(coeffs: &[f64], t: f64, out: &mut [f64]) {
    for (k, slot) in out.iter_mut().enumerate() {
        // d^k/dt^k Σ c_j t^j = Σ_{j>=k} c_j j!/(j-k)! t^{j-k}, by Horner from the top
        let mut acc = 0.0;
        for j in (k..coeffs.len()).rev() {
            let falling: f64 = ((j - k + 1)..=j).map(|v| v as f64).product();
            acc = acc * t + coeffs[j] * falling;
        }
        *slot = acc;
    }
}

/// Reference vector `R = (r, ṙ, ..., r^{(n-1)})` with `r^{(n)}` and `r^{(n+1)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSample {
    pub r: Vec<f64>,
    pub r_n: f64,
    pub r_n1: f64,
}

pub fn reference_vector(spec: &ReferenceSpec, t: f64, n: usize) -> ReferenceSample {
    let mut d = vec![0.0; n + 2];
    spec.derivatives_into(t, &mut d);
    ReferenceSample {
        r: d[..n].to_vec(),
        r_n: d[n],
        r_n1: d[n + 1],
    }
}
