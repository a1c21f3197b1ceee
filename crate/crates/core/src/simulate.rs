//! Closed-loop integration of plant, observer, controller and ideal trajectory.
//!
//! The plant `X`, the observer `(X̂, f̂)` and the ideal system `X*` are advanced
//! as one `3n + 1` dimensional vector field by fixed-step RK4, so all three
//! share the same time grid. The grid is split into segments at `t_u`, at the
//! case-4 kinks and at spline knots so that no RK4 step straddles a switch.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::controller::{compute_tu, default_rho0, feedback, ideal_derivative_into, ControllerConfig};
use crate::error::{Error, Result};
use crate::matpoly::{rational_from_f64, Rk4};
use crate::observer::{eso_derivative_into, eso_gains, EsoGains, EsoState};
use crate::plant::{PlantConfig, ReferenceSpec, UncertaintySpec};
use crate::stability::{is_well_performed, PhiVector};

/// Largest `h · ω_o` accepted; RK4's real-axis stability limit is about 2.78.
pub const MAX_STEP_BANDWIDTH_PRODUCT: f64 = 0.2;

/// Cap on the automatic step.
pub const MAX_AUTO_STEP: f64 = 1e-3;

/// Default spacing of recorded samples (metrics use every step regardless).
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 1e-3;

/// Observer transient excluded from the post-switch estimation metric, in units of `1/ω_o`.
pub const SETTLE_BANDWIDTHS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSpec {
    Auto,
    Fixed(f64),
}

impl StepSpec {
    /// `min(1e-3, 0.2/ω_o)` for `Auto`.
    pub fn resolve(&self, omega_o: f64) -> f64 {
        match *self {
            StepSpec::Auto => MAX_AUTO_STEP.min(MAX_STEP_BANDWIDTH_PRODUCT / omega_o),
            StepSpec::Fixed(h) => h,
        }
    }
}

/// One closed-loop experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    plant: PlantConfig,
    controller: ControllerConfig,
    reference: ReferenceSpec,
    eso_init: EsoState,
    horizon: f64,
    step: StepSpec,
    sample_interval: f64,
}

impl Scenario {
    pub fn new(
        plant: PlantConfig,
        controller: ControllerConfig,
        reference: ReferenceSpec,
        eso_init: EsoState,
        horizon: f64,
        step: StepSpec,
    ) -> Result<Self> {
        let n = plant.order();
        if controller.order() != n {
            return Err(Error::invalid(format!(
                "controller order {} does not match plant order {n}",
                controller.order()
            )));
        }
        if eso_init.order() != n {
            return Err(Error::invalid(format!(
                "observer initial state has order {}, plant order is {n}",
                eso_init.order()
            )));
        }
        if eso_init.xhat.iter().chain([&eso_init.fhat]).any(|v| !v.is_finite()) {
            return Err(Error::invalid("observer initial state must be finite"));
        }
        if plant.b_bar() != controller.b_bar() {
            return Err(Error::invalid("plant and controller must share the nominal gain b_bar"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        reference.validate()?;
        let h = step.resolve(controller.omega_o());
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid(format!("integration step must be positive, got {h}")));
        }
        let product = h * controller.omega_o();
        if product > MAX_STEP_BANDWIDTH_PRODUCT * (1.0 + 1e-9) {
            return Err(Error::invalid(format!(
                "step {h} gives h*omega_o = {product}, above the RK4 limit {MAX_STEP_BANDWIDTH_PRODUCT}"
            )));
        }
        eso_gains(controller.phi(), controller.omega_o())?.check_headroom()?;
        Ok(Self {
            plant,
            controller,
            reference,
            eso_init,
            horizon,
            step,
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
        })
    }

    /// Sets the spacing of recorded samples; rounded to a whole number of steps.
    pub fn with_sample_interval(mut self, interval: f64) -> Result<Self> {
        if !(interval > 0.0) || !interval.is_finite() {
            return Err(Error::invalid("sample interval must be positive"));
        }
        self.sample_interval = interval;
        Ok(self)
    }

    /// Same scenario at another bandwidth, with the automatic step.
    pub fn with_omega(&self, omega_o: f64) -> Result<Self> {
        let controller = self.controller.with_omega(omega_o)?;
        Scenario::new(
            self.plant.clone(),
            controller,
            self.reference.clone(),
            self.eso_init.clone(),
            self.horizon,
            StepSpec::Auto,
        )
        .and_then(|s| s.with_sample_interval(self.sample_interval))
    }

    pub fn with_step(&self, step: StepSpec) -> Result<Self> {
        Scenario::new(
            self.plant.clone(),
            self.controller.clone(),
            self.reference.clone(),
            self.eso_init.clone(),
            self.horizon,
            step,
        )
        .and_then(|s| s.with_sample_interval(self.sample_interval))
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Scenario::new(
            self.plant.clone(),
            self.controller.clone(),
            self.reference.clone(),
            self.eso_init.clone(),
            horizon,
            self.step,
        )
        .and_then(|s| s.with_sample_interval(self.sample_interval))
    }

    pub fn plant(&self) -> &PlantConfig {
        &self.plant
    }

    pub fn controller(&self) -> &ControllerConfig {
        &self.controller
    }

    pub fn reference(&self) -> &ReferenceSpec {
        &self.reference
    }

    pub fn eso_init(&self) -> &EsoState {
        &self.eso_init
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.step.resolve(self.controller.omega_o())
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }
}

/// Second-order benchmark loop: `b̄ = 1`, `K = (4, 4)`, `φ = (3, 3, 1)`,
/// `R ≡ 0`, observer started at `(x0, f̂ = 0)`, automatic step.
pub fn benchmark_scenario(
    uncertainty: UncertaintySpec,
    b_delta: f64,
    omega_o: f64,
    x0: [f64; 2],
    horizon: f64,
) -> Result<Scenario> {
    let phi = PhiVector::from_f64(&[3.0, 3.0, 1.0])?;
    let eso_init = EsoState {
        xhat: x0.to_vec(),
        fhat: 0.0,
    };
    let rho0 = default_rho0(&x0, &eso_init.xhat);
    let plant = PlantConfig::new(1.0, b_delta, uncertainty, x0.to_vec())?;
    let controller = ControllerConfig::new(vec![4.0, 4.0], 1.0, omega_o, phi, rho0, 0.0)?;
    Scenario::new(
        plant,
        controller,
        ReferenceSpec::Zero,
        eso_init,
        horizon,
        StepSpec::Auto,
    )
}

/// One recorded point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub xhat: Vec<f64>,
    pub fhat: f64,
    /// True total disturbance `g(X, t) + b_δ u`.
    pub f: f64,
    pub u: f64,
    pub xstar: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    /// `sup_t ‖X - X*‖` over every integration step.
    pub sup_track: f64,
    /// `sup ‖(X - X̂, f - f̂)‖` for `t ≥ t_u + 5/ω_o`.
    pub sup_est_post: f64,
    /// `sup |f - f̂|` for `t ≥ t_u + 5/ω_o`.
    pub sup_f_est_post: f64,
    /// `‖X(T) - R(T)‖` at the last finite state.
    pub terminal_err: f64,
    pub t_u: f64,
    pub omega_o: f64,
    pub step: f64,
    pub steps: u64,
    /// Blow-up time when the state became non-finite.
    pub diverged_at: Option<f64>,
}

impl Metrics {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub n: usize,
    pub samples: Vec<Sample>,
    pub metrics: Metrics,
}

/// Shortest round-trip formatting; scientific outside `[1e-5, 1e16)`.
pub fn format_float(v: f64) -> String {
    let mag = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&mag) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl SimResult {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn csv_header(n: usize) -> String {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=n).map(|i| format!("x{i}")));
        cols.extend((1..=n).map(|i| format!("xhat{i}")));
        cols.extend(["fhat".to_string(), "f".to_string(), "u".to_string()]);
        cols.extend((1..=n).map(|i| format!("xstar{i}")));
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::csv_header(self.n))?;
        let mut line = String::new();
        for s in &self.samples {
            line.clear();
            line.push_str(&format_float(s.t));
            for v in s.x.iter().chain(&s.xhat).chain([&s.fhat, &s.f, &s.u]).chain(&s.xstar) {
                line.push(',');
                line.push_str(&format_float(*v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Evaluation context for the coupled vector field.
struct Loop<'a> {
    n: usize,
    plant: &'a PlantConfig,
    k: &'a [f64],
    b_bar: f64,
    gains: EsoGains,
    reference: &'a ReferenceSpec,
    r: Vec<f64>,
}

impl Loop<'_> {
    #[inline]
    fn input(&mut self, t: f64, z: &[f64], active: bool) -> f64 {
        let n = self.n;
        self.reference.derivatives_into(t, &mut self.r);
        if active {
            feedback(self.k, self.b_bar, &z[n..2 * n], z[2 * n], &self.r[..n], self.r[n])
        } else {
            0.0
        }
    }

    #[inline]
    fn field(&mut self, t: f64, z: &[f64], active: bool, out: &mut [f64]) {
        let n = self.n;
        let u = self.input(t, z, active);
        let (dx, rest) = out.split_at_mut(n);
        let (deso, dstar) = rest.split_at_mut(n + 1);
        self.plant.derivative_into(&z[..n], u, t, dx);
        eso_derivative_into(&z[n..2 * n + 1], u, z[0], &self.gains, self.b_bar, deso);
        ideal_derivative_into(self.k, &z[2 * n + 1..], &self.r[..n], self.r[n], dstar);
    }
}

/// Euclidean distance, accumulated with `hypot` so large finite states do not overflow.
fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.hypot(x - y))
}

/// Segment boundaries in `[t0, t_end]`: the start, `t_u`, and every kink of `g`
/// or the reference strictly inside, then the end.
fn segment_bounds(t0: f64, t_end: f64, switches: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut bounds = vec![t0];
    let mut inner: Vec<f64> = switches.into_iter().filter(|&s| s > t0 && s < t_end).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    bounds.extend(inner);
    bounds.push(t_end);
    bounds
}

fn integrate(sc: &Scenario, record: bool) -> Result<SimResult> {
    let n = sc.plant.order();
    let ctrl = &sc.controller;
    let t_u = compute_tu(ctrl)?;
    let t0 = ctrl.t0();
    let t_end = t0 + sc.horizon;
    let h = sc.step();
    let omega_o = ctrl.omega_o();
    let settle = t_u + SETTLE_BANDWIDTHS / omega_o;
    let sample_every = ((sc.sample_interval / h).round() as u64).max(1);

    let mut lp = Loop {
        n,
        plant: &sc.plant,
        k: ctrl.k(),
        b_bar: ctrl.b_bar(),
        gains: eso_gains(ctrl.phi(), omega_o)?,
        reference: &sc.reference,
        r: vec![0.0; n + 2],
    };

    let dim = 3 * n + 1;
    let mut z = vec![0.0; dim];
    z[..n].copy_from_slice(sc.plant.x0());
    z[n..2 * n].copy_from_slice(&sc.eso_init.xhat);
    z[2 * n] = sc.eso_init.fhat;
    z[2 * n + 1..].copy_from_slice(sc.plant.x0());

    let mut metrics = Metrics {
        sup_track: 0.0,
        sup_est_post: 0.0,
        sup_f_est_post: 0.0,
        terminal_err: 0.0,
        t_u,
        omega_o,
        step: h,
        steps: 0,
        diverged_at: None,
    };
    let mut samples = Vec::new();

    let observe = |lp: &mut Loop, t: f64, z: &[f64], metrics: &mut Metrics, keep: bool, samples: &mut Vec<Sample>| {
        let u = lp.input(t, z, t >= t_u);
        let x = &z[..n];
        let f = lp.plant.total_disturbance(x, u, t);
        metrics.sup_track = metrics.sup_track.max(norm_diff(x, &z[2 * n + 1..]));
        if t >= settle {
            let state_err = norm_diff(x, &z[n..2 * n]);
            let f_err = (f - z[2 * n]).abs();
            metrics.sup_est_post = metrics.sup_est_post.max(state_err.hypot(f_err));
            metrics.sup_f_est_post = metrics.sup_f_est_post.max(f_err);
        }
        metrics.terminal_err = norm_diff(x, &lp.r[..n]);
        if keep {
            samples.push(Sample {
                t,
                x: x.to_vec(),
                xhat: z[n..2 * n].to_vec(),
                fhat: z[2 * n],
                f,
                u,
                xstar: z[2 * n + 1..].to_vec(),
            });
        }
    };

    observe(&mut lp, t0, &z, &mut metrics, record, &mut samples);

    let switches = [t_u]
        .into_iter()
        .chain(sc.plant.uncertainty().breakpoints().iter().copied())
        .chain(sc.reference.breakpoints());
    let bounds = segment_bounds(t0, t_end, switches);
    let mut stepper = Rk4::new(dim);
    let mut step_count: u64 = 0;

    'segments: for seg in bounds.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let active = a >= t_u;
        let m = ((b - a) / h - 1e-9).ceil().max(1.0) as u64;
        let hs = (b - a) / m as f64;
        for j in 0..m {
            let t = a + j as f64 * hs;
            let t_next = if j + 1 == m { b } else { a + (j + 1) as f64 * hs };
            let stepped = stepper.step(|t, z, out| lp.field(t, z, active, out), t, &mut z, t_next - t);
            match stepped {
                Err(Error::Divergence { t, .. }) => {
                    metrics.diverged_at = Some(t);
                    break 'segments;
                }
                Err(e) => return Err(e),
                Ok(()) => {}
            }
            if z.iter().any(|v| !v.is_finite()) {
                metrics.diverged_at = Some(t_next);
                break 'segments;
            }
            step_count += 1;
            let keep = record && (step_count.is_multiple_of(sample_every) || t_next == t_end);
            observe(&mut lp, t_next, &z, &mut metrics, keep, &mut samples);
        }
    }
    metrics.steps = step_count;
    if metrics.diverged() {
        metrics.terminal_err = f64::INFINITY;
    }

    Ok(SimResult { n, samples, metrics })
}

/// Fixed-step closed-loop run with samples recorded every `sample_interval`.
///
/// Divergence is reported in `metrics.diverged_at`, not as an error.
pub fn run_closed_loop(sc: &Scenario) -> Result<SimResult> {
    integrate(sc, true)
}

/// As [`run_closed_loop`] but keeps only the metrics.
pub fn run_metrics(sc: &Scenario) -> Result<Metrics> {
    integrate(sc, false).map(|r| r.metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub omega_o: f64,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
}

/// Runs the scenario once per bandwidth (automatic step for each), rows in input order.
pub fn omega_sweep(sc: &Scenario, omegas: &[f64]) -> Vec<SweepRow> {
    omegas
        .par_iter()
        .map(|&omega_o| match sc.with_omega(omega_o).and_then(|s| run_metrics(&s)) {
            Ok(m) => SweepRow {
                omega_o,
                metrics: Some(m),
                error: None,
            },
            Err(e) => SweepRow {
                omega_o,
                metrics: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// [`omega_sweep`] on a dedicated pool of at most `threads` workers.
pub fn omega_sweep_with_threads(sc: &Scenario, omegas: &[f64], threads: usize) -> Result<Vec<SweepRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::NumericFailure(format!("cannot start sweep workers: {e}")))?;
    Ok(pool.install(|| omega_sweep(sc, omegas)))
}

/// Destabilising-sinusoid experiment for a gain ratio outside the margin.
#[derive(Debug, Clone, PartialEq)]
pub struct FalsificationSetup {
    pub phi: PhiVector,
    pub k: Vec<f64>,
    pub b_bar: f64,
    pub ratio: f64,
    pub amplitude: f64,
    pub angular_velocity: f64,
    pub phase: f64,
    pub omegas: Vec<f64>,
    pub epsilon: f64,
    pub horizon: f64,
}

impl FalsificationSetup {
    /// `K` from `(s + 2)^n`, `b̄ = 1`, horizon 30.
    pub fn new(
        phi: PhiVector,
        ratio: f64,
        amplitude: f64,
        angular_velocity: f64,
        phase: f64,
        omegas: Vec<f64>,
        epsilon: f64,
    ) -> Self {
        let k = default_feedback(phi.order());
        Self {
            phi,
            k,
            b_bar: 1.0,
            ratio,
            amplitude,
            angular_velocity,
            phase,
            omegas,
            epsilon,
            horizon: 30.0,
        }
    }
}

/// Gains placing every pole of `A - BKᵀ` at `-2`: `k_i = C(n, i-1) 2^{n-i+1}`.
pub fn default_feedback(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| {
            let c = (0..i - 1).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64);
            c * 2f64.powi((n - i + 1) as i32)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalsificationRow {
    pub omega_o: f64,
    pub sup_track: f64,
    pub diverged_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalsificationReport {
    pub ratio: f64,
    pub epsilon: f64,
    pub rows: Vec<FalsificationRow>,
    /// No tested bandwidth kept `sup_track ≤ ε` without diverging.
    pub tunability_refuted: bool,
}

/// Runs `g = M_g sin(w_g t + φ_g)`, `R ≡ 0`, `X(0) = X̂(0) = 0` (so `X* ≡ 0`)
/// at each bandwidth. Fails if the ratio is inside the gain margin.
pub fn falsification_run(setup: &FalsificationSetup) -> Result<FalsificationReport> {
    let ratio_exact = rational_from_f64(setup.ratio)?;
    if is_well_performed(&setup.phi, &ratio_exact) {
        return Err(Error::invalid(format!(
            "ratio {} is inside the gain margin for phi = {}; the falsification experiment needs a ratio outside it",
            setup.ratio, setup.phi
        )));
    }
    if !(setup.epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let n = setup.phi.order();
    let uncertainty = UncertaintySpec::Sinusoid {
        amplitude: setup.amplitude,
        angular_velocity: setup.angular_velocity,
        phase: setup.phase,
    };
    let plant = PlantConfig::new(setup.b_bar, setup.ratio * setup.b_bar, uncertainty, vec![0.0; n])?;
    let rho0 = default_rho0(&vec![0.0; n], &vec![0.0; n]);
    let omega_first = *setup
        .omegas
        .first()
        .ok_or_else(|| Error::invalid("no bandwidths given"))?;
    let controller = ControllerConfig::new(setup.k.clone(), setup.b_bar, omega_first, setup.phi.clone(), rho0, 0.0)?;
    let base = Scenario::new(
        plant,
        controller,
        ReferenceSpec::Zero,
        EsoState::zeros(n),
        setup.horizon,
        StepSpec::Auto,
    )?;

    let sweep = omega_sweep(&base, &setup.omegas);
    let mut rows = Vec::with_capacity(sweep.len());
    for row in sweep {
        let m = match (row.metrics, row.error) {
            (Some(m), _) => m,
            (None, Some(e)) => return Err(Error::invalid(e)),
            (None, None) => unreachable!("sweep row without metrics or error"),
        };
        rows.push(FalsificationRow {
            omega_o: row.omega_o,
            sup_track: m.sup_track,
            diverged_at: m.diverged_at,
        });
    }
    let tunability_refuted = rows
        .iter()
        .all(|r| r.diverged_at.is_some() || !(r.sup_track <= setup.epsilon));
    Ok(FalsificationReport {
        ratio: setup.ratio,
        epsilon: setup.epsilon,
        rows,
        tunability_refuted,
    })
}
