//! JSON scenario files.

use std::fs;
use std::path::Path;

use adrc_core::controller::{default_rho0, ControllerConfig};
use adrc_core::observer::EsoState;
use adrc_core::plant::{PlantConfig, ReferenceSpec, UncertaintySpec};
use adrc_core::simulate::{Scenario, StepSpec};
use adrc_core::stability::{bandwidth_phi, PhiVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_HORIZON: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub n: usize,
    pub plant: PlantSection,
    pub controller: ControllerSection,
    #[serde(default = "zero_reference")]
    pub reference: ReferenceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eso_init: Option<EsoInit>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub step: StepField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub b_bar: f64,
    pub b_delta: f64,
    pub uncertainty: UncertaintySpec,
    /// Defaults to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    pub omega_o: f64,
    /// Defaults to the bandwidth design for order `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(default)]
    pub t0: f64,
}

/// `"3,3,0.5"` (parsed exactly) or `[3, 3, 0.5]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhiField {
    Text(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsoInit {
    pub xhat: Vec<f64>,
    pub fhat: f64,
}

/// `"auto"` or a step length in seconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum StepField {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for StepField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            StepField::Auto => s.serialize_str("auto"),
            StepField::Fixed(h) => s.serialize_f64(*h),
        }
    }
}

impl<'de> Deserialize<'de> for StepField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) if t == "auto" => Ok(StepField::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "step must be \"auto\" or a number, got \"{t}\""
            ))),
            Raw::Number(h) => Ok(StepField::Fixed(h)),
        }
    }
}

fn zero_reference() -> ReferenceSpec {
    ReferenceSpec::Zero
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}

fn field_error(field: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{field}: {err}"))
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("scenario schema: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn phi(&self) -> Result<PhiVector, CliError> {
        let phi = match &self.controller.phi {
            None => bandwidth_phi(self.n),
            Some(PhiField::Text(s)) => PhiVector::parse(s),
            Some(PhiField::Values(v)) => PhiVector::from_f64(v),
        }
        .map_err(|e| field_error("controller.phi", e))?;
        if phi.order() != self.n {
            return Err(field_error(
                "controller.phi",
                format!(
                    "has {} entries, order n = {} needs {}",
                    phi.order() + 1,
                    self.n,
                    self.n + 1
                ),
            ));
        }
        Ok(phi)
    }

    /// Checks every physical invariant and assembles the simulator input.
    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        let n = self.n;
        if n == 0 {
            return Err(field_error("n", "order must be at least 1"));
        }
        let x0 = self.plant.x0.clone().unwrap_or_else(|| vec![0.0; n]);
        if x0.len() != n {
            return Err(field_error(
                "plant.x0",
                format!("has {} entries, expected n = {n}", x0.len()),
            ));
        }
        if self.controller.k.len() != n {
            return Err(field_error(
                "controller.K",
                format!("has {} entries, expected n = {n}", self.controller.k.len()),
            ));
        }
        let eso_init = match &self.eso_init {
            Some(e) if e.xhat.len() != n => {
                return Err(field_error(
                    "eso_init.xhat",
                    format!("has {} entries, expected n = {n}", e.xhat.len()),
                ))
            }
            Some(e) => EsoState {
                xhat: e.xhat.clone(),
                fhat: e.fhat,
            },
            None => EsoState::zeros(n),
        };
        let phi = self.phi()?;
        let rho0 = self
            .controller
            .rho0
            .unwrap_or_else(|| default_rho0(&x0, &eso_init.xhat));
        let plant = PlantConfig::new(self.plant.b_bar, self.plant.b_delta, self.plant.uncertainty, x0)
            .map_err(|e| field_error("plant", e))?;
        let controller = ControllerConfig::new(
            self.controller.k.clone(),
            self.plant.b_bar,
            self.controller.omega_o,
            phi,
            rho0,
            self.controller.t0,
        )
        .map_err(|e| field_error("controller", e))?;
        let step = match self.step {
            StepField::Auto => StepSpec::Auto,
            StepField::Fixed(h) => StepSpec::Fixed(h),
        };
        let sc = Scenario::new(plant, controller, self.reference.clone(), eso_init, self.horizon, step)
            .map_err(|e| field_error("scenario", e))?;
        match self.sample_interval {
            Some(dt) => sc
                .with_sample_interval(dt)
                .map_err(|e| field_error("sample_interval", e)),
            None => Ok(sc),
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    ScenarioFile::load(path)?
        .to_scenario()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
