//! Run configuration: TOML sections, presets and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error};
use crate::hyperbolic::TimeIntegrator;
use crate::scenarios::{DiocotronParams, VortexParams};
use crate::source_update::{PreconditionerKind, SolverSettings};
use crate::splitting::{RestartMode, Simulation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Vortex,
    Diocotron,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub preconditioner: PreconditionerKind,
    pub rel_tol: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::<f64>::default();
        Self {
            preconditioner: s.preconditioner,
            rel_tol: s.rel_tol,
            max_iterations: s.max_iterations,
            restart: s.restart,
        }
    }
}

impl SolverConfig {
    pub fn settings(&self) -> SolverSettings<f64> {
        SolverSettings {
            preconditioner: self.preconditioner,
            rel_tol: self.rel_tol,
            max_iterations: self.max_iterations,
            restart: self.restart,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Time between VTK snapshots; zero writes only the first and last.
    pub vtk_interval: f64,
    pub vtk: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("output"),
            vtk_interval: 0.0,
            vtk: true,
        }
    }
}

/// Everything needed to set up and run one simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub t_final: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_integrator")]
    pub integrator: TimeIntegrator,
    #[serde(default)]
    pub restart: RestartMode,
    /// Global refinement level. The vortex box has `2^refinement` cells per
    /// side; the disk starts from 12 cells.
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    /// Worker threads; zero uses the rayon default.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub vortex: VortexParams,
    #[serde(default)]
    pub diocotron: DiocotronParams,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_theta() -> f64 {
    0.5
}
fn default_cfl() -> f64 {
    0.25
}
fn default_integrator() -> TimeIntegrator {
    TimeIntegrator::SspRk3
}
fn default_refinement() -> usize {
    5
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            t_final: 0.0,
            theta: default_theta(),
            cfl: default_cfl(),
            integrator: default_integrator(),
            restart: RestartMode::None,
            refinement: default_refinement(),
            threads: 0,
            vortex: VortexParams::default(),
            diocotron: DiocotronParams::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl SimulationConfig {
    /// Low-order vortex run: forward Euler, backward Euler source, CFL 0.1.
    pub fn vortex_preset() -> Self {
        Self {
            scenario: Some(Scenario::Vortex),
            t_final: 1.0,
            theta: 1.0,
            cfl: 0.1,
            integrator: TimeIntegrator::ForwardEuler,
            ..Default::default()
        }
    }

    /// Diocotron run for perturbation mode `mode`.
    pub fn diocotron_preset(mode: u32) -> Self {
        Self {
            scenario: Some(Scenario::Diocotron),
            t_final: 1.0,
            theta: 0.5,
            cfl: 0.25,
            integrator: TimeIntegrator::SspRk3,
            diocotron: DiocotronParams {
                mode,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            match msg.strip_prefix("unknown field `").and_then(|r| r.split('`').next()) {
                Some(key) => ConfigError::UnknownKey(key.to_string()),
                None => ConfigError::Syntax(e.to_string()),
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::from_toml(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets up the initial state of the configured scenario.
    pub fn build(&self) -> Result<Simulation<f64>, Error> {
        self.validate()?;
        let solver = self.solver.settings();
        match self.scenario.ok_or(ConfigError::MissingScenario)? {
            Scenario::Vortex => Simulation::vortex(
                1 << self.refinement,
                &self.vortex,
                self.integrator,
                self.cfl,
                self.theta,
                self.restart,
                solver,
            ),
            Scenario::Diocotron => Simulation::diocotron(
                self.refinement,
                &self.diocotron,
                self.integrator,
                self.cfl,
                self.theta,
                self.restart,
                solver,
            ),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |key: &'static str, reason: String| ConfigError::OutOfRange { key, reason };
        let scenario = self.scenario.ok_or(ConfigError::MissingScenario)?;
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(range("t_final", format!("must be finite and non-negative, got {}", self.t_final)));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(range("theta", format!("must lie in (0, 1], got {}", self.theta)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(range("cfl", format!("must lie in (0, 1], got {}", self.cfl)));
        }
        if self.refinement > 12 {
            return Err(range("refinement", format!("at most 12 supported, got {}", self.refinement)));
        }
        if !(self.solver.rel_tol > 0.0 && self.solver.rel_tol < 1.0) {
            return Err(range("solver.rel_tol", format!("must lie in (0, 1), got {}", self.solver.rel_tol)));
        }
        if self.solver.max_iterations == 0 || self.solver.restart == 0 {
            return Err(range("solver.max_iterations", "iteration limits must be positive".into()));
        }
        if !(self.output.vtk_interval >= 0.0) {
            return Err(range("output.vtk_interval", "must be non-negative".into()));
        }
        match scenario {
            Scenario::Vortex => {
                let v = &self.vortex;
                if !(v.beta > 0.0) {
                    return Err(range("vortex.beta", format!("must be positive, got {}", v.beta)));
                }
                if !(v.gamma > 1.0 && v.gamma <= 5.0 / 3.0) {
                    return Err(range("vortex.gamma", format!("must lie in (1, 5/3], got {}", v.gamma)));
                }
                if !(v.alpha > 0.0) {
                    return Err(range("vortex.alpha", format!("must be positive, got {}", v.alpha)));
                }
                if !(v.lower[0] < v.upper[0] && v.lower[1] < v.upper[1]) {
                    return Err(range("vortex.lower", "box bounds are not ordered".into()));
                }
            }
            Scenario::Diocotron => {
                let d = &self.diocotron;
                if !(0.0 < d.r0 && d.r0 < d.r1 && d.r1 < d.radius) {
                    return Err(range("diocotron.r0", "radii must satisfy 0 < r0 < r1 < radius".into()));
                }
                if !(0.0 <= d.delta && d.delta < 0.5) {
                    return Err(range("diocotron.delta", format!("must lie in [0, 1/2), got {}", d.delta)));
                }
                if !(0.0 < d.rho_min && d.rho_min <= d.rho_max) {
                    return Err(range("diocotron.rho_min", "need 0 < rho_min <= rho_max".into()));
                }
                if !(d.beta > 0.0) {
                    return Err(range("diocotron.beta", format!("must be positive, got {}", d.beta)));
                }
                if !(d.temperature >= 0.0) {
                    return Err(range("diocotron.temperature", "must be non-negative".into()));
                }
            }
        }
        Ok(())
    }
}
