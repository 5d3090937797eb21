//! Experiment configuration file.
//!
//! TOML with dotted keys, one value per line:
//!
//! ```toml
//! trajectory.kind = "circle"
//! plant.kappa_deg = 34.0
//! gains.kvp.x = 3.0
//! mode.condition = "pd-dfaf"
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::HarnessError;
use crate::aero::AeroParams;
use crate::control::{ActuatorLimits, Condition, ControllerConfig, ControllerMode, Gains};
use crate::dynamics::PlantConfig;
use crate::flatness::FlatnessSettings;
use crate::geom::{Vec3, GRAVITY};
use crate::trajectories::{TrajectoryDef, TrajectoryKind};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub z: f64,
}

impl Axes {
    fn uniform(v: f64) -> Self {
        Self { x: v, y: v, z: v }
    }

    fn vec(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

impl Default for Axes {
    fn default() -> Self {
        Self::uniform(0.0)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub trajectory: TrajectorySection,
    pub plant: PlantSection,
    pub controller: ControllerSection,
    pub gains: GainsSection,
    pub mode: ModeSection,
    pub limits: LimitsSection,
    pub sim: SimSection,
    pub flatness: FlatnessSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    pub kind: TrajectoryKind,
    pub p0: Axes,
    pub r: Option<f64>,
    pub omega: Option<f64>,
    pub speed_cap: Option<f64>,
    pub yaw_fallback_deg: Option<f64>,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self { kind: TrajectoryKind::Circle, p0: Axes::default(), r: None, omega: None, speed_cap: None, yaw_fallback_deg: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub mass: f64,
    pub kappa_deg: f64,
    pub rho: f64,
    pub wing_area: f64,
    pub cd0: f64,
    pub cy0: f64,
    pub cla: f64,
    pub wind: Axes,
    pub tau_rate: f64,
    pub tau_thrust: f64,
    pub step: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        let a = AeroParams::default();
        let p = PlantConfig::default();
        Self {
            mass: a.mass,
            kappa_deg: a.kappa.to_degrees(),
            rho: a.rho,
            wing_area: a.wing_area,
            cd0: a.cd0,
            cy0: a.cy0,
            cla: a.cla,
            wind: Axes::default(),
            tau_rate: p.tau_rate,
            tau_thrust: p.tau_thrust,
            step: p.step,
        }
    }
}

/// Controller's aerodynamic model. Unset fields copy the plant; the three
/// coefficients are then multiplied by `aero_scale`.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub aero_scale: f64,
    pub mass: Option<f64>,
    pub kappa_deg: Option<f64>,
    pub rho: Option<f64>,
    pub wing_area: Option<f64>,
    pub cd0: Option<f64>,
    pub cy0: Option<f64>,
    pub cla: Option<f64>,
    /// Wind assumed by the feedforward; defaults to the plant wind.
    pub wind: Option<Axes>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            aero_scale: 1.0,
            mass: None,
            kappa_deg: None,
            rho: None,
            wing_area: None,
            cd0: None,
            cy0: None,
            cla: None,
            wind: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsSection {
    pub kpp: Axes,
    pub kvp: Axes,
    pub kvi: Axes,
    pub kff: Axes,
    pub katt: Axes,
    pub integrator_limit: f64,
}

impl Default for GainsSection {
    fn default() -> Self {
        let g = Gains::default();
        let axes = |v: Vec3| Axes { x: v.x, y: v.y, z: v.z };
        Self {
            kpp: axes(g.kpp),
            kvp: axes(g.kvp),
            kvi: axes(g.kvi),
            kff: axes(g.kff),
            katt: axes(g.katt),
            integrator_limit: g.integrator_limit,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeSection {
    pub condition: Condition,
    pub rate_feedforward: bool,
    pub literal_thrust_direction: bool,
}

impl Default for ModeSection {
    fn default() -> Self {
        Self { condition: Condition::PidDfaf, rate_feedforward: true, literal_thrust_direction: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsSection {
    /// Largest thrust magnitude in multiples of the weight.
    pub thrust_max_g: f64,
    /// rad/s per axis
    pub rate_max: f64,
}

impl Default for LimitsSection {
    fn default() -> Self {
        Self { thrust_max_g: 4.0, rate_max: 6.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub duration: f64,
    pub control_rate: f64,
    pub seed: u64,
    pub abort_radius: f64,
    /// Controller position measurement delay, control ticks.
    pub measurement_delay: usize,
    /// Half-width of uniform position noise, m.
    pub position_jitter: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self { duration: 30.0, control_rate: 250.0, seed: 0, abort_radius: 100.0, measurement_delay: 0, position_jitter: 0.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatnessSection {
    pub hold_last_heading: bool,
    pub enter_speed: f64,
    pub exit_speed: f64,
}

impl Default for FlatnessSection {
    fn default() -> Self {
        let s = FlatnessSettings::default();
        Self { hold_last_heading: s.hold_last_heading, enter_speed: s.enter_speed, exit_speed: s.exit_speed }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trajectory: TrajectoryDef,
    pub plant: PlantConfig,
    pub controller: ControllerConfig,
    pub flatness: FlatnessSettings,
    pub duration: f64,
    pub control_rate: f64,
    pub seed: u64,
    pub abort_radius: f64,
    pub measurement_delay: usize,
    pub position_jitter: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ConfigFile::default().build().expect("defaults are valid")
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        file.build()
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Same experiment under another controller condition.
    pub fn with_condition(&self, condition: Condition) -> Self {
        let mut cfg = self.clone();
        let old = cfg.controller.mode;
        cfg.controller.mode = ControllerMode {
            use_rate_feedforward: old.use_rate_feedforward,
            literal_thrust_direction: old.literal_thrust_direction,
            ..condition.mode()
        };
        cfg
    }

    pub fn condition(&self) -> Condition {
        let m = self.controller.mode;
        match (m.use_integrator, m.use_aero_feedforward) {
            (true, true) => Condition::PidDfaf,
            (false, true) => Condition::PdDfaf,
            (true, false) => Condition::PidDf,
            (false, false) => Condition::PdDf,
        }
    }

    /// Number of plant steps per control tick.
    pub fn substeps(&self) -> usize {
        (1.0 / (self.control_rate * self.plant.step)).round() as usize
    }

    /// Number of control ticks after the initial one.
    pub fn ticks(&self) -> usize {
        (self.duration * self.control_rate).round() as usize
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        self.trajectory.validate().map_err(HarnessError::Config)?;
        self.plant.validate().map_err(HarnessError::Config)?;
        self.controller.params.validate().map_err(|e| HarnessError::Config(format!("controller: {e}")))?;
        self.controller.gains.validate().map_err(HarnessError::Config)?;
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad(format!("sim.duration must be positive, got {}", self.duration));
        }
        if !(self.control_rate > 0.0) || !self.control_rate.is_finite() {
            return bad(format!("sim.control_rate must be positive, got {}", self.control_rate));
        }
        let ratio = 1.0 / (self.control_rate * self.plant.step);
        if ratio < 0.999_999 || (ratio - ratio.round()).abs() > 1e-6 {
            return bad("the control period must be a whole multiple of plant.step".into());
        }
        if !(self.abort_radius > 0.0) {
            return bad("sim.abort_radius must be positive".into());
        }
        if !(self.position_jitter >= 0.0) {
            return bad("sim.position_jitter must be non-negative".into());
        }
        let lim = self.controller.limits;
        if !(lim.max_thrust > 0.0) || !(lim.max_rate > 0.0) {
            return bad("actuator limits must be positive".into());
        }
        let f = self.flatness;
        if !(f.enter_speed >= 0.0) || !(f.exit_speed >= f.enter_speed) {
            return bad("flatness speeds must satisfy 0 <= enter_speed <= exit_speed".into());
        }
        Ok(())
    }
}

impl ConfigFile {
    pub fn build(&self) -> Result<ExperimentConfig, HarnessError> {
        let t = &self.trajectory;
        let mut trajectory = match t.kind {
            TrajectoryKind::Circle => TrajectoryDef::default_circle(),
            TrajectoryKind::Lemniscate => TrajectoryDef::default_lemniscate(),
            TrajectoryKind::Hover => TrajectoryDef::hover(Vec3::zeros(), 0.0),
            TrajectoryKind::Line => TrajectoryDef::line(Vec3::zeros(), 5.0, 0.0),
        };
        trajectory.p0 = t.p0.vec();
        trajectory.r = t.r.unwrap_or(trajectory.r);
        trajectory.omega = t.omega.unwrap_or(trajectory.omega);
        trajectory.speed_cap = t.speed_cap.unwrap_or(trajectory.speed_cap);
        trajectory.yaw_fallback = t.yaw_fallback_deg.map_or(trajectory.yaw_fallback, f64::to_radians);

        let p = &self.plant;
        let plant_aero = AeroParams {
            mass: p.mass,
            kappa: p.kappa_deg.to_radians(),
            rho: p.rho,
            wing_area: p.wing_area,
            cd0: p.cd0,
            cy0: p.cy0,
            cla: p.cla,
        };
        let plant = PlantConfig {
            aero: plant_aero,
            wind: p.wind.vec(),
            tau_rate: p.tau_rate,
            tau_thrust: p.tau_thrust,
            step: p.step,
        };

        let c = &self.controller;
        let model = AeroParams {
            mass: c.mass.unwrap_or(plant_aero.mass),
            kappa: c.kappa_deg.map_or(plant_aero.kappa, f64::to_radians),
            rho: c.rho.unwrap_or(plant_aero.rho),
            wing_area: c.wing_area.unwrap_or(plant_aero.wing_area),
            cd0: c.cd0.unwrap_or(plant_aero.cd0),
            cy0: c.cy0.unwrap_or(plant_aero.cy0),
            cla: c.cla.unwrap_or(plant_aero.cla),
        }
        .scaled_coefficients(c.aero_scale);
        if !(c.aero_scale >= 0.0) {
            return Err(HarnessError::Config("controller.aero_scale must be non-negative".into()));
        }

        let g = &self.gains;
        let gains = Gains {
            kpp: g.kpp.vec(),
            kvp: g.kvp.vec(),
            kvi: g.kvi.vec(),
            kff: g.kff.vec(),
            katt: g.katt.vec(),
            integrator_limit: g.integrator_limit,
        };
        let mode = ControllerMode {
            use_rate_feedforward: self.mode.rate_feedforward,
            literal_thrust_direction: self.mode.literal_thrust_direction,
            ..self.mode.condition.mode()
        };
        let limits = ActuatorLimits {
            max_thrust: self.limits.thrust_max_g * model.mass * GRAVITY,
            max_rate: self.limits.rate_max,
        };
        let controller = ControllerConfig {
            params: model,
            gains,
            mode,
            limits,
            wind: c.wind.map_or(plant.wind, |w| w.vec()),
        };
        let flatness = FlatnessSettings {
            wind: controller.wind,
            enter_speed: self.flatness.enter_speed,
            exit_speed: self.flatness.exit_speed,
            hold_last_heading: self.flatness.hold_last_heading,
        };
        let s = &self.sim;
        let cfg = ExperimentConfig {
            trajectory,
            plant,
            controller,
            flatness,
            duration: s.duration,
            control_rate: s.control_rate,
            seed: s.seed,
            abort_radius: s.abort_radius,
            measurement_delay: s.measurement_delay,
            position_jitter: s.position_jitter,
            output_dir: self.output.dir.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
