//! Cascaded position/velocity/attitude controller with flatness feedforward.
//!
//! Position error sets a velocity command, the velocity loop (PD or PID) sets
//! a desired acceleration, that acceleration fixes the body z axis and the
//! thrust, and a quaternion attitude loop turns the resulting attitude error
//! into a body-rate command on top of the reference body rate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aero::{aero_accel_earth, AeroParams};
use crate::dynamics::VehicleState;
use crate::flatness::{FlatSample, FlatnessOutput};
use crate::geom::{gravity, mat_to_quat, quat_to_axis_angle, Mat3, Vec3, GRAVITY};

/// Diagonal gains, stored as the diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    pub kpp: Vec3,
    pub kvp: Vec3,
    pub kvi: Vec3,
    pub kff: Vec3,
    pub katt: Vec3,
    /// Per-axis bound on the integral contribution `K_vi·∫e`, m/s².
    pub integrator_limit: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            kpp: Vec3::repeat(1.0),
            kvp: Vec3::repeat(3.0),
            kvi: Vec3::repeat(0.6),
            kff: Vec3::repeat(0.8),
            katt: Vec3::repeat(8.0),
            integrator_limit: 3.0,
        }
    }
}

impl Gains {
    pub fn zero() -> Self {
        Self {
            kpp: Vec3::zeros(),
            kvp: Vec3::zeros(),
            kvi: Vec3::zeros(),
            kff: Vec3::zeros(),
            katt: Vec3::zeros(),
            integrator_limit: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [self.kpp, self.kvp, self.kvi, self.kff, self.katt];
        if all.iter().flat_map(|g| g.iter()).any(|&k| !(k >= 0.0) || !k.is_finite()) {
            return Err("gains must be finite and non-negative".into());
        }
        if self.kff.iter().any(|&k| k > 1.0) {
            return Err("feedforward attenuation gains must lie in [0, 1]".into());
        }
        if !(self.integrator_limit >= 0.0) {
            return Err("integrator limit must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerMode {
    /// PID (true) or PD (false) velocity loop.
    pub use_integrator: bool,
    /// Aerodynamic terms in the feedforward (DFAF) or not (DF).
    pub use_aero_feedforward: bool,
    pub use_rate_feedforward: bool,
    /// Normalize the body z command by `‖a_d‖` and project `a_d` for thrust,
    /// exactly as printed, instead of using the rotor-borne acceleration.
    pub literal_thrust_direction: bool,
}

impl Default for ControllerMode {
    fn default() -> Self {
        Condition::PidDfaf.mode()
    }
}

/// The four controller conditions compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "pid-dfaf")]
    PidDfaf,
    #[serde(rename = "pd-dfaf")]
    PdDfaf,
    #[serde(rename = "pid-df")]
    PidDf,
    #[serde(rename = "pd-df")]
    PdDf,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::PidDfaf, Condition::PdDfaf, Condition::PidDf, Condition::PdDf];

    pub fn mode(self) -> ControllerMode {
        let (use_integrator, use_aero_feedforward) = match self {
            Condition::PidDfaf => (true, true),
            Condition::PdDfaf => (false, true),
            Condition::PidDf => (true, false),
            Condition::PdDf => (false, false),
        };
        ControllerMode { use_integrator, use_aero_feedforward, use_rate_feedforward: true, literal_thrust_direction: false }
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::PidDfaf => "pid-dfaf",
            Condition::PdDfaf => "pd-dfaf",
            Condition::PidDf => "pid-df",
            Condition::PdDf => "pd-df",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown condition `{s}` (expected pid-dfaf, pd-dfaf, pid-df or pd-df)"))
    }
}

/// Collective thrust (N, ≤ 0) and body angular velocity (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    pub thrust: f64,
    pub body_rate: Vec3,
}

impl ControlInput {
    pub fn new(thrust: f64, body_rate: Vec3) -> Self {
        Self { thrust, body_rate }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorLimits {
    /// Largest thrust magnitude, N.
    pub max_thrust: f64,
    /// Per-axis body-rate bound, rad/s.
    pub max_rate: f64,
}

impl ActuatorLimits {
    /// `|f_z| ≤ 4mg`, `|ω_i| ≤ 6 rad/s`.
    pub fn for_mass(mass: f64) -> Self {
        Self { max_thrust: 4.0 * mass * GRAVITY, max_rate: 6.0 }
    }

    pub fn saturate(&self, input: &ControlInput) -> ControlInput {
        let m = self.max_rate;
        ControlInput {
            thrust: input.thrust.clamp(-self.max_thrust, 0.0),
            body_rate: input.body_rate.map(|w| w.clamp(-m, m)),
        }
    }
}

/// Model, gains and switches used by the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    /// Controller's copy of the aerodynamic model.
    pub params: AeroParams,
    pub gains: Gains,
    pub mode: ControllerMode,
    pub limits: ActuatorLimits,
    /// Wind assumed by the feedforward, m/s.
    pub wind: Vec3,
}

impl ControllerConfig {
    pub fn new(params: AeroParams, mode: ControllerMode) -> Self {
        Self { params, gains: Gains::default(), mode, limits: ActuatorLimits::for_mass(params.mass), wind: Vec3::zeros() }
    }
}

/// Per-vehicle controller memory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerContext {
    /// Raw velocity-error integral, m.
    pub integral: Vec3,
    pub last_attitude: Option<Mat3>,
    /// Whether the previous thrust command hit a limit.
    pub saturated: bool,
}

pub fn position_loop(gains: &Gains, p_ref: &Vec3, p: &Vec3, v_ref: &Vec3) -> Vec3 {
    gains.kpp.component_mul(&(p_ref - p)) + v_ref
}

/// Returns the desired acceleration and the updated integral. The integral
/// is not advanced in PD mode or when `freeze` is set.
pub fn velocity_loop(
    gains: &Gains,
    mode: &ControllerMode,
    v_d: &Vec3,
    v: &Vec3,
    a_ref: &Vec3,
    integral: &Vec3,
    dt: f64,
    freeze: bool,
) -> (Vec3, Vec3) {
    let err = v_d - v;
    let mut next = *integral;
    if mode.use_integrator && !freeze {
        next += err * dt;
        for i in 0..3 {
            if gains.kvi[i] > 0.0 {
                let bound = gains.integrator_limit / gains.kvi[i];
                next[i] = next[i].clamp(-bound, bound);
            }
        }
    }
    let integral_term = if mode.use_integrator { gains.kvi.component_mul(&next) } else { Vec3::zeros() };
    (gains.kvp.component_mul(&err) + integral_term + a_ref, next)
}

/// Attitude and thrust command from a desired acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeCommand {
    pub attitude: Mat3,
    pub thrust: f64,
    /// The rotor-borne acceleration vanished; attitude was held.
    pub free_fall: bool,
}

/// Below this rotor-borne acceleration the thrust direction is undefined, m/s².
pub const FREE_FALL_EPS: f64 = 1e-6;

/// `a_r,d = a_d − g − K_ff·a_af`, `z_b,d = −a_r,d/‖a_r,d‖`, thrust by projection.
///
/// `a_af` is the model aerodynamic acceleration at the reference attitude and
/// reference airspeed. `previous` is held when `a_r,d` vanishes.
pub fn accel_to_attitude_thrust(
    cfg: &ControllerConfig,
    a_d: &Vec3,
    reference: &FlatnessOutput,
    v_ref: &Vec3,
    previous: Option<&Mat3>,
) -> AttitudeCommand {
    let a_af = if cfg.mode.use_aero_feedforward {
        aero_accel_earth(&cfg.params, &reference.attitude, &(v_ref - cfg.wind))
    } else {
        Vec3::zeros()
    };
    let a_rd = a_d - gravity() - cfg.gains.kff.component_mul(&a_af);
    let norm = a_rd.norm();
    if norm < FREE_FALL_EPS {
        let attitude = previous.copied().unwrap_or(reference.attitude);
        return AttitudeCommand { attitude, thrust: 0.0, free_fall: true };
    }
    let (z_b, thrust) = if cfg.mode.literal_thrust_direction {
        let denom = (a_d - gravity()).norm().max(FREE_FALL_EPS);
        let z = -a_rd / denom;
        (z, cfg.params.mass * z.dot(&(a_d - gravity())))
    } else {
        let z = -a_rd / norm;
        (z, cfg.params.mass * z.dot(&a_rd))
    };
    let z_unit = z_b.normalize();
    let mut y_b = z_unit.cross(&reference.x_w);
    if y_b.norm() < 1e-9 {
        y_b = z_unit.cross(&reference.attitude.column(0).into_owned());
    }
    if y_b.norm() < 1e-9 {
        y_b = reference.attitude.column(1).into_owned();
    }
    let y_b = y_b.normalize();
    let x_b = y_b.cross(&z_unit);
    AttitudeCommand { attitude: Mat3::from_columns(&[x_b, y_b, z_unit]), thrust, free_fall: false }
}

/// `ω_cmd = K_Θp·ξ_e + ω_ref`, where `ξ_e` is the shortest-path rotation
/// vector of `q_err = q*·q_d` (body-frame rotation from current to desired).
pub fn attitude_loop(gains: &Gains, desired: &Mat3, current: &Mat3, rate_ref: &Vec3, mode: &ControllerMode) -> Vec3 {
    let q_d = mat_to_quat(desired).expect("desired attitude is a rotation");
    let q = mat_to_quat(current).expect("current attitude is a rotation");
    let err = quat_to_axis_angle(&(q.conj() * q_d));
    let feedforward = if mode.use_rate_feedforward { *rate_ref } else { Vec3::zeros() };
    gains.katt.component_mul(&err.vector) + feedforward
}

/// One controller tick: position, velocity, thrust/attitude and attitude loops.
pub fn controller_step(
    cfg: &ControllerConfig,
    sample: &FlatSample,
    reference: &FlatnessOutput,
    state: &VehicleState,
    ctx: &mut ControllerContext,
    dt: f64,
) -> ControlInput {
    let v_d = position_loop(&cfg.gains, &sample.p, &state.p, &sample.v);
    let freeze = ctx.saturated;
    let (a_d, integral) =
        velocity_loop(&cfg.gains, &cfg.mode, &v_d, &state.v, &sample.a, &ctx.integral, dt, freeze);
    let cmd = accel_to_attitude_thrust(cfg, &a_d, reference, &sample.v, ctx.last_attitude.as_ref());
    let rate = attitude_loop(&cfg.gains, &cmd.attitude, &state.r, &reference.body_rate, &cfg.mode);
    let raw = ControlInput::new(cmd.thrust, rate);
    let out = cfg.limits.saturate(&raw);
    ctx.integral = integral;
    ctx.last_attitude = Some(cmd.attitude);
    ctx.saturated = out.thrust != raw.thrust;
    out
}
