//! Rigid-body point-mass plant with attitude kinematics and wing aerodynamics.
//!
//! ```text
//! ṗ = v
//! v̇ = (R·[0, 0, f_z] + R·R_b^lᵀ·f_a^l)/m + g
//! Ṙ = R·[ω]×
//! ```
//!
//! Body rates are commanded directly; a first-order lag optionally stands in
//! for the inner rate loop and motor response.

use crate::aero::{aero_force_l_frame, r_b_l, AeroParams};
use crate::control::ControlInput;
use crate::geom::{gravity, orthonormalize, skew, Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub p: Vec3,
    pub v: Vec3,
    /// Body → earth rotation.
    pub r: Mat3,
    /// s
    pub t: f64,
}

impl VehicleState {
    pub fn at_rest(p: Vec3) -> Self {
        Self { p, v: Vec3::zeros(), r: Mat3::identity(), t: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantConfig {
    /// Plant aerodynamics; may differ from the controller's model.
    pub aero: AeroParams,
    /// m/s, earth frame
    pub wind: Vec3,
    /// Body-rate lag time constant, s (0 = ideal).
    pub tau_rate: f64,
    /// Thrust lag time constant, s (0 = ideal).
    pub tau_thrust: f64,
    /// Integration step, s.
    pub step: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self { aero: AeroParams::default(), wind: Vec3::zeros(), tau_rate: 0.0, tau_thrust: 0.0, step: 1e-3 }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.aero.validate().map_err(|e| e.to_string())?;
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err("plant step must be positive".into());
        }
        if !(self.tau_rate >= 0.0) || !(self.tau_thrust >= 0.0) {
            return Err("actuator time constants must be non-negative".into());
        }
        if self.wind.iter().any(|w| !w.is_finite()) {
            return Err("wind must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub p_dot: Vec3,
    pub v_dot: Vec3,
    pub r_dot: Mat3,
}

pub fn state_derivative(cfg: &PlantConfig, state: &VehicleState, input: &ControlInput) -> StateDerivative {
    let m = cfg.aero.mass;
    let v_a = state.v - cfg.wind;
    let wing = state.r * r_b_l(cfg.aero.kappa).transpose() * aero_force_l_frame(&cfg.aero, &state.r, &v_a);
    let rotor = state.r.column(2) * input.thrust;
    StateDerivative {
        p_dot: state.v,
        v_dot: (rotor + wing) / m + gravity(),
        r_dot: state.r * skew(&input.body_rate),
    }
}

/// Classical RK4 step of length `dt` with the input evaluated at each stage
/// time; the attitude is re-orthonormalized afterwards.
pub fn rk4_step_with<F>(cfg: &PlantConfig, state: &VehicleState, dt: f64, input: F) -> VehicleState
where
    F: Fn(f64) -> ControlInput,
{
    let shifted = |s: &VehicleState, d: &StateDerivative, h: f64| VehicleState {
        p: s.p + d.p_dot * h,
        v: s.v + d.v_dot * h,
        r: s.r + d.r_dot * h,
        t: s.t + h,
    };
    let k1 = state_derivative(cfg, state, &input(state.t));
    let s2 = shifted(state, &k1, 0.5 * dt);
    let k2 = state_derivative(cfg, &s2, &input(s2.t));
    let s3 = shifted(state, &k2, 0.5 * dt);
    let k3 = state_derivative(cfg, &s3, &input(s3.t));
    let s4 = shifted(state, &k3, dt);
    let k4 = state_derivative(cfg, &s4, &input(s4.t));
    let w = dt / 6.0;
    VehicleState {
        p: state.p + (k1.p_dot + 2.0 * k2.p_dot + 2.0 * k3.p_dot + k4.p_dot) * w,
        v: state.v + (k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot) * w,
        r: orthonormalize(&(state.r + (k1.r_dot + 2.0 * k2.r_dot + 2.0 * k3.r_dot + k4.r_dot) * w)),
        t: state.t + dt,
    }
}

/// RK4 step of `cfg.step` with the input held constant.
pub fn rk4_step(cfg: &PlantConfig, state: &VehicleState, input: &ControlInput) -> VehicleState {
    rk4_step_with(cfg, state, cfg.step, |_| *input)
}

/// First-order lag per channel: `applied += (dt/τ)(commanded − applied)`.
/// The gain is capped at one; `τ = 0` passes the command through.
pub fn actuator_lag(cfg: &PlantConfig, commanded: &ControlInput, applied: &ControlInput, dt: f64) -> ControlInput {
    let gain = |tau: f64| if tau > 0.0 { (dt / tau).min(1.0) } else { 1.0 };
    let (gf, gw) = (gain(cfg.tau_thrust), gain(cfg.tau_rate));
    ControlInput {
        thrust: applied.thrust + gf * (commanded.thrust - applied.thrust),
        body_rate: applied.body_rate + gw * (commanded.body_rate - applied.body_rate),
    }
}
