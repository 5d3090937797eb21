//! Closed-loop simulation of one experiment.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::HarnessError;
use crate::control::{controller_step, Condition, ControlInput, ControllerContext};
use crate::dynamics::{actuator_lag, rk4_step, VehicleState};
use crate::flatness::{FlatnessContext, SingularCase};
use crate::geom::{mat_to_quat, Mat3, UnitQuat, Vec3};

/// One logged control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub p: Vec3,
    pub p_ref: Vec3,
    pub v: Vec3,
    pub v_ref: Vec3,
    pub q: UnitQuat,
    /// Commanded attitude.
    pub q_d: UnitQuat,
    /// Commanded thrust, N.
    pub thrust: f64,
    /// Commanded body rate, rad/s.
    pub body_rate: Vec3,
    /// Reference angle of attack, rad.
    pub alpha: f64,
    pub singular: SingularCase,
}

impl TraceRow {
    pub fn error(&self) -> f64 {
        (self.p - self.p_ref).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub condition: Condition,
    pub rows: Vec<TraceRow>,
    /// Root-mean-square position error, m.
    pub rmse: f64,
}

impl RunResult {
    pub fn peak_error(&self) -> f64 {
        self.rows.iter().map(TraceRow::error).fold(0.0, f64::max)
    }
}

/// `sqrt(mean ‖p_ref − p‖²)` over paired samples.
pub fn rmse(pairs: &[(Vec3, Vec3)]) -> Result<f64, HarnessError> {
    if pairs.is_empty() {
        return Err(HarnessError::EmptySeries);
    }
    let sum: f64 = pairs.iter().map(|(r, p)| (r - p).norm_squared()).sum();
    Ok((sum / pairs.len() as f64).sqrt())
}

/// Runs the closed loop: at each control tick sample the trajectory, run the
/// flatness transform and the controller, pass the command through the
/// actuator lag, then advance the plant by the RK4 substeps of one period.
///
/// The vehicle starts on the reference (position, velocity, attitude) at t = 0.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult, HarnessError> {
    cfg.validate()?;
    let ctrl = cfg.controller;
    let dt = 1.0 / cfg.control_rate;
    let substeps = cfg.substeps();
    let ticks = cfg.ticks();
    let flat_params = if ctrl.mode.use_aero_feedforward { ctrl.params } else { ctrl.params.without_aero() };

    let mut flat_ctx = FlatnessContext::new(cfg.flatness);
    let mut ctrl_ctx = ControllerContext::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut delayed: VecDeque<Vec3> = VecDeque::with_capacity(cfg.measurement_delay + 1);

    let first = cfg.trajectory.sample(0.0);
    let first_ref = FlatnessContext::new(cfg.flatness).transform(&flat_params, &first);
    let mut state = VehicleState { p: first.p, v: first.v, r: first_ref.attitude, t: 0.0 };
    let mut applied: Option<ControlInput> = None;
    let mut rows = Vec::with_capacity(ticks + 1);

    for k in 0..=ticks {
        let t = k as f64 * dt;
        state.t = t;
        let sample = cfg.trajectory.sample(t);
        let reference = flat_ctx.transform(&flat_params, &sample);

        let mut measured = state.p;
        if cfg.position_jitter > 0.0 {
            for i in 0..3 {
                measured[i] += cfg.position_jitter * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        delayed.push_back(measured);
        if delayed.len() > cfg.measurement_delay + 1 {
            delayed.pop_front();
        }
        let seen = VehicleState { p: delayed[0], ..state };
        let cmd = controller_step(&ctrl, &sample, &reference, &seen, &mut ctrl_ctx, dt);

        let row = TraceRow {
            t,
            p: state.p,
            p_ref: sample.p,
            v: state.v,
            v_ref: sample.v,
            q: quat_of(&state.r),
            q_d: quat_of(ctrl_ctx.last_attitude.as_ref().unwrap_or(&reference.attitude)),
            thrust: cmd.thrust,
            body_rate: cmd.body_rate,
            alpha: reference.alpha,
            singular: reference.singular_case,
        };
        let error = row.error();
        rows.push(row);
        if !(error <= cfg.abort_radius) {
            return Err(HarnessError::Divergence { t, error, speed: sample.v.norm() });
        }
        if k == ticks {
            break;
        }

        let input = match applied {
            Some(prev) => actuator_lag(&cfg.plant, &cmd, &prev, dt),
            None => cmd,
        };
        applied = Some(input);
        for _ in 0..substeps {
            state = rk4_step(&cfg.plant, &state, &input);
        }
    }

    let pairs: Vec<(Vec3, Vec3)> = rows.iter().map(|r| (r.p_ref, r.p)).collect();
    let rmse = rmse(&pairs)?;
    Ok(RunResult { condition: cfg.condition(), rows, rmse })
}

fn quat_of(r: &Mat3) -> UnitQuat {
    mat_to_quat(r).expect("attitudes are kept orthonormal")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectories::TrajectoryDef;

    #[test]
    fn rmse_cases() {
        let z = Vec3::zeros();
        assert_eq!(rmse(&[(z, z), (Vec3::x(), Vec3::x())]).unwrap(), 0.0);
        let d = Vec3::new(3.0, 4.0, 0.0);
        assert_eq!(rmse(&[(z, d), (Vec3::x(), Vec3::x() + d)]).unwrap(), 5.0);
        let two = rmse(&[(z, Vec3::x()), (z, Vec3::new(0.0, 2.0, 0.0))]).unwrap();
        assert_eq!(two, (5.0f64 / 2.0).sqrt());
        assert!(matches!(rmse(&[]), Err(HarnessError::EmptySeries)));
    }

    #[test]
    fn hover_stays_put() {
        let mut cfg = ExperimentConfig::default();
        cfg.trajectory = TrajectoryDef::hover(Vec3::new(0.0, 0.0, -5.0), 0.0);
        cfg.duration = 2.0;
        let run = run_experiment(&cfg).unwrap();
        assert_eq!(run.rows.len(), 501);
        assert!(run.rmse < 1e-6, "rmse {}", run.rmse);
    }

    #[test]
    fn measurement_delay_and_jitter_are_deterministic() {
        let mut cfg = ExperimentConfig::default();
        cfg.duration = 3.0;
        cfg.measurement_delay = 5;
        cfg.position_jitter = 0.05;
        cfg.seed = 7;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 8;
        let c = run_experiment(&cfg).unwrap();
        assert_ne!(a.rows.last().unwrap().p, c.rows.last().unwrap().p);
    }
}
