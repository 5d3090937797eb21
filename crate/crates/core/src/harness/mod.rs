//! Experiment runner: configuration, closed-loop runs, the four-condition
//! comparison, and CSV output.

pub mod config;
pub mod output;
pub mod run;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use run::{rmse, run_experiment, RunResult, TraceRow};

use crate::control::Condition;
use crate::flatness::{FlatSample, FlatnessContext, FlatnessOutput};
use crate::geom::{mat_to_quat, UnitQuat};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("diverged at t = {t:.3} s: position error {error:.3} m (reference speed {speed:.3} m/s)")]
    Divergence { t: f64, error: f64, speed: f64 },
    #[error("empty series")]
    EmptySeries,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug)]
pub struct ConditionCell {
    pub condition: Condition,
    pub result: Result<RunResult, HarnessError>,
}

/// Effect of removing the body-rate feedforward on the accelerating circle.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAblation {
    /// Peak error with rate feedforward over the window, m.
    pub baseline_peak: f64,
    /// Peak error without it, m (last logged error if the run diverged).
    pub ablated_peak: f64,
    pub diverged: bool,
    /// Reference speed when the ablated error first exceeded the deviation
    /// threshold, or at divergence.
    pub deviation_speed: Option<f64>,
    /// End of the evaluation window, s.
    pub window_end: f64,
}

impl RateAblation {
    pub fn ratio(&self) -> f64 {
        self.ablated_peak / self.baseline_peak
    }
}

#[derive(Debug)]
pub struct ConditionMatrix {
    /// In [`Condition::ALL`] order.
    pub cells: Vec<ConditionCell>,
    pub ablation: Result<RateAblation, HarnessError>,
}

impl ConditionMatrix {
    pub fn rmse(&self, condition: Condition) -> Option<f64> {
        self.cells.iter().find(|c| c.condition == condition)?.result.as_ref().ok().map(|r| r.rmse)
    }
}

/// Smallest error that counts as a significant deviation in the ablation, m.
pub const DEVIATION_FLOOR: f64 = 0.5;

/// Runs the four controller conditions on the same plant and seed, plus the
/// rate-feedforward ablation (PID with aero feedforward), all in parallel.
pub fn condition_matrix(base: &ExperimentConfig) -> Result<ConditionMatrix, HarnessError> {
    base.validate()?;
    let (cells, ablation) = std::thread::scope(|scope| {
        let handles: Vec<_> = Condition::ALL
            .into_iter()
            .map(|c| {
                let cfg = base.with_condition(c);
                (c, scope.spawn(move || run_experiment(&cfg)))
            })
            .collect();
        let ablation = scope.spawn(|| rate_ablation(base));
        let cells: Vec<ConditionCell> = handles
            .into_iter()
            .map(|(condition, h)| ConditionCell { condition, result: h.join().expect("simulation thread panicked") })
            .collect();
        (cells, ablation.join().expect("simulation thread panicked"))
    });
    Ok(ConditionMatrix { cells, ablation })
}

/// Peak error over the accelerating phase with and without body-rate
/// feedforward. The window ends at the circle's speed cap, or at the end of
/// the run for other trajectories.
pub fn rate_ablation(base: &ExperimentConfig) -> Result<RateAblation, HarnessError> {
    let mut on = base.with_condition(Condition::PidDfaf);
    on.controller.mode.use_rate_feedforward = true;
    let mut off = on.clone();
    off.controller.mode.use_rate_feedforward = false;
    let window_end = base.trajectory.switch_time().unwrap_or(base.duration).min(base.duration);

    let baseline = run_experiment(&on)?;
    let in_window = |r: &&TraceRow| r.t <= window_end;
    let baseline_peak = baseline.rows.iter().filter(in_window).map(TraceRow::error).fold(0.0, f64::max);
    let threshold = (3.0 * baseline_peak).max(DEVIATION_FLOOR);

    match run_experiment(&off) {
        Ok(run) => {
            let window: Vec<&TraceRow> = run.rows.iter().filter(|r| r.t <= window_end).collect();
            let ablated_peak = window.iter().map(|r| r.error()).fold(0.0, f64::max);
            let deviation_speed = window.iter().find(|r| r.error() > threshold).map(|r| r.v_ref.norm());
            Ok(RateAblation { baseline_peak, ablated_peak, diverged: false, deviation_speed, window_end })
        }
        Err(HarnessError::Divergence { t, error, speed }) if t <= window_end => Ok(RateAblation {
            baseline_peak,
            ablated_peak: error,
            diverged: true,
            deviation_speed: Some(speed),
            window_end,
        }),
        Err(e) => Err(e),
    }
}

/// Flatness feedforward at one control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedforwardRow {
    pub t: f64,
    pub sample: FlatSample,
    pub output: FlatnessOutput,
    pub q: UnitQuat,
}

/// Flatness feedforward along the configured trajectory, using the
/// controller's model (aero terms dropped for the DF conditions).
pub fn feedforward_table(cfg: &ExperimentConfig) -> Vec<FeedforwardRow> {
    let params = if cfg.controller.mode.use_aero_feedforward {
        cfg.controller.params
    } else {
        cfg.controller.params.without_aero()
    };
    let mut ctx = FlatnessContext::new(cfg.flatness);
    (0..=cfg.ticks())
        .map(|k| {
            let t = k as f64 / cfg.control_rate;
            let sample = cfg.trajectory.sample(t);
            let output = ctx.transform(&params, &sample);
            let q = mat_to_quat(&output.attitude).expect("flatness attitude is a rotation");
            FeedforwardRow { t, sample, output, q }
        })
        .collect()
}

/// Largest feedforward thrust and body rate along the trajectory and the
/// first time either leaves the actuator limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub max_thrust: f64,
    pub max_rate: f64,
    pub first_violation: Option<f64>,
}

impl Feasibility {
    pub fn feasible(&self) -> bool {
        self.first_violation.is_none()
    }
}

pub fn check_feasibility(cfg: &ExperimentConfig) -> Feasibility {
    let lim = cfg.controller.limits;
    let mut report = Feasibility { max_thrust: 0.0, max_rate: 0.0, first_violation: None };
    for row in feedforward_table(cfg) {
        let thrust = row.output.thrust.abs();
        let rate = row.output.body_rate.amax();
        report.max_thrust = report.max_thrust.max(thrust);
        report.max_rate = report.max_rate.max(rate);
        if report.first_violation.is_none() && (thrust > lim.max_thrust || rate > lim.max_rate) {
            report.first_violation = Some(row.t);
        }
    }
    report
}
