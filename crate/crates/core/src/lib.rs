//! Differential-flatness trajectory tracking for a lifting-wing quadcopter.
//!
//! The crate contains the aerodynamic model, the flatness transform from a
//! position trajectory to attitude/thrust/body-rate feedforward, a cascaded
//! tracking controller, a rigid-body plant for closed-loop simulation, and an
//! experiment harness that drives all of it from a config file.

pub mod aero;
pub mod control;
pub mod dynamics;
pub mod flatness;
pub mod geom;
pub mod harness;
pub mod trajectories;

pub use aero::AeroParams;
pub use control::{Condition, ControlInput, ControllerMode, Gains};
pub use dynamics::{PlantConfig, VehicleState};
pub use flatness::{flatness_transform, FlatSample, FlatnessContext, FlatnessOutput, SingularCase};
pub use geom::{Mat3, UnitQuat, Vec3};
pub use harness::{run_experiment, ExperimentConfig, RunResult};
pub use trajectories::{TrajectoryDef, TrajectoryKind};
