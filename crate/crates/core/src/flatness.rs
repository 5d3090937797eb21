//! Differential-flatness transform for the lifting-wing quadcopter.
//!
//! A flat-output sample (position and its first three derivatives) is mapped
//! to the reference attitude, collective thrust, angle of attack and body
//! angular velocity under the coordinated-turn (zero sideslip) condition.
//!
//! The translational dynamics used throughout are
//!
//! ```text
//! a = (f_z/m)·z_b − Q_a·R·D·Rᵀ·v_a + g,    Q_a = ρS‖v_a‖/2m
//! ```
//!
//! with `D` the body-frame drag matrix from [`crate::aero::drag_matrix`].

use thiserror::Error;

use crate::aero::{aero_accel_earth, drag_matrix, AeroParams};
use crate::geom::{gravity, rodrigues, skew, wrap_pi, Mat3, Vec3, GRAVITY};

/// Airspeed below which the zero-velocity path is entered, m/s.
pub const ZERO_VELOCITY_ENTER: f64 = 0.3;
/// Airspeed above which the zero-velocity path is left again, m/s.
pub const ZERO_VELOCITY_EXIT: f64 = 0.5;
/// Relative threshold on `‖x_w × y_perp‖ / ‖y_perp‖` for the aligned case.
pub const EPS_CROSS: f64 = 1e-6;
/// Relative threshold on `|det A| / ‖A‖³` for the angular-velocity system.
pub const EPS_DET: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FlatnessError {
    #[error("airspeed {speed} m/s is below the zero-velocity threshold")]
    ZeroVelocity { speed: f64 },
    #[error("airspeed direction is aligned with the lateral constraint vector")]
    AlignedYPerp,
    #[error("force balance is degenerate (k1 = {k1:e}); thrust-free equilibrium")]
    DegenerateBalance { k1: f64 },
    #[error("angular-velocity system is singular (relative det {det:e})")]
    SingularSystem { det: f64 },
}

/// Reference trajectory point: the flat output and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatSample {
    pub p: Vec3,
    pub v: Vec3,
    pub a: Vec3,
    pub j: Vec3,
    /// Heading used only when the airspeed direction is undefined, rad.
    pub yaw_fallback: f64,
}

impl FlatSample {
    pub fn hover(p: Vec3, yaw: f64) -> Self {
        Self { p, v: Vec3::zeros(), a: Vec3::zeros(), j: Vec3::zeros(), yaw_fallback: yaw }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SingularCase {
    #[default]
    None,
    /// Airspeed too small to define the wind axis.
    ZeroVelocity,
    /// Wind axis parallel to the lateral constraint vector (vertical flight).
    AlignedYPerp,
}

impl SingularCase {
    /// Integer code used in CSV traces.
    pub fn code(self) -> u8 {
        match self {
            SingularCase::None => 0,
            SingularCase::ZeroVelocity => 1,
            SingularCase::AlignedYPerp => 2,
        }
    }
}

/// Feedforward set produced by the transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatnessOutput {
    /// Reference attitude `R_b^e`.
    pub attitude: Mat3,
    /// Collective thrust along body z, N (≤ 0).
    pub thrust: f64,
    /// Angle of attack, rad.
    pub alpha: f64,
    /// Reference body angular velocity, rad/s.
    pub body_rate: Vec3,
    /// Wind axis (heading reference in the zero-velocity case).
    pub x_w: Vec3,
    pub a_xw: f64,
    pub a_zw: f64,
    pub singular_case: SingularCase,
}

/// Attitude/thrust part of the transform before angular velocity is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeSolution {
    pub attitude: Mat3,
    pub thrust: f64,
    pub alpha: f64,
    pub x_w: Vec3,
    pub y_perp: Vec3,
    pub a_xw: f64,
    pub a_zw: f64,
}

/// Unit airspeed direction `(v − v_wind)/‖v − v_wind‖`.
pub fn wind_axis(v: &Vec3, wind: &Vec3) -> Result<Vec3, FlatnessError> {
    let v_a = v - wind;
    let speed = v_a.norm();
    if speed < ZERO_VELOCITY_ENTER {
        return Err(FlatnessError::ZeroVelocity { speed });
    }
    Ok(v_a / speed)
}

/// Specific-force components along `x_w` and in the `x_w`–`z_w` plane.
/// `a_zw` is a negated norm and therefore never positive.
pub fn wind_frame_accels(x_w: &Vec3, a: &Vec3) -> (f64, f64) {
    let f = a - gravity();
    let a_xw = x_w.dot(&f);
    let a_zw = -(f - x_w * a_xw).norm();
    (a_xw, a_zw)
}

/// Closed-form thrust and angle of attack balancing the wind-frame forces.
///
/// Uses the dynamic pressure `q̄ = ½ρV_a²` for the aerodynamic terms. Fails
/// with [`FlatnessError::DegenerateBalance`] when the normalizer `k1`
/// vanishes, i.e. the specific force can be produced without thrust.
pub fn thrust_alpha(
    params: &AeroParams,
    airspeed: f64,
    a_xw: f64,
    a_zw: f64,
) -> Result<(f64, f64), FlatnessError> {
    let m = params.mass;
    let (s, c) = params.kappa.sin_cos();
    let qs = 0.5 * params.rho * airspeed * airspeed * params.wing_area;
    let lift = params.cla * qs;
    let k = params.cd0 * qs + m * a_xw;
    let maz = m * a_zw;
    let k1_sq = k * k * c * c + (k + lift).powi(2) * s * s + maz * maz - lift * maz * (2.0 * params.kappa).sin();
    let k1 = k1_sq.max(0.0).sqrt();
    if !(k1 >= 1e-9 * m * GRAVITY) {
        return Err(FlatnessError::DegenerateBalance { k1 });
    }
    let thrust = -(k * k + lift * k + maz * maz).abs() / k1;
    let num = (lift + k) * s - maz * c - k1;
    let den = k * c + maz * s;
    let mut alpha = wrap_pi(2.0 * num.atan2(den));
    // The balance is symmetric under (f_z, α) → (−f_z, α + π); keep the
    // branch whose implied thrust has the sign of the closed form.
    let (sa, ca) = alpha.sin_cos();
    let b = alpha - params.kappa;
    let implied = (k + lift * sa * sa) * b.sin() + (lift * sa * ca + maz) * b.cos();
    if implied > 0.0 {
        alpha = wrap_pi(alpha + std::f64::consts::PI);
    }
    Ok((thrust, alpha))
}

/// `y_perp = Q_a·C_y0·v_a − g + a`; the body y axis is orthogonal to it.
pub fn lateral_constraint(params: &AeroParams, v_a: &Vec3, a: &Vec3) -> Vec3 {
    params.q_a(v_a.norm()) * params.cy0 * v_a - gravity() + a
}

/// Attitude, thrust and angle of attack for a sample with a well-defined wind axis.
pub fn attitude_from_flat(
    params: &AeroParams,
    sample: &FlatSample,
    wind: &Vec3,
) -> Result<AttitudeSolution, FlatnessError> {
    let x_w = wind_axis(&sample.v, wind)?;
    let v_a = sample.v - wind;
    let y_perp = lateral_constraint(params, &v_a, &sample.a);
    let cross = x_w.cross(&y_perp);
    if cross.norm() <= EPS_CROSS * y_perp.norm() {
        return Err(FlatnessError::AlignedYPerp);
    }
    attitude_with_axes(params, sample, wind, &x_w, &cross.normalize())
}

/// Builds the attitude from a given wind axis and body y axis: `x_b` is `x_w`
/// rotated about `y_b` by `α − κ`.
pub fn attitude_with_axes(
    params: &AeroParams,
    sample: &FlatSample,
    wind: &Vec3,
    x_w: &Vec3,
    y_b: &Vec3,
) -> Result<AttitudeSolution, FlatnessError> {
    let v_a = sample.v - wind;
    let y_perp = lateral_constraint(params, &v_a, &sample.a);
    let (a_xw, a_zw) = wind_frame_accels(x_w, &sample.a);
    let (thrust, alpha) = thrust_alpha(params, v_a.norm(), a_xw, a_zw)?;
    let x_b = rodrigues(y_b, alpha - params.kappa).expect("y_b is unit by construction") * x_w;
    let z_b = x_b.cross(y_b);
    Ok(AttitudeSolution {
        attitude: Mat3::from_columns(&[x_b, *y_b, z_b]),
        thrust,
        alpha,
        x_w: *x_w,
        y_perp,
        a_xw,
        a_zw,
    })
}

/// Residual of the translational dynamics for a candidate `(R, f_z)`, m/s².
pub fn force_balance_residual(
    params: &AeroParams,
    sample: &FlatSample,
    wind: &Vec3,
    attitude: &Mat3,
    thrust: f64,
) -> Vec3 {
    let z_b = attitude.column(2).into_owned();
    z_b * (thrust / params.mass) + aero_accel_earth(params, attitude, &(sample.v - wind)) + gravity()
        - sample.a
}

/// Linear system `A·ω = b` for the body angular velocity.
///
/// Rows 0 and 1 are the body-x and body-y projections of the time derivative
/// of the translational dynamics; row 2 is the coordinated-turn constraint
/// `ω_x·v_zb − ω_z·v_xb = −g_yb`, or `ω_z = 0` when `heading_hold` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSystem {
    pub matrix: Mat3,
    pub rhs: Vec3,
}

impl RateSystem {
    pub fn assemble(
        params: &AeroParams,
        sample: &FlatSample,
        wind: &Vec3,
        attitude: &Mat3,
        thrust: f64,
        heading_hold: bool,
    ) -> Self {
        let rt = attitude.transpose();
        let v_a = sample.v - wind;
        let speed = v_a.norm();
        let d = drag_matrix(params).matrix();
        let q_a = params.q_a(speed);
        // d(Q_a)/dt with a constant wind
        let q_a_dot = if speed > 0.0 {
            params.rho * params.wing_area / (2.0 * params.mass) * v_a.dot(&sample.a) / speed
        } else {
            0.0
        };
        let u = rt * v_a;
        let c_z = thrust / params.mass;
        let coupling = d * skew(&u) - skew(&(d * u));

        let b = rt * sample.j + q_a_dot * (d * u) + q_a * (d * (rt * sample.a));
        let mut matrix = Mat3::zeros();
        for col in 0..3 {
            matrix[(0, col)] = -q_a * coupling[(0, col)];
            matrix[(1, col)] = -q_a * coupling[(1, col)];
        }
        matrix[(0, 1)] += c_z;
        matrix[(1, 0)] -= c_z;

        let (row2, rhs2) = if heading_hold {
            ([0.0, 0.0, 1.0], 0.0)
        } else {
            ([u.z, 0.0, -u.x], -(rt * gravity()).y)
        };
        for (col, value) in row2.into_iter().enumerate() {
            matrix[(2, col)] = value;
        }
        Self { matrix, rhs: Vec3::new(b.x, b.y, rhs2) }
    }

    pub fn solve(&self) -> Result<Vec3, FlatnessError> {
        let scale = self.matrix.norm().powi(3);
        let det = self.matrix.determinant();
        if !(scale > 0.0) || det.abs() < EPS_DET * scale {
            return Err(FlatnessError::SingularSystem { det: if scale > 0.0 { det / scale } else { 0.0 } });
        }
        self.matrix
            .lu()
            .solve(&self.rhs)
            .ok_or(FlatnessError::SingularSystem { det: det / scale })
    }

    /// `‖Aω − b‖`.
    pub fn residual(&self, omega: &Vec3) -> f64 {
        (self.matrix * omega - self.rhs).norm()
    }
}

/// Body angular velocity from the coordinated-turn system.
pub fn angular_velocity_from_flat(
    params: &AeroParams,
    sample: &FlatSample,
    wind: &Vec3,
    attitude: &Mat3,
    thrust: f64,
) -> Result<Vec3, FlatnessError> {
    RateSystem::assemble(params, sample, wind, attitude, thrust, false).solve()
}

/// Tunables of the stateful transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatnessSettings {
    /// Wind velocity in the earth frame, m/s.
    pub wind: Vec3,
    pub enter_speed: f64,
    pub exit_speed: f64,
    /// Reuse the last regular wind axis while the airspeed is too small.
    pub hold_last_heading: bool,
}

impl Default for FlatnessSettings {
    fn default() -> Self {
        Self {
            wind: Vec3::zeros(),
            enter_speed: ZERO_VELOCITY_ENTER,
            exit_speed: ZERO_VELOCITY_EXIT,
            hold_last_heading: true,
        }
    }
}

/// Caller-owned state for one trajectory stream: zero-velocity hysteresis,
/// the last regular wind axis, and the last valid angular velocity.
#[derive(Debug, Clone, Default)]
pub struct FlatnessContext {
    pub settings: FlatnessSettings,
    in_zero_velocity: bool,
    last_x_w: Option<Vec3>,
    last_rate: Option<Vec3>,
}

impl FlatnessContext {
    pub fn new(settings: FlatnessSettings) -> Self {
        Self { settings, ..Default::default() }
    }

    pub fn in_zero_velocity(&self) -> bool {
        self.in_zero_velocity
    }

    pub fn transform(&mut self, params: &AeroParams, sample: &FlatSample) -> FlatnessOutput {
        let wind = self.settings.wind;
        let speed = (sample.v - wind).norm();
        let threshold = if self.in_zero_velocity { self.settings.exit_speed } else { self.settings.enter_speed };
        self.in_zero_velocity = speed < threshold;

        let (solution, case, heading_hold) = if self.in_zero_velocity {
            let (solution, heading_hold) = self.zero_velocity_attitude(params, sample);
            (solution, SingularCase::ZeroVelocity, heading_hold)
        } else {
            let (solution, case) = self.regular_attitude(params, sample);
            (solution, case, false)
        };

        let rate = self.solve_rate(params, sample, &solution, heading_hold);
        self.last_rate = Some(rate);
        if case != SingularCase::ZeroVelocity {
            self.last_x_w = Some(solution.x_w);
        }
        FlatnessOutput {
            attitude: solution.attitude,
            thrust: solution.thrust,
            alpha: solution.alpha,
            body_rate: rate,
            x_w: solution.x_w,
            a_xw: solution.a_xw,
            a_zw: solution.a_zw,
            singular_case: case,
        }
    }

    fn heading_vector(&self, sample: &FlatSample, y_perp: &Vec3) -> Vec3 {
        if self.settings.hold_last_heading {
            if let Some(x_w) = self.last_x_w {
                if x_w.cross(y_perp).norm() > EPS_CROSS * y_perp.norm() {
                    return x_w;
                }
            }
        }
        let (s, c) = sample.yaw_fallback.sin_cos();
        let x_c = Vec3::new(c, s, 0.0);
        if x_c.cross(y_perp).norm() > EPS_CROSS * y_perp.norm() {
            x_c
        } else {
            Vec3::new(-s, c, 0.0)
        }
    }

    fn regular_attitude(&self, params: &AeroParams, sample: &FlatSample) -> (AttitudeSolution, SingularCase) {
        let wind = self.settings.wind;
        let v_a = sample.v - wind;
        let x_w = v_a.normalize();
        let y_perp = lateral_constraint(params, &v_a, &sample.a);
        let cross = x_w.cross(&y_perp);
        let (y_b, case) = if cross.norm() > EPS_CROSS * y_perp.norm() {
            (cross.normalize(), SingularCase::None)
        } else {
            // y_perp ∥ x_w: any y_b normal to x_w balances the forces, so take
            // the one fixed by the heading reference.
            let heading = self.heading_vector(sample, &y_perp);
            let y_b = heading.cross(&x_w);
            let y_b = if y_b.norm() > EPS_CROSS { y_b.normalize() } else { any_normal(&x_w) };
            (y_b, SingularCase::AlignedYPerp)
        };
        let solution = attitude_with_axes(params, sample, &wind, &x_w, &y_b)
            .unwrap_or_else(|_| thrust_free(params, sample, &x_w, &y_b, y_perp));
        (solution, case)
    }

    /// Returns the attitude and whether the heading-hold rate row applies.
    fn zero_velocity_attitude(&self, params: &AeroParams, sample: &FlatSample) -> (AttitudeSolution, bool) {
        let wind = self.settings.wind;
        let v_a = sample.v - wind;
        let y_perp = lateral_constraint(params, &v_a, &sample.a);

        if self.settings.hold_last_heading {
            if let Some(x_w) = self.last_x_w {
                let cross = x_w.cross(&y_perp);
                if cross.norm() > EPS_CROSS * y_perp.norm() {
                    let y_b = cross.normalize();
                    let solution = attitude_with_axes(params, sample, &wind, &x_w, &y_b)
                        .unwrap_or_else(|_| thrust_free(params, sample, &x_w, &y_b, y_perp));
                    return (solution, true);
                }
            }
        }

        let x_c = self.heading_vector(sample, &y_perp);
        let (a_xw, a_zw) = wind_frame_accels(&x_c, &sample.a);
        if y_perp.norm() < 1e-9 {
            let y_b = Vec3::z().cross(&x_c).normalize();
            let attitude = Mat3::from_columns(&[x_c, y_b, x_c.cross(&y_b)]);
            let solution =
                AttitudeSolution { attitude, thrust: 0.0, alpha: params.kappa, x_w: x_c, y_perp, a_xw, a_zw };
            return (solution, true);
        }
        let y_b = x_c.cross(&y_perp).normalize();
        let x_b = y_perp.cross(&y_b).normalize();
        let attitude = Mat3::from_columns(&[x_b, y_b, x_b.cross(&y_b)]);
        let thrust = rotor_thrust(params, sample, &wind, &attitude);
        let solution = AttitudeSolution { attitude, thrust, alpha: params.kappa, x_w: x_c, y_perp, a_xw, a_zw };
        (solution, true)
    }

    fn solve_rate(
        &self,
        params: &AeroParams,
        sample: &FlatSample,
        solution: &AttitudeSolution,
        heading_hold: bool,
    ) -> Vec3 {
        let wind = self.settings.wind;
        let solve = |hold| {
            RateSystem::assemble(params, sample, &wind, &solution.attitude, solution.thrust, hold).solve()
        };
        let first = solve(heading_hold);
        let result = if heading_hold { first } else { first.or_else(|_| solve(true)) };
        result.unwrap_or_else(|_| self.last_rate.unwrap_or_else(Vec3::zeros))
    }
}

/// Stateless transform: a fresh context per call, so the zero-velocity path
/// falls back to the sample's yaw.
pub fn flatness_transform(params: &AeroParams, sample: &FlatSample) -> FlatnessOutput {
    FlatnessContext::default().transform(params, sample)
}

/// Thrust that balances the dynamics along `z_b` for a given attitude.
fn rotor_thrust(params: &AeroParams, sample: &FlatSample, wind: &Vec3, attitude: &Mat3) -> f64 {
    let z_b = attitude.column(2).into_owned();
    let specific = sample.a - gravity() - aero_accel_earth(params, attitude, &(sample.v - wind));
    (params.mass * z_b.dot(&specific)).min(0.0)
}

/// Degenerate balance: no thrust is required, keep the body at `α = κ`.
fn thrust_free(params: &AeroParams, sample: &FlatSample, x_w: &Vec3, y_b: &Vec3, y_perp: Vec3) -> AttitudeSolution {
    let z_b = x_w.cross(y_b);
    let (a_xw, a_zw) = wind_frame_accels(x_w, &sample.a);
    AttitudeSolution {
        attitude: Mat3::from_columns(&[*x_w, *y_b, z_b]),
        thrust: 0.0,
        alpha: params.kappa,
        x_w: *x_w,
        y_perp,
        a_xw,
        a_zw,
    }
}

fn any_normal(v: &Vec3) -> Vec3 {
    let helper = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    v.cross(&helper).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aero::{aero_force_l_frame, r_b_l};
    use crate::geom::is_rotation;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params() -> AeroParams {
        AeroParams {
            mass: 1.5,
            kappa: 34f64.to_radians(),
            rho: 1.225,
            wing_area: 0.2,
            cd0: 0.05,
            cy0: 0.0,
            cla: 2.0,
        }
    }

    /// Eq.-of-motion residual through the l-frame force path (independent of
    /// the drag-matrix form used by the transform).
    fn l_frame_residual(p: &AeroParams, s: &FlatSample, r: &Mat3, thrust: f64) -> Vec3 {
        let rotor = r * Vec3::new(0.0, 0.0, thrust);
        let wing = r * r_b_l(p.kappa).transpose() * aero_force_l_frame(p, r, &s.v);
        (rotor + wing) / p.mass + gravity() - s.a
    }

    /// Newton iteration on the two wind-frame force equations.
    fn newton_thrust_alpha(p: &AeroParams, v: f64, a_xw: f64, a_zw: f64, guess: (f64, f64)) -> (f64, f64) {
        let qs = 0.5 * p.rho * v * v * p.wing_area;
        let f = |t: f64, al: f64| {
            let b = al - p.kappa;
            (
                t * b.sin() - qs * (p.cd0 + p.cla * al.sin().powi(2)) - p.mass * a_xw,
                t * b.cos() - qs * p.cla * al.sin() * al.cos() - p.mass * a_zw,
            )
        };
        let (mut t, mut al) = guess;
        for _ in 0..100 {
            let (r1, r2) = f(t, al);
            let h = 1e-7;
            let (r1t, r2t) = f(t + h, al);
            let (r1a, r2a) = f(t, al + h);
            let j = nalgebra::Matrix2::new((r1t - r1) / h, (r1a - r1) / h, (r2t - r2) / h, (r2a - r2) / h);
            let step = j.lu().solve(&nalgebra::Vector2::new(r1, r2)).unwrap();
            t -= step.x;
            al -= step.y;
            if step.norm() < 1e-14 {
                break;
            }
        }
        (t, al)
    }

    #[test]
    fn wind_axis_cases() {
        assert_eq!(wind_axis(&Vec3::new(10.0, 0.0, 0.0), &Vec3::zeros()).unwrap(), Vec3::x());
        assert!(matches!(wind_axis(&Vec3::zeros(), &Vec3::zeros()), Err(FlatnessError::ZeroVelocity { .. })));
        let x = wind_axis(&Vec3::new(3.0, 4.0, 0.0), &Vec3::zeros()).unwrap();
        assert_relative_eq!(x, Vec3::new(0.6, 0.8, 0.0), epsilon = 1e-15);
        let x = wind_axis(&Vec3::new(3.0, 4.0, 0.0), &Vec3::new(3.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(x, Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn wind_frame_accel_cases() {
        let (ax, az) = wind_frame_accels(&Vec3::x(), &Vec3::zeros());
        assert_eq!(ax, 0.0);
        assert_relative_eq!(az, -9.81, epsilon = 1e-15);
        let (ax, az) = wind_frame_accels(&Vec3::x(), &gravity());
        assert_eq!((ax, az), (0.0, 0.0));
        let (ax, az) = wind_frame_accels(&Vec3::x(), &Vec3::new(2.0, 0.0, -3.0));
        assert_relative_eq!(ax, 2.0, epsilon = 1e-15);
        assert_relative_eq!(az, -12.81, epsilon = 1e-14);
    }

    #[test]
    fn thrust_alpha_hover_limit() {
        let p = params();
        let (t, al) = thrust_alpha(&p, 0.0, 0.0, -GRAVITY).unwrap();
        assert_relative_eq!(t, -p.mass * GRAVITY, epsilon = 1e-12);
        assert_relative_eq!(al, p.kappa, epsilon = 1e-12);
    }

    #[test]
    fn thrust_alpha_quadcopter_limit() {
        let p = params().without_aero();
        for (ax, az) in [(1.0, -9.0), (-2.5, -12.0), (0.0, -3.0), (4.0, -0.5)] {
            let (t, _) = thrust_alpha(&p, 10.0, ax, az).unwrap();
            assert_relative_eq!(t, -p.mass * f64::hypot(ax, az), epsilon = 1e-12);
        }
    }

    #[test]
    fn thrust_alpha_matches_numerical_root() {
        let p = params();
        let (t, al) = thrust_alpha(&p, 10.0, 0.0, -9.81).unwrap();
        // Residual of the wind-frame force balance.
        let qs = 0.5 * 1.225 * 100.0 * 0.2;
        let b = al - p.kappa;
        let r1 = t * b.sin() - qs * (0.05 + 2.0 * al.sin().powi(2));
        let r2 = t * b.cos() - qs * 2.0 * al.sin() * al.cos() + 1.5 * 9.81;
        assert!(r1.abs() < 1e-8 * p.mass * GRAVITY && r2.abs() < 1e-8 * p.mass * GRAVITY);
        let (tn, aln) = newton_thrust_alpha(&p, 10.0, 0.0, -9.81, (-10.0, 0.3));
        assert_relative_eq!(t, tn, epsilon = 1e-9);
        assert_relative_eq!(al, aln, epsilon = 1e-9);
        // Frozen from the Newton oracle above.
        assert_relative_eq!(t, -8.478_129_697_884_128, epsilon = 1e-9);
        assert_relative_eq!(al.to_degrees(), 16.394_557_955_139_36, epsilon = 1e-8);
    }

    #[test]
    fn thrust_alpha_degenerate() {
        let p = params().without_aero();
        let err = thrust_alpha(&p, 5.0, 0.0, 0.0).unwrap_err();
        assert!(matches!(err, FlatnessError::DegenerateBalance { .. }));
    }

    #[test]
    fn hover_gives_identity_and_weight() {
        let p = params();
        let out = flatness_transform(&p, &FlatSample::hover(Vec3::zeros(), 0.0));
        assert_eq!(out.singular_case, SingularCase::ZeroVelocity);
        assert_relative_eq!(out.attitude, Mat3::identity(), epsilon = 1e-15);
        assert_relative_eq!(out.thrust, -p.mass * GRAVITY, epsilon = 1e-12);
        assert_eq!(out.body_rate, Vec3::zeros());
    }

    #[test]
    fn hover_with_yaw() {
        let p = params();
        let yaw = 0.7;
        let out = flatness_transform(&p, &FlatSample::hover(Vec3::zeros(), yaw));
        let expected = rodrigues(&Vec3::z(), yaw).unwrap();
        assert_relative_eq!(out.attitude, expected, epsilon = 1e-12);
    }

    #[test]
    fn straight_level_flight_has_zero_rate() {
        let p = params();
        let s = FlatSample {
            p: Vec3::zeros(),
            v: Vec3::new(10.0, 0.0, 0.0),
            a: Vec3::zeros(),
            j: Vec3::zeros(),
            yaw_fallback: 0.0,
        };
        let out = flatness_transform(&p, &s);
        assert_eq!(out.singular_case, SingularCase::None);
        assert_relative_eq!(out.body_rate, Vec3::zeros(), epsilon = 1e-14);
        // Wings level: y_b = e_y.
        assert_relative_eq!(out.attitude.column(1).into_owned(), Vec3::y(), epsilon = 1e-14);
        assert!(l_frame_residual(&p, &s, &out.attitude, out.thrust).norm() < 1e-8);
    }

    #[test]
    fn zero_aero_level_flight_reduces_to_quadcopter() {
        let p = params().without_aero();
        let s = FlatSample {
            p: Vec3::zeros(),
            v: Vec3::new(10.0, 0.0, 0.0),
            a: Vec3::zeros(),
            j: Vec3::zeros(),
            yaw_fallback: 0.0,
        };
        let sol = attitude_from_flat(&p, &s, &Vec3::zeros()).unwrap();
        assert_relative_eq!(sol.attitude.column(2).into_owned(), Vec3::z(), epsilon = 1e-12);
        assert_relative_eq!(sol.thrust, -p.mass * GRAVITY, epsilon = 1e-12);
    }

    #[test]
    fn vertical_ascent_uses_aligned_path() {
        let p = params();
        let s = FlatSample {
            p: Vec3::zeros(),
            v: Vec3::new(0.0, 0.0, -2.0),
            a: Vec3::zeros(),
            j: Vec3::zeros(),
            yaw_fallback: 0.0,
        };
        assert!(matches!(attitude_from_flat(&p, &s, &Vec3::zeros()), Err(FlatnessError::AlignedYPerp)));
        let out = flatness_transform(&p, &s);
        assert_eq!(out.singular_case, SingularCase::AlignedYPerp);
        assert!(is_rotation(&out.attitude, 1e-12));
        assert!(out.thrust <= 0.0);
        assert!(l_frame_residual(&p, &s, &out.attitude, out.thrust).norm() < 1e-8);
        assert!(out.body_rate.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn circle_sample_balances_forces() {
        // r = 15 m, 10 m/s level turn.
        let p = params();
        let speed = 10.0;
        let r = 15.0;
        let s = FlatSample {
            p: Vec3::zeros(),
            v: Vec3::new(0.0, speed, 0.0),
            a: Vec3::new(speed * speed / r, 0.0, 0.0),
            j: Vec3::new(0.0, -speed.powi(3) / (r * r), 0.0),
            yaw_fallback: 0.0,
        };
        let out = flatness_transform(&p, &s);
        assert_eq!(out.singular_case, SingularCase::None);
        let res = l_frame_residual(&p, &s, &out.attitude, out.thrust);
        assert!(res.norm() < 1e-8, "residual {res}");
        assert!(is_rotation(&out.attitude, 1e-12));
        let sys = RateSystem::assemble(&p, &s, &Vec3::zeros(), &out.attitude, out.thrust, false);
        assert!(sys.residual(&out.body_rate) < 1e-10 * (1.0 + sys.rhs.norm()));
    }

    #[test]
    fn hysteresis_holds_zero_velocity_mode() {
        let p = params();
        let mut ctx = FlatnessContext::default();
        let at = |speed: f64| FlatSample { v: Vec3::new(speed, 0.0, 0.0), ..FlatSample::hover(Vec3::zeros(), 0.0) };
        assert_eq!(ctx.transform(&p, &at(0.2)).singular_case, SingularCase::ZeroVelocity);
        assert_eq!(ctx.transform(&p, &at(0.4)).singular_case, SingularCase::ZeroVelocity);
        assert_eq!(ctx.transform(&p, &at(0.55)).singular_case, SingularCase::None);
        assert_eq!(ctx.transform(&p, &at(0.4)).singular_case, SingularCase::None);
        assert_eq!(ctx.transform(&p, &at(0.29)).singular_case, SingularCase::ZeroVelocity);
    }

    #[test]
    fn held_heading_is_used_below_threshold() {
        let p = params();
        let mut ctx = FlatnessContext::default();
        let heading = Vec3::new(0.6, 0.8, 0.0);
        let moving = FlatSample { v: heading * 5.0, ..FlatSample::hover(Vec3::zeros(), 0.0) };
        ctx.transform(&p, &moving);
        let slow = FlatSample { v: heading * 0.1, ..FlatSample::hover(Vec3::zeros(), 0.0) };
        let out = ctx.transform(&p, &slow);
        assert_eq!(out.singular_case, SingularCase::ZeroVelocity);
        assert_relative_eq!(out.x_w, heading, epsilon = 1e-15);
        // Fresh context ignores history and uses yaw 0.
        let fresh = flatness_transform(&p, &slow);
        assert_relative_eq!(fresh.x_w, Vec3::x(), epsilon = 1e-15);
    }

    fn arb_sample() -> impl Strategy<Value = FlatSample> {
        (
            prop::array::uniform3(-12.0..12.0f64),
            prop::array::uniform3(-6.0..6.0f64),
            prop::array::uniform3(-5.0..5.0f64),
        )
            .prop_filter("regular airspeed", |(v, _, _)| Vec3::from(*v).norm() > 1.0)
            .prop_map(|(v, a, j)| FlatSample {
                p: Vec3::zeros(),
                v: Vec3::from(v),
                a: Vec3::from(a),
                j: Vec3::from(j),
                yaw_fallback: 0.0,
            })
    }

    proptest! {
        #[test]
        fn regular_samples_balance_and_stay_orthogonal(s in arb_sample(), cy0 in 0.0..0.3f64) {
            let p = AeroParams { cy0, ..params() };
            let wind = Vec3::zeros();
            if let Ok(sol) = attitude_from_flat(&p, &s, &wind) {
                let y_b = sol.attitude.column(1).into_owned();
                prop_assert!(y_b.dot(&sol.y_perp).abs() < 1e-12 * (1.0 + sol.y_perp.norm()));
                prop_assert!(y_b.dot(&sol.x_w).abs() < 1e-12);
                prop_assert!(is_rotation(&sol.attitude, 1e-12));
                prop_assert!(sol.thrust <= 0.0);
                prop_assert!(sol.a_zw <= 0.0);
                let res = force_balance_residual(&p, &s, &wind, &sol.attitude, sol.thrust);
                prop_assert!(res.norm() < 1e-8, "residual {}", res);
                prop_assert!((sol.attitude.column(0).dot(&sol.x_w) - (sol.alpha - p.kappa).cos()).abs() < 1e-12);
                if let Ok(w) = angular_velocity_from_flat(&p, &s, &wind, &sol.attitude, sol.thrust) {
                    let u = sol.attitude.transpose() * s.v;
                    let g_yb = (sol.attitude.transpose() * gravity()).y;
                    prop_assert!((w.x * u.z - w.z * u.x + g_yb).abs() < 1e-12 * (1.0 + w.norm() * u.norm()));
                }
            }
        }

        #[test]
        fn zero_aero_matches_quadcopter_flatness(s in arb_sample()) {
            let p = params().without_aero();
            let sol = attitude_from_flat(&p, &s, &Vec3::zeros()).unwrap();
            let f = s.a - gravity();
            prop_assert!((sol.thrust + p.mass * f.norm()).abs() < 1e-12 * p.mass * (1.0 + f.norm()));
            let z_b = sol.attitude.column(2).into_owned();
            prop_assert!((z_b + f / f.norm()).norm() < 1e-12);
        }
    }
}
