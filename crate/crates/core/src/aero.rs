//! Lifting-wing aerodynamic force model.
//!
//! All force and acceleration functions return vectors that oppose the
//! airspeed in the pure-drag case: the parametric model gives magnitudes
//! along the frame axes, and the sign is fixed here so that the wing never
//! does positive work on the air.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AeroError {
    #[error("invalid aerodynamic parameter `{name}` = {value}: {reason}")]
    InvalidParam { name: &'static str, value: f64, reason: &'static str },
}

/// Vehicle mass and lifting-wing aerodynamic coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeroParams {
    /// kg
    pub mass: f64,
    /// Installation angle between the wing chord frame and the body frame, rad.
    pub kappa: f64,
    /// Air density, kg/m³.
    pub rho: f64,
    /// Wing area, m².
    pub wing_area: f64,
    /// Minimum drag coefficient.
    pub cd0: f64,
    /// Minimum side-force coefficient.
    pub cy0: f64,
    /// Lift-related coefficient.
    pub cla: f64,
}

impl Default for AeroParams {
    /// 1.5 kg airframe with the wing installed at 34°.
    fn default() -> Self {
        Self {
            mass: 1.5,
            kappa: 34f64.to_radians(),
            rho: 1.225,
            wing_area: 0.2,
            cd0: 0.05,
            cy0: 0.0,
            cla: 2.0,
        }
    }
}

impl AeroParams {
    pub fn validate(&self) -> Result<(), AeroError> {
        let check = |ok: bool, name: &'static str, value: f64, reason: &'static str| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(AeroError::InvalidParam { name, value, reason })
            }
        };
        check(self.mass > 0.0, "mass", self.mass, "must be positive")?;
        check(self.rho > 0.0, "rho", self.rho, "must be positive")?;
        check(self.wing_area >= 0.0, "wing_area", self.wing_area, "must be non-negative")?;
        check(self.cd0 >= 0.0, "cd0", self.cd0, "must be non-negative")?;
        check(self.cla >= 0.0, "cla", self.cla, "must be non-negative")?;
        check(self.cy0.is_finite(), "cy0", self.cy0, "must be finite")?;
        let kappa_ok = self.kappa > 15f64.to_radians() && self.kappa <= std::f64::consts::FRAC_PI_2 + 1e-12;
        check(kappa_ok, "kappa", self.kappa, "must lie in (15°, 90°]")
    }

    /// Same airframe with every aerodynamic coefficient zeroed.
    pub fn without_aero(&self) -> Self {
        Self { cd0: 0.0, cy0: 0.0, cla: 0.0, ..*self }
    }

    /// Same airframe with every aerodynamic coefficient multiplied by `factor`.
    pub fn scaled_coefficients(&self, factor: f64) -> Self {
        Self { cd0: self.cd0 * factor, cy0: self.cy0 * factor, cla: self.cla * factor, ..*self }
    }

    /// `ρS‖v_a‖ / 2m`, the speed-dependent factor of the aerodynamic acceleration.
    pub fn q_a(&self, airspeed: f64) -> f64 {
        self.rho * self.wing_area * airspeed / (2.0 * self.mass)
    }

    fn chord_coefficients(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::new(self.cd0, self.cy0, self.cd0 + self.cla))
    }
}

/// Body → lifting-wing frame rotation for installation angle `kappa`.
pub fn r_b_l(kappa: f64) -> Mat3 {
    let (s, c) = kappa.sin_cos();
    Mat3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

/// Lifting-wing → wind frame rotation for angle of attack `alpha`.
pub fn r_l_w(alpha: f64) -> Mat3 {
    let (s, c) = alpha.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Steady aerodynamic force in the wind frame, N.
///
/// `−½ρS·V_a²·[C_d0 + C_Lα sin²α, 0, C_Lα sinα cosα]`
pub fn aero_force_wind_frame(params: &AeroParams, airspeed: f64, alpha: f64) -> Vec3 {
    let (s, c) = alpha.sin_cos();
    let q = 0.5 * params.rho * params.wing_area * airspeed * airspeed;
    -q * Vec3::new(params.cd0 + params.cla * s * s, 0.0, params.cla * s * c)
}

/// Aerodynamic force in the lifting-wing frame, N, for body attitude `r_b_e`
/// and earth-frame airspeed vector `v_a`. Independent of the angle of attack.
pub fn aero_force_l_frame(params: &AeroParams, r_b_e: &Mat3, v_a: &Vec3) -> Vec3 {
    let v_l = r_b_l(params.kappa) * r_b_e.transpose() * v_a;
    -0.5 * params.rho * params.wing_area * v_a.norm() * (params.chord_coefficients() * v_l)
}

/// Drag-coefficient matrix of the body frame, `D = R_b^lᵀ·diag(C_d0, C_y0, C_d0+C_Lα)·R_b^l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragMatrix {
    pub cdx: f64,
    pub cdz: f64,
    pub cdxz: f64,
    pub cy0: f64,
}

impl DragMatrix {
    pub fn matrix(&self) -> Mat3 {
        Mat3::new(self.cdx, 0.0, self.cdxz, 0.0, self.cy0, 0.0, self.cdxz, 0.0, self.cdz)
    }
}

pub fn drag_matrix(params: &AeroParams) -> DragMatrix {
    let (s, c) = params.kappa.sin_cos();
    DragMatrix {
        cdx: params.cd0 * c * c + (params.cla + params.cd0) * s * s,
        cdz: params.cd0 * s * s + (params.cla + params.cd0) * c * c,
        cdxz: params.cla * s * c,
        cy0: params.cy0,
    }
}

/// Earth-frame acceleration due to the wing, m/s²:
/// `−(ρS‖v_a‖/2m)·R·D·Rᵀ·v_a`.
pub fn aero_accel_earth(params: &AeroParams, r: &Mat3, v_a: &Vec3) -> Vec3 {
    let d = drag_matrix(params).matrix();
    -params.q_a(v_a.norm()) * (r * d * r.transpose() * v_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{rodrigues, UnitQuat};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn sample_params() -> AeroParams {
        AeroParams { rho: 1.225, wing_area: 0.2, cd0: 0.05, cla: 2.0, ..AeroParams::default() }
    }

    #[test]
    fn r_b_l_special_angles() {
        assert_eq!(r_b_l(0.0), Mat3::identity());
        let r = r_b_l(FRAC_PI_2);
        assert_relative_eq!(r * Vec3::x(), Vec3::z(), epsilon = 1e-15);
        assert_relative_eq!(r * Vec3::z(), -Vec3::x(), epsilon = 1e-15);
    }

    #[test]
    fn r_b_l_is_rotation_about_y_by_minus_kappa() {
        let kappa = 34f64.to_radians();
        let oracle = rodrigues(&Vec3::y(), -kappa).unwrap();
        assert_relative_eq!(r_b_l(kappa), oracle, epsilon = 1e-15);
    }

    #[test]
    fn wind_frame_force_cases() {
        let p = sample_params();
        assert_eq!(aero_force_wind_frame(&p, 0.0, 0.3), Vec3::zeros());
        let f = aero_force_wind_frame(&p, 10.0, 0.0);
        assert_relative_eq!(f.x, -0.5 * 1.225 * 0.2 * 100.0 * 0.05, epsilon = 1e-14);
        assert_eq!(f.z, 0.0);
        // q̄S = 12.25 N; sin 0.2 = 0.19866933079506122, cos 0.2 = 0.9800665778412416
        let f = aero_force_wind_frame(&p, 10.0, 0.2);
        let (s, c) = (0.198_669_330_795_061_22_f64, 0.980_066_577_841_241_6_f64);
        assert_relative_eq!(f.x, -12.25 * (0.05 + 2.0 * s * s), epsilon = 1e-12);
        assert_relative_eq!(f.z, -12.25 * 2.0 * s * c, epsilon = 1e-12);
        assert_relative_eq!(f.x, -1.579_502_823_464_657_8, epsilon = 1e-12);
        assert_relative_eq!(f.z, -4.770_374_693_280_969, epsilon = 1e-12);
    }

    #[test]
    fn l_frame_force_zero_and_side_force() {
        let p = AeroParams { cy0: 0.3, ..sample_params() };
        assert_eq!(aero_force_l_frame(&p, &Mat3::identity(), &Vec3::zeros()), Vec3::zeros());
        // With R = I, y_l = y_b = e_y.
        let v = Vec3::new(0.0, 4.0, 0.0);
        let f = aero_force_l_frame(&p, &Mat3::identity(), &v);
        assert_relative_eq!(f, Vec3::new(0.0, -0.5 * 1.225 * 0.2 * 4.0 * 0.3 * 4.0, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn drag_matrix_limits() {
        let p = AeroParams { kappa: FRAC_PI_2, ..sample_params() };
        let d = drag_matrix(&p);
        assert_relative_eq!(d.cdx, 2.05, epsilon = 1e-15);
        assert_relative_eq!(d.cdz, 0.05, epsilon = 1e-15);
        assert_relative_eq!(d.cdxz, 0.0, epsilon = 1e-15);
        let d = drag_matrix(&p.without_aero().scaled_coefficients(1.0));
        assert_eq!((d.cdx, d.cdz, d.cdxz), (0.0, 0.0, 0.0));
        let p = AeroParams { cla: 0.0, cy0: 0.05, ..sample_params() };
        let d = drag_matrix(&p);
        assert_relative_eq!(d.cdx, 0.05, epsilon = 1e-15);
        assert_relative_eq!(d.cdz, 0.05, epsilon = 1e-15);
        assert_eq!(d.cdxz, 0.0);
    }

    #[test]
    fn drag_matrix_is_congruent_to_chord_coefficients() {
        let p = AeroParams { kappa: 34f64.to_radians(), cy0: 0.1, ..sample_params() };
        let d = drag_matrix(&p);
        // sin 34° = 0.5591929034707469, cos 34° = 0.8290375725550416
        let (s, c) = (0.559_192_903_470_746_9_f64, 0.829_037_572_555_041_6_f64);
        assert_relative_eq!(d.cdx, 0.05 * c * c + 2.05 * s * s, epsilon = 1e-14);
        assert_relative_eq!(d.cdz, 0.05 * s * s + 2.05 * c * c, epsilon = 1e-14);
        assert_relative_eq!(d.cdxz, 2.0 * s * c, epsilon = 1e-14);
        let rbl = r_b_l(p.kappa);
        let back = rbl * d.matrix() * rbl.transpose();
        assert_relative_eq!(back, Mat3::from_diagonal(&Vec3::new(0.05, 0.1, 2.05)), epsilon = 1e-14);
    }

    #[test]
    fn earth_accel_cases() {
        let p = AeroParams { cy0: 0.2, ..sample_params() };
        assert_eq!(aero_accel_earth(&p, &Mat3::identity(), &Vec3::zeros()), Vec3::zeros());
        let a = aero_accel_earth(&p, &Mat3::identity(), &Vec3::new(0.0, 5.0, 0.0));
        assert_eq!((a.x, a.z), (0.0, 0.0));
        assert_relative_eq!(a.y, -p.q_a(5.0) * 0.2 * 5.0, epsilon = 1e-15);
    }

    #[test]
    fn pure_drag_opposes_airspeed() {
        let p = AeroParams { cla: 0.0, cy0: 0.05, ..sample_params() };
        let r = UnitQuat::new(0.9, 0.1, -0.3, 0.2).to_rotation();
        let v = Vec3::new(3.0, -2.0, 1.0);
        let a = aero_accel_earth(&p, &r, &v);
        assert_relative_eq!(a, -(p.rho * p.wing_area * 0.05 / (2.0 * p.mass)) * v.norm() * v, epsilon = 1e-14);
    }

    #[test]
    fn validate_limits() {
        assert!(AeroParams::default().validate().is_ok());
        assert!(AeroParams { mass: 0.0, ..Default::default() }.validate().is_err());
        assert!(AeroParams { kappa: 10f64.to_radians(), ..Default::default() }.validate().is_err());
        assert!(AeroParams { kappa: FRAC_PI_2, ..Default::default() }.validate().is_ok());
        assert!(AeroParams { cla: -1.0, ..Default::default() }.validate().is_err());
    }

    fn arb_rotation() -> impl Strategy<Value = Mat3> {
        prop::array::uniform4(-1.0..1.0f64)
            .prop_filter("non-zero", |q| q.iter().map(|x| x * x).sum::<f64>() > 1e-3)
            .prop_map(|q| UnitQuat::new(q[0], q[1], q[2], q[3]).to_rotation())
    }

    proptest! {
        #[test]
        fn earth_accel_equals_rotated_l_frame_force(r in arb_rotation(),
                                                    v in prop::array::uniform3(-15.0..15.0f64),
                                                    cy0 in 0.0..0.5f64) {
            let p = AeroParams { cy0, ..sample_params() };
            let v = Vec3::from(v);
            let r_l_e = r * r_b_l(p.kappa).transpose();
            let two_path = r_l_e * aero_force_l_frame(&p, &r, &v) / p.mass;
            let direct = aero_accel_earth(&p, &r, &v);
            prop_assert!((two_path - direct).norm() <= 1e-12 * (1.0 + direct.norm()));
        }

        #[test]
        fn aero_never_does_positive_work(r in arb_rotation(),
                                         v in prop::array::uniform3(-15.0..15.0f64),
                                         cy0 in 0.0..0.5f64) {
            let p = AeroParams { cy0, ..sample_params() };
            let v = Vec3::from(v);
            prop_assert!(aero_accel_earth(&p, &r, &v).dot(&v) <= 1e-12);
            let eig = drag_matrix(&p).matrix().symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|&e| e >= -1e-12));
        }

        #[test]
        fn force_scales_quadratically(r in arb_rotation(),
                                      v in prop::array::uniform3(-10.0..10.0f64),
                                      k in 0.1..5.0f64,
                                      alpha in -1.0..1.0f64) {
            let p = sample_params();
            let v = Vec3::from(v);
            let f1 = aero_force_l_frame(&p, &r, &v);
            let fk = aero_force_l_frame(&p, &r, &(v * k));
            prop_assert!((fk - f1 * k * k).norm() <= 1e-12 * (1.0 + fk.norm()));
            let w1 = aero_force_wind_frame(&p, 3.0, alpha);
            let wk = aero_force_wind_frame(&p, 3.0 * k, alpha);
            prop_assert!((wk - w1 * k * k).norm() <= 1e-12 * (1.0 + wk.norm()));
        }
    }
}
