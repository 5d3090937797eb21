//! Analytic reference trajectories with exact derivatives up to jerk.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::flatness::FlatSample;
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    /// Circle entered with constant angular acceleration, then held at `speed_cap`.
    Circle,
    /// Lemniscate of Gerono `[r(1 − cos ½ωt), r sin ωt]`.
    Lemniscate,
    Hover,
    /// Straight line at `speed_cap` along heading `yaw_fallback`.
    Line,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryDef {
    pub kind: TrajectoryKind,
    pub p0: Vec3,
    /// m
    pub r: f64,
    /// rad/s (rad/s² of phase acceleration for the circle)
    pub omega: f64,
    /// m/s
    pub speed_cap: f64,
    /// Heading used where the airspeed direction is undefined, rad.
    pub yaw_fallback: f64,
}

impl TrajectoryDef {
    pub fn circle(r: f64, omega: f64, speed_cap: f64) -> Self {
        Self { kind: TrajectoryKind::Circle, p0: Vec3::zeros(), r, omega, speed_cap, yaw_fallback: FRAC_PI_2 }
    }

    /// r = 15 m, ω = 0.06 rad/s, capped at 10 m/s.
    pub fn default_circle() -> Self {
        Self::circle(15.0, 0.06, 10.0)
    }

    pub fn lemniscate(r: f64, omega: f64) -> Self {
        Self {
            kind: TrajectoryKind::Lemniscate,
            p0: Vec3::zeros(),
            r,
            omega,
            speed_cap: f64::INFINITY,
            yaw_fallback: FRAC_PI_2,
        }
    }

    /// r = 20 m, ω = 0.33 rad/s.
    pub fn default_lemniscate() -> Self {
        Self::lemniscate(20.0, 0.33)
    }

    pub fn hover(p0: Vec3, yaw: f64) -> Self {
        Self { kind: TrajectoryKind::Hover, p0, r: 0.0, omega: 0.0, speed_cap: 1.0, yaw_fallback: yaw }
    }

    pub fn line(p0: Vec3, speed: f64, heading: f64) -> Self {
        Self { kind: TrajectoryKind::Line, p0, r: 0.0, omega: 0.0, speed_cap: speed, yaw_fallback: heading }
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = self.p0.iter().all(|x| x.is_finite()) && self.r.is_finite() && self.omega.is_finite();
        if !finite {
            return Err("trajectory parameters must be finite".into());
        }
        if self.r < 0.0 || self.omega < 0.0 {
            return Err("trajectory r and omega must be non-negative".into());
        }
        let needs_cap = matches!(self.kind, TrajectoryKind::Circle | TrajectoryKind::Line);
        if needs_cap && !(self.speed_cap > 0.0) {
            return Err("trajectory speed_cap must be positive".into());
        }
        Ok(())
    }

    /// Time at which the circle reaches `speed_cap`; `None` for other kinds or
    /// when the cap is never reached.
    pub fn switch_time(&self) -> Option<f64> {
        if self.kind != TrajectoryKind::Circle || self.r <= 0.0 || self.omega <= 0.0 {
            return None;
        }
        let t = self.speed_cap / (self.r * self.omega);
        t.is_finite().then_some(t)
    }

    /// Period of the closed path, s.
    pub fn period(&self) -> Option<f64> {
        match self.kind {
            TrajectoryKind::Lemniscate if self.omega > 0.0 => Some(4.0 * std::f64::consts::PI / self.omega),
            _ => None,
        }
    }

    pub fn sample(&self, t: f64) -> FlatSample {
        let (v, a, j, offset) = match self.kind {
            TrajectoryKind::Hover => (Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), Vec3::zeros()),
            TrajectoryKind::Line => {
                let (s, c) = self.yaw_fallback.sin_cos();
                let v = Vec3::new(c, s, 0.0) * self.speed_cap;
                (v, Vec3::zeros(), Vec3::zeros(), v * t)
            }
            TrajectoryKind::Circle => self.circle_terms(t),
            TrajectoryKind::Lemniscate => self.lemniscate_terms(t),
        };
        FlatSample { p: self.p0 + offset, v, a, j, yaw_fallback: self.yaw_fallback }
    }

    /// Phase θ and its first three derivatives.
    fn circle_phase(&self, t: f64) -> [f64; 4] {
        match self.switch_time() {
            Some(ts) if t >= ts => {
                let rate = self.omega * ts;
                [0.5 * self.omega * ts * ts + rate * (t - ts), rate, 0.0, 0.0]
            }
            _ => [0.5 * self.omega * t * t, self.omega * t, self.omega, 0.0],
        }
    }

    fn circle_terms(&self, t: f64) -> (Vec3, Vec3, Vec3, Vec3) {
        let [th, th1, th2, th3] = self.circle_phase(t);
        let r = self.r;
        let (s, c) = th.sin_cos();
        let tangent = Vec3::new(s, c, 0.0);
        let normal = Vec3::new(c, -s, 0.0);
        let p = r * Vec3::new(1.0 - c, s, 0.0);
        let v = r * th1 * tangent;
        let a = r * th2 * tangent + r * th1 * th1 * normal;
        let j = r * (th3 - th1.powi(3)) * tangent + 3.0 * r * th1 * th2 * normal;
        (v, a, j, p)
    }

    fn lemniscate_terms(&self, t: f64) -> (Vec3, Vec3, Vec3, Vec3) {
        let (r, w) = (self.r, self.omega);
        let (sh, ch) = (0.5 * w * t).sin_cos();
        let (s, c) = (w * t).sin_cos();
        let p = Vec3::new(r * (1.0 - ch), r * s, 0.0);
        let v = Vec3::new(0.5 * r * w * sh, r * w * c, 0.0);
        let a = Vec3::new(0.25 * r * w * w * ch, -r * w * w * s, 0.0);
        let j = Vec3::new(-0.125 * r * w.powi(3) * sh, -r * w.powi(3) * c, 0.0);
        (v, a, j, p)
    }
}

/// Largest relative error between central differences of (p, v, a) at step
/// `h` and the analytic (v, a, j), each scaled by `max(‖analytic‖, 1)`.
pub fn derivative_check(def: &TrajectoryDef, t: f64, h: f64) -> f64 {
    let lo = def.sample(t - h);
    let hi = def.sample(t + h);
    let mid = def.sample(t);
    let rel = |fd: Vec3, exact: Vec3| (fd - exact).norm() / exact.norm().max(1.0);
    let ev = rel((hi.p - lo.p) / (2.0 * h), mid.v);
    let ea = rel((hi.v - lo.v) / (2.0 * h), mid.a);
    let ej = rel((hi.a - lo.a) / (2.0 * h), mid.j);
    ev.max(ea).max(ej)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn circle_start() {
        let def = TrajectoryDef::default_circle();
        let s = def.sample(0.0);
        assert_eq!(s.p, Vec3::zeros());
        assert_eq!(s.v, Vec3::zeros());
        assert_relative_eq!(s.a, Vec3::new(0.0, 15.0 * 0.06, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn circle_tangential_velocity_formula() {
        let def = TrajectoryDef::default_circle();
        let t = 4.0;
        let th: f64 = 0.5 * 0.06 * t * t;
        let expected = 15.0 * 0.06 * t * Vec3::new(th.sin(), th.cos(), 0.0);
        assert_relative_eq!(def.sample(t).v, expected, epsilon = 1e-14);
    }

    #[test]
    fn hover_is_constant() {
        let def = TrajectoryDef::hover(Vec3::new(1.0, 2.0, -3.0), 0.0);
        for t in [0.0, 1.0, 100.0] {
            let s = def.sample(t);
            assert_eq!(s.p, Vec3::new(1.0, 2.0, -3.0));
            assert_eq!((s.v, s.a, s.j), (Vec3::zeros(), Vec3::zeros(), Vec3::zeros()));
        }
        assert_eq!(derivative_check(&def, 3.0, 1e-5), 0.0);
    }

    #[test]
    fn lemniscate_half_period() {
        let def = TrajectoryDef::default_lemniscate();
        let s = def.sample(2.0 * std::f64::consts::PI / def.omega);
        assert_relative_eq!(s.p.x, 2.0 * def.r, epsilon = 1e-12);
        assert!(s.p.y.abs() < 1e-12);
        let full = def.sample(def.period().unwrap());
        assert!(full.p.norm() < 1e-12);
    }

    #[test]
    fn circle_switch_is_c1() {
        let def = TrajectoryDef::default_circle();
        let ts = def.switch_time().unwrap();
        assert_relative_eq!(ts, 10.0 / (15.0 * 0.06), epsilon = 1e-15);
        let eps = 1e-9;
        let before = def.sample(ts - eps);
        let after = def.sample(ts + eps);
        assert!((before.p - after.p).norm() < 1e-7);
        assert!((before.v - after.v).norm() < 1e-7);
        // Phase continuity at the switch itself.
        let th_acc = 0.5 * def.omega * ts * ts;
        assert_relative_eq!(def.circle_phase(ts)[0], th_acc, epsilon = 1e-12);
        let at = def.sample(ts);
        let (s, c) = th_acc.sin_cos();
        let p_acc = def.r * Vec3::new(1.0 - c, s, 0.0);
        let v_acc = def.r * def.omega * ts * Vec3::new(s, c, 0.0);
        assert!((at.p - p_acc).norm() < 1e-12);
        assert!((at.v - v_acc).norm() < 1e-12);
    }

    #[test]
    fn circle_constant_speed_phase() {
        let def = TrajectoryDef::default_circle();
        for t in [12.0, 20.0, 55.5] {
            let s = def.sample(t);
            assert_relative_eq!(s.v.norm(), 10.0, epsilon = 1e-9);
            assert_relative_eq!(s.a.norm(), 100.0 / 15.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn derivative_checks() {
        let circle = TrajectoryDef::default_circle();
        assert!(derivative_check(&circle, 5.0, 1e-5) < 1e-6);
        let lem = TrajectoryDef::default_lemniscate();
        let period = lem.period().unwrap();
        let worst = (0..=400).map(|k| derivative_check(&lem, period * k as f64 / 400.0, 1e-5)).fold(0.0, f64::max);
        assert!(worst < 1e-5, "worst {worst}");
        let line = TrajectoryDef::line(Vec3::zeros(), 4.0, 0.3);
        assert!(derivative_check(&line, 2.0, 1e-4) < 1e-9);
    }

    proptest! {
        #[test]
        fn planar_samples(t in 0.0..60.0f64, which in 0..3usize) {
            let def = [TrajectoryDef::default_circle(), TrajectoryDef::default_lemniscate(),
                TrajectoryDef::line(Vec3::zeros(), 5.0, 1.0)][which];
            let s = def.sample(t);
            prop_assert_eq!((s.v.z, s.a.z, s.j.z, s.p.z), (0.0, 0.0, 0.0, 0.0));
        }

        #[test]
        fn circle_speed_never_exceeds_cap(t in 0.0..60.0f64) {
            let def = TrajectoryDef::default_circle();
            prop_assert!(def.sample(t).v.norm() <= 10.0 + 1e-9);
        }
    }
}
